#pragma once

#include <cstdint>
#include <vector>

#include "prbcast/tape.hpp"

namespace prbcast::graphs {

/// Graph builders shared by the forecasters. The finite-difference test
/// suite drives these same functions, so what gets gradient-checked is the
/// production forward path.

// -- recurrent cell -----------------------------------------------------------

/// Packed LSTM layer: weight (in+hidden) x 4*hidden with gate order
/// [input, forget, cell, output], bias 4*hidden.
struct LstmLayerVars {
  ad::Var weight;
  ad::Var bias;
};

struct LstmState {
  ad::Var h;
  ad::Var c;
};

/// One cell step on a batch: x is (B, in), state tensors are (B, hidden).
LstmState lstm_cell_step(const LstmLayerVars& layer, const ad::Var& x, const LstmState& prev);

/// Zero state for a stack of `layers` cells.
std::vector<LstmState> lstm_zero_state(ad::Tape& tape, std::size_t layers, std::size_t batch,
                                       std::size_t hidden);

/// Feeds x through every layer, updating `states` in place; returns the top
/// layer's hidden output.
ad::Var lstm_stack_step(const std::vector<LstmLayerVars>& layers, const ad::Var& x,
                        std::vector<LstmState>& states);

// -- distribution heads -------------------------------------------------------

/// softplus(raw) + sigma floor: strictly positive predictive scale.
ad::Var sigma_activation(const ad::Var& raw);

/// Elementwise Gaussian negative log-likelihood terms
/// 0.5 log(2 pi) + log sigma + (z - mu)^2 / (2 sigma^2).
ad::Var gaussian_nll_terms(const ad::Var& mu, const ad::Var& sigma, const ad::Var& target);

// -- transformer sublayers ----------------------------------------------------

struct LayerNormVars {
  ad::Var gain;
  ad::Var bias;
};

ad::Var apply_layer_norm(const LayerNormVars& norm, const ad::Var& x);

/// Projection weights, all (D, D) with D-length biases.
struct AttentionVars {
  ad::Var wq, bq;
  ad::Var wk, bk;
  ad::Var wv, bv;
  ad::Var wo, bo;
};

/// Scaled dot-product multi-head attention. Queries come from `q_in`
/// (B, Tq, D), keys/values from `kv_in` (B, Tk, D). Self-attention passes
/// the same tensor twice.
ad::Var multihead_attention(const AttentionVars& vars, const ad::Var& q_in, const ad::Var& kv_in,
                            std::size_t num_heads);

struct FfnVars {
  ad::Var w1, b1;  // (D, F), (F)
  ad::Var w2, b2;  // (F, D), (D)
};

ad::Var feed_forward(const FfnVars& vars, const ad::Var& x);

}  // namespace prbcast::graphs
