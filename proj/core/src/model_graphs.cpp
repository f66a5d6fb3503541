#include "prbcast/model_graphs.hpp"

#include <cmath>

#include "prbcast/errors.hpp"
#include "prbcast/gaussian.hpp"

namespace prbcast::graphs {

using ad::Var;

LstmState lstm_cell_step(const LstmLayerVars& layer, const ad::Var& x, const LstmState& prev) {
  const std::size_t hidden = prev.h.shape().back();
  const Var joined = ad::concat({x, prev.h}, 1);                 // (B, in+H)
  const Var gates = ad::add_bias(ad::matmul(joined, layer.weight), layer.bias);  // (B, 4H)
  const Var gate_i = ad::sigmoid(ad::slice(gates, 1, 0, hidden));
  const Var gate_f = ad::sigmoid(ad::slice(gates, 1, hidden, hidden));
  const Var gate_g = ad::tanh(ad::slice(gates, 1, 2 * hidden, hidden));
  const Var gate_o = ad::sigmoid(ad::slice(gates, 1, 3 * hidden, hidden));
  LstmState next;
  next.c = ad::add(ad::mul(gate_f, prev.c), ad::mul(gate_i, gate_g));
  next.h = ad::mul(gate_o, ad::tanh(next.c));
  return next;
}

std::vector<LstmState> lstm_zero_state(ad::Tape& tape, std::size_t layers, std::size_t batch,
                                       std::size_t hidden) {
  std::vector<LstmState> states;
  states.reserve(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    LstmState s;
    s.h = tape.constant(ad::Tensor::zeros({batch, hidden}));
    s.c = tape.constant(ad::Tensor::zeros({batch, hidden}));
    states.push_back(s);
  }
  return states;
}

ad::Var lstm_stack_step(const std::vector<LstmLayerVars>& layers, const ad::Var& x,
                        std::vector<LstmState>& states) {
  if (layers.size() != states.size()) {
    throw ContractError("lstm_stack_step: layer/state count mismatch");
  }
  Var input = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    states[l] = lstm_cell_step(layers[l], input, states[l]);
    input = states[l].h;
  }
  return input;
}

ad::Var sigma_activation(const ad::Var& raw) {
  return ad::add_const(ad::softplus(raw), kSigmaFloor);
}

ad::Var gaussian_nll_terms(const ad::Var& mu, const ad::Var& sigma, const ad::Var& target) {
  constexpr double kHalfLogTwoPi = 0.91893853320467274178032973640562;
  const Var diff = ad::sub(target, mu);
  const Var z = ad::div(diff, sigma);
  const Var quad = ad::scale(ad::mul(z, z), 0.5);
  return ad::add_const(ad::add(ad::log(sigma), quad), kHalfLogTwoPi);
}

ad::Var apply_layer_norm(const LayerNormVars& norm, const ad::Var& x) {
  return ad::layer_norm(x, norm.gain, norm.bias);
}

ad::Var multihead_attention(const AttentionVars& vars, const ad::Var& q_in, const ad::Var& kv_in,
                            std::size_t num_heads) {
  const std::size_t d_model = q_in.shape().back();
  if (num_heads == 0 || d_model % num_heads != 0) {
    throw ShapeError("attention: model dim " + std::to_string(d_model) +
                     " not divisible by heads " + std::to_string(num_heads));
  }
  const std::size_t d_head = d_model / num_heads;
  const Var q = ad::add_bias(ad::matmul(q_in, vars.wq), vars.bq);
  const Var k = ad::add_bias(ad::matmul(kv_in, vars.wk), vars.bk);
  const Var v = ad::add_bias(ad::matmul(kv_in, vars.wv), vars.bv);
  const std::size_t last_axis = q.shape().size() - 1;

  std::vector<Var> head_outputs;
  head_outputs.reserve(num_heads);
  for (std::size_t h = 0; h < num_heads; ++h) {
    const Var qh = ad::slice(q, last_axis, h * d_head, d_head);
    const Var kh = ad::slice(k, last_axis, h * d_head, d_head);
    const Var vh = ad::slice(v, last_axis, h * d_head, d_head);
    Var scores = ad::matmul(qh, ad::transpose_last2(kh));
    scores = ad::scale(scores, 1.0 / std::sqrt(static_cast<double>(d_head)));
    const Var weights = ad::softmax_last(scores);
    head_outputs.push_back(ad::matmul(weights, vh));
  }
  const Var merged = ad::concat(head_outputs, last_axis);
  return ad::add_bias(ad::matmul(merged, vars.wo), vars.bo);
}

ad::Var feed_forward(const FfnVars& vars, const ad::Var& x) {
  const Var hidden = ad::relu(ad::add_bias(ad::matmul(x, vars.w1), vars.b1));
  return ad::add_bias(ad::matmul(hidden, vars.w2), vars.b2);
}

}  // namespace prbcast::graphs
