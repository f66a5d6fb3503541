#include "prbcast/grad_check.hpp"

#include <cmath>

#include "prbcast/errors.hpp"

namespace prbcast::ad {

namespace {

double evaluate(const ScalarFn& fn, const std::vector<Tensor>& inputs) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const Tensor& t : inputs) vars.push_back(tape.constant(t));
  return fn(tape, vars).value().item();
}

}  // namespace

double grad_check(const ScalarFn& fn, const std::vector<Tensor>& inputs, double eps) {
  for (const Tensor& t : inputs) {
    if (!t.all_finite()) throw ContractError("grad_check: non-finite input");
  }

  Tape tape;
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const Tensor& t : inputs) vars.push_back(tape.leaf(t));
  const Var loss = fn(tape, vars);
  const std::vector<Tensor> grads = tape.backward(loss);

  double worst = 0.0;
  std::vector<Tensor> probe = inputs;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Tensor& analytic = grads[vars[i].id()];
    for (std::size_t j = 0; j < probe[i].numel(); ++j) {
      const double saved = probe[i][j];
      probe[i][j] = saved + eps;
      const double up = evaluate(fn, probe);
      probe[i][j] = saved - eps;
      const double down = evaluate(fn, probe);
      probe[i][j] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double denom = std::max(1e-8, std::abs(analytic[j]) + std::abs(numeric));
      worst = std::max(worst, std::abs(analytic[j] - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace prbcast::ad
