#include "quip/encoder.hpp"

#include <cmath>

#include "quip/errors.hpp"
#include "quip/ops.hpp"

namespace quip {

namespace {
Tensor uniform_parameter(Shape shape, double bound, Rng& rng) {
  std::vector<double> values(shape_size(shape));
  for (double& v : values) v = rng.uniform(-bound, bound);
  return Tensor::parameter(std::move(shape), std::move(values));
}

Tensor zero_parameter(Shape shape) {
  const std::size_t n = shape_size(shape);
  return Tensor::parameter(std::move(shape), std::vector<double>(n, 0.0));
}
}  // namespace

LstmParams LstmParams::init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  LstmParams p;
  p.w_input = uniform_parameter({4 * hidden_dim, input_dim}, bound, rng);
  p.w_hidden = uniform_parameter({4 * hidden_dim, hidden_dim}, bound, rng);
  p.bias = uniform_parameter({4 * hidden_dim}, bound, rng);
  return p;
}

LstmParams LstmParams::zeros(std::size_t input_dim, std::size_t hidden_dim) {
  return {zero_parameter({4 * hidden_dim, input_dim}), zero_parameter({4 * hidden_dim, hidden_dim}),
          zero_parameter({4 * hidden_dim})};
}

LstmState lstm_step(const Tensor& x, const Tensor& h, const Tensor& c, const LstmParams& params) {
  const std::size_t hidden = params.hidden_dim();
  if (x.rank() != 1 || x.size() != params.input_dim()) {
    throw DimensionError("lstm_step: input " + shape_string(x.shape()) + " vs input weights " +
                         shape_string(params.w_input.shape()));
  }
  if (h.shape() != Shape{hidden} || c.shape() != Shape{hidden}) {
    throw DimensionError("lstm_step: state shapes " + shape_string(h.shape()) + "/" + shape_string(c.shape()) +
                         " vs hidden size " + std::to_string(hidden));
  }
  const Tensor z = ops::add(ops::add(ops::matvec(params.w_input, x), ops::matvec(params.w_hidden, h)), params.bias);
  const Tensor input_gate = ops::sigmoid(ops::slice(z, 0, hidden));
  const Tensor forget_gate = ops::sigmoid(ops::slice(z, hidden, hidden));
  const Tensor candidate = ops::tanh(ops::slice(z, 2 * hidden, hidden));
  const Tensor output_gate = ops::sigmoid(ops::slice(z, 3 * hidden, hidden));
  Tensor c_next = ops::add(ops::mul(forget_gate, c), ops::mul(input_gate, candidate));
  Tensor h_next = ops::mul(output_gate, ops::tanh(c_next));
  return {std::move(h_next), std::move(c_next)};
}

LstmRun lstm_sequence(const Tensor& sentence, const LstmParams& params, Direction direction) {
  if (sentence.rank() != 2) throw DimensionError("lstm_sequence: expected [n x d], got " + shape_string(sentence.shape()));
  const std::size_t n = sentence.dim(0);
  if (n == 0) throw ContractError("lstm_sequence: empty sentence");
  const std::size_t hidden = params.hidden_dim();

  LstmRun run;
  run.hidden.resize(n);
  Tensor h = Tensor::zeros({hidden});
  Tensor c = Tensor::zeros({hidden});
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t t = direction == Direction::kForward ? step : n - 1 - step;
    auto next = lstm_step(ops::row(sentence, t), h, c, params);
    h = std::move(next.h);
    c = std::move(next.c);
    run.hidden[t] = h;
  }
  run.final_cell = std::move(c);
  return run;
}

EncoderState bilstm_encode(const Tensor& sentence, const LstmParams& fwd, const LstmParams& bwd) {
  if (sentence.rank() != 2 || sentence.dim(0) == 0) {
    throw ContractError("bilstm_encode: need a non-empty [n x d] sentence");
  }
  if (fwd.hidden_dim() != bwd.hidden_dim()) throw DimensionError("bilstm_encode: directions differ in hidden size");
  LstmRun forward = lstm_sequence(sentence, fwd, Direction::kForward);
  LstmRun backward = lstm_sequence(sentence, bwd, Direction::kBackward);
  std::vector<Tensor> rows;
  rows.reserve(forward.hidden.size());
  for (std::size_t t = 0; t < forward.hidden.size(); ++t) rows.push_back(ops::add(forward.hidden[t], backward.hidden[t]));
  return {ops::stack_rows(rows), std::move(forward.final_cell), std::move(backward.final_cell)};
}

}  // namespace quip
