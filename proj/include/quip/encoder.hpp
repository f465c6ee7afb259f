#pragma once

#include <cstddef>
#include <vector>

#include "quip/random.hpp"
#include "quip/tensor.hpp"

namespace quip {

// Standard forget-gate LSTM cell, no peepholes. The 4*hidden gate rows are
// laid out as [input | forget | candidate | output].
struct LstmParams {
  Tensor w_input;   // [4h x input_dim]
  Tensor w_hidden;  // [4h x h]
  Tensor bias;      // [4h]

  std::size_t input_dim() const { return w_input.dim(1); }
  std::size_t hidden_dim() const { return w_hidden.dim(1); }

  // Every entry uniform in (-1/sqrt(hidden), 1/sqrt(hidden)).
  static LstmParams init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng);
  // All-zero weights and biases, as parameters.
  static LstmParams zeros(std::size_t input_dim, std::size_t hidden_dim);
};

struct LstmState {
  Tensor h;
  Tensor c;
};

// i, f, o = sigmoid(.), g = tanh(.) over W_x x + W_h h + b;
// c' = f * c + i * g;  h' = o * tanh(c').
LstmState lstm_step(const Tensor& x, const Tensor& h, const Tensor& c, const LstmParams& params);

enum class Direction { kForward, kBackward };

struct LstmRun {
  std::vector<Tensor> hidden;  // indexed by sequence position, not by step
  Tensor final_cell;
};

// One directional pass over the rows of `sentence` ([n x input_dim]) from a
// zero state. kBackward reads row n-1 first.
LstmRun lstm_sequence(const Tensor& sentence, const LstmParams& params, Direction direction);

struct EncoderState {
  Tensor hidden_seq;      // [n x d], row t = fwd h_t + bwd h_t
  Tensor fwd_final_cell;  // [d]
  Tensor bwd_final_cell;  // [d]
};

struct BiLstmParams {
  LstmParams forward;
  LstmParams backward;
};

EncoderState bilstm_encode(const Tensor& sentence, const LstmParams& fwd, const LstmParams& bwd);
inline EncoderState bilstm_encode(const Tensor& sentence, const BiLstmParams& p) {
  return bilstm_encode(sentence, p.forward, p.backward);
}

}  // namespace quip
