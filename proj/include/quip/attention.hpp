#pragma once

#include <vector>

#include "quip/encoder.hpp"
#include "quip/tensor.hpp"

namespace quip {

// Four inter-sentence score vectors, each over the n positions of the
// opposite sentence. Values are raw dot products (no normalization).
struct AttentionMaps {
  Tensor fwd_cu;  // comment forward cell . reply hidden rows
  Tensor bwd_cu;  // comment backward cell . reply hidden rows
  Tensor fwd_cv;  // reply forward cell . comment hidden rows
  Tensor bwd_cv;  // reply backward cell . comment hidden rows
};

// Hidden sequences rescaled row by row by the matching score vector.
struct ContextualizedStates {
  Tensor reply_on_comment_fwd;  // fwd_cu[i] * reply.hidden_seq[i]
  Tensor reply_on_comment_bwd;  // bwd_cu[i] * reply.hidden_seq[i]
  Tensor comment_on_reply_fwd;  // fwd_cv[i] * comment.hidden_seq[i]
  Tensor comment_on_reply_bwd;  // bwd_cv[i] * comment.hidden_seq[i]
};

// Both switches default off; the plain mechanism uses raw scores everywhere.
struct AttentionOptions {
  // Normalize each score vector with a softmax before rescaling.
  bool softmax = false;
  // Per-position keep flags (1 keep, 0 zero out), typically 0 at PAD.
  // Empty means no masking.
  std::vector<double> comment_mask;
  std::vector<double> reply_mask;
};

// scores[i] = cell . hidden_seq[i]
Tensor attention_scores(const Tensor& cell, const Tensor& hidden_seq);
// row i = scores[i] * hidden_seq[i]
Tensor contextualize(const Tensor& scores, const Tensor& hidden_seq);

struct BiIscaOutput {
  AttentionMaps maps;
  ContextualizedStates states;
};

BiIscaOutput bi_isca(const EncoderState& comment, const EncoderState& reply, const AttentionOptions& options = {});

}  // namespace quip
