#include "quip/attention.hpp"

#include "quip/errors.hpp"
#include "quip/ops.hpp"

namespace quip {

Tensor attention_scores(const Tensor& cell, const Tensor& hidden_seq) {
  if (cell.rank() != 1 || hidden_seq.rank() != 2 || hidden_seq.dim(1) != cell.size()) {
    throw DimensionError("attention_scores: cell " + shape_string(cell.shape()) + " vs hidden sequence " +
                         shape_string(hidden_seq.shape()));
  }
  return ops::matvec(hidden_seq, cell);
}

Tensor contextualize(const Tensor& scores, const Tensor& hidden_seq) { return ops::row_scale(scores, hidden_seq); }

namespace {

Tensor apply_options(Tensor scores, const std::vector<double>& mask, bool softmax) {
  if (!mask.empty()) {
    if (mask.size() != scores.size()) {
      throw DimensionError("attention mask of length " + std::to_string(mask.size()) + " for " +
                           std::to_string(scores.size()) + " scores");
    }
    scores = ops::mul(scores, Tensor::constant(scores.shape(), mask));
  }
  if (!softmax) return scores;
  if (mask.empty()) return ops::softmax(scores);
  // Masked positions get no probability mass.
  std::vector<double> shift(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) shift[i] = mask[i] != 0.0 ? 0.0 : -1e30;
  return ops::softmax(ops::add(scores, Tensor::constant(scores.shape(), std::move(shift))));
}

}  // namespace

BiIscaOutput bi_isca(const EncoderState& comment, const EncoderState& reply, const AttentionOptions& options) {
  if (comment.hidden_seq.shape() != reply.hidden_seq.shape()) {
    throw ContractError("bi_isca: comment hidden sequence " + shape_string(comment.hidden_seq.shape()) +
                        " and reply hidden sequence " + shape_string(reply.hidden_seq.shape()) + " differ");
  }
  const std::size_t d = comment.hidden_seq.dim(1);
  for (const Tensor* cell : {&comment.fwd_final_cell, &comment.bwd_final_cell, &reply.fwd_final_cell,
                             &reply.bwd_final_cell}) {
    if (cell->shape() != Shape{d}) {
      throw ContractError("bi_isca: final cell " + shape_string(cell->shape()) + " does not match d=" +
                          std::to_string(d));
    }
  }

  BiIscaOutput out;
  out.maps.fwd_cu = apply_options(attention_scores(comment.fwd_final_cell, reply.hidden_seq), options.reply_mask, false);
  out.maps.bwd_cu = apply_options(attention_scores(comment.bwd_final_cell, reply.hidden_seq), options.reply_mask, false);
  out.maps.fwd_cv = apply_options(attention_scores(reply.fwd_final_cell, comment.hidden_seq), options.comment_mask, false);
  out.maps.bwd_cv = apply_options(attention_scores(reply.bwd_final_cell, comment.hidden_seq), options.comment_mask, false);

  auto weights = [&](const Tensor& scores, const std::vector<double>& mask) {
    return options.softmax ? apply_options(scores, mask, true) : scores;
  };
  out.states.reply_on_comment_fwd = contextualize(weights(out.maps.fwd_cu, options.reply_mask), reply.hidden_seq);
  out.states.reply_on_comment_bwd = contextualize(weights(out.maps.bwd_cu, options.reply_mask), reply.hidden_seq);
  out.states.comment_on_reply_fwd = contextualize(weights(out.maps.fwd_cv, options.comment_mask), comment.hidden_seq);
  out.states.comment_on_reply_bwd = contextualize(weights(out.maps.bwd_cv, options.comment_mask), comment.hidden_seq);
  return out;
}

}  // namespace quip
