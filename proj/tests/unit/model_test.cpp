#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "quip/errors.hpp"
#include "quip/model.hpp"
#include "quip/serialize.hpp"
#include "quip/training.hpp"
#include "helpers.hpp"

using namespace quip;
using testing_support::vec;

namespace {

ModelConfig tiny(std::size_t n = 5) {
  ModelConfig c;
  c.n = n;
  c.embedding.dim = 3;
  c.embedding.bucket_count = 64;
  c.filters = {2, 2};
  c.kernel_heights = {2, 2};
  c.dense_width = 4;
  return c;
}

TokenizedPair pair(Tokens comment, Tokens reply, int label, std::size_t n = 5) {
  return {pad_or_truncate(std::move(comment), n), pad_or_truncate(std::move(reply), n), label};
}

}  // namespace

TEST(ModelConfig, DefaultDenseWidthAndFeatureLength) {
  ModelConfig c;
  c.embedding.dim = 30;
  EXPECT_EQ(c.resolved_dense_width(), 4u * 30u * 64u);
  // Four blocks, each (n - 2) rows of 64 filters at n = 20.
  EXPECT_EQ(c.feature_length(), 4u * 18u * 64u);
}

TEST(ModelConfig, RejectsBadValues) {
  auto c = tiny();
  c.n = 2;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny();
  c.slope = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny();
  c.filters = {2};
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_NO_THROW(tiny().validate());
}

TEST(Model, SeedDeterminesInitialWeights) {
  QuipModel a(tiny(), 7), b(tiny(), 7), c(tiny(), 8);
  EXPECT_EQ(a.parameters().snapshot(), b.parameters().snapshot());
  EXPECT_NE(a.parameters().snapshot(), c.parameters().snapshot());
}

TEST(Model, ParameterNamesAndDecayFlags) {
  QuipModel model(tiny(), 1);
  std::set<std::string> names, decayed;
  for (const auto& p : model.parameters()) {
    names.insert(p.name);
    if (p.weight_decay) decayed.insert(p.name);
  }
  for (const char* expected : {"embedding.buckets", "encoder.comment.fwd.w_input", "encoder.reply.bwd.bias",
                               "cnn1.conv1.kernel", "cnn4.conv2.bias", "head.dense.weight", "head.out.bias"})
    EXPECT_TRUE(names.count(expected)) << expected;
  EXPECT_EQ(decayed, (std::set<std::string>{"head.dense.weight", "head.out.weight"}));
}

TEST(Model, ForwardShapesAndRange) {
  QuipModel model(tiny(), 2);
  const auto r = model.forward(model.encode(pair({"oh", "great"}, {"sure", "thing", "pal"}, 1)));
  EXPECT_EQ(r.comment.hidden_seq.shape(), (Shape{5, 3}));
  EXPECT_EQ(r.maps.fwd_cu.shape(), (Shape{5}));
  EXPECT_EQ(r.features.p.size(), model.config().feature_length());
  const double y = r.prediction.item();
  EXPECT_GT(y, 0.0);
  EXPECT_LT(y, 1.0);
  EXPECT_EQ(model.predict(model.encode(pair({"oh", "great"}, {"sure", "thing", "pal"}, 1))), y);
}

TEST(Model, EncodeMarksPadPositions) {
  QuipModel model(tiny(), 2);
  const auto e = model.encode(pair({"a", "b"}, {"c"}, 0));
  EXPECT_EQ(e.comment_mask, (std::vector<double>{1, 1, 0, 0, 0}));
  EXPECT_EQ(e.reply_mask, (std::vector<double>{1, 0, 0, 0, 0}));
}

TEST(Model, WrongLengthPairIsDimensionError) {
  QuipModel model(tiny(), 2);
  TokenizedPair bad{{"a", "b"}, pad_or_truncate({"c"}, 5), 0};
  EXPECT_THROW(model.encode(bad), DimensionError);
}

TEST(Model, PadMaskZeroesPadScores) {
  auto c = tiny();
  c.mask_pad = true;
  QuipModel model(c, 3);
  const auto r = model.forward(model.encode(pair({"a", "b", "c"}, {"d"}, 0)));
  const auto fwd_cu = vec(r.maps.fwd_cu), fwd_cv = vec(r.maps.fwd_cv);
  for (std::size_t i = 1; i < 5; ++i) EXPECT_EQ(fwd_cu[i], 0.0);
  for (std::size_t i = 3; i < 5; ++i) EXPECT_EQ(fwd_cv[i], 0.0);
}

TEST(Model, SaveLoadPreservesPredictions) {
  QuipModel model(tiny(), 4);
  const auto data = testing_support::trigger_dataset(5, 4, 16);
  TrainConfig t;
  t.epochs = 2;
  t.patience = 2;
  t.batch_size = 4;
  train(model, data, data, t);
  std::stringstream file;
  write_weights(file, model.parameters());
  QuipModel restored(tiny(), 99);
  assign_weights(restored.parameters(), read_weights(file));
  for (const auto& p : data) EXPECT_EQ(restored.predict(restored.encode(p)), model.predict(model.encode(p)));
}

TEST(Model, FrozenEmbeddingGetsNoUpdate) {
  QuipModel model(tiny(), 6);
  model.set_embedding_trainable(false);
  const auto before = vec(model.parameters().find("embedding.buckets").tensor);
  const auto data = testing_support::trigger_dataset(5, 6, 8);
  TrainConfig t;
  t.epochs = 1;
  t.patience = 1;
  t.batch_size = 4;
  train(model, data, data, t);
  EXPECT_EQ(vec(model.parameters().find("embedding.buckets").tensor), before);
}
