#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "quip/errors.hpp"
#include "quip/gradcheck.hpp"
#include "quip/ops.hpp"
#include "quip/parameters.hpp"
#include "quip/serialize.hpp"
#include "helpers.hpp"

using namespace quip;
using testing_support::max_abs_diff;
using testing_support::random_const;
using testing_support::random_param;
using testing_support::vec;

TEST(Tensor, ShapeInvariants) {
  const Tensor t = Tensor::constant({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rank(), 2u);
  EXPECT_DOUBLE_EQ(t.at(1, 2), 6.0);
  EXPECT_THROW(Tensor::constant({2, 3}, {1, 2, 3}), DimensionError);
  EXPECT_THROW(Tensor::zeros({2, 0}), DimensionError);
  EXPECT_FALSE(t.requires_grad());
}

TEST(Tensor, DetectsNonFiniteValues) {
  const Tensor ok = Tensor::constant({2}, {1.0, 2.0});
  const Tensor bad = Tensor::constant({2}, {1.0, std::numeric_limits<double>::quiet_NaN()});
  EXPECT_TRUE(ok.all_finite());
  EXPECT_FALSE(bad.all_finite());
}

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  const Tensor eye = Tensor::constant({2, 2}, {1, 0, 0, 1});
  const Tensor m = Tensor::constant({2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(vec(ops::matmul(eye, m)), (std::vector<double>{1, 2, 3, 4}));
}

TEST(Matmul, ZerosAnnihilate) {
  Rng rng(3);
  const Tensor out = ops::matmul(Tensor::zeros({2, 3}), random_const(rng, {3, 4}));
  EXPECT_EQ(out.shape(), (Shape{2, 4}));
  for (double v : out.values()) EXPECT_EQ(v, 0.0);
}

TEST(Matmul, MatchesTripleLoop) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor a = random_const(rng, {4, 5});
    const Tensor b = random_const(rng, {5, 3});
    const auto expected = oracle::matmul(testing_support::mat(a), testing_support::mat(b));
    EXPECT_LT(max_abs_diff(vec(ops::matmul(a, b)), expected.v), 1e-12);
  }
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  try {
    ops::matmul(Tensor::zeros({2, 3}), Tensor::zeros({4, 2}));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[4x2]"), std::string::npos) << msg;
  }
}

TEST(Backward, SquareAtThree) {
  const Tensor x = Tensor::parameter({1}, {3.0});
  backward(ops::mul(x, x));
  EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);
}

TEST(Backward, SigmoidAtZero) {
  const Tensor x = Tensor::parameter({1}, {0.0});
  backward(ops::sigmoid(x));
  EXPECT_DOUBLE_EQ(x.grad()[0], 0.25);
}

TEST(Backward, NonScalarRootIsContractError) {
  const Tensor x = Tensor::parameter({2}, {1.0, 2.0});
  EXPECT_THROW(backward(ops::scale(x, 2.0)), ContractError);
}

TEST(Backward, LeafGradientsAccumulate) {
  Tensor x = Tensor::parameter({1}, {2.0});
  const Tensor loss = ops::mul(x, x);
  backward(loss);
  backward(loss);
  EXPECT_DOUBLE_EQ(x.grad()[0], 8.0);
  x.zero_grad();
  EXPECT_DOUBLE_EQ(x.grad()[0], 0.0);
}

TEST(Backward, SharedParameterSumsPathGradients) {
  // y = w*a + w*b uses w twice; dy/dw = a + b.
  const Tensor w = Tensor::parameter({1}, {0.7});
  const Tensor a = Tensor::constant({1}, {2.0});
  const Tensor b = Tensor::constant({1}, {5.0});
  backward(ops::sum(ops::add(ops::mul(w, a), ops::mul(w, b))));
  EXPECT_DOUBLE_EQ(w.grad()[0], 7.0);
}

TEST(Backward, NoGradGuardRecordsNothing) {
  const Tensor x = Tensor::parameter({1}, {1.5});
  Tensor y;
  {
    NoGradGuard guard;
    y = ops::mul(x, x);
  }
  EXPECT_FALSE(y.requires_grad());
  EXPECT_TRUE(grad_mode_enabled());
}

TEST(Backward, CompositeMatchesFiniteDifferences) {
  Rng rng(5);
  ParameterSet params;
  params.add("a", random_param(rng, {3, 4}));
  params.add("b", random_param(rng, {4, 2}));
  auto loss = [&] { return ops::sum(ops::tanh(ops::matmul(params[0].tensor, params[1].tensor))); };
  const auto report = finite_diff_check(loss, params, 1e-5);
  EXPECT_LT(report.max_relative_error, 1e-6) << report.worst_parameter;
  EXPECT_EQ(report.entries_checked, 20u);
}

TEST(Ops, LeakyReluBothSides) {
  const Tensor x = Tensor::constant({3}, {2.0, -1.0, 0.0});
  EXPECT_EQ(vec(ops::leaky_relu(x, 0.3)), (std::vector<double>{2.0, -0.3, 0.0}));
  EXPECT_THROW(ops::leaky_relu(x, 1.5), ContractError);
}

TEST(Ops, SigmoidIsStableForLargeInputs) {
  const Tensor y = ops::sigmoid(Tensor::constant({2}, {800.0, -800.0}));
  EXPECT_EQ(y[0], 1.0);
  EXPECT_EQ(y[1], 0.0);
  EXPECT_TRUE(y.all_finite());
}

TEST(Ops, SoftmaxSumsToOne) {
  const Tensor y = ops::softmax(Tensor::constant({3}, {1.0, 2.0, 1000.0}));
  EXPECT_NEAR(y[0] + y[1] + y[2], 1.0, 1e-15);
  EXPECT_TRUE(y.all_finite());
}

TEST(Ops, ConvMatchesSlidingWindow) {
  Rng rng(8);
  for (int trial = 0; trial < 25; ++trial) {
    const Tensor in = random_const(rng, {6, 3});
    const Tensor kernel = random_const(rng, {4, 2, 3});
    const Tensor bias = random_const(rng, {4});
    const oracle::Conv conv{4, 2, 3, vec(kernel), vec(bias)};
    const auto expected = oracle::conv_valid(testing_support::mat(in), conv);
    const Tensor out = ops::conv1d_valid(in, kernel, bias);
    EXPECT_EQ(out.shape(), (Shape{5, 4}));
    EXPECT_LT(max_abs_diff(vec(out), expected.v), 1e-12);
  }
}

TEST(Ops, ConvRejectsKernelTallerThanInput) {
  EXPECT_THROW(ops::conv1d_valid(Tensor::zeros({2, 3}), Tensor::zeros({1, 3, 3}), Tensor::zeros({1})),
               DimensionError);
}

TEST(Ops, GatherMeanRows) {
  const Tensor table = Tensor::parameter({3, 2}, {1, 2, 3, 4, 5, 6});
  const Tensor out = ops::gather_mean_rows(table, {{0, 2}, {}, {1}});
  EXPECT_EQ(vec(out), (std::vector<double>{3, 4, 0, 0, 3, 4}));
  backward(ops::sum(out));
  EXPECT_EQ(table.grad(), (std::vector<double>{0.5, 0.5, 1.0, 1.0, 0.5, 0.5}));
}

TEST(Ops, SliceConcatStackShapes) {
  const Tensor v = Tensor::constant({4}, {1, 2, 3, 4});
  EXPECT_EQ(vec(ops::slice(v, 1, 2)), (std::vector<double>{2, 3}));
  EXPECT_THROW(ops::slice(v, 3, 2), DimensionError);
  const std::vector<Tensor> rows{v, v};
  EXPECT_EQ(ops::stack_rows(rows).shape(), (Shape{2, 4}));
  EXPECT_EQ(ops::concat(rows).shape(), (Shape{8}));
  EXPECT_THROW(ops::add(v, Tensor::zeros({3})), DimensionError);
}

TEST(Ops, EveryOpGradChecks) {
  Rng rng(21);
  ParameterSet params;
  params.add("m", random_param(rng, {4, 3}));
  params.add("v", random_param(rng, {3}));
  params.add("s", random_param(rng, {4}));
  params.add("k", random_param(rng, {2, 2, 3}));
  params.add("kb", random_param(rng, {2}));
  params.add("t", random_param(rng, {5, 2}));
  auto loss = [&] {
    const Tensor& m = params[0].tensor;
    const Tensor mv = ops::matvec(m, params[1].tensor);
    const Tensor scaled = ops::row_scale(ops::softmax(params[2].tensor), m);
    const Tensor conv = ops::conv1d_valid(scaled, params[3].tensor, params[4].tensor);
    const Tensor g = ops::gather_mean_rows(params[5].tensor, {{0, 1}, {4}, {2, 3, 1}});
    const std::vector<Tensor> parts{ops::sigmoid(mv), ops::tanh(ops::reshape(conv, {conv.size()})),
                                    ops::leaky_relu(ops::reshape(g, {6}), 0.3), ops::row(m, 2)};
    const Tensor all = ops::concat(parts);
    return ops::add(ops::mean(ops::mul(all, all)), ops::sum(ops::slice(all, 1, 3)));
  };
  const auto report = finite_diff_check(loss, params, 1e-6);
  EXPECT_LT(report.max_relative_error, 1e-6) << report.worst_parameter;
}

TEST(Ops, BceValues) {
  const double eps = ops::kBceClamp;
  EXPECT_NEAR(ops::bce(Tensor::constant({1}, {1.0 - eps}), std::vector<double>{1.0}).item(), 0.0, 1e-11);
  EXPECT_NEAR(ops::bce(Tensor::constant({2}, {0.5, 0.5}), std::vector<double>{1.0, 0.0}).item(), std::log(2.0), 1e-12);
  EXPECT_NEAR(ops::bce(Tensor::constant({1}, {0.9}), std::vector<double>{0.0}).item(), -std::log(0.1), 1e-12);
  EXPECT_TRUE(std::isfinite(ops::bce(Tensor::constant({1}, {0.0}), std::vector<double>{1.0}).item()));
  EXPECT_THROW(ops::bce(Tensor::constant({2}, {0.5, 0.5}), std::vector<double>{1.0}), ContractError);
}

TEST(GradCheck, LinearLossIsExact) {
  Rng rng(2);
  ParameterSet params;
  params.add("w", random_param(rng, {6}));
  const Tensor x = random_const(rng, {6});
  const auto report = finite_diff_check([&] { return ops::sum(ops::mul(params[0].tensor, x)); }, params, 1e-5);
  EXPECT_LT(report.max_relative_error, 1e-10);
  EXPECT_FALSE(report.fault);
}

TEST(GradCheck, QuadraticLossWithinTaylorBound) {
  Rng rng(4);
  ParameterSet params;
  params.add("w", random_param(rng, {5}));
  const auto report =
      finite_diff_check([&] { return ops::sum(ops::mul(params[0].tensor, params[0].tensor)); }, params, 1e-5);
  EXPECT_LT(report.max_relative_error, 1e-8);
}

TEST(GradCheck, MaxEqualsWorstPerParameter) {
  Rng rng(6);
  ParameterSet params;
  params.add("a", random_param(rng, {3}));
  params.add("b", random_param(rng, {3}));
  const auto report = finite_diff_check(
      [&] { return ops::sum(ops::tanh(ops::mul(params[0].tensor, params[1].tensor))); }, params, 1e-5);
  double worst = 0.0;
  for (const auto& [name, err] : report.per_parameter_errors) worst = std::max(worst, err);
  EXPECT_EQ(report.max_relative_error, worst);
  EXPECT_EQ(report.per_parameter_errors.at(report.worst_parameter), worst);
}

TEST(GradCheck, RejectsEpsOutsideRange) {
  ParameterSet params;
  params.add("w", Tensor::parameter({1}, {1.0}));
  auto loss = [&] { return ops::sum(params[0].tensor); };
  EXPECT_THROW(finite_diff_check(loss, params, 1e-2), ContractError);
  EXPECT_THROW(finite_diff_check(loss, params, 1e-9), ContractError);
}

TEST(GradCheck, NonFiniteLossIsAFaultNotAPass) {
  ParameterSet params;
  params.add("w", Tensor::parameter({1}, {1.0}));
  const Tensor inf = Tensor::constant({1}, {std::numeric_limits<double>::infinity()});
  const auto report = finite_diff_check([&] { return ops::sum(ops::mul(params[0].tensor, inf)); }, params, 1e-5);
  EXPECT_TRUE(report.fault);
  EXPECT_FALSE(report.passed(1e-4));
}

TEST(GradCheck, RestoresParameterValues) {
  Rng rng(9);
  ParameterSet params;
  params.add("w", random_param(rng, {4}));
  const auto before = vec(params[0].tensor);
  finite_diff_check([&] { return ops::sum(ops::tanh(params[0].tensor)); }, params, 1e-4);
  EXPECT_EQ(vec(params[0].tensor), before);
}

TEST(Parameters, RejectsDuplicatesAndInteriorNodes) {
  ParameterSet params;
  const Tensor w = Tensor::parameter({2}, {1, 2});
  params.add("w", w);
  EXPECT_THROW(params.add("w", Tensor::parameter({1}, {0})), ContractError);
  EXPECT_THROW(params.add("y", ops::scale(w, 2.0)), ContractError);
  EXPECT_THROW(params.find("missing"), ContractError);
  EXPECT_EQ(params.scalar_count(), 2u);
}

TEST(Serialize, RoundTripIsExactAndByteStable) {
  Rng rng(12);
  ParameterSet params;
  params.add("a", random_param(rng, {3, 2}));
  params.add("b", Tensor::parameter({1}, {0.1 + 0.2}));
  std::ostringstream first;
  write_weights(first, params);

  ParameterSet other;
  other.add("a", Tensor::parameter({3, 2}, std::vector<double>(6, 0.0)));
  other.add("b", Tensor::parameter({1}, {0.0}));
  std::istringstream in(first.str());
  assign_weights(other, read_weights(in));
  EXPECT_EQ(vec(other[0].tensor), vec(params[0].tensor));
  EXPECT_EQ(other[1].tensor[0], 0.1 + 0.2);

  std::ostringstream second;
  write_weights(second, other);
  EXPECT_EQ(first.str(), second.str());
}

TEST(Serialize, ShapeMismatchNamesBothShapes) {
  ParameterSet params;
  params.add("a", Tensor::parameter({2, 2}, {1, 2, 3, 4}));
  std::ostringstream out;
  write_weights(out, params);
  ParameterSet other;
  other.add("a", Tensor::parameter({4}, {0, 0, 0, 0}));
  std::istringstream in(out.str());
  try {
    assign_weights(other, read_weights(in));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x2]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[4]"), std::string::npos) << msg;
  }
}

TEST(Serialize, MalformedFileReportsLine) {
  std::istringstream in("quip-weights 1\nparams 1\nparam a 1 2\n1.0 oops\n");
  try {
    read_weights(in);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4u);
  }
}
