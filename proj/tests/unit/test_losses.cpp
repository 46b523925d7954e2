#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "tdet/adam.hpp"
#include "tdet/loss.hpp"
#include "tdet/rng.hpp"
#include "tdet/toy.hpp"
#include "tdet/train.hpp"

using namespace tdet;
using namespace tdet::loss;

namespace {

double oracle_classification(const std::vector<double>& p, const std::vector<double>& ps,
                             double n_f) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = std::min(std::max(p[i], 1e-7), 1.0 - 1e-7);
    s += ps[i] == 1.0 ? std::log(q) : std::log(1.0 - q);
  }
  return -s / n_f;
}

double oracle_smooth_l1(double x, double sigma) {
  const double knee = 1.0 / (sigma * sigma);
  return std::abs(x) < knee ? 0.5 * sigma * sigma * x * x : std::abs(x) - 0.5 * knee;
}

std::vector<TrainExample> toy_examples(int n) {
  std::vector<TrainExample> out;
  for (const DatasetImage& d : toy::make_toy_split(5, n, 64)) out.push_back(make_example(d.image, d.boxes));
  return out;
}

RunConfig short_run(int steps) {
  RunConfig c;
  c.train.steps = steps;
  return c;
}

}  // namespace

TEST(ClassificationLoss, Examples) {
  const std::vector<double> p{0.5}, one{1.0}, zero{0.0};
  EXPECT_NEAR(classification_loss<double>(p, one, 1), std::log(2.0), 1e-12);
  const std::vector<double> sure{1.0};
  EXPECT_NEAR(classification_loss<double>(sure, one, 1), 0.0, 1e-6);
  // Clamping keeps a confident mistake finite: -log(1e-7).
  EXPECT_NEAR(classification_loss<double>(sure, zero, 1), -std::log(1e-7), 1e-6);
  const std::vector<double> p2{0.9, 0.2}, ps2{1.0, 0.0};
  EXPECT_NEAR(classification_loss<double>(p2, ps2, 4),
              -(std::log(0.9) + std::log(0.8)) / 4.0, 1e-12);
}

TEST(ClassificationLoss, MatchesScalarOracle) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(64);
    std::vector<double> p(n), ps(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = rng.uniform();
      ps[i] = rng.below(2) ? 1.0 : 0.0;
    }
    const std::size_t n_f = 1 + rng.below(100);
    EXPECT_NEAR(classification_loss<double>(p, ps, n_f),
                oracle_classification(p, ps, static_cast<double>(n_f)), 1e-10);
  }
}

TEST(ClassificationLoss, RejectsBadInput) {
  const std::vector<double> a{0.5, 0.5}, b{1.0};
  EXPECT_THROW(classification_loss<double>(a, b, 1), std::invalid_argument);
  EXPECT_THROW(classification_loss<double>(b, b, 0), std::invalid_argument);
}

TEST(SmoothL1, Examples) {
  EXPECT_DOUBLE_EQ(smooth_l1(0.0, 3.0), 0.0);
  EXPECT_NEAR(smooth_l1(0.1, 3.0), 0.045, 1e-12);
  EXPECT_NEAR(smooth_l1(1.0, 3.0), 1.0 - 0.5 / 9.0, 1e-12);
  EXPECT_NEAR(smooth_l1(-2.0, 1.0), 1.5, 1e-12);
  EXPECT_NEAR(smooth_l1(0.5, 1.0), 0.125, 1e-12);
  EXPECT_DOUBLE_EQ(smooth_l1_grad(-2.0, 1.0), -1.0);
  EXPECT_NEAR(smooth_l1_grad(0.05, 3.0), 0.45, 1e-12);
}

TEST(SmoothL1, ContinuousAtKneeAndSymmetric) {
  for (const double sigma : {0.5, 1.0, 3.0}) {
    const double knee = 1.0 / (sigma * sigma);
    EXPECT_NEAR(smooth_l1(knee - 1e-9, sigma), smooth_l1(knee + 1e-9, sigma), 1e-8);
    EXPECT_NEAR(smooth_l1_grad(knee - 1e-12, sigma), 1.0, 1e-9);
    Rng rng(7);
    for (int i = 0; i < 100; ++i) {
      const double x = rng.uniform(-5, 5);
      EXPECT_DOUBLE_EQ(smooth_l1(x, sigma), smooth_l1(-x, sigma));
      EXPECT_NEAR(smooth_l1(x, sigma), oracle_smooth_l1(x, sigma), 1e-12);
      EXPECT_GE(smooth_l1(x, sigma), 0.0);
    }
  }
}

TEST(RegressionLoss, OnlyPositivesContribute) {
  const std::vector<Delta4<double>> t{{1, 0, 0, 0}, {5, 5, 5, 5}};
  const std::vector<Delta4<double>> ts{{0, 0, 0, 0}, {0, 0, 0, 0}};
  const std::vector<double> ps{1.0, 0.0};
  LossConfig c;
  c.alpha = 2.0;
  c.sigma = 1.0;
  EXPECT_NEAR(regression_loss<double>(t, ts, ps, 4, c), 2.0 * 0.5 / 4.0, 1e-12);
  const std::vector<double> none{0.0, 0.0};
  EXPECT_EQ(regression_loss<double>(t, ts, none, 1, c), 0.0);
}

TEST(RegressionLoss, IgnoresNonFiniteTargetsOfNegatives) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const std::vector<Delta4<double>> t{{0, 0, 0, 0}};
  const std::vector<Delta4<double>> ts{{nan, nan, nan, nan}};
  const std::vector<double> ps{0.0};
  EXPECT_EQ(regression_loss<double>(t, ts, ps, 1, LossConfig{}), 0.0);
}

TEST(TotalLoss, SumsTermsAndGradients) {
  BasicRpnBatch<double> b;
  b.p = {0.8, 0.3};
  b.p_star = {1.0, 0.0};
  b.t = {{0.1, 0.0, 0.0, 0.0}, {1.0, 1.0, 1.0, 1.0}};
  b.t_star = {{0.0, 0.0, 0.0, 0.0}, {0.0, 0.0, 0.0, 0.0}};
  b.n_f = 2;
  b.n_r = 1;
  const auto r = total_loss(b, LossConfig{});
  EXPECT_NEAR(r.classification, -(std::log(0.8) + std::log(0.7)) / 2.0, 1e-12);
  EXPECT_NEAR(r.regression, 0.045, 1e-12);
  EXPECT_NEAR(r.total, r.classification + r.regression, 1e-15);
  EXPECT_NEAR(r.grad_p[0], -1.0 / (2.0 * 0.8), 1e-12);
  EXPECT_NEAR(r.grad_p[1], 1.0 / (2.0 * 0.7), 1e-12);
  EXPECT_NEAR(r.grad_t[0][0], 0.9, 1e-12);
  for (int k = 0; k < 4; ++k) EXPECT_EQ(r.grad_t[1][k], 0.0);
  b.n_r = 0;
  EXPECT_THROW(total_loss(b, LossConfig{}), std::invalid_argument);
}

TEST(LossConfig, Validate) {
  LossConfig c;
  c.alpha = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = LossConfig{};
  c.sigma = -1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(SoftmaxXent, MatchesLogSumExpOracle) {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t rows = 1 + rng.below(10), classes = 2 + rng.below(4);
    std::vector<float> logits(rows * classes);
    std::vector<int> labels(rows);
    for (float& v : logits) v = static_cast<float>(rng.uniform(-20, 20));
    for (int& l : labels) l = static_cast<int>(rng.below(classes));
    const auto r = softmax_cross_entropy(logits, classes, labels);
    double want = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
      long double z = 0.0L;
      for (std::size_t c = 0; c < classes; ++c) z += std::exp(static_cast<long double>(logits[i * classes + c]));
      want += static_cast<double>(std::log(z) - logits[i * classes + static_cast<std::size_t>(labels[i])]);
      double gsum = 0.0;
      for (std::size_t c = 0; c < classes; ++c) gsum += r.grad[i * classes + c];
      EXPECT_NEAR(gsum, 0.0, 1e-6);
    }
    EXPECT_NEAR(r.loss, want / static_cast<double>(rows), 1e-9 * std::max(1.0, want));
  }
  const std::vector<float> l{0.0f, 0.0f};
  const std::vector<int> bad{2};
  EXPECT_THROW(softmax_cross_entropy(l, 2, bad), std::invalid_argument);
}

TEST(Adam, ZeroLearningRateIsIdentity) {
  std::vector<float> w{1.0f, -2.0f, 3.0f}, g{0.5f, -1.0f, 4.0f};
  const std::vector<float> before = w;
  AdamState s(AdamHyper{0.0});
  for (int i = 0; i < 5; ++i) adam_step({{"w", {3}, w, g}}, s);
  EXPECT_EQ(w, before);
  EXPECT_EQ(s.step, 5);
}

TEST(Adam, FirstStepIsLrTimesSign) {
  std::vector<float> w{1.0f, 1.0f, 1.0f}, g{0.3f, -7.0f, 0.0f};
  AdamState s(AdamHyper{0.01});
  adam_step({{"w", {3}, w, g}}, s);
  EXPECT_NEAR(w[0], 0.99f, 1e-6);
  EXPECT_NEAR(w[1], 1.01f, 1e-6);
  EXPECT_EQ(w[2], 1.0f);
}

TEST(Adam, MatchesScalarRecurrence) {
  const AdamHyper h{0.05, 0.9, 0.999, 1e-8};
  std::vector<float> w{2.0f}, g{0.0f};
  double x = 2.0, m = 0.0, v = 0.0;
  AdamState s(h);
  for (int t = 1; t <= 50; ++t) {
    g[0] = 2.0f * w[0];
    const double gd = 2.0 * x;
    adam_step({{"w", {1}, w, g}}, s);
    m = h.beta1 * m + (1 - h.beta1) * gd;
    v = h.beta2 * v + (1 - h.beta2) * gd * gd;
    const double mh = m / (1 - std::pow(h.beta1, t)), vh = v / (1 - std::pow(h.beta2, t));
    x -= h.lr * mh / (std::sqrt(vh) + h.eps);
    EXPECT_NEAR(w[0], x, 1e-4);
  }
  EXPECT_LT(std::abs(w[0]), 2.0f);
}

TEST(Adam, ShapeMismatchThrows) {
  std::vector<float> a{1.0f}, ga{1.0f}, b{1.0f, 2.0f}, gb{1.0f, 1.0f};
  AdamState s;
  adam_step({{"a", {1}, a, ga}}, s);
  EXPECT_THROW(adam_step({{"a", {2}, b, gb}}, s), ShapeError);
  EXPECT_THROW(adam_step({{"a", {1}, a, ga}, {"b", {2}, b, gb}}, s), ShapeError);
}

TEST(Training, StepLossesFiniteAndDeterministic) {
  const auto data = toy_examples(3);
  model::Detector a(model::ModelConfig{}, 1), b(model::ModelConfig{}, 1);
  const auto la = train_detector(a, data, short_run(4));
  const auto lb = train_detector(b, data, short_run(4));
  ASSERT_EQ(la.size(), 4u);
  for (std::size_t i = 0; i < la.size(); ++i) {
    EXPECT_FALSE(la[i].skipped);
    EXPECT_TRUE(std::isfinite(la[i].total));
    EXPECT_GT(la[i].classification, 0.0);
    EXPECT_NEAR(la[i].total, la[i].classification + la[i].regression, 1e-9);
    EXPECT_EQ(la[i].total, lb[i].total);
  }
}

TEST(Training, LogHasHeaderAndOneRowPerStep) {
  const auto data = toy_examples(2);
  model::Detector d(model::ModelConfig{}, 2);
  std::ostringstream log;
  train_detector(d, data, short_run(3), &log);
  std::istringstream in(log.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, kLossLogHeader);
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_EQ(line.rfind(std::to_string(rows) + ",", 0), 0u) << line;
  }
  EXPECT_EQ(rows, 3);
}

TEST(Training, NonFiniteStepsAreSkippedThenDiverge) {
  const auto data = toy_examples(2);
  model::Detector d(model::ModelConfig{}, 3);
  auto params = d.parameters();
  params[0].value[0] = std::numeric_limits<float>::quiet_NaN();
  const float untouched = params.back().value[0];
  const auto losses = train_detector(d, data, short_run(kMaxConsecutiveSkips - 1));
  for (const StepLosses& s : losses) EXPECT_TRUE(s.skipped);
  EXPECT_EQ(d.parameters().back().value[0], untouched);
  model::Detector e(model::ModelConfig{}, 3);
  e.parameters()[0].value[0] = std::numeric_limits<float>::quiet_NaN();
  std::ostringstream log;
  EXPECT_THROW(train_detector(e, data, short_run(50), &log), DivergenceError);
  EXPECT_NE(log.str().find("nan,nan,nan"), std::string::npos);
}

TEST(Training, SingleImageOverfits) {
  const auto data = toy_examples(1);
  model::Detector d(model::ModelConfig{}, 4);
  RunConfig c = short_run(100);
  c.train.lr = 1e-3;
  const auto l = train_detector(d, data, c);
  double head = 0.0, tail = 0.0;
  for (int i = 0; i < 10; ++i) head += l[static_cast<std::size_t>(i)].total;
  for (int i = 90; i < 100; ++i) tail += l[static_cast<std::size_t>(i)].total;
  EXPECT_LT(tail, 0.5 * head);
}
