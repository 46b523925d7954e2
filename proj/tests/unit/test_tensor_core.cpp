#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "tdet/activations.hpp"
#include "tdet/conv.hpp"
#include "tdet/deform_conv.hpp"
#include "tdet/gradcheck.hpp"
#include "tdet/rng.hpp"

using namespace tdet;

namespace {

void fill(std::span<float> v, Rng& rng, double lo = -1.0, double hi = 1.0) {
  for (float& x : v) x = static_cast<float>(rng.uniform(lo, hi));
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  EXPECT_EQ(a.shape(), b.shape());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, static_cast<double>(std::abs(a.data()[i] - b.data()[i])));
  }
  return m;
}

}  // namespace

TEST(Tensor, RejectsDataLengthMismatch) {
  EXPECT_THROW(Tensor(Shape4{1, 2, 3, 4}, std::vector<float>(5)), ShapeError);
  Tensor t(Shape4{2, 3, 4, 5});
  EXPECT_EQ(t.size(), 120u);
  EXPECT_EQ(t.index(1, 2, 3, 4), 119u);
}

TEST(Conv2d, UnitKernelScales) {
  Rng rng(1);
  Tensor x(Shape4{2, 1, 5, 4});
  fill(x.data(), rng);
  ConvWeights w(1, 1, 1, 1);
  w.weight.at(0, 0, 0, 0) = 2.0f;
  const Tensor y = conv2d(x, w, {1, 0});
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y.data()[i], 2.0f * x.data()[i]);
}

TEST(Conv2d, CentreDeltaIsIdentity) {
  Rng rng(2);
  Tensor x(Shape4{1, 1, 6, 7});
  fill(x.data(), rng);
  ConvWeights w(1, 1, 3, 3);
  w.weight.at(0, 0, 1, 1) = 1.0f;
  EXPECT_EQ(max_abs_diff(conv2d(x, w, {1, 1}), x), 0.0);
}

TEST(Conv2d, MatchesDirectSummation) {
  Rng rng(3);
  Tensor x(Shape4{2, 3, 8, 8});
  ConvWeights w(4, 3, 3, 3);
  fill(x.data(), rng);
  fill(w.weight.data(), rng);
  fill(w.bias, rng);
  for (const ConvGeometry g : {ConvGeometry{1, 1}, ConvGeometry{2, 1}, ConvGeometry{1, 0}}) {
    EXPECT_LT(max_abs_diff(conv2d(x, w, g), oracle::conv2d(x, w, g)), 1e-5);
  }
}

TEST(Conv2d, RejectsChannelMismatch) {
  Tensor x(Shape4{1, 2, 5, 5});
  ConvWeights w(1, 3, 3, 3);
  EXPECT_THROW(conv2d(x, w, {1, 1}), ShapeError);
}

TEST(Conv2d, TranslationEquivariantOnInterior) {
  Rng rng(4);
  Tensor x(Shape4{1, 2, 10, 10});
  fill(x.data(), rng);
  Tensor shifted(x.shape());
  for (int c = 0; c < 2; ++c)
    for (int y = 0; y < 10; ++y)
      for (int xx = 1; xx < 10; ++xx) shifted.at(0, c, y, xx) = x.at(0, c, y, xx - 1);
  ConvWeights w(3, 2, 3, 3);
  fill(w.weight.data(), rng);
  const Tensor a = conv2d(x, w, {1, 1});
  const Tensor b = conv2d(shifted, w, {1, 1});
  for (int o = 0; o < 3; ++o)
    for (int y = 1; y < 9; ++y)
      for (int xx = 2; xx < 9; ++xx) EXPECT_NEAR(b.at(0, o, y, xx), a.at(0, o, y, xx - 1), 1e-6);
}

TEST(BilinearSample, LatticeMeanAndExterior) {
  const std::vector<float> data{0, 1, 2, 3};
  const PlaneView<float> map{data, 2, 2};
  EXPECT_EQ(bilinear_sample(map, 1.0f, 0.0f), 1.0f);
  EXPECT_EQ(bilinear_sample(map, 0.0f, 1.0f), 2.0f);
  EXPECT_FLOAT_EQ(bilinear_sample(map, 0.5f, 0.5f), 1.5f);
  EXPECT_EQ(bilinear_sample(map, -5.0f, -5.0f), 0.0f);
  // Half a pixel past the border blends with the zero exterior.
  EXPECT_FLOAT_EQ(bilinear_sample(map, 1.5f, 0.0f), 0.5f);
  EXPECT_EQ(bilinear_sample(map, std::nanf(""), 0.0f), 0.0f);
}

TEST(DeformConv, ZeroOffsetsMatchConv) {
  Rng rng(5);
  Tensor x(Shape4{2, 3, 9, 7});
  ConvWeights w(4, 3, 3, 3);
  fill(x.data(), rng);
  fill(w.weight.data(), rng);
  fill(w.bias, rng);
  const Tensor ref = conv2d(x, w, {2, 1});
  const Tensor offsets(Shape4{2, 18, ref.h(), ref.w()});
  EXPECT_LT(max_abs_diff(deformable_conv2d(x, offsets, w, {2, 1}), ref), 1e-6);
}

TEST(DeformConv, IntegerOffsetIsLatticeShift) {
  Rng rng(6);
  Tensor x(Shape4{1, 2, 8, 8});
  ConvWeights w(2, 2, 3, 3);
  fill(x.data(), rng);
  fill(w.weight.data(), rng);
  Tensor offsets(Shape4{1, 18, 8, 8});
  for (int k = 0; k < 9; ++k)
    for (float& v : offsets.plane(0, 2 * k)) v = 1.0f;  // dx = +1
  // Sampling x(p + 1) equals convolving the input shifted left by one.
  Tensor left(x.shape());
  for (int c = 0; c < 2; ++c)
    for (int y = 0; y < 8; ++y)
      for (int xx = 0; xx < 7; ++xx) left.at(0, c, y, xx) = x.at(0, c, y, xx + 1);
  const Tensor a = deformable_conv2d(x, offsets, w, {1, 1});
  const Tensor b = conv2d(left, w, {1, 1});
  for (int o = 0; o < 2; ++o)
    for (int y = 1; y < 7; ++y)
      for (int xx = 1; xx < 6; ++xx) EXPECT_NEAR(a.at(0, o, y, xx), b.at(0, o, y, xx), 1e-6);
}

TEST(DeformConv, MatchesDirectSummation) {
  Rng rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor x(Shape4{1, 2, 6, 6});
    ConvWeights w(3, 2, 3, 3);
    fill(x.data(), rng);
    fill(w.weight.data(), rng);
    fill(w.bias, rng);
    Tensor offsets(Shape4{1, 18, 6, 6});
    fill(offsets.data(), rng, -2.0, 2.0);
    EXPECT_LT(max_abs_diff(deformable_conv2d(x, offsets, w, {1, 1}),
                           oracle::deformable_conv2d(x, offsets, w, {1, 1})),
              1e-5);
  }
}

TEST(DeformConv, RejectsBadOffsetShape) {
  Tensor x(Shape4{1, 1, 5, 5});
  ConvWeights w(1, 1, 3, 3);
  EXPECT_THROW(deformable_conv2d(x, Tensor(Shape4{1, 9, 5, 5}), w, {1, 1}), ShapeError);
  EXPECT_THROW(deformable_conv2d(x, Tensor(Shape4{1, 18, 4, 5}), w, {1, 1}), ShapeError);
}

TEST(DeformConvBackward, ZeroUpstreamGivesZeroGrads) {
  Rng rng(8);
  Tensor x(Shape4{1, 2, 5, 5});
  ConvWeights w(2, 2, 3, 3);
  fill(x.data(), rng);
  fill(w.weight.data(), rng);
  Tensor offsets(Shape4{1, 18, 5, 5});
  fill(offsets.data(), rng, -1.5, 1.5);
  const auto g = deformable_conv2d_backward(x, offsets, w, {1, 1}, Tensor(Shape4{1, 2, 5, 5}));
  for (const float v : g.input.data()) EXPECT_EQ(v, 0.0f);
  for (const float v : g.offsets.data()) EXPECT_EQ(v, 0.0f);
  for (const float v : g.weights.weight.data()) EXPECT_EQ(v, 0.0f);
  for (const float v : g.weights.bias) EXPECT_EQ(v, 0.0f);
}

TEST(DeformConvBackward, ZeroOffsetsMatchConvBackward) {
  Rng rng(9);
  Tensor x(Shape4{2, 3, 7, 6});
  ConvWeights w(2, 3, 3, 3);
  fill(x.data(), rng);
  fill(w.weight.data(), rng);
  const ConvGeometry g{1, 1};
  Tensor up(conv_output_shape(x.shape(), 2, 3, 3, g));
  fill(up.data(), rng);
  const auto d = deformable_conv2d_backward(x, Tensor(Shape4{2, 18, up.h(), up.w()}), w, g, up);
  const auto c = conv2d_backward(x, w, g, up);
  EXPECT_LT(max_abs_diff(d.input, c.input), 1e-6);
  EXPECT_LT(max_abs_diff(d.weights.weight, c.weights.weight), 1e-6);
  for (std::size_t i = 0; i < c.weights.bias.size(); ++i) {
    EXPECT_NEAR(d.weights.bias[i], c.weights.bias[i], 1e-6);
  }
}

TEST(Activations, ReluAndSoftmax) {
  Tensor neg(Shape4{1, 2, 3, 3}, -1.5f);
  const Tensor r = relu(neg);
  for (const float v : r.data()) EXPECT_EQ(v, 0.0f);
  const Tensor uniform = softmax_channels(Tensor(Shape4{1, 4, 2, 2}, 3.0f));
  for (const float v : uniform.data()) EXPECT_FLOAT_EQ(v, 0.25f);
  Rng rng(10);
  Tensor x(Shape4{2, 5, 3, 4});
  fill(x.data(), rng, -20.0, 20.0);
  const Tensor s = activate(x, Activation::softmax_channels);
  for (int n = 0; n < 2; ++n)
    for (int y = 0; y < 3; ++y)
      for (int xx = 0; xx < 4; ++xx) {
        double sum = 0.0;
        for (int c = 0; c < 5; ++c) {
          EXPECT_GE(s.at(n, c, y, xx), 0.0f);
          EXPECT_LE(s.at(n, c, y, xx), 1.0f);
          sum += s.at(n, c, y, xx);
        }
        EXPECT_NEAR(sum, 1.0, 1e-6);
      }
}

TEST(GradCheck, EveryRegisteredOpPasses) {
  ASSERT_EQ(gradcheck_ops().size(), 5u);
  for (const auto& op : gradcheck_ops()) {
    for (const std::uint64_t seed : {1u, 2u, 3u}) {
      const GradCheckReport r = finite_diff_check(op, {seed, 1e-3, false});
      EXPECT_LT(r.max_rel_error, kGradCheckTolerance) << op << " seed " << seed;
      EXPECT_GT(r.checked, 0u);
    }
  }
}

TEST(GradCheck, ZeroUpstreamGivesZeroError) {
  for (const auto& op : gradcheck_ops()) {
    EXPECT_EQ(finite_diff_check(op, {4, 1e-3, true}).max_rel_error, 0.0) << op;
  }
}

TEST(GradCheck, UnknownOpRejected) {
  EXPECT_THROW(finite_diff_check("maxpool"), std::invalid_argument);
}

TEST(Activations, ReluPropagatesNaN) {
  Tensor x({1, 1, 1, 3});
  x.data()[0] = -1.0f;
  x.data()[1] = std::numeric_limits<float>::quiet_NaN();
  x.data()[2] = 2.0f;
  const Tensor y = relu(x);
  EXPECT_EQ(y.data()[0], 0.0f);
  EXPECT_TRUE(std::isnan(y.data()[1]));
  EXPECT_EQ(y.data()[2], 2.0f);
}
