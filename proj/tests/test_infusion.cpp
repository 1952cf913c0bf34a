#include "cxrprior/infusion.hpp"

#include "doctest.h"

#include <cmath>
#include <cstring>
#include <limits>
#include <random>
#include <vector>

using namespace cxrprior;

namespace {

bool bitwise_equal(const Mat& a, const Mat& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0;
}

Mat random_matrix(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  Mat m(1 + rng() % 9, 1 + rng() % 9);
  for (double& x : m.data()) x = u(rng);
  m.data()[0] = -0.0;
  if (m.size() > 1) m.data()[1] = std::numeric_limits<double>::denorm_min();
  return m;
}

}  // namespace

TEST_CASE("infuse with zero is the identity, bit for bit") {
  std::mt19937_64 rng(100);
  for (int trial = 0; trial < 100; ++trial) {
    const VisualEmbedding v{random_matrix(rng)};
    CHECK(bitwise_equal(infuse(v, {0.0}).values, v.values));
    const LatentRepresentation l{random_matrix(rng)};
    CHECK(bitwise_equal(infuse(l, {0.0}).values, l.values));
  }
}

TEST_CASE("infuse broadcasts the scalar") {
  VisualEmbedding v{Mat(1, 2)};
  v.values(0, 0) = 0.5;
  v.values(0, 1) = -0.5;
  const auto out = infuse(v, {1.0});
  CHECK(out.values.rows() == 1);
  CHECK(out.values.cols() == 2);
  CHECK(out.values(0, 0) == 1.5);
  CHECK(out.values(0, 1) == 0.5);
}

TEST_CASE("property: infuse composes additively") {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    const LatentRepresentation l{random_matrix(rng)};
    const double a = u(rng);
    const double b = u(rng);
    const auto twice = infuse(infuse(l, {a}), {b});
    const auto once = infuse(l, {a + b});
    REQUIRE(twice.values.rows() == l.values.rows());
    REQUIRE(twice.values.cols() == l.values.cols());
    for (std::size_t i = 0; i < l.values.size(); ++i)
      CHECK(std::abs(twice.values.data()[i] - once.values.data()[i]) < 1e-12);
  }
}

TEST_CASE("visual_extract") {
  const ToyModel model;
  const ImagePair zeros{Mat(16, 16), Mat(16, 16)};
  const VisualEmbedding z = visual_extract(zeros, model);
  CHECK(z.values.rows() == model.config().sequence_length());
  CHECK(z.values.cols() == model.config().embed_dim);
  for (double x : z.values.data()) CHECK(x == 0.0);

  const ImagePair images = synthetic_images(kDefaultSeed);
  CHECK(bitwise_equal(visual_extract(images, model).values, visual_extract(images, ToyModel()).values));
  const ImagePair swapped{images.lateral, images.frontal};
  CHECK_FALSE(visual_extract(swapped, model).values == visual_extract(images, model).values);

  const ImagePair wrong{Mat(15, 16), Mat(16, 16)};
  CHECK_THROWS_WITH_AS(visual_extract(wrong, model), doctest::Contains("16"), DimensionError);
}

TEST_CASE("weights depend only on the seed") {
  const ToyModel a(5);
  const ToyModel b(5);
  const ToyModel c(6);
  CHECK(a.parameter_count() == 7296);
  bool same = true;
  bool differs = false;
  for (std::size_t i = 0; i < a.parameter_count(); ++i) {
    same = same && a.parameter(i) == b.parameter(i);
    differs = differs || a.parameter(i) != c.parameter(i);
  }
  CHECK(same);
  CHECK(differs);
}

TEST_CASE("forward is deterministic and P=0 matches the baseline") {
  const ToyModel model;
  const ImagePair images = synthetic_images(kDefaultSeed);
  const auto first = forward(images, {0.0}, model);
  const auto second = forward(images, {0.0}, model);
  CHECK(first.tokens == second.tokens);
  CHECK(bitwise_equal(first.latent.values, second.latent.values));

  const auto baseline = forward(images, {0.0}, model, kDefaultMaxLen, ForwardOptions{false});
  CHECK(first.tokens == baseline.tokens);
  CHECK(bitwise_equal(first.visual.values, baseline.visual.values));
  CHECK(bitwise_equal(first.latent.values, baseline.latent.values));
  CHECK(first.tokens.size() <= kDefaultMaxLen);

  CHECK_THROWS_AS(forward(images, {0.0}, model, 0), std::invalid_argument);
  CHECK_THROWS_AS(forward(images, {std::nan("")}, model), NumericalError);
}

TEST_CASE("the prior changes the latent and the decoded sequence") {
  const ToyModel model(kDefaultSeed);
  const ImagePair images = synthetic_images(kDefaultSeed);
  const auto p0 = forward(images, {0.0}, model);
  const auto p1 = forward(images, {1.0}, model);
  std::size_t differing = 0;
  for (std::size_t i = 0; i < p0.latent.values.size(); ++i)
    differing += p0.latent.values.data()[i] != p1.latent.values.data()[i];
  CHECK(differing == p0.latent.values.size());
  CHECK(p0.tokens != p1.tokens);
  for (std::size_t i = 0; i < p1.latent.values.size(); ++i)
    CHECK(p1.latent.values.data()[i] == p1.latent_plain.values.data()[i] + 1.0);
}

TEST_CASE("output length never exceeds max_len") {
  const ToyModel model(3);
  const ImagePair images = synthetic_images(3);
  for (std::size_t len = 1; len <= 6; ++len)
    for (double p : {0.0, 1.0}) CHECK(forward(images, {p}, model, len).tokens.size() <= len);
}

TEST_CASE("gradient with the latent path cut is zero in P") {
  const ToyModel model = ToyModel(kDefaultSeed).with_latent_path_zeroed();
  CHECK(model.parameter_count() == ToyModel(kDefaultSeed).parameter_count());
  const ImagePair images = synthetic_images(kDefaultSeed);
  const auto inputs = forward(images, {1.0}, model).decoder_inputs;
  const auto g = loss_gradient(images, {1.0}, model, inputs, {});
  CHECK(std::abs(g.gradient) < 1e-8);
  const auto report = grad_check(model, images, {1.0}, 0);
  CHECK(std::abs(report.entries[0].numeric) < 1e-8);
}

TEST_CASE("doubling the loss doubles the gradient") {
  const ToyModel model;
  const ImagePair images = synthetic_images(kDefaultSeed);
  const auto inputs = forward(images, {1.0}, model).decoder_inputs;
  for (const GradTarget target : {GradTarget{}, GradTarget{GradTarget::Kind::weight, 1234}}) {
    const auto once = loss_gradient(images, {1.0}, model, inputs, target, 1.0);
    const auto twice = loss_gradient(images, {1.0}, model, inputs, target, 2.0);
    CHECK(std::abs(twice.gradient - 2.0 * once.gradient) <=
          1e-10 * std::max(1.0, std::abs(once.gradient)));
    CHECK(std::abs(twice.loss - 2.0 * once.loss) <= 1e-10 * std::max(1.0, std::abs(once.loss)));
    CHECK(once.loss == sequence_loss(images, {1.0}, model, inputs));
  }
}

TEST_CASE("gradient check on five seeded fixtures") {
  for (std::uint64_t seed : {17u, 1u, 2u, 3u, 4u}) {
    const ToyModel model(seed);
    const ImagePair images = synthetic_images(seed);
    for (double p : {0.0, 1.0}) {
      const auto report = grad_check(model, images, {p});
      INFO("seed " << seed << " P " << p);
      REQUIRE(report.entries.size() == 5);
      CHECK(report.entries[0].target.kind == GradTarget::Kind::prior);
      CHECK(report.max_relative_error < 1e-4);
    }
  }
}

TEST_CASE("relative_error") {
  CHECK(relative_error(0.0, 0.0) == 0.0);
  CHECK(relative_error(1.0, 0.5) == 0.5);
  CHECK(relative_error(-2.0, -2.0) == 0.0);
}
