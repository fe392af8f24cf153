#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "awe/error.hpp"
#include "awe/optim.hpp"

using namespace awe;

TEST(CrossEntropy, UniformAndPerfect) {
  const Vec<double> uniform = Vec<double>::Constant(4, std::log(0.25));
  EXPECT_NEAR(cross_entropy_loss(uniform, 2).loss, std::log(4.0), 1e-12);
  Vec<double> perfect(3);
  perfect << 0.0, -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity();
  EXPECT_EQ(cross_entropy_loss(perfect, 0).loss, 0.0);
}

TEST(CrossEntropy, HandValueAndFiniteDifference) {
  Vec<double> logits(3);
  logits << 1.0, 0.0, 0.0;
  const auto ce = cross_entropy_loss(log_softmax(logits), 0);
  // Closed form: -log(e / (e + 2)) = log(e + 2) - 1.
  EXPECT_NEAR(ce.loss, std::log(std::exp(1.0) + 2.0) - 1.0, 1e-12);
  EXPECT_NEAR(ce.loss, 0.5514, 5e-5);
  const double h = 1e-6;
  for (int k = 0; k < 3; ++k) {
    Vec<double> up = logits, down = logits;
    up[k] += h;
    down[k] -= h;
    const double fd = (cross_entropy_loss(log_softmax(up), 0).loss - cross_entropy_loss(log_softmax(down), 0).loss) / (2 * h);
    EXPECT_NEAR(ce.grad[k], fd, 1e-6);
  }
}

TEST(CrossEntropy, LabelOutOfRange) {
  const Vec<double> lp = Vec<double>::Constant(3, std::log(1.0 / 3));
  EXPECT_THROW(cross_entropy_loss(lp, 3), InvalidInput);
  EXPECT_THROW(cross_entropy_loss(lp, -1), InvalidInput);
}

TEST(Nesterov, ZeroMomentumIsSgd) {
  std::vector<double> theta{1.0}, v{0.0};
  const std::vector<double> g{0.5};
  nesterov_step<double>(theta, v, g, 0.1, 0.0);
  EXPECT_DOUBLE_EQ(theta[0], 0.95);
}

TEST(Nesterov, QuadraticHandIteration) {
  // L = theta^2 / 2, so g = stored parameter. Hand iteration of the reformulated update:
  // v1 = -0.1, phi1 = 1 - 0.09 - 0.1 = 0.81; v2 = -0.171, phi2 = 0.81 - 0.1539 - 0.081 = 0.5751.
  std::vector<double> phi{1.0}, v{0.0};
  std::vector<double> g{phi[0]};
  nesterov_step<double>(phi, v, g, 0.1, 0.9);
  EXPECT_NEAR(phi[0], 0.81, 1e-15);
  EXPECT_NEAR(v[0], -0.1, 1e-15);
  g[0] = phi[0];
  nesterov_step<double>(phi, v, g, 0.1, 0.9);
  EXPECT_NEAR(phi[0], 0.5751, 1e-15);
  EXPECT_NEAR(v[0], -0.171, 1e-15);
}

TEST(Nesterov, ZeroGradientDecaysVelocity) {
  std::vector<double> phi{2.0}, v{1.0};
  const std::vector<double> g{0.0};
  double expected_v = 1.0;
  for (int k = 0; k < 5; ++k) {
    nesterov_step<double>(phi, v, g, 0.1, 0.5);
    expected_v *= 0.5;
    EXPECT_DOUBLE_EQ(v[0], expected_v);
  }
}

TEST(Nesterov, NonFiniteGradientAborts) {
  std::vector<float> phi{1.0f}, v{0.0f};
  const std::vector<float> g{std::numeric_limits<float>::quiet_NaN()};
  EXPECT_THROW(nesterov_step<float>(phi, v, g, 0.1, 0.9), NumericError);
  EXPECT_EQ(phi[0], 1.0f);
}

TEST(Plateau, RuleArithmetic) {
  PlateauSchedule flat(0.1, {});
  for (int k = 0; k < 3; ++k) EXPECT_FALSE(flat.observe(1.0).plateau);
  EXPECT_FALSE(flat.observe(1.0).plateau);
  PlateauSchedule rising(0.1, {});
  for (int k = 0; k < 3; ++k) rising.observe(1.0);
  EXPECT_TRUE(rising.observe(1.02).plateau);
}

TEST(Plateau, ThreeConsecutivePlateausDropRate) {
  PlateauSchedule s(0.1, {});
  const double losses[] = {1.0, 0.9, 0.8, 0.7, 0.9, 0.9, 0.9, 0.5};
  std::string flags;
  int drop_epoch = 0;
  for (int e = 0; e < 8; ++e) {
    const auto step = s.observe(losses[e]);
    flags += step.plateau ? '1' : '0';
    if (step.decayed) drop_epoch = e + 1;
  }
  EXPECT_EQ(flags, "00001110");
  EXPECT_EQ(drop_epoch, 7);
  EXPECT_DOUBLE_EQ(s.lr(), 0.01);
  EXPECT_EQ(s.consecutive_plateaus(), 0);
}

TEST(Plateau, NonConsecutivePlateausDoNotDrop) {
  PlateauSchedule s(0.1, {});
  for (double l : {1.0, 1.0, 1.0, 1.1, 1.1, 0.1, 1.1, 1.1}) EXPECT_FALSE(s.observe(l).decayed);
  EXPECT_DOUBLE_EQ(s.lr(), 0.1);
}
