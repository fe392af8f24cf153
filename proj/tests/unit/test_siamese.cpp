#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "awe/error.hpp"
#include "awe/siamese.hpp"
#include "awe/synth.hpp"
#include "support.hpp"

using namespace awe;

namespace {

// Unit vector at the angle whose cosine distance from (1, 0) is d.
Vec<double> at_distance(double d) {
  const double c = 1.0 - d;
  Vec<double> v(2);
  v << c, std::sqrt(1.0 - c * c);
  return v;
}

Vec<double> e0() { return Vec<double>::Unit(2, 0); }

Corpus labelled(std::initializer_list<std::pair<const char*, int>> counts) {
  Corpus c;
  for (const auto& [label, n] : counts) {
    for (int i = 0; i < n; ++i) c.segments.push_back({label, 1, 1, {1.0f}});
  }
  return c;
}

}  // namespace

TEST(CosHinge, HandValues) {
  const auto sat = cos_hinge_loss<double>(e0(), at_distance(0.1), at_distance(0.9), 0.4);
  EXPECT_EQ(sat.loss, 0.0);
  EXPECT_TRUE(sat.grad_anchor.isZero());
  Vec<double> x(3);
  x << 0.3, -1.0, 2.0;
  EXPECT_NEAR(cos_hinge_loss<double>(x, x, x, 0.4).loss, 0.4, 1e-12);
  // a=(1,0), s at distance 0.5, d at distance 0.6 (other side so both sit in the plane).
  Vec<double> d = at_distance(0.6);
  d[1] = -d[1];
  const auto active = cos_hinge_loss<double>(e0(), at_distance(0.5), d, 0.4);
  EXPECT_NEAR(active.loss, 0.3, 1e-12);
}

TEST(CosHinge, GradientsMatchFiniteDifferences) {
  RandomSource rng(1);
  int checked = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto v = awe::testing::random_embeddings(rng, 3, 4);
    const auto c = cos_hinge_loss<double>(v[0], v[1], v[2], 0.5);
    if (c.loss < 1e-3) continue;
    ++checked;
    const double h = 1e-6;
    const Vec<double>* grads[3] = {&c.grad_anchor, &c.grad_same, &c.grad_diff};
    for (int which = 0; which < 3; ++which) {
      for (int k = 0; k < 4; ++k) {
        auto up = v, down = v;
        up[which][k] += h;
        down[which][k] -= h;
        const double fd = (cos_hinge_loss<double>(up[0], up[1], up[2], 0.5).loss -
                           cos_hinge_loss<double>(down[0], down[1], down[2], 0.5).loss) /
                          (2 * h);
        EXPECT_NEAR((*grads[which])[k], fd, 1e-6);
      }
    }
  }
  EXPECT_GT(checked, 10);
}

TEST(CosHinge, RangeAndZeroVector) {
  RandomSource rng(2);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto v = awe::testing::random_embeddings(rng, 3, 3);
    const auto c = cos_hinge_loss<double>(v[0], v[1], v[2], 0.4);
    EXPECT_GE(c.loss, 0.0);
    EXPECT_LE(c.loss, 2.4);
    EXPECT_EQ(c.loss == 0.0, c.d_ad >= c.d_as + 0.4);
  }
  EXPECT_THROW(cos_hinge_loss<double>(Vec<double>::Zero(2), e0(), e0(), 0.4), DegenerateVector);
}

TEST(SimilarityUpdate, RuleAndClamp) {
  SimilarityMatrix sim(3);
  sim.reset();
  EXPECT_NEAR(update_similarity_matrix(sim, 0, 2, 0.3, 0.8, 0.6), 0.2, 1e-12);
  EXPECT_EQ(sim.at(0, 2), 1.0);  // staged, not yet visible
  sim.commit();
  EXPECT_NEAR(sim.at(0, 2), 1.2, 1e-12);
  EXPECT_NEAR(sim.at(2, 0), 1.2, 1e-12);
  EXPECT_EQ(update_similarity_matrix(sim, 0, 1, 0.3, 1.0, 0.6), 0.0);
  EXPECT_EQ(update_similarity_matrix(sim, 0, 1, 0.95, 1.5, 0.6), 0.0);
  sim.commit();
  EXPECT_EQ(sim.at(0, 1), 1.0);
  EXPECT_THROW(sim.stage(1, 1, 0.5), InvalidInput);
}

TEST(SimilarityUpdate, SymmetricZeroDiagonalUnderRandomUpdates) {
  RandomSource rng(3);
  SimilarityMatrix sim(6);
  sim.reset();
  for (int k = 0; k < 500; ++k) {
    const std::size_t i = rng.index(6);
    std::size_t j = rng.index(5);
    if (j >= i) ++j;
    update_similarity_matrix(sim, i, j, rng.uniform(0, 2), rng.uniform(0, 2), 0.6);
    if (k % 7 == 0) sim.commit();
  }
  sim.commit();
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(sim.at(i, i), 0.0);
    for (std::size_t j = 0; j < 6; ++j) {
      EXPECT_EQ(sim.at(i, j), sim.at(j, i));
      EXPECT_GE(sim.at(i, j), 0.0);
    }
  }
}

TEST(SimilarityMatrix, PmfAndEntropy) {
  SimilarityMatrix sim(3);
  sim.reset();
  sim.set(1, 0, 3.0);
  sim.set(1, 2, 1.0);
  const auto p = sim.pmf(1);
  EXPECT_EQ(p, (std::vector<double>{0.75, 0.0, 0.25}));
  sim.reset();
  EXPECT_NEAR(sim.row_entropy(0), std::log(2.0), 1e-12);
}

TEST(SampleNegative, FrozenRowFrequencies) {
  const Corpus c = labelled({{"a", 2}, {"b", 3}, {"c", 1}});
  const LabelIndex index(c);
  SimilarityMatrix sim(3);
  sim.reset();
  sim.set(1, 0, 3.0);
  sim.set(1, 2, 1.0);
  RandomSource rng(4);
  const int n = 100000;
  int count_a = 0;
  for (int k = 0; k < n; ++k) {
    const std::size_t s = sample_negative(1, index, &sim, SamplingMode::nonuniform, rng);
    ASSERT_NE(index.label_of_segment(s), 1u);
    count_a += index.label_of_segment(s) == 0;
  }
  const double sigma = std::sqrt(n * 0.75 * 0.25);
  EXPECT_LT(std::abs(count_a - 0.75 * n), 3 * sigma);
}

TEST(SampleNegative, UniformModeIgnoresMatrix) {
  const Corpus c = labelled({{"a", 1}, {"b", 3}, {"c", 1}});
  const LabelIndex index(c);
  SimilarityMatrix sim(3);
  sim.reset();
  sim.set(0, 1, 0.0);
  RandomSource rng(5);
  const int n = 40000;
  int count_b = 0;
  for (int k = 0; k < n; ++k) {
    count_b += index.label_of_segment(sample_negative(0, index, &sim, SamplingMode::uniform, rng)) == 1;
  }
  const double sigma = std::sqrt(n * 0.75 * 0.25);
  EXPECT_LT(std::abs(count_b - 0.75 * n), 3 * sigma);
}

TEST(SampleNegative, ZeroRowFallsBackToUniform) {
  const Corpus c = labelled({{"a", 1}, {"b", 1}, {"c", 1}});
  const LabelIndex index(c);
  SimilarityMatrix sim(3);
  sim.reset();
  sim.set(0, 1, 0.0);
  sim.set(0, 2, 0.0);
  RandomSource rng(6);
  std::set<std::size_t> seen;
  for (int k = 0; k < 200; ++k) seen.insert(sample_negative(0, index, &sim, SamplingMode::nonuniform, rng));
  EXPECT_EQ(seen, (std::set<std::size_t>{1, 2}));
}

TEST(SampleNegative, SingleLabelRejected) {
  const LabelIndex index(labelled({{"a", 3}}));
  RandomSource rng(7);
  EXPECT_ANY_THROW(sample_negative(0, index, nullptr, SamplingMode::uniform, rng));
}

TEST(Minibatch, MirroredTriplets) {
  const std::vector<std::pair<std::size_t, std::size_t>> pairs{{10, 11}, {20, 21}};
  std::size_t next = 100;
  const auto batch = build_minibatch(pairs, [&](std::size_t) { return next++; });
  const std::vector<Triplet> expected{{10, 11, 100}, {11, 10, 100}, {20, 21, 101}, {21, 20, 101}};
  EXPECT_EQ(batch, expected);
}

TEST(Minibatch, LabelConstraintsHold) {
  const Corpus c = labelled({{"a", 3}, {"b", 2}, {"c", 4}});
  const LabelIndex index(c);
  const auto pairs = enumerate_same_pairs(c);
  SimilarityMatrix sim(index.num_labels());
  sim.reset();
  RandomSource rng(8);
  const auto batch = build_minibatch(pairs, index, &sim, SamplingMode::nonuniform, rng);
  ASSERT_EQ(batch.size(), 2 * pairs.size());
  for (const auto& t : batch) {
    EXPECT_EQ(c.segments[t.anchor].label, c.segments[t.same].label);
    EXPECT_NE(c.segments[t.anchor].label, c.segments[t.diff].label);
  }
}

TEST(WarmStart, ShapesAndHead) {
  Checkpoint cls;
  cls.config.stacked_layers = 2;
  cls.config.fc_layers = 3;
  cls.config.input_dim = 4;
  cls.config.hidden_dim = 5;
  cls.config.fc_dim = 6;
  cls.config.output_dim = 7;
  RandomSource rng(9);
  cls.params = init_params<float>(cls.config, rng);
  cls.vocabulary = {"a", "b"};
  const Checkpoint sia = siamese_from_warm_start(cls, 3, rng);
  EXPECT_EQ(sia.params.fc.size(), 3u);
  EXPECT_EQ(sia.params.fc[1].weights, cls.params.fc[1].weights);
  EXPECT_EQ(sia.params.fc[2].weights.rows(), 3);
  EXPECT_EQ(sia.params.fc[2].weights.cols(), 6);
  EXPECT_EQ(sia.config.head, Head::linear);
  EXPECT_TRUE(sia.vocabulary.empty());
}

TEST(Config, Validation) {
  SiameseTrainConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.margin = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.m_star = 0.3;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.pairs_per_batch = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(TrainSiamese, ColdStartSmallRunIsDeterministic) {
  SynthConfig sc;
  sc.num_word_types = 4;
  sc.examples_per_type = 4;
  sc.dev_word_types = 3;
  sc.dev_examples_per_type = 3;
  sc.min_length = 8;
  sc.max_length = 12;
  const auto data = synthesize_corpus(sc);
  NetworkConfig net;
  net.stacked_layers = 1;
  net.fc_layers = 1;
  net.hidden_dim = 8;
  SiameseTrainConfig cfg;
  cfg.embed_dim = 4;
  cfg.max_epochs = 2;
  cfg.pairs_per_batch = 4;
  const auto a = train_siamese(data.train, data.dev, std::nullopt, cfg, net);
  const auto b = train_siamese(data.train, data.dev, std::nullopt, cfg, net);
  ASSERT_EQ(a.log.size(), 2u);
  EXPECT_EQ(encode_checkpoint(a.best), encode_checkpoint(b.best));
  EXPECT_EQ(a.best.config.output_dim, 4);
  for (const auto& e : a.log) {
    ASSERT_TRUE(e.zero_loss_fraction.has_value());
    EXPECT_GE(*e.zero_loss_fraction, 0.0);
    EXPECT_LE(*e.zero_loss_fraction, 1.0);
  }
}
