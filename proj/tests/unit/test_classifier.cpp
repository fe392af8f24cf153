#include <gtest/gtest.h>

#include "awe/checkpoint.hpp"
#include "awe/classifier.hpp"
#include "awe/error.hpp"
#include "awe/synth.hpp"

using namespace awe;

namespace {

SynthCorpora toy_corpus() {
  SynthConfig cfg;
  cfg.num_word_types = 5;
  cfg.examples_per_type = 8;
  cfg.dev_word_types = 5;
  cfg.dev_unseen_fraction = 0.0;
  cfg.dev_examples_per_type = 3;
  cfg.min_length = 10;
  cfg.max_length = 20;
  cfg.noise_sigma = 0.05;
  cfg.speaker_offset_sigma = 0.05;
  cfg.seed = 3;
  return synthesize_corpus(cfg);
}

NetworkConfig toy_network() {
  NetworkConfig n;
  n.stacked_layers = 1;
  n.fc_layers = 2;
  n.hidden_dim = 16;
  n.fc_dim = 16;
  n.dropout_recurrent = 0.0;
  n.dropout_fc = 0.0;
  return n;
}

}  // namespace

TEST(SelectBestEpoch, ArgmaxEarliestTie) {
  const std::vector<double> aps{0.3, 0.5, 0.4};
  EXPECT_EQ(select_best_epoch(aps), 1u);
  const std::vector<double> tied{0.2, 0.6, 0.6};
  EXPECT_EQ(select_best_epoch(tied), 1u);
  EXPECT_THROW(select_best_epoch(std::span<const double>{}), InvalidInput);
}

TEST(TrainClassifier, ToySeparableCorpusFits) {
  const auto data = toy_corpus();
  ClassifierTrainConfig cfg;
  cfg.batch_size = 8;
  cfg.max_epochs = 50;
  cfg.stop_patience = 50;
  const auto result = train_classifier(data.train, data.dev, toy_network(), cfg);
  ASSERT_FALSE(result.log.empty());
  double best_loss = 1e9;
  for (const auto& e : result.log) best_loss = std::min(best_loss, e.mean_batch_loss);
  EXPECT_LT(best_loss, 0.1);
  EXPECT_EQ(result.best.vocabulary.size(), 5u);
  EXPECT_EQ(result.best.config.output_dim, 5);

  std::vector<double> aps;
  for (const auto& e : result.log) aps.push_back(e.dev_ap);
  EXPECT_EQ(result.best.epoch, static_cast<int>(select_best_epoch(aps)) + 1);
  EXPECT_EQ(result.best.dev_ap, aps[select_best_epoch(aps)]);
}

TEST(TrainClassifier, DeterministicCheckpointBytes) {
  const auto data = toy_corpus();
  ClassifierTrainConfig cfg;
  cfg.max_epochs = 3;
  NetworkConfig net = toy_network();
  net.dropout_fc = 0.3;
  const auto a = train_classifier(data.train, data.dev, net, cfg);
  const auto b = train_classifier(data.train, data.dev, net, cfg);
  EXPECT_EQ(encode_checkpoint(a.best), encode_checkpoint(b.best));
}

TEST(TrainClassifier, RejectsDegenerateCorpora) {
  const auto data = toy_corpus();
  ClassifierTrainConfig cfg;
  cfg.max_epochs = 1;
  EXPECT_THROW(train_classifier(Corpus{}, data.dev, toy_network(), cfg), ConfigError);
  Corpus single;
  for (const auto& s : data.train.segments) {
    if (s.label == data.train.segments.front().label) single.segments.push_back(s);
  }
  EXPECT_THROW(train_classifier(single, data.dev, toy_network(), cfg), ConfigError);
  cfg.lr_init = 0.0;
  EXPECT_THROW(train_classifier(data.train, data.dev, toy_network(), cfg), ConfigError);
}

TEST(TrainClassifier, LogLineIsJson) {
  EpochLog log;
  log.epoch = 2;
  log.mean_batch_loss = 0.5;
  log.dev_ap = 0.25;
  log.lr = 0.1;
  EXPECT_EQ(format_epoch_log(log), "{\"epoch\":2,\"mean_batch_loss\":0.5,\"dev_ap\":0.25,\"lr\":0.1,\"plateau\":false}\n");
}
