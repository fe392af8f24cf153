// Embedding-dimension robustness on the default synthetic corpus: Siamese dev
// AP at dim 32 stays within 0.05 of dim 256. Same settings as
// `awe sweep --stacked_layers 2 --fc_layers 2 --hidden_dim 64 --fc_dim 128
//  --classifier.max_epochs 30 --sweep.embed_dim 32,256`.

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>

#include "awe/classifier.hpp"
#include "awe/siamese.hpp"
#include "awe/synth.hpp"

using namespace awe;

TEST(DimSweep, SmallEmbeddingCloseToLarge) {
  const auto data = synthesize_corpus(SynthConfig{});
  NetworkConfig net;
  net.stacked_layers = 2;
  net.fc_layers = 2;
  net.hidden_dim = 64;
  net.fc_dim = 128;
  ClassifierTrainConfig cc;
  cc.max_epochs = 30;
  cc.seed = 7;
  const auto cls = train_classifier(data.train, data.dev, net, cc);

  double ap[2] = {0.0, 0.0};
  const int dims[2] = {32, 256};
  for (int k = 0; k < 2; ++k) {
    SiameseTrainConfig sc;
    sc.embed_dim = dims[k];
    sc.seed = 7;
    ap[k] = train_siamese(data.train, data.dev, cls.best, sc, net).best.dev_ap;
    std::printf("embed_dim %d: dev AP %.6f\n", dims[k], ap[k]);
  }
  EXPECT_LE(std::abs(ap[0] - ap[1]), 0.05);
}
