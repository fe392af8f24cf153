#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <limits>

#include "awe/binary_io.hpp"
#include "awe/checkpoint.hpp"
#include "awe/error.hpp"
#include "awe/siamese.hpp"

using namespace awe;
namespace fs = std::filesystem;

namespace {

Checkpoint random_checkpoint(std::uint64_t seed) {
  Checkpoint ck;
  ck.config.cell = CellKind::gru;
  ck.config.stacked_layers = 2;
  ck.config.fc_layers = 2;
  ck.config.input_dim = 3;
  ck.config.hidden_dim = 4;
  ck.config.fc_dim = 5;
  ck.config.output_dim = 3;
  RandomSource rng(seed);
  ck.params = init_params<float>(ck.config, rng);
  ck.epoch = 7;
  ck.dev_ap = 0.4321;
  ck.vocabulary = {"a", "b", "c"};
  ck.normalizer.mean = {0.1f, 0.2f, 0.3f};
  ck.normalizer.inv_std = {1.0f, 2.0f, 0.5f};
  return ck;
}

fs::path temp_path(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "awe_test_checkpoint";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(Checkpoint, RoundTripEqualBytes) {
  const Checkpoint ck = random_checkpoint(1);
  const auto path = temp_path("rt.ckpt");
  save_checkpoint(ck, path);
  const Checkpoint back = load_checkpoint(path);
  EXPECT_EQ(encode_checkpoint(back), encode_checkpoint(ck));
  EXPECT_EQ(back.config, ck.config);
  EXPECT_EQ(back.vocabulary, ck.vocabulary);
  EXPECT_EQ(back.normalizer, ck.normalizer);
  EXPECT_EQ(flatten(back.params), flatten(ck.params));
  EXPECT_EQ(back.epoch, 7);
  EXPECT_EQ(back.dev_ap, 0.4321);
}

TEST(Checkpoint, TruncatedFileRejected) {
  auto bytes = encode_checkpoint(random_checkpoint(2));
  bytes.resize(bytes.size() / 2);
  EXPECT_THROW(decode_checkpoint(bytes), DataError);
}

TEST(Checkpoint, CorruptedPayloadRejected) {
  auto bytes = encode_checkpoint(random_checkpoint(3));
  bytes[bytes.size() - 20] ^= 0x40;
  EXPECT_THROW(decode_checkpoint(bytes), DataError);
}

TEST(Checkpoint, VersionMismatchRejected) {
  auto bytes = encode_checkpoint(random_checkpoint(4));
  bytes[4] = 2;
  const std::uint64_t sum = fnv1a64(std::span(bytes).first(bytes.size() - 8));
  for (int k = 0; k < 8; ++k) bytes[bytes.size() - 8 + k] = static_cast<std::uint8_t>(sum >> (8 * k));
  EXPECT_THROW(decode_checkpoint(bytes), DataError);
}

TEST(Checkpoint, WarmStartRetainsTrunk) {
  const Checkpoint cls = random_checkpoint(5);
  const auto path = temp_path("warm.ckpt");
  save_checkpoint(cls, path);
  const Checkpoint loaded = load_checkpoint(path);
  RandomSource rng(9);
  const Checkpoint sia = siamese_from_warm_start(loaded, 6, rng);
  ASSERT_EQ(sia.params.rnn.layers.size(), cls.params.rnn.layers.size());
  for (std::size_t l = 0; l < cls.params.rnn.layers.size(); ++l) {
    EXPECT_EQ(sia.params.rnn.layers[l].w_input, cls.params.rnn.layers[l].w_input);
    EXPECT_EQ(sia.params.rnn.layers[l].w_recurrent, cls.params.rnn.layers[l].w_recurrent);
    EXPECT_EQ(sia.params.rnn.layers[l].bias, cls.params.rnn.layers[l].bias);
  }
  EXPECT_EQ(sia.params.fc[0].weights, cls.params.fc[0].weights);
  EXPECT_EQ(sia.params.fc[1].weights.rows(), 6);
  EXPECT_EQ(sia.config.head, Head::linear);
  EXPECT_EQ(sia.config.output_dim, 6);
  EXPECT_EQ(sia.normalizer, cls.normalizer);
  EXPECT_EQ(sia.params.parameter_count(), expected_parameter_count(sia.config));
}

TEST(Checkpoint, NonFiniteParameterRejected) {
  auto bytes = encode_checkpoint(random_checkpoint(6));
  // The last parameter sits just before the 8-byte trailer.
  const float inf = std::numeric_limits<float>::infinity();
  std::memcpy(bytes.data() + bytes.size() - 12, &inf, 4);
  const std::uint64_t sum = fnv1a64(std::span(bytes).first(bytes.size() - 8));
  for (int k = 0; k < 8; ++k) bytes[bytes.size() - 8 + k] = static_cast<std::uint8_t>(sum >> (8 * k));
  try {
    decode_checkpoint(bytes);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("byte offset " + std::to_string(bytes.size() - 12)), std::string::npos)
        << e.what();
  }
}
