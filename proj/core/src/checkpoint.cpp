#include "awe/checkpoint.hpp"

#include <cmath>
#include <cstring>

#include "awe/binary_io.hpp"
#include "awe/error.hpp"

namespace awe {

namespace {

constexpr char kMagic[4] = {'A', 'W', 'E', 'C'};

void write_config(ByteWriter& w, const NetworkConfig& c) {
  w.u8(c.cell == CellKind::lstm ? 0 : 1);
  w.u32(static_cast<std::uint32_t>(c.stacked_layers));
  w.u32(static_cast<std::uint32_t>(c.fc_layers));
  w.u32(static_cast<std::uint32_t>(c.input_dim));
  w.u32(static_cast<std::uint32_t>(c.hidden_dim));
  w.u32(static_cast<std::uint32_t>(c.fc_dim));
  w.u32(static_cast<std::uint32_t>(c.output_dim));
  w.u8(c.head == Head::log_softmax ? 0 : 1);
  w.f64(c.dropout_recurrent);
  w.f64(c.dropout_fc);
}

NetworkConfig read_config(ByteReader& r) {
  NetworkConfig c;
  const auto cell = r.u8();
  if (cell > 1) throw DataError("invalid cell kind " + std::to_string(cell) + " at byte offset " + std::to_string(r.offset() - 1));
  c.cell = cell == 0 ? CellKind::lstm : CellKind::gru;
  c.stacked_layers = static_cast<int>(r.u32());
  c.fc_layers = static_cast<int>(r.u32());
  c.input_dim = static_cast<int>(r.u32());
  c.hidden_dim = static_cast<int>(r.u32());
  c.fc_dim = static_cast<int>(r.u32());
  c.output_dim = static_cast<int>(r.u32());
  const auto head = r.u8();
  if (head > 1) throw DataError("invalid head kind " + std::to_string(head) + " at byte offset " + std::to_string(r.offset() - 1));
  c.head = head == 0 ? Head::log_softmax : Head::linear;
  c.dropout_recurrent = r.f64();
  c.dropout_fc = r.f64();
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint holds an invalid configuration: ") + e.what());
  }
  return c;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck) {
  if (ck.params.parameter_count() != expected_parameter_count(ck.config)) {
    throw InvalidInput("checkpoint parameters do not match its configuration");
  }
  ByteWriter w;
  for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u16(kCheckpointVersion);
  write_config(w, ck.config);
  w.u32(static_cast<std::uint32_t>(ck.epoch));
  w.f64(ck.dev_ap);
  w.u32(static_cast<std::uint32_t>(ck.vocabulary.size()));
  for (const auto& label : ck.vocabulary) w.short_string(label);
  w.u32(static_cast<std::uint32_t>(ck.normalizer.mean.size()));
  w.f32_array(ck.normalizer.mean);
  w.f32_array(ck.normalizer.inv_std);
  const std::vector<float> flat = flatten(ck.params);
  w.u64(flat.size());
  w.f32_array(flat);
  const std::uint64_t sum = fnv1a64(w.bytes());
  w.u64(sum);
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 + 2 + 8) throw DataError("checkpoint truncated: " + std::to_string(bytes.size()) + " bytes");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw DataError("bad checkpoint magic at byte offset 0");
  {
    ByteReader v(bytes.subspan(4, 2));
    const auto version = v.u16();
    if (version != kCheckpointVersion) {
      throw DataError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                      std::to_string(kCheckpointVersion) + ")");
    }
  }
  const auto body = bytes.first(bytes.size() - 8);
  ByteReader tail(bytes.subspan(bytes.size() - 8));
  if (tail.u64() != fnv1a64(body)) {
    throw DataError("checkpoint checksum mismatch at byte offset " + std::to_string(bytes.size() - 8));
  }

  ByteReader r(body);
  r.raw(6);
  Checkpoint ck;
  ck.config = read_config(r);
  ck.epoch = static_cast<int>(r.u32());
  ck.dev_ap = r.f64();
  const std::uint32_t vocab = r.u32();
  // Counts are bounded by the bytes left so a corrupt header cannot force a huge allocation.
  if (vocab > r.remaining() / 2) throw DataError("checkpoint vocabulary size " + std::to_string(vocab) + " exceeds the file");
  ck.vocabulary.reserve(vocab);
  for (std::uint32_t i = 0; i < vocab; ++i) ck.vocabulary.push_back(r.short_string());
  const std::uint32_t norm_dim = r.u32();
  if (norm_dim > r.remaining() / 8) throw DataError("checkpoint normalizer size " + std::to_string(norm_dim) + " exceeds the file");
  ck.normalizer.mean.resize(norm_dim);
  ck.normalizer.inv_std.resize(norm_dim);
  r.f32_array(ck.normalizer.mean);
  r.f32_array(ck.normalizer.inv_std);
  const std::uint64_t count = r.u64();
  if (count != expected_parameter_count(ck.config)) {
    throw DataError("checkpoint declares " + std::to_string(count) + " parameters, configuration implies " +
                    std::to_string(expected_parameter_count(ck.config)));
  }
  if (count > r.remaining() / 4) throw DataError("checkpoint parameter count " + std::to_string(count) + " exceeds the file");
  const std::size_t params_offset = r.offset();
  std::vector<float> flat(count);
  r.f32_array(flat);
  for (std::size_t k = 0; k < flat.size(); ++k) {
    if (!std::isfinite(flat[k])) {
      throw DataError("non-finite parameter " + std::to_string(k) + " at byte offset " +
                      std::to_string(params_offset + 4 * k));
    }
  }
  for (std::size_t k = 0; k < norm_dim; ++k) {
    if (!std::isfinite(ck.normalizer.mean[k]) || !std::isfinite(ck.normalizer.inv_std[k])) {
      throw DataError("non-finite normalizer entry " + std::to_string(k));
    }
  }
  if (r.remaining() != 0) throw DataError("trailing bytes in checkpoint at byte offset " + std::to_string(r.offset()));
  ck.params = zero_params<float>(ck.config);
  unflatten<float>(flat, ck.params);
  return ck;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  atomic_write_file(path, encode_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_checkpoint(bytes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace awe
