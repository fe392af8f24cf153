#include "awe/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "awe/binary_io.hpp"
#include "awe/error.hpp"

namespace awe {

std::string to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "?";
}

std::map<std::string, std::size_t> Corpus::vocabulary() const {
  std::map<std::string, std::size_t> counts;
  for (const auto& s : segments) ++counts[s.label];
  return counts;
}

std::vector<FrameView> Corpus::views() const {
  std::vector<FrameView> v;
  v.reserve(segments.size());
  for (const auto& s : segments) v.push_back(s.view());
  return v;
}

namespace {

constexpr char kArchiveMagic[4] = {'A', 'W', 'E', '1'};

}  // namespace

std::vector<std::uint8_t> encode_archive(const Corpus& corpus) {
  ByteWriter w;
  for (char c : kArchiveMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u16(kArchiveVersion);
  w.u32(static_cast<std::uint32_t>(corpus.segments.size()));
  for (const auto& s : corpus.segments) {
    if (s.frames.size() != static_cast<std::size_t>(s.num_frames) * s.dim) {
      throw InvalidInput("segment '" + s.label + "' has inconsistent frame storage");
    }
    w.short_string(s.label);
    w.u32(static_cast<std::uint32_t>(s.num_frames));
    w.u32(static_cast<std::uint32_t>(s.dim));
    w.f32_array(s.frames);
  }
  const std::uint64_t sum = fnv1a64(w.bytes());
  w.u64(sum);
  return w.take();
}

Corpus decode_archive(std::span<const std::uint8_t> bytes, Split split) {
  if (bytes.size() < 4 + 2 + 4 + 8) {
    throw DataError("archive truncated: " + std::to_string(bytes.size()) + " bytes");
  }
  if (std::memcmp(bytes.data(), kArchiveMagic, 4) != 0) throw DataError("bad archive magic at byte offset 0");

  ByteReader header(bytes.subspan(4));
  const std::uint16_t version = header.u16();
  if (version != kArchiveVersion) {
    throw DataError("unsupported archive version " + std::to_string(version) + " at byte offset 4");
  }

  const auto body = bytes.first(bytes.size() - 8);
  ByteReader tail(bytes.subspan(bytes.size() - 8));
  const std::uint64_t stored = tail.u64();
  if (stored != fnv1a64(body)) {
    throw DataError("archive checksum mismatch at byte offset " + std::to_string(bytes.size() - 8));
  }

  ByteReader r(body);
  r.raw(6);
  const std::uint32_t count = r.u32();
  Corpus corpus;
  corpus.split = split;
  corpus.segments.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    Segment s;
    const std::size_t start = r.offset();
    s.label = r.short_string();
    s.num_frames = static_cast<int>(r.u32());
    s.dim = static_cast<int>(r.u32());
    if (s.num_frames < 1 || s.dim < 1) {
      throw DataError("segment " + std::to_string(i) + " has empty feature matrix at byte offset " +
                      std::to_string(start));
    }
    const std::size_t n = static_cast<std::size_t>(s.num_frames) * static_cast<std::size_t>(s.dim);
    if (n * sizeof(float) > r.remaining()) {
      throw DataError("truncated frames of segment " + std::to_string(i) + " at byte offset " +
                      std::to_string(r.offset()));
    }
    s.frames.resize(n);
    const std::size_t payload = r.offset();
    r.f32_array(s.frames);
    for (std::size_t k = 0; k < n; ++k) {
      if (!std::isfinite(s.frames[k])) {
        throw DataError("non-finite feature value in segment " + std::to_string(i) + " at byte offset " +
                        std::to_string(payload + k * sizeof(float)));
      }
    }
    if (!corpus.segments.empty() && corpus.segments.front().dim != s.dim) {
      throw DataError("segment " + std::to_string(i) + " has feature dim " + std::to_string(s.dim) +
                      ", expected " + std::to_string(corpus.segments.front().dim));
    }
    corpus.segments.push_back(std::move(s));
  }
  if (r.remaining() != 0) {
    throw DataError("trailing bytes after last segment at byte offset " + std::to_string(r.offset()));
  }
  return corpus;
}

void write_archive(const Corpus& corpus, const std::filesystem::path& path) {
  atomic_write_file(path, encode_archive(corpus));
}

Corpus read_archive(const std::filesystem::path& path, Split split) {
  const auto bytes = read_file(path);
  try {
    return decode_archive(bytes, split);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

Corpus filter_min_count(const Corpus& corpus, std::size_t min_count) {
  if (min_count < 1) throw ConfigError("min_count must be >= 1");
  const auto counts = corpus.vocabulary();
  Corpus out;
  out.split = corpus.split;
  for (const auto& s : corpus.segments) {
    if (counts.at(s.label) >= min_count) out.segments.push_back(s);
  }
  if (out.empty()) {
    throw ConfigError("no word type has at least " + std::to_string(min_count) + " occurrences (" +
                      std::to_string(counts.size()) + " types in " + std::to_string(corpus.size()) +
                      " segments)");
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> enumerate_same_pairs(const Corpus& corpus) {
  std::map<std::string, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < corpus.segments.size(); ++i) by_label[corpus.segments[i].label].push_back(i);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (const auto& [label, idx] : by_label) {
    for (std::size_t a = 0; a < idx.size(); ++a) {
      for (std::size_t b = a + 1; b < idx.size(); ++b) pairs.emplace_back(idx[a], idx[b]);
    }
  }
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

FeatureNormalizer FeatureNormalizer::fit(const Corpus& corpus) {
  if (corpus.empty()) throw InvalidInput("cannot fit a normalizer on an empty corpus");
  const int dim = corpus.feature_dim();
  std::vector<double> sum(dim, 0.0), sq(dim, 0.0);
  double frames = 0.0;
  for (const auto& s : corpus.segments) {
    for (int t = 0; t < s.num_frames; ++t) {
      for (int d = 0; d < dim; ++d) {
        const double v = s.at(t, d);
        sum[d] += v;
        sq[d] += v * v;
      }
    }
    frames += s.num_frames;
  }
  FeatureNormalizer n;
  n.mean.resize(dim);
  n.inv_std.resize(dim);
  for (int d = 0; d < dim; ++d) {
    const double m = sum[d] / frames;
    const double var = std::max(sq[d] / frames - m * m, 0.0);
    n.mean[d] = static_cast<float>(m);
    n.inv_std[d] = static_cast<float>(var > 1e-12 ? 1.0 / std::sqrt(var) : 1.0);
  }
  return n;
}

void FeatureNormalizer::apply(Segment& segment) const {
  if (empty()) return;
  if (segment.dim != static_cast<int>(mean.size())) {
    throw InvalidInput("normalizer dim " + std::to_string(mean.size()) + " does not match segment dim " +
                       std::to_string(segment.dim));
  }
  for (int t = 0; t < segment.num_frames; ++t) {
    float* row = segment.frames.data() + static_cast<std::size_t>(t) * segment.dim;
    for (int d = 0; d < segment.dim; ++d) row[d] = (row[d] - mean[d]) * inv_std[d];
  }
}

void FeatureNormalizer::apply(Corpus& corpus) const {
  for (auto& s : corpus.segments) apply(s);
}

std::vector<std::string> sorted_labels(const Corpus& corpus) {
  std::vector<std::string> out;
  for (const auto& [label, count] : corpus.vocabulary()) out.push_back(label);
  return out;
}

}  // namespace awe
