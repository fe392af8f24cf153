#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "awe/rnn.hpp"

namespace awe {

/// One spoken word: a label and a T x D row-major feature matrix.
struct Segment {
  std::string label;
  int num_frames = 0;
  int dim = 0;
  std::vector<float> frames;

  FrameView view() const { return {frames.data(), num_frames, dim}; }
  float at(int t, int d) const { return frames[static_cast<std::size_t>(t) * dim + d]; }

  bool operator==(const Segment&) const = default;
};

enum class Split { train, dev, test };

std::string to_string(Split split);

struct Corpus {
  std::vector<Segment> segments;
  Split split = Split::train;

  std::size_t size() const { return segments.size(); }
  bool empty() const { return segments.empty(); }
  /// Label -> number of segments, always recomputed from `segments`.
  std::map<std::string, std::size_t> vocabulary() const;
  /// Feature dimension shared by all segments (0 when empty).
  int feature_dim() const { return segments.empty() ? 0 : segments.front().dim; }
  std::vector<FrameView> views() const;

  bool operator==(const Corpus&) const = default;
};

/// Archive layout (little-endian): magic "AWE1", u16 version, u32 segment
/// count; per segment: u16 label length + UTF-8 label, u32 T, u32 D, T*D f32
/// row-major; then a u64 FNV-1a checksum of every preceding byte.
inline constexpr std::uint16_t kArchiveVersion = 1;

std::vector<std::uint8_t> encode_archive(const Corpus& corpus);
Corpus decode_archive(std::span<const std::uint8_t> bytes, Split split = Split::train);

void write_archive(const Corpus& corpus, const std::filesystem::path& path);
Corpus read_archive(const std::filesystem::path& path, Split split = Split::train);

/// Keeps segments whose label occurs at least min_count times. Throws
/// ConfigError when nothing survives.
Corpus filter_min_count(const Corpus& corpus, std::size_t min_count);

/// All unordered index pairs (i < j) with equal labels, in lexicographic order.
std::vector<std::pair<std::size_t, std::size_t>> enumerate_same_pairs(const Corpus& corpus);

/// Per-dimension standardization fitted on one corpus and applied to others.
struct FeatureNormalizer {
  std::vector<float> mean;
  std::vector<float> inv_std;

  bool empty() const { return mean.empty(); }
  static FeatureNormalizer fit(const Corpus& corpus);
  void apply(Segment& segment) const;
  void apply(Corpus& corpus) const;

  bool operator==(const FeatureNormalizer&) const = default;
};

/// Sorted distinct labels, the classifier's output vocabulary.
std::vector<std::string> sorted_labels(const Corpus& corpus);

}  // namespace awe
