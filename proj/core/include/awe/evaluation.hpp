#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "awe/checkpoint.hpp"
#include "awe/dataset.hpp"
#include "awe/numeric.hpp"

namespace awe {

/// Which network output is used as the embedding of a classifier.
enum class EmbeddingSource {
  head_output,  // log-softmax output (classifier) or linear output (Siamese)
  logits,       // final fc output before the head
};

EmbeddingSource parse_embedding_source(const std::string& s);
std::string to_string(EmbeddingSource source);

struct EmbedOptions {
  EmbeddingSource source = EmbeddingSource::head_output;
  /// Segments per forward pass. With 1 every embedding is a pure function of
  /// its segment; larger batches are faster but may differ in the last bits.
  int batch_size = 1;
};

/// Eval-mode embeddings in input order. The checkpoint's normalizer is
/// applied to copies of the segments first.
std::vector<Vec<double>> compute_embeddings(const Checkpoint& checkpoint,
                                            std::span<const Segment> segments,
                                            const EmbedOptions& options = {});

/// Same as above for bare parameters (features already normalized).
std::vector<Vec<double>> compute_embeddings(const NetworkParams<float>& params,
                                            const NetworkConfig& config,
                                            std::span<const Segment> segments,
                                            const EmbedOptions& options = {});

struct PrPoint {
  double precision = 0.0;
  double recall = 0.0;
};

struct ApResult {
  double ap = 0.0;
  std::size_t num_positive = 0;
  std::size_t num_total = 0;
  /// One point per positive pair, in rank order; recall ends at 1.
  std::vector<PrPoint> pr_curve;
};

/// Position of pair (i, j), i < j, in the lexicographic enumeration of all
/// C(n, 2) pairs. Ties in similarity are broken by this index, ascending.
inline std::size_t pair_index(std::size_t i, std::size_t j, std::size_t n) {
  return i * n - i * (i + 1) / 2 + (j - i - 1);
}

/// Same-different average precision: all pairs are ranked by cosine
/// similarity (descending, ties by pair index) and AP is the mean, over
/// same-word pairs, of the precision at that pair's rank. Negatives are
/// streamed so memory is O(n * dim + #positive pairs).
/// Throws InvalidInput when n < 2 or no same-word pair exists.
ApResult same_different_ap(std::span<const Vec<double>> embeddings,
                           std::span<const std::string> labels);

struct FrequencyBucketReport {
  std::vector<std::size_t> thresholds;
  std::vector<std::size_t> segments;     // population of each bucket
  std::vector<std::optional<double>> ap;  // absent when the bucket has no positive pair
};

std::vector<std::size_t> default_frequency_thresholds();

/// AP on the subset of dev segments whose word occurs at least k times in
/// training, for each threshold k.
FrequencyBucketReport ap_by_frequency(std::span<const Vec<double>> embeddings,
                                      std::span<const std::string> labels,
                                      const std::map<std::string, std::size_t>& train_counts,
                                      std::span<const std::size_t> thresholds);

/// AP restricted to the segments for which keep(index) holds; nullopt if the
/// subset has no same-word pair.
std::optional<ApResult> ap_on_subset(std::span<const Vec<double>> embeddings,
                                     std::span<const std::string> labels,
                                     const std::function<bool(std::size_t)>& keep);

std::vector<std::string> labels_of(std::span<const Segment> segments);

/// Report writers: line-delimited / tab-separated text.
std::string format_ap_result(const ApResult& result);
std::string format_frequency_report(const FrequencyBucketReport& report);
std::string format_pr_curve(const ApResult& result);
std::string format_embeddings(std::span<const std::string> labels,
                              std::span<const Vec<double>> embeddings);

struct LabeledEmbeddings {
  std::vector<std::string> labels;
  std::vector<Vec<double>> vectors;
};

/// Parses the `label<TAB>v1<TAB>v2...` format written by format_embeddings.
LabeledEmbeddings parse_embeddings(const std::string& text);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

}  // namespace awe
