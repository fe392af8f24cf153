#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "awe/checkpoint.hpp"
#include "awe/classifier.hpp"
#include "awe/dataset.hpp"
#include "awe/numeric.hpp"
#include "awe/random.hpp"

namespace awe {

/// Segment indices of an (anchor, same-word, different-word) triple.
struct Triplet {
  std::size_t anchor = 0;
  std::size_t same = 0;
  std::size_t diff = 0;

  bool operator==(const Triplet&) const = default;
};

template <class T>
struct CosHinge {
  double loss = 0.0;
  double d_as = 0.0;  // cosine distance anchor-same
  double d_ad = 0.0;  // cosine distance anchor-diff
  Vec<T> grad_anchor;
  Vec<T> grad_same;
  Vec<T> grad_diff;
};

/// max(0, m + d_cos(a, s) - d_cos(a, d)). Gradients are zero when the hinge
/// is inactive, including exactly at the kink. Throws DegenerateVector on a
/// zero-norm embedding.
template <class T>
CosHinge<T> cos_hinge_loss(const Vec<T>& anchor, const Vec<T>& same, const Vec<T>& diff, double margin);

/// Word labels of a training corpus mapped to dense indices, with the
/// segments of each label.
class LabelIndex {
 public:
  explicit LabelIndex(const Corpus& corpus);

  std::size_t num_labels() const { return labels_.size(); }
  std::size_t num_segments() const { return label_of_segment_.size(); }
  const std::string& label(std::size_t index) const { return labels_[index]; }
  std::size_t index_of(const std::string& label) const;
  std::size_t label_of_segment(std::size_t segment) const { return label_of_segment_[segment]; }
  const std::vector<std::size_t>& segments_of(std::size_t label) const { return members_[label]; }
  const std::vector<std::string>& labels() const { return labels_; }

 private:
  std::vector<std::string> labels_;
  std::map<std::string, std::size_t> index_;
  std::vector<std::size_t> label_of_segment_;
  std::vector<std::vector<std::size_t>> members_;
};

/// n x n label-similarity accumulator driving non-uniform negative sampling.
/// Increments are staged and only become visible after commit(), so sampling
/// within a minibatch sees the matrix as of the previous batch boundary.
class SimilarityMatrix {
 public:
  explicit SimilarityMatrix(std::size_t n);

  /// Zero diagonal, ones elsewhere (uniform sampling over other labels).
  void reset();

  std::size_t size() const { return n_; }
  double at(std::size_t i, std::size_t j) const { return values_[i * n_ + j]; }
  void set(std::size_t i, std::size_t j, double v) { values_[i * n_ + j] = v; }
  double row_sum(std::size_t i) const;

  /// Row i normalized to a probability mass function (empty if the row sums to 0).
  std::vector<double> pmf(std::size_t i) const;
  /// Shannon entropy (nats) of row i's PMF.
  double row_entropy(std::size_t i) const;

  /// Stages `increment` for both (i, j) and (j, i).
  void stage(std::size_t i, std::size_t j, double increment);
  void commit();
  bool has_pending() const { return pending_dirty_; }

 private:
  std::size_t n_;
  std::vector<double> values_;
  std::vector<double> pending_;
  bool pending_dirty_ = false;
};

/// If d_ad <= d_as + m_star, stages cos(a, d) = 1 - d_ad, clamped at zero,
/// onto S[anchor_label, diff_label] and S[diff_label, anchor_label]. Returns
/// the staged increment (0 when inactive).
double update_similarity_matrix(SimilarityMatrix& sim, std::size_t anchor_label, std::size_t diff_label,
                                double d_as, double d_ad, double m_star);

enum class SamplingMode { uniform, nonuniform };

SamplingMode parse_sampling_mode(const std::string& s);
std::string to_string(SamplingMode mode);

/// Draws a segment whose label differs from anchor_label. Uniform mode (or a
/// null sim) draws uniformly over all such segments; non-uniform mode draws a
/// label from the normalized row of `sim`, then a segment uniformly within it.
/// A zero row falls back to uniform with a warning on stderr.
std::size_t sample_negative(std::size_t anchor_label, const LabelIndex& index, const SimilarityMatrix* sim,
                            SamplingMode mode, RandomSource& rng);

/// For each pair (a, s) draws one negative d = sample_diff(a) and emits
/// (a, s, d) followed by its mirror (s, a, d).
std::vector<Triplet> build_minibatch(std::span<const std::pair<std::size_t, std::size_t>> pairs,
                                     const std::function<std::size_t(std::size_t)>& sample_diff);

std::vector<Triplet> build_minibatch(std::span<const std::pair<std::size_t, std::size_t>> pairs,
                                     const LabelIndex& index, const SimilarityMatrix* sim, SamplingMode mode,
                                     RandomSource& rng);

struct SiameseTrainConfig {
  double margin = 0.4;
  double m_star = 0.6;
  /// Same-word pairs per minibatch (B); a batch holds 2B triplets.
  int pairs_per_batch = 16;
  int embed_dim = 1024;
  double lr_init = 0.001;
  double momentum = 0.9;
  int lr_drop_epochs = 3;
  double lr_decay = 10.0;
  int max_epochs = 15;
  SamplingMode sampling = SamplingMode::nonuniform;
  /// Only used for a cold start; a warm start reuses the checkpoint's normalizer.
  bool normalize = true;
  std::uint64_t seed = 1;

  void validate() const;
};

template <class T>
struct TripletBatchLoss {
  double loss = 0.0;  // mean over triplets
  std::size_t zero_loss = 0;
  std::vector<CosHinge<T>> per_triplet;
};

/// Embeds the distinct segments of `triplets` once (one shared parameter set),
/// evaluates the mean cos-hinge loss and, if grads is non-null, accumulates its
/// gradient.
template <class T>
TripletBatchLoss<T> triplet_batch_loss(const NetworkParams<T>& params, const NetworkConfig& config,
                                       std::span<const Segment> segments, std::span<const Triplet> triplets,
                                       double margin, Mode mode, RandomSource* rng, NetworkParams<T>* grads);

/// Network for the Siamese phase: the warm start's recurrent stack and all
/// but its last fully connected layer, followed by a freshly initialized
/// linear layer of size embed_dim.
Checkpoint siamese_from_warm_start(const Checkpoint& warm_start, int embed_dim, RandomSource& init_rng);

/// Cos-hinge training over all same-word pairs of `train`. With no warm start
/// the network described by `cold_network` is randomly initialized.
TrainResult train_siamese(const Corpus& train, const Corpus& dev, const std::optional<Checkpoint>& warm_start,
                          const SiameseTrainConfig& config, const NetworkConfig& cold_network = {},
                          const EpochCallback& on_epoch = {});

}  // namespace awe
