#include "awe/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "awe/error.hpp"

namespace awe {

EmbeddingSource parse_embedding_source(const std::string& s) {
  if (s == "log_softmax" || s == "head") return EmbeddingSource::head_output;
  if (s == "logits") return EmbeddingSource::logits;
  throw ConfigError("unknown embedding source '" + s + "' (expected log_softmax or logits)");
}

std::string to_string(EmbeddingSource source) {
  return source == EmbeddingSource::head_output ? "log_softmax" : "logits";
}

std::vector<Vec<double>> compute_embeddings(const NetworkParams<float>& params,
                                            const NetworkConfig& config,
                                            std::span<const Segment> segments,
                                            const EmbedOptions& options) {
  if (options.batch_size < 1) throw ConfigError("embedding batch size must be >= 1");
  std::vector<Vec<double>> out;
  out.reserve(segments.size());
  std::vector<FrameView> views;
  for (std::size_t start = 0; start < segments.size(); start += options.batch_size) {
    const std::size_t end = std::min(segments.size(), start + options.batch_size);
    views.clear();
    for (std::size_t i = start; i < end; ++i) views.push_back(segments[i].view());
    const auto tr = forward_batch<float>(params, config, views, Mode::eval, nullptr);
    const Mat<float>& m = options.source == EmbeddingSource::logits ? tr.logits : tr.output;
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m.col(c).cast<double>());
  }
  return out;
}

std::vector<Vec<double>> compute_embeddings(const Checkpoint& checkpoint,
                                            std::span<const Segment> segments,
                                            const EmbedOptions& options) {
  if (checkpoint.normalizer.empty()) {
    return compute_embeddings(checkpoint.params, checkpoint.config, segments, options);
  }
  std::vector<Segment> copy(segments.begin(), segments.end());
  for (auto& s : copy) checkpoint.normalizer.apply(s);
  return compute_embeddings(checkpoint.params, checkpoint.config, copy, options);
}

namespace {

struct RankKey {
  double similarity;
  std::size_t index;
};

/// True when a ranks strictly ahead of b.
inline bool ranks_before(const RankKey& a, const RankKey& b) {
  if (a.similarity != b.similarity) return a.similarity > b.similarity;
  return a.index < b.index;
}

}  // namespace

ApResult same_different_ap(std::span<const Vec<double>> embeddings,
                           std::span<const std::string> labels) {
  const std::size_t n = embeddings.size();
  if (labels.size() != n) throw InvalidInput("same_different_ap: embeddings/labels size mismatch");
  if (n < 2) throw InvalidInput("same_different_ap: need at least two segments");
  const std::size_t dim = static_cast<std::size_t>(embeddings.front().size());

  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (static_cast<std::size_t>(embeddings[i].size()) != dim) {
      throw InvalidInput("same_different_ap: embeddings have different dimensions");
    }
    const double* x = embeddings[i].data();
    const double xx = dot_sequential(x, x, dim);
    if (!(xx > 0.0)) throw DegenerateVector("embedding " + std::to_string(i) + " has zero norm");
    if (!std::isfinite(xx)) throw NumericError("embedding " + std::to_string(i) + " is not finite");
    norms[i] = std::sqrt(xx);
  }
  auto similarity = [&](std::size_t i, std::size_t j) {
    const double xy = dot_sequential(embeddings[i].data(), embeddings[j].data(), dim);
    return std::clamp(xy / (norms[i] * norms[j]), -1.0, 1.0);
  };

  std::vector<RankKey> positives;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (labels[i] == labels[j]) positives.push_back({similarity(i, j), pair_index(i, j, n)});
    }
  }
  if (positives.empty()) throw InvalidInput("same_different_ap: no same-word pairs, AP undefined");
  std::sort(positives.begin(), positives.end(), ranks_before);
  const std::size_t num_pos = positives.size();

  // ahead[q] counts negatives ranked after exactly q positives.
  std::vector<std::size_t> ahead(num_pos + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (labels[i] == labels[j]) continue;
      const RankKey key{similarity(i, j), pair_index(i, j, n)};
      const auto q = static_cast<std::size_t>(
          std::lower_bound(positives.begin(), positives.end(), key, ranks_before) - positives.begin());
      ++ahead[q];
    }
  }

  ApResult result;
  result.num_positive = num_pos;
  result.num_total = n * (n - 1) / 2;
  result.pr_curve.reserve(num_pos);
  std::size_t negatives_before = 0;
  // Extended precision so small cases round to the exact rational (5/6, not 5/6 - 1ulp).
  long double sum = 0.0L;
  for (std::size_t k = 0; k < num_pos; ++k) {
    negatives_before += ahead[k];
    const auto hits = static_cast<long double>(k + 1);
    const auto rank = static_cast<long double>(k + 1 + negatives_before);
    sum += hits / rank;
    result.pr_curve.push_back({static_cast<double>(hits / rank),
                               static_cast<double>(hits / static_cast<long double>(num_pos))});
  }
  result.ap = static_cast<double>(sum / static_cast<long double>(num_pos));
  return result;
}

std::vector<std::size_t> default_frequency_thresholds() { return {0, 1, 3, 5, 7, 10, 15}; }

std::optional<ApResult> ap_on_subset(std::span<const Vec<double>> embeddings,
                                     std::span<const std::string> labels,
                                     const std::function<bool(std::size_t)>& keep) {
  std::vector<Vec<double>> sub_e;
  std::vector<std::string> sub_l;
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    if (keep(i)) {
      sub_e.push_back(embeddings[i]);
      sub_l.push_back(labels[i]);
    }
  }
  std::map<std::string, std::size_t> counts;
  bool has_pair = false;
  for (const auto& l : sub_l) has_pair = has_pair || ++counts[l] >= 2;
  if (!has_pair) return std::nullopt;
  return same_different_ap(sub_e, sub_l);
}

FrequencyBucketReport ap_by_frequency(std::span<const Vec<double>> embeddings,
                                      std::span<const std::string> labels,
                                      const std::map<std::string, std::size_t>& train_counts,
                                      std::span<const std::size_t> thresholds) {
  if (labels.size() != embeddings.size()) throw InvalidInput("ap_by_frequency: size mismatch");
  auto count_of = [&](const std::string& label) -> std::size_t {
    const auto it = train_counts.find(label);
    return it == train_counts.end() ? 0 : it->second;
  };
  FrequencyBucketReport report;
  for (std::size_t k : thresholds) {
    std::size_t population = 0;
    for (const auto& l : labels) population += count_of(l) >= k ? 1 : 0;
    const auto res =
        ap_on_subset(embeddings, labels, [&](std::size_t i) { return count_of(labels[i]) >= k; });
    report.thresholds.push_back(k);
    report.segments.push_back(population);
    report.ap.push_back(res ? std::optional<double>(res->ap) : std::nullopt);
  }
  return report;
}

std::vector<std::string> labels_of(std::span<const Segment> segments) {
  std::vector<std::string> out;
  out.reserve(segments.size());
  for (const auto& s : segments) out.push_back(s.label);
  return out;
}

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string format_ap_result(const ApResult& r) {
  nlohmann::json j;
  j["ap"] = r.ap;
  j["num_positive"] = r.num_positive;
  j["num_total"] = r.num_total;
  return j.dump() + "\n";
}

std::string format_frequency_report(const FrequencyBucketReport& report) {
  std::string out;
  for (std::size_t b = 0; b < report.thresholds.size(); ++b) {
    nlohmann::json j;
    j["min_train_count"] = report.thresholds[b];
    j["segments"] = report.segments[b];
    if (report.ap[b]) {
      j["ap"] = *report.ap[b];
    } else {
      j["ap"] = nullptr;
    }
    out += j.dump() + "\n";
  }
  return out;
}

std::string format_pr_curve(const ApResult& result) {
  std::string out = "precision\trecall\n";
  for (const auto& p : result.pr_curve) {
    out += format_double(p.precision) + "\t" + format_double(p.recall) + "\n";
  }
  return out;
}

std::string format_embeddings(std::span<const std::string> labels,
                              std::span<const Vec<double>> embeddings) {
  std::string out;
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    out += labels[i];
    for (Eigen::Index k = 0; k < embeddings[i].size(); ++k) out += "\t" + format_double(embeddings[i][k]);
    out += "\n";
  }
  return out;
}

LabeledEmbeddings parse_embeddings(const std::string& text) {
  LabeledEmbeddings out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> values;
    std::size_t pos = line.find('\t');
    if (pos == std::string::npos) throw DataError("embeddings line " + std::to_string(line_no) + " has no values");
    out.labels.push_back(line.substr(0, pos));
    while (pos != std::string::npos) {
      const std::size_t next = line.find('\t', pos + 1);
      const std::string field = line.substr(pos + 1, next == std::string::npos ? std::string::npos : next - pos - 1);
      double v = 0.0;
      const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
      if (res.ec != std::errc() || res.ptr != field.data() + field.size() || !std::isfinite(v)) {
        throw DataError("embeddings line " + std::to_string(line_no) + ": bad value '" + field + "'");
      }
      values.push_back(v);
      pos = next;
    }
    if (!out.vectors.empty() && static_cast<std::size_t>(out.vectors.front().size()) != values.size()) {
      throw DataError("embeddings line " + std::to_string(line_no) + " has a different dimension");
    }
    out.vectors.push_back(Eigen::Map<const Vec<double>>(values.data(), static_cast<Eigen::Index>(values.size())));
  }
  return out;
}

}  // namespace awe
