#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace awe::testing {

Corpus random_corpus(RandomSource& rng, std::size_t n, std::size_t num_labels, int dim, int min_len,
                     int max_len) {
  Corpus corpus;
  for (std::size_t i = 0; i < n; ++i) {
    Segment s;
    s.label = "l" + std::to_string(i % num_labels);
    s.dim = dim;
    s.num_frames = min_len + static_cast<int>(rng.index(static_cast<std::size_t>(max_len - min_len + 1)));
    s.frames.resize(static_cast<std::size_t>(s.num_frames) * dim);
    for (auto& v : s.frames) v = static_cast<float>(rng.normal());
    corpus.segments.push_back(std::move(s));
  }
  return corpus;
}

std::vector<Vec<double>> random_embeddings(RandomSource& rng, std::size_t n, int dim) {
  std::vector<Vec<double>> out;
  for (std::size_t i = 0; i < n; ++i) {
    Vec<double> v(dim);
    for (int d = 0; d < dim; ++d) v[d] = rng.normal();
    out.push_back(v);
  }
  return out;
}

std::vector<std::string> random_labels(RandomSource& rng, std::size_t n, std::size_t num_labels) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("w" + std::to_string(rng.index(num_labels)));
  return out;
}

double brute_force_ap(const std::vector<Vec<double>>& embeddings, const std::vector<std::string>& labels) {
  struct Pair {
    double sim;
    std::size_t order;
    bool same;
  };
  std::vector<Pair> pairs;
  std::size_t order = 0;
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    for (std::size_t j = i + 1; j < embeddings.size(); ++j) {
      pairs.push_back({cosine_similarity(embeddings[i], embeddings[j]), order++, labels[i] == labels[j]});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    return std::tie(b.sim, a.order) < std::tie(a.sim, b.order);
  });
  long double sum = 0.0L;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < pairs.size(); ++r) {
    if (!pairs[r].same) continue;
    ++hits;
    sum += static_cast<long double>(hits) / static_cast<long double>(r + 1);
  }
  return static_cast<double>(sum / static_cast<long double>(hits));
}

}  // namespace awe::testing
