#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "awe/dataset.hpp"
#include "awe/gradcheck.hpp"
#include "awe/network.hpp"
#include "awe/numeric.hpp"

namespace awe::testing {

/// Random corpus with labels "l0".."l{k-1}" (each used at least twice when
/// n >= 2k) and Gaussian frames.
Corpus random_corpus(RandomSource& rng, std::size_t n, std::size_t num_labels, int dim, int min_len,
                     int max_len);

std::vector<Vec<double>> random_embeddings(RandomSource& rng, std::size_t n, int dim);
std::vector<std::string> random_labels(RandomSource& rng, std::size_t n, std::size_t num_labels);

/// Reference average precision: materializes every pair, sorts by
/// (similarity desc, pair index asc) and averages precision at each positive.
double brute_force_ap(const std::vector<Vec<double>>& embeddings, const std::vector<std::string>& labels);

// The network gradient harness lives in the core library (it also backs the
// grad-check command); tests reach it through these names.
using awe::check_network_gradient;
using awe::describe;
using awe::GradientCase;
using awe::LossKind;
using awe::NetworkGradientReport;

}  // namespace awe::testing
