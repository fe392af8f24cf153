#pragma once

#include <string>

#include "run_config.hpp"

namespace awe::cli {

// Each command returns the process exit status; failures are thrown as awe::Error.
int run_synth(const RunConfig& config);
int run_train_classifier(const RunConfig& config);
int run_train_siamese(const RunConfig& config);
int run_embed(const RunConfig& config);
int run_eval_ap(const RunConfig& config);
int run_grad_check(const RunConfig& config);
int run_inspect(const std::string& path);
int run_sweep(const RunConfig& config);

}  // namespace awe::cli
