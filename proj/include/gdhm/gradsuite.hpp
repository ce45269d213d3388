#pragma once

#include <string>
#include <vector>

#include "gdhm/common.hpp"

namespace gdhm {

// Finite-difference verification of every differentiable operation, each on
// its own randomized scene. Renderer tolerance 1e-3, everything else 1e-4.
struct GradSuiteEntry {
  std::string op;
  double tolerance = 0;
  double max_rel_err = 0;
  int seeds = 0;
  bool pass = false;
};

std::vector<GradSuiteEntry> run_grad_suite(int n_seeds, uint64_t base_seed = 1000);

}  // namespace gdhm
