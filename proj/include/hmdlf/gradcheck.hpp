#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hmdlf/tensor.hpp"

namespace hmdlf {

struct GradcheckRow {
  std::string component;
  double max_rel_err = 0.0;
  bool pass = false;
};

struct GradcheckReport {
  std::vector<GradcheckRow> rows;
  double threshold = 1e-4;
  bool all_pass = false;
};

/// Elementwise |a - b| / max(|a|, |b|, floor), maximized over the tensor.
double max_rel_error(const Tensor& analytic, const Tensor& numeric, double floor = 1e-8);

/// Checks every layer's analytic gradients (parameters and inputs) and the
/// end-to-end toy network against central finite differences (h = 1e-5),
/// three seeds per component. `corrupt_component`, when non-empty, injects
/// a deliberate error into that component's analytic gradient so tests can
/// verify the check actually detects failures.
GradcheckReport run_gradcheck(std::uint64_t base_seed = 7,
                              const std::string& corrupt_component = "");

}  // namespace hmdlf
