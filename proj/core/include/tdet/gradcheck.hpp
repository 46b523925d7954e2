#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace tdet {

inline constexpr double kGradCheckTolerance = 1e-4;
// Largest step: test points keep 2 eps clear of kinks, which needs room.
inline constexpr double kMaxGradCheckEps = 0.1;

struct GradCheckOptions {
  std::uint64_t seed = 1;
  double eps = 1e-3;
  // Upstream gradient all zero; analytic and numeric gradients must both vanish.
  bool zero_upstream = false;
};

struct GradCheckReport {
  std::string op;
  double max_rel_error = 0.0;
  std::size_t checked = 0;  // number of scalar parameters compared
};

// Registered operator identifiers, in report order.
const std::vector<std::string>& gradcheck_ops();

// Central-difference check of one operator's analytic backward on seeded
// random shapes. Error is max |analytic - numeric| / max(1e-8, |numeric|).
// Bilinear lattice points and the smooth-L1 knee are kept out of reach of the
// finite-difference stencil. Unknown identifiers throw std::invalid_argument.
GradCheckReport finite_diff_check(std::string_view op, const GradCheckOptions& options = {});

}  // namespace tdet
