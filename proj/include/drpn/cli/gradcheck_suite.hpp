#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "drpn/numerics/gradcheck.hpp"

namespace drpn::cli {

enum class GradcheckScope { kOp, kModule, kFull };

GradcheckScope parse_scope(const std::string& name);

struct GradcheckCase {
  std::string name;
  num::GradCheckReport report;
};

/// op: every primitive at random points; module: each model block on its own;
/// full: the complete forward pass and loss at toy sizes (d = 8, l_p = 3,
/// l_n = 4, two heads everywhere) on a small synthetic dataset.
std::vector<GradcheckCase> run_gradchecks(GradcheckScope scope, double tol, std::uint64_t seed = 1);

}  // namespace drpn::cli
