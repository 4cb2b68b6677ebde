#pragma once

#include <functional>
#include <string>
#include <vector>

#include "nots/tape.hpp"

namespace nots {

// f builds a scalar loss on the given tape; the params vector holds the leaf
// VarIds registered with param ids 0..n-1 in order.
using ScalarFn = std::function<VarId(Tape&, const std::vector<VarId>&)>;

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  int checked = 0;
  int skipped = 0;  // coordinates at a nondifferentiable or zero point
  bool pass = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double tol = 0.0;
  bool pass = true;
  std::string to_string() const;
};

// Central finite differences against the tape's analytic gradients.
// Coordinates where |analytic| + |numeric| < 1e-10 are skipped and counted
// as "nondifferentiable point" coordinates.
GradCheckReport grad_check(const ScalarFn& f, const std::vector<Array>& params,
                           double step, double tol,
                           const std::vector<std::string>& names = {});

}  // namespace nots
