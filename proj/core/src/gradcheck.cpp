#include "nots/gradcheck.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace nots {

namespace {

double eval(const ScalarFn& f, const std::vector<Array>& params) {
  Tape t;
  std::vector<VarId> ids;
  ids.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i)
    ids.push_back(t.param(params[i], static_cast<int>(i)));
  VarId loss = f(t, ids);
  return t.value(loss).item();
}

}  // namespace

std::string GradCheckReport::to_string() const {
  std::ostringstream os;
  os << "grad_check tol=" << tol << " => " << (pass ? "PASS" : "FAIL") << "\n";
  for (const auto& e : entries) {
    os << "  " << e.name << ": max_rel_err=" << e.max_rel_err << " checked=" << e.checked;
    if (e.skipped > 0) os << " skipped=" << e.skipped << " (nondifferentiable point)";
    os << " " << (e.pass ? "ok" : "FAIL") << "\n";
  }
  return os.str();
}

GradCheckReport grad_check(const ScalarFn& f, const std::vector<Array>& params,
                           double step, double tol,
                           const std::vector<std::string>& names) {
  if (step <= 0.0 || step > 1e-2)
    throw std::invalid_argument("grad_check: step must be in (0, 1e-2]");

  // Analytic gradients.
  Tape t;
  std::vector<VarId> ids;
  for (std::size_t i = 0; i < params.size(); ++i)
    ids.push_back(t.param(params[i], static_cast<int>(i)));
  VarId loss = f(t, ids);
  auto grads = t.backward(loss);

  GradCheckReport report;
  report.tol = tol;
  for (std::size_t p = 0; p < params.size(); ++p) {
    GradCheckEntry e;
    e.name = (p < names.size()) ? names[p] : ("param" + std::to_string(p));
    const Array& g = grads.at(static_cast<int>(p));
    std::vector<Array> work = params;
    for (std::size_t c = 0; c < params[p].size(); ++c) {
      double orig = params[p].data[c];
      work[p].data[c] = orig + step;
      double fp = eval(f, work);
      work[p].data[c] = orig - step;
      double fm = eval(f, work);
      work[p].data[c] = orig;
      double numeric = (fp - fm) / (2.0 * step);
      double analytic = g.data[c];
      if (std::abs(analytic) + std::abs(numeric) < 1e-10) {
        ++e.skipped;
        continue;
      }
      double rel = std::abs(analytic - numeric) /
                   std::max(std::abs(analytic) + std::abs(numeric), 1e-12);
      e.max_rel_err = std::max(e.max_rel_err, rel);
      ++e.checked;
    }
    e.pass = e.max_rel_err <= tol;
    report.pass = report.pass && e.pass;
    report.entries.push_back(std::move(e));
  }
  return report;
}

}  // namespace nots
