#include "ablfield/field.hpp"

#include <cmath>

#include "ablfield/error.hpp"

namespace ablfield {

namespace {

double axis_at(double lo, double hi, std::size_t steps, std::size_t i) {
  if (steps == 1) {
    return lo;
  }
  const double frac = static_cast<double>(i) / static_cast<double>(steps - 1);
  return i + 1 == steps ? hi : lo + (hi - lo) * frac;
}

}  // namespace

double GridSpec::t_at(std::size_t i) const { return axis_at(t_min, t_max, t_steps, i); }
double GridSpec::x_at(std::size_t j) const { return axis_at(x_min, x_max, x_steps, j); }

double GridSpec::dx() const {
  return x_steps > 1 ? (x_max - x_min) / static_cast<double>(x_steps - 1) : 0.0;
}

void GridSpec::validate() const {
  if (t_steps < 1 || x_steps < 1) {
    throw ValidationError("grid: step counts must be at least 1");
  }
  if (!std::isfinite(t_min) || !std::isfinite(t_max) || !std::isfinite(x_min) ||
      !std::isfinite(x_max)) {
    throw ValidationError("grid: ranges must be finite");
  }
  if (t_max < t_min || x_max < x_min) {
    throw ValidationError("grid: range upper bound below lower bound");
  }
}

double BeableField::slice_integral(std::size_t ti) const {
  const std::size_t n = grid.x_steps;
  if (n < 2) {
    return 0.0;
  }
  double s = 0.0;
  for (std::size_t j = 0; j + 1 < n; ++j) {
    s += 0.5 * (at(ti, j) + at(ti, j + 1)) * (grid.x_at(j + 1) - grid.x_at(j));
  }
  return s;
}

}  // namespace ablfield
