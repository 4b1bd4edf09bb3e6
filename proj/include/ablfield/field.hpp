#pragma once

#include <cstddef>
#include <vector>

namespace ablfield {

/// Regular (t, x) grid, both axes inclusive of their end points.
struct GridSpec {
  double t_min = 0.0;
  double t_max = 0.0;
  std::size_t t_steps = 1;
  double x_min = 0.0;
  double x_max = 0.0;
  std::size_t x_steps = 1;

  double t_at(std::size_t i) const;
  double x_at(std::size_t j) const;
  double dx() const;
  std::size_t size() const { return t_steps * x_steps; }
  void validate() const;
};

/// Expectation values <rho(x;t)> in row-major order: t outer, x inner.
struct BeableField {
  GridSpec grid;
  std::vector<double> values;

  double at(std::size_t ti, std::size_t xi) const { return values[ti * grid.x_steps + xi]; }
  double& at(std::size_t ti, std::size_t xi) { return values[ti * grid.x_steps + xi]; }
  /// Trapezoid rule over the x row at time index ti.
  double slice_integral(std::size_t ti) const;
};

}  // namespace ablfield
