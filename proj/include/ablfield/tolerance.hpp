#pragma once

#include <cstddef>

namespace ablfield {

/// Numerical thresholds shared by every module. Pass a modified copy to override.
struct Tolerances {
  double structural = 1e-10;  // operator identities: idempotence, unitarity, completeness
  double scalar = 1e-12;      // normalization, hermiticity, probability residues
  double collapse_threshold = 1e-14;
  double impossibility_threshold = 1e-14;
  std::size_t dimension_cap = std::size_t{1} << 20;
  // Dense complex matrices above this dimension are refused (4096^2 * 16 B = 256 MiB).
  std::size_t dense_operator_cap = 4096;
};

inline const Tolerances& default_tolerances() {
  static const Tolerances tol{};
  return tol;
}

}  // namespace ablfield
