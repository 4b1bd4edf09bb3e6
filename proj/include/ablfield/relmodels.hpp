#pragma once

#include <cstddef>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ablfield/abl.hpp"
#include "ablfield/field.hpp"
#include "ablfield/hilbert.hpp"

namespace ablfield::rel {

struct SpacetimePoint {
  double t = 0.0;
  double x = 0.0;
};

enum class Direction { left, right };

/// Null line x(t) = origin.x -/+ (t - origin.t).
struct LightRay {
  SpacetimePoint origin;
  Direction direction = Direction::left;

  double x_at(double t) const;
};

enum class NatureChoice { cloud1, cloud2 };

std::string to_string(NatureChoice c);

/// Two mass clouds at x1 < x2 in superposition a|1> + b|2>, probed by one photon from the left
/// (photons = 1) or additionally a second photon from the right (photons = 2). Both photons
/// reach their first cloud at t1.
struct ToyModelConfig {
  double x1 = -1.0;
  double x2 = 1.0;
  double sigma1 = 0.05;
  double sigma2 = 0.05;
  Complex amp_a{std::sqrt(0.5), 0.0};
  Complex amp_b{std::sqrt(0.5), 0.0};
  double mass = 1.0;
  double t1 = 0.0;
  int photons = 1;
  GridSpec grid;
  double separation_ratio = 0.1;

  double t2() const { return t1 + (x2 - x1); }
  double delta_x() const { return x2 - x1; }
  double weight_a() const { return std::norm(amp_a); }
  double weight_b() const { return std::norm(amp_b); }
  void validate() const;
};

struct BranchState {
  Complex amplitude;
  /// One position per photon (photon 1 first).
  std::vector<double> photon_positions;
};

/// Photon positions and cloud amplitude of both branches at time t (branch 1 first).
std::vector<BranchState> branch_structure(const ToyModelConfig& cfg, double t);

/// Cloud1 with probability |a|^2, from a generator seeded with `seed`.
NatureChoice sample_nature_choice(const ToyModelConfig& cfg, std::uint64_t seed);
/// `count` successive draws from one generator; the first equals sample_nature_choice.
std::vector<NatureChoice> sample_nature_choices(const ToyModelConfig& cfg, std::uint64_t seed,
                                                std::size_t count);

/// Whether the ray ends up outside the future light cone of y. Points on the cone count as
/// seeing the ray.
bool ray_visible_outside_cone(const LightRay& ray, const SpacetimePoint& y);

/// Outgoing rays recorded in the late-time configuration when the photons bounced off `branch`.
std::vector<LightRay> outgoing_rays(const ToyModelConfig& cfg, NatureChoice branch);
/// Rays whose presence or absence decides the branch.
std::vector<LightRay> information_rays(const ToyModelConfig& cfg);

bool in_region_of_indeterminacy(const ToyModelConfig& cfg, const SpacetimePoint& y);
/// Same set, from visibility of the information rays.
bool roi_by_visibility(const ToyModelConfig& cfg, const SpacetimePoint& y);

/// Earliest time at which the point x leaves the region of indeterminacy.
double collapse_time_at(const ToyModelConfig& cfg, double x);

/// Normalized Gaussian |psi_k(x)|^2 (k = 1, 2), zero beyond 8 sigma.
double cloud_density(const ToyModelConfig& cfg, int cloud, double x);

double beable_value(const ToyModelConfig& cfg, NatureChoice choice, const SpacetimePoint& y);
BeableField beable_field(const ToyModelConfig& cfg, NatureChoice choice, unsigned threads = 1);

/// Two-outcome conditional (labels 1, 2) at y given that the late-time rays match `choice`.
ConditionalDistribution rel_conditional(const ToyModelConfig& cfg, const SpacetimePoint& y,
                                        NatureChoice choice);
/// Conditional at a point inside the region of indeterminacy; ContractError elsewhere.
ConditionalDistribution born_reduction_check(const ToyModelConfig& cfg, const SpacetimePoint& y);

struct RayPath {
  int photon = 1;
  int branch = 1;
  std::vector<SpacetimePoint> points;
};

/// Photon trajectories of both branches across the grid's time range, as polylines.
std::vector<RayPath> ray_paths(const ToyModelConfig& cfg);

enum class SliceKind { inside, outside, mixed };

std::string to_string(SliceKind k);

/// Position of a time slice relative to the region of indeterminacy, judged on the grid points
/// where either cloud has support.
SliceKind classify_slice(const ToyModelConfig& cfg, std::size_t ti);

/// Mass on the slice at time t, integrated piecewise in closed form (no grid).
double slice_mass(const ToyModelConfig& cfg, NatureChoice choice, double t);

/// Number of region boundary points at time t lying strictly inside a cloud's support. Where
/// this is nonzero the field has a step inside the support.
std::size_t boundary_crossings(const ToyModelConfig& cfg, double t);

}  // namespace ablfield::rel
