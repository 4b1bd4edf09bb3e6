#include "ablfield/relmodels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "ablfield/error.hpp"
#include "ablfield/parallel.hpp"
#include "ablfield/random.hpp"

namespace ablfield::rel {

namespace {

constexpr double kTruncation = 8.0;

bool finite(double v) { return std::isfinite(v); }

std::vector<bool> visibility_signature(const std::vector<LightRay>& rays,
                                       const SpacetimePoint& y) {
  std::vector<bool> out;
  for (const LightRay& r : rays) out.push_back(ray_visible_outside_cone(r, y));
  return out;
}

}  // namespace

double LightRay::x_at(double t) const {
  return direction == Direction::left ? origin.x - (t - origin.t) : origin.x + (t - origin.t);
}

std::string to_string(NatureChoice c) { return c == NatureChoice::cloud1 ? "Cloud1" : "Cloud2"; }

std::string to_string(SliceKind k) {
  switch (k) {
    case SliceKind::inside:
      return "inside";
    case SliceKind::outside:
      return "outside";
    case SliceKind::mixed:
      break;
  }
  return "mixed";
}

void ToyModelConfig::validate() const {
  if (!finite(x1) || !finite(x2) || !(x1 < x2)) {
    throw ValidationError("x1, x2: need finite x1 < x2");
  }
  if (!(sigma1 > 0.0) || !finite(sigma1)) throw ValidationError("sigma1: must be positive");
  if (!(sigma2 > 0.0) || !finite(sigma2)) throw ValidationError("sigma2: must be positive");
  if (!(separation_ratio > 0.0) || !finite(separation_ratio)) {
    throw ValidationError("separation_ratio: must be positive");
  }
  const double limit = separation_ratio * (x2 - x1);
  if (sigma1 > limit || sigma2 > limit) {
    std::ostringstream os;
    os << "sigma1, sigma2: clouds not well separated (each width must be <= "
       << separation_ratio << " * (x2 - x1) = " << limit << ")";
    throw ValidationError(os.str());
  }
  if (!finite(amp_a.real()) || !finite(amp_a.imag()) || !finite(amp_b.real()) ||
      !finite(amp_b.imag())) {
    throw ValidationError("amp_a, amp_b: must be finite");
  }
  const double total = std::norm(amp_a) + std::norm(amp_b);
  if (std::abs(total - 1.0) > 1e-12) {
    std::ostringstream os;
    os.precision(17);
    os << "amp_a, amp_b: |a|^2 + |b|^2 must equal 1 within 1e-12 (got " << total << ")";
    throw ValidationError(os.str());
  }
  if (!(mass > 0.0) || !finite(mass)) throw ValidationError("mass: must be positive");
  if (!finite(t1)) throw ValidationError("t1: must be finite");
  if (photons != 1 && photons != 2) throw ValidationError("photons: must be 1 or 2");
  grid.validate();
}

std::vector<BranchState> branch_structure(const ToyModelConfig& cfg, double t) {
  const double t1 = cfg.t1;
  const double t2 = cfg.t2();
  const double x1 = cfg.x1;
  const double x2 = cfg.x2;
  BranchState b1{cfg.amp_a, {}};
  BranchState b2{cfg.amp_b, {}};
  if (cfg.photons == 1) {
    if (t < t1) {
      b1.photon_positions = {t + x1 - t1};
      b2.photon_positions = {t + x1 - t1};
    } else if (t < t2) {
      b1.photon_positions = {t1 + x1 - t};
      b2.photon_positions = {t + x1 - t1};
    } else {
      b1.photon_positions = {t1 + x1 - t};
      b2.photon_positions = {t2 + x2 - t};
    }
  } else {
    if (t < t1) {
      b1.photon_positions = {x1 + t - t1, x2 - t + t1};
      b2.photon_positions = {x1 + t - t1, x2 - t + t1};
    } else if (t < t2) {
      b1.photon_positions = {x1 - t + t1, x2 - t + t1};
      b2.photon_positions = {x1 + t - t1, x2 + t - t1};
    } else {
      b1.photon_positions = {x1 - t + t1, x1 + t - t2};
      b2.photon_positions = {x2 - t + t2, x2 + t - t1};
    }
  }
  return {b1, b2};
}

std::vector<NatureChoice> sample_nature_choices(const ToyModelConfig& cfg, std::uint64_t seed,
                                                std::size_t count) {
  std::mt19937_64 rng(seed);
  const double pa = cfg.weight_a();
  std::vector<NatureChoice> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(uniform01(rng) < pa ? NatureChoice::cloud1 : NatureChoice::cloud2);
  }
  return out;
}

NatureChoice sample_nature_choice(const ToyModelConfig& cfg, std::uint64_t seed) {
  return sample_nature_choices(cfg, seed, 1).front();
}

bool ray_visible_outside_cone(const LightRay& ray, const SpacetimePoint& y) {
  if (ray.direction == Direction::left) {
    return y.t + y.x >= ray.origin.t + ray.origin.x;
  }
  return y.t - y.x >= ray.origin.t - ray.origin.x;
}

std::vector<LightRay> outgoing_rays(const ToyModelConfig& cfg, NatureChoice branch) {
  const double t1 = cfg.t1;
  const double t2 = cfg.t2();
  if (cfg.photons == 1) {
    return branch == NatureChoice::cloud1
               ? std::vector<LightRay>{{{t1, cfg.x1}, Direction::left}}
               : std::vector<LightRay>{{{t2, cfg.x2}, Direction::left}};
  }
  if (branch == NatureChoice::cloud1) {
    return {{{t1, cfg.x1}, Direction::left}, {{t2, cfg.x1}, Direction::right}};
  }
  return {{{t2, cfg.x2}, Direction::left}, {{t1, cfg.x2}, Direction::right}};
}

std::vector<LightRay> information_rays(const ToyModelConfig& cfg) {
  std::vector<LightRay> rays{{{cfg.t1, cfg.x1}, Direction::left}};
  if (cfg.photons == 2) {
    rays.push_back({{cfg.t1, cfg.x2}, Direction::right});
  }
  return rays;
}

bool in_region_of_indeterminacy(const ToyModelConfig& cfg, const SpacetimePoint& y) {
  // t < t1 - (x - x1) and t < t1 + (x - x2), in null coordinates.
  const bool left = y.t + y.x < cfg.t1 + cfg.x1;
  if (cfg.photons == 1) return left;
  return left && y.t - y.x < cfg.t1 - cfg.x2;
}

bool roi_by_visibility(const ToyModelConfig& cfg, const SpacetimePoint& y) {
  for (const LightRay& r : information_rays(cfg)) {
    if (ray_visible_outside_cone(r, y)) return false;
  }
  return true;
}

double collapse_time_at(const ToyModelConfig& cfg, double x) {
  const double left = cfg.t1 - (x - cfg.x1);
  if (cfg.photons == 1) return left;
  return std::min(left, cfg.t1 + (x - cfg.x2));
}

double cloud_density(const ToyModelConfig& cfg, int cloud, double x) {
  const double centre = cloud == 1 ? cfg.x1 : cfg.x2;
  const double sigma = cloud == 1 ? cfg.sigma1 : cfg.sigma2;
  const double z = (x - centre) / sigma;
  if (std::abs(z) > kTruncation) return 0.0;
  return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

double beable_value(const ToyModelConfig& cfg, NatureChoice choice, const SpacetimePoint& y) {
  const double d1 = cloud_density(cfg, 1, y.x);
  const double d2 = cloud_density(cfg, 2, y.x);
  if (in_region_of_indeterminacy(cfg, y)) {
    return cfg.mass * cfg.weight_a() * d1 + cfg.mass * cfg.weight_b() * d2;
  }
  return cfg.mass * (choice == NatureChoice::cloud1 ? d1 : d2);
}

BeableField beable_field(const ToyModelConfig& cfg, NatureChoice choice, unsigned threads) {
  cfg.validate();
  BeableField field{cfg.grid, std::vector<double>(cfg.grid.size(), 0.0)};
  parallel_for(cfg.grid.t_steps, threads, [&](std::size_t ti) {
    const double t = cfg.grid.t_at(ti);
    for (std::size_t xi = 0; xi < cfg.grid.x_steps; ++xi) {
      field.at(ti, xi) = beable_value(cfg, choice, {t, cfg.grid.x_at(xi)});
    }
  });
  return field;
}

ConditionalDistribution rel_conditional(const ToyModelConfig& cfg, const SpacetimePoint& y,
                                        NatureChoice choice) {
  // The late-time configuration seen from y is the part of the branch's outgoing rays lying
  // outside y's future cone; Pr(c | b_i) is 1 when branch i leaves the same trace there as c.
  std::vector<LightRay> all = outgoing_rays(cfg, NatureChoice::cloud1);
  const std::vector<LightRay> second = outgoing_rays(cfg, NatureChoice::cloud2);
  const std::size_t split = all.size();
  all.insert(all.end(), second.begin(), second.end());
  const std::vector<bool> seen = visibility_signature(all, y);
  auto trace_of = [&](NatureChoice b) {
    std::vector<bool> present(all.size(), false);
    const std::size_t lo = b == NatureChoice::cloud1 ? 0 : split;
    const std::size_t hi = b == NatureChoice::cloud1 ? split : all.size();
    for (std::size_t k = lo; k < hi; ++k) present[k] = seen[k];
    return present;
  };
  const std::vector<bool> target = trace_of(choice);
  const double pc1 = trace_of(NatureChoice::cloud1) == target ? 1.0 : 0.0;
  const double pc2 = trace_of(NatureChoice::cloud2) == target ? 1.0 : 0.0;
  const std::vector<double> weights{pc1 * cfg.weight_a(), pc2 * cfg.weight_b()};
  const double total = weights[0] + weights[1];
  if (pc1 == 1.0 && pc2 == 1.0 && std::abs(total - 1.0) <= 1e-12) {
    // Denominator is the norm of the evolved state.
    return ConditionalDistribution{{1.0, 2.0}, weights};
  }
  return conditional_from_weights({1.0, 2.0}, weights);
}

ConditionalDistribution born_reduction_check(const ToyModelConfig& cfg, const SpacetimePoint& y) {
  if (!in_region_of_indeterminacy(cfg, y)) {
    std::ostringstream os;
    os << "born_reduction_check: point (t=" << y.t << ", x=" << y.x
       << ") lies outside the region of indeterminacy";
    throw ContractError(os.str());
  }
  const ConditionalDistribution first = rel_conditional(cfg, y, NatureChoice::cloud1);
  const ConditionalDistribution second = rel_conditional(cfg, y, NatureChoice::cloud2);
  if (first.probabilities != second.probabilities) {
    throw InvariantError("born_reduction_check: final conditions distinguishable inside the region");
  }
  return first;
}

std::vector<RayPath> ray_paths(const ToyModelConfig& cfg) {
  const GridSpec& g = cfg.grid;
  std::vector<double> knots{g.t_min, g.t_max};
  for (double k : {cfg.t1, cfg.t2()}) {
    if (k > g.t_min && k < g.t_max) knots.push_back(k);
  }
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
  std::vector<RayPath> paths;
  for (int branch = 1; branch <= 2; ++branch) {
    for (int photon = 1; photon <= cfg.photons; ++photon) {
      RayPath p{photon, branch, {}};
      for (double t : knots) {
        const auto states = branch_structure(cfg, t);
        p.points.push_back({t, states[static_cast<std::size_t>(branch - 1)]
                                   .photon_positions[static_cast<std::size_t>(photon - 1)]});
      }
      paths.push_back(std::move(p));
    }
  }
  return paths;
}

SliceKind classify_slice(const ToyModelConfig& cfg, std::size_t ti) {
  const double t = cfg.grid.t_at(ti);
  bool any_in = false;
  bool any_out = false;
  for (std::size_t xi = 0; xi < cfg.grid.x_steps; ++xi) {
    const double x = cfg.grid.x_at(xi);
    if (cloud_density(cfg, 1, x) == 0.0 && cloud_density(cfg, 2, x) == 0.0) continue;
    if (in_region_of_indeterminacy(cfg, {t, x})) {
      any_in = true;
    } else {
      any_out = true;
    }
  }
  if (any_in && any_out) return SliceKind::mixed;
  return any_in ? SliceKind::inside : SliceKind::outside;
}

namespace {

/// Integral of the truncated cloud density over (lo, hi).
double cloud_mass_between(const ToyModelConfig& cfg, int cloud, double lo, double hi) {
  const double centre = cloud == 1 ? cfg.x1 : cfg.x2;
  const double sigma = cloud == 1 ? cfg.sigma1 : cfg.sigma2;
  const double a = std::max(lo, centre - kTruncation * sigma);
  const double b = std::min(hi, centre + kTruncation * sigma);
  if (!(b > a)) return 0.0;
  const double za = (a - centre) / (sigma * std::numbers::sqrt2);
  const double zb = (b - centre) / (sigma * std::numbers::sqrt2);
  return 0.5 * (std::erf(zb) - std::erf(za));
}

/// The region's x-interval at time t (possibly empty).
std::pair<double, double> roi_interval(const ToyModelConfig& cfg, double t) {
  const double hi = cfg.t1 + cfg.x1 - t;
  const double lo = cfg.photons == 2 ? t - cfg.t1 + cfg.x2 : -HUGE_VAL;
  return {lo, std::max(lo, hi)};
}

}  // namespace

double slice_mass(const ToyModelConfig& cfg, NatureChoice choice, double t) {
  const auto [lo, hi] = roi_interval(cfg, t);
  const int chosen = choice == NatureChoice::cloud1 ? 1 : 2;
  const double inside = cfg.weight_a() * cloud_mass_between(cfg, 1, lo, hi) +
                        cfg.weight_b() * cloud_mass_between(cfg, 2, lo, hi);
  const double outside = cloud_mass_between(cfg, chosen, -HUGE_VAL, lo) +
                         cloud_mass_between(cfg, chosen, hi, HUGE_VAL);
  return cfg.mass * (inside + outside);
}

std::size_t boundary_crossings(const ToyModelConfig& cfg, double t) {
  const auto [lo, hi] = roi_interval(cfg, t);
  std::size_t n = 0;
  for (double edge : {lo, hi}) {
    if (!std::isfinite(edge) || (edge == lo && lo == hi)) continue;
    for (int cloud : {1, 2}) {
      const double centre = cloud == 1 ? cfg.x1 : cfg.x2;
      const double sigma = cloud == 1 ? cfg.sigma1 : cfg.sigma2;
      if (std::abs(edge - centre) < kTruncation * sigma) ++n;
    }
  }
  return n;
}

}  // namespace ablfield::rel
