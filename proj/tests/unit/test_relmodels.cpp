#include <cmath>
#include <random>

#include "ablfield/error.hpp"
#include "ablfield/random.hpp"
#include "ablfield/relmodels.hpp"
#include "doctest.h"

using namespace ablfield;
using namespace ablfield::rel;

namespace {

ToyModelConfig toy(int photons, double pa = 0.5) {
  ToyModelConfig cfg;
  cfg.x1 = -1.0;
  cfg.x2 = 1.0;
  cfg.sigma1 = 0.05;
  cfg.sigma2 = 0.05;
  cfg.amp_a = Complex(std::sqrt(pa), 0.0);
  cfg.amp_b = Complex(0.0, std::sqrt(1.0 - pa));
  cfg.mass = 2.0;
  cfg.t1 = 1.0;
  cfg.photons = photons;
  cfg.grid = GridSpec{-2.0, 4.0, 121, -2.0, 2.0, 801};
  cfg.validate();
  return cfg;
}

bool near_boundary(const ToyModelConfig& cfg, double t, double x) {
  const bool left = std::abs((t + x) - (cfg.t1 + cfg.x1)) < 1e-9;
  const bool right = cfg.photons == 2 && std::abs((t - x) - (cfg.t1 - cfg.x2)) < 1e-9;
  return left || right;
}

bool close(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(std::abs(a), 1e-300); }

}  // namespace

TEST_CASE("config validation") {
  ToyModelConfig cfg = toy(1);
  cfg.amp_a = Complex(std::sqrt(0.4), 0.0);
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = toy(1);
  cfg.sigma1 = 0.5;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = toy(1);
  cfg.photons = 3;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = toy(1);
  cfg.x2 = cfg.x1;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  CHECK(toy(2).t2() == 3.0);
}

TEST_CASE("branch structure, one photon") {
  const ToyModelConfig cfg = toy(1);
  auto b = branch_structure(cfg, cfg.t1);
  CHECK(b[0].photon_positions[0] == cfg.x1);
  CHECK(b[1].photon_positions[0] == cfg.x1);
  b = branch_structure(cfg, cfg.t2());
  CHECK(b[0].photon_positions[0] == 2.0 * cfg.x1 - cfg.x2);
  CHECK(b[1].photon_positions[0] == cfg.x2);
  b = branch_structure(cfg, 0.0);
  CHECK(b[0].photon_positions[0] == cfg.x1 - 1.0);
  CHECK(b[0].amplitude == cfg.amp_a);
  CHECK(b[1].amplitude == cfg.amp_b);
  b = branch_structure(cfg, 2.0);
  CHECK(b[0].photon_positions[0] == -2.0);
  CHECK(b[1].photon_positions[0] == 0.0);
}

TEST_CASE("branch structure, two photons") {
  const ToyModelConfig cfg = toy(2);
  const double t = 5.0;
  const auto b = branch_structure(cfg, t);
  CHECK(b[0].photon_positions[0] == cfg.x1 - (t - cfg.t1));
  CHECK(b[0].photon_positions[1] == cfg.x1 + (t - cfg.t2()));
  CHECK(b[1].photon_positions[0] == cfg.x2 - (t - cfg.t2()));
  CHECK(b[1].photon_positions[1] == cfg.x2 + (t - cfg.t1));
  const auto mid = branch_structure(cfg, 2.0);
  CHECK(mid[0].photon_positions == std::vector<double>{-2.0, 0.0});
  CHECK(mid[1].photon_positions == std::vector<double>{0.0, 2.0});
  const auto pre = branch_structure(cfg, 0.0);
  CHECK(pre[0].photon_positions == std::vector<double>{-2.0, 2.0});
}

TEST_CASE("ray visibility") {
  const LightRay left{{1.0, -1.0}, Direction::left};
  CHECK(ray_visible_outside_cone(left, {1.0, 1.0}));
  CHECK_FALSE(ray_visible_outside_cone(left, {1.0 - 2.0 - 1e-9, 1.0}));
  CHECK_FALSE(ray_visible_outside_cone(left, {0.0, -1.0}));
  const LightRay right{{1.0, 1.0}, Direction::right};
  CHECK(ray_visible_outside_cone(right, {1.0, -1.0}));
  CHECK_FALSE(ray_visible_outside_cone(right, {0.5, 1.0}));
  CHECK(left.x_at(3.0) == -3.0);
  CHECK(right.x_at(3.0) == 3.0);
}

TEST_CASE("region of indeterminacy") {
  const ToyModelConfig c1 = toy(1);
  const double dx = c1.delta_x();
  const double eps = 1e-9;
  CHECK_FALSE(in_region_of_indeterminacy(c1, {c1.t1, c1.x1}));
  CHECK(in_region_of_indeterminacy(c1, {c1.t1 - dx - eps, c1.x2}));
  CHECK_FALSE(in_region_of_indeterminacy(c1, {c1.t1 - dx + eps, c1.x2}));
  const ToyModelConfig c2 = toy(2);
  CHECK_FALSE(in_region_of_indeterminacy(c2, {c2.t1 - dx + eps, c2.x1}));
  CHECK_FALSE(in_region_of_indeterminacy(c2, {c2.t1 - dx + eps, c2.x2}));
  CHECK(in_region_of_indeterminacy(c2, {c2.t1 - dx / 2.0 - eps, 0.5 * (c2.x1 + c2.x2)}));
  CHECK_FALSE(in_region_of_indeterminacy(c2, {c2.t1 - dx / 2.0, 0.5 * (c2.x1 + c2.x2)}));
}

TEST_CASE("closed-form region equals ray-visibility conjunction") {
  std::mt19937_64 rng(17);
  for (int photons : {1, 2}) {
    const ToyModelConfig cfg = toy(photons);
    for (int k = 0; k < 200000; ++k) {
      // Quantized coordinates so boundary points are hit often.
      const double t = -2.0 + 0.0625 * static_cast<double>(uniform_index(rng, 97));
      const double x = -3.0 + 0.0625 * static_cast<double>(uniform_index(rng, 97));
      REQUIRE(in_region_of_indeterminacy(cfg, {t, x}) == roi_by_visibility(cfg, {t, x}));
    }
  }
}

TEST_CASE("collapse times") {
  const ToyModelConfig c1 = toy(1);
  CHECK(collapse_time_at(c1, c1.x1) == c1.t1);
  CHECK(collapse_time_at(c1, c1.x2) == c1.t1 - c1.delta_x());
  const ToyModelConfig c2 = toy(2);
  CHECK(collapse_time_at(c2, c2.x1) == c2.t1 - c2.delta_x());
  CHECK(collapse_time_at(c2, c2.x2) == c2.t1 - c2.delta_x());
}

TEST_CASE("monotone resolution") {
  std::mt19937_64 rng(23);
  for (int photons : {1, 2}) {
    const ToyModelConfig cfg = toy(photons);
    for (int k = 0; k < 20000; ++k) {
      const SpacetimePoint y{-3.0 + 6.0 * uniform01(rng), -3.0 + 6.0 * uniform01(rng)};
      if (in_region_of_indeterminacy(cfg, y)) continue;
      const double dt = 2.0 * uniform01(rng);
      const double dx = dt * (2.0 * uniform01(rng) - 1.0);
      CHECK_FALSE(in_region_of_indeterminacy(cfg, {y.t + dt, y.x + dx}));
    }
  }
}

TEST_CASE("beable field dichotomy and budgets") {
  for (int photons : {1, 2}) {
    const ToyModelConfig cfg = toy(photons, 0.3);
    const BeableField f = beable_field(cfg, NatureChoice::cloud1, 2);
    for (std::size_t ti = 0; ti < cfg.grid.t_steps; ++ti) {
      const double t = cfg.grid.t_at(ti);
      for (std::size_t xi = 0; xi < cfg.grid.x_steps; ++xi) {
        const double x = cfg.grid.x_at(xi);
        const double inside = cfg.mass * (cfg.weight_a() * cloud_density(cfg, 1, x) +
                                          cfg.weight_b() * cloud_density(cfg, 2, x));
        const double outside = cfg.mass * cloud_density(cfg, 1, x);
        const double v = f.at(ti, xi);
        CHECK((close(v, inside) || close(v, outside)));
        const ConditionalDistribution d = rel_conditional(cfg, {t, x}, NatureChoice::cloud1);
        const double labelled = d.probabilities[0] * cfg.mass * cloud_density(cfg, 1, x) +
                                d.probabilities[1] * cfg.mass * cloud_density(cfg, 2, x);
        CHECK(std::abs(labelled - v) <= 1e-12 * std::max(1.0, v));
      }
      const double integral = f.slice_integral(ti);
      const double eps = 1e-6 * cfg.mass;
      switch (classify_slice(cfg, ti)) {
        case SliceKind::inside:
        case SliceKind::outside:
          CHECK(std::abs(integral - cfg.mass) <= eps);
          break;
        case SliceKind::mixed: {
          const std::size_t cuts = boundary_crossings(cfg, t);
          const double exact = slice_mass(cfg, NatureChoice::cloud1, t);
          CHECK(exact >= 0.3 * cfg.mass - eps);
          CHECK(exact <= cfg.mass + eps);
          const double peak = 1.0 / (cfg.sigma1 * std::sqrt(2.0 * 3.141592653589793));
          CHECK(std::abs(integral - exact) <=
                static_cast<double>(cuts) * cfg.mass * peak * cfg.grid.dx() + eps);
          break;
        }
      }
      if (boundary_crossings(cfg, t) == 0) {
        CHECK(std::abs(integral - slice_mass(cfg, NatureChoice::cloud1, t)) <= eps);
      }
    }
  }
}

TEST_CASE("one-photon Cloud2 mixed slices carry (1 + |a|^2) M") {
  const ToyModelConfig cfg = toy(1, 0.3);
  const BeableField f = beable_field(cfg, NatureChoice::cloud2);
  bool seen = false;
  for (std::size_t ti = 0; ti < cfg.grid.t_steps; ++ti) {
    const double t = cfg.grid.t_at(ti);
    // Cloud 1 still undecided while cloud 2 has resolved.
    if (t > cfg.t1 - cfg.delta_x() + 0.5 && t < cfg.t1 - 0.5) {
      seen = true;
      CHECK(std::abs(f.slice_integral(ti) - 1.3 * cfg.mass) <= 1e-6 * cfg.mass);
      CHECK(std::abs(slice_mass(cfg, NatureChoice::cloud2, t) - 1.3 * cfg.mass) <= 1e-12);
    }
  }
  CHECK(seen);
}

TEST_CASE("Born reduction inside the region") {
  for (double pa : {0.1, 0.3, 0.5, 0.9, 1.0}) {
    const ToyModelConfig cfg = toy(2, pa);
    const ConditionalDistribution d = born_reduction_check(cfg, {-1.5, 0.0});
    CHECK(d.probabilities[0] == cfg.weight_a());
    CHECK(d.probabilities[1] == cfg.weight_b());
    const ConditionalDistribution e = born_reduction_check(cfg, {-2.0, 0.3});
    CHECK(d.probabilities == e.probabilities);
  }
  const ToyModelConfig cfg = toy(1);
  CHECK_THROWS_AS(born_reduction_check(cfg, {cfg.t1, cfg.x1}), ContractError);
}

TEST_CASE("resolved points give the chosen branch") {
  const ToyModelConfig cfg = toy(2, 0.3);
  const ConditionalDistribution d1 = rel_conditional(cfg, {3.0, 0.0}, NatureChoice::cloud1);
  CHECK(d1.probabilities == std::vector<double>{1.0, 0.0});
  const ConditionalDistribution d2 = rel_conditional(cfg, {3.0, 0.0}, NatureChoice::cloud2);
  CHECK(d2.probabilities == std::vector<double>{0.0, 1.0});
}

TEST_CASE("translation covariance") {
  for (int photons : {1, 2}) {
    const ToyModelConfig cfg = toy(photons);
    ToyModelConfig moved = cfg;
    const double dt = 0.5;
    const double dx = 0.25;
    moved.t1 += dt;
    moved.x1 += dx;
    moved.x2 += dx;
    moved.grid.t_min += dt;
    moved.grid.t_max += dt;
    moved.grid.x_min += dx;
    moved.grid.x_max += dx;
    const BeableField a = beable_field(cfg, NatureChoice::cloud1);
    const BeableField b = beable_field(moved, NatureChoice::cloud1);
    for (std::size_t i = 0; i < a.values.size(); ++i) {
      const double t = cfg.grid.t_at(i / cfg.grid.x_steps);
      const double x = cfg.grid.x_at(i % cfg.grid.x_steps);
      if (near_boundary(cfg, t, x)) continue;
      REQUIRE(std::abs(a.values[i] - b.values[i]) <= 1e-9 * std::max(1.0, a.values[i]));
    }
  }
}

TEST_CASE("two-photon mirror symmetry") {
  ToyModelConfig cfg = toy(2, 0.3);
  ToyModelConfig mirror = cfg;
  std::swap(mirror.amp_a, mirror.amp_b);
  const BeableField a = beable_field(cfg, NatureChoice::cloud1);
  const BeableField b = beable_field(mirror, NatureChoice::cloud2);
  const std::size_t n = cfg.grid.x_steps;
  for (std::size_t ti = 0; ti < cfg.grid.t_steps; ++ti) {
    for (std::size_t xi = 0; xi < n; ++xi) {
      if (near_boundary(cfg, cfg.grid.t_at(ti), cfg.grid.x_at(xi))) continue;
      CHECK(std::abs(a.at(ti, xi) - b.at(ti, n - 1 - xi)) <= 1e-12 * std::max(1.0, a.at(ti, xi)));
    }
  }
}

TEST_CASE("sampler") {
  const ToyModelConfig sure = toy(1, 1.0);
  for (std::uint64_t s = 0; s < 50; ++s) CHECK(sample_nature_choice(sure, s) == NatureChoice::cloud1);
  const ToyModelConfig half = toy(1, 0.5);
  const auto draws = sample_nature_choices(half, 99, 100000);
  CHECK(draws == sample_nature_choices(half, 99, 100000));
  CHECK(draws.front() == sample_nature_choice(half, 99));
  double ones = 0.0;
  for (auto c : draws) ones += c == NatureChoice::cloud1 ? 1.0 : 0.0;
  CHECK(std::abs(ones / 1e5 - 0.5) <= 3.0 * std::sqrt(0.25 / 1e5));
}

TEST_CASE("ray paths follow the branch structure") {
  const ToyModelConfig cfg = toy(2);
  const auto paths = ray_paths(cfg);
  CHECK(paths.size() == 4);
  for (const RayPath& p : paths) {
    for (const SpacetimePoint& q : p.points) {
      const auto b = branch_structure(cfg, q.t);
      CHECK(q.x == b[static_cast<std::size_t>(p.branch - 1)].photon_positions[static_cast<std::size_t>(p.photon - 1)]);
    }
  }
}
