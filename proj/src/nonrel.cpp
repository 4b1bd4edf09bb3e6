#include "ablfield/nonrel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "ablfield/error.hpp"
#include "ablfield/parallel.hpp"
#include "ablfield/random.hpp"

namespace ablfield::nonrel {

namespace {

using Mask = std::vector<char>;

bool same_mass(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); }

std::vector<std::size_t> decode(std::size_t config, std::size_t sites, std::size_t n) {
  std::vector<std::size_t> pos(n);
  for (std::size_t k = n; k-- > 0;) {
    pos[k] = config % sites;
    config /= sites;
  }
  return pos;
}

std::size_t encode(std::span<const std::size_t> pos, std::size_t sites) {
  std::size_t idx = 0;
  for (std::size_t p : pos) {
    idx = idx * sites + p;
  }
  return idx;
}

double masked_norm2(const CVector& v, const Mask& mask) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (mask[static_cast<std::size_t>(i)]) {
      s += std::norm(v(i));
    }
  }
  return s;
}

CVector apply_mask(const CVector& v, const Mask& mask) {
  CVector out = v;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (!mask[static_cast<std::size_t>(i)]) {
      out(i) = 0.0;
    }
  }
  return out;
}

LinearOperator mask_operator(const Mask& mask, const Tolerances& tol) {
  if (mask.size() > tol.dense_operator_cap) {
    throw CapacityError("dense projector exceeds the dense operator cap");
  }
  std::vector<double> diag(mask.begin(), mask.end());
  return LinearOperator::diagonal(diag);
}

void require_site(const LatticeModel& model, std::size_t site) {
  if (site >= model.sites()) {
    std::ostringstream os;
    os << "site " << site << " outside lattice of " << model.sites() << " sites";
    throw ValidationError(os.str());
  }
}

void require_time(const LatticeModel& model, double t) {
  if (!(t >= 0.0 && t <= model.t_final())) {
    throw ValidationError("time outside [0, T]");
  }
}

/// Groups of labels that are exchangeable among themselves: all bosons, all fermions, and each
/// distinguishable particle on its own.
std::vector<std::vector<std::size_t>> species_groups(std::span<const ParticleSpec> particles,
                                                     std::span<const std::size_t> labels) {
  std::vector<std::vector<std::size_t>> groups;
  std::vector<std::size_t> bosons;
  std::vector<std::size_t> fermions;
  for (std::size_t i : labels) {
    switch (particles[i].statistics) {
      case Statistics::boson:
        bosons.push_back(i);
        break;
      case Statistics::fermion:
        fermions.push_back(i);
        break;
      case Statistics::distinguishable:
        groups.push_back({i});
        break;
    }
  }
  if (!bosons.empty()) groups.push_back(bosons);
  if (!fermions.empty()) groups.push_back(fermions);
  return groups;
}

/// Applies sum_pi sign(pi) psi(pi c) over permutations of `group`.
CVector symmetrize_group(const CVector& psi, std::size_t sites, std::size_t n,
                         const std::vector<std::size_t>& group, bool antisymmetric) {
  std::vector<std::size_t> perm(group.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  CVector out = CVector::Zero(psi.size());
  do {
    int inversions = 0;
    for (std::size_t a = 0; a < perm.size(); ++a) {
      for (std::size_t b = a + 1; b < perm.size(); ++b) {
        if (perm[a] > perm[b]) ++inversions;
      }
    }
    const double sign = (antisymmetric && inversions % 2 == 1) ? -1.0 : 1.0;
    for (std::size_t c = 0; c < static_cast<std::size_t>(psi.size()); ++c) {
      std::vector<std::size_t> pos = decode(c, sites, n);
      std::vector<std::size_t> moved = pos;
      for (std::size_t k = 0; k < group.size(); ++k) {
        moved[group[k]] = pos[group[perm[k]]];
      }
      out(static_cast<Eigen::Index>(encode(moved, sites))) += sign * psi(static_cast<Eigen::Index>(c));
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

/// Mass-outcome masks at a site, complement last (label 0).
std::vector<std::pair<double, Mask>> mass_masks(const LatticeModel& model, Scope scope,
                                                std::size_t site) {
  const std::vector<std::size_t> scoped = model.members(scope);
  const std::vector<double> spectrum = mass_spectrum(model, scope);
  std::vector<std::pair<double, Mask>> out;
  for (double m : spectrum) {
    out.emplace_back(m, Mask(model.dim(), 0));
  }
  Mask complement(model.dim(), 0);
  for (std::size_t c = 0; c < model.dim(); ++c) {
    std::size_t count = 0;
    std::size_t who = 0;
    for (std::size_t i : scoped) {
      if (model.site_of(c, i) == site) {
        ++count;
        who = i;
      }
    }
    if (count != 1) {
      complement[c] = 1;
      continue;
    }
    for (auto& [m, mask] : out) {
      if (same_mass(model.particles()[who].mass, m)) {
        mask[c] = 1;
        break;
      }
    }
  }
  out.emplace_back(0.0, std::move(complement));
  return out;
}

/// Particle-resolved masks ("j alone at site"), complement last.
std::vector<std::pair<std::size_t, Mask>> particle_masks(const LatticeModel& model, Scope scope,
                                                         std::size_t site) {
  const std::vector<std::size_t> scoped = model.members(scope);
  std::vector<std::pair<std::size_t, Mask>> out;
  for (std::size_t i : scoped) {
    out.emplace_back(i, Mask(model.dim(), 0));
  }
  Mask complement(model.dim(), 0);
  for (std::size_t c = 0; c < model.dim(); ++c) {
    std::size_t count = 0;
    std::size_t slot = 0;
    for (std::size_t k = 0; k < scoped.size(); ++k) {
      if (model.site_of(c, scoped[k]) == site) {
        ++count;
        slot = k;
      }
    }
    if (count == 1) {
      out[slot].second[c] = 1;
    } else {
      complement[c] = 1;
    }
  }
  out.emplace_back(scoped.size(), std::move(complement));
  return out;
}

void require_distinguishable(const LatticeModel& model, Scope scope, const char* what) {
  for (std::size_t i : model.members(scope)) {
    const Statistics s = model.particles()[i].statistics;
    if (s == Statistics::distinguishable) continue;
    std::size_t same = 0;
    for (const ParticleSpec& p : model.particles()) {
      if (p.statistics == s) ++same;
    }
    if (same > 1) {
      throw ValidationError(std::string(what) + ": particle-resolved outcomes need distinguishable labels");
    }
  }
}

}  // namespace

Scope scope_of(ParticleClass c) { return c == ParticleClass::B ? Scope::class_b : Scope::class_f; }

Scope complement(Scope s) {
  switch (s) {
    case Scope::class_b:
      return Scope::class_f;
    case Scope::class_f:
      return Scope::class_b;
    case Scope::whole_system:
      break;
  }
  throw ValidationError("the whole system has no complementary class");
}

// ---------------------------------------------------------------------------
// LatticeModel

std::size_t lattice_dimension(std::size_t sites, std::size_t particles, const Tolerances& tol) {
  if (sites == 0 || particles == 0) {
    throw ValidationError("lattice model needs at least one site and one particle");
  }
  std::size_t dim = 1;
  for (std::size_t k = 0; k < particles; ++k) {
    if (dim > tol.dimension_cap / sites) {
      std::ostringstream os;
      os << "lattice dimension " << sites << "^" << particles << " exceeds cap "
         << tol.dimension_cap;
      throw CapacityError(os.str());
    }
    dim *= sites;
  }
  return dim;
}

LatticeModel::LatticeModel(std::size_t sites, double spacing, std::vector<ParticleSpec> particles,
                           const LinearOperator& hamiltonian, StateVector initial, double t_final,
                           const Tolerances& tol)
    : LatticeModel(sites, spacing, std::move(particles), Propagator::dense(hamiltonian, tol),
                   std::move(initial), t_final, tol) {
  hamiltonian_ = hamiltonian;
}

LatticeModel::LatticeModel(std::size_t sites, double spacing, std::vector<ParticleSpec> particles,
                           Propagator propagator, StateVector initial, double t_final,
                           const Tolerances& tol)
    : sites_(sites),
      spacing_(spacing),
      particles_(std::move(particles)),
      propagator_(std::move(propagator)),
      initial_(std::move(initial)),
      t_final_(t_final),
      tol_(tol) {
  validate();
}

void LatticeModel::validate() {
  if (!(spacing_ > 0.0) || !std::isfinite(spacing_)) {
    throw ValidationError("lattice spacing must be positive");
  }
  dim_ = lattice_dimension(sites_, particles_.size(), tol_);
  std::optional<double> boson_mass;
  std::optional<double> fermion_mass;
  for (std::size_t i = 0; i < particles_.size(); ++i) {
    const ParticleSpec& p = particles_[i];
    if (!(p.mass > 0.0) || !std::isfinite(p.mass)) {
      std::ostringstream os;
      os << "particles[" << i << "].mass must be positive";
      throw ValidationError(os.str());
    }
    std::optional<double>* shared = p.statistics == Statistics::boson    ? &boson_mass
                                    : p.statistics == Statistics::fermion ? &fermion_mass
                                                                          : nullptr;
    if (shared != nullptr) {
      if (shared->has_value() && !same_mass(**shared, p.mass)) {
        throw ValidationError("all bosons must share one mass, and all fermions one mass");
      }
      *shared = p.mass;
    }
    if (p.statistics == Statistics::boson && p.particle_class != ParticleClass::B) {
      throw ValidationError("bosons belong to class B");
    }
    if (p.statistics == Statistics::fermion && p.particle_class != ParticleClass::F) {
      throw ValidationError("fermions belong to class F");
    }
  }
  if (propagator_.dim() != dim_) {
    throw ValidationError("Hamiltonian dimension does not match the lattice");
  }
  if (initial_.dim() != dim_) {
    throw ValidationError("initial state dimension does not match the lattice");
  }
  if (!initial_.is_normalized(tol_)) {
    throw ValidationError("initial state is not normalized");
  }
  if (!(t_final_ >= 0.0) || !std::isfinite(t_final_)) {
    throw ValidationError("t_final must be a non-negative finite time");
  }
  const double residual = exchange_residual(initial_);
  if (residual > tol_.structural) {
    std::ostringstream os;
    os << "initial state violates exchange statistics (residual " << residual << ")";
    throw ValidationError(os.str());
  }
}

std::size_t LatticeModel::site_of(std::size_t config, std::size_t particle) const {
  std::size_t stride = 1;
  for (std::size_t k = particles_.size() - 1; k > particle; --k) {
    stride *= sites_;
  }
  return (config / stride) % sites_;
}

std::size_t LatticeModel::config_index(std::span<const std::size_t> positions) const {
  if (positions.size() != particles_.size()) {
    throw ValidationError("config_index: one position per particle required");
  }
  for (std::size_t p : positions) {
    if (p >= sites_) throw ValidationError("config_index: site out of range");
  }
  return encode(positions, sites_);
}

std::vector<std::size_t> LatticeModel::members(Scope scope) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < particles_.size(); ++i) {
    const bool in = scope == Scope::whole_system ||
                    (scope == Scope::class_b && particles_[i].particle_class == ParticleClass::B) ||
                    (scope == Scope::class_f && particles_[i].particle_class == ParticleClass::F);
    if (in) out.push_back(i);
  }
  return out;
}

double LatticeModel::scope_mass(Scope scope) const {
  double m = 0.0;
  for (std::size_t i : members(scope)) {
    m += particles_[i].mass;
  }
  return m;
}

StateVector LatticeModel::state_at(double t) const { return propagator_.apply(t, initial_); }

double LatticeModel::exchange_residual(const StateVector& psi) const {
  double worst = 0.0;
  const std::size_t n = particles_.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const Statistics s = particles_[i].statistics;
      if (s == Statistics::distinguishable || s != particles_[j].statistics) continue;
      const double sign = s == Statistics::fermion ? -1.0 : 1.0;
      for (std::size_t c = 0; c < dim_; ++c) {
        std::vector<std::size_t> pos = decode(c, sites_, n);
        std::swap(pos[i], pos[j]);
        const std::size_t swapped = encode(pos, sites_);
        worst = std::max(worst, std::abs(psi[swapped] - sign * psi[c]));
      }
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Construction helpers

LinearOperator hopping_hamiltonian(std::size_t sites, double hopping, bool periodic) {
  if (sites == 0) throw ValidationError("hopping_hamiltonian: need at least one site");
  const auto n = static_cast<Eigen::Index>(sites);
  CMatrix h = CMatrix::Zero(n, n);
  for (Eigen::Index x = 0; x + 1 < n; ++x) {
    h(x, x + 1) -= hopping;
    h(x + 1, x) -= hopping;
  }
  if (periodic && n > 2) {
    h(0, n - 1) -= hopping;
    h(n - 1, 0) -= hopping;
  }
  return LinearOperator(std::move(h));
}

LinearOperator hopping_contact_hamiltonian(std::size_t sites, std::span<const ParticleSpec> particles,
                                           double hopping, double contact, bool periodic,
                                           const Tolerances& tol) {
  const std::size_t n = particles.size();
  const std::size_t dim = lattice_dimension(sites, n, tol);
  if (dim > tol.dense_operator_cap) {
    throw CapacityError("hopping_contact_hamiltonian: dense Hamiltonian exceeds cap");
  }
  const auto d = static_cast<Eigen::Index>(dim);
  CMatrix h = CMatrix::Zero(d, d);
  for (std::size_t c = 0; c < dim; ++c) {
    const std::vector<std::size_t> pos = decode(c, sites, n);
    for (std::size_t k = 0; k < n; ++k) {
      std::vector<std::size_t> neighbours;
      if (pos[k] + 1 < sites) neighbours.push_back(pos[k] + 1);
      else if (periodic && sites > 2) neighbours.push_back(0);
      if (pos[k] > 0) neighbours.push_back(pos[k] - 1);
      else if (periodic && sites > 2) neighbours.push_back(sites - 1);
      for (std::size_t y : neighbours) {
        std::vector<std::size_t> moved = pos;
        moved[k] = y;
        h(static_cast<Eigen::Index>(encode(moved, sites)), static_cast<Eigen::Index>(c)) -= hopping;
      }
    }
    double diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (particles[i].particle_class == ParticleClass::B &&
            particles[j].particle_class == ParticleClass::F && pos[i] == pos[j]) {
          diag += contact;
        }
      }
    }
    h(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c)) += diag;
  }
  return LinearOperator(std::move(h));
}

Propagator separable_hopping(std::size_t sites, std::size_t particles, double hopping,
                             bool periodic, const Tolerances& tol) {
  lattice_dimension(sites, particles, tol);
  std::vector<LinearOperator> factors(particles, hopping_hamiltonian(sites, hopping, periodic));
  return Propagator::separable(factors, tol);
}

StateVector product_state(std::size_t sites, std::span<const std::size_t> positions,
                          const Tolerances& tol) {
  const std::size_t dim = lattice_dimension(sites, positions.size(), tol);
  for (std::size_t p : positions) {
    if (p >= sites) throw ValidationError("product_state: site out of range");
  }
  return StateVector::basis(dim, encode(positions, sites));
}

StateVector symmetrize(std::size_t sites, std::span<const ParticleSpec> particles,
                       const StateVector& psi) {
  const std::size_t n = particles.size();
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  CVector out = psi.amplitudes();
  for (const std::vector<std::size_t>& g : species_groups(particles, all)) {
    if (g.size() < 2) continue;
    const bool fermionic = particles[g.front()].statistics == Statistics::fermion;
    out = symmetrize_group(out, sites, n, g, fermionic);
  }
  const double norm = out.norm();
  if (norm < 1e-12) {
    throw ValidationError("symmetrize: state vanishes under exchange (anti)symmetrization");
  }
  return StateVector(out / norm);
}

// ---------------------------------------------------------------------------
// Projectors

LinearOperator position_projector(const LatticeModel& model, std::size_t particle,
                                  std::size_t site) {
  if (particle >= model.particle_count()) {
    throw ValidationError("position_projector: particle index out of range");
  }
  require_site(model, site);
  const Statistics s = model.particles()[particle].statistics;
  if (s != Statistics::distinguishable) {
    const auto same = std::count_if(model.particles().begin(), model.particles().end(),
                                    [s](const ParticleSpec& p) { return p.statistics == s; });
    if (same > 1) {
      throw ValidationError(
          "position_projector: label of an indistinguishable particle; use "
          "species_position_projector");
    }
  }
  Mask mask(model.dim(), 0);
  for (std::size_t c = 0; c < model.dim(); ++c) {
    mask[c] = model.site_of(c, particle) == site;
  }
  return mask_operator(mask, model.tolerances());
}

LinearOperator species_position_projector(const LatticeModel& model, Statistics species,
                                          std::size_t site) {
  require_site(model, site);
  if (model.dim() > model.tolerances().dense_operator_cap) {
    throw CapacityError("species_position_projector: dense operator exceeds cap");
  }
  std::vector<double> diag(model.dim(), 0.0);
  for (std::size_t c = 0; c < model.dim(); ++c) {
    for (std::size_t i = 0; i < model.particle_count(); ++i) {
      if (model.particles()[i].statistics == species && model.site_of(c, i) == site) {
        diag[c] += 1.0;
      }
    }
  }
  return LinearOperator::diagonal(diag);
}

std::vector<double> mass_spectrum(const LatticeModel& model, Scope scope) {
  std::vector<double> masses;
  for (std::size_t i : model.members(scope)) {
    masses.push_back(model.particles()[i].mass);
  }
  std::sort(masses.begin(), masses.end());
  masses.erase(std::unique(masses.begin(), masses.end(), same_mass), masses.end());
  return masses;
}

LinearOperator mass_projector_at(const LatticeModel& model, Scope scope, double mass,
                                 std::size_t site) {
  require_site(model, site);
  for (auto& [m, mask] : mass_masks(model, scope, site)) {
    if (m > 0.0 && same_mass(m, mass)) {
      return mask_operator(mask, model.tolerances());
    }
  }
  std::ostringstream os;
  os << "mass " << mass << " is not in the mass spectrum of the chosen scope";
  throw ValidationError(os.str());
}

LinearOperator mass_projector_anywhere(const LatticeModel& model, Scope scope, double mass) {
  LinearOperator sum = mass_projector_at(model, scope, mass, 0);
  for (std::size_t x = 1; x < model.sites(); ++x) {
    sum = sum + mass_projector_at(model, scope, mass, x);
  }
  return sum;
}

ProjectorFamily intermediate_family(const LatticeModel& model, Scope scope, std::size_t site) {
  require_site(model, site);
  std::vector<LinearOperator> members;
  std::vector<double> labels;
  for (auto& [m, mask] : mass_masks(model, scope, site)) {
    members.push_back(mask_operator(mask, model.tolerances()));
    labels.push_back(m);
  }
  return ProjectorFamily(std::move(members), std::move(labels), model.tolerances());
}

ProjectorFamily particle_family(const LatticeModel& model, Scope scope, std::size_t site) {
  require_site(model, site);
  require_distinguishable(model, scope, "particle_family");
  std::vector<LinearOperator> members;
  std::vector<double> labels;
  for (auto& [who, mask] : particle_masks(model, scope, site)) {
    members.push_back(mask_operator(mask, model.tolerances()));
    labels.push_back(who < model.particle_count() ? model.particles()[who].mass : 0.0);
  }
  return ProjectorFamily(std::move(members), std::move(labels), model.tolerances());
}

LinearOperator combined_mass_projector_at(const LatticeModel& model, double mass,
                                          std::size_t site) {
  if (model.particle_count() != 2) {
    throw ValidationError("combined_mass_projector_at: defined for two-particle models only");
  }
  require_site(model, site);
  Mask mask(model.dim(), 0);
  bool attainable = false;
  for (std::size_t c = 0; c < model.dim(); ++c) {
    double here = 0.0;
    for (std::size_t i = 0; i < 2; ++i) {
      if (model.site_of(c, i) == site) here += model.particles()[i].mass;
    }
    if (here > 0.0 && same_mass(here, mass)) {
      mask[c] = 1;
      attainable = true;
    }
  }
  if (!attainable) {
    throw ValidationError("combined_mass_projector_at: mass is not a combined mass of the pair");
  }
  return mask_operator(mask, model.tolerances());
}

FinalCondition FinalCondition::for_scope(const LatticeModel& model, Scope scope,
                                         std::vector<std::size_t> positions) {
  const std::vector<std::size_t> scoped = model.members(scope);
  if (positions.size() != scoped.size()) {
    std::ostringstream os;
    os << "final condition: expected " << scoped.size() << " positions, got "
       << positions.size();
    throw ValidationError(os.str());
  }
  for (std::size_t p : positions) require_site(model, p);
  // Requested multiset of sites per exchange group.
  const auto groups = species_groups(model.particles(), scoped);
  std::vector<std::vector<std::size_t>> wanted;
  for (const auto& g : groups) {
    std::vector<std::size_t> sites;
    for (std::size_t label : g) {
      const auto slot = std::find(scoped.begin(), scoped.end(), label) - scoped.begin();
      sites.push_back(positions[static_cast<std::size_t>(slot)]);
    }
    std::sort(sites.begin(), sites.end());
    wanted.push_back(std::move(sites));
  }
  FinalCondition fc;
  fc.positions_ = std::move(positions);
  fc.mask_.assign(model.dim(), 0);
  for (std::size_t c = 0; c < model.dim(); ++c) {
    bool match = true;
    for (std::size_t gi = 0; gi < groups.size() && match; ++gi) {
      std::vector<std::size_t> sites;
      for (std::size_t label : groups[gi]) sites.push_back(model.site_of(c, label));
      std::sort(sites.begin(), sites.end());
      match = sites == wanted[gi];
    }
    fc.mask_[c] = match;
  }
  return fc;
}

FinalCondition FinalCondition::occupation(const LatticeModel& model,
                                          std::vector<std::size_t> positions) {
  if (positions.size() != model.particle_count()) {
    throw ValidationError("occupation final condition: one position per particle required");
  }
  for (std::size_t p : positions) require_site(model, p);
  std::vector<std::size_t> wanted = positions;
  std::sort(wanted.begin(), wanted.end());
  FinalCondition fc;
  fc.positions_ = std::move(positions);
  fc.mask_.assign(model.dim(), 0);
  for (std::size_t c = 0; c < model.dim(); ++c) {
    std::vector<std::size_t> sites = decode(c, model.sites(), model.particle_count());
    std::sort(sites.begin(), sites.end());
    fc.mask_[c] = sites == wanted;
  }
  return fc;
}

LinearOperator FinalCondition::projector(const Tolerances& tol) const {
  return mask_operator(mask_, tol);
}

LinearOperator final_boundary_projector(const LatticeModel& model, Scope scope,
                                        std::vector<std::size_t> positions) {
  return FinalCondition::for_scope(model, scope, std::move(positions)).projector(model.tolerances());
}

std::vector<std::size_t> sample_final_configuration(const LatticeModel& model, Scope scope,
                                                    std::uint64_t seed) {
  const StateVector late = model.state_at(model.t_final());
  std::mt19937_64 rng(seed);
  const double u = uniform01(rng);
  double cumulative = 0.0;
  std::size_t chosen = model.dim() - 1;
  for (std::size_t c = 0; c < model.dim(); ++c) {
    cumulative += std::norm(late[c]);
    if (u < cumulative) {
      chosen = c;
      break;
    }
  }
  // Round-off can leave the tail short of u; fall back to the last configuration with weight.
  while (std::norm(late[chosen]) == 0.0 && chosen > 0) --chosen;
  std::vector<std::size_t> out;
  for (std::size_t i : model.members(scope)) out.push_back(model.site_of(chosen, i));
  return out;
}

// ---------------------------------------------------------------------------
// Fields

double class_mass_density(const LatticeModel& model, Scope scope, std::size_t site, double t) {
  require_site(model, site);
  require_time(model, t);
  const StateVector psi = model.state_at(t);
  const std::vector<std::size_t> scoped = model.members(scope);
  double rho = 0.0;
  for (std::size_t i : scoped) {
    double p = 0.0;
    for (std::size_t c = 0; c < model.dim(); ++c) {
      if (model.site_of(c, i) == site) p += std::norm(psi[c]);
    }
    rho += model.particles()[i].mass * p;
  }
  return rho;
}

GridSpec lattice_grid(const LatticeModel& model, std::size_t t_steps) {
  GridSpec g;
  g.t_min = 0.0;
  g.t_max = model.t_final();
  g.t_steps = t_steps;
  g.x_min = 0.0;
  g.x_max = static_cast<double>(model.sites() - 1) * model.spacing();
  g.x_steps = model.sites();
  g.validate();
  return g;
}

BeableField born_mass_field(const LatticeModel& model, Scope scope, std::size_t t_steps,
                            unsigned threads) {
  BeableField field{lattice_grid(model, t_steps), {}};
  field.values.assign(field.grid.size(), 0.0);
  const std::vector<std::size_t> scoped = model.members(scope);
  parallel_for(field.grid.t_steps, threads, [&](std::size_t ti) {
    const StateVector psi = model.state_at(field.grid.t_at(ti));
    for (std::size_t c = 0; c < model.dim(); ++c) {
      const double p = std::norm(psi[c]);
      for (std::size_t i : scoped) {
        field.at(ti, model.site_of(c, i)) += model.particles()[i].mass * p;
      }
    }
  });
  return field;
}

namespace {

ConditionalDistribution distribution_from_evolved(
    const LatticeModel& model, const std::vector<std::pair<double, Mask>>& outcomes,
    const FinalCondition& final_condition, const CVector& at_t, double t) {
  std::vector<double> labels;
  std::vector<double> weights;
  const double remaining = model.t_final() - t;
  for (const auto& [m, mask] : outcomes) {
    const CVector late = model.propagator().apply(remaining, apply_mask(at_t, mask));
    labels.push_back(m);
    weights.push_back(masked_norm2(late, final_condition.mask()));
  }
  return conditional_from_weights(std::move(labels), weights, model.tolerances());
}

}  // namespace

ConditionalDistribution abl_mass_distribution(const LatticeModel& model, Scope scope,
                                              const FinalCondition& final_condition,
                                              std::size_t site, double t) {
  require_site(model, site);
  require_time(model, t);
  if (final_condition.mask().size() != model.dim()) {
    throw ValidationError("final condition built for a different model");
  }
  const CVector at_t = model.propagator().apply(t, model.initial().amplitudes());
  return distribution_from_evolved(model, mass_masks(model, scope, site), final_condition, at_t, t);
}

BeableField abl_mass_field(const LatticeModel& model, Scope scope,
                           const FinalCondition& final_condition, std::size_t t_steps,
                           unsigned threads) {
  if (final_condition.mask().size() != model.dim()) {
    throw ValidationError("final condition built for a different model");
  }
  BeableField field{lattice_grid(model, t_steps), {}};
  field.values.assign(field.grid.size(), 0.0);
  std::vector<std::vector<std::pair<double, Mask>>> outcomes;
  for (std::size_t x = 0; x < model.sites(); ++x) {
    outcomes.push_back(mass_masks(model, scope, x));
  }
  const double ceiling = model.scope_mass(scope);
  parallel_for(field.grid.t_steps, threads, [&](std::size_t ti) {
    const double t = field.grid.t_at(ti);
    const CVector at_t = model.propagator().apply(t, model.initial().amplitudes());
    for (std::size_t x = 0; x < model.sites(); ++x) {
      const double rho =
          abl_expectation(distribution_from_evolved(model, outcomes[x], final_condition, at_t, t));
      if (rho < -model.tolerances().scalar || rho > ceiling * (1.0 + model.tolerances().structural)) {
        throw InvariantError("abl_mass_field: value outside [0, total class mass]");
      }
      field.at(ti, x) = rho;
    }
  });
  return field;
}

// ---------------------------------------------------------------------------
// Catastrophe

LatticeModel engineered_catastrophe_model(std::span<const double> masses, std::size_t sites,
                                          double hopping, double t_final, const Tolerances& tol) {
  const std::size_t n = masses.size();
  if (n == 0) throw ValidationError("engineered_catastrophe_model: need at least one particle");
  std::vector<ParticleSpec> particles;
  for (double m : masses) {
    particles.push_back(ParticleSpec{m, Statistics::distinguishable, ParticleClass::B});
  }
  const std::size_t dim = lattice_dimension(sites, n, tol);

  // Broad packets spread round the ring with distinct momenta.
  const double width = std::max(1.0, static_cast<double>(sites) / 6.0);
  std::vector<CVector> packets;
  for (std::size_t k = 0; k < n; ++k) {
    const double centre = static_cast<double>(k * sites) / static_cast<double>(n);
    const double momentum = 2.0 * std::numbers::pi * static_cast<double>(k + 1) /
                            static_cast<double>(sites);
    CVector phi(static_cast<Eigen::Index>(sites));
    for (std::size_t x = 0; x < sites; ++x) {
      double d = std::abs(static_cast<double>(x) - centre);
      d = std::min(d, static_cast<double>(sites) - d);
      phi(static_cast<Eigen::Index>(x)) =
          std::polar(std::exp(-d * d / (2.0 * width * width)), momentum * static_cast<double>(x));
    }
    packets.push_back(phi / phi.norm());
  }

  // Label-symmetric superposition: sum over assignments of packets to particles.
  CVector psi = CVector::Zero(static_cast<Eigen::Index>(dim));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  do {
    for (std::size_t c = 0; c < dim; ++c) {
      const std::vector<std::size_t> pos = decode(c, sites, n);
      Complex amp = 1.0;
      for (std::size_t k = 0; k < n; ++k) {
        amp *= packets[perm[k]](static_cast<Eigen::Index>(pos[k]));
      }
      psi(static_cast<Eigen::Index>(c)) += amp;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  psi /= psi.norm();

  return LatticeModel(sites, 1.0, std::move(particles),
                      separable_hopping(sites, n, hopping, true, tol), StateVector(std::move(psi)),
                      t_final, tol);
}

CatastropheResult catastrophe_demo(const LatticeModel& model, const FinalCondition& final_condition,
                                   std::size_t t_steps, unsigned threads, double spread_tolerance) {
  require_distinguishable(model, Scope::whole_system, "catastrophe_demo");
  if (final_condition.mask().size() != model.dim()) {
    throw ValidationError("final condition built for a different model");
  }
  CatastropheResult result;
  result.grid = lattice_grid(model, t_steps);
  // At t = T the conditional is undefined on sites the final configuration leaves empty.
  result.grid.t_max = model.t_final() * static_cast<double>(t_steps - 1) / static_cast<double>(t_steps);
  result.distributions.resize(result.grid.size());
  const std::vector<double> spectrum = mass_spectrum(model, Scope::whole_system);
  std::vector<double> spreads(result.grid.size(), 0.0);

  std::vector<std::vector<std::pair<std::size_t, Mask>>> outcomes;
  for (std::size_t x = 0; x < model.sites(); ++x) {
    auto masks = particle_masks(model, Scope::whole_system, x);
    masks.pop_back();  // only "a particle is here" outcomes enter the mass distribution
    outcomes.push_back(std::move(masks));
  }

  parallel_for(result.grid.t_steps, threads, [&](std::size_t ti) {
    const double t = result.grid.t_at(ti);
    const CVector at_t = model.propagator().apply(t, model.initial().amplitudes());
    const double remaining = model.t_final() - t;
    for (std::size_t x = 0; x < model.sites(); ++x) {
      std::vector<double> labels;
      std::vector<double> weights;
      for (const auto& [who, mask] : outcomes[x]) {
        const CVector late = model.propagator().apply(remaining, apply_mask(at_t, mask));
        labels.push_back(model.particles()[who].mass);
        weights.push_back(masked_norm2(late, final_condition.mask()));
      }
      const auto [lo, hi] = std::minmax_element(weights.begin(), weights.end());
      double mean = 0.0;
      for (double w : weights) mean += w;
      mean /= static_cast<double>(weights.size());
      const double spread = mean > 0.0 ? (*hi - *lo) / mean : 0.0;
      spreads[ti * model.sites() + x] = spread;

      const ConditionalDistribution per_particle =
          conditional_from_weights(std::move(labels), weights, model.tolerances());
      ConditionalDistribution by_mass;
      by_mass.labels = spectrum;
      by_mass.probabilities.assign(spectrum.size(), 0.0);
      for (std::size_t j = 0; j < per_particle.size(); ++j) {
        for (std::size_t s = 0; s < spectrum.size(); ++s) {
          if (same_mass(per_particle.labels[j], spectrum[s])) {
            by_mass.probabilities[s] += per_particle.probabilities[j];
            break;
          }
        }
      }
      result.distributions[ti * model.sites() + x] = std::move(by_mass);
    }
  });

  result.max_weight_spread = *std::max_element(spreads.begin(), spreads.end());
  if (result.max_weight_spread > spread_tolerance) {
    std::ostringstream os;
    os << "catastrophe_demo: particle-resolved ABL weights differ (relative spread "
       << result.max_weight_spread << "); the final condition is correlated with particle identity";
    throw ContractError(os.str());
  }
  return result;
}

}  // namespace ablfield::nonrel
