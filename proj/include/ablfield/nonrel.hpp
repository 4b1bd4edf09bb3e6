#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ablfield/abl.hpp"
#include "ablfield/field.hpp"
#include "ablfield/hilbert.hpp"

namespace ablfield::nonrel {

enum class Statistics { distinguishable, boson, fermion };
enum class ParticleClass { B, F };

/// Which particles a mass measurement or post-selection refers to.
enum class Scope { class_b, class_f, whole_system };

Scope scope_of(ParticleClass c);
/// The other class; whole_system has no complement.
Scope complement(Scope s);

struct ParticleSpec {
  double mass = 1.0;
  Statistics statistics = Statistics::distinguishable;
  ParticleClass particle_class = ParticleClass::B;
};

/// N particles on an L-site 1D lattice. Configuration index = sum_k x_k L^(N-1-k), so particle 0
/// is the most significant tensor factor.
class LatticeModel {
 public:
  LatticeModel(std::size_t sites, double spacing, std::vector<ParticleSpec> particles,
               const LinearOperator& hamiltonian, StateVector initial, double t_final,
               const Tolerances& tol = default_tolerances());
  LatticeModel(std::size_t sites, double spacing, std::vector<ParticleSpec> particles,
               Propagator propagator, StateVector initial, double t_final,
               const Tolerances& tol = default_tolerances());

  std::size_t sites() const { return sites_; }
  double spacing() const { return spacing_; }
  const std::vector<ParticleSpec>& particles() const { return particles_; }
  std::size_t particle_count() const { return particles_.size(); }
  std::size_t dim() const { return dim_; }
  const StateVector& initial() const { return initial_; }
  double t_final() const { return t_final_; }
  const Propagator& propagator() const { return propagator_; }
  /// Present when the model was built from an explicit matrix.
  const std::optional<LinearOperator>& hamiltonian() const { return hamiltonian_; }
  const Tolerances& tolerances() const { return tol_; }

  std::size_t site_of(std::size_t config, std::size_t particle) const;
  std::size_t config_index(std::span<const std::size_t> positions) const;
  /// Particle labels in the scope, ascending.
  std::vector<std::size_t> members(Scope scope) const;
  double scope_mass(Scope scope) const;

  StateVector state_at(double t) const;

  /// Largest deviation of the state from (anti)symmetry under swaps of identical labels.
  double exchange_residual(const StateVector& psi) const;

 private:
  void validate();

  std::size_t sites_;
  double spacing_;
  std::vector<ParticleSpec> particles_;
  std::size_t dim_ = 1;
  Propagator propagator_;
  std::optional<LinearOperator> hamiltonian_;
  StateVector initial_;
  double t_final_;
  Tolerances tol_;
};

// ---------------------------------------------------------------------------
// Model construction helpers

std::size_t lattice_dimension(std::size_t sites, std::size_t particles,
                              const Tolerances& tol = default_tolerances());

/// Single-particle nearest-neighbour hopping -J sum_x (|x><x+1| + h.c.).
LinearOperator hopping_hamiltonian(std::size_t sites, double hopping, bool periodic);

/// Hopping for every particle plus an on-site contact energy for each (B, F) pair sharing a site.
LinearOperator hopping_contact_hamiltonian(std::size_t sites, std::span<const ParticleSpec> particles,
                                           double hopping, double contact, bool periodic,
                                           const Tolerances& tol = default_tolerances());

/// Identical non-interacting hopping on every particle, propagated factor by factor.
Propagator separable_hopping(std::size_t sites, std::size_t particles, double hopping,
                             bool periodic, const Tolerances& tol = default_tolerances());

/// Position eigenstate with particle k on site positions[k].
StateVector product_state(std::size_t sites, std::span<const std::size_t> positions,
                          const Tolerances& tol = default_tolerances());

/// Projects onto the exchange-symmetric (bosons) / antisymmetric (fermions) subspace and
/// renormalizes. Throws ValidationError if nothing survives (e.g. two fermions on one site).
StateVector symmetrize(std::size_t sites, std::span<const ParticleSpec> particles,
                       const StateVector& psi);

// ---------------------------------------------------------------------------
// Projectors

/// I x .. x |x><x| (slot i) x .. x I. Refused for a label whose species has other identical
/// members; use species_position_projector for those.
LinearOperator position_projector(const LatticeModel& model, std::size_t particle,
                                  std::size_t site);
/// sum over all labels of the species of P_i^x.
LinearOperator species_position_projector(const LatticeModel& model, Statistics species,
                                          std::size_t site);

/// Sorted distinct masses of the particles in scope.
std::vector<double> mass_spectrum(const LatticeModel& model, Scope scope);

/// Projector onto configurations in which exactly one in-scope particle sits at `site` and it
/// has mass `mass`.
LinearOperator mass_projector_at(const LatticeModel& model, Scope scope, double mass,
                                 std::size_t site);
/// sum_x mass_projector_at(mass, x).
LinearOperator mass_projector_anywhere(const LatticeModel& model, Scope scope, double mass);

/// {mass projectors at `site`} completed by the "no single in-scope particle here" projector,
/// which carries label 0.
ProjectorFamily intermediate_family(const LatticeModel& model, Scope scope, std::size_t site);

/// Particle-resolved family: one member per in-scope particle j ("j alone at site", labelled
/// m_j) plus the label-0 complement. Only meaningful for distinguishable labels.
ProjectorFamily particle_family(const LatticeModel& model, Scope scope, std::size_t site);

/// Combined-mass projector for two particles: configurations whose total mass at `site` is
/// `mass` (m1, m2 or m1 + m2).
LinearOperator combined_mass_projector_at(const LatticeModel& model, double mass,
                                          std::size_t site);

/// A position-basis post-selection on the late-time configuration.
class FinalCondition {
 public:
  /// Scope members (ascending label) on `positions`; identical particles may appear in any
  /// order among their own positions. An empty scope gives the identity.
  static FinalCondition for_scope(const LatticeModel& model, Scope scope,
                                  std::vector<std::size_t> positions);
  /// Occupied sites only, blind to which particle sits where.
  static FinalCondition occupation(const LatticeModel& model, std::vector<std::size_t> positions);

  const std::vector<char>& mask() const { return mask_; }
  const std::vector<std::size_t>& positions() const { return positions_; }
  LinearOperator projector(const Tolerances& tol = default_tolerances()) const;

 private:
  std::vector<char> mask_;
  std::vector<std::size_t> positions_;
};

LinearOperator final_boundary_projector(const LatticeModel& model, Scope scope,
                                        std::vector<std::size_t> positions);

/// Born-weighted draw of the late-time positions of the scope members (ascending label).
std::vector<std::size_t> sample_final_configuration(const LatticeModel& model, Scope scope,
                                                    std::uint64_t seed);

// ---------------------------------------------------------------------------
// Fields

/// sum_{i in scope} m_i <psi(t)| P_i^x |psi(t)>
double class_mass_density(const LatticeModel& model, Scope scope, std::size_t site, double t);

/// Sites on x, `t_steps` times spanning [0, T].
GridSpec lattice_grid(const LatticeModel& model, std::size_t t_steps);

BeableField born_mass_field(const LatticeModel& model, Scope scope, std::size_t t_steps,
                            unsigned threads = 1);

/// ABL distribution over the masses of `scope` at (site, t) given the initial state and the
/// final condition, using the intermediate_family at that site.
ConditionalDistribution abl_mass_distribution(const LatticeModel& model, Scope scope,
                                              const FinalCondition& final_condition,
                                              std::size_t site, double t);

/// <rho_J(x; t)> over the lattice grid.
BeableField abl_mass_field(const LatticeModel& model, Scope scope,
                           const FinalCondition& final_condition, std::size_t t_steps,
                           unsigned threads = 1);

// ---------------------------------------------------------------------------
// Flat-field catastrophe

/// Distinguishable particles with the given masses on a ring, all hopping identically, started
/// in a label-symmetric superposition of delocalized packets. Together with an occupation
/// final condition every particle-resolved ABL weight coincides.
LatticeModel engineered_catastrophe_model(std::span<const double> masses, std::size_t sites,
                                          double hopping, double t_final,
                                          const Tolerances& tol = default_tolerances());

struct CatastropheResult {
  /// Sites on x; times k T / t_steps for k < t_steps.
  GridSpec grid;
  /// Distributions over the distinct masses (given that some particle sits at x), row-major.
  std::vector<ConditionalDistribution> distributions;
  /// Largest relative spread of the particle-resolved ABL weights over the grid.
  double max_weight_spread = 0.0;
};

/// Particle-resolved ABL weights at every grid point, aggregated by mass. Throws ContractError
/// when the weights of different particles disagree beyond `spread_tolerance` (relative).
CatastropheResult catastrophe_demo(const LatticeModel& model, const FinalCondition& final_condition,
                                   std::size_t t_steps, unsigned threads = 1,
                                   double spread_tolerance = 1e-9);

}  // namespace ablfield::nonrel
