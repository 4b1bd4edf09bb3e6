#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "ablfield/hilbert.hpp"

namespace ablfield {

/// Probabilities of the intermediate outcomes given both boundary conditions.
struct ConditionalDistribution {
  std::vector<double> labels;
  std::vector<double> probabilities;

  std::size_t size() const { return labels.size(); }
  /// Probability attached to the first outcome whose label equals `label`, 0 if absent.
  double probability_of(double label) const;
  void validate(const Tolerances& tol = default_tolerances()) const;
};

/// Normalizes non-negative ABL weights Pr(c|b_i) Pr(b_i|a) into Pr(b_i|c,a).
/// Throws ImpossiblePostSelectionError when the total is below the impossibility threshold.
ConditionalDistribution conditional_from_weights(std::vector<double> labels,
                                                 std::span<const double> weights,
                                                 const Tolerances& tol = default_tolerances());

/// Initial state, one intermediate measurement, one post-selected final outcome.
struct PrePostScenario {
  StateVector initial;
  ProjectorFamily intermediate;
  LinearOperator final_projector;
  LinearOperator hamiltonian;
  double t_mid = 0.0;
  double t_final = 0.0;

  void validate(const Tolerances& tol = default_tolerances()) const;
};

/// Rank-1, zero-Hamiltonian form: weights |<c|b_i><b_i|a>|^2.
ConditionalDistribution abl_basic(const StateVector& a, std::span<const StateVector> b_basis,
                                  const StateVector& c,
                                  const Tolerances& tol = default_tolerances());

/// Projector form, valid for degenerate outcomes: weights Tr(P_c P_i P_a P_i).
ConditionalDistribution abl_projective(const LinearOperator& initial_projector,
                                       const ProjectorFamily& family,
                                       const LinearOperator& final_projector,
                                       const Tolerances& tol = default_tolerances());

/// Time-evolved projector form: weights Tr(U_{T-t}^† P_c U_{T-t} P_i U_t P_a U_t^† P_i).
ConditionalDistribution abl_evolved(const PrePostScenario& s,
                                    const Tolerances& tol = default_tolerances());

/// ABL weights Tr(P_c P_i P_a P_i) for each family member, already evolved operators.
std::vector<double> abl_trace_weights(const LinearOperator& evolved_initial_projector,
                                      const ProjectorFamily& family,
                                      const LinearOperator& evolved_final_projector);

/// Exact joint distribution Pr(b_i, c_k | a) of the literal measurement sequence.
class JointTable {
 public:
  JointTable(std::vector<double> intermediate_labels, std::vector<double> final_labels,
             std::vector<double> entries, std::size_t post_selected);

  std::size_t rows() const { return intermediate_labels_.size(); }
  std::size_t cols() const { return final_labels_.size(); }
  double operator()(std::size_t i, std::size_t k) const { return entries_[i * cols() + k]; }
  std::size_t post_selected_index() const { return post_selected_; }
  const std::vector<double>& intermediate_labels() const { return intermediate_labels_; }
  const std::vector<double>& final_labels() const { return final_labels_; }

  double total() const;
  /// sum_k Pr(b_i, c_k | a)
  std::vector<double> intermediate_marginal() const;
  /// Pr(b_i | c_k, a)
  ConditionalDistribution conditioned_on(std::size_t k,
                                         const Tolerances& tol = default_tolerances()) const;
  ConditionalDistribution conditioned(const Tolerances& tol = default_tolerances()) const {
    return conditioned_on(post_selected_, tol);
  }

 private:
  std::vector<double> intermediate_labels_;
  std::vector<double> final_labels_;
  std::vector<double> entries_;
  std::size_t post_selected_;
};

/// Evolve to t, Born rule plus Lüders collapse for every intermediate outcome, evolve to T,
/// Born rule for every final outcome. `final_family` must contain the scenario's P_c.
JointTable oracle_joint_distribution(const PrePostScenario& s, const ProjectorFamily& final_family,
                                     const Tolerances& tol = default_tolerances());

/// sum_i label_i Pr_i
double abl_expectation(const ConditionalDistribution& d);

// ---------------------------------------------------------------------------
// Random scenarios for oracle sweeps.

struct RandomScenario {
  PrePostScenario scenario;
  ProjectorFamily final_family;
};

struct RandomScenarioOptions {
  std::size_t min_dim = 2;
  std::size_t max_dim = 16;
  double max_time = 3.0;
  bool zero_hamiltonian = false;
  bool rank_one_intermediate = false;
  bool trivial_post_selection = false;
};

CMatrix random_unitary(std::mt19937_64& rng, std::size_t dim);
LinearOperator random_hermitian(std::mt19937_64& rng, std::size_t dim);
StateVector random_state(std::mt19937_64& rng, std::size_t dim);
/// Random complete family built by grouping the columns of a random unitary; rank-1 members
/// when `rank_one` is set, otherwise random degeneracies.
ProjectorFamily random_family(std::mt19937_64& rng, std::size_t dim, bool rank_one);

/// Draws until the post-selection has positive probability.
RandomScenario random_scenario(std::mt19937_64& rng, const RandomScenarioOptions& options = {});

}  // namespace ablfield
