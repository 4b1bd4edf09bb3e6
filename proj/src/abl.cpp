#include "ablfield/abl.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/QR>

#include "ablfield/error.hpp"
#include "ablfield/random.hpp"

namespace ablfield {

namespace {

// Tr(A B) = sum_ij A_ij B_ji, accumulated in a fixed order.
Complex trace_of_product(const CMatrix& a, const CMatrix& b) {
  Complex s = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      s += a(i, j) * b(j, i);
    }
  }
  return s;
}

void require_projector(const LinearOperator& p, const Tolerances& tol, const char* what) {
  if (!p.is_projector(tol)) {
    std::ostringstream os;
    os << what << " is not a projector (idempotence residual " << p.idempotence_residual()
       << ")";
    throw ValidationError(os.str());
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// ConditionalDistribution

double ConditionalDistribution::probability_of(double label) const {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == label) {
      return probabilities[i];
    }
  }
  return 0.0;
}

void ConditionalDistribution::validate(const Tolerances& tol) const {
  if (labels.size() != probabilities.size() || labels.empty()) {
    throw ValidationError("ConditionalDistribution: labels and probabilities must match");
  }
  double sum = 0.0;
  for (double p : probabilities) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw InvariantError("ConditionalDistribution: probability outside [0, 1]");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > tol.structural) {
    throw InvariantError("ConditionalDistribution: probabilities do not sum to 1");
  }
}

ConditionalDistribution conditional_from_weights(std::vector<double> labels,
                                                 std::span<const double> weights,
                                                 const Tolerances& tol) {
  if (labels.size() != weights.size()) {
    throw ValidationError("conditional_from_weights: one weight per label required");
  }
  double total = 0.0;
  for (double w : weights) {
    if (w < -tol.scalar) {
      throw InvariantError("conditional_from_weights: negative ABL weight");
    }
    total += std::max(w, 0.0);
  }
  if (!(total >= tol.impossibility_threshold)) {
    std::ostringstream os;
    os << "post-selected outcome has total probability " << total
       << " below the impossibility threshold";
    throw ImpossiblePostSelectionError(os.str());
  }
  ConditionalDistribution d;
  d.labels = std::move(labels);
  d.probabilities.reserve(weights.size());
  for (double w : weights) {
    d.probabilities.push_back(std::max(w, 0.0) / total);
  }
  return d;
}

// ---------------------------------------------------------------------------
// Scenario

void PrePostScenario::validate(const Tolerances& tol) const {
  const std::size_t n = initial.dim();
  if (intermediate.dim() != n || final_projector.dim() != n || hamiltonian.dim() != n) {
    throw ValidationError("PrePostScenario: operand dimensions differ");
  }
  if (!(t_mid >= 0.0 && t_mid <= t_final)) {
    throw ValidationError("PrePostScenario: require 0 <= t_mid <= t_final");
  }
  if (!initial.is_normalized(tol)) {
    throw ValidationError("PrePostScenario: initial state is not normalized");
  }
  require_projector(final_projector, tol, "PrePostScenario: final operator");
  if (!hamiltonian.is_hermitian(tol)) {
    throw ValidationError("PrePostScenario: Hamiltonian is not Hermitian");
  }
}

// ---------------------------------------------------------------------------
// ABL forms

ConditionalDistribution abl_basic(const StateVector& a, std::span<const StateVector> b_basis,
                                  const StateVector& c, const Tolerances& tol) {
  const std::size_t n = a.dim();
  if (c.dim() != n) {
    throw ValidationError("abl_basic: initial and final states differ in dimension");
  }
  if (!a.is_normalized(tol) || !c.is_normalized(tol)) {
    throw ValidationError("abl_basic: initial and final states must be normalized");
  }
  if (b_basis.size() != n) {
    throw ValidationError("abl_basic: intermediate basis must be complete");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (b_basis[i].dim() != n) {
      throw ValidationError("abl_basic: basis vector dimension mismatch");
    }
    for (std::size_t j = 0; j <= i; ++j) {
      const Complex g = b_basis[j].inner(b_basis[i]);
      const double expected = (i == j) ? 1.0 : 0.0;
      if (std::abs(g - expected) > tol.structural) {
        throw ValidationError("abl_basic: intermediate basis is not orthonormal");
      }
    }
  }
  std::vector<double> labels(n);
  std::vector<double> weights(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = static_cast<double>(i);
    weights[i] = std::norm(c.inner(b_basis[i]) * b_basis[i].inner(a));
  }
  return conditional_from_weights(std::move(labels), weights, tol);
}

std::vector<double> abl_trace_weights(const LinearOperator& evolved_initial_projector,
                                      const ProjectorFamily& family,
                                      const LinearOperator& evolved_final_projector) {
  std::vector<double> weights;
  weights.reserve(family.size());
  for (const LinearOperator& p : family.members()) {
    const CMatrix sandwich = p.matrix() * evolved_initial_projector.matrix() * p.matrix();
    weights.push_back(trace_of_product(evolved_final_projector.matrix(), sandwich).real());
  }
  return weights;
}

ConditionalDistribution abl_projective(const LinearOperator& initial_projector,
                                       const ProjectorFamily& family,
                                       const LinearOperator& final_projector,
                                       const Tolerances& tol) {
  if (initial_projector.dim() != family.dim() || final_projector.dim() != family.dim()) {
    throw ValidationError("abl_projective: operand dimensions differ");
  }
  require_projector(initial_projector, tol, "abl_projective: initial operator");
  if (std::abs(initial_projector.trace() - 1.0) > tol.structural) {
    throw ValidationError("abl_projective: initial projector must be rank 1");
  }
  require_projector(final_projector, tol, "abl_projective: final operator");
  const std::vector<double> weights = abl_trace_weights(initial_projector, family, final_projector);
  return conditional_from_weights(family.labels(), weights, tol);
}

ConditionalDistribution abl_evolved(const PrePostScenario& s, const Tolerances& tol) {
  s.validate(tol);
  const Propagator u = Propagator::dense(s.hamiltonian, tol);
  const CMatrix u_mid = u.unitary(s.t_mid).matrix();
  const CMatrix u_rest = u.unitary(s.t_final - s.t_mid).matrix();
  const CVector a_t = u_mid * s.initial.amplitudes();
  const LinearOperator initial_t(a_t * a_t.adjoint());
  const LinearOperator final_back(u_rest.adjoint() * s.final_projector.matrix() * u_rest);
  const std::vector<double> weights = abl_trace_weights(initial_t, s.intermediate, final_back);
  return conditional_from_weights(s.intermediate.labels(), weights, tol);
}

double abl_expectation(const ConditionalDistribution& d) {
  double s = 0.0;
  for (std::size_t i = 0; i < d.labels.size(); ++i) {
    s += d.labels[i] * d.probabilities[i];
  }
  return s;
}

// ---------------------------------------------------------------------------
// Oracle

JointTable::JointTable(std::vector<double> intermediate_labels, std::vector<double> final_labels,
                       std::vector<double> entries, std::size_t post_selected)
    : intermediate_labels_(std::move(intermediate_labels)),
      final_labels_(std::move(final_labels)),
      entries_(std::move(entries)),
      post_selected_(post_selected) {
  if (entries_.size() != intermediate_labels_.size() * final_labels_.size()) {
    throw ValidationError("JointTable: entry count does not match shape");
  }
  if (post_selected_ >= final_labels_.size()) {
    throw ValidationError("JointTable: post-selected column out of range");
  }
}

double JointTable::total() const {
  double s = 0.0;
  for (double e : entries_) {
    s += e;
  }
  return s;
}

std::vector<double> JointTable::intermediate_marginal() const {
  std::vector<double> m(rows(), 0.0);
  for (std::size_t i = 0; i < rows(); ++i) {
    for (std::size_t k = 0; k < cols(); ++k) {
      m[i] += (*this)(i, k);
    }
  }
  return m;
}

ConditionalDistribution JointTable::conditioned_on(std::size_t k, const Tolerances& tol) const {
  if (k >= cols()) {
    throw ValidationError("JointTable::conditioned_on: column out of range");
  }
  std::vector<double> column(rows());
  for (std::size_t i = 0; i < rows(); ++i) {
    column[i] = (*this)(i, k);
  }
  return conditional_from_weights(intermediate_labels_, column, tol);
}

JointTable oracle_joint_distribution(const PrePostScenario& s, const ProjectorFamily& final_family,
                                     const Tolerances& tol) {
  s.validate(tol);
  if (final_family.dim() != s.initial.dim()) {
    throw ValidationError("oracle_joint_distribution: final family dimension mismatch");
  }
  std::size_t post_selected = final_family.size();
  for (std::size_t k = 0; k < final_family.size(); ++k) {
    if (max_norm(final_family.member(k).matrix() - s.final_projector.matrix()) <=
        tol.structural) {
      post_selected = k;
      break;
    }
  }
  if (post_selected == final_family.size()) {
    throw ValidationError("oracle_joint_distribution: final family does not contain P_c");
  }

  const Propagator u = Propagator::dense(s.hamiltonian, tol);
  const StateVector at_mid = u.apply(s.t_mid, s.initial);
  const double remaining = s.t_final - s.t_mid;

  const std::size_t rows = s.intermediate.size();
  const std::size_t cols = final_family.size();
  std::vector<double> entries(rows * cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    const double p_b = born_probability(at_mid, s.intermediate.member(i), tol);
    if (p_b <= tol.collapse_threshold) {
      continue;  // branch never occurs
    }
    const StateVector collapsed = luders_collapse(at_mid, s.intermediate.member(i), tol);
    const StateVector at_final = u.apply(remaining, collapsed);
    for (std::size_t k = 0; k < cols; ++k) {
      entries[i * cols + k] = p_b * born_probability(at_final, final_family.member(k), tol);
    }
  }
  return JointTable(s.intermediate.labels(), final_family.labels(), std::move(entries),
                    post_selected);
}

// ---------------------------------------------------------------------------
// Random scenarios

CMatrix random_unitary(std::mt19937_64& rng, std::size_t dim) {
  const auto n = static_cast<Eigen::Index>(dim);
  CMatrix g(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double re = standard_normal(rng);
      const double im = standard_normal(rng);
      g(i, j) = Complex(re, im);
    }
  }
  Eigen::HouseholderQR<CMatrix> qr(g);
  CMatrix q = qr.householderQ() * CMatrix::Identity(n, n);
  // Fix the column phases with R's diagonal so the draw is Haar distributed.
  const CMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < n; ++j) {
    const double mag = std::abs(r(j, j));
    if (mag > 0.0) {
      q.col(j) *= r(j, j) / mag;
    }
  }
  return q;
}

LinearOperator random_hermitian(std::mt19937_64& rng, std::size_t dim) {
  const auto n = static_cast<Eigen::Index>(dim);
  CMatrix g(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double re = standard_normal(rng);
      const double im = standard_normal(rng);
      g(i, j) = Complex(re, im);
    }
  }
  return LinearOperator(0.5 * (g + g.adjoint()));
}

StateVector random_state(std::mt19937_64& rng, std::size_t dim) {
  CVector v(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double re = standard_normal(rng);
    const double im = standard_normal(rng);
    v(i) = Complex(re, im);
  }
  return StateVector(std::move(v)).normalized();
}

ProjectorFamily random_family(std::mt19937_64& rng, std::size_t dim, bool rank_one) {
  const CMatrix basis = random_unitary(rng, dim);
  const auto n = static_cast<Eigen::Index>(dim);
  std::vector<LinearOperator> members;
  std::vector<double> labels;
  Eigen::Index start = 0;
  while (start < n) {
    Eigen::Index rank = 1;
    if (!rank_one) {
      rank = 1 + static_cast<Eigen::Index>(
                     uniform_index(rng, static_cast<std::uint64_t>(std::min<Eigen::Index>(n - start, 4))));
    }
    const CMatrix cols = basis.middleCols(start, rank);
    members.emplace_back(cols * cols.adjoint());
    labels.push_back(static_cast<double>(members.size() - 1));
    start += rank;
  }
  return ProjectorFamily(std::move(members), std::move(labels));
}

RandomScenario random_scenario(std::mt19937_64& rng, const RandomScenarioOptions& options) {
  if (options.min_dim < 1 || options.max_dim < options.min_dim) {
    throw ValidationError("random_scenario: invalid dimension range");
  }
  for (;;) {
    const std::size_t dim =
        options.min_dim + uniform_index(rng, options.max_dim - options.min_dim + 1);
    LinearOperator h =
        options.zero_hamiltonian ? LinearOperator::zero(dim) : random_hermitian(rng, dim);
    StateVector a = random_state(rng, dim);
    ProjectorFamily intermediate = random_family(rng, dim, options.rank_one_intermediate);
    const bool final_rank_one = uniform01(rng) < 0.5;
    ProjectorFamily final_family =
        options.trivial_post_selection
            ? ProjectorFamily({LinearOperator::identity(dim)}, {0.0})
            : random_family(rng, dim, final_rank_one);
    const std::size_t chosen = uniform_index(rng, final_family.size());
    const double t_mid = options.max_time * uniform01(rng);
    const double t_final = t_mid + options.max_time * uniform01(rng);
    PrePostScenario s{std::move(a),    std::move(intermediate), final_family.member(chosen),
                      std::move(h),    t_mid,                   t_final};
    // Reject post-selections that are nearly impossible; they only measure round-off.
    const Propagator u = Propagator::dense(s.hamiltonian);
    const CVector a_t = u.unitary(s.t_mid).matrix() * s.initial.amplitudes();
    const CMatrix u_rest = u.unitary(s.t_final - s.t_mid).matrix();
    const LinearOperator final_back(u_rest.adjoint() * s.final_projector.matrix() * u_rest);
    const std::vector<double> w =
        abl_trace_weights(LinearOperator(a_t * a_t.adjoint()), s.intermediate, final_back);
    double total = 0.0;
    for (double x : w) {
      total += x;
    }
    if (total > 1e-6) {
      return RandomScenario{std::move(s), std::move(final_family)};
    }
  }
}

}  // namespace ablfield
