#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ablfield/tolerance.hpp"

namespace ablfield {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

/// A vector in a finite-dimensional complex Hilbert space. Not necessarily normalized;
/// operations that need a physical state check normalization themselves.
class StateVector {
 public:
  explicit StateVector(CVector amplitudes);
  StateVector(std::initializer_list<Complex> amplitudes);

  static StateVector basis(std::size_t dim, std::size_t index);

  std::size_t dim() const { return static_cast<std::size_t>(amps_.size()); }
  const CVector& amplitudes() const { return amps_; }
  Complex operator[](std::size_t i) const { return amps_(static_cast<Eigen::Index>(i)); }

  double norm() const;
  bool is_normalized(const Tolerances& tol = default_tolerances()) const;
  StateVector normalized() const;

  /// <this|other>
  Complex inner(const StateVector& other) const;

 private:
  CVector amps_;
};

/// A dense dim x dim complex matrix.
class LinearOperator {
 public:
  explicit LinearOperator(CMatrix entries);

  static LinearOperator identity(std::size_t dim);
  static LinearOperator zero(std::size_t dim);
  /// |psi><psi|
  static LinearOperator projector_onto(const StateVector& psi);
  static LinearOperator diagonal(std::span<const double> diag);

  std::size_t dim() const { return static_cast<std::size_t>(m_.rows()); }
  const CMatrix& matrix() const { return m_; }
  Complex operator()(std::size_t i, std::size_t j) const {
    return m_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }

  LinearOperator adjoint() const { return LinearOperator(m_.adjoint()); }
  StateVector apply(const StateVector& psi) const;
  Complex trace() const;

  double hermiticity_residual() const;
  double unitarity_residual() const;
  double idempotence_residual() const;

  bool is_hermitian(const Tolerances& tol = default_tolerances()) const;
  bool is_unitary(const Tolerances& tol = default_tolerances()) const;
  bool is_projector(const Tolerances& tol = default_tolerances()) const;

  friend LinearOperator operator*(const LinearOperator& a, const LinearOperator& b);
  friend LinearOperator operator+(const LinearOperator& a, const LinearOperator& b);
  friend LinearOperator operator-(const LinearOperator& a, const LinearOperator& b);
  friend LinearOperator operator*(Complex s, const LinearOperator& a);

 private:
  CMatrix m_;
};

/// max_ij |A_ij|
double max_norm(const CMatrix& m);
/// max_ij |[A, B]_ij|
double commutator_norm(const LinearOperator& a, const LinearOperator& b);

/// Complete family of mutually orthogonal projectors, each tagged with a real outcome label.
class ProjectorFamily {
 public:
  ProjectorFamily(std::vector<LinearOperator> members, std::vector<double> labels,
                  const Tolerances& tol = default_tolerances());

  /// Rank-1 projectors onto an orthonormal basis, labelled 0, 1, 2, ...
  static ProjectorFamily from_basis(std::span<const StateVector> basis,
                                    const Tolerances& tol = default_tolerances());

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return members_.size(); }
  const LinearOperator& member(std::size_t i) const { return members_.at(i); }
  double label(std::size_t i) const { return labels_.at(i); }
  const std::vector<LinearOperator>& members() const { return members_; }
  const std::vector<double>& labels() const { return labels_; }

 private:
  std::size_t dim_;
  std::vector<LinearOperator> members_;
  std::vector<double> labels_;
};

StateVector tensor_product(const StateVector& a, const StateVector& b,
                           const Tolerances& tol = default_tolerances());
LinearOperator tensor_product(const LinearOperator& a, const LinearOperator& b,
                              const Tolerances& tol = default_tolerances());

/// Unitary evolution e^{-iHt} (hbar = 1). Dense Hamiltonians are diagonalized once; separable
/// Hamiltonians H = sum_k I x .. x h_k x .. x I are propagated factor by factor without ever
/// forming the full matrix.
class Propagator {
 public:
  static Propagator dense(const LinearOperator& hamiltonian,
                          const Tolerances& tol = default_tolerances());
  static Propagator separable(std::span<const LinearOperator> factor_hamiltonians,
                              const Tolerances& tol = default_tolerances());

  std::size_t dim() const { return dim_; }
  bool is_separable() const { return factors_.size() > 1; }

  CVector apply(double t, const CVector& psi) const;
  StateVector apply(double t, const StateVector& psi) const;
  /// Dense e^{-iHt}; refused above the dense operator cap.
  LinearOperator unitary(double t) const;

 private:
  struct Factor {
    CMatrix eigenvectors;
    Eigen::VectorXd eigenvalues;
  };
  Propagator() = default;
  static Factor diagonalize(const LinearOperator& h, const Tolerances& tol);
  static CMatrix factor_unitary(const Factor& f, double t);

  std::size_t dim_ = 0;
  std::size_t dense_cap_ = 0;
  std::vector<Factor> factors_;
};

/// e^{-iHt}|psi>
StateVector evolve(const LinearOperator& hamiltonian, double t, const StateVector& psi,
                   const Tolerances& tol = default_tolerances());

/// <psi|P|psi>
double born_probability(const StateVector& psi, const LinearOperator& projector,
                        const Tolerances& tol = default_tolerances());

/// N P|psi>, normalized.
StateVector luders_collapse(const StateVector& psi, const LinearOperator& projector,
                            const Tolerances& tol = default_tolerances());

}  // namespace ablfield
