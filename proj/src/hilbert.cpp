#include "ablfield/hilbert.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "ablfield/error.hpp"

namespace ablfield {

namespace {

void require_dim(std::size_t dim, const char* what) {
  if (dim == 0) {
    throw ValidationError(std::string(what) + ": dimension must be at least 1");
  }
}

void require_same_dim(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    std::ostringstream os;
    os << what << ": dimension mismatch (" << a << " vs " << b << ")";
    throw ValidationError(os.str());
  }
}

void check_dense_cap(std::size_t dim, const Tolerances& tol, const char* what) {
  if (dim > tol.dense_operator_cap) {
    std::ostringstream os;
    os << what << ": dense operator of dimension " << dim << " exceeds cap "
       << tol.dense_operator_cap;
    throw CapacityError(os.str());
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// StateVector

StateVector::StateVector(CVector amplitudes) : amps_(std::move(amplitudes)) {
  require_dim(dim(), "StateVector");
}

StateVector::StateVector(std::initializer_list<Complex> amplitudes)
    : amps_(static_cast<Eigen::Index>(amplitudes.size())) {
  Eigen::Index i = 0;
  for (const Complex& a : amplitudes) {
    amps_(i++) = a;
  }
  require_dim(dim(), "StateVector");
}

StateVector StateVector::basis(std::size_t dim, std::size_t index) {
  require_dim(dim, "StateVector::basis");
  if (index >= dim) {
    throw ValidationError("StateVector::basis: index out of range");
  }
  CVector v = CVector::Zero(static_cast<Eigen::Index>(dim));
  v(static_cast<Eigen::Index>(index)) = 1.0;
  return StateVector(std::move(v));
}

double StateVector::norm() const {
  double s = 0.0;
  for (Eigen::Index i = 0; i < amps_.size(); ++i) {
    s += std::norm(amps_(i));
  }
  return std::sqrt(s);
}

bool StateVector::is_normalized(const Tolerances& tol) const {
  double s = 0.0;
  for (Eigen::Index i = 0; i < amps_.size(); ++i) {
    s += std::norm(amps_(i));
  }
  return std::abs(s - 1.0) <= tol.scalar;
}

StateVector StateVector::normalized() const {
  const double n = norm();
  if (n == 0.0) {
    throw ValidationError("StateVector::normalized: zero vector");
  }
  return StateVector(amps_ / n);
}

Complex StateVector::inner(const StateVector& other) const {
  require_same_dim(dim(), other.dim(), "StateVector::inner");
  Complex s = 0.0;
  for (Eigen::Index i = 0; i < amps_.size(); ++i) {
    s += std::conj(amps_(i)) * other.amps_(i);
  }
  return s;
}

// ---------------------------------------------------------------------------
// LinearOperator

LinearOperator::LinearOperator(CMatrix entries) : m_(std::move(entries)) {
  if (m_.rows() != m_.cols()) {
    throw ValidationError("LinearOperator: matrix must be square");
  }
  require_dim(dim(), "LinearOperator");
}

LinearOperator LinearOperator::identity(std::size_t dim) {
  require_dim(dim, "LinearOperator::identity");
  const auto n = static_cast<Eigen::Index>(dim);
  return LinearOperator(CMatrix::Identity(n, n));
}

LinearOperator LinearOperator::zero(std::size_t dim) {
  require_dim(dim, "LinearOperator::zero");
  const auto n = static_cast<Eigen::Index>(dim);
  return LinearOperator(CMatrix::Zero(n, n));
}

LinearOperator LinearOperator::projector_onto(const StateVector& psi) {
  const CVector& v = psi.amplitudes();
  return LinearOperator(v * v.adjoint());
}

LinearOperator LinearOperator::diagonal(std::span<const double> diag) {
  require_dim(diag.size(), "LinearOperator::diagonal");
  const auto n = static_cast<Eigen::Index>(diag.size());
  CMatrix m = CMatrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    m(i, i) = diag[static_cast<std::size_t>(i)];
  }
  return LinearOperator(std::move(m));
}

StateVector LinearOperator::apply(const StateVector& psi) const {
  require_same_dim(dim(), psi.dim(), "LinearOperator::apply");
  return StateVector(m_ * psi.amplitudes());
}

Complex LinearOperator::trace() const {
  Complex s = 0.0;
  for (Eigen::Index i = 0; i < m_.rows(); ++i) {
    s += m_(i, i);
  }
  return s;
}

double max_norm(const CMatrix& m) {
  double worst = 0.0;
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      worst = std::max(worst, std::abs(m(i, j)));
    }
  }
  return worst;
}

double LinearOperator::hermiticity_residual() const { return max_norm(m_ - m_.adjoint()); }

double LinearOperator::unitarity_residual() const {
  const auto n = m_.rows();
  return max_norm(m_ * m_.adjoint() - CMatrix::Identity(n, n));
}

double LinearOperator::idempotence_residual() const { return max_norm(m_ * m_ - m_); }

bool LinearOperator::is_hermitian(const Tolerances& tol) const {
  return hermiticity_residual() <= tol.scalar;
}

bool LinearOperator::is_unitary(const Tolerances& tol) const {
  return unitarity_residual() <= tol.structural;
}

bool LinearOperator::is_projector(const Tolerances& tol) const {
  // Orthogonal projectors only; hermiticity is checked at the structural level since
  // projectors built from products of floating-point matrices accumulate round-off.
  return idempotence_residual() <= tol.structural && hermiticity_residual() <= tol.structural;
}

LinearOperator operator*(const LinearOperator& a, const LinearOperator& b) {
  require_same_dim(a.dim(), b.dim(), "LinearOperator::operator*");
  return LinearOperator(a.m_ * b.m_);
}

LinearOperator operator+(const LinearOperator& a, const LinearOperator& b) {
  require_same_dim(a.dim(), b.dim(), "LinearOperator::operator+");
  return LinearOperator(a.m_ + b.m_);
}

LinearOperator operator-(const LinearOperator& a, const LinearOperator& b) {
  require_same_dim(a.dim(), b.dim(), "LinearOperator::operator-");
  return LinearOperator(a.m_ - b.m_);
}

LinearOperator operator*(Complex s, const LinearOperator& a) { return LinearOperator(s * a.m_); }

double commutator_norm(const LinearOperator& a, const LinearOperator& b) {
  require_same_dim(a.dim(), b.dim(), "commutator_norm");
  return max_norm(a.matrix() * b.matrix() - b.matrix() * a.matrix());
}

// ---------------------------------------------------------------------------
// ProjectorFamily

ProjectorFamily::ProjectorFamily(std::vector<LinearOperator> members, std::vector<double> labels,
                                 const Tolerances& tol)
    : dim_(0), members_(std::move(members)), labels_(std::move(labels)) {
  if (members_.empty()) {
    throw ValidationError("ProjectorFamily: at least one member required");
  }
  if (members_.size() != labels_.size()) {
    throw ValidationError("ProjectorFamily: one label per member required");
  }
  dim_ = members_.front().dim();
  const auto n = static_cast<Eigen::Index>(dim_);
  CMatrix sum = CMatrix::Zero(n, n);
  for (std::size_t i = 0; i < members_.size(); ++i) {
    const LinearOperator& p = members_[i];
    require_same_dim(dim_, p.dim(), "ProjectorFamily");
    if (p.idempotence_residual() > tol.structural) {
      std::ostringstream os;
      os << "ProjectorFamily: member " << i << " is not idempotent (residual "
         << p.idempotence_residual() << ")";
      throw ValidationError(os.str());
    }
    for (std::size_t j = 0; j < i; ++j) {
      const double overlap = max_norm(p.matrix() * members_[j].matrix());
      if (overlap > tol.structural) {
        std::ostringstream os;
        os << "ProjectorFamily: members " << j << " and " << i << " are not orthogonal (residual "
           << overlap << ")";
        throw ValidationError(os.str());
      }
    }
    sum += p.matrix();
  }
  const double completeness = max_norm(sum - CMatrix::Identity(n, n));
  if (completeness > tol.structural) {
    std::ostringstream os;
    os << "ProjectorFamily: members do not sum to identity (residual " << completeness << ")";
    throw ValidationError(os.str());
  }
}

ProjectorFamily ProjectorFamily::from_basis(std::span<const StateVector> basis,
                                            const Tolerances& tol) {
  std::vector<LinearOperator> members;
  std::vector<double> labels;
  members.reserve(basis.size());
  for (std::size_t i = 0; i < basis.size(); ++i) {
    members.push_back(LinearOperator::projector_onto(basis[i]));
    labels.push_back(static_cast<double>(i));
  }
  return ProjectorFamily(std::move(members), std::move(labels), tol);
}

// ---------------------------------------------------------------------------
// Tensor products

StateVector tensor_product(const StateVector& a, const StateVector& b, const Tolerances& tol) {
  const std::size_t da = a.dim();
  const std::size_t db = b.dim();
  if (da > tol.dimension_cap / db) {
    std::ostringstream os;
    os << "tensor_product: dimension " << da << " x " << db << " exceeds cap "
       << tol.dimension_cap;
    throw CapacityError(os.str());
  }
  CVector out(static_cast<Eigen::Index>(da * db));
  for (std::size_t i = 0; i < da; ++i) {
    for (std::size_t j = 0; j < db; ++j) {
      out(static_cast<Eigen::Index>(i * db + j)) = a[i] * b[j];
    }
  }
  return StateVector(std::move(out));
}

LinearOperator tensor_product(const LinearOperator& a, const LinearOperator& b,
                              const Tolerances& tol) {
  const std::size_t da = a.dim();
  const std::size_t db = b.dim();
  if (da > tol.dimension_cap / db) {
    std::ostringstream os;
    os << "tensor_product: dimension " << da << " x " << db << " exceeds cap "
       << tol.dimension_cap;
    throw CapacityError(os.str());
  }
  check_dense_cap(da * db, tol, "tensor_product");
  const auto na = static_cast<Eigen::Index>(da);
  const auto nb = static_cast<Eigen::Index>(db);
  CMatrix out(na * nb, na * nb);
  for (Eigen::Index i = 0; i < na; ++i) {
    for (Eigen::Index j = 0; j < na; ++j) {
      out.block(i * nb, j * nb, nb, nb) = a.matrix()(i, j) * b.matrix();
    }
  }
  return LinearOperator(std::move(out));
}

// ---------------------------------------------------------------------------
// Propagator

Propagator::Factor Propagator::diagonalize(const LinearOperator& h, const Tolerances& tol) {
  if (!h.is_hermitian(tol)) {
    std::ostringstream os;
    os << "Propagator: Hamiltonian is not Hermitian (residual " << h.hermiticity_residual()
       << ")";
    throw ValidationError(os.str());
  }
  // Symmetrize away the sub-tolerance anti-Hermitian part before diagonalizing.
  const CMatrix herm = 0.5 * (h.matrix() + h.matrix().adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(herm);
  if (solver.info() != Eigen::Success) {
    throw InvariantError("Propagator: eigendecomposition failed");
  }
  return Factor{solver.eigenvectors(), solver.eigenvalues()};
}

CMatrix Propagator::factor_unitary(const Factor& f, double t) {
  const Eigen::Index n = f.eigenvalues.size();
  CVector phases(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    phases(k) = std::polar(1.0, -f.eigenvalues(k) * t);
  }
  return f.eigenvectors * phases.asDiagonal() * f.eigenvectors.adjoint();
}

Propagator Propagator::dense(const LinearOperator& hamiltonian, const Tolerances& tol) {
  check_dense_cap(hamiltonian.dim(), tol, "Propagator::dense");
  Propagator p;
  p.dim_ = hamiltonian.dim();
  p.dense_cap_ = tol.dense_operator_cap;
  p.factors_.push_back(diagonalize(hamiltonian, tol));
  return p;
}

Propagator Propagator::separable(std::span<const LinearOperator> factor_hamiltonians,
                                 const Tolerances& tol) {
  if (factor_hamiltonians.empty()) {
    throw ValidationError("Propagator::separable: at least one factor required");
  }
  Propagator p;
  p.dim_ = 1;
  p.dense_cap_ = tol.dense_operator_cap;
  for (const LinearOperator& h : factor_hamiltonians) {
    check_dense_cap(h.dim(), tol, "Propagator::separable");
    if (p.dim_ > tol.dimension_cap / h.dim()) {
      throw CapacityError("Propagator::separable: total dimension exceeds cap");
    }
    p.dim_ *= h.dim();
    p.factors_.push_back(diagonalize(h, tol));
  }
  return p;
}

CVector Propagator::apply(double t, const CVector& psi) const {
  if (static_cast<std::size_t>(psi.size()) != dim_) {
    throw ValidationError("Propagator::apply: dimension mismatch");
  }
  if (factors_.size() == 1) {
    const Factor& f = factors_.front();
    CVector coeffs = f.eigenvectors.adjoint() * psi;
    for (Eigen::Index k = 0; k < coeffs.size(); ++k) {
      coeffs(k) *= std::polar(1.0, -f.eigenvalues(k) * t);
    }
    return f.eigenvectors * coeffs;
  }
  // Factor 0 is the most significant index (Kronecker convention).
  CVector out = psi;
  std::size_t left = 1;
  std::size_t right = dim_;
  for (const Factor& f : factors_) {
    const auto d = static_cast<std::size_t>(f.eigenvalues.size());
    right /= d;
    const CMatrix u_t = factor_unitary(f, t).transpose();
    for (std::size_t l = 0; l < left; ++l) {
      Eigen::Map<CMatrix> block(out.data() + l * d * right, static_cast<Eigen::Index>(right),
                                static_cast<Eigen::Index>(d));
      block = (block * u_t).eval();
    }
    left *= d;
  }
  return out;
}

StateVector Propagator::apply(double t, const StateVector& psi) const {
  return StateVector(apply(t, psi.amplitudes()));
}

LinearOperator Propagator::unitary(double t) const {
  if (dim_ > dense_cap_) {
    throw CapacityError("Propagator::unitary: dimension exceeds dense operator cap");
  }
  CMatrix u = factor_unitary(factors_.front(), t);
  for (std::size_t k = 1; k < factors_.size(); ++k) {
    const CMatrix next = factor_unitary(factors_[k], t);
    CMatrix kron(u.rows() * next.rows(), u.cols() * next.cols());
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
      for (Eigen::Index j = 0; j < u.cols(); ++j) {
        kron.block(i * next.rows(), j * next.cols(), next.rows(), next.cols()) = u(i, j) * next;
      }
    }
    u = std::move(kron);
  }
  return LinearOperator(std::move(u));
}

StateVector evolve(const LinearOperator& hamiltonian, double t, const StateVector& psi,
                   const Tolerances& tol) {
  require_same_dim(hamiltonian.dim(), psi.dim(), "evolve");
  return Propagator::dense(hamiltonian, tol).apply(t, psi);
}

// ---------------------------------------------------------------------------
// Measurement

double born_probability(const StateVector& psi, const LinearOperator& projector,
                        const Tolerances& tol) {
  require_same_dim(psi.dim(), projector.dim(), "born_probability");
  if (!psi.is_normalized(tol)) {
    throw ValidationError("born_probability: state is not normalized");
  }
  if (!projector.is_projector(tol)) {
    throw ValidationError("born_probability: operator is not a projector");
  }
  const Complex value = psi.inner(projector.apply(psi));
  if (std::abs(value.imag()) > tol.scalar) {
    throw InvariantError("born_probability: imaginary residue exceeds tolerance");
  }
  double p = value.real();
  if (p < 0.0 && p >= -tol.scalar) {
    p = 0.0;
  } else if (p > 1.0 && p <= 1.0 + tol.scalar) {
    p = 1.0;
  }
  if (p < 0.0 || p > 1.0) {
    throw InvariantError("born_probability: probability outside [0, 1]");
  }
  return p;
}

StateVector luders_collapse(const StateVector& psi, const LinearOperator& projector,
                            const Tolerances& tol) {
  const double p = born_probability(psi, projector, tol);
  if (p <= tol.collapse_threshold) {
    std::ostringstream os;
    os << "luders_collapse: outcome probability " << p << " is below the collapse threshold";
    throw ZeroProbabilityBranchError(os.str());
  }
  const CVector projected = projector.matrix() * psi.amplitudes();
  return StateVector(projected / projected.norm());
}

}  // namespace ablfield
