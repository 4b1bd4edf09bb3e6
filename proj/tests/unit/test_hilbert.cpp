#include <random>

#include "ablfield/abl.hpp"
#include "ablfield/error.hpp"
#include "ablfield/hilbert.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace ablfield;

TEST_CASE("state vector basics") {
  StateVector s{Complex(3.0, 0.0), Complex(0.0, 4.0)};
  CHECK(s.norm() == doctest::Approx(5.0));
  CHECK_FALSE(s.is_normalized());
  CHECK(s.normalized().is_normalized());
  const StateVector e0 = StateVector::basis(2, 0);
  CHECK(e0.inner(s) == Complex(3.0, 0.0));
  CHECK_THROWS_AS(StateVector::basis(2, 2), ValidationError);
}

TEST_CASE("operator predicates") {
  std::mt19937_64 rng(7);
  const LinearOperator h = random_hermitian(rng, 5);
  CHECK(h.is_hermitian());
  CHECK(LinearOperator(random_unitary(rng, 5)).is_unitary());
  const StateVector psi = random_state(rng, 5);
  const LinearOperator p = LinearOperator::projector_onto(psi);
  CHECK(p.is_projector());
  CHECK(std::abs(p.trace() - Complex(1.0, 0.0)) < 1e-12);
  CHECK_FALSE((2.0 * p).is_projector());
}

TEST_CASE("propagator matches scaled-and-squared exponential") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t dim = 2 + static_cast<std::size_t>(trial % 9);
    const LinearOperator h = random_hermitian(rng, dim);
    const double t = 0.37 * trial;
    const Propagator u = Propagator::dense(h);
    const CMatrix expected = oracles::propagator(h.matrix(), t);
    CHECK(max_norm(u.unitary(t).matrix() - expected) < 1e-10);
    CHECK(u.unitary(t).is_unitary());
  }
}

TEST_CASE("separable propagator equals dense propagation of the summed Hamiltonian") {
  std::mt19937_64 rng(3);
  const LinearOperator h1 = random_hermitian(rng, 3);
  const LinearOperator h2 = random_hermitian(rng, 4);
  const LinearOperator h3 = random_hermitian(rng, 2);
  const std::vector<LinearOperator> factors{h1, h2, h3};
  const Propagator sep = Propagator::separable(factors);
  const CMatrix i2 = CMatrix::Identity(2, 2);
  const CMatrix i3 = CMatrix::Identity(3, 3);
  const CMatrix i4 = CMatrix::Identity(4, 4);
  const CMatrix full = oracles::kron(oracles::kron(h1.matrix(), i4), i2) +
                       oracles::kron(oracles::kron(i3, h2.matrix()), i2) +
                       oracles::kron(oracles::kron(i3, i4), h3.matrix());
  const StateVector psi = random_state(rng, 24);
  for (double t : {0.0, 0.5, 2.25}) {
    const CVector expected = oracles::propagator(full, t) * psi.amplitudes();
    CHECK((sep.apply(t, psi).amplitudes() - expected).cwiseAbs().maxCoeff() < 1e-10);
  }
  CHECK(max_norm(sep.unitary(1.5).matrix() - oracles::propagator(full, 1.5)) < 1e-10);
}

TEST_CASE("non-Hermitian Hamiltonian is refused") {
  CMatrix m = CMatrix::Zero(2, 2);
  m(0, 1) = 1.0;
  CHECK_THROWS_AS(Propagator::dense(LinearOperator(m)), ValidationError);
}

TEST_CASE("tensor product matches direct Kronecker") {
  std::mt19937_64 rng(5);
  const LinearOperator a = random_hermitian(rng, 3);
  const LinearOperator b = LinearOperator(random_unitary(rng, 4));
  CHECK(max_norm(tensor_product(a, b).matrix() - oracles::kron(a.matrix(), b.matrix())) == 0.0);
  const StateVector u = random_state(rng, 3);
  const StateVector v = random_state(rng, 2);
  const StateVector uv = tensor_product(u, v);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      CHECK(uv[i * 2 + j] == u[i] * v[j]);
    }
  }
  Tolerances tight;
  tight.dimension_cap = 8;
  CHECK_THROWS_AS(tensor_product(a, b, tight), CapacityError);
}

TEST_CASE("projector family validation") {
  const LinearOperator p0 = LinearOperator::projector_onto(StateVector::basis(3, 0));
  const LinearOperator p1 = LinearOperator::projector_onto(StateVector::basis(3, 1));
  const LinearOperator p2 = LinearOperator::projector_onto(StateVector::basis(3, 2));
  CHECK_NOTHROW(ProjectorFamily({p0, p1, p2}, {0, 1, 2}));
  CHECK_THROWS_AS(ProjectorFamily({p0, p1}, {0, 1}), ValidationError);
  CHECK_THROWS_AS(ProjectorFamily({p0, p0, p1 + p2}, {0, 1, 2}), ValidationError);
  CHECK_THROWS_AS(ProjectorFamily({p0, p1, p2}, {0, 1}), ValidationError);
}

TEST_CASE("Born rule and Lüders collapse") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t dim = 2 + static_cast<std::size_t>(trial % 7);
    const StateVector psi = random_state(rng, dim);
    const ProjectorFamily fam = random_family(rng, dim, trial % 2 == 0);
    double total = 0.0;
    for (const LinearOperator& p : fam.members()) {
      const double prob = born_probability(psi, p);
      CHECK(prob >= 0.0);
      total += prob;
      if (prob > 1e-10) {
        const StateVector post = luders_collapse(psi, p);
        CHECK(post.is_normalized());
        CHECK(born_probability(post, p) == doctest::Approx(1.0).epsilon(1e-12));
      }
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("collapse onto a zero-probability outcome raises") {
  const StateVector psi = StateVector::basis(2, 0);
  const LinearOperator p1 = LinearOperator::projector_onto(StateVector::basis(2, 1));
  CHECK(born_probability(psi, p1) == 0.0);
  CHECK_THROWS_AS(luders_collapse(psi, p1), ZeroProbabilityBranchError);
}

TEST_CASE("Born probability needs a normalized state and a projector") {
  const StateVector bad{Complex(1.0, 0.0), Complex(1.0, 0.0)};
  const LinearOperator p0 = LinearOperator::projector_onto(StateVector::basis(2, 0));
  CHECK_THROWS_AS(born_probability(bad, p0), ValidationError);
  CHECK_THROWS_AS(born_probability(StateVector::basis(2, 0), 2.0 * p0), ValidationError);
}

TEST_CASE("commutator of commuting diagonals vanishes") {
  const std::vector<double> d1{1.0, 0.0, 1.0};
  const std::vector<double> d2{0.0, 1.0, 1.0};
  CHECK(commutator_norm(LinearOperator::diagonal(d1), LinearOperator::diagonal(d2)) == 0.0);
}
