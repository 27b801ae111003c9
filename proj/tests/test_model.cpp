#include <catch2/catch_amalgamated.hpp>

#include <bit>
#include <cmath>
#include <random>

#include "mbth/fock.hpp"
#include "mbth/model.hpp"
#include "support/oracles.hpp"

using mbth::build_hamiltonian;
using mbth::coupling_F;
using mbth::coupling_f;
using mbth::enumerate_sector;
using mbth::FockState;
using mbth::ModelParams;

TEST_CASE("derived parameters satisfy their identities") {
  for (int n = 2; n <= 9; ++n) {
    const auto p = ModelParams::for_system_size(n);
    CHECK(p.k == n);
    CHECK(p.n_m == n / 2);
    CHECK(p.epsilon * p.epsilon == Catch::Approx(p.k).epsilon(1e-14));
    CHECK(p.c_b * p.c_b * n == Catch::Approx(1.0).epsilon(1e-14));
    CHECK(p.c_m * p.c_m * p.n_m * p.k == Catch::Approx(1.0).epsilon(1e-14));
    CHECK(p.delta == 0.5 * n);
    CHECK(p.gap_condition_ratio() > 1.0);
  }
  CHECK_THROWS_AS(ModelParams::for_system_size(1), mbth::InvalidParameterError);
}

TEST_CASE("raw couplings match the extended-precision oracle") {
  // F_1(1,1), K=2: (sqrt(2) 2^3 + sqrt(7) 4^5) mod 1.
  CHECK(coupling_F(1, 1, 1, 2) == Catch::Approx(oracle::coupling_F(1, 1, 1, 2)).margin(1e-15));
  // F_2(1,1), K=2: (sqrt(2) 8 + sqrt(7) 32) mod 1.
  CHECK(coupling_F(2, 1, 1, 2) == Catch::Approx(oracle::coupling_F(2, 1, 1, 2)).margin(1e-15));

  for (int i = 1; i <= 3; ++i)
    for (int k = 1; k <= 8; ++k)
      for (int l = 1; l <= 8; ++l)
        CHECK(coupling_F(i, k, l, 8) ==
              Catch::Approx(oracle::coupling_F(i, k, l, 8)).margin(1e-14));
}

TEST_CASE("couplings stay in their ranges over a full K=8 sweep") {
  for (int i = 1; i <= 3; ++i)
    for (int k = 1; k <= 8; ++k)
      for (int l = 1; l <= 8; ++l) {
        const double raw = coupling_F(i, k, l, 8);
        CHECK(raw >= 0.0);
        CHECK(raw < 1.0);
        const double f = coupling_f(i, k, l, 8);
        CHECK(std::abs(f) >= 0.5);
        CHECK(std::abs(f) < 1.0);
      }
  CHECK_THROWS_AS(coupling_F(0, 1, 1, 4), mbth::InvalidParameterError);
}

TEST_CASE("branch arithmetic of the signed coupling") {
  CHECK(mbth::detail::fold_coupling(0.3) == Catch::Approx(-0.7));
  CHECK(mbth::detail::fold_coupling(0.5) == 0.5);  // boundary goes to the upper branch
  CHECK(mbth::detail::fold_coupling(0.75) == 0.75);
  for (int k = 1; k <= 6; ++k) {
    const double raw = coupling_F(2, k, k + 1, 6);
    const double folded = coupling_f(2, k, k + 1, 6);
    CHECK(folded == (raw < 0.5 ? raw - 1.0 : raw));
  }
}

TEST_CASE("N=2 Hamiltonian equals the operator-application oracle") {
  const auto p = ModelParams::for_system_size(2);
  const auto inst = build_hamiltonian(p, enumerate_sector(2, 2, 1));
  const Eigen::MatrixXd expected = oracle::dense_hamiltonian(p, inst.basis);
  const Eigen::MatrixXd actual = inst.h.to_dense();
  REQUIRE(actual.rows() == 12);
  for (Eigen::Index r = 0; r < actual.rows(); ++r)
    for (Eigen::Index c = 0; c < actual.cols(); ++c)
      CHECK(actual(r, c) == Catch::Approx(expected(r, c)).margin(1e-12));
}

TEST_CASE("every stored entry has an equal transpose partner") {
  for (int n : {2, 3, 4, 5}) {
    const auto p = ModelParams::for_system_size(n);
    const auto inst = build_hamiltonian(p, enumerate_sector(n, n, n / 2));
    for (std::size_t r = 0; r < inst.h.dim; ++r)
      for (std::size_t q = inst.h.row_ptr[r]; q < inst.h.row_ptr[r + 1]; ++q)
        REQUIRE(inst.h.val[q] == inst.h.entry(inst.h.col[q], r));
  }
}

TEST_CASE("diagonal of the initial state vanishes") {
  for (int n : {2, 3, 4, 5, 6}) {
    const auto p = ModelParams::for_system_size(n);
    const auto inst = build_hamiltonian(p, enumerate_sector(n, n, n / 2));
    const auto r = inst.basis.rank(mbth::initial_state(p));
    CHECK(inst.h.entry(r, r) == 0.0);
  }
}

TEST_CASE("initial state vector is a unit coordinate vector") {
  const auto p = ModelParams::for_system_size(5);
  const auto basis = enumerate_sector(5, 5, 2);
  const Eigen::VectorXd v = mbth::initial_state_vector(p, basis);
  int nonzero = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (v[i] != 0.0) {
      ++nonzero;
      CHECK(v[i] == 1.0);
      const FockState& s = basis.state(static_cast<std::size_t>(i));
      CHECK(s.n_a == 5);
      CHECK(s.n_b == 0);
    }
  CHECK(nonzero == 1);
  CHECK(v.norm() == 1.0);
}

TEST_CASE("stored entry count respects the hop-target bound") {
  for (int n = 2; n <= 6; ++n) {
    const auto p = ModelParams::for_system_size(n);
    const auto inst = build_hamiltonian(p, enumerate_sector(n, n, n / 2));
    const std::size_t per_row = 1 + 2 + p.n_m * (2 * p.k - p.n_m);
    CHECK(inst.h.nnz() <= inst.h.dim * per_row);
  }
}

TEST_CASE("H commutes with both conserved charges on random vectors") {
  for (int n : {3, 4, 5}) {
    const auto p = ModelParams::for_system_size(n);
    const auto inst = build_hamiltonian(p, enumerate_sector(n, n, n / 2));
    const auto dim = static_cast<Eigen::Index>(inst.h.dim);

    Eigen::VectorXd particle(dim), memory(dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
      const FockState& s = inst.basis.state(static_cast<std::size_t>(i));
      particle[i] = s.n_a + s.n_b;
      memory[i] = std::popcount(s.memory);
    }

    std::mt19937_64 gen(7 + n);
    std::normal_distribution<double> dist;
    Eigen::VectorXd v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) v[i] = dist(gen);
    v.normalize();

    for (const Eigen::VectorXd& q : {particle, memory}) {
      const Eigen::VectorXd lhs = inst.h.multiply(Eigen::VectorXd(q.cwiseProduct(v)));
      const Eigen::VectorXd rhs = q.cwiseProduct(inst.h.multiply(v));
      CHECK((lhs - rhs).norm() <= 1e-12 * rhs.norm());
    }
  }
}

TEST_CASE("mismatched basis is rejected") {
  const auto p = ModelParams::for_system_size(4);
  CHECK_THROWS_AS(build_hamiltonian(p, enumerate_sector(4, 4, 1)), mbth::DimensionMismatchError);
  CHECK_THROWS_AS(build_hamiltonian(p, enumerate_sector(5, 5, 2)), mbth::DimensionMismatchError);
}
