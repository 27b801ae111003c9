#pragma once

#include <quadmath.h>

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "mbth/errors.hpp"
#include "mbth/fock.hpp"

namespace mbth {

/// All model parameters derived from the single free parameter N.
/// Energy unit is 1; K = K' = N memory modes per sector.
struct ModelParams {
  int n = 0;        // system size N
  int k = 0;        // memory modes per sector
  int n_m = 0;      // total memory occupation, floor(N/2)
  double epsilon = 0.0;  // free memory gap, sqrt(K)
  double c_b = 0.0;      // master-partner coupling, 1/sqrt(N)
  double c_m = 0.0;      // memory-memory coupling, 1/(sqrt(N_m) sqrt(K))
  double delta = 0.0;    // gap-splitting parameter, N/2 (may be half-integer)

  static ModelParams for_system_size(int n) {
    if (n < 2) throw InvalidParameterError("ModelParams: system size must be at least 2");
    ModelParams p;
    p.n = n;
    p.k = n;
    p.n_m = n / 2;
    p.epsilon = std::sqrt(static_cast<double>(p.k));
    p.c_b = 1.0 / std::sqrt(static_cast<double>(n));
    p.c_m = 1.0 / (std::sqrt(static_cast<double>(p.n_m)) * std::sqrt(static_cast<double>(p.k)));
    p.delta = 0.5 * n;
    return p;
  }

  /// Ratio delta / (N / (1 + sqrt(N_m K))); reported for audit, not enforced.
  double gap_condition_ratio() const {
    return delta * (1.0 + std::sqrt(static_cast<double>(n_m)) * std::sqrt(static_cast<double>(k))) / n;
  }
};

namespace detail {

/// Maps the raw pseudo-random value in [0,1) onto [-1,-0.5) u [0.5,1).
inline double fold_coupling(double f_raw) { return f_raw < 0.5 ? f_raw - 1.0 : f_raw; }

}  // namespace detail

/// Raw memory-mode coupling (sqrt(2)(k+dk_i)^3 + sqrt(7)(l+dl_i)^5) mod 1.
///
/// The fifth power reaches ~1e7, so the fractional part is evaluated in
/// 128-bit floating point and only the final result is rounded to double;
/// in plain double the mod-1 value would keep only ~9 stable digits.
inline double coupling_F(int i, int k, int l, int big_k) {
  if (i < 1 || i > 3) throw InvalidParameterError("coupling_F: family index must be 1, 2 or 3");
  const std::int64_t dk = (i == 3) ? big_k + 1 : 1;
  const std::int64_t dl = (i == 2) ? 1 : big_k + 1;
  const std::int64_t bk = k + dk;
  const std::int64_t bl = l + dl;
  const __float128 term = sqrtq(static_cast<__float128>(2)) * static_cast<__float128>(bk * bk * bk) +
                          sqrtq(static_cast<__float128>(7)) * static_cast<__float128>(bl * bl * bl * bl * bl);
  const __float128 frac = term - floorq(term);
  double out = static_cast<double>(frac);
  if (out >= 1.0) out = std::nextafter(1.0, 0.0);
  if (out < 0.0) out = 0.0;
  return out;
}

/// Signed coupling of an individual memory-mode pair, |f| in [0.5, 1).
inline double coupling_f(int i, int k, int l, int big_k) {
  return detail::fold_coupling(coupling_F(i, k, l, big_k));
}

/// Real symmetric sparse matrix in CSR form; both triangles stored.
struct SparseSymmetric {
  std::size_t dim = 0;
  std::vector<std::size_t> row_ptr;
  std::vector<std::uint32_t> col;
  std::vector<double> val;

  std::size_t nnz() const { return val.size(); }

  void multiply(const double* x, double* y) const {
    for (std::size_t r = 0; r < dim; ++r) {
      double acc = 0.0;
      for (std::size_t p = row_ptr[r]; p < row_ptr[r + 1]; ++p) acc += val[p] * x[col[p]];
      y[r] = acc;
    }
  }

  Eigen::VectorXd multiply(const Eigen::VectorXd& x) const {
    Eigen::VectorXd y(dim);
    multiply(x.data(), y.data());
    return y;
  }

  double trace() const {
    double t = 0.0;
    for (std::size_t r = 0; r < dim; ++r)
      for (std::size_t p = row_ptr[r]; p < row_ptr[r + 1]; ++p)
        if (col[p] == r) t += val[p];
    return t;
  }

  double frobenius_norm_sq() const {
    double t = 0.0;
    for (double v : val) t += v * v;
    return t;
  }

  double entry(std::size_t r, std::size_t c) const {
    for (std::size_t p = row_ptr[r]; p < row_ptr[r + 1]; ++p)
      if (col[p] == c) return val[p];
    return 0.0;
  }

  Eigen::MatrixXd to_dense() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim, dim);
    for (std::size_t r = 0; r < dim; ++r)
      for (std::size_t p = row_ptr[r]; p < row_ptr[r + 1]; ++p)
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(col[p])) = val[p];
    return m;
  }
};

/// Parameters, basis and assembled Hamiltonian of one system size.
struct ModelInstance {
  ModelParams params;
  SectorBasis basis;
  SparseSymmetric h;
};

namespace detail {

/// Sector-resolved coupling for the hop between global memory modes
/// m1 < m2 (0-based over the 2K modes, first sector first).
inline double memory_pair_coupling(int m1, int m2, int big_k, double c_m) {
  double f;
  if (m2 < big_k) {
    f = coupling_f(2, m1 + 1, m2 + 1, big_k);  // both in the first sector
  } else if (m1 >= big_k) {
    f = coupling_f(3, m1 - big_k + 1, m2 - big_k + 1, big_k);  // both in the second
  } else {
    f = coupling_f(1, m1 + 1, m2 - big_k + 1, big_k);  // cross-sector
  }
  return c_m * f;
}

}  // namespace detail

/// Assembles the sparse Hamiltonian over the given sector basis.
///
/// Per state: sector-dependent diagonal gaps, the master-partner exchange
/// with bosonic amplitudes, and hard-core single-particle memory hops with
/// amplitude 1 weighted by the pair coupling. Row entries are generated
/// independently, so every stored (r,c) has an identically-valued (c,r).
inline ModelInstance build_hamiltonian(const ModelParams& params, SectorBasis basis) {
  if (basis.system_size() != params.n || basis.modes_per_sector() != params.k ||
      basis.memory_occupation() != params.n_m)
    throw DimensionMismatchError("build_hamiltonian: basis does not match parameters");

  const int big_k = params.k;
  const int two_k = 2 * big_k;
  const std::size_t dim = basis.size();
  const std::uint64_t low_mask = (std::uint64_t{1} << big_k) - 1;
  const std::uint64_t full_mask = two_k >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << two_k) - 1;

  // Pair couplings are reused across all states; evaluate each once.
  std::vector<double> pair_coupling(static_cast<std::size_t>(two_k) * two_k, 0.0);
  for (int m1 = 0; m1 < two_k; ++m1)
    for (int m2 = m1 + 1; m2 < two_k; ++m2)
      pair_coupling[static_cast<std::size_t>(m1) * two_k + m2] =
          detail::memory_pair_coupling(m1, m2, big_k, params.c_m);

  using Entry = std::pair<std::uint32_t, double>;
  std::vector<std::vector<Entry>> rows(dim);

#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < static_cast<std::int64_t>(dim); ++r) {
    const FockState& s = basis.state(static_cast<std::size_t>(r));
    auto& entries = rows[static_cast<std::size_t>(r)];
    entries.reserve(3 + static_cast<std::size_t>(params.n_m) * (two_k - params.n_m));

    const double gap_first = params.epsilon * (1.0 - s.n_a / static_cast<double>(params.n));
    const double gap_second = params.epsilon * (1.0 - s.n_a / (params.n - params.delta));
    const int occ_first = std::popcount(s.memory & low_mask);
    const int occ_second = std::popcount(s.memory >> big_k);
    entries.emplace_back(static_cast<std::uint32_t>(r),
                         gap_first * occ_first + gap_second * occ_second);

    if (s.n_a > 0) {
      const std::size_t c = basis.rank(FockState{s.n_a - 1, s.n_b + 1, s.memory});
      entries.emplace_back(static_cast<std::uint32_t>(c),
                           params.c_b * std::sqrt(static_cast<double>(s.n_a) * (s.n_b + 1)));
    }
    if (s.n_b > 0) {
      const std::size_t c = basis.rank(FockState{s.n_a + 1, s.n_b - 1, s.memory});
      entries.emplace_back(static_cast<std::uint32_t>(c),
                           params.c_b * std::sqrt(static_cast<double>(s.n_a + 1) * s.n_b));
    }

    for (std::uint64_t occ = s.memory; occ != 0; occ &= occ - 1) {
      const int src = std::countr_zero(occ);
      std::uint64_t empty = ~s.memory & full_mask;
      for (; empty != 0; empty &= empty - 1) {
        const int dst = std::countr_zero(empty);
        const std::size_t c =
            basis.rank(FockState{s.n_a, s.n_b, s.memory ^ ((std::uint64_t{1} << src) | (std::uint64_t{1} << dst))});
        const int m1 = src < dst ? src : dst;
        const int m2 = src < dst ? dst : src;
        entries.emplace_back(static_cast<std::uint32_t>(c),
                             pair_coupling[static_cast<std::size_t>(m1) * two_k + m2]);
      }
    }

    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) { return a.first < b.first; });
  }

  SparseSymmetric h;
  h.dim = dim;
  h.row_ptr.resize(dim + 1, 0);
  for (std::size_t r = 0; r < dim; ++r) h.row_ptr[r + 1] = h.row_ptr[r] + rows[r].size();
  h.col.resize(h.row_ptr[dim]);
  h.val.resize(h.row_ptr[dim]);
  for (std::size_t r = 0; r < dim; ++r) {
    std::size_t p = h.row_ptr[r];
    for (const auto& [c, v] : rows[r]) {
      h.col[p] = c;
      h.val[p++] = v;
    }
  }

  return ModelInstance{params, std::move(basis), std::move(h)};
}

/// The non-equilibrium start ket: master mode full, partner empty, first
/// N_m modes of the first memory sector singly occupied.
inline FockState initial_state(const ModelParams& params) {
  const std::uint64_t mem = params.n_m == 0 ? 0 : (~std::uint64_t{0} >> (64 - params.n_m));
  return FockState{params.n, 0, mem};
}

/// Unit coordinate vector of the initial state in the sector basis.
inline Eigen::VectorXd initial_state_vector(const ModelParams& params, const SectorBasis& basis) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(basis.size()));
  v[static_cast<Eigen::Index>(basis.rank(initial_state(params)))] = 1.0;
  return v;
}

}  // namespace mbth
