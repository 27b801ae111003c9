#pragma once

#include <lapacke.h>

#include <Eigen/Dense>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "mbth/errors.hpp"
#include "mbth/model.hpp"

namespace mbth {

/// Default relative tolerance below which two levels count as degenerate.
inline constexpr double kNondegeneracyRelTol = 1e-12;

/// Full eigendecomposition of one model instance. Column alpha of `vectors`
/// is the eigenstate in the Fock basis; sign fixed so the largest-magnitude
/// component is positive.
struct Spectrum {
  Eigen::VectorXd energies;   // ascending
  Eigen::MatrixXd vectors;    // orthonormal, column per eigenstate
  double residual_norm = 0.0; // max_alpha ||H v - E v||_2
  double min_normalized_gap = std::numeric_limits<double>::quiet_NaN();

  std::size_t dim() const { return static_cast<std::size_t>(energies.size()); }
  bool nondegeneracy_checked() const { return !std::isnan(min_normalized_gap); }
};

struct DiagonalizeOptions {
  // Routes the backend: divide-and-conquer (dsyevd) needs ~3 n^2 doubles,
  // the MRRR fallback (dsyevr) ~2 n^2. Budget is decimal bytes; the 6 GB
  // default sends the largest stock system (dim 16380, 6.44e9 required)
  // to the low-memory backend.
  double mem_budget_bytes = 6e9;
};

namespace detail {

inline void fix_eigenvector_signs(Eigen::MatrixXd& v) {
  const Eigen::Index n = v.rows();
#pragma omp parallel for schedule(static)
  for (Eigen::Index a = 0; a < v.cols(); ++a) {
    Eigen::Index imax = 0;
    double best = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double m = std::abs(v(i, a));
      if (m > best) {
        best = m;
        imax = i;
      }
    }
    if (v(imax, a) < 0.0) v.col(a) = -v.col(a);
  }
}

/// max_alpha ||H v_alpha - E_alpha v_alpha||_2, streamed in column blocks.
inline double max_residual(const SparseSymmetric& h, const Eigen::VectorXd& e,
                           const Eigen::MatrixXd& v, Eigen::Index block = 256) {
  const Eigen::Index n = v.rows();
  double worst = 0.0;
  Eigen::MatrixXd y;
  for (Eigen::Index j0 = 0; j0 < n; j0 += block) {
    const Eigen::Index jn = std::min(block, n - j0);
    y.resize(n, jn);
#pragma omp parallel for schedule(static)
    for (std::int64_t r = 0; r < n; ++r) {
      for (Eigen::Index j = 0; j < jn; ++j) {
        double acc = 0.0;
        for (std::size_t p = h.row_ptr[r]; p < h.row_ptr[r + 1]; ++p)
          acc += h.val[p] * v(h.col[p], j0 + j);
        y(r, j) = acc;
      }
    }
    for (Eigen::Index j = 0; j < jn; ++j) {
      const double res = (y.col(j) - e[j0 + j] * v.col(j0 + j)).norm();
      if (res > worst) worst = res;
    }
  }
  return worst;
}

}  // namespace detail

/// All eigenpairs of m.h, dense real symmetric solve.
inline Spectrum diagonalize(const ModelInstance& m, const DiagonalizeOptions& opts = {}) {
  const std::size_t n = m.h.dim;
  if (n == 0) throw InvalidParameterError("diagonalize: empty Hamiltonian");
  const auto ln = static_cast<lapack_int>(n);

  Spectrum out;
  out.energies.resize(static_cast<Eigen::Index>(n));

  const double dc_bytes = 8.0 * (3.0 * n * n + 7.0 * n);
  if (dc_bytes <= opts.mem_budget_bytes) {
    Eigen::MatrixXd a = m.h.to_dense();
    const lapack_int info =
        LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', ln, a.data(), ln, out.energies.data());
    if (info != 0)
      throw SolverFailureError("dsyevd failed, info=" + std::to_string(info));
    out.vectors = std::move(a);
  } else {
    Eigen::MatrixXd a = m.h.to_dense();
    out.vectors.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    std::vector<lapack_int> isuppz(2 * n);
    lapack_int found = 0;
    const lapack_int info = LAPACKE_dsyevr(
        LAPACK_COL_MAJOR, 'V', 'A', 'L', ln, a.data(), ln, 0.0, 0.0, 0, 0,
        LAPACKE_dlamch('S'), &found, out.energies.data(), out.vectors.data(), ln, isuppz.data());
    if (info != 0)
      throw SolverFailureError("dsyevr failed, info=" + std::to_string(info));
    if (found != ln)
      throw SolverFailureError("dsyevr returned " + std::to_string(found) + " of " +
                               std::to_string(n) + " eigenpairs");
  }

  detail::fix_eigenvector_signs(out.vectors);
  out.residual_norm = detail::max_residual(m.h, out.energies, out.vectors);
  return out;
}

/// Minimum neighbor gap normalized by the spectral span; records the check
/// on the spectrum. The caller compares against its tolerance.
inline double check_nondegeneracy(Spectrum& s) {
  const Eigen::Index n = s.energies.size();
  if (n < 2) throw InvalidParameterError("check_nondegeneracy: need at least two levels");
  const double span = s.energies[n - 1] - s.energies[0];
  double min_gap = std::numeric_limits<double>::infinity();
  for (Eigen::Index a = 0; a + 1 < n; ++a)
    min_gap = std::min(min_gap, s.energies[a + 1] - s.energies[a]);
  s.min_normalized_gap = span > 0.0 ? min_gap / span : 0.0;
  return s.min_normalized_gap;
}

/// Per-eigenstate expectation of the two conserved charges,
/// (n_a + n_b, total memory occupation). Both are constant on the sector.
inline std::vector<std::pair<double, double>> verify_sector_charges(const Spectrum& s,
                                                                    const SectorBasis& basis) {
  const Eigen::Index n = s.vectors.rows();
  std::vector<double> particle(n), memory(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const FockState& st = basis.state(static_cast<std::size_t>(i));
    particle[i] = st.n_a + st.n_b;
    memory[i] = std::popcount(st.memory);
  }
  std::vector<std::pair<double, double>> charges(static_cast<std::size_t>(s.vectors.cols()));
#pragma omp parallel for schedule(static)
  for (Eigen::Index a = 0; a < s.vectors.cols(); ++a) {
    double qp = 0.0, qm = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double w = s.vectors(i, a) * s.vectors(i, a);
      qp += w * particle[i];
      qm += w * memory[i];
    }
    charges[static_cast<std::size_t>(a)] = {qp, qm};
  }
  return charges;
}

}  // namespace mbth
