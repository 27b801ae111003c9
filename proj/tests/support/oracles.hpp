// Independent reference implementations used only by the test suites.
// Everything here deliberately avoids the library's computational paths:
// couplings are evaluated with MPFR, the Hamiltonian is assembled by
// term-by-term operator application, and the statistics are direct
// transliterations of their defining formulas.
#pragma once

#include <mpfr.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <numeric>
#include <random>
#include <vector>

#include "mbth/fock.hpp"
#include "mbth/model.hpp"

namespace oracle {

inline double coupling_F(int i, int k, int l, int big_k) {
  const long dk = (i == 3) ? big_k + 1 : 1;
  const long dl = (i == 2) ? 1 : big_k + 1;
  const long bk = k + dk;
  const long bl = l + dl;
  mpfr_t s2, s7, term, fl;
  mpfr_inits2(256, s2, s7, term, fl, static_cast<mpfr_ptr>(nullptr));
  mpfr_sqrt_ui(s2, 2, MPFR_RNDN);
  mpfr_sqrt_ui(s7, 7, MPFR_RNDN);
  mpfr_mul_si(s2, s2, bk * bk * bk, MPFR_RNDN);
  mpfr_mul_si(s7, s7, bl * bl * bl * bl * bl, MPFR_RNDN);
  mpfr_add(term, s2, s7, MPFR_RNDN);
  mpfr_floor(fl, term);
  mpfr_sub(term, term, fl, MPFR_RNDN);
  const double out = mpfr_get_d(term, MPFR_RNDN);
  mpfr_clears(s2, s7, term, fl, static_cast<mpfr_ptr>(nullptr));
  return out;
}

inline double coupling_f(int i, int k, int l, int big_k) {
  const double f = coupling_F(i, k, l, big_k);
  return f < 0.5 ? f - 1.0 : f;
}

/// Dense Hamiltonian assembled by applying each operator term to each ket.
inline Eigen::MatrixXd dense_hamiltonian(const mbth::ModelParams& p,
                                         const mbth::SectorBasis& basis) {
  const int big_k = p.k;
  const auto n = static_cast<Eigen::Index>(basis.size());
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);

  auto bit = [](const mbth::FockState& s, int mode0) -> int {
    return static_cast<int>((s.memory >> mode0) & 1u);
  };
  auto find = [&](const mbth::FockState& t) -> Eigen::Index {
    for (std::size_t j = 0; j < basis.size(); ++j)
      if (basis.state(j) == t) return static_cast<Eigen::Index>(j);
    return -1;
  };

  for (Eigen::Index j = 0; j < n; ++j) {
    const mbth::FockState s = basis.state(static_cast<std::size_t>(j));

    double diag = 0.0;
    for (int k = 1; k <= big_k; ++k)
      diag += p.epsilon * (1.0 - s.n_a / static_cast<double>(p.n)) * bit(s, k - 1);
    for (int kp = 1; kp <= big_k; ++kp)
      diag += p.epsilon * (1.0 - s.n_a / (p.n - p.delta)) * bit(s, big_k + kp - 1);
    h(j, j) += diag;

    if (s.n_b > 0)  // creation on the master mode
      h(find({s.n_a + 1, s.n_b - 1, s.memory}), j) +=
          p.c_b * std::sqrt((s.n_a + 1.0) * s.n_b);
    if (s.n_a > 0)
      h(find({s.n_a - 1, s.n_b + 1, s.memory}), j) +=
          p.c_b * std::sqrt(static_cast<double>(s.n_a) * (s.n_b + 1.0));

    // Hard-core hop: move one particle from src to empty dst.
    auto hop = [&](int src0, int dst0, double coupling) {
      if (bit(s, src0) == 1 && bit(s, dst0) == 0) {
        mbth::FockState t = s;
        t.memory ^= (std::uint64_t{1} << src0) | (std::uint64_t{1} << dst0);
        h(find(t), j) += coupling;
      }
    };
    for (int k = 1; k <= big_k; ++k)
      for (int kp = 1; kp <= big_k; ++kp) {
        const double c = p.c_m * coupling_f(1, k, kp, big_k);
        hop(k - 1, big_k + kp - 1, c);
        hop(big_k + kp - 1, k - 1, c);
      }
    for (int k = 1; k <= big_k; ++k)
      for (int l = k + 1; l <= big_k; ++l) {
        const double c = p.c_m * coupling_f(2, k, l, big_k);
        hop(k - 1, l - 1, c);
        hop(l - 1, k - 1, c);
      }
    for (int kp = 1; kp <= big_k; ++kp)
      for (int lp = kp + 1; lp <= big_k; ++lp) {
        const double c = p.c_m * coupling_f(3, kp, lp, big_k);
        hop(big_k + kp - 1, big_k + lp - 1, c);
        hop(big_k + lp - 1, big_k + kp - 1, c);
      }
  }
  return h;
}

/// Full observable matrix in the eigenbasis by one dense congruence.
inline Eigen::MatrixXd dense_observable(const Eigen::MatrixXd& vectors,
                                        const mbth::SectorBasis& basis, int mode_index) {
  const Eigen::Index n = vectors.rows();
  Eigen::VectorXd bits(n);
  for (Eigen::Index s = 0; s < n; ++s)
    bits[s] = basis.memory_bit(static_cast<std::size_t>(s), mode_index);
  return vectors.transpose() * bits.asDiagonal() * vectors;
}

/// Direct double-loop temporal fluctuation.
inline double naive_sigma_t(const Eigen::VectorXd& weights, const Eigen::MatrixXd& obs) {
  double acc = 0.0;
  for (Eigen::Index a = 0; a < obs.rows(); ++a)
    for (Eigen::Index b = 0; b < obs.cols(); ++b) {
      if (a == b) continue;
      acc += weights[a] * weights[b] * obs(a, b) * obs(a, b);
    }
  return std::sqrt(acc);
}

inline double naive_offdiag_abs_average(const Eigen::MatrixXd& obs) {
  double acc = 0.0;
  const auto n = static_cast<double>(obs.rows());
  for (Eigen::Index a = 0; a < obs.rows(); ++a)
    for (Eigen::Index b = 0; b < obs.cols(); ++b) {
      if (a == b) continue;
      acc += std::abs(obs(a, b));
    }
  return acc / (n * (n - 1.0));
}

inline double naive_expectation_t(const Eigen::VectorXd& c, const Eigen::MatrixXd& obs,
                                  const Eigen::VectorXd& energies, double t) {
  double acc = 0.0;
  for (Eigen::Index a = 0; a < obs.rows(); ++a)
    for (Eigen::Index b = 0; b < obs.cols(); ++b)
      acc += c[a] * c[b] * obs(a, b) * std::cos((energies[a] - energies[b]) * t);
  return acc;
}

/// Transliteration of the neighbor-difference statistics with the window
/// count (not the pair count) in the denominators.
struct NaiveDiagStats {
  double n_av, delta, sigma, delta_mc, sigma_mc, delta_max, delta_max_mc;
};

inline NaiveDiagStats naive_diag_stats(const std::vector<double>& diag,
                                       const std::vector<char>& in_window, double n_mc) {
  const std::size_t n = diag.size();
  double n_av = 0.0;
  for (double d : diag) n_av += d;
  n_av /= static_cast<double>(n);

  std::size_t nw = 0;
  for (char f : in_window) nw += f != 0;

  double sum = 0.0, dmax = 0.0;
  for (std::size_t a = 0; a + 1 < n; ++a) {
    const double d = std::abs(diag[a + 1] - diag[a]);
    sum += d;
    dmax = std::max(dmax, d);
  }
  const double delta = sum / static_cast<double>(n - 1) / n_av;
  double var = 0.0;
  for (std::size_t a = 0; a + 1 < n; ++a) {
    const double d = std::abs(diag[a + 1] - diag[a]) - n_av * delta;
    var += d * d;
  }
  const double sigma = std::sqrt(var / static_cast<double>(n - 2)) / n_av;

  double sum_mc = 0.0, dmax_mc = 0.0;
  for (std::size_t a = 0; a + 1 < n; ++a) {
    if (!(in_window[a] && in_window[a + 1])) continue;
    const double d = std::abs(diag[a + 1] - diag[a]);
    sum_mc += d;
    dmax_mc = std::max(dmax_mc, d);
  }
  const double delta_mc = sum_mc / static_cast<double>(nw - 1) / n_mc;
  double var_mc = 0.0;
  for (std::size_t a = 0; a + 1 < n; ++a) {
    if (!(in_window[a] && in_window[a + 1])) continue;
    const double d = std::abs(diag[a + 1] - diag[a]) - n_mc * delta_mc;
    var_mc += d * d;
  }
  const double sigma_mc = std::sqrt(var_mc / static_cast<double>(nw - 2)) / n_mc;

  return {n_av, delta, sigma, delta_mc, sigma_mc, dmax / n_av, dmax_mc / n_mc};
}

// --------------------------------------------------------------------------
// Statistics oracles
// --------------------------------------------------------------------------

/// Composite Simpson quadrature with a dense fixed grid.
inline double integrate(const std::function<double(double)>& f, double a, double b,
                        int panels = 200000) {
  const double h = (b - a) / (2.0 * panels);
  double odd = 0.0, even = 0.0;
  for (int i = 1; i < 2 * panels; i += 2) odd += f(a + i * h);
  for (int i = 2; i < 2 * panels; i += 2) even += f(a + i * h);
  return h / 3.0 * (f(a) + f(b) + 4.0 * odd + 2.0 * even);
}

/// Inverse-CDF samples from the GOE surmise.
inline std::vector<double> sample_goe_spacings(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> s(count);
  for (auto& v : s) v = std::sqrt(-4.0 * std::log1p(-u(gen)) / std::numbers::pi);
  return s;
}

/// Kolmogorov-Smirnov uniformity check on values in [0,1].
inline double ks_uniform_distance(std::vector<double> p) {
  std::sort(p.begin(), p.end());
  const double n = static_cast<double>(p.size());
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    d = std::max(d, std::abs((static_cast<double>(i) + 1.0) / n - p[i]));
    d = std::max(d, std::abs(p[i] - static_cast<double>(i) / n));
  }
  return d;
}

/// Asymptotic Kolmogorov critical value at level alpha.
inline double ks_critical(double alpha, std::size_t n) {
  return std::sqrt(-0.5 * std::log(alpha / 2.0)) / std::sqrt(static_cast<double>(n));
}

inline double kendall_tau_stat(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  long long diff = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double p = (x[i] - x[j]) * (y[i] - y[j]);
      if (p > 0) ++diff;
      if (p < 0) --diff;
    }
  return static_cast<double>(diff) / (0.5 * n * (n - 1));
}

inline double spearman_rho_stat(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  auto rank_of = [&](const std::vector<double>& v) {
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (v[j] < v[i]) r[i] += 1.0;
    return r;
  };
  const auto rx = rank_of(x), ry = rank_of(y);
  double d2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
  const double dn = static_cast<double>(n);
  return 1.0 - 6.0 * d2 / (dn * (dn * dn - 1.0));
}

/// Exact two-sided permutation p-value over all n! pairings (tie-free data).
inline double exact_permutation_p(const std::vector<double>& x, const std::vector<double>& y,
                                  const std::function<double(const std::vector<double>&,
                                                             const std::vector<double>&)>& stat) {
  const double observed = std::abs(stat(x, y));
  std::vector<double> yp(y);
  std::sort(yp.begin(), yp.end());
  long long total = 0, at_least = 0;
  do {
    ++total;
    if (std::abs(stat(x, yp)) >= observed - 1e-12) ++at_least;
  } while (std::next_permutation(yp.begin(), yp.end()));
  return static_cast<double>(at_least) / static_cast<double>(total);
}

/// Monte-Carlo two-sided permutation p-value for larger samples.
inline double shuffled_permutation_p(const std::vector<double>& x, const std::vector<double>& y,
                                     std::size_t replicates, std::uint64_t seed,
                                     const std::function<double(const std::vector<double>&,
                                                                const std::vector<double>&)>& stat) {
  const double observed = std::abs(stat(x, y));
  std::vector<double> yp(y);
  std::mt19937_64 gen(seed);
  std::size_t at_least = 0;
  for (std::size_t r = 0; r < replicates; ++r) {
    std::shuffle(yp.begin(), yp.end(), gen);
    if (std::abs(stat(x, yp)) >= observed - 1e-12) ++at_least;
  }
  return (1.0 + static_cast<double>(at_least)) / (1.0 + static_cast<double>(replicates));
}

/// Quarter-weighted O(n^2) Hoeffding D (handles ties).
inline double hoeffding_d_stat(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  auto phi = [](double a, double b) { return a < b ? 1.0 : (a == b ? 0.5 : 0.0); };
  std::vector<double> r(n), s(n), q(n);
  for (std::size_t i = 0; i < n; ++i) {
    r[i] = 1.0;
    s[i] = 1.0;
    q[i] = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      r[i] += phi(x[j], x[i]);
      s[i] += phi(y[j], y[i]);
      q[i] += phi(x[j], x[i]) * phi(y[j], y[i]);
    }
  }
  double d1 = 0.0, d2 = 0.0, d3 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    d1 += (q[i] - 1.0) * (q[i] - 2.0);
    d2 += (r[i] - 1.0) * (r[i] - 2.0) * (s[i] - 1.0) * (s[i] - 2.0);
    d3 += (r[i] - 2.0) * (s[i] - 2.0) * (q[i] - 1.0);
  }
  const double dn = static_cast<double>(n);
  return 30.0 * ((dn - 2.0) * (dn - 3.0) * d1 + d2 - 2.0 * (dn - 2.0) * d3) /
         (dn * (dn - 1.0) * (dn - 2.0) * (dn - 3.0) * (dn - 4.0));
}

}  // namespace oracle
