#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mbth/diagnostics.hpp"
#include "mbth/errors.hpp"

namespace mbth {

namespace detail {

inline double two_sided_normal_p(double z) { return std::erfc(std::abs(z) / std::numbers::sqrt2); }

/// Continued fraction for the regularized incomplete beta (Lentz).
inline double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 1e-15;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

inline double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

inline double student_t_two_sided(double t, double df) {
  if (!std::isfinite(t)) return 0.0;
  const double x = df / (df + t * t);
  return incomplete_beta(0.5 * df, 0.5, x);
}

/// Midranks (1-based, ties get the average rank).
inline std::vector<double> midranks(std::span<const double> v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = rank;
    i = j + 1;
  }
  return r;
}

/// Sizes of tie groups in v.
inline std::vector<std::size_t> tie_groups(std::span<const double> v) {
  std::vector<double> s(v.begin(), v.end());
  std::sort(s.begin(), s.end());
  std::vector<std::size_t> g;
  std::size_t i = 0;
  while (i < s.size()) {
    std::size_t j = i;
    while (j + 1 < s.size() && s[j + 1] == s[i]) ++j;
    if (j > i) g.push_back(j - i + 1);
    i = j + 1;
  }
  return g;
}

/// Per-point concordant/discordant pair counts over all ordered pairs.
struct Concordance {
  std::vector<std::int64_t> conc;
  std::vector<std::int64_t> disc;
  std::int64_t total_conc = 0;  // ordered pairs; unordered count is half
  std::int64_t total_disc = 0;
};

inline Concordance concordance_counts(std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<std::int64_t>(x.size());
  Concordance out;
  out.conc.assign(n, 0);
  out.disc.assign(n, 0);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    std::int64_t c = 0, d = 0;
    for (std::int64_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double dx = x[i] - x[j];
      const double dy = y[i] - y[j];
      const double prod = dx * dy;
      if (prod > 0.0)
        ++c;
      else if (prod < 0.0)
        ++d;
    }
    out.conc[i] = c;
    out.disc[i] = d;
  }
  for (std::int64_t i = 0; i < n; ++i) {
    out.total_conc += out.conc[i];
    out.total_disc += out.disc[i];
  }
  return out;
}

}  // namespace detail

enum class PValueMethod { Asymptotic, Permutation };

/// Outcome of one independence test on a paired sample.
struct TestResult {
  std::string name;
  double statistic = std::numeric_limits<double>::quiet_NaN();
  double p_value = std::numeric_limits<double>::quiet_NaN();
  PValueMethod method = PValueMethod::Asymptotic;
  std::size_t sample_size = 0;
  std::uint64_t seed = 0;       // permutation only
  std::size_t replicates = 0;   // permutation only
  std::size_t dropped = 0;      // points discarded by a tie convention
  std::string error;            // non-empty when the test was degenerate
};

struct PermutationOptions {
  std::size_t replicates = 10000;
  std::uint64_t seed = 20240901;
};

/// Quadrant (median) test. Points exactly on either median are dropped.
inline TestResult blomqvist_beta(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n < 4 || y.size() != n)
    throw InvalidParameterError("blomqvist_beta: need paired samples of size >= 4");

  auto median = [](std::span<const double> v) {
    std::vector<double> s(v.begin(), v.end());
    std::sort(s.begin(), s.end());
    const std::size_t m = s.size();
    return m % 2 == 1 ? s[m / 2] : 0.5 * (s[m / 2 - 1] + s[m / 2]);
  };
  const double mx = median(x), my = median(y);

  std::int64_t agree = 0, disagree = 0;
  std::size_t dropped = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    if (dx == 0.0 || dy == 0.0) {
      ++dropped;
      continue;
    }
    if ((dx > 0.0) == (dy > 0.0))
      ++agree;
    else
      ++disagree;
  }
  const std::int64_t m = agree + disagree;
  if (m == 0) throw DegenerateInputError("blomqvist_beta: all points on a median");

  TestResult r;
  r.name = "blomqvist_beta";
  r.sample_size = n;
  r.dropped = dropped;
  r.statistic = static_cast<double>(agree - disagree) / static_cast<double>(m);
  r.p_value = detail::two_sided_normal_p(std::sqrt(static_cast<double>(m)) * r.statistic);
  return r;
}

/// Kendall tau-b with tie correction; normal approximation with
/// tie-adjusted variance of C - D.
inline TestResult kendall_tau(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n < 4 || y.size() != n)
    throw InvalidParameterError("kendall_tau: need paired samples of size >= 4");

  const detail::Concordance cd = detail::concordance_counts(x, y);
  const double diff = 0.5 * static_cast<double>(cd.total_conc - cd.total_disc);  // C - D

  const double dn = static_cast<double>(n);
  const double n0 = 0.5 * dn * (dn - 1.0);
  double n1 = 0.0, n2 = 0.0, vt = 0.0, vu = 0.0, t1 = 0.0, t2 = 0.0, u1 = 0.0, u2 = 0.0;
  for (const std::size_t t : detail::tie_groups(x)) {
    const double td = static_cast<double>(t);
    n1 += 0.5 * td * (td - 1.0);
    vt += td * (td - 1.0) * (2.0 * td + 5.0);
    t1 += td * (td - 1.0);
    t2 += td * (td - 1.0) * (td - 2.0);
  }
  for (const std::size_t u : detail::tie_groups(y)) {
    const double ud = static_cast<double>(u);
    n2 += 0.5 * ud * (ud - 1.0);
    vu += ud * (ud - 1.0) * (2.0 * ud + 5.0);
    u1 += ud * (ud - 1.0);
    u2 += ud * (ud - 1.0) * (ud - 2.0);
  }
  const double denom = std::sqrt((n0 - n1) * (n0 - n2));
  if (!(denom > 0.0)) throw DegenerateInputError("kendall_tau: constant input");

  TestResult r;
  r.name = "kendall_tau";
  r.sample_size = n;
  r.statistic = diff / denom;
  const double var = (dn * (dn - 1.0) * (2.0 * dn + 5.0) - vt - vu) / 18.0 +
                     t1 * u1 / (2.0 * dn * (dn - 1.0)) +
                     t2 * u2 / (9.0 * dn * (dn - 1.0) * (dn - 2.0));
  r.p_value = var > 0.0 ? detail::two_sided_normal_p(diff / std::sqrt(var)) : 0.0;
  return r;
}

/// Spearman rank correlation on midranks; t approximation with n-2 dof.
inline TestResult spearman_rank(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n < 4 || y.size() != n)
    throw InvalidParameterError("spearman_rank: need paired samples of size >= 4");

  const std::vector<double> rx = detail::midranks(x);
  const std::vector<double> ry = detail::midranks(y);
  const double mean = 0.5 * (static_cast<double>(n) + 1.0);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = rx[i] - mean, b = ry[i] - mean;
    sxx += a * a;
    syy += b * b;
    sxy += a * b;
  }
  if (!(sxx > 0.0) || !(syy > 0.0))
    throw DegenerateInputError("spearman_rank: constant input");

  TestResult r;
  r.name = "spearman_rho";
  r.sample_size = n;
  r.statistic = sxy / std::sqrt(sxx * syy);
  const double rho = std::clamp(r.statistic, -1.0, 1.0);
  if (std::abs(rho) >= 1.0) {
    r.p_value = 0.0;
  } else {
    const double t = rho * std::sqrt((static_cast<double>(n) - 2.0) / (1.0 - rho * rho));
    r.p_value = detail::student_t_two_sided(t, static_cast<double>(n) - 2.0);
  }
  return r;
}

/// Goodman-Kruskal gamma with the asymptotic null variance.
inline TestResult goodman_kruskal_gamma(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n < 4 || y.size() != n)
    throw InvalidParameterError("goodman_kruskal_gamma: need paired samples of size >= 4");

  const detail::Concordance cd = detail::concordance_counts(x, y);
  const double p = static_cast<double>(cd.total_conc);  // ordered concordant pairs
  const double q = static_cast<double>(cd.total_disc);
  if (p + q == 0.0)
    throw DegenerateInputError("goodman_kruskal_gamma: no concordant or discordant pairs");

  TestResult r;
  r.name = "goodman_kruskal_gamma";
  r.sample_size = n;
  r.statistic = (p - q) / (p + q);
  double ssq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(cd.conc[i] - cd.disc[i]);
    ssq += d * d;
  }
  const double var_core = ssq - (p - q) * (p - q) / static_cast<double>(n);
  if (var_core > 0.0) {
    const double z = (p - q) / (2.0 * std::sqrt(var_core));
    r.p_value = detail::two_sided_normal_p(z);
  } else {
    r.p_value = r.statistic == 0.0 ? 1.0 : 0.0;
  }
  return r;
}

namespace detail {

/// Hoeffding's D from midranks and bivariate ranks.
/// Fast O(n log n) path when both margins are tie-free, else the exact
/// quarter-weighted O(n^2) form.
inline double hoeffding_d_statistic(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  const std::vector<double> rx = midranks(x);
  const std::vector<double> ry = midranks(y);

  std::vector<double> q(n, 0.0);
  const bool ties = !tie_groups(x).empty() || !tie_groups(y).empty();
  if (!ties) {
    // Count points below-left of each point with a Fenwick tree over y-ranks.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return rx[a] < rx[b]; });
    std::vector<std::int64_t> fen(n + 1, 0);
    auto update = [&](std::size_t pos) {
      for (std::size_t i = pos; i <= n; i += i & (~i + 1)) ++fen[i];
    };
    auto query = [&](std::size_t pos) {
      std::int64_t s = 0;
      for (std::size_t i = pos; i > 0; i -= i & (~i + 1)) s += fen[i];
      return s;
    };
    for (const std::size_t i : order) {
      const auto yr = static_cast<std::size_t>(ry[i]);
      q[i] = 1.0 + static_cast<double>(query(yr - 1));
      update(yr);
    }
  } else {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == static_cast<std::size_t>(i)) continue;
        const double phix = x[j] < x[i] ? 1.0 : (x[j] == x[i] ? 0.5 : 0.0);
        const double phiy = y[j] < y[i] ? 1.0 : (y[j] == y[i] ? 0.5 : 0.0);
        acc += phix * phiy;
      }
      q[i] = 1.0 + acc;
    }
  }

  double d1 = 0.0, d2 = 0.0, d3 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    d1 += (q[i] - 1.0) * (q[i] - 2.0);
    d2 += (rx[i] - 1.0) * (rx[i] - 2.0) * (ry[i] - 1.0) * (ry[i] - 2.0);
    d3 += (rx[i] - 2.0) * (ry[i] - 2.0) * (q[i] - 1.0);
  }
  const double dn = static_cast<double>(n);
  return 30.0 * ((dn - 2.0) * (dn - 3.0) * d1 + d2 - 2.0 * (dn - 2.0) * d3) /
         (dn * (dn - 1.0) * (dn - 2.0) * (dn - 3.0) * (dn - 4.0));
}

}  // namespace detail

/// Hoeffding's D with a permutation p-value (one-sided, large D rejects).
inline TestResult hoeffding_d(std::span<const double> x, std::span<const double> y,
                              const PermutationOptions& opts = {}) {
  const std::size_t n = x.size();
  if (n < 5 || y.size() != n)
    throw InvalidParameterError("hoeffding_d: statistic undefined for n < 5");

  TestResult r;
  r.name = "hoeffding_d";
  r.sample_size = n;
  r.method = PValueMethod::Permutation;
  r.seed = opts.seed;
  r.replicates = opts.replicates;
  r.statistic = detail::hoeffding_d_statistic(x, y);

  std::int64_t at_least = 0;
#pragma omp parallel for schedule(static) reduction(+ : at_least)
  for (std::int64_t rep = 0; rep < static_cast<std::int64_t>(opts.replicates); ++rep) {
    std::mt19937_64 gen(opts.seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(rep + 1));
    std::vector<double> yp(y.begin(), y.end());
    for (std::size_t i = n - 1; i > 0; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i);
      std::swap(yp[i], yp[pick(gen)]);
    }
    if (detail::hoeffding_d_statistic(x, yp) >= r.statistic) ++at_least;
  }
  r.p_value = (1.0 + static_cast<double>(at_least)) / (1.0 + static_cast<double>(opts.replicates));
  return r;
}

/// All five tests on a paired sample; degenerate tests are recorded in the
/// result list instead of aborting the batch.
inline std::vector<TestResult> run_all_tests(std::span<const double> x, std::span<const double> y,
                                             const PermutationOptions& opts = {}) {
  if (x.size() < 5 || y.size() != x.size())
    throw InvalidParameterError("run_all_tests: need paired series of length >= 5");

  std::vector<TestResult> out;
  auto guard = [&](const char* name, auto&& fn) {
    try {
      out.push_back(fn());
    } catch (const DegenerateInputError& e) {
      TestResult r;
      r.name = name;
      r.sample_size = x.size();
      r.error = e.what();
      out.push_back(std::move(r));
    }
  };
  guard("blomqvist_beta", [&] { return blomqvist_beta(x, y); });
  guard("goodman_kruskal_gamma", [&] { return goodman_kruskal_gamma(x, y); });
  guard("hoeffding_d", [&] { return hoeffding_d(x, y, opts); });
  guard("kendall_tau", [&] { return kendall_tau(x, y); });
  guard("spearman_rho", [&] { return spearman_rank(x, y); });
  return out;
}

/// The paper-facing entry point: tests the paired normalized fluctuations.
inline std::vector<TestResult> run_all_tests(const DiagnosticsReport& report,
                                             const PermutationOptions& opts = {}) {
  return run_all_tests(
      std::span<const double>(report.delta_diag_series.data(),
                              static_cast<std::size_t>(report.delta_diag_series.size())),
      std::span<const double>(report.delta_weight_series.data(),
                              static_cast<std::size_t>(report.delta_weight_series.size())),
      opts);
}

}  // namespace mbth
