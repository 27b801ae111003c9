#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "mbth/diagnostics.hpp"
#include "mbth/errors.hpp"

namespace mbth {

/// The four model families fitted over the system-size series.
enum class FitFamily {
  ExpOffset,      // a + b exp(c N)
  PowerOffset,    // a + b N^c
  InverseN,       // a + b / N
  InverseSqrtN,   // a + b / sqrt(N)
};

struct FitModel {
  FitFamily family = FitFamily::ExpOffset;

  int param_count() const {
    return family == FitFamily::ExpOffset || family == FitFamily::PowerOffset ? 3 : 2;
  }
  bool nonlinear() const { return param_count() == 3; }

  // Basis function multiplying b, and its derivative in c.
  double basis(double n, double c) const {
    switch (family) {
      case FitFamily::ExpOffset: return std::exp(c * n);
      case FitFamily::PowerOffset: return std::pow(n, c);
      case FitFamily::InverseN: return 1.0 / n;
      case FitFamily::InverseSqrtN: return 1.0 / std::sqrt(n);
    }
    return 0.0;
  }
  double basis_dc(double n, double c) const {
    switch (family) {
      case FitFamily::ExpOffset: return n * std::exp(c * n);
      case FitFamily::PowerOffset: return std::pow(n, c) * std::log(n);
      default: return 0.0;
    }
  }
  double eval(double n, double a, double b, double c) const { return a + b * basis(n, c); }

  std::string formula() const {
    switch (family) {
      case FitFamily::ExpOffset: return "a+b*exp(c*N)";
      case FitFamily::PowerOffset: return "a+b*N^c";
      case FitFamily::InverseN: return "a+b/N";
      case FitFamily::InverseSqrtN: return "a+b/sqrt(N)";
    }
    return "";
  }
};

/// Estimates, errors and goodness of fit for one model over one series.
struct FitResult {
  double a = std::numeric_limits<double>::quiet_NaN();
  double b = std::numeric_limits<double>::quiet_NaN();
  double c = std::numeric_limits<double>::quiet_NaN();
  double sigma_a = std::numeric_limits<double>::quiet_NaN();
  double sigma_b = std::numeric_limits<double>::quiet_NaN();
  double sigma_c = std::numeric_limits<double>::quiet_NaN();
  double adjusted_r2 = std::numeric_limits<double>::quiet_NaN();
  double rmse = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
  int iterations = 0;
  std::vector<char> mask;   // include flag per input point, recorded verbatim
  std::vector<double> weights_used;
  std::string note;         // singular normal matrix, non-convergence, ...
};

namespace detail {

struct FitPoint {
  double n, y, w;
};

inline double weighted_ssr(const FitModel& model, const std::vector<FitPoint>& pts, double a,
                           double b, double c) {
  double s = 0.0;
  for (const auto& p : pts) {
    const double r = p.y - model.eval(p.n, a, b, c);
    s += p.w * r * r;
  }
  return s;
}

/// Weighted linear solve for (a, b) at fixed basis values; false if singular.
inline bool profile_linear(const FitModel& model, const std::vector<FitPoint>& pts, double c,
                           double& a, double& b) {
  double s11 = 0.0, s1g = 0.0, sgg = 0.0, s1y = 0.0, sgy = 0.0;
  for (const auto& p : pts) {
    const double g = model.basis(p.n, c);
    s11 += p.w;
    s1g += p.w * g;
    sgg += p.w * g * g;
    s1y += p.w * p.y;
    sgy += p.w * g * p.y;
  }
  const double det = s11 * sgg - s1g * s1g;
  if (!(std::abs(det) > 1e-14 * std::max(1.0, s11 * sgg))) return false;
  a = (sgg * s1y - s1g * sgy) / det;
  b = (s11 * sgy - s1g * s1y) / det;
  return std::isfinite(a) && std::isfinite(b);
}

}  // namespace detail

/// Weighted least squares of one family over (N_j, y_j, w_j).
///
/// Fixed-exponent families solve the normal equations directly. The
/// three-parameter families run damped Gauss-Newton from a grid of starting
/// exponents c in {-3, -2.5, ..., 3}, profiling (a, b) linearly at each
/// start, and keep the lowest final cost.
inline FitResult fit(const FitModel& model, std::span<const double> n, std::span<const double> y,
                     std::span<const double> w, std::span<const char> include) {
  const std::size_t total = n.size();
  if (y.size() != total || w.size() != total || include.size() != total)
    throw FitError("fit: input arrays must have equal length");

  std::vector<detail::FitPoint> pts;
  for (std::size_t j = 0; j < total; ++j) {
    if (!include[j]) continue;
    if (!(w[j] > 0.0)) throw FitError("fit: weights must be positive");
    pts.push_back({n[j], y[j], w[j]});
  }
  const int k = model.param_count();
  if (pts.size() <= static_cast<std::size_t>(k))
    throw FitError("fit: need more unmasked points than free parameters");
  std::sort(pts.begin(), pts.end(), [](const auto& l, const auto& r) {
    return l.n != r.n ? l.n < r.n : (l.y != r.y ? l.y < r.y : l.w < r.w);
  });

  FitResult out;
  out.mask.assign(include.begin(), include.end());
  for (const auto& p : pts) out.weights_used.push_back(p.w);

  double best_a = 0.0, best_b = 0.0, best_c = 0.0;
  double best_cost = std::numeric_limits<double>::infinity();
  bool best_converged = false;
  int best_iters = 0;

  if (!model.nonlinear()) {
    double a = 0.0, b = 0.0;
    if (!detail::profile_linear(model, pts, 0.0, a, b)) {
      out.note = "singular normal matrix";
      return out;
    }
    best_a = a;
    best_b = b;
    best_cost = detail::weighted_ssr(model, pts, a, b, 0.0);
    best_converged = true;
  } else {
    constexpr int kMaxIter = 500;
    for (double c0 = -3.0; c0 <= 3.0 + 1e-9; c0 += 0.5) {
      double a = 0.0, b = 0.0, c = c0;
      if (!detail::profile_linear(model, pts, c, a, b)) continue;

      double cost = detail::weighted_ssr(model, pts, a, b, c);
      double lambda = 1e-3;
      bool converged = false;
      int iter = 0;
      for (; iter < kMaxIter; ++iter) {
        Eigen::Matrix3d jtj = Eigen::Matrix3d::Zero();
        Eigen::Vector3d jtr = Eigen::Vector3d::Zero();
        for (const auto& p : pts) {
          const double g = model.basis(p.n, c);
          const double r = p.y - (a + b * g);
          Eigen::Vector3d jrow(1.0, g, b * model.basis_dc(p.n, c));
          jtj += p.w * jrow * jrow.transpose();
          jtr += p.w * jrow * r;
        }
        Eigen::Matrix3d damped = jtj;
        for (int d = 0; d < 3; ++d) damped(d, d) *= 1.0 + lambda;
        const Eigen::Vector3d step = damped.fullPivLu().solve(jtr);
        if (!step.allFinite()) break;

        const double na = a + step[0], nb = b + step[1], nc = c + step[2];
        const double new_cost = detail::weighted_ssr(model, pts, na, nb, nc);
        if (new_cost <= cost) {
          const double rel_step =
              step.norm() / std::max(1e-12, Eigen::Vector3d(a, b, c).norm());
          const double rel_impr = (cost - new_cost) / std::max(cost, 1e-300);
          a = na;
          b = nb;
          c = nc;
          cost = new_cost;
          lambda = std::max(lambda * 0.3, 1e-12);
          if (rel_step < 1e-12 || rel_impr < 1e-14) {
            converged = true;
            break;
          }
        } else {
          lambda *= 10.0;
          if (lambda > 1e12) break;
        }
      }
      if (iter == kMaxIter) converged = false;

      const bool better = (converged && !best_converged) ||
                          (converged == best_converged && cost < best_cost);
      if (better) {
        best_a = a;
        best_b = b;
        best_c = c;
        best_cost = cost;
        best_converged = converged;
        best_iters = iter;
      }
    }
    if (!std::isfinite(best_cost)) {
      out.note = "singular normal matrix";
      return out;
    }
    if (!best_converged) out.note = "non-convergence: best-so-far reported";
  }

  out.a = best_a;
  out.b = best_b;
  out.c = model.nonlinear() ? best_c : std::numeric_limits<double>::quiet_NaN();
  out.converged = best_converged;
  out.iterations = best_iters;

  const auto npts = static_cast<double>(pts.size());
  const double dof = npts - k;
  out.rmse = std::sqrt(best_cost / dof);

  // Goodness of fit against the weighted mean.
  double wsum = 0.0, wy = 0.0;
  for (const auto& p : pts) {
    wsum += p.w;
    wy += p.w * p.y;
  }
  const double ybar = wy / wsum;
  double sst = 0.0;
  for (const auto& p : pts) sst += p.w * (p.y - ybar) * (p.y - ybar);
  if (sst > 0.0) {
    const double r2 = 1.0 - best_cost / sst;
    out.adjusted_r2 = 1.0 - (1.0 - r2) * (npts - 1.0) / dof;
  }

  // Standard errors from the scaled inverse normal-equations matrix.
  const int dim = k;
  const double c_hat = model.nonlinear() ? out.c : 0.0;
  Eigen::MatrixXd jtj = Eigen::MatrixXd::Zero(dim, dim);
  for (const auto& p : pts) {
    Eigen::VectorXd jrow(dim);
    jrow[0] = 1.0;
    jrow[1] = model.basis(p.n, c_hat);
    if (dim == 3) jrow[2] = out.b * model.basis_dc(p.n, c_hat);
    jtj += p.w * jrow * jrow.transpose();
  }
  const Eigen::MatrixXd cov_unscaled = jtj.fullPivLu().inverse();
  if (cov_unscaled.allFinite()) {
    const double s2 = best_cost / dof;
    out.sigma_a = std::sqrt(std::max(0.0, s2 * cov_unscaled(0, 0)));
    out.sigma_b = std::sqrt(std::max(0.0, s2 * cov_unscaled(1, 1)));
    if (dim == 3) out.sigma_c = std::sqrt(std::max(0.0, s2 * cov_unscaled(2, 2)));
  } else {
    out.note = out.note.empty() ? "singular normal matrix in error estimate" : out.note;
  }
  return out;
}

/// One row of the fitted-series summary.
struct FitRow {
  std::string quantity;
  FitModel model;
  bool starred = false;  // the fit displayed in the study output
  FitResult result;
  std::string mask_note;
  std::string weights_note;
  std::string error;  // per-row failure, batch continues
};

namespace detail {

enum class MaskKind { All, ExcludeN3, EvenOnly, OddOnly };

inline const char* mask_note(MaskKind m) {
  switch (m) {
    case MaskKind::All: return "all N";
    case MaskKind::ExcludeN3: return "exclude N=3";
    case MaskKind::EvenOnly: return "even N only";
    case MaskKind::OddOnly: return "odd N only";
  }
  return "";
}

}  // namespace detail

/// Fits every studied quantity over the per-N reports with the study's
/// masks: the N=3 outlier is excluded from the time-average fits, window
/// quantities use even N only, the diagonal average uses odd N, and the
/// neighbor-difference fits are weighted by their inverse variance.
inline std::vector<FitRow> fit_suite(const std::vector<DiagnosticsReport>& reports) {
  std::vector<FitRow> rows;

  auto add = [&](const std::string& quantity, FitFamily family, bool starred,
                 detail::MaskKind mask_kind, bool weighted,
                 auto&& value_of, auto&& weight_of) {
    FitRow row;
    row.quantity = quantity;
    row.model.family = family;
    row.starred = starred;
    row.mask_note = detail::mask_note(mask_kind);
    row.weights_note = weighted ? "1/sigma^2" : "unweighted";

    std::vector<double> n, y, w;
    std::vector<char> include;
    for (const auto& rep : reports) {
      const double value = value_of(rep);
      const double weight = weighted ? weight_of(rep) : 1.0;
      n.push_back(rep.n);
      y.push_back(value);
      w.push_back(std::isfinite(weight) && weight > 0.0 ? weight : 1.0);
      bool inc = std::isfinite(value);
      switch (mask_kind) {
        case detail::MaskKind::All: break;
        case detail::MaskKind::ExcludeN3: inc = inc && rep.n != 3; break;
        case detail::MaskKind::EvenOnly: inc = inc && rep.n % 2 == 0; break;
        case detail::MaskKind::OddOnly: inc = inc && rep.n % 2 == 1; break;
      }
      include.push_back(inc ? 1 : 0);
    }
    try {
      row.result = fit(row.model, n, y, w, include);
    } catch (const FitError& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  };

  const auto unit_weight = [](const DiagnosticsReport&) { return 1.0; };

  add("time_average", FitFamily::ExpOffset, true, detail::MaskKind::ExcludeN3, false,
      [](const auto& r) { return r.time_average; }, unit_weight);
  add("time_average", FitFamily::InverseSqrtN, false, detail::MaskKind::ExcludeN3, false,
      [](const auto& r) { return r.time_average; }, unit_weight);

  add("mc_average", FitFamily::ExpOffset, true, detail::MaskKind::EvenOnly, false,
      [](const auto& r) { return r.mc_average; }, unit_weight);
  add("mc_average", FitFamily::InverseN, false, detail::MaskKind::EvenOnly, false,
      [](const auto& r) { return r.mc_average; }, unit_weight);
  add("mc_average", FitFamily::InverseSqrtN, false, detail::MaskKind::EvenOnly, false,
      [](const auto& r) { return r.mc_average; }, unit_weight);

  add("temporal_sigma", FitFamily::ExpOffset, true, detail::MaskKind::All, false,
      [](const auto& r) { return r.temporal_sigma; }, unit_weight);

  add("energy_sigma_over_n", FitFamily::PowerOffset, true, detail::MaskKind::All, false,
      [](const auto& r) { return r.energy_sigma / r.n; }, unit_weight);

  add("window_count", FitFamily::ExpOffset, true, detail::MaskKind::All, false,
      [](const auto& r) { return static_cast<double>(r.window_count); }, unit_weight);
  add("window_count", FitFamily::PowerOffset, false, detail::MaskKind::All, false,
      [](const auto& r) { return static_cast<double>(r.window_count); }, unit_weight);

  add("diag_average", FitFamily::InverseN, true, detail::MaskKind::OddOnly, false,
      [](const auto& r) { return r.diag_average; }, unit_weight);

  add("delta", FitFamily::ExpOffset, true, detail::MaskKind::EvenOnly, true,
      [](const auto& r) { return r.delta; },
      [](const auto& r) { return 1.0 / (r.sigma * r.sigma); });

  add("delta_mc", FitFamily::ExpOffset, true, detail::MaskKind::EvenOnly, true,
      [](const auto& r) { return r.delta_mc; },
      [](const auto& r) { return 1.0 / (r.sigma_mc * r.sigma_mc); });

  add("delta_max_mc", FitFamily::PowerOffset, true, detail::MaskKind::EvenOnly, false,
      [](const auto& r) { return r.delta_max_mc; }, unit_weight);
  add("delta_max_mc", FitFamily::ExpOffset, false, detail::MaskKind::EvenOnly, false,
      [](const auto& r) { return r.delta_max_mc; }, unit_weight);

  add("offdiag_abs_av", FitFamily::ExpOffset, true, detail::MaskKind::All, false,
      [](const auto& r) { return r.offdiag_abs_av; }, unit_weight);

  return rows;
}

}  // namespace mbth
