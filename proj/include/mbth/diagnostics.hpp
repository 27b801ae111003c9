#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <span>
#include <vector>

#include "mbth/errors.hpp"
#include "mbth/fock.hpp"
#include "mbth/model.hpp"
#include "mbth/spectrum.hpp"

namespace mbth {

namespace detail {

/// Compensated (Kahan) accumulator for the long spectral sums.
struct KahanSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double x) {
    const double y = x - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
  double value() const { return sum; }
};

}  // namespace detail

/// Overlap of the initial state with every eigenstate, C_alpha = <alpha|in>.
struct CoefficientVector {
  Eigen::VectorXd c;
  Eigen::VectorXd weights;  // C_alpha^2
};

inline CoefficientVector coefficients(const Spectrum& s, const Eigen::VectorXd& in_vec) {
  CoefficientVector out;
  out.c = s.vectors.transpose() * in_vec;
  out.weights = out.c.array().square();
  return out;
}

/// A single-mode occupation observable expressed in the eigenbasis.
///
/// Only the diagonal is materialized. Off-diagonal elements are produced in
/// column blocks: n_{i,ab} = sum over occupied Fock rows of v_{s,a} v_{s,b},
/// so a block is a thin gather followed by one dense product.
class EigenbasisObservable {
 public:
  EigenbasisObservable(const Spectrum& s, const SectorBasis& basis, int mode_index)
      : spectrum_(&s), mode_index_(mode_index) {
    if (mode_index < 1 || mode_index > 2 * basis.modes_per_sector())
      throw InvalidParameterError("EigenbasisObservable: mode index out of range");
    const std::size_t dim = basis.size();
    for (std::size_t j = 0; j < dim; ++j)
      if (basis.memory_bit(j, mode_index)) occupied_rows_.push_back(static_cast<std::uint32_t>(j));

    const Eigen::Index n = s.vectors.cols();
    diag_.resize(n);
#pragma omp parallel for schedule(static)
    for (Eigen::Index a = 0; a < n; ++a) {
      double acc = 0.0;
      for (const std::uint32_t r : occupied_rows_) {
        const double v = s.vectors(r, a);
        acc += v * v;
      }
      diag_[a] = acc;
    }
  }

  int mode_index() const { return mode_index_; }
  const Spectrum& spectrum() const { return *spectrum_; }
  const Eigen::VectorXd& diag() const { return diag_; }
  std::size_t dim() const { return spectrum_->dim(); }
  const std::vector<std::uint32_t>& occupied_rows() const { return occupied_rows_; }

  /// Rows [a0, a0+an) of the eigenvector matrix restricted to occupied Fock
  /// states; building block for all off-diagonal sweeps.
  Eigen::MatrixXd gather(Eigen::Index a0, Eigen::Index an) const {
    const auto occ = static_cast<Eigen::Index>(occupied_rows_.size());
    Eigen::MatrixXd b(occ, an);
#pragma omp parallel for schedule(static)
    for (Eigen::Index j = 0; j < an; ++j)
      for (Eigen::Index r = 0; r < occ; ++r) b(r, j) = spectrum_->vectors(occupied_rows_[r], a0 + j);
    return b;
  }

  /// Dense block n_{i, [a0,a0+an) x [b0,b0+bn)}.
  Eigen::MatrixXd block(Eigen::Index a0, Eigen::Index b0, Eigen::Index an, Eigen::Index bn) const {
    return gather(a0, an).transpose() * gather(b0, bn);
  }

 private:
  const Spectrum* spectrum_;
  int mode_index_;
  std::vector<std::uint32_t> occupied_rows_;
  Eigen::VectorXd diag_;
};

inline EigenbasisObservable observable_matrix(const Spectrum& s, const SectorBasis& basis,
                                              int mode_index) {
  return EigenbasisObservable(s, basis, mode_index);
}

/// Diagonal-ensemble (infinite-time) average of the observable.
inline double infinite_time_average(const CoefficientVector& c, const EigenbasisObservable& o) {
  if (!o.spectrum().nondegeneracy_checked())
    std::cerr << "mbth: warning: infinite-time average on a spectrum whose "
                 "non-degeneracy has not been checked\n";
  detail::KahanSum acc;
  for (Eigen::Index a = 0; a < c.weights.size(); ++a) acc.add(c.weights[a] * o.diag()[a]);
  return acc.value();
}

/// Sums over all off-diagonal eigenbasis elements, one blocked sweep.
struct OffdiagAccumulation {
  double weighted_sq_sum = 0.0;  // sum C_a^2 C_b^2 n_ab^2
  double abs_sum = 0.0;          // sum |n_ab|
  double sq_sum = 0.0;           // sum n_ab^2
};

inline OffdiagAccumulation accumulate_offdiag(const EigenbasisObservable& o,
                                              const Eigen::VectorXd* weights,
                                              Eigen::Index block_size = 2048) {
  const auto n = static_cast<Eigen::Index>(o.dim());
  detail::KahanSum wsq, abs_acc, sq_acc;
  Eigen::MatrixXd bi, bj, m;
  for (Eigen::Index i0 = 0; i0 < n; i0 += block_size) {
    const Eigen::Index in_ = std::min(block_size, n - i0);
    bi = o.gather(i0, in_);
    for (Eigen::Index j0 = i0; j0 < n; j0 += block_size) {
      const Eigen::Index jn = std::min(block_size, n - j0);
      if (j0 == i0) {
        m.noalias() = bi.transpose() * bi;
        for (Eigen::Index r = 0; r < in_; ++r)
          for (Eigen::Index c = 0; c < in_; ++c) {
            if (r == c) continue;
            const double v = m(r, c);
            abs_acc.add(std::abs(v));
            sq_acc.add(v * v);
            if (weights) wsq.add((*weights)[i0 + r] * (*weights)[j0 + c] * v * v);
          }
      } else {
        bj = o.gather(j0, jn);
        m.noalias() = bi.transpose() * bj;
        for (Eigen::Index r = 0; r < in_; ++r)
          for (Eigen::Index c = 0; c < jn; ++c) {
            const double v = m(r, c);
            abs_acc.add(2.0 * std::abs(v));
            sq_acc.add(2.0 * v * v);
            if (weights) wsq.add(2.0 * (*weights)[i0 + r] * (*weights)[j0 + c] * v * v);
          }
      }
    }
  }
  return OffdiagAccumulation{wsq.value(), abs_acc.value(), sq_acc.value()};
}

/// Root-mean-square of the infinite-time temporal fluctuations about the
/// diagonal-ensemble average.
inline double temporal_fluctuation(const CoefficientVector& c, const EigenbasisObservable& o,
                                   Eigen::Index block_size = 2048) {
  return std::sqrt(accumulate_offdiag(o, &c.weights, block_size).weighted_sq_sum);
}

/// Mean absolute off-diagonal element, sum |n_ab| / (N (N-1)).
inline double offdiag_abs_average(const EigenbasisObservable& o, Eigen::Index block_size = 2048) {
  const double n = static_cast<double>(o.dim());
  return accumulate_offdiag(o, nullptr, block_size).abs_sum / (n * (n - 1.0));
}

/// Expectation value of the observable at time t (real spectral form).
inline double expectation_t(const CoefficientVector& c, const EigenbasisObservable& o,
                            const Spectrum& s, double t) {
  const Eigen::Index n = s.energies.size();
  Eigen::VectorXd xc(n), xs(n);
  for (Eigen::Index a = 0; a < n; ++a) {
    xc[a] = c.c[a] * std::cos(s.energies[a] * t);
    xs[a] = c.c[a] * std::sin(s.energies[a] * t);
  }
  const auto occ = static_cast<Eigen::Index>(o.occupied_rows().size());
  Eigen::VectorXd yc = Eigen::VectorXd::Zero(occ), ys = Eigen::VectorXd::Zero(occ);
  const Eigen::Index block = 4096;
  for (Eigen::Index a0 = 0; a0 < n; a0 += block) {
    const Eigen::Index an = std::min(block, n - a0);
    const Eigen::MatrixXd b = o.gather(a0, an);
    yc.noalias() += b * xc.segment(a0, an);
    ys.noalias() += b * xs.segment(a0, an);
  }
  return yc.squaredNorm() + ys.squaredNorm();
}

/// Expectation values over a grid of times; same contraction as
/// expectation_t but batched through dense products.
inline Eigen::VectorXd expectation_series(const CoefficientVector& c, const EigenbasisObservable& o,
                                          const Spectrum& s, const Eigen::VectorXd& times,
                                          Eigen::Index time_batch = 256) {
  const Eigen::Index n = s.energies.size();
  const auto occ = static_cast<Eigen::Index>(o.occupied_rows().size());
  const Eigen::Index nt = times.size();
  Eigen::VectorXd out(nt);
  const Eigen::Index col_block = 4096;
  Eigen::MatrixXd xc, xs, yc, ys;
  for (Eigen::Index t0 = 0; t0 < nt; t0 += time_batch) {
    const Eigen::Index tn = std::min(time_batch, nt - t0);
    xc.resize(n, tn);
    xs.resize(n, tn);
#pragma omp parallel for schedule(static)
    for (Eigen::Index tau = 0; tau < tn; ++tau) {
      const double t = times[t0 + tau];
      for (Eigen::Index a = 0; a < n; ++a) {
        const double phase = s.energies[a] * t;
        xc(a, tau) = c.c[a] * std::cos(phase);
        xs(a, tau) = c.c[a] * std::sin(phase);
      }
    }
    yc = Eigen::MatrixXd::Zero(occ, tn);
    ys = Eigen::MatrixXd::Zero(occ, tn);
    for (Eigen::Index a0 = 0; a0 < n; a0 += col_block) {
      const Eigen::Index an = std::min(col_block, n - a0);
      const Eigen::MatrixXd b = o.gather(a0, an);
      yc.noalias() += b * xc.middleRows(a0, an);
      ys.noalias() += b * xs.middleRows(a0, an);
    }
    for (Eigen::Index tau = 0; tau < tn; ++tau)
      out[t0 + tau] = yc.col(tau).squaredNorm() + ys.col(tau).squaredNorm();
  }
  return out;
}

/// Weighted spectral mean and quantum energy uncertainty, centered form.
struct EnergyStats {
  double mean = 0.0;     // weighted energy
  double sigma_q = 0.0;  // sqrt(sum w (E - mean)^2)
};

inline EnergyStats energy_stats(const CoefficientVector& c, const Spectrum& s) {
  detail::KahanSum mean_acc;
  for (Eigen::Index a = 0; a < s.energies.size(); ++a)
    mean_acc.add(c.weights[a] * s.energies[a]);
  const double mean = mean_acc.value();
  detail::KahanSum var_acc;
  for (Eigen::Index a = 0; a < s.energies.size(); ++a) {
    const double d = s.energies[a] - mean;
    var_acc.add(c.weights[a] * d * d);
  }
  return EnergyStats{mean, std::sqrt(var_acc.value())};
}

namespace detail {

/// Strict membership in the open window (e_bar - halfwidth, e_bar + halfwidth).
inline std::vector<char> window_flags(const Eigen::VectorXd& energies, double e_bar,
                                      double halfwidth) {
  std::vector<char> flags(static_cast<std::size_t>(energies.size()), 0);
  for (Eigen::Index a = 0; a < energies.size(); ++a)
    flags[static_cast<std::size_t>(a)] = std::abs(e_bar - energies[a]) < halfwidth ? 1 : 0;
  return flags;
}

}  // namespace detail

/// Unweighted eigenstate average inside the energy window.
struct MicrocanonicalResult {
  double average = 0.0;  // n_{i,mc}
  std::size_t count = 0;
  std::vector<char> in_window;
};

inline MicrocanonicalResult microcanonical(const Spectrum& s, const EigenbasisObservable& o,
                                           double e_bar, double halfwidth) {
  if (!(halfwidth > 0.0))
    throw InvalidParameterError("microcanonical: halfwidth must be positive");
  MicrocanonicalResult out;
  out.in_window = detail::window_flags(s.energies, e_bar, halfwidth);
  detail::KahanSum acc;
  for (Eigen::Index a = 0; a < s.energies.size(); ++a) {
    if (!out.in_window[static_cast<std::size_t>(a)]) continue;
    acc.add(o.diag()[a]);
    ++out.count;
  }
  if (out.count == 0) throw EmptyWindowError("microcanonical: no eigenvalue inside the window");
  out.average = acc.value() / static_cast<double>(out.count);
  return out;
}

/// The neighbor-difference statistics of the diagonal elements, global and
/// restricted to the energy window. Window quantities are flagged absent
/// when fewer than two in-window neighbor pairs exist.
struct DiagStatistics {
  double diag_average = 0.0;  // n_{i,av}
  double delta = 0.0;
  double sigma = 0.0;
  double delta_mc = std::numeric_limits<double>::quiet_NaN();
  double sigma_mc = std::numeric_limits<double>::quiet_NaN();
  double delta_max = 0.0;
  double delta_max_mc = std::numeric_limits<double>::quiet_NaN();
  bool mc_available = false;
  std::size_t window_pairs = 0;
};

inline DiagStatistics diag_statistics(std::span<const double> diag,
                                      std::span<const char> in_window, double n_mc) {
  const std::size_t n = diag.size();
  if (n < 2) throw InvalidParameterError("diag_statistics: need at least two levels");

  DiagStatistics out;
  detail::KahanSum av;
  for (double d : diag) av.add(d);
  out.diag_average = av.value() / static_cast<double>(n);

  detail::KahanSum dsum, dsum_mc;
  double dmax = 0.0, dmax_mc = 0.0;
  std::size_t pairs_mc = 0;
  for (std::size_t a = 0; a + 1 < n; ++a) {
    const double d = std::abs(diag[a + 1] - diag[a]);
    dsum.add(d);
    if (d > dmax) dmax = d;
    if (in_window[a] && in_window[a + 1]) {
      dsum_mc.add(d);
      if (d > dmax_mc) dmax_mc = d;
      ++pairs_mc;
    }
  }
  out.window_pairs = pairs_mc;

  const double mean_abs = dsum.value() / static_cast<double>(n - 1);
  out.delta = mean_abs / out.diag_average;
  detail::KahanSum var;
  for (std::size_t a = 0; a + 1 < n; ++a) {
    const double d = std::abs(diag[a + 1] - diag[a]) - mean_abs;
    var.add(d * d);
  }
  out.sigma = std::sqrt(var.value() / static_cast<double>(n - 2)) / out.diag_average;
  out.delta_max = dmax / out.diag_average;

  if (pairs_mc >= 2) {
    out.mc_available = true;
    const double mean_abs_mc = dsum_mc.value() / static_cast<double>(pairs_mc);
    out.delta_mc = mean_abs_mc / n_mc;
    detail::KahanSum var_mc;
    for (std::size_t a = 0; a + 1 < n; ++a) {
      if (!(in_window[a] && in_window[a + 1])) continue;
      const double d = std::abs(diag[a + 1] - diag[a]) - mean_abs_mc;
      var_mc.add(d * d);
    }
    out.sigma_mc = std::sqrt(var_mc.value() / static_cast<double>(pairs_mc - 1)) / n_mc;
    out.delta_max_mc = dmax_mc / n_mc;
  }
  return out;
}

inline DiagStatistics diag_statistics(const EigenbasisObservable& o,
                                      const MicrocanonicalResult& mc) {
  return diag_statistics(std::span<const double>(o.diag().data(), o.diag().size()),
                         std::span<const char>(mc.in_window.data(), mc.in_window.size()),
                         mc.average);
}

/// Relative deviations of the diagonal elements from their spectral mean and
/// of the squared coefficients from equipartition.
struct NormalizedFluctuations {
  Eigen::VectorXd delta_diag;     // diag / n_av - 1
  Eigen::VectorXd delta_weights;  // C^2 N - 1
};

inline NormalizedFluctuations normalized_fluctuations(const EigenbasisObservable& o,
                                                      const CoefficientVector& c) {
  const double n_av = o.diag().mean();
  if (!(n_av > 0.0))
    throw InvalidParameterError("normalized_fluctuations: diagonal average must be positive");
  NormalizedFluctuations out;
  out.delta_diag = o.diag().array() / n_av - 1.0;
  out.delta_weights = c.weights.array() * static_cast<double>(o.dim()) - 1.0;
  return out;
}

/// Every scalar and series diagnostic for one system size and one mode.
struct DiagnosticsReport {
  int n = 0;
  int mode_index = 1;
  double time_average = 0.0;     // diagonal-ensemble average
  double temporal_sigma = 0.0;   // rms temporal fluctuation
  double energy_mean = 0.0;
  double energy_sigma = 0.0;
  std::size_t window_count = 0;
  double mc_average = 0.0;
  double diag_average = 0.0;
  double delta = 0.0;
  double sigma = 0.0;
  double delta_mc = std::numeric_limits<double>::quiet_NaN();
  double sigma_mc = std::numeric_limits<double>::quiet_NaN();
  double delta_max = 0.0;
  double delta_max_mc = std::numeric_limits<double>::quiet_NaN();
  bool mc_stats_available = false;
  std::size_t window_pairs = 0;
  double offdiag_abs_av = 0.0;
  Eigen::VectorXd energies;
  Eigen::VectorXd coefficients;
  Eigen::VectorXd delta_diag_series;
  Eigen::VectorXd delta_weight_series;
  std::vector<char> in_window;
};

/// Runs the full diagnostic battery for one spectrum.
inline DiagnosticsReport build_report(const Spectrum& s, const SectorBasis& basis,
                                      const ModelParams& params, int mode_index,
                                      Eigen::Index block_size = 2048) {
  DiagnosticsReport rep;
  rep.n = params.n;
  rep.mode_index = mode_index;

  const Eigen::VectorXd in_vec = initial_state_vector(params, basis);
  const CoefficientVector c = coefficients(s, in_vec);
  const EigenbasisObservable o = observable_matrix(s, basis, mode_index);

  rep.time_average = infinite_time_average(c, o);
  const EnergyStats es = energy_stats(c, s);
  rep.energy_mean = es.mean;
  rep.energy_sigma = es.sigma_q;

  const MicrocanonicalResult mc = microcanonical(s, o, es.mean, es.sigma_q);
  rep.window_count = mc.count;
  rep.mc_average = mc.average;

  const DiagStatistics ds = diag_statistics(o, mc);
  rep.diag_average = ds.diag_average;
  rep.delta = ds.delta;
  rep.sigma = ds.sigma;
  rep.delta_mc = ds.delta_mc;
  rep.sigma_mc = ds.sigma_mc;
  rep.delta_max = ds.delta_max;
  rep.delta_max_mc = ds.delta_max_mc;
  rep.mc_stats_available = ds.mc_available;
  rep.window_pairs = ds.window_pairs;

  const OffdiagAccumulation od = accumulate_offdiag(o, &c.weights, block_size);
  rep.temporal_sigma = std::sqrt(od.weighted_sq_sum);
  const double dim = static_cast<double>(o.dim());
  rep.offdiag_abs_av = od.abs_sum / (dim * (dim - 1.0));

  const NormalizedFluctuations nf = normalized_fluctuations(o, c);
  rep.delta_diag_series = nf.delta_diag;
  rep.delta_weight_series = nf.delta_weights;
  rep.energies = s.energies;
  rep.coefficients = c.c;
  rep.in_window = mc.in_window;
  return rep;
}

}  // namespace mbth
