#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "mbth/errors.hpp"

namespace mbth {

/// Wigner-Dyson (GOE) surmise for normalized spacings.
inline double goe_pdf(double s) {
  return 0.5 * std::numbers::pi * s * std::exp(-0.25 * std::numbers::pi * s * s);
}
inline double goe_cdf(double s) { return 1.0 - std::exp(-0.25 * std::numbers::pi * s * s); }

inline double poisson_pdf(double s) { return std::exp(-s); }
inline double poisson_cdf(double s) { return 1.0 - std::exp(-s); }

/// Location of the GOE density maximum, sqrt(2/pi).
inline double goe_argmax() { return std::sqrt(2.0 / std::numbers::pi); }

/// Neighbor gaps divided by the mean gap; mean of the result is 1.
inline Eigen::VectorXd normalized_spacings(const Eigen::VectorXd& energies) {
  const Eigen::Index n = energies.size();
  if (n < 3) throw InvalidParameterError("normalized_spacings: need at least three levels");
  Eigen::VectorXd gaps(n - 1);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    gaps[i] = energies[i + 1] - energies[i];
    if (!(gaps[i] > 0.0))
      throw DegenerateSpectrumError("normalized_spacings: non-positive level gap");
  }
  return gaps / gaps.mean();
}

struct Histogram {
  std::vector<double> edges;    // bin_count + 1, uniform over [0, max]
  std::vector<double> density;  // integrates to 1
};

/// Density histogram plus the abscissa of its maximum (ties toward smaller s).
struct SpacingHistogram {
  Histogram histogram;
  double argmax = 0.0;
};

inline SpacingHistogram spacing_histogram(const Eigen::VectorXd& s, int bins = 0) {
  const Eigen::Index n = s.size();
  if (n < 10) throw InvalidParameterError("spacing_histogram: need at least 10 spacings");
  if (bins <= 0) bins = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
  const double smax = s.maxCoeff();
  const double width = smax / bins;

  std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    auto b = static_cast<std::size_t>(s[i] / width);
    if (b >= counts.size()) b = counts.size() - 1;
    counts[b] += 1.0;
  }

  SpacingHistogram out;
  out.histogram.edges.resize(counts.size() + 1);
  out.histogram.density.resize(counts.size());
  std::size_t best = 0;
  for (std::size_t b = 0; b < counts.size(); ++b) {
    out.histogram.edges[b] = b * width;
    out.histogram.density[b] = counts[b] / (static_cast<double>(n) * width);
    if (out.histogram.density[b] > out.histogram.density[best]) best = b;
  }
  out.histogram.edges[counts.size()] = smax;
  out.argmax = (static_cast<double>(best) + 0.5) * width;
  return out;
}

/// Kolmogorov sup distance between the empirical CDF of the sample and a
/// reference CDF.
inline double sup_cdf_distance(const Eigen::VectorXd& sample,
                               const std::function<double(double)>& cdf) {
  std::vector<double> s(sample.data(), sample.data() + sample.size());
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double d = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double f = cdf(s[i]);
    d = std::max(d, std::abs((static_cast<double>(i) + 1.0) / n - f));
    d = std::max(d, std::abs(f - static_cast<double>(i) / n));
  }
  return d;
}

/// Full level-spacing summary for one spectrum.
struct SpacingStats {
  Eigen::VectorXd spacings;
  Histogram histogram;
  double argmax = 0.0;
  double goe_distance = 0.0;
  double poisson_distance = 0.0;
};

inline SpacingStats compute_spacing_stats(const Eigen::VectorXd& energies, int bins = 0) {
  SpacingStats out;
  out.spacings = normalized_spacings(energies);
  const SpacingHistogram h = spacing_histogram(out.spacings, bins);
  out.histogram = h.histogram;
  out.argmax = h.argmax;
  out.goe_distance = sup_cdf_distance(out.spacings, goe_cdf);
  out.poisson_distance = sup_cdf_distance(out.spacings, poisson_cdf);
  return out;
}

}  // namespace mbth
