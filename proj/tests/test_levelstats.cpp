#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mbth/levelstats.hpp"
#include "support/oracles.hpp"

using namespace mbth;

TEST_CASE("normalized spacings") {
  SECTION("an equally spaced ladder gives all ones") {
    const Eigen::VectorXd e = Eigen::VectorXd::LinSpaced(20, 0.0, 19.0);
    const Eigen::VectorXd s = normalized_spacings(e);
    REQUIRE(s.size() == 19);
    for (Eigen::Index i = 0; i < s.size(); ++i) CHECK(s[i] == Catch::Approx(1.0).margin(1e-14));
  }

  SECTION("mean is exactly one") {
    Eigen::VectorXd e(7);
    e << -3.0, -1.2, 0.4, 0.9, 2.5, 2.7, 6.0;
    CHECK(normalized_spacings(e).mean() == Catch::Approx(1.0).margin(1e-12));
  }

  SECTION("invariant under affine maps of the spectrum") {
    Eigen::VectorXd e(6);
    e << 0.0, 0.3, 1.1, 1.15, 2.0, 3.7;
    const Eigen::VectorXd s1 = normalized_spacings(e);
    const Eigen::VectorXd s2 = normalized_spacings(2.5 * e.array() - 7.0);
    CHECK((s1 - s2).cwiseAbs().maxCoeff() < 1e-12);
  }

  SECTION("degenerate spectra are rejected") {
    Eigen::VectorXd e(4);
    e << 0.0, 1.0, 1.0, 2.0;
    CHECK_THROWS_AS(normalized_spacings(e), mbth::DegenerateSpectrumError);
  }
}

TEST_CASE("reference densities") {
  CHECK(goe_pdf(0.0) == 0.0);
  CHECK(poisson_pdf(0.0) == 1.0);
  CHECK(goe_argmax() == Catch::Approx(0.7978845608).margin(1e-9));

  // Numerical argmax of the GOE density.
  double best_s = 0.0, best_p = 0.0;
  for (double s = 0.0; s <= 3.0; s += 1e-5)
    if (goe_pdf(s) > best_p) {
      best_p = goe_pdf(s);
      best_s = s;
    }
  CHECK(best_s == Catch::Approx(goe_argmax()).margin(1e-4));

  SECTION("both integrate to one") {
    CHECK(oracle::integrate(goe_pdf, 0.0, 40.0) == Catch::Approx(1.0).margin(1e-8));
    CHECK(oracle::integrate(poisson_pdf, 0.0, 60.0) == Catch::Approx(1.0).margin(1e-8));
  }

  SECTION("the CDFs are the integrals of the densities") {
    for (double s : {0.3, 0.8, 1.7}) {
      CHECK(oracle::integrate(goe_pdf, 0.0, s) == Catch::Approx(goe_cdf(s)).margin(1e-9));
      CHECK(oracle::integrate(poisson_pdf, 0.0, s) == Catch::Approx(poisson_cdf(s)).margin(1e-9));
    }
  }
}

TEST_CASE("spacing histogram") {
  SECTION("density integrates to one") {
    const auto samples = oracle::sample_goe_spacings(5000, 42);
    const Eigen::VectorXd s =
        Eigen::Map<const Eigen::VectorXd>(samples.data(), static_cast<Eigen::Index>(samples.size()));
    const auto h = spacing_histogram(s);
    double mass = 0.0;
    for (std::size_t b = 0; b < h.histogram.density.size(); ++b)
      mass += h.histogram.density[b] * (h.histogram.edges[b + 1] - h.histogram.edges[b]);
    CHECK(mass == Catch::Approx(1.0).margin(1e-9));
  }

  SECTION("argmax of synthetic GOE samples is near the analytic peak") {
    // The peak is flat, so the estimate needs bins wide enough that the
    // density drop across one bin beats the sampling noise.
    const auto samples = oracle::sample_goe_spacings(100000, 1234);
    const Eigen::VectorXd s =
        Eigen::Map<const Eigen::VectorXd>(samples.data(), static_cast<Eigen::Index>(samples.size()));
    const auto h = spacing_histogram(s, 32);
    const double bin_width = h.histogram.edges[1] - h.histogram.edges[0];
    CHECK(std::abs(h.argmax - goe_argmax()) <= bin_width);
  }

  SECTION("ties break toward smaller spacing") {
    Eigen::VectorXd s(12);
    // Two bins with identical counts at the low end.
    s << 0.1, 0.1, 0.1, 1.1, 1.1, 1.1, 2.5, 3.5, 4.5, 5.5, 6.5, 7.9;
    const auto h = spacing_histogram(s, 8);
    // Bins 0 and 1 both hold three samples; the tie resolves to bin 0.
    CHECK(h.argmax < 1.0);
  }

  SECTION("too few samples are rejected") {
    Eigen::VectorXd s = Eigen::VectorXd::Ones(5);
    CHECK_THROWS_AS(spacing_histogram(s), mbth::InvalidParameterError);
  }
}

TEST_CASE("sup-CDF distances") {
  const auto goe_samples = oracle::sample_goe_spacings(20000, 77);
  const Eigen::VectorXd s = Eigen::Map<const Eigen::VectorXd>(
      goe_samples.data(), static_cast<Eigen::Index>(goe_samples.size()));

  const double to_goe = sup_cdf_distance(s, goe_cdf);
  const double to_poisson = sup_cdf_distance(s, poisson_cdf);
  CHECK(to_goe >= 0.0);
  CHECK(to_goe <= 1.0);
  CHECK(to_goe < 0.02);      // drawn from GOE
  CHECK(to_poisson > 0.05);  // clearly not Poisson
  CHECK(to_goe < to_poisson);
}

TEST_CASE("combined spacing statistics") {
  Eigen::VectorXd e(200);
  const auto samples = oracle::sample_goe_spacings(199, 5);
  e[0] = 0.0;
  for (Eigen::Index i = 1; i < e.size(); ++i) e[i] = e[i - 1] + samples[i - 1];
  const SpacingStats st = compute_spacing_stats(e);
  CHECK(st.spacings.size() == 199);
  CHECK(st.spacings.mean() == Catch::Approx(1.0).margin(1e-12));
  CHECK(st.goe_distance < st.poisson_distance);
}
