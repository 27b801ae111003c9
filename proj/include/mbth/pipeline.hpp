#pragma once

#include <zlib.h>
#ifdef _OPENMP
#include <omp.h>
#endif

#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mbth/diagnostics.hpp"
#include "mbth/errors.hpp"
#include "mbth/fitting.hpp"
#include "mbth/fock.hpp"
#include "mbth/indeptests.hpp"
#include "mbth/levelstats.hpp"
#include "mbth/model.hpp"
#include "mbth/spectrum.hpp"

namespace mbth {

static_assert(std::endian::native == std::endian::little,
              "cache format is little-endian; big-endian hosts unsupported");

/// Study configuration; flags > environment > these defaults.
struct StudyConfig {
  int n_min = 2;
  int n_max = 8;
  int mode_index = 1;
  bool include_n9 = false;
  std::string cache_dir;  // empty disables caching
  std::string out_dir = "out";
  int histogram_bins = 0;  // 0: ceil(sqrt(#spacings))
  std::size_t perm_replicates = 10000;
  std::uint64_t seed = 20240901;
  double time_max = 200.0;
  double time_step = 0.1;
  int threads = 0;  // 0: leave library defaults
  double mem_budget_gb = 6.0;

  void validate() const {
    if (n_min < 2 || n_max > 9 || n_min > n_max)
      throw InvalidParameterError("config: need 2 <= n_min <= n_max <= 9");
    if (perm_replicates < 1000)
      throw InvalidParameterError("config: permutation replicates must be at least 1000");
    if (!(time_step > 0.0) || !(time_max >= 0.0))
      throw InvalidParameterError("config: invalid time grid");
    if (!(mem_budget_gb > 0.0)) throw InvalidParameterError("config: memory budget must be positive");
  }

  /// N=9 runs only when explicitly enabled.
  int effective_n_max() const { return (n_max >= 9 && !include_n9) ? 8 : n_max; }

  double mem_budget_bytes() const { return mem_budget_gb * 1e9; }
};

// ---------------------------------------------------------------------------
// Spectrum cache: "MBTH" | u32 version | u32 N | u64 dim | 8 x f64 parameter
// block (eps, C_b, C_m, Delta, N_m, K, 0, 0) | dim f64 energies | dim*dim f64
// eigenvectors column-major | u32 CRC-32 of all preceding bytes.
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kCacheVersion = 1;
inline constexpr char kCacheMagic[4] = {'M', 'B', 'T', 'H'};

namespace detail {

struct CrcWriter {
  std::ofstream f;
  uLong crc = crc32(0L, Z_NULL, 0);

  explicit CrcWriter(const std::string& path) : f(path, std::ios::binary) {
    if (!f) throw IoError("cannot open for writing: " + path);
  }
  void write(const void* data, std::size_t bytes) {
    f.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
    if (!f) throw IoError("short write");
    const auto* p = static_cast<const Bytef*>(data);
    std::size_t off = 0;
    while (off < bytes) {
      const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes - off, 1u << 30));
      crc = crc32(crc, p + off, chunk);
      off += chunk;
    }
  }
};

struct CrcReader {
  std::ifstream f;
  uLong crc = crc32(0L, Z_NULL, 0);

  explicit CrcReader(const std::string& path) : f(path, std::ios::binary) {
    if (!f) throw IoError("cannot open for reading: " + path);
  }
  void read(void* data, std::size_t bytes) {
    f.read(static_cast<char*>(data), static_cast<std::streamsize>(bytes));
    if (static_cast<std::size_t>(f.gcount()) != bytes)
      throw CorruptFileError("cache file truncated");
    const auto* p = static_cast<const Bytef*>(data);
    std::size_t off = 0;
    while (off < bytes) {
      const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes - off, 1u << 30));
      crc = crc32(crc, p + off, chunk);
      off += chunk;
    }
  }
};

inline std::array<double, 8> parameter_block(const ModelParams& p) {
  return {p.epsilon, p.c_b, p.c_m, p.delta,
          static_cast<double>(p.n_m), static_cast<double>(p.k), 0.0, 0.0};
}

}  // namespace detail

inline void write_spectrum_cache(const std::string& path, const ModelParams& params,
                                 const Spectrum& s) {
  detail::CrcWriter w(path);
  w.write(kCacheMagic, 4);
  const std::uint32_t version = kCacheVersion;
  w.write(&version, sizeof version);
  const auto n32 = static_cast<std::uint32_t>(params.n);
  w.write(&n32, sizeof n32);
  const auto dim = static_cast<std::uint64_t>(s.dim());
  w.write(&dim, sizeof dim);
  const auto block = detail::parameter_block(params);
  w.write(block.data(), sizeof(double) * block.size());
  w.write(s.energies.data(), sizeof(double) * s.dim());
  w.write(s.vectors.data(), sizeof(double) * s.dim() * s.dim());
  const auto crc = static_cast<std::uint32_t>(w.crc);
  w.f.write(reinterpret_cast<const char*>(&crc), sizeof crc);
  if (!w.f) throw IoError("short write: " + path);
}

/// Header fields echoed by cache verification.
struct CacheInfo {
  std::uint32_t version = 0;
  std::uint32_t n = 0;
  std::uint64_t dim = 0;
  std::array<double, 8> params{};
};

namespace detail {

inline CacheInfo read_cache(const std::string& path, const ModelParams& expected,
                            Spectrum* spectrum_out) {
  CrcReader r(path);
  char magic[4];
  r.read(magic, 4);
  if (std::memcmp(magic, kCacheMagic, 4) != 0)
    throw CorruptFileError("bad magic in cache file " + path);

  CacheInfo info;
  r.read(&info.version, sizeof info.version);
  if (info.version != kCacheVersion)
    throw VersionMismatchError("cache version " + std::to_string(info.version) +
                               ", expected " + std::to_string(kCacheVersion));
  r.read(&info.n, sizeof info.n);
  r.read(&info.dim, sizeof info.dim);
  r.read(info.params.data(), sizeof(double) * info.params.size());

  // Size sanity before allocating dim^2 doubles.
  std::error_code ec;
  const auto fsize = std::filesystem::file_size(path, ec);
  const std::uint64_t expected_size =
      4 + 4 + 4 + 8 + 8 * 8 + 8 * info.dim + 8 * info.dim * info.dim + 4;
  if (ec || fsize != expected_size) throw CorruptFileError("cache size mismatch: " + path);

  Spectrum s;
  s.energies.resize(static_cast<Eigen::Index>(info.dim));
  r.read(s.energies.data(), sizeof(double) * info.dim);
  if (spectrum_out != nullptr) {
    s.vectors.resize(static_cast<Eigen::Index>(info.dim), static_cast<Eigen::Index>(info.dim));
    r.read(s.vectors.data(), sizeof(double) * info.dim * info.dim);
  } else {
    // Verification only: stream the payload through the checksum.
    std::vector<char> buf(1 << 22);
    std::uint64_t remaining = 8 * info.dim * info.dim;
    while (remaining > 0) {
      const auto chunk = std::min<std::uint64_t>(remaining, buf.size());
      r.read(buf.data(), static_cast<std::size_t>(chunk));
      remaining -= chunk;
    }
  }

  const auto computed = static_cast<std::uint32_t>(r.crc);
  std::uint32_t stored = 0;
  r.f.read(reinterpret_cast<char*>(&stored), sizeof stored);
  if (r.f.gcount() != sizeof stored) throw CorruptFileError("cache file truncated");
  if (stored != computed) throw CorruptFileError("cache CRC mismatch: " + path);

  const auto expected_block = parameter_block(expected);
  if (info.n != static_cast<std::uint32_t>(expected.n) || info.params != expected_block)
    throw ParameterMismatchError("cache parameter block does not match derived parameters");

  if (spectrum_out != nullptr) *spectrum_out = std::move(s);
  return info;
}

}  // namespace detail

/// Validates magic, version, CRC and the parameter block; returns the header.
inline CacheInfo verify_cache(const std::string& path, const ModelParams& expected) {
  return detail::read_cache(path, expected, nullptr);
}

/// Loads a verified cache file. Residual and gap checks are re-run by the caller.
inline Spectrum load_spectrum_cache(const std::string& path, const ModelParams& expected) {
  Spectrum s;
  detail::read_cache(path, expected, &s);
  return s;
}

// ---------------------------------------------------------------------------
// Artifact emission
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct CsvFile {
  std::ofstream f;
  explicit CsvFile(const std::filesystem::path& path) : f(path) {
    if (!f) throw IoError("cannot open for writing: " + path.string());
  }
  void line(const std::string& s) {
    f << s << '\n';
    if (!f) throw IoError("short write");
  }
};

}  // namespace detail

/// Per-N results bundled for reporting.
struct StudyEntry {
  int n = 0;
  bool ok = false;
  std::string error;
  bool from_cache = false;
  double min_normalized_gap = 0.0;
  double residual_norm = 0.0;
  double max_charge_deviation = 0.0;
  double trace_deviation = 0.0;
  double frobenius_deviation = 0.0;
  double gap_condition_ratio = 0.0;
  DiagnosticsReport report;
  SpacingStats spacings;
  std::vector<TestResult> tests;
  Eigen::VectorXd times;
  Eigen::VectorXd timeseries;
};

struct StudyOutcome {
  std::vector<StudyEntry> entries;
  std::vector<FitRow> fits;
  std::size_t diagonalizations = 0;
  bool verification_ok = true;
};

namespace detail {

inline void write_spacings_csv(const std::filesystem::path& path, const SpacingStats& st) {
  CsvFile csv(path);
  csv.line("bin_left,bin_right,density");
  for (std::size_t b = 0; b < st.histogram.density.size(); ++b)
    csv.line(fmt17(st.histogram.edges[b]) + "," + fmt17(st.histogram.edges[b + 1]) + "," +
             fmt17(st.histogram.density[b]));
}

inline void write_timeseries_csv(const std::filesystem::path& path, const Eigen::VectorXd& t,
                                 const Eigen::VectorXd& v) {
  CsvFile csv(path);
  csv.line("t,expectation");
  for (Eigen::Index i = 0; i < t.size(); ++i) csv.line(fmt17(t[i]) + "," + fmt17(v[i]));
}

inline void write_scatter_csv(const std::filesystem::path& path, const DiagnosticsReport& rep,
                              const Eigen::VectorXd& diag) {
  CsvFile csv(path);
  csv.line("alpha,energy,coefficient,weight,diag,delta_diag,delta_weight,in_window");
  for (Eigen::Index a = 0; a < rep.energies.size(); ++a) {
    const double c = rep.coefficients[a];
    csv.line(std::to_string(a) + "," + fmt17(rep.energies[a]) + "," + fmt17(c) + "," +
             fmt17(c * c) + "," + fmt17(diag[a]) + "," + fmt17(rep.delta_diag_series[a]) + "," +
             fmt17(rep.delta_weight_series[a]) + "," +
             (rep.in_window[static_cast<std::size_t>(a)] ? "1" : "0"));
  }
}

inline const char* fit_header_comment() {
  return "# adjusted_r2 = 1-(1-R2)(n-1)/(n-k); rmse = sqrt(weighted_SSR/(n-k)); "
         "sigma_p = sqrt(diag(s2 inv(J'WJ))), s2 = weighted_SSR/(n-k)";
}

inline std::string fit_row_csv(const FitRow& row) {
  const FitResult& r = row.result;
  return row.quantity + "," + row.model.formula() + "," + fmt17(r.adjusted_r2) + "," +
         fmt17(r.rmse) + "," + fmt17(r.a) + "," + fmt17(r.sigma_a) + "," + fmt17(r.b) + "," +
         fmt17(r.sigma_b) + "," + fmt17(r.c) + "," + fmt17(r.sigma_c) + "," + row.mask_note +
         "," + row.weights_note;
}

inline void write_fit_csvs(const std::filesystem::path& out_dir, const std::vector<FitRow>& fits) {
  CsvFile table(out_dir / "table1.csv");
  table.line(fit_header_comment());
  table.line("quantity,family,adjusted_r2,rmse,a,sigma_a,b,sigma_b,c,sigma_c,mask,weights");
  for (const auto& row : fits)
    if (row.starred && row.error.empty()) table.line(fit_row_csv(row));

  CsvFile all(out_dir / "fits.csv");
  all.line(fit_header_comment());
  all.line(
      "quantity,family,starred,adjusted_r2,rmse,a,sigma_a,b,sigma_b,c,sigma_c,mask,weights,"
      "converged,iterations,note,error");
  for (const auto& row : fits) {
    const FitResult& r = row.result;
    all.line(row.quantity + "," + row.model.formula() + "," + (row.starred ? "1" : "0") + "," +
             fmt17(r.adjusted_r2) + "," + fmt17(r.rmse) + "," + fmt17(r.a) + "," +
             fmt17(r.sigma_a) + "," + fmt17(r.b) + "," + fmt17(r.sigma_b) + "," + fmt17(r.c) +
             "," + fmt17(r.sigma_c) + "," + row.mask_note + "," + row.weights_note + "," +
             (r.converged ? "1" : "0") + "," + std::to_string(r.iterations) + "," + r.note +
             "," + row.error);
  }
}

inline void write_tests_csv(const std::filesystem::path& path,
                            const std::vector<StudyEntry>& entries) {
  CsvFile csv(path);
  csv.line("n,test,statistic,p_value,method,seed,replicates,sample_size,dropped,error");
  for (const auto& e : entries) {
    for (const auto& t : e.tests) {
      csv.line(std::to_string(e.n) + "," + t.name + "," + fmt17(t.statistic) + "," +
               fmt17(t.p_value) + "," +
               (t.method == PValueMethod::Permutation ? "permutation" : "asymptotic") + "," +
               std::to_string(t.seed) + "," + std::to_string(t.replicates) + "," +
               std::to_string(t.sample_size) + "," + std::to_string(t.dropped) + "," + t.error);
    }
  }
}

inline nlohmann::ordered_json report_json(const StudyEntry& e) {
  using json = nlohmann::ordered_json;
  const DiagnosticsReport& r = e.report;
  json j;
  j["n"] = e.n;
  j["ok"] = e.ok;
  if (!e.error.empty()) j["error"] = e.error;
  j["from_cache"] = e.from_cache;
  j["verification"] = {{"min_normalized_gap", e.min_normalized_gap},
                       {"residual_norm", e.residual_norm},
                       {"max_charge_deviation", e.max_charge_deviation},
                       {"trace_deviation", e.trace_deviation},
                       {"frobenius_deviation", e.frobenius_deviation},
                       {"gap_condition_ratio", e.gap_condition_ratio}};
  if (!e.ok) return j;

  j["mode_index"] = r.mode_index;
  j["time_average"] = r.time_average;
  j["temporal_sigma"] = r.temporal_sigma;
  j["energy_mean"] = r.energy_mean;
  j["energy_sigma"] = r.energy_sigma;
  j["window_count"] = r.window_count;
  j["mc_average"] = r.mc_average;
  j["diag_average"] = r.diag_average;
  j["delta"] = r.delta;
  j["sigma"] = r.sigma;
  j["delta_mc"] = r.delta_mc;
  j["sigma_mc"] = r.sigma_mc;
  j["delta_max"] = r.delta_max;
  j["delta_max_mc"] = r.delta_max_mc;
  j["mc_stats_available"] = r.mc_stats_available;
  j["window_pairs"] = r.window_pairs;
  j["offdiag_abs_av"] = r.offdiag_abs_av;
  j["spacing_argmax"] = e.spacings.argmax;
  j["goe_distance"] = e.spacings.goe_distance;
  j["poisson_distance"] = e.spacings.poisson_distance;

  auto vec = [](const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  j["energies"] = vec(r.energies);
  j["coefficients"] = vec(r.coefficients);
  j["delta_diag"] = vec(r.delta_diag_series);
  j["delta_weight"] = vec(r.delta_weight_series);
  j["in_window"] = std::vector<int>(r.in_window.begin(), r.in_window.end());

  json tests = json::array();
  for (const auto& t : e.tests) {
    json tj;
    tj["test"] = t.name;
    tj["statistic"] = t.statistic;
    tj["p_value"] = t.p_value;
    tj["method"] = t.method == PValueMethod::Permutation ? "permutation" : "asymptotic";
    tj["sample_size"] = t.sample_size;
    if (t.method == PValueMethod::Permutation) {
      tj["seed"] = t.seed;
      tj["replicates"] = t.replicates;
    }
    if (t.dropped > 0) tj["dropped"] = t.dropped;
    if (!t.error.empty()) tj["error"] = t.error;
    tests.push_back(std::move(tj));
  }
  j["independence_tests"] = std::move(tests);
  return j;
}

}  // namespace detail

extern "C" void openblas_set_num_threads(int);

inline void apply_thread_config(const StudyConfig& cfg) {
  if (cfg.threads > 0) {
#ifdef _OPENMP
    omp_set_num_threads(cfg.threads);
#endif
    openblas_set_num_threads(cfg.threads);
  }
}

/// Runs the study over the configured range: build, diagonalize (or load
/// from cache), verify, compute every diagnostic, emit all data files.
/// Failures of one N are isolated; the summary lists them.
inline StudyOutcome run_study(const StudyConfig& cfg) {
  cfg.validate();
  apply_thread_config(cfg);

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (!fs::is_directory(cfg.out_dir)) throw IoError("cannot create output directory " + cfg.out_dir);
  if (!cfg.cache_dir.empty()) {
    fs::create_directories(cfg.cache_dir, ec);
    if (!fs::is_directory(cfg.cache_dir)) throw IoError("cannot create cache directory " + cfg.cache_dir);
  }

  StudyOutcome outcome;

  for (int n = cfg.n_min; n <= cfg.effective_n_max(); ++n) {
    StudyEntry entry;
    entry.n = n;
    try {
      const ModelParams params = ModelParams::for_system_size(n);
      entry.gap_condition_ratio = params.gap_condition_ratio();
      ModelInstance inst = build_hamiltonian(params, enumerate_sector(n, params.k, params.n_m));

      Spectrum spectrum;
      const fs::path cache_path =
          cfg.cache_dir.empty() ? fs::path{}
                                : fs::path(cfg.cache_dir) / ("spectrum_N" + std::to_string(n) + ".mbth");
      bool loaded = false;
      if (!cache_path.empty() && fs::exists(cache_path)) {
        try {
          spectrum = load_spectrum_cache(cache_path.string(), params);
          loaded = true;
          std::cerr << "mbth: N=" << n << ": spectrum loaded from cache\n";
        } catch (const CacheError& e) {
          std::cerr << "mbth: N=" << n << ": cache rejected (" << e.what() << "); recomputing\n";
        }
      }
      if (!loaded) {
        DiagonalizeOptions dopts;
        dopts.mem_budget_bytes = cfg.mem_budget_bytes();
        spectrum = diagonalize(inst, dopts);
        ++outcome.diagonalizations;
        std::cerr << "mbth: N=" << n << ": diagonalized, dim=" << spectrum.dim() << "\n";
        if (!cache_path.empty()) write_spectrum_cache(cache_path.string(), params, spectrum);
      } else {
        spectrum.residual_norm = detail::max_residual(inst.h, spectrum.energies, spectrum.vectors);
      }
      entry.from_cache = loaded;

      // Verification gates.
      entry.residual_norm = spectrum.residual_norm;
      entry.min_normalized_gap = check_nondegeneracy(spectrum);
      const auto charges = verify_sector_charges(spectrum, inst.basis);
      for (const auto& [qp, qm] : charges) {
        entry.max_charge_deviation =
            std::max({entry.max_charge_deviation, std::abs(qp - n), std::abs(qm - params.n_m)});
      }
      const double tr = inst.h.trace();
      const double frob = inst.h.frobenius_norm_sq();
      entry.trace_deviation =
          std::abs(spectrum.energies.sum() - tr) / std::max(1.0, std::abs(tr));
      entry.frobenius_deviation =
          std::abs(spectrum.energies.squaredNorm() - frob) / std::max(1.0, frob);

      const double emax = spectrum.energies.cwiseAbs().maxCoeff();
      std::string verify_error;
      if (entry.min_normalized_gap <= kNondegeneracyRelTol)
        verify_error = "degenerate spectrum";
      else if (entry.max_charge_deviation > 1e-10)
        verify_error = "sector charge deviation " + detail::fmt17(entry.max_charge_deviation);
      else if (entry.residual_norm > 1e-8 * emax)
        verify_error = "eigenpair residual " + detail::fmt17(entry.residual_norm);
      else if (entry.trace_deviation > 1e-9 || entry.frobenius_deviation > 1e-9)
        verify_error = "trace identity violated";
      if (!verify_error.empty()) {
        entry.error = verify_error;
        outcome.verification_ok = false;
        outcome.entries.push_back(std::move(entry));
        continue;
      }

      entry.report = build_report(spectrum, inst.basis, params, cfg.mode_index);
      entry.spacings = compute_spacing_stats(spectrum.energies, cfg.histogram_bins);

      PermutationOptions popts;
      popts.replicates = cfg.perm_replicates;
      popts.seed = cfg.seed;
      entry.tests = run_all_tests(entry.report, popts);

      const auto steps = static_cast<Eigen::Index>(std::floor(cfg.time_max / cfg.time_step)) + 1;
      entry.times.resize(steps);
      for (Eigen::Index i = 0; i < steps; ++i) entry.times[i] = i * cfg.time_step;
      const CoefficientVector c = coefficients(spectrum, initial_state_vector(params, inst.basis));
      const EigenbasisObservable o = observable_matrix(spectrum, inst.basis, cfg.mode_index);
      entry.timeseries = expectation_series(c, o, spectrum, entry.times);

      const fs::path out(cfg.out_dir);
      const std::string suffix = "_N" + std::to_string(n) + ".csv";
      detail::write_spacings_csv(out / ("spacings" + suffix), entry.spacings);
      detail::write_timeseries_csv(out / ("timeseries" + suffix), entry.times, entry.timeseries);
      detail::write_scatter_csv(out / ("scatter" + suffix), entry.report, o.diag());

      entry.ok = true;
    } catch (const Error& e) {
      entry.error = e.what();
      outcome.verification_ok = false;
    }
    outcome.entries.push_back(std::move(entry));
  }

  // Fits over the successful reports; short series record per-row errors.
  std::vector<DiagnosticsReport> reports;
  for (const auto& e : outcome.entries)
    if (e.ok) reports.push_back(e.report);
  if (!reports.empty()) outcome.fits = fit_suite(reports);

  const std::filesystem::path out(cfg.out_dir);
  detail::write_fit_csvs(out, outcome.fits);
  detail::write_tests_csv(out / "tests.csv", outcome.entries);

  nlohmann::ordered_json top;
  top["config"] = {{"n_min", cfg.n_min},
                   {"n_max", cfg.effective_n_max()},
                   {"mode_index", cfg.mode_index},
                   {"histogram_bins", cfg.histogram_bins},
                   {"perm_replicates", cfg.perm_replicates},
                   {"seed", cfg.seed},
                   {"time_max", cfg.time_max},
                   {"time_step", cfg.time_step},
                   {"mem_budget_gb", cfg.mem_budget_gb}};
  nlohmann::ordered_json entries = nlohmann::ordered_json::array();
  for (const auto& e : outcome.entries) entries.push_back(detail::report_json(e));
  top["reports"] = std::move(entries);
  nlohmann::ordered_json fits = nlohmann::ordered_json::array();
  for (const auto& row : outcome.fits) {
    nlohmann::ordered_json fj;
    fj["quantity"] = row.quantity;
    fj["family"] = row.model.formula();
    fj["starred"] = row.starred;
    fj["mask"] = row.mask_note;
    fj["weights"] = row.weights_note;
    if (!row.error.empty()) {
      fj["error"] = row.error;
    } else {
      fj["a"] = row.result.a;
      fj["sigma_a"] = row.result.sigma_a;
      fj["b"] = row.result.b;
      fj["sigma_b"] = row.result.sigma_b;
      fj["c"] = row.result.c;
      fj["sigma_c"] = row.result.sigma_c;
      fj["adjusted_r2"] = row.result.adjusted_r2;
      fj["rmse"] = row.result.rmse;
      fj["converged"] = row.result.converged;
      if (!row.result.note.empty()) fj["note"] = row.result.note;
    }
    fits.push_back(std::move(fj));
  }
  top["fits"] = std::move(fits);

  std::ofstream jf(out / "report.json");
  if (!jf) throw IoError("cannot write report.json");
  jf << top.dump(1) << '\n';
  if (!jf) throw IoError("short write: report.json");

  for (const auto& e : outcome.entries)
    if (!e.ok)
      std::cerr << "mbth: N=" << e.n << " FAILED: " << e.error << "\n";

  return outcome;
}

}  // namespace mbth
