// Command-line driver: runs the thermalization study over an N range and
// writes all data files, or validates a spectrum cache file.

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "mbth/pipeline.hpp"

namespace {

int verify_cache_file(const std::string& path) {
  // The header's own N determines the parameter block the file must carry.
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    std::cerr << "cannot open " << path << "\n";
    return 3;
  }
  char magic[4] = {};
  std::uint32_t version = 0, n = 0;
  f.read(magic, 4);
  f.read(reinterpret_cast<char*>(&version), sizeof version);
  f.read(reinterpret_cast<char*>(&n), sizeof n);
  if (!f || std::string(magic, 4) != "MBTH") {
    std::cerr << "corrupt cache file: bad magic\n";
    return 1;
  }
  try {
    const auto params = mbth::ModelParams::for_system_size(static_cast<int>(n));
    const mbth::CacheInfo info = mbth::verify_cache(path, params);
    std::cout << "cache ok: N=" << info.n << " dim=" << info.dim << " version=" << info.version
              << "\n  epsilon=" << info.params[0] << " C_b=" << info.params[1]
              << " C_m=" << info.params[2] << " Delta=" << info.params[3]
              << " N_m=" << info.params[4] << " K=" << info.params[5] << "\n";
    return 0;
  } catch (const mbth::CacheError& e) {
    std::cerr << "cache invalid: " << e.what() << "\n";
    return 1;
  }
}

void print_summary(const mbth::StudyOutcome& outcome) {
  std::printf("%3s %8s %12s %12s %12s %8s %10s\n", "N", "dim", "time_avg", "mc_avg", "sigma_t",
              "window", "argmax_s");
  for (const auto& e : outcome.entries) {
    if (!e.ok) {
      std::printf("%3d %8s FAILED: %s\n", e.n, "-", e.error.c_str());
      continue;
    }
    std::printf("%3d %8zu %12.6f %12.6f %12.6f %8zu %10.4f\n", e.n, e.report.energies.size(),
                e.report.time_average, e.report.mc_average, e.report.temporal_sigma,
                e.report.window_count, e.spacings.argmax);
  }
  if (!outcome.fits.empty()) {
    std::printf("\n%-22s %-14s %12s %12s %12s\n", "quantity", "family", "a", "b", "c");
    for (const auto& row : outcome.fits) {
      if (!row.starred || !row.error.empty()) continue;
      std::printf("%-22s %-14s %12.5g %12.5g %12.5g\n", row.quantity.c_str(),
                  row.model.formula().c_str(), row.result.a, row.result.b, row.result.c);
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact-diagonalization thermalization study of a two-sector bosonic memory model"};

  mbth::StudyConfig cfg;
  std::string verify_path;
  app.add_option("--n-min", cfg.n_min, "Smallest system size (>= 2)")->envname("MBTH_N_MIN");
  app.add_option("--n-max", cfg.n_max, "Largest system size (<= 9)")->envname("MBTH_N_MAX");
  app.add_option("--mode-index", cfg.mode_index, "Observed memory mode, 1..2K")
      ->envname("MBTH_MODE_INDEX");
  app.add_flag("--include-n9", cfg.include_n9, "Run the large N=9 system (needs ~15 GB)")
      ->envname("MBTH_INCLUDE_N9");
  app.add_option("--cache-dir", cfg.cache_dir, "Directory for spectrum cache files")
      ->envname("MBTH_CACHE_DIR");
  app.add_option("--out", cfg.out_dir, "Output directory for data files")->envname("MBTH_OUT");
  app.add_option("--bins", cfg.histogram_bins, "Spacing histogram bins (0: sqrt rule)")
      ->envname("MBTH_BINS");
  app.add_option("--perm-replicates", cfg.perm_replicates,
                 "Permutation replicates for Hoeffding D (>= 1000)")
      ->envname("MBTH_PERM_REPLICATES");
  app.add_option("--seed", cfg.seed, "Seed for permutation tests")->envname("MBTH_SEED");
  app.add_option("--threads", cfg.threads, "Worker threads (0: library default)")
      ->envname("MBTH_THREADS");
  app.add_option("--mem-budget-gb", cfg.mem_budget_gb, "Eigensolver memory budget in GiB")
      ->envname("MBTH_MEM_BUDGET_GB");
  app.add_option("--time-max", cfg.time_max, "Time-series horizon")->envname("MBTH_TIME_MAX");
  app.add_option("--time-step", cfg.time_step, "Time-series step")->envname("MBTH_TIME_STEP");
  app.add_option("--verify-cache", verify_path, "Validate a cache file and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (!verify_path.empty()) return verify_cache_file(verify_path);

    const mbth::StudyOutcome outcome = mbth::run_study(cfg);
    print_summary(outcome);
    return outcome.verification_ok ? 0 : 1;
  } catch (const mbth::InvalidParameterError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const mbth::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
