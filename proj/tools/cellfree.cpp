// Command-line driver: runs a scenario file and writes the CSV results.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "cellfree/report.hpp"
#include "cellfree/scenario_io.hpp"
#include "cellfree/simulate.hpp"

namespace fs = std::filesystem;
using namespace cellfree;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kFailed = 2;

struct Options {
  std::string scenario;
  std::string out = ".";
  std::size_t threads = 1;
  bool dry_run = false;
  bool dump_geometry = false;
  bool debug_bisection = false;
};

/// Writes every file or none: on any error the files already written are removed.
void write_all(const fs::path& dir, const std::vector<std::pair<std::string, std::string>>& files) {
  std::vector<fs::path> written;
  try {
    fs::create_directories(dir);
    for (const auto& [name, content] : files) {
      const fs::path path = dir / name;
      written.push_back(path);
      std::ofstream out(path, std::ios::binary | std::ios::trunc);
      out << content;
      out.close();
      if (!out) throw std::runtime_error("cannot write " + path.string());
    }
  } catch (...) {
    std::error_code ec;
    for (const auto& p : written) fs::remove(p, ec);
    throw;
  }
}

int run(const Options& opt) {
  sim::Scenario sc;
  try {
    sc = io::parse_scenario(opt.scenario);
    if (const char* env = std::getenv("CELLFREE_SEED"); env && *env) {
      sc.seed = io::parse_scenario_text("m_aps = 1\nu_users = 1\nseed = " + std::string(env)).seed;
    }
    if (opt.threads < 1) throw ValidationError("threads: must be >= 1");
  } catch (const ParseError& e) {
    std::cerr << opt.scenario << ": " << e.what() << '\n';
    return kInvalid;
  } catch (const ValidationError& e) {
    std::cerr << opt.scenario << ": invalid scenario: " << e.what() << '\n';
    return kInvalid;
  }

  if (opt.dry_run) {
    std::cout << "# scenario=" << io::scenario_hash(sc) << '\n' << io::print_scenario(sc);
    return kOk;
  }

  const std::string version = CELLFREE_VERSION;
  try {
    sim::RunOptions ro;
    ro.threads = opt.threads;
    ro.collect_traces = opt.debug_bisection;
    ro.dump_geometry = opt.dump_geometry;
    const auto res = sim::run_experiment(sc, ro);

    std::vector<std::pair<std::string, std::string>> files;
    if (sc.write_ber) files.emplace_back("ber.csv", io::ber_csv(sc, res, version));
    if (sc.write_rates) files.emplace_back("rates.csv", io::rates_csv(sc, res, version));
    if (sc.write_cdf) files.emplace_back("cdf.csv", io::cdf_csv(sc, res, version));
    if (opt.debug_bisection) files.emplace_back("bisection.csv", io::traces_csv(sc, res, version));
    if (opt.dump_geometry && res.geometry) {
      files.emplace_back("geometry.csv", io::geometry_csv(sc, *res.geometry, version));
      files.emplace_back("beta.csv", io::beta_csv(sc, *res.geometry, version));
    }
    write_all(opt.out, files);

    const auto& ev = res.events;
    std::cerr << "redraws=" << ev.redraws << " gamma_fallbacks=" << ev.gamma_fallbacks
              << " non_positive_loading=" << ev.non_positive_loading << " bisection_calls=" << ev.bisection_calls
              << " non_monotone_traces=" << ev.non_monotone_traces << " max_ap_load=" << ev.max_ap_load << '\n';
  } catch (const ValidationError& e) {
    std::cerr << "invalid scenario: " << e.what() << '\n';
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << '\n';
    return kFailed;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  Options opt;
  CLI::App app{"Cell-free massive MIMO downlink Monte Carlo simulator"};
  app.set_version_flag("--version", std::string(CELLFREE_VERSION));
  app.add_option("--scenario", opt.scenario, "Scenario file (key = value)")->required();
  app.add_option("--out", opt.out, "Output directory")->capture_default_str();
  app.add_option("--threads", opt.threads, "Worker threads; results do not depend on it")->capture_default_str();
  app.add_flag("--dry-run", opt.dry_run, "Print the resolved scenario and exit");
  app.add_flag("--dump-geometry", opt.dump_geometry, "Also write geometry.csv and beta.csv of the first trial");
  app.add_flag("--debug-bisection", opt.debug_bisection, "Also write every bisection step to bisection.csv");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }
  return run(opt);
}
