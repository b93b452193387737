// typ3: Type I/II/III ANOVA tables with the cell-mean contrasts each Type III
// sum of squares tests.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "typ3/cli.hpp"
#include "typ3/oracle.hpp"

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

// "A=lo,mid,hi"
void add_levels(typ3::cli::IngestConfig& cfg, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0)
    throw typ3::input_error("--levels expects NAME=level1,level2,...");
  const std::string name = spec.substr(0, eq);
  if (cfg.levels.count(name)) throw typ3::input_error("--levels given twice for '" + name + "'");
  cfg.levels[name] = split(spec.substr(eq + 1), ',');
}

int run_verify(std::uint64_t seed, std::size_t count, bool quiet) {
  const auto result = typ3::oracle::run_suite(seed, count);
  for (const auto& r : result.reports)
    if (!quiet || !r.pass) std::cout << r.to_json().dump() << "\n";
  nlohmann::ordered_json summary = {
      {"summary", true},
      {"seed", seed},
      {"scenarios", result.scenarios},
      {"checks", result.reports.size()},
      {"failures", result.failures()},
      {"trivial_contrast_intersections", result.trivially_intersecting},
      {"trivial_contrast_intersection_fraction",
       result.scenarios ? static_cast<double>(result.trivially_intersecting) / result.scenarios : 0.0}};
  std::cout << summary.dump() << "\n";
  return result.all_pass() ? typ3::cli::Success : typ3::cli::Failure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Type I/II/III sums of squares for factorial models with covariates and empty cells"};
  app.set_version_flag("--version", "typ3 1.0.0");

  typ3::cli::IngestConfig ingest_cfg;
  typ3::cli::RunConfig run_cfg;
  std::string factors, covariates, type = "III", format = "text";
  std::vector<std::string> levels;
  double tol = typ3::Tolerance{}.rel_rank_tol;
  bool no_rationalize = false;

  app.add_option("--data", ingest_cfg.data_path, "CSV file with a header row");
  app.add_option("--response", ingest_cfg.response, "Response column");
  app.add_option("--factors", factors, "Comma-separated factor columns");
  app.add_option("--covariates", covariates, "Comma-separated covariate columns");
  app.add_option("--levels", levels, "Level order for a factor: NAME=l1,l2,... (repeatable)");
  app.add_option("--model", run_cfg.formula, "Model formula, e.g. \"y ~ A*B\"");
  app.add_option("--type", type, "I, II, III or all")->check(CLI::IsMember({"I", "II", "III", "all"}));
  app.add_option("--format", format, "text or json")->check(CLI::IsMember({"text", "json"}));
  app.add_option("--tol", tol, "Relative rank tolerance");
  app.add_flag("--no-rationalize", no_rationalize, "Print contrast coefficients unrounded");

  auto* verify = app.add_subcommand("verify", "Run the randomized engine-vs-oracle suite");
  std::uint64_t seed = 1;
  std::size_t count = 200;
  bool quiet = false;
  verify->add_option("--seed", seed, "Suite seed");
  verify->add_option("--count", count, "Number of scenarios");
  verify->add_flag("--failures-only", quiet, "Print only failing checks and the summary");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? typ3::cli::Success : typ3::cli::InputError;
  }

  try {
    if (*verify) return run_verify(seed, count, quiet);

    if (ingest_cfg.data_path.empty()) throw typ3::input_error("--data is required");
    if (run_cfg.formula.empty()) throw typ3::input_error("--model is required");
    ingest_cfg.factors = split(factors, ',');
    ingest_cfg.covariates = split(covariates, ',');
    for (const auto& l : levels) add_levels(ingest_cfg, l);
    run_cfg.types = typ3::cli::parse_types(type);
    run_cfg.format = format == "json" ? typ3::cli::Format::Json : typ3::cli::Format::Text;
    run_cfg.tol.rel_rank_tol = tol;
    run_cfg.rationalize = !no_rationalize;

    const auto data = typ3::cli::ingest(ingest_cfg);
    const auto report = typ3::cli::analyze(data, run_cfg);
    std::cout << typ3::cli::render(report, run_cfg.format);
    return typ3::cli::Success;
  } catch (const typ3::input_error& e) {
    std::cerr << "typ3: error: " << e.what() << "\n";
    return typ3::cli::InputError;
  } catch (const typ3::numerical_error& e) {
    std::cerr << "typ3: numerical failure: " << e.what() << "\n";
    return typ3::cli::NumericalError;
  }
}
