#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cgmm/cd_classic.hpp"
#include "cgmm/dataset.hpp"
#include "cgmm/error.hpp"
#include "cgmm/gmm.hpp"
#include "cgmm/report.hpp"
#include "cgmm/simulate.hpp"

namespace cgmm::cli {

namespace {

struct EstimateArgs {
  std::string input;
  std::string response;
  std::vector<std::string> exposures;
  std::string env;
  std::vector<std::string> instruments;
  std::string method = "all";
  double level = 0.95;
  std::string format = "tsv";
  std::string out;
  bool center_xy = false;
};

struct SimulateArgs {
  std::string scenario;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replicates;
  std::optional<std::size_t> n;
  std::optional<double> level;
  std::string format = "tsv";
  std::string out;
  std::string replicates_file;
  unsigned threads = 0;
};

struct Row {
  std::string method;
  std::string coefficient;
  double estimate = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double p_value = 0.0;
  std::string identification;
  bool weak = false;
};

const std::vector<std::string> kMethods = {"gcd", "cd", "iv", "tsls", "hybrid", "ols"};

std::string_view Status(Identification id) {
  return id == Identification::kJustIdentified ? "just-identified" : "over-identified";
}

void AppendGmm(const std::string& method, const GmmFit& f, const Dataset& data, std::vector<Row>& rows) {
  for (Index j = 0; j < data.p(); ++j) {
    rows.push_back(Row{method, data.names().exposures[static_cast<std::size_t>(j)], f.beta(j), f.se(j), f.ci_low(j),
                       f.ci_high(j), f.p_values(j), std::string(Status(f.identification)),
                       f.diagnostics.weak_identification});
  }
}

void AppendCd(const CdFit& f, const Dataset& data, std::vector<Row>& rows) {
  const double z = normal_quantile(0.5 + 0.5 * f.level);
  for (Index j = 0; j < data.p(); ++j) {
    const double se = (f.ci_high(j) - f.ci_low(j)) / (2.0 * z);
    const double p = se > 0.0 ? std::erfc(std::abs(f.beta(j) / se) / std::sqrt(2.0)) : (f.beta(j) != 0.0 ? 0.0 : 1.0);
    rows.push_back(Row{"cd", data.names().exposures[static_cast<std::size_t>(j)], f.beta(j), se, f.ci_low(j),
                       f.ci_high(j), p, f.mode == CdMode::kTwoEnvironment ? "just-identified" : "one-vs-rest", false});
  }
}

// Dataset with categorical labels for the CD, when one can be formed.
std::optional<Dataset> CdData(const Dataset& data) {
  if (data.labels()) return data;
  if (data.q() != 1) return std::nullopt;
  return make_environment_dataset(data.X(), data.Y(), discretize_env(data.raw_instruments().col(0)), data.names());
}

void RunMethod(const std::string& method, const Dataset& data, double level, std::vector<Row>& rows) {
  if (method == "cd") {
    const auto labelled = CdData(data);
    if (!labelled) throw InvalidInput("cd needs --env or exactly one instrument column");
    AppendCd(cd_one_vs_rest(*labelled, level), *labelled, rows);
    return;
  }
  FitOptions options;
  options.level = level;
  MomentSpec spec;
  if (method == "tsls") {
    spec.family = MomentFamily::kIv;
    options.weighting = Weighting::kPilotOnly;
  } else {
    spec.family = parse_family(method);
  }
  AppendGmm(method, fit(spec, data, options), data, rows);
}

bool Applicable(const std::string& method, const Dataset& data) {
  if (method == "iv" || method == "tsls") return data.q() >= data.p();
  if (method == "cd") return data.labels().has_value() || data.q() == 1;
  return true;
}

std::string RowsToTsv(const std::vector<Row>& rows) {
  std::string out = "method\tcoefficient\testimate\tse\tci_low\tci_high\tp_value\tidentification\tweak\n";
  for (const auto& r : rows) {
    out += r.method + "\t" + r.coefficient + "\t" + format_g6(r.estimate) + "\t" + format_g6(r.se) + "\t" +
           format_g6(r.ci_low) + "\t" + format_g6(r.ci_high) + "\t" + format_g6(r.p_value) + "\t" + r.identification +
           "\t" + (r.weak ? "yes" : "no") + "\n";
  }
  return out;
}

std::string RowsToJson(const std::vector<Row>& rows, double level) {
  nlohmann::ordered_json j;
  j["level"] = level;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    j["rows"].push_back({{"method", r.method},
                         {"coefficient", r.coefficient},
                         {"estimate", r.estimate},
                         {"se", r.se},
                         {"ci_low", r.ci_low},
                         {"ci_high", r.ci_high},
                         {"p_value", r.p_value},
                         {"identification", r.identification},
                         {"weak_identification", r.weak}});
  }
  return j.dump(2) + "\n";
}

void WriteFile(const std::string& path, const std::string& content) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw InvalidInput("cannot write '" + path + "'");
  file << content;
  if (!file) throw InvalidInput("failed writing '" + path + "'");
}

int Estimate(const EstimateArgs& a, std::ostream& out, std::ostream& err) {
  if (a.env.empty() == a.instruments.empty()) throw InvalidInput("give exactly one of --env or --instruments");
  CsvRoles roles{a.response, a.exposures, a.instruments,
                 a.env.empty() ? std::nullopt : std::optional<std::string>(a.env)};
  Dataset data = load_csv(a.input, roles);
  if (a.center_xy) data = data.center_xy();

  std::vector<std::string> methods;
  if (a.method == "all") {
    for (const auto& m : kMethods) {
      if (Applicable(m, data)) {
        methods.push_back(m);
      } else {
        err << "skipping " << m << ": not applicable to " << data.p() << " exposure(s) and " << data.q()
            << " instrument column(s)\n";
      }
    }
  } else {
    methods.push_back(a.method);
  }

  std::vector<Row> rows;
  for (const auto& m : methods) RunMethod(m, data, a.level, rows);
  for (const auto& r : rows) {
    if (r.weak) err << "warning: " << r.method << " is weakly identified for " << r.coefficient << "\n";
  }
  const std::string text = a.format == "json" ? RowsToJson(rows, a.level) : RowsToTsv(rows);
  if (a.out.empty()) {
    out << text;
  } else {
    WriteFile(a.out, text);
  }
  return kExitOk;
}

int Simulate(const SimulateArgs& a, std::ostream& out, std::ostream& err) {
  if (a.scenario.empty() == a.config.empty()) throw InvalidInput("give a scenario name or --config, not both");
  Scenario s = a.config.empty() ? named_scenario(a.scenario) : load_scenario(a.config);
  if (a.seed) s.config.seed = *a.seed;
  if (a.replicates) s.replicates = *a.replicates;
  if (a.n) s.config.n = static_cast<Index>(*a.n);
  if (a.level) s.level = *a.level;
  s.config.validate();

  const unsigned threads = a.threads > 0 ? a.threads : std::max(1u, std::thread::hardware_concurrency());
  const McReport report = run_monte_carlo(s, threads);

  if (!a.replicates_file.empty()) WriteFile(a.replicates_file, replicates_to_tsv(report));
  if (a.out.empty()) {
    out << (a.format == "json" ? report_to_json(report) : report_to_tsv(report));
    err << summary_table(report);
  } else {
    WriteFile(a.out + ".tsv", report_to_tsv(report));
    WriteFile(a.out + ".json", report_to_json(report));
    out << summary_table(report);
  }
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Causal effect estimation with GMM, causal Dantzig and instrumental variables"};
  app.require_subcommand(1);

  EstimateArgs est;
  auto* estimate = app.add_subcommand("estimate", "Fit estimators on a CSV file");
  estimate->add_option("--input", est.input, "CSV file with a header row")->required();
  estimate->add_option("--response", est.response, "Response column")->required();
  estimate->add_option("--exposures", est.exposures, "Exposure columns (comma list)")->required()->delimiter(',');
  auto* env_opt = estimate->add_option("--env", est.env, "Categorical environment column");
  auto* inst_opt =
      estimate->add_option("--instruments", est.instruments, "Numeric instrument columns (comma list)")->delimiter(',');
  env_opt->excludes(inst_opt);
  estimate->add_option("--method", est.method, "Estimator")
      ->check(CLI::IsMember({"gcd", "cd", "iv", "tsls", "hybrid", "ols", "all"}));
  estimate->add_option("--level", est.level, "Confidence level")->check(CLI::Range(0.0, 1.0));
  estimate->add_option("--format", est.format, "Output format")->check(CLI::IsMember({"tsv", "json"}));
  estimate->add_option("--out", est.out, "Write the report here instead of stdout");
  estimate->add_flag("--center-xy", est.center_xy, "Center exposures and response before fitting");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Run a Monte Carlo study");
  simulate->add_option("scenario", sim.scenario, "Named scenario (see `scenarios`)");
  simulate->add_option("--config", sim.config, "Scenario file (key = value)");
  simulate->add_option("--seed", sim.seed, "RNG seed");
  simulate->add_option("--N", sim.replicates, "Replicate count");
  simulate->add_option("--n", sim.n, "Sample size per replicate");
  simulate->add_option("--level", sim.level, "Confidence level")->check(CLI::Range(0.0, 1.0));
  simulate->add_option("--format", sim.format, "Stdout format when --out is absent")
      ->check(CLI::IsMember({"tsv", "json"}));
  simulate->add_option("--out", sim.out, "Write PREFIX.tsv and PREFIX.json, print the summary");
  simulate->add_option("--replicates", sim.replicates_file, "Write per-replicate estimates (TSV)");
  simulate->add_option("--threads", sim.threads, "Worker threads (0 = hardware concurrency)");

  bool show = false;
  auto* scenarios = app.add_subcommand("scenarios", "List named scenarios");
  scenarios->add_flag("--show", show, "Print each scenario in config-file form");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, r;
    const int code = app.exit(e, o, r);
    out << o.str();
    err << r.str();
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*estimate) return Estimate(est, out, err);
    if (*simulate) return Simulate(sim, out, err);
    for (const auto& name : scenario_names()) {
      if (show) {
        out << "# " << name << "\n" << scenario_to_text(named_scenario(name)) << "\n";
      } else {
        out << name << "\n";
      }
    }
    return kExitOk;
  } catch (const InvalidInput& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const IdentificationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIdentification;
  } catch (const WeightError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIdentification;
  } catch (const InferenceError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIdentification;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace cgmm::cli
