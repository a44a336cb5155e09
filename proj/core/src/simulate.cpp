#include "cgmm/simulate.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <optional>
#include <thread>

#include "cgmm/cd_classic.hpp"
#include "cgmm/error.hpp"

namespace cgmm {

std::string_view to_string(Model model) {
  switch (model) {
    case Model::kMeanShift: return "mean_shift";
    case Model::kNoiseShift: return "noise_shift";
    case Model::kMeanVarShift: return "mean_var_shift";
    case Model::kDoIntervention: return "do_intervention";
    case Model::kOveridSem: return "overid_sem";
  }
  return "unknown";
}

Model parse_model(std::string_view name) {
  for (Model m : {Model::kMeanShift, Model::kNoiseShift, Model::kMeanVarShift, Model::kDoIntervention,
                  Model::kOveridSem}) {
    if (to_string(m) == name) return m;
  }
  throw InvalidInput("unknown model '" + std::string(name) + "'");
}

std::string_view to_string(InstrumentDistribution dist) {
  switch (dist) {
    case InstrumentDistribution::kUniform01: return "uniform01";
    case InstrumentDistribution::kBernoulli: return "bernoulli";
    case InstrumentDistribution::kTwoPoint: return "two_point";
  }
  return "unknown";
}

InstrumentDistribution parse_distribution(std::string_view name) {
  for (auto d : {InstrumentDistribution::kUniform01, InstrumentDistribution::kBernoulli,
                 InstrumentDistribution::kTwoPoint}) {
    if (to_string(d) == name) return d;
  }
  throw InvalidInput("unknown instrument distribution '" + std::string(name) + "'");
}

namespace {

// Support endpoints of E, used for the variance-scale restriction.
std::pair<double, double> Support(InstrumentDistribution dist) {
  switch (dist) {
    case InstrumentDistribution::kUniform01: return {0.0, 1.0};
    case InstrumentDistribution::kBernoulli: return {0.0, 1.0};
    case InstrumentDistribution::kTwoPoint: return {-1.0, 1.0};
  }
  return {0.0, 0.0};
}

bool HasVarianceShift(Model model) {
  return model == Model::kNoiseShift || model == Model::kMeanVarShift;
}

}  // namespace

void ScenarioConfig::validate() const {
  if (n < 2) throw InvalidInput("scenario n must be at least 2");
  if (model == Model::kOveridSem) {
    if (beta != std::vector<double>{0.0, 1.0, 0.0}) {
      throw InvalidInput("overid_sem has fixed causal parameter (0, 1, 0)");
    }
  } else if (beta.size() != 1) {
    throw InvalidInput(std::string(to_string(model)) + " has a single exposure; beta needs one value");
  }
  if (HasVarianceShift(model)) {
    const auto [lo, hi] = Support(e_dist);
    if (std::min(alpha_v * lo + alpha_0, alpha_v * hi + alpha_0) <= 0.0) {
      throw InvalidInput("alpha_v * E + alpha_0 must be positive over the support of E");
    }
  }
  if (e_dist == InstrumentDistribution::kBernoulli && !(e_param > 0.0 && e_param < 1.0)) {
    throw InvalidInput("bernoulli instrument probability must be in (0, 1)");
  }
  if (model == Model::kDoIntervention && !(pi_do > 0.0 && pi_do < 1.0)) {
    throw InvalidInput("pi_do must be in (0, 1)");
  }
}

Rng replicate_stream(std::uint64_t seed, std::uint64_t replicate) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(replicate), static_cast<std::uint32_t>(replicate >> 32)};
  return Rng(seq);
}

namespace {

Vector Normals(Index n, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Vector out(n);
  for (Index i = 0; i < n; ++i) out(i) = dist(rng);
  return out;
}

Vector Uniforms(Index n, Rng& rng) {
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  Vector out(n);
  for (Index i = 0; i < n; ++i) out(i) = dist(rng);
  return out;
}

Vector Bernoullis(Index n, double prob, Rng& rng) {
  std::bernoulli_distribution dist(prob);
  Vector out(n);
  for (Index i = 0; i < n; ++i) out(i) = dist(rng) ? 1.0 : 0.0;
  return out;
}

Vector DrawInstrument(const ScenarioConfig& c, Rng& rng) {
  switch (c.e_dist) {
    case InstrumentDistribution::kUniform01: return Uniforms(c.n, rng);
    case InstrumentDistribution::kBernoulli: return Bernoullis(c.n, c.e_param, rng);
    case InstrumentDistribution::kTwoPoint: return (2.0 * Bernoullis(c.n, 0.5, rng).array() - 1.0).matrix();
  }
  return Vector();
}

Dataset SingleExposure(const Vector& x, const Vector& y, const Vector& raw_e) {
  Matrix raw = raw_e;
  return Dataset(x, y, center_columns(raw), ColumnNames{"y", {"x"}, {"e"}}, std::nullopt, raw);
}

// Shared body of the three shift models.
Dataset ShiftModel(const ScenarioConfig& c, Rng& rng, double mean_shift, bool variance_shift) {
  c.validate();
  const Vector e = DrawInstrument(c, rng);
  const Vector h = Normals(c.n, rng);
  const Vector eps_x = Normals(c.n, rng);
  const Vector eps_y = Normals(c.n, rng);
  Vector scale = Vector::Ones(c.n);
  if (variance_shift) scale = (c.alpha_v * e.array() + c.alpha_0).matrix();
  const Vector x = (c.f_slope * h.array() + mean_shift * e.array() + scale.array() * eps_x.array()).matrix();
  const Vector y = (c.g_slope * h.array() + c.beta[0] * x.array() + eps_y.array()).matrix();
  return SingleExposure(x, y, e);
}

}  // namespace

Dataset gen_mean_shift(const ScenarioConfig& config, Rng& rng) {
  return ShiftModel(config, rng, config.mean_shift, false);
}

Dataset gen_noise_shift(const ScenarioConfig& config, Rng& rng) { return ShiftModel(config, rng, 0.0, true); }

Dataset gen_mean_var_shift(const ScenarioConfig& config, Rng& rng) {
  return ShiftModel(config, rng, config.mean_shift, true);
}

Dataset gen_do_intervention(const ScenarioConfig& c, Rng& rng) {
  c.validate();
  const Vector intervened = Bernoullis(c.n, c.pi_do, rng);
  const Vector h = Normals(c.n, rng);
  const Vector eps_x = Normals(c.n, rng);
  const Vector eps_y = Normals(c.n, rng);
  Vector x(c.n);
  for (Index i = 0; i < c.n; ++i) x(i) = intervened(i) == 1.0 ? c.x_do : c.f_slope * h(i) + eps_x(i);
  const Vector y = (c.g_slope * h.array() + c.beta[0] * x.array() + eps_y.array()).matrix();
  return SingleExposure(x, y, intervened);
}

OveridExogenous draw_overid_exogenous(Index n, Rng& rng) {
  OveridExogenous exo;
  exo.e1 = Bernoullis(n, 0.5, rng);
  exo.e2 = Uniforms(n, rng);
  exo.h = Normals(n, rng);
  exo.eps1 = Normals(n, rng);
  exo.eps2 = Normals(n, rng);
  exo.eps3 = Normals(n, rng);
  exo.eps_y = Normals(n, rng);
  return exo;
}

Dataset build_overid_sem(const OveridExogenous& exo) {
  const auto e1 = exo.e1.array();
  const auto e2 = exo.e2.array();
  const auto h = exo.h.array();
  const Vector x2 = (h + (1.0 + 3.0 * e1 + 5.0 * e2) * exo.eps2.array()).matrix();
  const Vector y = (h + x2.array() + exo.eps_y.array()).matrix();
  const Vector x1 = (y.array() + x2.array() + (1.0 + 3.0 * e1) * exo.eps1.array()).matrix();
  const Vector x3 = (h + x1.array() + (1.0 + 5.0 * e2) * exo.eps3.array()).matrix();

  const Index n = exo.h.size();
  Matrix x(n, 3);
  x << x1, x2, x3;
  Matrix raw(n, 2);
  raw << exo.e1, exo.e2;
  return Dataset(std::move(x), y, center_columns(raw), ColumnNames{"y", {"x1", "x2", "x3"}, {"e1", "e2"}},
                 std::nullopt, raw);
}

Dataset gen_overid_sem(const ScenarioConfig& config, Rng& rng) {
  config.validate();
  return build_overid_sem(draw_overid_exogenous(config.n, rng));
}

Dataset generate(const ScenarioConfig& config, Rng& rng) {
  switch (config.model) {
    case Model::kMeanShift: return gen_mean_shift(config, rng);
    case Model::kNoiseShift: return gen_noise_shift(config, rng);
    case Model::kMeanVarShift: return gen_mean_var_shift(config, rng);
    case Model::kDoIntervention: return gen_do_intervention(config, rng);
    case Model::kOveridSem: return gen_overid_sem(config, rng);
  }
  throw InvalidInput("unknown model");
}

EnvironmentLabels discretize_env(const Vector& column, DiscretizeRule rule) {
  if (rule != DiscretizeRule::kMedianSplit) throw InvalidInput("unknown discretization rule");
  if (column.size() == 0) throw InvalidInput("discretize_env: empty column");
  std::vector<double> sorted(column.data(), column.data() + column.size());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t m = sorted.size();
  const double median = m % 2 == 1 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
  std::vector<std::string> labels;
  labels.reserve(m);
  for (Index i = 0; i < column.size(); ++i) labels.emplace_back(column(i) > median ? "1" : "0");
  return EnvironmentLabels(std::move(labels));
}

EstimatorSpec parse_estimator(std::string_view name) {
  EstimatorSpec spec;
  spec.name = std::string(name);
  std::string_view base = name;
  const auto suffix = name.rfind("_e");
  if (suffix != std::string_view::npos && suffix + 2 < name.size()) {
    const std::string_view digits = name.substr(suffix + 2);
    int column = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), column);
    if (ec == std::errc() && ptr == digits.data() + digits.size()) {
      if (column < 1) throw InvalidInput("instrument index in '" + spec.name + "' must be >= 1");
      spec.instruments.push_back(column - 1);
      base = name.substr(0, suffix);
    }
  }
  if (base == "cd") {
    if (!spec.instruments.empty()) throw InvalidInput("cd does not take an instrument subset");
    spec.kind = EstimatorSpec::Kind::kCdMedianSplit;
  } else if (base == "tsls") {
    spec.moments.family = MomentFamily::kIv;
    spec.weighting = Weighting::kPilotOnly;
  } else if (base == "hybrid_x") {
    spec.moments.family = MomentFamily::kHybrid;
    spec.moments.hybrid_literal_x_block = true;
  } else {
    spec.moments.family = parse_family(base);
  }
  return spec;
}

std::vector<std::string> scenario_names() { return {"fig2", "table1", "model1", "model2", "do"}; }

namespace {

std::vector<EstimatorSpec> Estimators(std::initializer_list<std::string_view> names) {
  std::vector<EstimatorSpec> out;
  for (auto name : names) out.push_back(parse_estimator(name));
  return out;
}

}  // namespace

Scenario named_scenario(std::string_view name) {
  Scenario s;
  s.name = std::string(name);
  ScenarioConfig& c = s.config;
  if (name == "fig2") {
    c.model = Model::kNoiseShift;
    c.n = 100;
    c.f_slope = 9.0;
    c.g_slope = 3.0;
    c.alpha_0 = 1.0;
    c.alpha_v = 10.0;
    s.replicates = 1000;
    s.estimators = Estimators({"gcd", "cd", "ols"});
  } else if (name == "table1") {
    c.model = Model::kOveridSem;
    c.n = 200;
    c.beta = {0.0, 1.0, 0.0};
    s.replicates = 500;
    s.estimators = Estimators({"gcd", "gcd_e1", "gcd_e2", "ols"});
  } else if (name == "model1" || name == "model2") {
    c.model = Model::kMeanVarShift;
    c.n = 100;
    c.alpha_0 = 1.0;
    c.mean_shift = name == "model1" ? 5.0 : 1.0;
    c.alpha_v = name == "model1" ? 1.0 : 5.0;
    s.replicates = 1000;
    s.center_xy = true;
    s.estimators = Estimators({"iv", "gcd", "hybrid"});
  } else if (name == "do") {
    c.model = Model::kDoIntervention;
    c.n = 500;
    c.x_do = 2.0;
    c.pi_do = 0.5;
    s.replicates = 1000;
    s.estimators = Estimators({"iv", "gcd"});
  } else {
    std::string valid;
    for (const auto& v : scenario_names()) valid += (valid.empty() ? "" : ", ") + v;
    throw InvalidInput("unknown scenario '" + std::string(name) + "' (valid: " + valid + ")");
  }
  return s;
}

namespace {

struct Outcome {
  bool ok = false;
  Vector beta, se, low, high;
};

Outcome RunEstimator(const EstimatorSpec& est, const Dataset& data, double level) {
  Outcome out;
  if (est.kind == EstimatorSpec::Kind::kCdMedianSplit) {
    const Dataset labelled =
        make_environment_dataset(data.X(), data.Y(), discretize_env(data.E().col(0)), data.names());
    const CdFit cd = cd_one_vs_rest(labelled, level);
    const double z = normal_quantile(0.5 + 0.5 * level);
    out.beta = cd.beta;
    out.low = cd.ci_low;
    out.high = cd.ci_high;
    out.se = (cd.ci_high - cd.ci_low) / (2.0 * z);
  } else {
    const Dataset subset = est.instruments.empty() ? data : data.select_instruments(est.instruments);
    FitOptions options;
    options.weighting = est.weighting;
    options.level = level;
    GmmFit f = fit(est.moments, subset, options);
    out.beta = std::move(f.beta);
    out.se = std::move(f.se);
    out.low = std::move(f.ci_low);
    out.high = std::move(f.ci_high);
  }
  out.ok = out.beta.allFinite() && out.low.allFinite() && out.high.allFinite();
  return out;
}

double Median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size();
  return m % 2 == 1 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

}  // namespace

McReport run_monte_carlo(const Scenario& scenario, unsigned threads) {
  if (scenario.replicates < 1) throw InvalidInput("Monte Carlo needs at least one replicate");
  if (scenario.estimators.empty()) throw InvalidInput("Monte Carlo needs at least one estimator");
  if (!(scenario.level > 0.0 && scenario.level < 1.0)) throw InvalidInput("confidence level must be in (0, 1)");
  scenario.config.validate();

  const std::size_t reps = scenario.replicates;
  const std::size_t num_est = scenario.estimators.size();
  std::vector<Outcome> outcomes(reps * num_est);
  std::vector<std::string> coefficient_names;

  auto work = [&](std::size_t first, std::size_t stride) {
    for (std::size_t r = first; r < reps; r += stride) {
      Rng rng = replicate_stream(scenario.config.seed, r);
      Dataset data = generate(scenario.config, rng);
      if (scenario.center_xy) data = data.center_xy();
      for (std::size_t k = 0; k < num_est; ++k) {
        try {
          outcomes[r * num_est + k] = RunEstimator(scenario.estimators[k], data, scenario.level);
        } catch (const InvalidInput&) {
          throw;
        } catch (const Error&) {
          outcomes[r * num_est + k] = Outcome{};
        }
      }
    }
  };

  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(reps)));
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          work(t, threads);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  {
    Rng rng = replicate_stream(scenario.config.seed, 0);
    coefficient_names = generate(scenario.config, rng).names().exposures;
  }
  const auto p = static_cast<Index>(coefficient_names.size());
  const std::vector<double>& truth = scenario.config.beta;

  McReport report;
  report.scenario = scenario.name;
  report.seed = scenario.config.seed;
  report.replicates = reps;
  report.level = scenario.level;

  for (std::size_t k = 0; k < num_est; ++k) {
    const std::string& est = scenario.estimators[k].name;
    std::size_t failures = 0;
    for (std::size_t r = 0; r < reps; ++r) failures += outcomes[r * num_est + k].ok ? 0 : 1;
    if (static_cast<double>(failures) > kMaxFailureRate * static_cast<double>(reps)) {
      throw Error("estimator '" + est + "' failed in " + std::to_string(failures) + " of " + std::to_string(reps) +
                  " replicates");
    }
    for (Index j = 0; j < p; ++j) {
      CoefficientSummary s;
      s.estimator = est;
      s.coefficient = coefficient_names[static_cast<std::size_t>(j)];
      s.truth = truth[static_cast<std::size_t>(j)];
      s.failures = failures;
      std::vector<double> estimates, widths;
      double covered = 0.0, se_sum = 0.0;
      for (std::size_t r = 0; r < reps; ++r) {
        const Outcome& o = outcomes[r * num_est + k];
        if (!o.ok) continue;
        estimates.push_back(o.beta(j));
        widths.push_back(o.high(j) - o.low(j));
        se_sum += o.se(j);
        covered += (o.low(j) <= s.truth && s.truth <= o.high(j)) ? 1.0 : 0.0;
      }
      s.fits = estimates.size();
      const double m = static_cast<double>(s.fits);
      s.coverage = covered / m;
      s.median_width = Median(widths);
      s.mean_estimate = std::accumulate(estimates.begin(), estimates.end(), 0.0) / m;
      s.mean_bias = s.mean_estimate - s.truth;
      s.median_estimate = Median(estimates);
      double ss = 0.0;
      for (double v : estimates) ss += (v - s.mean_estimate) * (v - s.mean_estimate);
      s.empirical_sd = s.fits > 1 ? std::sqrt(ss / (m - 1.0)) : 0.0;
      s.mean_se = se_sum / m;
      report.summaries.push_back(std::move(s));
    }
  }

  report.estimates.reserve(reps * num_est * static_cast<std::size_t>(p));
  for (std::size_t r = 0; r < reps; ++r) {
    for (std::size_t k = 0; k < num_est; ++k) {
      const Outcome& o = outcomes[r * num_est + k];
      if (!o.ok) continue;
      for (Index j = 0; j < p; ++j) {
        report.estimates.push_back(ReplicateEstimate{r, scenario.estimators[k].name,
                                                     coefficient_names[static_cast<std::size_t>(j)], o.beta(j),
                                                     o.se(j), o.low(j), o.high(j)});
      }
    }
  }
  return report;
}

}  // namespace cgmm
