#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "cgmm/dataset.hpp"
#include "cgmm/gmm.hpp"
#include "cgmm/moments.hpp"

namespace cgmm {

enum class Model { kMeanShift, kNoiseShift, kMeanVarShift, kDoIntervention, kOveridSem };
enum class InstrumentDistribution { kUniform01, kBernoulli, kTwoPoint };

std::string_view to_string(Model model);
Model parse_model(std::string_view name);
std::string_view to_string(InstrumentDistribution dist);
InstrumentDistribution parse_distribution(std::string_view name);

// Parameters of one structural equation model.
//
// Single-exposure models:
//   mean shift      X = f h + R E + eps_X
//   noise shift     X = f h + (alpha_v E + alpha_0) eps_X
//   mean+var shift  X = f h + R E + (alpha_v E + alpha_0) eps_X
//   do-intervention X = x_do with probability pi_do, else f h + eps_X
// all with Y = g h + beta X + eps_Y and f h = f_slope * h, g h = g_slope * h.
// h and the eps terms are standard normal and independent of E.
struct ScenarioConfig {
  Model model = Model::kNoiseShift;
  Index n = 100;
  // One entry for single-exposure models; (0, 1, 0) for the over-identified SEM.
  std::vector<double> beta = {1.0};
  double mean_shift = 0.0;  // R
  double alpha_v = 0.0;
  double alpha_0 = 1.0;
  double f_slope = 1.0;
  double g_slope = 1.0;
  double x_do = 2.0;
  double pi_do = 0.5;
  InstrumentDistribution e_dist = InstrumentDistribution::kUniform01;
  // Success probability for kBernoulli; unused otherwise.
  double e_param = 0.5;
  std::uint64_t seed = 42;

  // Throws InvalidInput on n < 2, a wrong-length beta, a non-positive
  // variance scale alpha_v E + alpha_0 over the support of E, or pi_do
  // outside (0, 1).
  void validate() const;
};

using Rng = std::mt19937_64;

// Independent stream for replicate `replicate` of a run seeded with `seed`.
Rng replicate_stream(std::uint64_t seed, std::uint64_t replicate);

Dataset gen_mean_shift(const ScenarioConfig& config, Rng& rng);
Dataset gen_noise_shift(const ScenarioConfig& config, Rng& rng);
Dataset gen_mean_var_shift(const ScenarioConfig& config, Rng& rng);
Dataset gen_do_intervention(const ScenarioConfig& config, Rng& rng);
Dataset gen_overid_sem(const ScenarioConfig& config, Rng& rng);
// Dispatches on config.model.
Dataset generate(const ScenarioConfig& config, Rng& rng);

// Exogenous inputs of the three-exposure over-identified SEM.
struct OveridExogenous {
  Vector e1, e2, h, eps1, eps2, eps3, eps_y;
};
OveridExogenous draw_overid_exogenous(Index n, Rng& rng);
// Evaluates the structural equations in the order X2, Y, X1, X3.
Dataset build_overid_sem(const OveridExogenous& exo);

enum class DiscretizeRule { kMedianSplit };

// Label "1" where the value exceeds the sample median, "0" otherwise.
EnvironmentLabels discretize_env(const Vector& column, DiscretizeRule rule = DiscretizeRule::kMedianSplit);

// How a Monte Carlo estimator is computed from one simulated dataset.
struct EstimatorSpec {
  enum class Kind { kGmm, kCdMedianSplit };

  std::string name;
  Kind kind = Kind::kGmm;
  MomentSpec moments;
  Weighting weighting = Weighting::kTwoStep;
  // Instrument columns to keep (0-based); empty keeps all.
  std::vector<Index> instruments;
};

// Parses gcd, iv, tsls, hybrid, hybrid_x, ols, cd, or <family>_e<k> for a
// fit restricted to instrument column k (1-based).
EstimatorSpec parse_estimator(std::string_view name);

struct Scenario {
  std::string name;
  ScenarioConfig config;
  std::vector<EstimatorSpec> estimators;
  std::size_t replicates = 500;
  double level = 0.95;
  // Center X and Y before every fit.
  bool center_xy = false;
};

std::vector<std::string> scenario_names();
Scenario named_scenario(std::string_view name);

struct CoefficientSummary {
  std::string estimator;
  std::string coefficient;
  double truth = 0.0;
  double coverage = 0.0;
  double median_width = 0.0;
  double mean_estimate = 0.0;
  double mean_bias = 0.0;
  double median_estimate = 0.0;
  double empirical_sd = 0.0;
  double mean_se = 0.0;
  std::size_t fits = 0;
  std::size_t failures = 0;
};

struct ReplicateEstimate {
  std::size_t replicate = 0;
  std::string estimator;
  std::string coefficient;
  double estimate = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct McReport {
  std::string scenario;
  std::uint64_t seed = 0;
  std::size_t replicates = 0;
  double level = 0.95;
  std::vector<CoefficientSummary> summaries;
  // Ordered by replicate, then estimator, then coefficient.
  std::vector<ReplicateEstimate> estimates;
};

// Share of failed fits per estimator above which a run is aborted.
inline constexpr double kMaxFailureRate = 0.05;

// Replicate i draws from replicate_stream(config.seed, i); results are
// identical for any thread count.
McReport run_monte_carlo(const Scenario& scenario, unsigned threads = 1);

}  // namespace cgmm
