#pragma once

#include <string>

#include "cgmm/simulate.hpp"

namespace cgmm {

// One row per estimator x coefficient, numbers at 6 significant digits.
std::string report_to_tsv(const McReport& report);
// Same rows plus the per-replicate table, numbers at full double precision.
std::string report_to_json(const McReport& report);
// Per-replicate estimates as TSV.
std::string replicates_to_tsv(const McReport& report);
// Coverage and median-width grid, one line per estimator.
std::string summary_table(const McReport& report);

// Flat key-value scenario file:
//
//   # comment
//   model = "overid_sem"
//   n = 200
//   seed = 42
//   N = 500
//   estimators = ["gcd", "gcd_e1", "ols"]
//
// Keys: name, model, n, N, seed, level, beta, R, alpha_v, alpha_0, f_slope,
// g_slope, x_do, pi_do, e_dist, e_param, center_xy, estimators. Absent keys
// keep the ScenarioConfig defaults, or those of the named scenario given by a
// `scenario = "..."` line.
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);
std::string scenario_to_text(const Scenario& scenario);

// printf("%.6g")
std::string format_g6(double value);

}  // namespace cgmm
