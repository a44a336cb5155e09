#pragma once

#include <string>
#include <vector>

#include "cgmm/dataset.hpp"

namespace cgmm {

enum class CdMode { kTwoEnvironment, kOneVsRest };

struct CdRun {
  std::string focal_environment;
  Vector beta;
  Vector ci_low;
  Vector ci_high;
};

struct CdFit {
  CdMode mode = CdMode::kTwoEnvironment;
  Vector beta;
  Vector ci_low;
  Vector ci_high;
  double level = 0.95;
  // One entry per environment.
  std::vector<CdRun> runs;
};

// Difference-of-Gram closed form
//   ((1/n1) X1^T X1 - (1/n0) X0^T X0)^{-1} ((1/n1) X1^T Y1 - (1/n0) X0^T Y0).
Vector causal_dantzig_two_env(const Matrix& x0, const Vector& y0, const Matrix& x1, const Vector& y1);

// Environment k against the pooled remaining rows, for every k. The merged
// estimate is the unweighted mean of the per-run estimates and the merged
// interval spans the smallest lower and largest upper limit. Per-run
// intervals come from the sandwich variance of the equivalent two-environment
// GMM fit. With two environments both runs give the same estimate.
CdFit cd_one_vs_rest(const Dataset& data, double level = 0.95);

}  // namespace cgmm
