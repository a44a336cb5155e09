#pragma once

#include <optional>

#include "cgmm/dataset.hpp"
#include "cgmm/moments.hpp"

namespace cgmm {

// Relative singular-value threshold used by every rank decision.
inline constexpr double kRankTolerance = 1e-10;
// Matrices with eigenvalue ratio below this (but above kRankTolerance) are ridged.
inline constexpr double kRidgeTrigger = 1e-8;
// Ridge size relative to trace / k.
inline constexpr double kRidgeScale = 1e-8;

// Symmetric positive definite k x k weight.
class WeightMatrix {
 public:
  // Throws WeightError unless `w` is symmetric (relative 1e-10) and positive definite.
  explicit WeightMatrix(Matrix w, double ridge = 0.0);

  static WeightMatrix identity(Index k);

  const Matrix& matrix() const noexcept { return w_; }
  Index size() const noexcept { return w_.rows(); }
  // Ridge added to the matrix that was inverted to build this weight (0 if none).
  double ridge() const noexcept { return ridge_; }

 private:
  Matrix w_;
  double ridge_;
};

enum class Identification { kJustIdentified, kOverIdentified };

enum class Weighting {
  // Pilot fit with ((1/n) G^T G)^{-1}, then the residual-based efficient weight.
  kTwoStep,
  // Single step with ((1/n) G^T G)^{-1}; for the IV family this is TSLS.
  kPilotOnly,
  kIdentity,
  // Single step with FitOptions::weight.
  kCustom,
};

struct FitOptions {
  Weighting weighting = Weighting::kTwoStep;
  std::optional<WeightMatrix> weight;
  double level = 0.95;
};

struct GmmDiagnostics {
  // Condition number of G^T X.
  double jacobian_condition = 0.0;
  // Condition number of the final weighted normal matrix X^T G W G^T X.
  double normal_condition = 0.0;
  // sqrt(n) times the smallest (uncentered) canonical correlation between
  // the columns of G and X.
  double identification_strength = 0.0;
  bool weak_identification = false;
  bool two_step = false;
  double weight_ridge = 0.0;
  // Some coefficient has a zero standard error.
  bool degenerate_ci = false;
  // Pilot residuals were exactly zero; the pilot solves every moment exactly.
  bool exact_fit = false;
};

// Below this identification_strength a fit is flagged as weakly identified.
inline constexpr double kWeakIdentificationThreshold = 3.0;

struct GmmFit {
  MomentSpec spec;
  Index n = 0;
  Vector beta;
  // Absent for just-identified fits.
  std::optional<WeightMatrix> weight;
  // Asymptotic covariance of sqrt(n) (beta_hat - beta).
  Matrix vcov;
  Vector se;
  Vector ci_low;
  Vector ci_high;
  Vector p_values;
  double level = 0.95;
  Identification identification = Identification::kJustIdentified;
  GmmDiagnostics diagnostics;
};

// argmin_beta m(beta)^T W m(beta), solved through the Cholesky factor of W.
Vector solve_weighted(const Matrix& g, const Matrix& x, const Vector& y, const WeightMatrix& w);

// (G^T X)^{-1} G^T Y for square G^T X.
Vector solve_just_identified(const Matrix& g, const Matrix& x, const Vector& y);

// ((1/n) E^T E)^{-1}.
WeightMatrix tsls_weight(const Matrix& e);

// ((1/n) G^T diag(r^2) G)^{-1} with r = Y - X beta_pilot.
WeightMatrix two_step_weight(const Matrix& g, const Matrix& x, const Vector& y, const Vector& beta_pilot);

// Sandwich (M^T W M)^{-1} M^T W V W M (M^T W M)^{-1} with M = (1/n) G^T X and
// V = (1/n) G^T diag(r^2) G, r the residuals at beta_hat.
Matrix asymptotic_variance(const Matrix& g, const Matrix& x, const Vector& y, const Vector& beta_hat,
                           const WeightMatrix& w_used);

// (M^T V^{-1} M)^{-1}; the sandwich under the efficient weight V^{-1}.
Matrix efficient_variance(const Matrix& g, const Matrix& x, const Vector& y, const Vector& beta_hat);

struct WaldResult {
  Vector ci_low;
  Vector ci_high;
  Vector p_values;
  bool degenerate = false;
};

// Normal-reference Wald intervals at the given confidence level using
// se = sqrt(diag(vcov) / n).
WaldResult wald_inference(const GmmFit& fit, double level);

// Standard normal quantile.
double normal_quantile(double probability);

GmmFit fit(const MomentSpec& spec, const Dataset& data, const FitOptions& options = {});

}  // namespace cgmm
