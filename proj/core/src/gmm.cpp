#include "cgmm/gmm.hpp"

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cgmm/error.hpp"

namespace cgmm {

namespace {

std::string Shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

Vector SingularValues(const Matrix& m) {
  return Eigen::JacobiSVD<Matrix>(m).singularValues();
}

Index NumericalRank(const Vector& singular) {
  if (singular.size() == 0 || singular(0) <= 0.0) return 0;
  const double cutoff = kRankTolerance * singular(0);
  Index rank = 0;
  for (Index i = 0; i < singular.size(); ++i) rank += singular(i) > cutoff ? 1 : 0;
  return rank;
}

double ConditionNumber(const Vector& singular) {
  if (singular.size() == 0) return 0.0;
  const double smallest = singular(singular.size() - 1);
  if (smallest <= 0.0) return std::numeric_limits<double>::infinity();
  return singular(0) / smallest;
}

void CheckShapes(const Matrix& g, const Matrix& x, const Vector& y) {
  if (g.rows() != x.rows() || y.size() != x.rows()) {
    throw InvalidInput("row counts differ: G " + Shape(g) + ", X " + Shape(x) + ", Y " +
                       std::to_string(y.size()));
  }
}

// Identification requires G^T X (k x p) to have column rank p.
void CheckIdentified(const Matrix& gtx) {
  const Index p = gtx.cols();
  if (gtx.rows() < p) {
    throw IdentificationError("under-identified: " + std::to_string(gtx.rows()) +
                              " moment conditions for " + std::to_string(p) + " parameters");
  }
  const Index rank = NumericalRank(SingularValues(gtx));
  if (rank < p) {
    throw IdentificationError("rank-deficient G^T X (" + Shape(gtx) + "): column rank " +
                              std::to_string(rank) + ", " + std::to_string(p - rank) +
                              " parameter direction(s) not identified");
  }
}

// (A^T A)^{-1} through the SVD of A, with the rank checked on A itself.
Matrix InverseGramOf(const Matrix& a, const char* what) {
  const Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinV);
  if (NumericalRank(svd.singularValues()) < a.cols()) {
    throw InferenceError(std::string(what) + " is singular; variance is not defined");
  }
  const Vector inv_sq = svd.singularValues().array().square().inverse().matrix();
  return svd.matrixV() * inv_sq.asDiagonal() * svd.matrixV().transpose();
}

// Upper factor U with U^T U = W.
Matrix SqrtWeight(const Matrix& w) {
  const Eigen::LLT<Matrix> llt(w);
  if (llt.info() != Eigen::Success) throw WeightError("weight matrix Cholesky factorization failed");
  return llt.matrixU();
}

struct Inverted {
  Matrix inverse;
  double ridge = 0.0;
};

// Inverts a symmetric positive semidefinite matrix with the ridge policy:
// eigenvalue ratio <= kRankTolerance fails, < kRidgeTrigger is ridged.
Inverted InvertGram(Matrix s, const char* what) {
  s = 0.5 * (s + s.transpose());
  const Index k = s.rows();
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(s, Eigen::EigenvaluesOnly);
  const double largest = eig.eigenvalues().maxCoeff();
  const double smallest = eig.eigenvalues().minCoeff();
  if (!(largest > 0.0)) throw WeightError(std::string(what) + " is zero or not positive semidefinite");
  if (smallest <= kRankTolerance * largest) {
    throw WeightError(std::string(what) + " is rank deficient (eigenvalue ratio " +
                      std::to_string(smallest / largest) + "); check for collinear columns");
  }
  Inverted out;
  if (smallest < kRidgeTrigger * largest) {
    out.ridge = kRidgeScale * s.trace() / static_cast<double>(k);
    s.diagonal().array() += out.ridge;
  }
  out.inverse = s.ldlt().solve(Matrix::Identity(k, k));
  out.inverse = 0.5 * (out.inverse + out.inverse.transpose());
  return out;
}

Matrix ResidualGram(const Matrix& g, const Matrix& x, const Vector& y, const Vector& beta) {
  const Vector r = y - x * beta;
  const Matrix scaled = g.array().colwise() * r.array().square();
  return g.transpose() * scaled / static_cast<double>(g.rows());
}

// Orthonormal basis of the column span of m.
Matrix ColumnBasis(const Matrix& m) {
  const Eigen::ColPivHouseholderQR<Matrix> qr(m);
  const Matrix q = qr.householderQ() * Matrix::Identity(m.rows(), m.cols());
  return q.leftCols(qr.rank());
}

// Re-raises with the failing stage prepended, keeping the dynamic type.
template <typename Fn>
auto Stage(const char* stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const DegenerateWeightError& e) {
    throw DegenerateWeightError(std::string(stage) + ": " + e.what());
  } catch (const WeightError& e) {
    throw WeightError(std::string(stage) + ": " + e.what());
  } catch (const IdentificationError& e) {
    throw IdentificationError(std::string(stage) + ": " + e.what());
  } catch (const InferenceError& e) {
    throw InferenceError(std::string(stage) + ": " + e.what());
  }
}

}  // namespace

WeightMatrix::WeightMatrix(Matrix w, double ridge) : w_(std::move(w)), ridge_(ridge) {
  if (w_.rows() != w_.cols() || w_.rows() == 0) throw WeightError("weight matrix must be square, got " + Shape(w_));
  if (!w_.allFinite()) throw WeightError("weight matrix has non-finite entries");
  const double scale = std::max(w_.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  if ((w_ - w_.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw WeightError("weight matrix is not symmetric");
  }
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(w_, Eigen::EigenvaluesOnly);
  const double largest = eig.eigenvalues().maxCoeff();
  const double smallest = eig.eigenvalues().minCoeff();
  if (!(largest > 0.0) || smallest <= kRankTolerance * largest) {
    throw WeightError("weight matrix is not positive definite (smallest eigenvalue " +
                      std::to_string(smallest) + ")");
  }
}

WeightMatrix WeightMatrix::identity(Index k) { return WeightMatrix(Matrix::Identity(k, k)); }

Vector solve_weighted(const Matrix& g, const Matrix& x, const Vector& y, const WeightMatrix& w) {
  CheckShapes(g, x, y);
  if (w.size() != g.cols()) {
    throw WeightError("weight is " + std::to_string(w.size()) + "x" + std::to_string(w.size()) + " but there are " +
                      std::to_string(g.cols()) + " moment conditions");
  }
  const Matrix gtx = g.transpose() * x;
  CheckIdentified(gtx);
  const Vector gty = g.transpose() * y;
  // W = L L^T, so ||G^T(Y - X b)||_W = ||L^T G^T Y - L^T G^T X b||_2.
  const Eigen::LLT<Matrix> llt(w.matrix());
  if (llt.info() != Eigen::Success) throw WeightError("weight matrix Cholesky factorization failed");
  const Matrix lt = llt.matrixU();
  const Matrix a = lt * gtx;
  const Vector b = lt * gty;
  Eigen::ColPivHouseholderQR<Matrix> qr(a);
  qr.setThreshold(kRankTolerance);
  if (qr.rank() < x.cols()) {
    throw IdentificationError("weighted normal system is rank deficient (rank " + std::to_string(qr.rank()) +
                              " of " + std::to_string(x.cols()) + ")");
  }
  return qr.solve(b);
}

Vector solve_just_identified(const Matrix& g, const Matrix& x, const Vector& y) {
  CheckShapes(g, x, y);
  if (g.cols() != x.cols()) {
    throw InvalidInput("just-identified solve needs square G^T X, got " + std::to_string(g.cols()) + "x" +
                       std::to_string(x.cols()));
  }
  const Matrix gtx = g.transpose() * x;
  CheckIdentified(gtx);
  Eigen::ColPivHouseholderQR<Matrix> qr(gtx);
  qr.setThreshold(kRankTolerance);
  return qr.solve(Vector(g.transpose() * y));
}

WeightMatrix tsls_weight(const Matrix& e) {
  if (e.rows() == 0 || e.cols() == 0) throw WeightError("empty instrument matrix");
  const Matrix gram = e.transpose() * e / static_cast<double>(e.rows());
  try {
    Inverted inv = InvertGram(gram, "(1/n) E^T E");
    return WeightMatrix(std::move(inv.inverse), inv.ridge);
  } catch (const WeightError& err) {
    throw WeightError(std::string("TSLS weight: ") + err.what());
  }
}

WeightMatrix two_step_weight(const Matrix& g, const Matrix& x, const Vector& y, const Vector& beta_pilot) {
  CheckShapes(g, x, y);
  if (beta_pilot.size() != x.cols() || !beta_pilot.allFinite()) {
    throw InvalidInput("pilot beta must be a finite " + std::to_string(x.cols()) + "-vector");
  }
  const Vector r = y - x * beta_pilot;
  if ((r.array() == 0.0).all()) {
    throw DegenerateWeightError("all pilot residuals are exactly zero; the residual-based weight is undefined");
  }
  Inverted inv = InvertGram(ResidualGram(g, x, y, beta_pilot), "(1/n) G^T diag(r^2) G");
  return WeightMatrix(std::move(inv.inverse), inv.ridge);
}

Matrix asymptotic_variance(const Matrix& g, const Matrix& x, const Vector& y, const Vector& beta_hat,
                           const WeightMatrix& w_used) {
  CheckShapes(g, x, y);
  if (w_used.size() != g.cols()) throw WeightError("weight dimension does not match moment count");
  const double n = static_cast<double>(g.rows());
  const Matrix m = g.transpose() * x / n;
  const Matrix v = ResidualGram(g, x, y, beta_hat);
  const Matrix wm = w_used.matrix() * m;
  const Matrix bread_inv = InverseGramOf(SqrtWeight(w_used.matrix()) * m, "M^T W M");
  const Matrix meat = wm.transpose() * v * wm;
  Matrix sigma = bread_inv * meat * bread_inv;
  return 0.5 * (sigma + sigma.transpose());
}

Matrix efficient_variance(const Matrix& g, const Matrix& x, const Vector& y, const Vector& beta_hat) {
  CheckShapes(g, x, y);
  const double n = static_cast<double>(g.rows());
  const Matrix m = g.transpose() * x / n;
  const Eigen::LLT<Matrix> v_llt(ResidualGram(g, x, y, beta_hat));
  if (v_llt.info() != Eigen::Success) throw InferenceError("V is not positive definite");
  Matrix sigma = InverseGramOf(v_llt.matrixL().solve(m), "M^T V^{-1} M");
  return 0.5 * (sigma + sigma.transpose());
}

double normal_quantile(double probability) {
  if (!(probability > 0.0 && probability < 1.0)) throw InvalidInput("quantile probability must be in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), probability);
}

WaldResult wald_inference(const GmmFit& fit, double level) {
  if (!(level > 0.0 && level < 1.0)) throw InvalidInput("confidence level must be in (0, 1)");
  const Index p = fit.beta.size();
  if (fit.vcov.rows() != p || fit.vcov.cols() != p || fit.n <= 0) {
    throw InferenceError("fit has no variance estimate");
  }
  const double z = normal_quantile(0.5 + 0.5 * level);
  WaldResult out{Vector(p), Vector(p), Vector(p), false};
  for (Index j = 0; j < p; ++j) {
    const double se = std::sqrt(std::max(fit.vcov(j, j), 0.0) / static_cast<double>(fit.n));
    out.ci_low(j) = fit.beta(j) - z * se;
    out.ci_high(j) = fit.beta(j) + z * se;
    if (se > 0.0) {
      out.p_values(j) = std::erfc(std::abs(fit.beta(j) / se) / std::sqrt(2.0));
    } else {
      out.degenerate = true;
      out.p_values(j) = fit.beta(j) != 0.0 ? 0.0 : 1.0;
    }
  }
  return out;
}

GmmFit fit(const MomentSpec& spec, const Dataset& data, const FitOptions& options) {
  if (!(options.level > 0.0 && options.level < 1.0)) throw InvalidInput("confidence level must be in (0, 1)");
  const Matrix g = instrument_block(spec, data);
  const Matrix& x = data.X();
  const Vector& y = data.Y();
  const Index k = g.cols();
  const Index p = x.cols();
  if (k < p) {
    throw IdentificationError("under-identified: " + std::string(to_string(spec.family)) + " has " +
                              std::to_string(k) + " moment conditions for " + std::to_string(p) + " exposures");
  }

  GmmFit out;
  out.spec = spec;
  out.n = data.n();
  out.level = options.level;

  const Matrix gtx = g.transpose() * x;
  const Vector gtx_singular = SingularValues(gtx);
  out.diagnostics.jacobian_condition = ConditionNumber(gtx_singular);
  // Smallest canonical correlation between the spans of G and X.
  const Vector canonical = SingularValues(ColumnBasis(g).transpose() * ColumnBasis(x));
  out.diagnostics.identification_strength =
      std::sqrt(static_cast<double>(data.n())) * canonical(canonical.size() - 1);
  out.diagnostics.weak_identification =
      out.diagnostics.identification_strength < kWeakIdentificationThreshold;

  WeightMatrix used = WeightMatrix::identity(k);
  if (k == p) {
    out.identification = Identification::kJustIdentified;
    out.beta = Stage("just-identified solve", [&] { return solve_just_identified(g, x, y); });
  } else {
    out.identification = Identification::kOverIdentified;
    switch (options.weighting) {
      case Weighting::kIdentity:
        break;
      case Weighting::kCustom:
        if (!options.weight) throw WeightError("custom weighting requested without a weight matrix");
        used = *options.weight;
        break;
      case Weighting::kPilotOnly:
      case Weighting::kTwoStep:
        used = Stage("pilot weight", [&] { return tsls_weight(g); });
        break;
    }
    out.beta = Stage("pilot fit", [&] { return solve_weighted(g, x, y, used); });
    if (options.weighting == Weighting::kTwoStep) {
      out.diagnostics.two_step = true;
      if (((y - x * out.beta).array() == 0.0).all()) {
        out.diagnostics.exact_fit = true;
      } else {
        const Vector pilot = out.beta;
        used = Stage("two-step weight", [&] { return two_step_weight(g, x, y, pilot); });
        out.beta = Stage("final fit", [&] { return solve_weighted(g, x, y, used); });
      }
    }
    out.weight = used;
    out.diagnostics.weight_ridge = used.ridge();
  }

  const Matrix normal = gtx.transpose() * used.matrix() * gtx;
  out.diagnostics.normal_condition = ConditionNumber(SingularValues(normal));
  out.vcov = Stage("variance", [&] { return asymptotic_variance(g, x, y, out.beta, used); });
  out.se = (out.vcov.diagonal().array().max(0.0) / static_cast<double>(out.n)).sqrt();
  WaldResult wald = wald_inference(out, options.level);
  out.ci_low = std::move(wald.ci_low);
  out.ci_high = std::move(wald.ci_high);
  out.p_values = std::move(wald.p_values);
  out.diagnostics.degenerate_ci = wald.degenerate;
  return out;
}

}  // namespace cgmm
