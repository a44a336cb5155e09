#include "cgmm/cd_classic.hpp"

#include <Eigen/Dense>

#include <utility>

#include "cgmm/error.hpp"
#include "cgmm/gmm.hpp"

namespace cgmm {

Vector causal_dantzig_two_env(const Matrix& x0, const Vector& y0, const Matrix& x1, const Vector& y1) {
  if (x0.rows() != y0.size() || x1.rows() != y1.size()) throw InvalidInput("causal dantzig: X/Y row counts differ");
  if (x0.cols() != x1.cols()) throw InvalidInput("causal dantzig: environments have different exposure counts");
  if (x0.rows() == 0 || x1.rows() == 0) throw InvalidInput("causal dantzig: an environment is empty");
  const double n0 = static_cast<double>(x0.rows());
  const double n1 = static_cast<double>(x1.rows());
  const Matrix gram = x1.transpose() * x1 / n1 - x0.transpose() * x0 / n0;
  const Vector cross = x1.transpose() * y1 / n1 - x0.transpose() * y0 / n0;

  const Eigen::JacobiSVD<Matrix> svd(gram);
  const Vector& s = svd.singularValues();
  const double scale = std::max((x1.transpose() * x1 / n1).norm(), (x0.transpose() * x0 / n0).norm());
  Index rank = 0;
  for (Index i = 0; i < s.size(); ++i) rank += s(i) > kRankTolerance * std::max(s(0), scale) ? 1 : 0;
  if (rank < gram.rows()) {
    throw IdentificationError("difference of environment Gram matrices is singular (rank " + std::to_string(rank) +
                              " of " + std::to_string(gram.rows()) + "); environments too similar");
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(gram);
  return qr.solve(cross);
}

namespace {

struct Split {
  Matrix x0, x1;
  Vector y0, y1;
};

Split SplitByFocus(const Dataset& data, std::size_t focal) {
  const auto& codes = data.labels()->codes();
  const Index n = data.n();
  Index n1 = 0;
  for (auto c : codes) n1 += c == focal ? 1 : 0;
  Split s{Matrix(n - n1, data.p()), Matrix(n1, data.p()), Vector(n - n1), Vector(n1)};
  Index i0 = 0, i1 = 0;
  for (Index i = 0; i < n; ++i) {
    if (codes[static_cast<std::size_t>(i)] == focal) {
      s.x1.row(i1) = data.X().row(i);
      s.y1(i1++) = data.Y()(i);
    } else {
      s.x0.row(i0) = data.X().row(i);
      s.y0(i0++) = data.Y()(i);
    }
  }
  return s;
}

}  // namespace

CdFit cd_one_vs_rest(const Dataset& data, double level) {
  if (!data.labels()) throw InvalidInput("causal dantzig needs categorical environment labels");
  const EnvironmentLabels& labels = *data.labels();
  const std::size_t r = labels.num_levels();

  CdFit out;
  out.level = level;
  out.mode = r == 2 ? CdMode::kTwoEnvironment : CdMode::kOneVsRest;

  MomentSpec gcd{MomentFamily::kGcd};
  for (std::size_t k = 0; k < r; ++k) {
    const std::string& focal = labels.levels()[k];
    try {
      const Split s = SplitByFocus(data, k);
      Vector beta = causal_dantzig_two_env(s.x0, s.y0, s.x1, s.y1);

      std::vector<std::string> contrast(labels.size());
      for (std::size_t i = 0; i < labels.size(); ++i) contrast[i] = labels.codes()[i] == k ? "focal" : "rest";
      const Dataset two_env = make_environment_dataset(data.X(), data.Y(), EnvironmentLabels(std::move(contrast)),
                                                       ColumnNames{data.names().response, data.names().exposures, {}});
      FitOptions options;
      options.level = level;
      GmmFit inference = fit(gcd, two_env, options);
      const Vector half = 0.5 * (inference.ci_high - inference.ci_low);
      out.runs.push_back(CdRun{focal, beta, beta - half, beta + half});
    } catch (const IdentificationError& e) {
      throw IdentificationError("causal dantzig, environment '" + focal + "' vs rest: " + e.what());
    }
  }

  const Index p = data.p();
  out.beta = Vector::Zero(p);
  out.ci_low = out.runs.front().ci_low;
  out.ci_high = out.runs.front().ci_high;
  for (const auto& run : out.runs) {
    out.beta += run.beta;
    out.ci_low = out.ci_low.cwiseMin(run.ci_low);
    out.ci_high = out.ci_high.cwiseMax(run.ci_high);
  }
  out.beta /= static_cast<double>(out.runs.size());
  return out;
}

}  // namespace cgmm
