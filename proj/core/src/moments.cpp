#include "cgmm/moments.hpp"

#include "cgmm/error.hpp"

namespace cgmm {

std::string_view to_string(MomentFamily family) {
  switch (family) {
    case MomentFamily::kIv: return "iv";
    case MomentFamily::kGcd: return "gcd";
    case MomentFamily::kHybrid: return "hybrid";
    case MomentFamily::kOls: return "ols";
  }
  return "unknown";
}

MomentFamily parse_family(std::string_view name) {
  if (name == "iv") return MomentFamily::kIv;
  if (name == "gcd") return MomentFamily::kGcd;
  if (name == "hybrid") return MomentFamily::kHybrid;
  if (name == "ols") return MomentFamily::kOls;
  throw InvalidInput("unknown moment family '" + std::string(name) + "'");
}

Index MomentSpec::moment_count(Index p, Index q) const {
  switch (family) {
    case MomentFamily::kIv: return q;
    case MomentFamily::kGcd: return p * q;
    case MomentFamily::kHybrid: return (hybrid_literal_x_block ? p : q) + p * q;
    case MomentFamily::kOls: return p;
  }
  return 0;
}

Matrix instrument_block(const MomentSpec& spec, const Dataset& data) {
  switch (spec.family) {
    case MomentFamily::kIv:
      return data.E();
    case MomentFamily::kGcd:
      return rowwise_kronecker(data.E(), data.X());
    case MomentFamily::kHybrid: {
      const Matrix& first = spec.hybrid_literal_x_block ? data.X() : data.E();
      const Matrix gcd = rowwise_kronecker(data.E(), data.X());
      Matrix g(data.n(), first.cols() + gcd.cols());
      g << first, gcd;
      return g;
    }
    case MomentFamily::kOls:
      return data.X();
  }
  throw InvalidInput("unknown moment family");
}

Vector sample_moment(const MomentSpec& spec, const Dataset& data, const Vector& beta) {
  if (beta.size() != data.p()) {
    throw InvalidInput("beta has " + std::to_string(beta.size()) + " entries, expected " +
                       std::to_string(data.p()));
  }
  if (!beta.allFinite()) throw InvalidInput("beta contains non-finite values");
  const Matrix g = instrument_block(spec, data);
  const Vector residual = data.Y() - data.X() * beta;
  return g.transpose() * residual / static_cast<double>(data.n());
}

Matrix moment_jacobian(const MomentSpec& spec, const Dataset& data) {
  const Matrix g = instrument_block(spec, data);
  return g.transpose() * data.X() / static_cast<double>(data.n());
}

}  // namespace cgmm
