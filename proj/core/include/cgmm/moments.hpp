#pragma once

#include <string>
#include <string_view>

#include "cgmm/dataset.hpp"

namespace cgmm {

enum class MomentFamily { kIv, kGcd, kHybrid, kOls };

std::string_view to_string(MomentFamily family);
MomentFamily parse_family(std::string_view name);

// Moment family plus the instrument block it implies.
//
// Every family is linear in beta: m(beta) = (1/n) G^T (Y - X beta) for an
// n x k instrument block G.
struct MomentSpec {
  MomentFamily family = MomentFamily::kGcd;
  // Hybrid only: use X instead of E as the first block, i.e. the moment
  // vector (X, vec(E X^T)) exactly as printed in the hybrid definition.
  // Not valid under hidden confounding; kept for comparison runs.
  bool hybrid_literal_x_block = false;

  // Moment-condition count for the given exposure / instrument counts.
  Index moment_count(Index p, Index q) const;
};

// IV: E. GCD: E (row-wise Kronecker) X. Hybrid: [E | E (row-wise Kronecker) X]. OLS: X.
Matrix instrument_block(const MomentSpec& spec, const Dataset& data);

Vector sample_moment(const MomentSpec& spec, const Dataset& data, const Vector& beta);

// (1/n) G^T X. The derivative of sample_moment is the negation of this;
// every consumer only uses it inside sign-symmetric products.
Matrix moment_jacobian(const MomentSpec& spec, const Dataset& data);

}  // namespace cgmm
