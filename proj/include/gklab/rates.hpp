#pragma once

#include <string>
#include <utility>
#include <vector>

#include "gklab/lattice.hpp"
#include "gklab/poly.hpp"

namespace gklab {

// Local flip rate c(eta): one nonnegative entry per window pattern. The rate
// at site x is the table entry for the pattern read from the window
// translated to x.
struct RateFunction {
  LocalWindow window;
  std::vector<double> table;

  double evaluate(const Configuration& eta, Site x) const {
    return table[eta.read_window(x, window)];
  }
  void check_valid() const;
};

// Stable description of the pattern encoding, embedded in serialized tables.
std::string rate_bit_order_doc();

struct InfeasibleDesign : DomainError {
  explicit InfeasibleDesign(const std::string& what) : DomainError(what) {}
};

// Splits c into (c_plus, c_minus): tables over the window pattern with the
// origin bit removed (remaining bits keep their relative order), taken at
// eta_0 = 0 and eta_0 = 1 respectively.
std::pair<std::vector<double>, std::vector<double>> decompose(
    const RateFunction& c);

// Inverse of decompose for matching table shapes.
RateFunction recompose(const LocalWindow& window,
                       const std::vector<double>& c_plus,
                       const std::vector<double>& c_minus);

// f(u) = E_{nu_u}[(1 - 2 eta_0) c(eta)]: exact expansion obtained by grouping
// window patterns by particle count. Windows above 20 bits are rejected.
Poly reaction_polynomial(const RateFunction& c);

// Builds a radius-1 1D rate table whose reaction polynomial equals the cubic
// target, using the symmetric nearest-neighbor basis
//   c = b0 + b1 (eta_-1 + eta_1) + b2 eta_-1 eta_1
//     + eta_0 (b3 + b4 (eta_-1 + eta_1) + b5 eta_-1 eta_1).
// The two free directions left by the coefficient match are fixed by
// maximizing the smallest table entry (ties broken lexicographically), so the
// output is deterministic. Throws InfeasibleDesign when no nonnegative table
// exists, listing the violated entries.
RateFunction design_rates(const ReactionPolynomial& target,
                          const LocalWindow& window);

std::string rate_to_json(const RateFunction& c);
RateFunction rate_from_json(const std::string& text);

}  // namespace gklab
