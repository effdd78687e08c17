#pragma once

#include <string>
#include <vector>

namespace gklab {

// Dense polynomial in the monomial basis, c[k] * u^k.
struct Poly {
  std::vector<double> c;

  double operator()(double u) const {
    double acc = 0;
    for (std::size_t k = c.size(); k-- > 0;) acc = acc * u + c[k];
    return acc;
  }
  int degree() const;
  Poly deriv() const;
  // Antiderivative with zero constant term.
  Poly integ() const;
  double coeff(int k) const {
    return k < static_cast<int>(c.size()) ? c[static_cast<std::size_t>(k)] : 0.0;
  }

  static Poly zero() { return Poly{}; }
  // scale * prod_i (u - roots[i])
  static Poly from_roots(double scale, const std::vector<double>& roots);
};

Poly operator+(const Poly& a, const Poly& b);
Poly operator*(const Poly& a, const Poly& b);
Poly operator*(double s, const Poly& a);

// Bistable reaction term together with its three zeros in (0,1).
struct ReactionPolynomial {
  Poly f;
  double alpha_minus = 0;
  double alpha_star = 0;
  double alpha_plus = 0;
};

// s (u - am)(ap - u)(u - as): two stable zeros am < ap, unstable zero as.
ReactionPolynomial cubic_model(double s, double am, double as, double ap);

struct BistabilityReport {
  std::vector<double> roots;    // zeros of f found in (0,1)
  std::vector<double> fprime;   // f' at those zeros
  bool three_roots = false;
  bool sign_pattern_ok = false;  // f' signs -,+,- at the three zeros
  double integral = 0;           // int_{alpha_-}^{alpha_+} f, exact
  bool unbalanced = false;
  bool positive = false;
  bool required_positive = false;
  bool ok = false;
  double tol = 1e-10;

  bool bistable() const { return three_roots && sign_pattern_ok; }
  bool pass(bool require_positive) const {
    return bistable() && unbalanced && (!require_positive || positive);
  }
  std::string to_json() const;
};

// Locates the zeros of f in [0,1] by sign-change scan plus Newton polish and
// evaluates the balance integral via the exact antiderivative.
BistabilityReport validate_bistable_unbalanced(const Poly& f,
                                               bool require_positive);

// Attaches the located roots; throws DomainError if f is not bistable.
ReactionPolynomial make_reaction_polynomial(const Poly& f);

struct DerivedConstants {
  double gamma = 0;      // f'(alpha_star)
  double gamma_bar = 0;  // max of -f' over [u_- ^ alpha_-, u_+ v alpha_+]
  double beta = 0;       // min(|f'(alpha_-)|, |f'(alpha_+)|) / 2
  double delta0 = 0;     // min(alpha_star - alpha_-, alpha_+ - alpha_star)
  double theta = 0;      // 2 gamma / (3 gamma + gamma_bar)
};

// Requires 0 < u_minus < alpha_star < u_plus < 1 and a bistable f.
DerivedConstants derived_constants(const ReactionPolynomial& f, double u_minus,
                                   double u_plus);

// max |p| over [lo, hi] via critical points of p' plus endpoints.
double poly_max_abs(const Poly& p, double lo, double hi);
// max of p over [lo, hi].
double poly_max(const Poly& p, double lo, double hi);

std::string reaction_to_json(const ReactionPolynomial& f);
ReactionPolynomial reaction_from_json(const std::string& text);

}  // namespace gklab
