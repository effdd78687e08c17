#include "gklab/poly.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gklab/lattice.hpp"
#include "json.hpp"

namespace gklab {

int Poly::degree() const {
  for (std::size_t k = c.size(); k-- > 0;)
    if (c[k] != 0.0) return static_cast<int>(k);
  return -1;
}

Poly Poly::deriv() const {
  Poly d;
  if (c.size() <= 1) return d;
  d.c.resize(c.size() - 1);
  for (std::size_t k = 1; k < c.size(); ++k)
    d.c[k - 1] = static_cast<double>(k) * c[k];
  return d;
}

Poly Poly::integ() const {
  Poly F;
  F.c.resize(c.size() + 1, 0.0);
  for (std::size_t k = 0; k < c.size(); ++k)
    F.c[k + 1] = c[k] / static_cast<double>(k + 1);
  return F;
}

Poly Poly::from_roots(double scale, const std::vector<double>& roots) {
  Poly p;
  p.c = {scale};
  for (double r : roots) {
    Poly lin;
    lin.c = {-r, 1.0};
    p = p * lin;
  }
  return p;
}

Poly operator+(const Poly& a, const Poly& b) {
  Poly out;
  out.c.resize(std::max(a.c.size(), b.c.size()), 0.0);
  for (std::size_t k = 0; k < a.c.size(); ++k) out.c[k] += a.c[k];
  for (std::size_t k = 0; k < b.c.size(); ++k) out.c[k] += b.c[k];
  return out;
}

Poly operator*(const Poly& a, const Poly& b) {
  Poly out;
  if (a.c.empty() || b.c.empty()) return out;
  out.c.assign(a.c.size() + b.c.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.c.size(); ++i)
    for (std::size_t j = 0; j < b.c.size(); ++j) out.c[i + j] += a.c[i] * b.c[j];
  return out;
}

Poly operator*(double s, const Poly& a) {
  Poly out = a;
  for (auto& v : out.c) v *= s;
  return out;
}

ReactionPolynomial cubic_model(double s, double am, double as, double ap) {
  if (!(0 < am && am < as && as < ap && ap < 1))
    throw DomainError("cubic model needs 0 < am < as < ap < 1");
  ReactionPolynomial rp;
  rp.f = Poly::from_roots(-s, {am, as, ap});  // s (u-am)(ap-u)(u-as)
  rp.alpha_minus = am;
  rp.alpha_star = as;
  rp.alpha_plus = ap;
  return rp;
}

namespace {

// Newton polish of a bracketed sign change; falls back to bisection whenever
// Newton leaves the bracket.
double polish_root(const Poly& f, const Poly& df, double lo, double hi) {
  double flo = f(lo);
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 100; ++it) {
    double fx = f(x);
    if (fx == 0.0) return x;
    if ((fx < 0) == (flo < 0))
      lo = x;
    else
      hi = x;
    double dfx = df(x);
    double step = dfx != 0.0 ? fx / dfx : 0.0;
    double xn = x - step;
    if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);
    if (std::abs(xn - x) < 1e-15 * std::max(1.0, std::abs(x))) return xn;
    x = xn;
  }
  return x;
}

std::vector<double> roots_on_interval(const Poly& f, double lo, double hi,
                                      int grid) {
  const Poly df = f.deriv();
  std::vector<double> roots;
  double prev_x = lo;
  double prev_f = f(lo);
  if (prev_f == 0.0) roots.push_back(lo);
  for (int i = 1; i <= grid; ++i) {
    double x = lo + (hi - lo) * static_cast<double>(i) / grid;
    double fx = f(x);
    if (fx == 0.0)
      roots.push_back(x);
    else if ((fx < 0) != (prev_f < 0) && prev_f != 0.0)
      roots.push_back(polish_root(f, df, prev_x, x));
    prev_x = x;
    prev_f = fx;
  }
  return roots;
}

}  // namespace

BistabilityReport validate_bistable_unbalanced(const Poly& f,
                                               bool require_positive) {
  BistabilityReport rep;
  const Poly df = f.deriv();
  for (double r : roots_on_interval(f, 0.0, 1.0, 10000)) {
    if (r <= rep.tol || r >= 1.0 - rep.tol) continue;  // interior zeros only
    rep.roots.push_back(r);
    rep.fprime.push_back(df(r));
  }
  rep.three_roots = rep.roots.size() == 3;
  if (rep.three_roots) {
    rep.sign_pattern_ok =
        rep.fprime[0] < 0 && rep.fprime[1] > 0 && rep.fprime[2] < 0;
    const Poly F = f.integ();
    rep.integral = F(rep.roots[2]) - F(rep.roots[0]);
    rep.unbalanced = std::abs(rep.integral) > rep.tol;
    rep.positive = rep.integral > rep.tol;
  }
  rep.required_positive = require_positive;
  rep.ok = rep.pass(require_positive);
  return rep;
}

ReactionPolynomial make_reaction_polynomial(const Poly& f) {
  BistabilityReport rep = validate_bistable_unbalanced(f, false);
  if (!rep.bistable())
    throw DomainError(
        "polynomial is not bistable: need three interior zeros with -,+,- "
        "slope pattern");
  ReactionPolynomial rp;
  rp.f = f;
  rp.alpha_minus = rep.roots[0];
  rp.alpha_star = rep.roots[1];
  rp.alpha_plus = rep.roots[2];
  return rp;
}

namespace {

// Candidate extrema of p over [lo, hi]: endpoints plus zeros of p'.
std::vector<double> extremum_candidates(const Poly& p, double lo, double hi) {
  std::vector<double> cand = {lo, hi};
  for (double r : roots_on_interval(p.deriv(), lo, hi, 4000)) cand.push_back(r);
  return cand;
}

}  // namespace

double poly_max_abs(const Poly& p, double lo, double hi) {
  double best = 0;
  for (double x : extremum_candidates(p, lo, hi))
    best = std::max(best, std::abs(p(x)));
  return best;
}

double poly_max(const Poly& p, double lo, double hi) {
  double best = -std::numeric_limits<double>::infinity();
  for (double x : extremum_candidates(p, lo, hi)) best = std::max(best, p(x));
  return best;
}

DerivedConstants derived_constants(const ReactionPolynomial& rp,
                                   double u_minus, double u_plus) {
  if (!(0 < u_minus && u_minus < rp.alpha_star && rp.alpha_star < u_plus &&
        u_plus < 1))
    throw DomainError(
        "derived_constants needs 0 < u_minus < alpha_star < u_plus < 1");
  BistabilityReport rep = validate_bistable_unbalanced(rp.f, false);
  if (!rep.bistable()) throw DomainError("reaction polynomial is not bistable");

  const Poly df = rp.f.deriv();
  DerivedConstants dc;
  dc.gamma = df(rp.alpha_star);
  double lo = std::min(u_minus, rp.alpha_minus);
  double hi = std::max(u_plus, rp.alpha_plus);
  dc.gamma_bar = poly_max(-1.0 * df, lo, hi);
  dc.beta =
      0.5 * std::min(std::abs(df(rp.alpha_minus)), std::abs(df(rp.alpha_plus)));
  dc.delta0 = std::min(rp.alpha_star - rp.alpha_minus,
                       rp.alpha_plus - rp.alpha_star);
  dc.theta = 2.0 * dc.gamma / (3.0 * dc.gamma + dc.gamma_bar);
  return dc;
}

std::string BistabilityReport::to_json() const {
  nlohmann::ordered_json j;
  j["roots"] = roots;
  j["fprime_at_roots"] = fprime;
  j["three_roots"] = three_roots;
  j["sign_pattern_ok"] = sign_pattern_ok;
  j["integral"] = integral;
  j["unbalanced"] = unbalanced;
  j["positive"] = positive;
  j["required_positive"] = required_positive;
  j["ok"] = ok;
  j["tolerance"] = tol;
  return j.dump(2);
}

std::string reaction_to_json(const ReactionPolynomial& rp) {
  nlohmann::ordered_json j;
  j["coefficients"] = rp.f.c;
  j["roots"] = {rp.alpha_minus, rp.alpha_star, rp.alpha_plus};
  return j.dump(2);
}

ReactionPolynomial reaction_from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  ReactionPolynomial rp;
  rp.f.c = j.at("coefficients").get<std::vector<double>>();
  auto roots = j.at("roots").get<std::vector<double>>();
  if (roots.size() != 3) throw DomainError("expected exactly three roots");
  rp.alpha_minus = roots[0];
  rp.alpha_star = roots[1];
  rp.alpha_plus = roots[2];
  return rp;
}

}  // namespace gklab
