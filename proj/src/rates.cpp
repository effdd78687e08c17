#include "gklab/rates.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <sstream>

#include "json.hpp"

namespace gklab {

void RateFunction::check_valid() const {
  if (table.size() != (std::size_t{1} << window.bits()))
    throw DomainError("rate table size must be 2^(window bits)");
  for (double v : table)
    if (!(v >= 0.0)) throw DomainError("rate table entries must be >= 0");
}

std::string rate_bit_order_doc() {
  return "offsets of {-r..r}^d in lexicographic order; bit i = occupancy at "
         "offset i";
}

namespace {

// Insert bit value b at position pos of q.
std::uint32_t insert_bit(std::uint32_t q, int pos, std::uint32_t b) {
  std::uint32_t low = q & ((std::uint32_t{1} << pos) - 1);
  std::uint32_t high = q >> pos;
  return low | (b << pos) | (high << (pos + 1));
}

}  // namespace

std::pair<std::vector<double>, std::vector<double>> decompose(
    const RateFunction& c) {
  c.check_valid();
  const int ob = c.window.origin_bit;
  const std::size_t half = std::size_t{1} << (c.window.bits() - 1);
  std::vector<double> cp(half), cm(half);
  for (std::uint32_t q = 0; q < half; ++q) {
    cp[q] = c.table[insert_bit(q, ob, 0)];
    cm[q] = c.table[insert_bit(q, ob, 1)];
  }
  return {cp, cm};
}

RateFunction recompose(const LocalWindow& window,
                       const std::vector<double>& c_plus,
                       const std::vector<double>& c_minus) {
  const std::size_t half = std::size_t{1} << (window.bits() - 1);
  if (c_plus.size() != half || c_minus.size() != half)
    throw DomainError("decomposed table size must be 2^(window bits - 1)");
  RateFunction c;
  c.window = window;
  c.table.resize(half * 2);
  for (std::uint32_t q = 0; q < half; ++q) {
    c.table[insert_bit(q, window.origin_bit, 0)] = c_plus[q];
    c.table[insert_bit(q, window.origin_bit, 1)] = c_minus[q];
  }
  return c;
}

Poly reaction_polynomial(const RateFunction& c) {
  c.check_valid();
  const int w = c.window.bits();
  if (w > 20) throw CapacityError("reaction polynomial needs window <= 20 bits");
  const std::uint32_t npat = std::uint32_t{1} << w;
  const int ob = c.window.origin_bit;

  // Group patterns by particle count k; the product-measure weight of the
  // whole group is u^k (1-u)^(w-k).
  std::vector<double> group(static_cast<std::size_t>(w) + 1, 0.0);
  for (std::uint32_t p = 0; p < npat; ++p) {
    const int k = std::popcount(p);
    const double sign = ((p >> ob) & 1u) ? -1.0 : 1.0;
    group[static_cast<std::size_t>(k)] += sign * c.table[p];
  }

  Poly one_minus_u;
  one_minus_u.c = {1.0, -1.0};
  std::vector<Poly> pow1mu(static_cast<std::size_t>(w) + 1);
  pow1mu[0].c = {1.0};
  for (int j = 1; j <= w; ++j) pow1mu[j] = pow1mu[j - 1] * one_minus_u;

  Poly f;
  for (int k = 0; k <= w; ++k) {
    if (group[static_cast<std::size_t>(k)] == 0.0) continue;
    Poly uk;
    uk.c.assign(static_cast<std::size_t>(k) + 1, 0.0);
    uk.c.back() = 1.0;
    f = f + group[static_cast<std::size_t>(k)] * (uk * pow1mu[w - k]);
  }
  // Trim roundoff dust so degree() is meaningful.
  double tabmax = 0;
  for (double v : c.table) tabmax = std::max(tabmax, std::abs(v));
  for (auto& v : f.c)
    if (std::abs(v) < 1e-13 * std::max(1.0, tabmax)) v = 0.0;
  while (!f.c.empty() && f.c.back() == 0.0) f.c.pop_back();
  return f;
}

namespace {

struct Affine {
  const char* name;
  double c0, g1, g2;  // value = c0 + g1*b1 + g2*b2
  double at(double b1, double b2) const { return c0 + g1 * b1 + g2 * b2; }
};

// 3x3 Cramer solve; returns false when near-singular.
bool solve3(const std::array<std::array<double, 3>, 3>& A,
            const std::array<double, 3>& b, std::array<double, 3>& x) {
  auto det3 = [](const std::array<std::array<double, 3>, 3>& m) {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  };
  double d = det3(A);
  if (std::abs(d) < 1e-12) return false;
  for (int col = 0; col < 3; ++col) {
    auto Ac = A;
    for (int r = 0; r < 3; ++r) Ac[r][col] = b[r];
    x[col] = det3(Ac) / d;
  }
  return true;
}

}  // namespace

RateFunction design_rates(const ReactionPolynomial& target,
                          const LocalWindow& window) {
  if (window.dim != 1 || window.radius != 1)
    throw DomainError("rate design is defined for 1D radius-1 windows");
  if (target.f.degree() > 3)
    throw DomainError("rate design target must be cubic");

  const double a0 = target.f.coeff(0);
  const double a1 = target.f.coeff(1);
  const double a2 = target.f.coeff(2);
  const double a3 = target.f.coeff(3);
  const double scale = std::abs(a0) + std::abs(a1) + std::abs(a2) +
                       std::abs(a3) + 1.0;
  const double tol = 1e-11 * scale;

  // Six distinct table values as affine functions of the two free basis
  // coefficients (b1, b2); the empty and full side patterns are forced to
  // f(0) and -f(1) by the coefficient match.
  const std::array<Affine, 6> entries = {{
      {"c+ with 0 occupied neighbors", a0, 0, 0},
      {"c+ with 1 occupied neighbor", a0, 1, 0},
      {"c+ with 2 occupied neighbors", a0, 2, 1},
      {"c- with 0 occupied neighbors", -a0 - a1, 2, 0},
      {"c- with 1 occupied neighbor", -a0 - a1 - 0.5 * a2, 1, 0.5},
      {"c- with 2 occupied neighbors", -(a0 + a1 + a2 + a3), 0, 0},
  }};

  // Entries with no free direction bound everything; if one of them is
  // negative no choice of (b1, b2) can help.
  {
    std::ostringstream bad;
    int nbad = 0;
    for (const auto& e : entries)
      if (e.g1 == 0 && e.g2 == 0 && e.c0 < -tol) {
        if (nbad++) bad << "; ";
        bad << e.name << " = " << e.c0;
      }
    if (nbad)
      throw InfeasibleDesign(
          "no nonnegative rate table realizes this cubic in the "
          "nearest-neighbor basis: " +
          bad.str());
  }

  // Maximize t subject to t <= entry_i(b1, b2): enumerate basic solutions of
  // the 6 constraints in the 3 unknowns (t, b1, b2).
  bool found = false;
  double best_t = 0, best_b1 = 0, best_b2 = 0;
  for (int i = 0; i < 6; ++i)
    for (int j = i + 1; j < 6; ++j)
      for (int k = j + 1; k < 6; ++k) {
        std::array<std::array<double, 3>, 3> A;
        std::array<double, 3> rhs;
        int rows[3] = {i, j, k};
        for (int r = 0; r < 3; ++r) {
          const auto& e = entries[static_cast<std::size_t>(rows[r])];
          A[static_cast<std::size_t>(r)] = {1.0, -e.g1, -e.g2};
          rhs[static_cast<std::size_t>(r)] = e.c0;
        }
        std::array<double, 3> v;
        if (!solve3(A, rhs, v)) continue;
        bool feasible = true;
        for (const auto& e : entries)
          if (v[0] > e.at(v[1], v[2]) + tol) {
            feasible = false;
            break;
          }
        if (!feasible) continue;
        if (!found || v[0] > best_t + tol ||
            (std::abs(v[0] - best_t) <= tol &&
             (v[1] < best_b1 - tol ||
              (std::abs(v[1] - best_b1) <= tol && v[2] < best_b2 - tol)))) {
          found = true;
          best_t = v[0];
          best_b1 = v[1];
          best_b2 = v[2];
        }
      }
  if (!found)
    throw InfeasibleDesign(
        "no nonnegative rate table realizes this cubic in the "
        "nearest-neighbor basis");

  const double b0 = a0;
  const double b1 = best_b1;
  const double b2 = best_b2;
  const double b3 = 2 * b1 - 2 * a0 - a1;
  const double b4 = 0.5 * (b2 - 4 * b1 - a2);
  const double b5 = -2 * b2 - a3;

  RateFunction c;
  c.window = window;
  c.table.resize(8);
  for (std::uint32_t p = 0; p < 8; ++p) {
    const int nl = p & 1, n0 = (p >> 1) & 1, nr = (p >> 2) & 1;
    const int m = nl + nr, pr = nl * nr;
    double v = b0 + b1 * m + b2 * pr + n0 * (b3 + b4 * m + b5 * pr);
    if (v < 0 && v > -1e-9 * scale) v = 0;  // LP roundoff only
    c.table[p] = v;
  }
  c.check_valid();

  // The match is linear, so the round trip is exact up to roundoff; anything
  // larger means the basis arithmetic above is wrong.
  const Poly back = reaction_polynomial(c);
  for (int k = 0; k <= 3; ++k)
    if (std::abs(back.coeff(k) - target.f.coeff(k)) > 1e-9 * scale)
      throw DomainError("rate design round trip failed");
  return c;
}

std::string rate_to_json(const RateFunction& c) {
  nlohmann::ordered_json j;
  j["window"] = {{"dim", c.window.dim}, {"radius", c.window.radius}};
  j["bit_order"] = rate_bit_order_doc();
  j["table"] = c.table;
  return j.dump(2);
}

RateFunction rate_from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  RateFunction c;
  c.window = LocalWindow::cube(j.at("window").at("dim").get<int>(),
                               j.at("window").at("radius").get<int>());
  c.table = j.at("table").get<std::vector<double>>();
  c.check_valid();
  return c;
}

}  // namespace gklab
