#include "gklab/wave.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "gklab/lattice.hpp"  // DomainError
#include "json.hpp"

namespace gklab {
namespace {

struct OdeState {
  double z = 0, u = 0, v = 0;
};

// Dormand-Prince 5(4) on the 2-state wave ODE u' = v, v' = -c v - f(u).
// FSAL stage reuse; the embedded error estimate drives step control.
class WaveIntegrator {
 public:
  WaveIntegrator(const Poly& f, double c, double rtol, double atol)
      : f_(f), c_(c), rtol_(rtol), atol_(atol) {}

  void reset(double z, double u, double v) {
    s_ = {z, u, v};
    h_ = 1e-4;
    fresh_ = true;
  }

  const OdeState& state() const { return s_; }

  // One accepted adaptive step clamped at z_limit (either direction).
  // Returns false when the state is already at z_limit.
  bool step_toward(double z_limit) {
    double gap = z_limit - s_.z;
    if (std::abs(gap) <= 1e-15 * (1.0 + std::abs(s_.z))) {
      s_.z = z_limit;
      return false;
    }
    const double dir = gap > 0 ? 1.0 : -1.0;
    if (fresh_) {
      rhs(s_.u, s_.v, k_[0][0], k_[0][1]);
      fresh_ = false;
    }
    double htry = std::min(h_, std::abs(gap));
    for (int attempt = 0; attempt < 200; ++attempt) {
      const double h = dir * htry;
      for (int st = 1; st < 7; ++st) {
        double au = s_.u, av = s_.v;
        for (int j = 0; j < st; ++j) {
          au += h * kA[st][j] * k_[j][0];
          av += h * kA[st][j] * k_[j][1];
        }
        rhs(au, av, k_[st][0], k_[st][1]);
        if (st == 6) {  // stage-7 argument equals the 5th order result (FSAL)
          unew_ = au;
          vnew_ = av;
        }
      }
      double eu = 0, ev = 0;
      for (int j = 0; j < 7; ++j) {
        eu += kE[j] * k_[j][0];
        ev += kE[j] * k_[j][1];
      }
      eu *= h;
      ev *= h;
      const double scu = atol_ + rtol_ * std::max(std::abs(s_.u), std::abs(unew_));
      const double scv = atol_ + rtol_ * std::max(std::abs(s_.v), std::abs(vnew_));
      const double err =
          std::sqrt(0.5 * ((eu / scu) * (eu / scu) + (ev / scv) * (ev / scv)));
      if (err <= 1.0) {
        const bool hit = std::abs(gap) <= htry * (1.0 + 1e-12);
        s_.z = hit ? z_limit : s_.z + h;
        s_.u = unew_;
        s_.v = vnew_;
        k_[0][0] = k_[6][0];
        k_[0][1] = k_[6][1];
        const double fac =
            err == 0 ? 5.0 : std::min(5.0, std::max(0.2, 0.9 * std::pow(err, -0.2)));
        h_ = std::min(hmax_, htry * fac);
        return true;
      }
      htry *= std::max(0.1, 0.9 * std::pow(err, -0.2));
      if (htry < 1e-14 * (1.0 + std::abs(s_.z)))
        throw std::runtime_error("wave integrator: step size underflow");
    }
    throw std::runtime_error("wave integrator: too many rejected steps");
  }

  void advance_to(double z_target) {
    while (step_toward(z_target)) {
    }
  }

  // Single fixed step of size h from (u, v); used for the defect residual.
  void fixed_step(double u, double v, double h, double& uo, double& vo) const {
    double kk[7][2];
    rhs(u, v, kk[0][0], kk[0][1]);
    uo = u;
    vo = v;
    for (int st = 1; st < 7; ++st) {
      double au = u, av = v;
      for (int j = 0; j < st; ++j) {
        au += h * kA[st][j] * kk[j][0];
        av += h * kA[st][j] * kk[j][1];
      }
      rhs(au, av, kk[st][0], kk[st][1]);
      if (st == 6) {
        uo = au;
        vo = av;
      }
    }
  }

 private:
  void rhs(double u, double v, double& du, double& dv) const {
    du = v;
    dv = -c_ * v - f_(u);
  }

  static constexpr double kA[7][6] = {
      {0, 0, 0, 0, 0, 0},
      {1.0 / 5, 0, 0, 0, 0, 0},
      {3.0 / 40, 9.0 / 40, 0, 0, 0, 0},
      {44.0 / 45, -56.0 / 15, 32.0 / 9, 0, 0, 0},
      {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729, 0, 0},
      {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176,
       -5103.0 / 18656, 0},
      {35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84}};
  static constexpr double kE[7] = {71.0 / 57600,  0.0,           -71.0 / 16695,
                                   71.0 / 1920,   -17253.0 / 339200,
                                   22.0 / 525,    -1.0 / 40};

  const Poly& f_;
  double c_, rtol_, atol_;
  OdeState s_{};
  double h_ = 1e-4;
  double hmax_ = 0.5;
  double k_[7][2] = {};
  double unew_ = 0, vnew_ = 0;
  bool fresh_ = true;
};

constexpr double kManifoldOffset = 1e-8;

double unstable_rate(double c, double fp) {
  // positive eigenvalue at the saddle (fp = f'(alpha) < 0)
  return -0.5 * c + std::sqrt(0.25 * c * c - fp);
}

double stable_rate(double c, double fp) {
  // negative eigenvalue, fp < 0
  return -0.5 * c - std::sqrt(0.25 * c * c - fp);
}

struct ShotSetup {
  double u0, v0, margin, span;
};

ShotSetup shot_setup(const ReactionPolynomial& rp, const Poly& df, double c) {
  const double ap = rp.alpha_plus, am = rp.alpha_minus, as = rp.alpha_star;
  const double lam_p = unstable_rate(c, df(ap));
  const double nrm = std::sqrt(1.0 + lam_p * lam_p);
  ShotSetup s;
  s.u0 = ap - kManifoldOffset / nrm;
  s.v0 = -kManifoldOffset * lam_p / nrm;
  s.margin = (as - am) / 10.0;
  const double lam_m = -stable_rate(c, df(am));
  // enough span to leave the saddle from a 1e-8 offset, cross, and settle
  s.span = 100.0 * (1.0 / lam_p + 1.0 / lam_m) + 50.0;
  return s;
}

// -1: fell below alpha_- - margin (c too small).
// +1: U' turned non-negative before reaching alpha_- (c too large).
//  0: span exhausted without a verdict (c numerically at the connection).
int classify_shot(const Poly& f, const Poly& df, const ReactionPolynomial& rp,
                  double c, double rtol) {
  const ShotSetup s = shot_setup(rp, df, c);
  WaveIntegrator W(f, c, rtol, 1e-13);
  W.reset(0.0, s.u0, s.v0);
  while (W.step_toward(s.span)) {
    const OdeState& st = W.state();
    if (st.u < rp.alpha_minus - s.margin) return -1;
    if (st.v >= 0) return +1;
  }
  return 0;
}

double max_abs_fprime(const Poly& df) { return poly_max_abs(df, 0.0, 1.0); }

}  // namespace

double cubic_wave_speed(double s, double am, double as, double ap) {
  return std::sqrt(0.5 * s) * (am + ap - 2.0 * as);
}

std::pair<double, double> default_wave_grid(const ReactionPolynomial& rp) {
  const Poly df = rp.f.deriv();
  const double l1 = std::sqrt(std::max(1e-12, -df(rp.alpha_plus)));
  const double l2 = std::sqrt(std::max(1e-12, -df(rp.alpha_minus)));
  const double lam_min = std::min(l1, l2);
  const double lam_max = std::max(l1, l2);
  double h = std::min(0.02, 0.25 / lam_max);
  double Z = std::max(10.0, 21.0 / lam_min);
  Z = std::ceil(Z / h) * h;
  return {Z, h};
}

WaveProfile solve_wave(const ReactionPolynomial& rp, double Z, double h,
                       double tol) {
  const double am = rp.alpha_minus, as = rp.alpha_star, ap = rp.alpha_plus;
  if (!(am < as && as < ap)) throw DomainError("solve_wave: roots out of order");
  const Poly& f = rp.f;
  const Poly df = f.deriv();
  const double scale = poly_max_abs(f, am, ap) + 1e-300;
  if (std::abs(f(am)) > 1e-8 * scale || std::abs(f(as)) > 1e-8 * scale ||
      std::abs(f(ap)) > 1e-8 * scale)
    throw DomainError("solve_wave: alpha values are not roots of f");
  if (!(df(am) < 0 && df(ap) < 0 && df(as) > 0))
    throw DomainError("solve_wave: f is not bistable at the given roots");
  if (!(h > 0) || !(Z > 2 * h)) throw DomainError("solve_wave: bad grid");
  if (!(tol > 0)) throw DomainError("solve_wave: bad tolerance");

  // grid must contain z = 0 exactly
  Z = std::ceil(Z / h - 1e-9) * h;
  const int n_side = static_cast<int>(std::lround(Z / h));
  const int n = 2 * n_side + 1;

  // --- bracket and bisect on c ---------------------------------------
  double c_max = 2.0 * (ap - am) * std::sqrt(max_abs_fprime(df));
  const double rtol_scan = 1e-10;
  double c_lo = -c_max, c_hi = c_max;
  bool bracketed = false;
  for (int widen = 0; widen <= 3; ++widen) {
    if (classify_shot(f, df, rp, c_lo, rtol_scan) == -1 &&
        classify_shot(f, df, rp, c_hi, rtol_scan) == +1) {
      bracketed = true;
      break;
    }
    c_lo *= 2.0;
    c_hi *= 2.0;
  }
  if (!bracketed) throw DomainError("solve_wave: speed bracket failed");

  const double width_goal = std::min(tol, 1e-13);
  while (c_hi - c_lo > width_goal) {
    const double c_mid = 0.5 * (c_lo + c_hi);
    if (c_mid == c_lo || c_mid == c_hi) break;
    const int cls = classify_shot(f, df, rp, c_mid, rtol_scan);
    if (cls == -1)
      c_lo = c_mid;
    else if (cls == +1)
      c_hi = c_mid;
    else
      break;  // connection resolved to machine precision
  }
  const double c = 0.5 * (c_lo + c_hi);

  // --- final pass at tight tolerance ----------------------------------
  const double rtol_fine = 1e-12;
  const ShotSetup setup = shot_setup(rp, df, c);
  WaveIntegrator W(f, c, rtol_fine, 1e-14);
  W.reset(0.0, setup.u0, setup.v0);

  // locate the first alpha_* crossing
  OdeState prev = W.state();
  bool crossed = false;
  while (W.step_toward(setup.span)) {
    if (prev.u > as && W.state().u <= as) {
      crossed = true;
      break;
    }
    prev = W.state();
    if (W.state().v >= 0 || W.state().u < am - setup.margin)
      throw DomainError("solve_wave: refined trajectory lost the connection");
  }
  if (!crossed) throw DomainError("solve_wave: no alpha_* crossing found");

  for (int it = 0; it < 80; ++it) {
    const OdeState& st = W.state();
    if (std::abs(st.u - as) <= 1e-13 * std::max(1.0, std::abs(as))) break;
    if (st.v == 0) break;
    W.advance_to(st.z + (as - st.u) / st.v);
  }
  const OdeState cross = W.state();
  if (std::abs(cross.u - as) > 1e-11)
    throw DomainError("solve_wave: crossing refinement failed");

  WaveProfile w;
  w.model = rp;
  w.c_star = c;
  w.grid_h = h;
  w.grid_Z = Z;
  w.lambda_left = unstable_rate(c, df(ap));
  w.lambda_right = -stable_rate(c, df(am));
  w.z.resize(n);
  w.U.resize(n);
  w.Up.resize(n);
  for (int j = 0; j < n; ++j) w.z[j] = (j - n_side) * h;
  w.z[n_side] = 0.0;

  const double zeta_start = -cross.z;  // grid coordinate of the manifold seed

  // left analytic region: pure unstable-manifold exponential matched at the
  // trajectory seed, U = ap - C exp(lambda_left (zeta - zeta_start))
  const double C_seed = ap - setup.u0;
  auto fill_left = [&](int j) {
    const double e = std::exp(w.lambda_left * (w.z[j] - zeta_start));
    w.U[j] = ap - C_seed * e;
    w.Up[j] = -w.lambda_left * C_seed * e;
  };

  int j_first = n;  // first grid index reached by the trajectory
  for (int j = 0; j < n; ++j) {
    if (w.z[j] >= zeta_start) {
      j_first = j;
      break;
    }
    fill_left(j);
  }

  // forward re-integration fills [zeta_start, 0); the refined crossing state
  // is written at z = 0 exactly, so U(0) = alpha_* holds to the refinement
  // tolerance rather than to accumulated re-integration error
  W.reset(0.0, setup.u0, setup.v0);
  for (int j = j_first; j < n_side; ++j) {
    W.advance_to(cross.z + w.z[j]);
    w.U[j] = W.state().u;
    w.Up[j] = W.state().v;
  }
  w.U[n_side] = cross.u;
  w.Up[n_side] = cross.v;

  // continue from the crossing; once the right tail is deep enough the
  // remaining points come from the matched exponential
  const double tail_cut = std::max(3e-7 * (ap - am), 1e-10);
  const double lam_r = -w.lambda_right;  // signed rate, negative
  W.reset(0.0, cross.u, cross.v);
  int j = n_side + 1;
  for (; j < n; ++j) {
    const double target = w.z[j];
    bool cut = false;
    while (W.state().z < target) {
      W.step_toward(target);
      if (W.state().u - am <= tail_cut) {
        cut = true;
        break;
      }
      if (W.state().v >= 0)
        throw DomainError("solve_wave: right tail lost monotonicity");
    }
    if (cut) break;
    w.U[j] = W.state().u;
    w.Up[j] = W.state().v;
  }
  if (j < n) {
    const double zm = W.state().z, Cm = W.state().u - am;
    for (; j < n; ++j) {
      const double e = std::exp(lam_r * (w.z[j] - zm));
      w.U[j] = am + Cm * e;
      w.Up[j] = lam_r * Cm * e;
    }
  }

  // matched tail constants for evaluation beyond the grid
  w.tail_C_left = (ap - w.U.front()) * std::exp(w.lambda_left * Z);
  w.tail_C_right = (w.U.back() - am) * std::exp(w.lambda_right * Z);

  // sanity: the grid really covers the transition
  if (ap - w.U.front() > 0.02 * (ap - am) || w.U.back() - am > 0.02 * (ap - am))
    throw DomainError("solve_wave: grid half-width Z too small for the tails");
  for (int i = 0; i + 1 < n; ++i)
    if (!(w.U[i] > w.U[i + 1]))
      throw DomainError("solve_wave: profile not strictly decreasing");

  // defect residual: one fixed DOPRI5 step from each grid state must land on
  // the next one; defect per unit z plays the role of |U'' + cU' + f(U)|
  double defect = 0;
  for (int i = 0; i + 1 < n; ++i) {
    double uo, vo;
    W.fixed_step(w.U[i], w.Up[i], h, uo, vo);
    defect = std::max(defect, std::abs(uo - w.U[i + 1]) / h);
    defect = std::max(defect, std::abs(vo - w.Up[i + 1]) / h);
  }
  w.residual_max = defect;
  return w;
}

double WaveProfile::eval(double zz) const {
  if (zz < -grid_Z)
    return model.alpha_plus - tail_C_left * std::exp(lambda_left * zz);
  if (zz > grid_Z)
    return model.alpha_minus + tail_C_right * std::exp(-lambda_right * zz);
  const int n = static_cast<int>(z.size());
  int i = static_cast<int>(std::floor((zz + grid_Z) / grid_h));
  i = std::max(0, std::min(n - 2, i));
  const double t = (zz - z[i]) / grid_h;
  const double t2 = t * t, t3 = t2 * t;
  const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
  const double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
  return h00 * U[i] + h10 * grid_h * Up[i] + h01 * U[i + 1] +
         h11 * grid_h * Up[i + 1];
}

double WaveProfile::eval_deriv(double zz) const {
  if (zz < -grid_Z)
    return -lambda_left * tail_C_left * std::exp(lambda_left * zz);
  if (zz > grid_Z)
    return -lambda_right * tail_C_right * std::exp(-lambda_right * zz);
  const int n = static_cast<int>(z.size());
  int i = static_cast<int>(std::floor((zz + grid_Z) / grid_h));
  i = std::max(0, std::min(n - 2, i));
  const double t = (zz - z[i]) / grid_h;
  const double t2 = t * t;
  const double d00 = (6 * t2 - 6 * t) / grid_h, d10 = 3 * t2 - 4 * t + 1;
  const double d01 = (-6 * t2 + 6 * t) / grid_h, d11 = 3 * t2 - 2 * t;
  return d00 * U[i] + d10 * Up[i] + d01 * U[i + 1] + d11 * Up[i + 1];
}

TailReport verify_tails(const WaveProfile& w) {
  TailReport r;
  r.lambda_analytic_left = w.lambda_left;
  r.lambda_analytic_right = w.lambda_right;
  const int n = static_cast<int>(w.z.size());
  const double ap = w.model.alpha_plus, am = w.model.alpha_minus;

  auto fit = [&](int lo, int hi, auto amp, double& lam, double& C,
                 double& resid, double sign) {
    // least squares of log amp against z over [lo, hi)
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const int m = hi - lo;
    for (int i = lo; i < hi; ++i) {
      const double y = std::log(std::max(amp(i), 1e-300));
      sx += w.z[i];
      sy += y;
      sxx += w.z[i] * w.z[i];
      sxy += w.z[i] * y;
    }
    const double den = m * sxx - sx * sx;
    const double b = (m * sxy - sx * sy) / den;
    const double a = (sy - b * sx) / m;
    lam = sign * b;
    C = std::exp(a);
    double ss = 0;
    for (int i = lo; i < hi; ++i) {
      const double y = std::log(std::max(amp(i), 1e-300));
      const double d = y - (a + b * w.z[i]);
      ss += d * d;
    }
    resid = std::sqrt(ss / m);
  };

  int left_hi = 0;
  while (left_hi < n && w.z[left_hi] <= -0.5 * w.grid_Z) ++left_hi;
  int right_lo = n - 1;
  while (right_lo >= 0 && w.z[right_lo] >= 0.5 * w.grid_Z) --right_lo;
  ++right_lo;

  fit(0, left_hi, [&](int i) { return ap - w.U[i]; }, r.lambda_fit_left,
      r.C_fit_left, r.fit_residual_left, +1.0);
  fit(right_lo, n, [&](int i) { return w.U[i] - am; }, r.lambda_fit_right,
      r.C_fit_right, r.fit_residual_right, -1.0);

  r.rel_err_left =
      std::abs(r.lambda_fit_left - w.lambda_left) / w.lambda_left;
  r.rel_err_right =
      std::abs(r.lambda_fit_right - w.lambda_right) / w.lambda_right;

  r.monotone = true;
  for (int i = 0; i < n; ++i)
    if (!(w.Up[i] < 0)) r.monotone = false;

  double env = 0;
  for (int i = 0; i < left_hi; ++i)
    env = std::max(env, -w.Up[i] * std::exp(0.95 * w.lambda_left * (-w.z[i])));
  for (int i = right_lo; i < n; ++i)
    env = std::max(env, -w.Up[i] * std::exp(0.95 * w.lambda_right * w.z[i]));
  r.slope_envelope_C = env;

  r.pass = r.monotone && r.rel_err_left <= 0.05 && r.rel_err_right <= 0.05 &&
           r.fit_residual_left <= 1e-3 && r.fit_residual_right <= 1e-3;
  return r;
}

double sigma_bound(const WaveProfile& w, double beta) {
  if (!(beta > 0)) throw DomainError("sigma_bound: beta must be positive");
  const Poly df = w.model.f.deriv();
  double sigma = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < w.z.size(); ++i) {
    const double g = beta + df(w.U[i]);
    if (g > 0) sigma = std::min(sigma, -w.Up[i] / g);
  }
  return sigma;
}

std::string wave_meta_json(const WaveProfile& w, const TailReport& t) {
  nlohmann::ordered_json j;
  j["c_star"] = w.c_star;
  j["alpha_minus"] = w.model.alpha_minus;
  j["alpha_star"] = w.model.alpha_star;
  j["alpha_plus"] = w.model.alpha_plus;
  j["grid"] = {{"Z", w.grid_Z}, {"h", w.grid_h}, {"points", w.z.size()}};
  j["lambda_left"] = w.lambda_left;
  j["lambda_right"] = w.lambda_right;
  j["tail_C_left"] = w.tail_C_left;
  j["tail_C_right"] = w.tail_C_right;
  j["residual_max"] = w.residual_max;
  j["tails"] = {{"lambda_fit_left", t.lambda_fit_left},
                {"lambda_fit_right", t.lambda_fit_right},
                {"fit_residual_left", t.fit_residual_left},
                {"fit_residual_right", t.fit_residual_right},
                {"rel_err_left", t.rel_err_left},
                {"rel_err_right", t.rel_err_right},
                {"monotone", t.monotone},
                {"slope_envelope_C", t.slope_envelope_C},
                {"pass", t.pass}};
  return j.dump(2);
}

std::string wave_profile_csv(const WaveProfile& w) {
  std::ostringstream os;
  os.precision(17);
  os << "z,U,Uprime\n";
  for (std::size_t i = 0; i < w.z.size(); ++i)
    os << w.z[i] << ',' << w.U[i] << ',' << w.Up[i] << '\n';
  return os.str();
}

}  // namespace gklab
