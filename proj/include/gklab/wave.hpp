#pragma once

#include <utility>
#include <vector>

#include "gklab/poly.hpp"

namespace gklab {

// Monotone traveling-wave profile solving U'' + c U' + f(U) = 0 with
// U(-inf) = alpha_+, U(0) = alpha_*, U(inf) = alpha_-. Values live on a
// uniform z-grid; beyond [-Z, Z] evaluation switches to the exponential
// tails matched at the grid ends.
struct WaveProfile {
  ReactionPolynomial model;
  std::vector<double> z, U, Up;
  double c_star = 0;
  double grid_h = 0;
  double grid_Z = 0;
  // Linearization decay rates at the two stable roots (both positive).
  double lambda_left = 0;   // alpha_+ - U ~ exp(-lambda_left |z|), z -> -inf
  double lambda_right = 0;  // U - alpha_- ~ exp(-lambda_right z), z -> +inf
  double tail_C_left = 0;
  double tail_C_right = 0;
  // Max one-step re-integration defect per unit z of the stored (U, U')
  // against the wave ODE; the grid-level substitute for |U'' + cU' + f(U)|.
  double residual_max = 0;

  double eval(double zz) const;
  double eval_deriv(double zz) const;
};

// Shooting + bisection on c. The bracket is [-c_max, c_max] with
// c_max = 2 (alpha_+ - alpha_-) max sqrt|f'|, widened at most 3 times; the
// negative half is needed because unbalanced models with the sign reversed
// travel backwards. tol bounds the final bisection width.
WaveProfile solve_wave(const ReactionPolynomial& f, double Z, double h,
                       double tol);

// (Z, h) sized from the linearization rates so the tails decay below 1e-9.
std::pair<double, double> default_wave_grid(const ReactionPolynomial& f);

// Exact speed for cubic s (u-am)(ap-u)(u-as): scaling to the Nagumo form
// gives c = sqrt(s/2) (am + ap - 2 as).
double cubic_wave_speed(double s, double am, double as, double ap);

struct TailReport {
  double lambda_fit_left = 0;
  double lambda_fit_right = 0;
  double C_fit_left = 0;
  double C_fit_right = 0;
  double fit_residual_left = 0;   // rms in log space
  double fit_residual_right = 0;
  double lambda_analytic_left = 0;
  double lambda_analytic_right = 0;
  double rel_err_left = 0;
  double rel_err_right = 0;
  bool monotone = false;          // U' < 0 across the grid
  double slope_envelope_C = 0;    // max (-U') exp(0.95 lambda |z|) on tails
  bool pass = false;
};

// Exponential fits of both tails checked against the linearization rates
// (5% band) and the slope bound 0 < -U' <= C e^{-lambda |z|}.
TailReport verify_tails(const WaveProfile& w);

// Largest sigma with U'(z) <= -sigma (beta + f'(U(z))) for every grid z;
// the constraint only binds where beta + f'(U) > 0.
double sigma_bound(const WaveProfile& w, double beta);

std::string wave_meta_json(const WaveProfile& w, const TailReport& t);
std::string wave_profile_csv(const WaveProfile& w);

}  // namespace gklab
