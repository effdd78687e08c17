#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "gklab/pde.hpp"
#include "gklab/poly.hpp"
#include "gklab/wave.hpp"

namespace gklab {

struct FrontExtractionError : std::runtime_error {
  explicit FrontExtractionError(const std::string& m) : std::runtime_error(m) {}
};

// Interface representation. Sign convention: dbar < 0 inside G+, > 0 on the
// closure of G-. 1D stores the arcs of G+ on the unit circle (sorted starts,
// disjoint, length in (0,1]); distances are then exact. 2D stores a grid
// signed-distance field from first-order fast marching.
struct FrontState {
  int dim = 1;
  bool full_cover = false;  // G+ swallowed the whole torus
  std::vector<std::pair<double, double>> arcs;  // 1D: (start, length)
  int M = 0;
  std::vector<double> dbar;  // 2D: signed distance at cell centers (j+0)/M
};

// 1D constructor from arcs of G+ given as (start, length), length in (0,1).
FrontState front_from_arcs(const std::vector<std::pair<double, double>>& arcs);

// 2D constructor from a cell indicator of G+ (nonzero = inside).
FrontState front_from_indicator(const std::vector<std::uint8_t>& inside, int M);

double signed_distance(const FrontState& f, const std::vector<double>& point);
double signed_distance_1d(const FrontState& f, double v);

// G_t^+ = {v : dist(v, G_0^+) < c t}. 1D grows the arcs and re-merges; 2D
// shifts the distance field, which is exact for the zero level.
FrontState huygens_evolve(const FrontState& f, double c_star, double t);

// First arc-merging time under Huygens growth (1D): min gap half-width / c.
double topology_time(const FrontState& f, double c_star);

// Two-level limit field: alpha_+ strictly inside G+, alpha_- elsewhere.
Field chi_field(const FrontState& f, double alpha_minus, double alpha_plus,
                int M);

// Cutoff h: identity on |s| <= d0, frozen at +-2 d0 beyond 3 d0, C^2 spline
// blend between with 0 <= h' <= 1. h odd.
double cutoff_h(double s, double d0);
double cutoff_h_prime(double s, double d0);
double cutoff_h_second(double s, double d0);

// d = h(dbar) sampled on an M-grid.
Field cutoff_distance(const FrontState& f, double d0, int M);

// The eikonal property must hold on the 3 d0 band: in 1D no kink of dbar may
// sit strictly inside it; in 2D the grid gradient magnitude stays near 1.
bool band_check(const FrontState& f, double d0, double tol = 0.15);

// Largest d0 passing the band check along the whole evolution [0, T],
// halved once for margin (arcs only shrink the outside gaps, so checking the
// endpoints of the time interval suffices).
double select_d0(const FrontState& front0, double c_star, double T);

// max |Delta h(dbar)|: exact 0.75/d0 in 1D (kinks are outside the band, so
// only h'' contributes); 2D adds h' |Delta dbar| measured on the band grid.
double cutoff_curvature_bound(const FrontState& f, double d0);

struct SubSuperParams {
  double sigma = 0;
  double L = 0;
  double beta = 0;
  double C_delta_d = 0;
  double d0 = 0;
  double epsilon = 0;
  double T = 0;  // validity horizon for the construction
};

struct SubSuperPair {
  Field lower, upper;
  double p = 0, q = 0;
  double t = 0;
};

// u^pm(t, v) = U(h(dbar_t(v))/eps -+ p(t)) +- q(t) with
// q(t) = 2 sigma beta e^{-beta t/(2 eps)} + 3 eps/beta and
// p(t) = L + (3/(sigma beta) + C_delta_d) t + 4 (1 - e^{-beta t/(2 eps)}).
SubSuperPair build_sub_super(const SubSuperParams& prm, const WaveProfile& wave,
                             const FrontState& front0, double t, int M);

// L^eps u = du/dt - eps Laplacian u - f(u)/eps with a centered difference in
// time from three frames dt apart and the grid Laplacian in space.
Field residual_field(const Field& um, const Field& uc, const Field& up,
                     double dt, double eps, const Poly& f);

enum class Crossing { Falling, Rising };

struct SpeedFit {
  double speed = 0;
  double ci_half_width = 0;  // 95% from fit residuals
  std::vector<double> positions;  // unwrapped crossing positions per frame
};

// Tracks the unique alpha_star-crossing of the given orientation through the
// frames and fits position against time. Zero or several crossings of that
// orientation in any frame aborts the extraction.
SpeedFit front_speed(const Trajectory& traj, double alpha_star,
                     Crossing orient);

}  // namespace gklab
