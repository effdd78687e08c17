#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "gklab/poly.hpp"

namespace gklab {

// Periodic scalar field on the d-dimensional unit torus, M cells per axis,
// row-major storage, cell j at v = j/M. Used both for the continuum problem
// (mesh cells) and the lattice problem (sites), which share the stepper.
struct Field {
  int dim = 1;
  int M = 0;
  std::vector<double> v;

  Field() = default;
  Field(int dim_, int M_, std::vector<double> values);
  static Field constant(int dim_, int M_, double value);
  std::size_t size() const { return v.size(); }
  double min() const;
  double max() const;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Field> frames;
};

// Time integration blew the invariant bounds; carries the first offender.
struct SolverError : std::runtime_error {
  double t = 0;
  long index = -1;
  double value = 0;
  SolverError(const std::string& msg, double t_, long index_, double value_);
};

// N^2 sum of neighbor differences at one site (central difference Laplacian).
double discrete_laplacian(const Field& u, long x);

// d u/dt = K^{-1/2} Laplacian u + K^{1/2} f(u), explicit RK4 with
// dt = min(sqrt(K)/(8 d N^2), 0.1/(sqrt(K) ||f'||)). Output times are landed
// on exactly. Values must stay inside [min u0 ^ alpha_-, max u0 v alpha_+]
// within 1e-6 or the run aborts; no clamping, the comparison tests rely on it.
Trajectory solve_pnk(const Field& u0, const ReactionPolynomial& rp, double K,
                     const std::vector<double>& out_times,
                     double dt_override = 0);

// d u/dt = eps Laplacian u + (1/eps) f(u); same stepper, coefficients
// a = eps, r = 1/eps. Requires M >= 20/eps so the interface is resolved.
Trajectory solve_pe(const Field& u0, const ReactionPolynomial& rp, double eps,
                    const std::vector<double>& out_times,
                    double dt_override = 0);

// Step-function embedding: cell of the continuum point per axis follows the
// half-open box [x/N - 1/(2N), x/N + 1/(2N)).
long embed_cell(double coord, int N);
double embed_step(const Field& u, const std::vector<double>& point);

struct ComparisonReport {
  bool ok = true;
  double first_time = 0;
  long first_index = -1;
  double first_magnitude = 0;  // upper - lower at the first violation
  double worst_violation = 0;  // max over all times of (lower - upper)^+
};

// Pointwise lower <= upper at every output time of two matching trajectories.
ComparisonReport check_comparison(const Trajectory& lower,
                                  const Trajectory& upper, double tol);

double generation_time_pe(const DerivedConstants& dc, double eps);
double generation_time_pnk(const DerivedConstants& dc, double K);

struct GenerationReport {
  double delta = 0;
  double eps = 0;  // eps for the continuum problem, K^{-1/2} for the lattice
  bool bounds_ok = false;
  bool upper_ok = false;
  bool lower_ok = false;
  bool pass = false;
  // smallest M0 for which the two conditional clauses hold
  double min_M0_pass = 0;
};

// Three-clause generation-of-interface check on the frame at the generation
// time: global bounds [alpha_- - delta, alpha_+ + delta]; u >= alpha_+ - delta
// wherever u0 >= alpha_* + M0 eps; u <= alpha_- + delta wherever
// u0 <= alpha_* - M0 eps.
GenerationReport generation_check(const Field& u_gen, const Field& u0,
                                  const ReactionPolynomial& rp,
                                  const DerivedConstants& dc, double eps,
                                  double delta, double M0);

struct GradientReport {
  double C_grad = 0;  // max over times, bonds of N |u(y) - u(x)| / K
  double C_lap = 0;   // max over times, sites of |Laplacian u| / K^2
};

GradientReport gradient_bounds(const Trajectory& traj, double K);

std::string trajectory_csv(const Trajectory& traj);

}  // namespace gklab
