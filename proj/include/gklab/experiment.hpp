#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "gklab/front.hpp"
#include "gklab/kmc.hpp"
#include "gklab/pde.hpp"
#include "gklab/poly.hpp"
#include "gklab/rates.hpp"
#include "gklab/wave.hpp"

namespace gklab {

// GKLAB_WORKERS when set, hardware concurrency otherwise, at least 1.
int worker_count();

// Runs task(0..n-1) on a bounded pool. Tasks write to disjoint slots and the
// caller aggregates afterwards in index order, so results never depend on the
// scheduling. The first task exception is rethrown after the pool drains.
void parallel_for(int n, const std::function<void(int)>& task);

// Parametric initial density profile on the unit torus.
struct ProfileSpec {
  std::string kind = "tanh_front";  // tanh_front | disk | constant | samples
  std::vector<std::pair<double, double>> arcs{{0.4, 0.2}};  // 1D G+ seeds
  double width = 0.05;
  double lo = 0.25, hi = 0.75;  // plateau values u_-, u_+
  std::vector<double> center{0.5, 0.5};  // 2D disk
  double radius = 0.25;
  double value = 0.5;            // constant profile
  std::vector<double> samples;   // custom cell values, row-major
};

struct ExperimentConfig {
  // model: an explicit table wins over the cubic target when present
  double scale = 25.0;
  double alpha_minus = 0.25, alpha_star = 0.45, alpha_plus = 0.75;
  bool use_table = false;
  RateFunction table;

  int dim = 1;
  int N = 512;
  double K = 25.0;
  std::vector<int> ladder_N{500, 1000, 2000};
  std::vector<double> ladder_K{6.0, 10.0, 16.0};
  double schedule_delta = 1.0;  // K <= delta sqrt(log N) gate for hydro runs

  ProfileSpec u0;

  int replicas = 20;
  std::uint64_t seed = 20260822;
  std::vector<double> out_times{0.25,  0.275, 0.3,   0.325, 0.35,
                                0.375, 0.4,   0.425, 0.45};
  double matched_time = 0.35;
  int blocks = 50;  // coarse-graining blocks per side

  double eps = 0.02;  // sharp-interface solver instantiation
  std::string out_dir = "out";
};

std::string config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const std::string& text);

struct ValidationCheck {
  std::string name;
  bool ok = false;
  double margin = 0;  // distance to the failure boundary where meaningful
  std::string message;
};

struct ValidationReport {
  bool ok = false;
  std::vector<ValidationCheck> checks;
  std::string to_json() const;
};

// All invariant checks with measured margins; never throws, failures are
// reported with actionable messages. The K schedule gate applies only when
// the stochastic hydrodynamic experiment is selected.
ValidationReport validate_config(const ExperimentConfig& cfg,
                                 bool hydro_selected);

// Reaction polynomial of the configured model (table expansion or the cubic).
ReactionPolynomial model_polynomial(const ExperimentConfig& cfg);
// Flip-rate table of the configured model (explicit or designed, 1D only).
RateFunction model_rates(const ExperimentConfig& cfg);

// Profile sampled at cell centers j/M (row-major in 2D).
Field profile_field(const ProfileSpec& p, int dim, int M);
// alpha_star level set of the profile; M is used only by gridded kinds.
FrontState profile_front(const ProfileSpec& p, double alpha_star, int dim,
                         int M);

// ---- stochastic hydrodynamic experiment ----

struct PhiDeviation {
  std::string name;
  double limit = 0;      // <chi_{Gamma_t*}, phi>
  double mean = 0;       // replica mean of <alpha^N(t*), phi>
  double deviation = 0;  // |mean - limit|
  std::vector<double> replicas;  // per-replica pairings
};

struct HydroLevel {
  int N = 0;
  double K = 0;
  double sup_deviation = 0;
  std::vector<PhiDeviation> phis;
  double speed = 0;
  double speed_ci = 0;  // 95% half-width
  std::vector<double> times;
  std::vector<double> edge_left, edge_right;  // window-mass edge estimates
};

struct HydroResult {
  double c_star = 0;
  double matched_time = 0;
  std::vector<HydroLevel> levels;
  bool speed_ok = false;     // top level within 10% of c_star
  bool monotone_ok = false;  // sup deviation strictly decreasing across levels
  bool pass = false;
  std::string report_json;
};

HydroResult run_hydrodynamic(const ExperimentConfig& cfg);

// ---- deterministic lattice-PDE ladder ----

struct PdeLadderRung {
  int N = 0;
  double K = 0;
  double speed = 0;
  double speed_err = 0;     // |speed - c_star| / c_star
  double off_fraction = 0;  // plateaued share of cells off the layer band
  long off_cells = 0;       // survivor count behind the fraction
};

struct PdeLadderResult {
  double c_star = 0;
  std::vector<PdeLadderRung> rungs;
  double balanced_speed = 0;
  bool fractions_ok = false;  // >= 0.98 and non-decreasing along the ladder
  bool errors_ok = false;     // non-increasing along the ladder, with slack
  bool balanced_ok = false;
  bool pass = false;
  std::string report_json;
};

PdeLadderResult run_pde_ladder(const ExperimentConfig& cfg);

// ---- certificate chain ----

struct ResidualMargins {
  double margin_plus = 0;   // min L^eps u+ over grid and checked times
  double margin_minus = 0;  // max L^eps u-
};

// Residuals of the comparison pair on an M-grid at the given construction
// times (centered time difference, grid Laplacian).
ResidualMargins residual_margins(const SubSuperParams& prm,
                                 const WaveProfile& wave,
                                 const ReactionPolynomial& f,
                                 const FrontState& front0,
                                 const std::vector<double>& times, int M);

struct CertificateResult {
  bool pass = false;
  std::string certificate_json;  // ordered keys, no timestamps
};

// Full chain: model validation, wave solve, constant selection (sigma, d0,
// T, L), residual margins on two grids, generation-time sandwich, sandwich
// propagation against the lattice solver, and the Laplacian consistency
// ladder. Every reported number carries its tolerance and margin.
CertificateResult run_certificates(const ExperimentConfig& cfg);

// ---- stochastic-vs-exact oracle cross-check ----

struct OracleRow {
  double t = 0;
  double chi2 = 0;
  int dof = 0;
  double threshold = 0;  // 99% quantile
  int cells = 0;         // chi^2 cells after pooling
  bool pass = false;
};

struct OracleReport {
  std::vector<OracleRow> rows;
  bool pass = false;
  std::string report_json;
};

// Monte Carlo state-occupation frequencies against the uniformized exact
// distribution, chi^2 with expected counts below 5 pooled.
OracleReport run_oracle(const Configuration& eta0, const RateFunction& rates,
                        double K, const std::vector<double>& times,
                        int replicas, std::uint64_t seed);

}  // namespace gklab
