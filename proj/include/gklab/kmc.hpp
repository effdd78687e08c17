#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "gklab/lattice.hpp"
#include "gklab/rates.hpp"
#include "gklab/rng.hpp"

namespace gklab {

// Independent Bernoulli(u(x)) occupancies, one uniform per site in site order.
Configuration sample_product_measure(std::shared_ptr<const TorusGeometry> g,
                                     const std::vector<double>& u,
                                     std::uint64_t seed,
                                     std::uint64_t stream = 0);

struct EventRecord {
  double t = 0;          // time right after the event
  bool kawasaki = false; // otherwise a Glauber flip
  Site x = -1, y = -1;   // exchanged bond, or flip site in x
};

// Rejection-free simulation state for the combined generator: exchanges at
// rate N^2/sqrt(K) per discordant bond (concordant bonds are no-ops and are
// not scheduled), flips at rate sqrt(K) c_x(eta). All bookkeeping is O(1)
// per event: a swap-removable list of discordant bonds and per-pattern site
// buckets for the finitely many flip-rate values.
class MarkovState {
 public:
  MarkovState(Configuration eta, const RateFunction& rates, double K);

  const Configuration& config() const { return eta_; }
  double time() const { return time_; }
  double kawasaki_rate() const { return kaw_per_bond_ * double(disc_.size()); }
  double glauber_rate() const { return sqrtK_ * sumc_; }
  double total_rate() const { return kawasaki_rate() + glauber_rate(); }
  std::size_t discordant_count() const { return disc_.size(); }
  bool absorbed() const { return total_rate() <= 0; }
  std::uint64_t events() const { return events_; }

  // Two-phase stepping so callers can observe the state inside the waiting
  // interval: draw_wait advances the clock to the next event time and returns
  // it, apply_event then selects and applies that event. step() does both.
  double draw_wait(Philox& rng);
  EventRecord apply_event(Philox& rng);
  EventRecord step(Philox& rng);

  // full rebuild of patterns, buckets, bond list, and rate sums; true when it
  // matches the incremental bookkeeping exactly
  bool check_consistency() const;

 private:
  void apply_toggle(Site z);          // occupancy bit at z just flipped
  void refresh_sumc();

  Configuration eta_;
  RateFunction rates_;
  double sqrtK_ = 1;
  double kaw_per_bond_ = 0;
  double sumc_ = 0;
  double time_ = 0;
  std::uint64_t events_ = 0;

  int wbits_ = 0;                       // window size
  std::vector<Site> shift_;             // site whose window bit i covers z
  std::vector<std::uint32_t> pattern_;  // current window pattern per site
  std::vector<std::pair<Site, Site>> bonds_;
  std::vector<std::int32_t> site_bond_start_;  // CSR offsets into site_bonds_
  std::vector<std::int32_t> site_bonds_;       // incident bond ids per site
  std::vector<std::int32_t> disc_;        // discordant bond ids
  std::vector<std::int32_t> bond_pos_;    // position in disc_, -1 if absent
  std::vector<std::vector<Site>> bucket_; // sites per pattern value
  std::vector<std::int32_t> bucket_pos_;  // position of a site in its bucket
};

struct Snapshot {
  double t = 0;
  Configuration config;
};

// Runs the chain and invokes the observer at each requested time with the
// state's left limit there; sorted times required. Reproducible per
// (seed, stream).
void simulate(const Configuration& eta0, const RateFunction& rates, double K,
              const std::vector<double>& obs_times,
              const std::function<void(double, const Configuration&)>& observer,
              std::uint64_t seed, std::uint64_t stream = 0);

std::vector<Snapshot> simulate_collect(const Configuration& eta0,
                                       const RateFunction& rates, double K,
                                       const std::vector<double>& obs_times,
                                       std::uint64_t seed,
                                       std::uint64_t stream = 0);

struct EmpiricalField {
  int dim = 1;
  int N = 0;
  int block = 1;
  int per_side = 0;
  std::vector<double> density;  // block densities, row-major over blocks
};

EmpiricalField empirical_measure(const Configuration& eta, int block);

// <alpha^N, phi> approximated by the block Riemann sum at block centers.
double pair_riemann(const EmpiricalField& f,
                    const std::function<double(const std::vector<double>&)>& phi);

// Exact pairing (1/N^d) sum_x eta_x phi(x/N).
double pair_exact(const Configuration& eta,
                  const std::function<double(const std::vector<double>&)>& phi);

// Dense generator of the full dynamics over all 2^(N^d) states; row-major,
// entry [s*S + s'] the rate s -> s'. States are bit-packed LSB-first by site
// index. Capacity-limited to 10 sites.
std::vector<double> exact_generator_dense(const Configuration& proto,
                                          const RateFunction& rates, double K);

// Distribution at time t started from the point mass at eta0, by
// uniformization with Poisson tail below 1e-14. Up to 16 sites.
std::vector<double> exact_distribution(const Configuration& eta0,
                                       const RateFunction& rates, double K,
                                       double t);

// H(nu_p | nu_q) for product Bernoulli measures with densities p and q.
double relative_entropy_product(const std::vector<double>& p,
                                const std::vector<double>& q);

}  // namespace gklab
