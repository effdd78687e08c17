#include "gklab/kmc.hpp"

#include <algorithm>
#include <cmath>

namespace gklab {
namespace {

std::vector<int> negated(const std::vector<int>& v) {
  std::vector<int> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = -v[i];
  return out;
}

}  // namespace

Configuration sample_product_measure(std::shared_ptr<const TorusGeometry> g,
                                     const std::vector<double>& u,
                                     std::uint64_t seed, std::uint64_t stream) {
  if (long(u.size()) != long(g->sites()))
    throw DomainError("sample_product_measure: density size mismatch");
  for (double x : u)
    if (!(x >= 0 && x <= 1))
      throw DomainError("sample_product_measure: density outside [0,1]");
  Philox rng(seed, stream);
  std::vector<std::uint8_t> occ(u.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    occ[i] = rng.uniform() < u[i] ? 1 : 0;
  return Configuration(std::move(g), std::move(occ));
}

MarkovState::MarkovState(Configuration eta, const RateFunction& rates,
                         double K)
    : eta_(std::move(eta)), rates_(rates) {
  if (!(K > 1)) throw DomainError("MarkovState: K must exceed 1");
  rates_.check_valid();
  if (rates_.window.dim != eta_.geometry().dim())
    throw DomainError("MarkovState: window dimension mismatch");
  sqrtK_ = std::sqrt(K);
  const TorusGeometry& g = eta_.geometry();
  const double N = g.side();
  kaw_per_bond_ = N * N / sqrtK_;

  const LocalWindow& w = rates_.window;
  wbits_ = w.bits();
  const Site n = g.sites();

  shift_.resize(std::size_t(n) * wbits_);
  std::vector<std::vector<int>> neg(wbits_);
  for (int i = 0; i < wbits_; ++i) neg[i] = negated(w.offsets[i]);
  for (Site z = 0; z < n; ++z)
    for (int i = 0; i < wbits_; ++i)
      shift_[std::size_t(z) * wbits_ + i] = g.shifted(z, neg[i]);

  pattern_.resize(n);
  bucket_.assign(std::size_t(1) << wbits_, {});
  bucket_pos_.resize(n);
  sumc_ = 0;
  for (Site y = 0; y < n; ++y) {
    const std::uint32_t p = eta_.read_window(y, w);
    pattern_[y] = p;
    bucket_pos_[y] = std::int32_t(bucket_[p].size());
    bucket_[p].push_back(y);
    sumc_ += rates_.table[p];
  }

  bonds_ = g.bonds();
  bond_pos_.assign(bonds_.size(), -1);
  std::vector<std::int32_t> cnt(n + 1, 0);
  for (const auto& b : bonds_) {
    ++cnt[b.first + 1];
    ++cnt[b.second + 1];
  }
  for (Site i = 0; i < n; ++i) cnt[i + 1] += cnt[i];
  site_bond_start_ = cnt;
  site_bonds_.resize(2 * bonds_.size());
  std::vector<std::int32_t> fill = site_bond_start_;
  for (std::size_t b = 0; b < bonds_.size(); ++b) {
    site_bonds_[fill[bonds_[b].first]++] = std::int32_t(b);
    site_bonds_[fill[bonds_[b].second]++] = std::int32_t(b);
  }

  disc_.clear();
  for (std::size_t b = 0; b < bonds_.size(); ++b)
    if (eta_.occupied(bonds_[b].first) != eta_.occupied(bonds_[b].second)) {
      bond_pos_[b] = std::int32_t(disc_.size());
      disc_.push_back(std::int32_t(b));
    }
}

void MarkovState::refresh_sumc() {
  double s = 0;
  for (std::size_t p = 0; p < bucket_.size(); ++p)
    s += rates_.table[p] * double(bucket_[p].size());
  sumc_ = s;
}

void MarkovState::apply_toggle(Site z) {
  const std::vector<double>& tab = rates_.table;
  for (int i = 0; i < wbits_; ++i) {
    const Site y = shift_[std::size_t(z) * wbits_ + i];
    const std::uint32_t oldp = pattern_[y];
    const std::uint32_t newp = oldp ^ (std::uint32_t(1) << i);
    std::vector<Site>& ob = bucket_[oldp];
    const std::int32_t pos = bucket_pos_[y];
    const Site moved = ob.back();
    ob[pos] = moved;
    bucket_pos_[moved] = pos;
    ob.pop_back();
    std::vector<Site>& nb = bucket_[newp];
    bucket_pos_[y] = std::int32_t(nb.size());
    nb.push_back(y);
    pattern_[y] = newp;
    sumc_ += tab[newp] - tab[oldp];
  }
  for (std::int32_t k = site_bond_start_[z]; k < site_bond_start_[z + 1]; ++k) {
    const std::int32_t b = site_bonds_[k];
    const bool want =
        eta_.occupied(bonds_[b].first) != eta_.occupied(bonds_[b].second);
    const bool have = bond_pos_[b] >= 0;
    if (want == have) continue;
    if (want) {
      bond_pos_[b] = std::int32_t(disc_.size());
      disc_.push_back(b);
    } else {
      const std::int32_t pos = bond_pos_[b];
      const std::int32_t last = disc_.back();
      disc_[pos] = last;
      bond_pos_[last] = pos;
      disc_.pop_back();
      bond_pos_[b] = -1;
    }
  }
}

double MarkovState::draw_wait(Philox& rng) {
  const double tot = total_rate();
  if (!(tot > 0))
    throw DomainError("MarkovState: absorbed state has no next event");
  time_ += rng.exponential(tot);
  return time_;
}

EventRecord MarkovState::apply_event(Philox& rng) {
  const double kaw = kawasaki_rate();
  const double tot = kaw + glauber_rate();
  EventRecord ev;
  ev.t = time_;
  ++events_;
  if ((events_ & ((std::uint64_t(1) << 20) - 1)) == 0) refresh_sumc();
  const double r = rng.uniform() * tot;
  if (r < kaw) {
    const std::int32_t b = disc_[rng.below(disc_.size())];
    const Site x = bonds_[b].first, y = bonds_[b].second;
    eta_.exchange(x, y);
    ev.kawasaki = true;
    ev.x = x;
    ev.y = y;
    apply_toggle(x);
    apply_toggle(y);
    return ev;
  }
  double target = (r - kaw) / sqrtK_;  // position inside sumc_
  const int nb = 1 << wbits_;
  int chosen = -1;
  double acc = 0;
  for (int p = 0; p < nb; ++p) {
    acc += rates_.table[p] * double(bucket_[p].size());
    if (target < acc) {
      chosen = p;
      break;
    }
  }
  if (chosen < 0) {  // incremental-sum roundoff fell off the end
    for (int p = nb - 1; p >= 0; --p)
      if (!bucket_[p].empty() && rates_.table[p] > 0) {
        chosen = p;
        break;
      }
  }
  if (chosen < 0)
    throw DomainError("MarkovState: flip selected with empty rate structure");
  const std::vector<Site>& bk = bucket_[chosen];
  const Site site = bk[rng.below(bk.size())];
  eta_.flip(site);
  ev.kawasaki = false;
  ev.x = site;
  apply_toggle(site);
  return ev;
}

EventRecord MarkovState::step(Philox& rng) {
  draw_wait(rng);
  return apply_event(rng);
}

bool MarkovState::check_consistency() const {
  const TorusGeometry& g = eta_.geometry();
  const Site n = g.sites();
  double sum = 0;
  for (Site y = 0; y < n; ++y) {
    const std::uint32_t p = eta_.read_window(y, rates_.window);
    if (p != pattern_[y]) return false;
    if (bucket_pos_[y] < 0 ||
        bucket_pos_[y] >= std::int32_t(bucket_[p].size()))
      return false;
    if (bucket_[p][bucket_pos_[y]] != y) return false;
    sum += rates_.table[p];
  }
  std::size_t in_buckets = 0;
  for (const auto& b : bucket_) in_buckets += b.size();
  if (in_buckets != std::size_t(n)) return false;
  if (std::abs(sum - sumc_) > 1e-9 * (1.0 + std::abs(sum))) return false;

  std::size_t ndisc = 0;
  for (std::size_t b = 0; b < bonds_.size(); ++b) {
    const bool want =
        eta_.occupied(bonds_[b].first) != eta_.occupied(bonds_[b].second);
    const bool have = bond_pos_[b] >= 0;
    if (want != have) return false;
    if (want) {
      ++ndisc;
      if (disc_[bond_pos_[b]] != std::int32_t(b)) return false;
    }
  }
  return ndisc == disc_.size();
}

void simulate(const Configuration& eta0, const RateFunction& rates, double K,
              const std::vector<double>& obs_times,
              const std::function<void(double, const Configuration&)>& observer,
              std::uint64_t seed, std::uint64_t stream) {
  double prev = 0;
  for (double t : obs_times) {
    if (t < prev)
      throw DomainError("simulate: observation times must be sorted and >= 0");
    prev = t;
  }
  MarkovState st(eta0, rates, K);
  Philox rng(seed, stream);
  std::size_t k = 0;
  while (k < obs_times.size() && obs_times[k] <= 0) {
    observer(obs_times[k], st.config());
    ++k;
  }
  while (k < obs_times.size()) {
    if (st.absorbed()) {
      for (; k < obs_times.size(); ++k) observer(obs_times[k], st.config());
      break;
    }
    const double t_next = st.draw_wait(rng);
    for (; k < obs_times.size() && obs_times[k] < t_next; ++k)
      observer(obs_times[k], st.config());
    if (k == obs_times.size()) break;
    st.apply_event(rng);
  }
}

std::vector<Snapshot> simulate_collect(const Configuration& eta0,
                                       const RateFunction& rates, double K,
                                       const std::vector<double>& obs_times,
                                       std::uint64_t seed,
                                       std::uint64_t stream) {
  std::vector<Snapshot> out;
  out.reserve(obs_times.size());
  simulate(
      eta0, rates, K, obs_times,
      [&](double t, const Configuration& c) { out.push_back({t, c}); }, seed,
      stream);
  return out;
}

EmpiricalField empirical_measure(const Configuration& eta, int block) {
  const TorusGeometry& g = eta.geometry();
  if (block < 1 || g.side() % block != 0)
    throw DomainError("empirical_measure: block size must divide N");
  EmpiricalField f;
  f.dim = g.dim();
  f.N = g.side();
  f.block = block;
  f.per_side = g.side() / block;
  long nblocks = 1;
  for (int k = 0; k < f.dim; ++k) nblocks *= f.per_side;
  f.density.assign(nblocks, 0.0);
  for (Site x = 0; x < g.sites(); ++x) {
    if (!eta.occupied(x)) continue;
    const std::vector<int> c = g.coords_of(x);
    long idx = 0;
    for (int k = 0; k < f.dim; ++k) idx = idx * f.per_side + c[k] / block;
    f.density[idx] += 1.0;
  }
  double cells = 1;
  for (int k = 0; k < f.dim; ++k) cells *= block;
  for (double& d : f.density) d /= cells;
  return f;
}

double pair_riemann(const EmpiricalField& f,
                    const std::function<double(const std::vector<double>&)>& phi) {
  std::vector<double> center(f.dim);
  const double cell_vol = std::pow(double(f.block) / f.N, f.dim);
  double acc = 0;
  for (long b = 0; b < long(f.density.size()); ++b) {
    long rem = b;
    for (int k = f.dim - 1; k >= 0; --k) {
      const long c = rem % f.per_side;
      rem /= f.per_side;
      center[k] = (double(c) * f.block + 0.5 * (f.block - 1)) / f.N;
    }
    acc += f.density[b] * phi(center) * cell_vol;
  }
  return acc;
}

double pair_exact(const Configuration& eta,
                  const std::function<double(const std::vector<double>&)>& phi) {
  const TorusGeometry& g = eta.geometry();
  std::vector<double> v(g.dim());
  double acc = 0;
  for (Site x = 0; x < g.sites(); ++x) {
    if (!eta.occupied(x)) continue;
    const std::vector<int> c = g.coords_of(x);
    for (int k = 0; k < g.dim(); ++k) v[k] = double(c[k]) / g.side();
    acc += phi(v);
  }
  return acc / double(g.sites());
}

namespace {

// per-site gather lists to read a window pattern straight from a packed state
std::vector<Site> window_gather(const TorusGeometry& g, const LocalWindow& w) {
  std::vector<Site> gather(std::size_t(g.sites()) * w.bits());
  for (Site x = 0; x < g.sites(); ++x)
    for (int i = 0; i < w.bits(); ++i)
      gather[std::size_t(x) * w.bits() + i] = g.shifted(x, w.offsets[i]);
  return gather;
}

std::uint32_t state_pattern(std::uint32_t s, const std::vector<Site>& gather,
                            Site x, int wbits) {
  std::uint32_t p = 0;
  for (int i = 0; i < wbits; ++i)
    p |= ((s >> gather[std::size_t(x) * wbits + i]) & 1u) << i;
  return p;
}

}  // namespace

std::vector<double> exact_generator_dense(const Configuration& proto,
                                          const RateFunction& rates,
                                          double K) {
  const TorusGeometry& g = proto.geometry();
  if (g.sites() > 10)
    throw CapacityError("exact_generator_dense: more than 10 sites");
  rates.check_valid();
  const int n = g.sites();
  const std::uint32_t S = std::uint32_t(1) << n;
  const double sK = std::sqrt(K);
  const double kaw = double(g.side()) * g.side() / sK;
  const std::vector<Site> gather = window_gather(g, rates.window);
  const int wb = rates.window.bits();

  std::vector<double> Q(std::size_t(S) * S, 0.0);
  for (std::uint32_t s = 0; s < S; ++s) {
    double out = 0;
    for (const auto& b : g.bonds()) {
      if (((s >> b.first) & 1u) == ((s >> b.second) & 1u)) continue;
      const std::uint32_t tgt =
          s ^ ((std::uint32_t(1) << b.first) | (std::uint32_t(1) << b.second));
      Q[std::size_t(s) * S + tgt] += kaw;
      out += kaw;
    }
    for (Site x = 0; x < n; ++x) {
      const double rate = sK * rates.table[state_pattern(s, gather, x, wb)];
      if (rate <= 0) continue;
      Q[std::size_t(s) * S + (s ^ (std::uint32_t(1) << x))] += rate;
      out += rate;
    }
    Q[std::size_t(s) * S + s] = -out;
  }
  return Q;
}

std::vector<double> exact_distribution(const Configuration& eta0,
                                       const RateFunction& rates, double K,
                                       double t) {
  const TorusGeometry& g = eta0.geometry();
  if (g.sites() > 16)
    throw CapacityError("exact_distribution: more than 16 sites");
  if (t < 0) throw DomainError("exact_distribution: t must be >= 0");
  rates.check_valid();
  const int n = g.sites();
  const std::uint32_t S = std::uint32_t(1) << n;
  const double sK = std::sqrt(K);
  const double kaw = double(g.side()) * g.side() / sK;
  const std::vector<Site> gather = window_gather(g, rates.window);
  const int wb = rates.window.bits();

  std::uint32_t s0 = 0;
  for (Site x = 0; x < n; ++x)
    if (eta0.occupied(x)) s0 |= std::uint32_t(1) << x;

  std::vector<double> result(S, 0.0);
  if (t == 0) {
    result[s0] = 1.0;
    return result;
  }

  // sparse transition rows
  std::vector<std::uint32_t> row_start(S + 1, 0);
  std::vector<std::pair<std::uint32_t, double>> entries;
  std::vector<double> outrate(S, 0.0);
  entries.reserve(std::size_t(S) * (g.bonds().size() + n));
  for (std::uint32_t s = 0; s < S; ++s) {
    row_start[s] = std::uint32_t(entries.size());
    double out = 0;
    for (const auto& b : g.bonds()) {
      if (((s >> b.first) & 1u) == ((s >> b.second) & 1u)) continue;
      const std::uint32_t tgt =
          s ^ ((std::uint32_t(1) << b.first) | (std::uint32_t(1) << b.second));
      entries.emplace_back(tgt, kaw);
      out += kaw;
    }
    for (Site x = 0; x < n; ++x) {
      const double rate = sK * rates.table[state_pattern(s, gather, x, wb)];
      if (rate <= 0) continue;
      entries.emplace_back(s ^ (std::uint32_t(1) << x), rate);
      out += rate;
    }
    outrate[s] = out;
  }
  row_start[S] = std::uint32_t(entries.size());

  double lambda = 0;
  for (std::uint32_t s = 0; s < S; ++s) lambda = std::max(lambda, outrate[s]);
  if (lambda <= 0) {  // no transitions anywhere: frozen dynamics
    result[s0] = 1.0;
    return result;
  }

  // uniformization: p(t) = sum_k Pois(lambda t)(k) * v P^k
  std::vector<double> v(S, 0.0), vn(S, 0.0);
  v[s0] = 1.0;
  const double lt = lambda * t;
  double logw = -lt;  // log Poisson weight at k = 0
  double cum = 0;
  const long kmax = long(20.0 * lt) + 400;
  for (long k = 0; k <= kmax; ++k) {
    const double w = std::exp(logw);
    for (std::uint32_t s = 0; s < S; ++s) result[s] += w * v[s];
    cum += w;
    if (cum >= 1.0 - 1e-14 && double(k) > lt) break;
    std::fill(vn.begin(), vn.end(), 0.0);
    for (std::uint32_t s = 0; s < S; ++s) {
      const double mass = v[s];
      if (mass == 0) continue;
      vn[s] += mass * (1.0 - outrate[s] / lambda);
      for (std::uint32_t e = row_start[s]; e < row_start[s + 1]; ++e)
        vn[entries[e].first] += mass * (entries[e].second / lambda);
    }
    v.swap(vn);
    logw += std::log(lt) - std::log(double(k + 1));
  }
  // tolerate the tiny unassigned tail: renormalize by the cumulative weight
  for (double& x : result) x /= cum;
  return result;
}

double relative_entropy_product(const std::vector<double>& p,
                                const std::vector<double>& q) {
  if (p.size() != q.size())
    throw DomainError("relative_entropy_product: size mismatch");
  double h = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(q[i] > 0 && q[i] < 1))
      throw DomainError("relative_entropy_product: q must lie strictly in (0,1)");
    if (!(p[i] >= 0 && p[i] <= 1))
      throw DomainError("relative_entropy_product: p must lie in [0,1]");
    if (p[i] > 0) h += p[i] * std::log(p[i] / q[i]);
    if (p[i] < 1) h += (1.0 - p[i]) * std::log((1.0 - p[i]) / (1.0 - q[i]));
  }
  return h;
}

}  // namespace gklab
