#include "gklab/front.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#include "gklab/lattice.hpp"  // DomainError

namespace gklab {
namespace {

constexpr double kMergeTol = 1e-12;

double wrap01(double x) { return x - std::floor(x); }

double circ_dist(double a, double b) {
  double d = std::abs(a - b);
  d -= std::floor(d);
  return std::min(d, 1.0 - d);
}

// Canonical arc list: starts in [0,1), sorted, disjoint; at most the last
// arc wraps past 1 (kept as start + length > 1). Length >= 1 means full cover.
std::vector<std::pair<double, double>> merge_arcs(
    std::vector<std::pair<double, double>> in, bool& full) {
  full = false;
  std::vector<std::pair<double, double>> ivals;  // (start, end) on the line
  for (auto& a : in) {
    if (!(a.second > 0)) throw DomainError("front: arc length must be positive");
    if (a.second >= 1.0 - kMergeTol) {
      full = true;
      return {};
    }
    const double s = wrap01(a.first);
    ivals.emplace_back(s, s + a.second);
  }
  if (ivals.empty()) throw DomainError("front: no arcs given");
  std::sort(ivals.begin(), ivals.end());
  std::vector<std::pair<double, double>> m;
  for (const auto& iv : ivals) {
    if (!m.empty() && iv.first <= m.back().second + kMergeTol)
      m.back().second = std::max(m.back().second, iv.second);
    else
      m.push_back(iv);
  }
  // wrap contact: the tail of the last arc may reach around to swallow
  // leading arcs
  while (m.size() >= 2 && m.back().second >= 1.0 + m.front().first - kMergeTol) {
    m.back().second = std::max(m.back().second, 1.0 + m.front().second);
    m.erase(m.begin());
  }
  if (m.back().second - m.front().first >= 1.0 - kMergeTol ||
      m.back().second >= 1.0 + m.front().first - kMergeTol) {
    // single wrapped arc covering the circle, or tail meeting its own head
    if (m.size() == 1 && m[0].second - m[0].first >= 1.0 - kMergeTol) {
      full = true;
      return {};
    }
    if (m.size() >= 2) {
      full = true;
      return {};
    }
  }
  std::vector<std::pair<double, double>> out;
  out.reserve(m.size());
  for (auto& iv : m) out.emplace_back(iv.first, iv.second - iv.first);
  return out;
}

bool arc_contains(const FrontState& f, double v) {
  for (const auto& a : f.arcs) {
    double u = v - a.first;
    u -= std::floor(u);
    if (u < a.second) return true;
  }
  return false;
}

// arc and gap half-widths; the kinks of dbar sit exactly at these depths
void half_widths(const FrontState& f, double& arc_min, double& gap_min) {
  arc_min = std::numeric_limits<double>::infinity();
  gap_min = arc_min;
  const std::size_t n = f.arcs.size();
  for (std::size_t i = 0; i < n; ++i) {
    arc_min = std::min(arc_min, 0.5 * f.arcs[i].second);
    const double e = f.arcs[i].first + f.arcs[i].second;
    const double s_next =
        i + 1 < n ? f.arcs[i + 1].first : f.arcs[0].first + 1.0;
    gap_min = std::min(gap_min, 0.5 * (s_next - e));
  }
}

void require_1d(const FrontState& f, const char* who) {
  if (f.dim != 1) throw DomainError(std::string(who) + ": expected a 1D front");
}

double bilinear_dbar(const FrontState& f, double v0, double v1) {
  const int M = f.M;
  const double r = wrap01(v0) * M, c = wrap01(v1) * M;
  const int r0 = int(std::floor(r)) % M, c0 = int(std::floor(c)) % M;
  const int r1 = (r0 + 1) % M, c1 = (c0 + 1) % M;
  const double fr = r - std::floor(r), fc = c - std::floor(c);
  const double a = f.dbar[long(r0) * M + c0], b = f.dbar[long(r0) * M + c1];
  const double cc = f.dbar[long(r1) * M + c0], d = f.dbar[long(r1) * M + c1];
  return (1 - fr) * ((1 - fc) * a + fc * b) + fr * ((1 - fc) * cc + fc * d);
}

}  // namespace

FrontState front_from_arcs(const std::vector<std::pair<double, double>>& arcs) {
  FrontState f;
  f.dim = 1;
  f.arcs = merge_arcs(arcs, f.full_cover);
  if (f.arcs.empty())
    throw DomainError("front_from_arcs: region must be nonempty");
  if (f.full_cover)
    throw DomainError("front_from_arcs: complement must be nonempty");
  return f;
}

FrontState front_from_indicator(const std::vector<std::uint8_t>& inside, int M) {
  if (M < 4) throw DomainError("front_from_indicator: M too small");
  if (long(inside.size()) != long(M) * M)
    throw DomainError("front_from_indicator: size mismatch");
  long n_in = 0;
  for (auto b : inside) n_in += b ? 1 : 0;
  if (n_in == 0 || n_in == long(M) * M)
    throw DomainError("front_from_indicator: region and complement must be nonempty");

  const long n = long(M) * M;
  const double h = 1.0 / M;
  const double INF = std::numeric_limits<double>::infinity();
  std::vector<double> d(n, INF);
  std::vector<char> frozen(n, 0);
  auto idx = [M](int r, int c) {
    return long((r % M + M) % M) * M + ((c % M + M) % M);
  };

  using QE = std::pair<double, long>;
  std::priority_queue<QE, std::vector<QE>, std::greater<QE>> heap;

  for (int r = 0; r < M; ++r)
    for (int c = 0; c < M; ++c) {
      const long i = idx(r, c);
      const bool me = inside[i] != 0;
      if ((inside[idx(r + 1, c)] != 0) != me || (inside[idx(r - 1, c)] != 0) != me ||
          (inside[idx(r, c + 1)] != 0) != me || (inside[idx(r, c - 1)] != 0) != me) {
        d[i] = 0.5 * h;  // binary indicator: interface assumed mid-bond
        frozen[i] = 1;
      }
    }

  auto update = [&](int r, int c) {
    const long i = idx(r, c);
    if (frozen[i]) return;
    const double a = std::min(frozen[idx(r - 1, c)] ? d[idx(r - 1, c)] : INF,
                              frozen[idx(r + 1, c)] ? d[idx(r + 1, c)] : INF);
    const double b = std::min(frozen[idx(r, c - 1)] ? d[idx(r, c - 1)] : INF,
                              frozen[idx(r, c + 1)] ? d[idx(r, c + 1)] : INF);
    if (a == INF && b == INF) return;
    double cand;
    const double lo = std::min(a, b), hi = std::max(a, b);
    if (hi - lo >= h || hi == INF)
      cand = lo + h;
    else
      cand = 0.5 * (a + b + std::sqrt(2.0 * h * h - (a - b) * (a - b)));
    if (cand < d[i]) {
      d[i] = cand;
      heap.emplace(cand, i);
    }
  };

  for (int r = 0; r < M; ++r)
    for (int c = 0; c < M; ++c)
      if (frozen[idx(r, c)]) {
        update(r - 1, c);
        update(r + 1, c);
        update(r, c - 1);
        update(r, c + 1);
      }

  while (!heap.empty()) {
    auto [dv, i] = heap.top();
    heap.pop();
    if (frozen[i] || dv > d[i]) continue;
    frozen[i] = 1;
    const int r = int(i / M), c = int(i % M);
    update(r - 1, c);
    update(r + 1, c);
    update(r, c - 1);
    update(r, c + 1);
  }

  FrontState f;
  f.dim = 2;
  f.M = M;
  f.dbar.resize(n);
  for (long i = 0; i < n; ++i) f.dbar[i] = inside[i] ? -d[i] : d[i];
  return f;
}

double signed_distance_1d(const FrontState& f, double v) {
  require_1d(f, "signed_distance");
  if (f.full_cover) return -0.5;
  double dist = std::numeric_limits<double>::infinity();
  for (const auto& a : f.arcs) {
    dist = std::min(dist, circ_dist(v, a.first));
    dist = std::min(dist, circ_dist(v, a.first + a.second));
  }
  return arc_contains(f, v) ? -dist : dist;
}

double signed_distance(const FrontState& f, const std::vector<double>& point) {
  if (f.dim == 1) {
    if (point.size() != 1) throw DomainError("signed_distance: expected 1 coordinate");
    return signed_distance_1d(f, point[0]);
  }
  if (point.size() != 2) throw DomainError("signed_distance: expected 2 coordinates");
  return bilinear_dbar(f, point[0], point[1]);
}

FrontState huygens_evolve(const FrontState& f, double c_star, double t) {
  if (!(c_star > 0)) throw DomainError("huygens_evolve: c_star must be positive");
  if (t < 0) throw DomainError("huygens_evolve: t must be >= 0");
  if (t == 0 || f.full_cover) return f;
  if (f.dim == 1) {
    std::vector<std::pair<double, double>> grown;
    grown.reserve(f.arcs.size());
    for (const auto& a : f.arcs)
      grown.emplace_back(a.first - c_star * t, a.second + 2.0 * c_star * t);
    FrontState g;
    g.dim = 1;
    g.arcs = merge_arcs(grown, g.full_cover);
    return g;
  }
  FrontState g = f;
  for (double& x : g.dbar) x -= c_star * t;
  return g;
}

double topology_time(const FrontState& f, double c_star) {
  require_1d(f, "topology_time");
  if (!(c_star > 0)) throw DomainError("topology_time: c_star must be positive");
  if (f.full_cover) return 0.0;
  double arc_min, gap_min;
  half_widths(f, arc_min, gap_min);
  return gap_min / c_star;
}

Field chi_field(const FrontState& f, double alpha_minus, double alpha_plus,
                int M) {
  Field out = Field::constant(f.dim, M, alpha_minus);
  if (f.dim == 1) {
    for (int j = 0; j < M; ++j)
      if (signed_distance_1d(f, double(j) / M) < 0) out.v[j] = alpha_plus;
    return out;
  }
  for (int r = 0; r < M; ++r)
    for (int c = 0; c < M; ++c)
      if (bilinear_dbar(f, double(r) / M, double(c) / M) < 0)
        out.v[long(r) * M + c] = alpha_plus;
  return out;
}

double cutoff_h(double s, double d0) {
  const double a = std::abs(s), sign = s < 0 ? -1.0 : 1.0;
  if (a <= d0) return s;
  if (a >= 3.0 * d0) return sign * 2.0 * d0;
  const double w = 2.0 * d0, tau = (a - d0) / w;
  const double g = tau - tau * tau * tau + 0.5 * tau * tau * tau * tau;
  return sign * (d0 + w * g);
}

double cutoff_h_prime(double s, double d0) {
  const double a = std::abs(s);
  if (a <= d0) return 1.0;
  if (a >= 3.0 * d0) return 0.0;
  const double tau = (a - d0) / (2.0 * d0);
  return 1.0 - 3.0 * tau * tau + 2.0 * tau * tau * tau;
}

double cutoff_h_second(double s, double d0) {
  const double a = std::abs(s), sign = s < 0 ? -1.0 : 1.0;
  if (a <= d0 || a >= 3.0 * d0) return 0.0;
  const double w = 2.0 * d0, tau = (a - d0) / w;
  return sign * 6.0 * (tau * tau - tau) / w;
}

Field cutoff_distance(const FrontState& f, double d0, int M) {
  if (!(d0 > 0)) throw DomainError("cutoff_distance: d0 must be positive");
  if (!band_check(f, d0))
    throw DomainError("cutoff_distance: eikonal band check failed, reduce d0");
  Field out = Field::constant(f.dim, M, 0.0);
  if (f.dim == 1) {
    for (int j = 0; j < M; ++j)
      out.v[j] = cutoff_h(signed_distance_1d(f, double(j) / M), d0);
    return out;
  }
  for (int r = 0; r < M; ++r)
    for (int c = 0; c < M; ++c)
      out.v[long(r) * M + c] =
          cutoff_h(bilinear_dbar(f, double(r) / M, double(c) / M), d0);
  return out;
}

bool band_check(const FrontState& f, double d0, double tol) {
  if (!(d0 > 0)) return false;
  if (f.full_cover) return false;
  if (f.dim == 1) {
    double arc_min, gap_min;
    half_widths(f, arc_min, gap_min);
    return std::min(arc_min, gap_min) >= 3.0 * d0 - kMergeTol;
  }
  const int M = f.M;
  const double band = 3.0 * d0;
  for (int r = 0; r < M; ++r)
    for (int c = 0; c < M; ++c) {
      const long i = long(r) * M + c;
      if (std::abs(f.dbar[i]) > band) continue;
      const double gx = 0.5 * M *
                        (f.dbar[long(r) * M + (c + 1) % M] -
                         f.dbar[long(r) * M + (c + M - 1) % M]);
      const double gy = 0.5 * M *
                        (f.dbar[long((r + 1) % M) * M + c] -
                         f.dbar[long((r + M - 1) % M) * M + c]);
      const double g = std::sqrt(gx * gx + gy * gy);
      if (std::abs(g - 1.0) > tol) return false;
    }
  return true;
}

double select_d0(const FrontState& front0, double c_star, double T) {
  if (front0.dim == 1) {
    const FrontState ft = huygens_evolve(front0, c_star, T);
    if (ft.full_cover)
      throw DomainError("select_d0: topology change before T");
    double a0, g0, aT, gT;
    half_widths(front0, a0, g0);
    half_widths(ft, aT, gT);
    const double band_min = std::min(std::min(a0, g0), std::min(aT, gT));
    if (!(band_min > 0)) throw DomainError("select_d0: degenerate front");
    return band_min / 6.0;  // largest passing value band_min/3, halved
  }
  const FrontState ft = huygens_evolve(front0, c_star, T);
  const double h = 1.0 / front0.M;
  for (double d0 = 1.0 / 6.0; d0 > 2 * h; d0 *= 0.5)
    if (band_check(front0, d0) && band_check(ft, d0)) return 0.5 * d0;
  throw DomainError("select_d0: no admissible 2D band width found");
}

double cutoff_curvature_bound(const FrontState& f, double d0) {
  if (!(d0 > 0)) throw DomainError("cutoff_curvature_bound: d0 must be positive");
  if (f.dim == 1) {
    if (!band_check(f, d0))
      throw DomainError("cutoff_curvature_bound: band check failed");
    // dbar is piecewise linear with kinks outside the band where h' = 0, so
    // Delta h(dbar) = h''(dbar) almost everywhere; max |g''| = 3/2 on the blend
    return 0.75 / d0;
  }
  const int M = f.M;
  double worst = 0.75 / d0;
  for (int r = 0; r < M; ++r)
    for (int c = 0; c < M; ++c) {
      const long i = long(r) * M + c;
      if (std::abs(f.dbar[i]) > 3.0 * d0) continue;
      const double lap =
          double(M) * M *
          (f.dbar[long(r) * M + (c + 1) % M] + f.dbar[long(r) * M + (c + M - 1) % M] +
           f.dbar[long((r + 1) % M) * M + c] + f.dbar[long((r + M - 1) % M) * M + c] -
           4.0 * f.dbar[i]);
      worst = std::max(worst, std::abs(cutoff_h_second(f.dbar[i], d0)) +
                                  cutoff_h_prime(f.dbar[i], d0) * std::abs(lap));
    }
  return worst;
}

SubSuperPair build_sub_super(const SubSuperParams& prm, const WaveProfile& wave,
                             const FrontState& front0, double t, int M) {
  if (!(prm.sigma > 0 && prm.L > 0 && prm.beta > 0 && prm.d0 > 0 &&
        prm.epsilon > 0 && prm.T > 0 && prm.C_delta_d >= 0))
    throw DomainError("build_sub_super: params must be positive");
  if (t < 0 || t > prm.T * (1.0 + 1e-12))
    throw DomainError("build_sub_super: t outside [0, T]");

  const FrontState ft =
      t > 0 ? huygens_evolve(front0, wave.c_star, t) : front0;
  if (!band_check(ft, prm.d0))
    throw DomainError("build_sub_super: band check failed at requested time");

  const double eb = std::exp(-prm.beta * t / (2.0 * prm.epsilon));
  SubSuperPair out;
  out.t = t;
  out.q = 2.0 * prm.sigma * prm.beta * eb + 3.0 * prm.epsilon / prm.beta;
  out.p = prm.L + (3.0 / (prm.sigma * prm.beta) + prm.C_delta_d) * t +
          4.0 * (1.0 - eb);
  out.lower = Field::constant(front0.dim, M, 0.0);
  out.upper = Field::constant(front0.dim, M, 0.0);

  const long n = long(out.lower.v.size());
  for (long i = 0; i < n; ++i) {
    double db;
    if (front0.dim == 1) {
      db = signed_distance_1d(ft, double(i) / M);
    } else {
      const long r = i / M, c = i % M;
      db = bilinear_dbar(ft, double(r) / M, double(c) / M);
    }
    const double dd = cutoff_h(db, prm.d0);
    out.upper.v[i] = wave.eval(dd / prm.epsilon - out.p) + out.q;
    out.lower.v[i] = wave.eval(dd / prm.epsilon + out.p) - out.q;
  }
  return out;
}

Field residual_field(const Field& um, const Field& uc, const Field& up,
                     double dt, double eps, const Poly& f) {
  if (um.v.size() != uc.v.size() || up.v.size() != uc.v.size())
    throw DomainError("residual_field: frame sizes differ");
  if (!(dt > 0)) throw DomainError("residual_field: dt must be positive");
  Field r = uc;
  for (long i = 0; i < long(uc.v.size()); ++i) {
    const double dudt = (up.v[i] - um.v[i]) / (2.0 * dt);
    r.v[i] = dudt - eps * discrete_laplacian(uc, i) - f(uc.v[i]) / eps;
  }
  return r;
}

SpeedFit front_speed(const Trajectory& traj, double alpha_star,
                     Crossing orient) {
  if (traj.frames.size() < 3)
    throw FrontExtractionError("front_speed: need at least 3 frames");
  SpeedFit fit;
  fit.positions.reserve(traj.frames.size());
  for (std::size_t k = 0; k < traj.frames.size(); ++k) {
    const Field& u = traj.frames[k];
    if (u.dim != 1)
      throw FrontExtractionError("front_speed: only 1D trajectories supported");
    const int M = u.M;
    std::vector<double> found;
    for (int i = 0; i < M; ++i) {
      const double a = u.v[i], b = u.v[(i + 1) % M];
      const bool hit = orient == Crossing::Falling
                           ? (a >= alpha_star && b < alpha_star)
                           : (a <= alpha_star && b > alpha_star);
      if (hit) found.push_back((i + (alpha_star - a) / (b - a)) / M);
    }
    if (found.size() != 1) {
      std::ostringstream os;
      os << "front_speed: frame " << k << " has " << found.size()
         << " crossings of the requested orientation (need exactly 1)";
      throw FrontExtractionError(os.str());
    }
    double pos = found[0];
    if (!fit.positions.empty())
      pos += std::round(fit.positions.back() - pos);
    fit.positions.push_back(pos);
  }

  const std::size_t n = fit.positions.size();
  double st = 0, sp = 0, stt = 0, stp = 0;
  for (std::size_t k = 0; k < n; ++k) {
    st += traj.times[k];
    sp += fit.positions[k];
    stt += traj.times[k] * traj.times[k];
    stp += traj.times[k] * fit.positions[k];
  }
  const double den = n * stt - st * st;
  if (den <= 0) throw FrontExtractionError("front_speed: degenerate time grid");
  fit.speed = (n * stp - st * sp) / den;
  const double icpt = (sp - fit.speed * st) / n;
  double ss = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double r = fit.positions[k] - (icpt + fit.speed * traj.times[k]);
    ss += r * r;
  }
  const double se = std::sqrt(std::max(ss, 0.0) / (n - 2) / (den / n));
  boost::math::students_t dist(double(n - 2));
  fit.ci_half_width = boost::math::quantile(dist, 0.975) * se;
  return fit;
}

}  // namespace gklab
