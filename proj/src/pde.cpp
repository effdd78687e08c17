#include "gklab/pde.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gklab/lattice.hpp"  // DomainError

namespace gklab {
namespace {

long ipow(int m, int d) {
  long r = 1;
  for (int i = 0; i < d; ++i) r *= m;
  return r;
}

// Padded working buffers: one ghost layer per side so the stencil loop is
// branch-free. 1D layout M+2, 2D layout (M+2)^2.
struct Stepper {
  int dim, M;
  long n;        // interior points
  int stride;    // padded row length
  double aM2;    // diffusion coefficient times M^2
  double r;      // reaction coefficient
  std::vector<double> c;  // reaction polynomial coefficients
  std::vector<double> y, k1, k2, k3, k4, tmp;

  Stepper(int dim_, int M_, double a, double r_, const Poly& f)
      : dim(dim_), M(M_), n(ipow(M_, dim_)), stride(M_ + 2),
        aM2(a * double(M_) * double(M_)), r(r_), c(f.c) {
    if (c.empty()) c.push_back(0.0);
    const long padded = dim == 1 ? long(stride) : long(stride) * stride;
    y.assign(padded, 0.0);
    k1.assign(padded, 0.0);
    k2.assign(padded, 0.0);
    k3.assign(padded, 0.0);
    k4.assign(padded, 0.0);
    tmp.assign(padded, 0.0);
  }

  long pad_index(long flat) const {
    if (dim == 1) return flat + 1;
    const long row = flat / M, col = flat % M;
    return (row + 1) * stride + (col + 1);
  }

  void load(const std::vector<double>& u) {
    for (long i = 0; i < n; ++i) y[pad_index(i)] = u[i];
  }

  void store(std::vector<double>& u) const {
    for (long i = 0; i < n; ++i) u[i] = y[pad_index(i)];
  }

  void ghosts(std::vector<double>& w) const {
    if (dim == 1) {
      w[0] = w[M];
      w[M + 1] = w[1];
      return;
    }
    for (int i = 1; i <= M; ++i) {
      w[long(i) * stride + 0] = w[long(i) * stride + M];
      w[long(i) * stride + M + 1] = w[long(i) * stride + 1];
    }
    for (int j = 0; j < stride; ++j) {
      w[j] = w[long(M) * stride + j];
      w[long(M + 1) * stride + j] = w[long(1) * stride + j];
    }
  }

  void rhs(std::vector<double>& w, std::vector<double>& out) {
    ghosts(w);
    const int deg = int(c.size()) - 1;
    if (dim == 1) {
      const double* u = w.data();
      double* o = out.data();
      if (deg == 3) {
        const double c0 = c[0], c1 = c[1], c2 = c[2], c3 = c[3];
        for (int i = 1; i <= M; ++i) {
          const double ui = u[i];
          o[i] = aM2 * (u[i - 1] + u[i + 1] - 2.0 * ui) +
                 r * (c0 + ui * (c1 + ui * (c2 + ui * c3)));
        }
      } else {
        for (int i = 1; i <= M; ++i) {
          const double ui = u[i];
          double fv = c[deg];
          for (int q = deg - 1; q >= 0; --q) fv = fv * ui + c[q];
          o[i] = aM2 * (u[i - 1] + u[i + 1] - 2.0 * ui) + r * fv;
        }
      }
      return;
    }
    const int deg2 = deg;
    for (int row = 1; row <= M; ++row) {
      const double* um = w.data() + long(row - 1) * stride;
      const double* uc = w.data() + long(row) * stride;
      const double* up = w.data() + long(row + 1) * stride;
      double* o = out.data() + long(row) * stride;
      for (int j = 1; j <= M; ++j) {
        const double ui = uc[j];
        double fv = c[deg2];
        for (int q = deg2 - 1; q >= 0; --q) fv = fv * ui + c[q];
        o[j] = aM2 * (uc[j - 1] + uc[j + 1] + um[j] + up[j] - 4.0 * ui) +
               r * fv;
      }
    }
  }

  // One RK4 step; returns min/max of the new interior state.
  void step(double h, double& lo, double& hi) {
    rhs(y, k1);
    axpy(y, 0.5 * h, k1, tmp);
    rhs(tmp, k2);
    axpy(y, 0.5 * h, k2, tmp);
    rhs(tmp, k3);
    axpy(y, h, k3, tmp);
    rhs(tmp, k4);
    lo = 1e300;
    hi = -1e300;
    const double w = h / 6.0;
    if (dim == 1) {
      for (int i = 1; i <= M; ++i) {
        const double val =
            y[i] + w * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        y[i] = val;
        lo = std::min(lo, val);
        hi = std::max(hi, val);
      }
    } else {
      for (int row = 1; row <= M; ++row) {
        for (int j = 1; j <= M; ++j) {
          const long i = long(row) * stride + j;
          const double val =
              y[i] + w * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
          y[i] = val;
          lo = std::min(lo, val);
          hi = std::max(hi, val);
        }
      }
    }
  }

  void axpy(const std::vector<double>& base, double a,
            const std::vector<double>& d, std::vector<double>& out) const {
    if (dim == 1) {
      for (int i = 1; i <= M; ++i) out[i] = base[i] + a * d[i];
      return;
    }
    for (int row = 1; row <= M; ++row)
      for (int j = 1; j <= M; ++j) {
        const long i = long(row) * stride + j;
        out[i] = base[i] + a * d[i];
      }
  }

  // first interior flat index with value outside [lo, hi]
  long find_violation(double lo, double hi) const {
    for (long i = 0; i < n; ++i) {
      const double val = y[pad_index(i)];
      if (val < lo || val > hi) return i;
    }
    return -1;
  }
};

void validate_field(const Field& u, const char* who) {
  if (u.dim != 1 && u.dim != 2)
    throw DomainError(std::string(who) + ": dim must be 1 or 2");
  if (u.M < 2) throw DomainError(std::string(who) + ": M must be >= 2");
  if (long(u.v.size()) != ipow(u.M, u.dim))
    throw DomainError(std::string(who) + ": value count does not match M^d");
}

Trajectory integrate(const Field& u0, const ReactionPolynomial& rp, double a,
                     double r, const std::vector<double>& out_times, double dt,
                     const char* who) {
  if (out_times.empty()) throw DomainError(std::string(who) + ": no output times");
  double prev = 0;
  for (double t : out_times) {
    if (t < prev) throw DomainError(std::string(who) + ": output times must be sorted and >= 0");
    prev = t;
  }

  const double lo_bound = std::min(u0.min(), rp.alpha_minus);
  const double hi_bound = std::max(u0.max(), rp.alpha_plus);
  const double tol = 1e-6;

  Stepper st(u0.dim, u0.M, a, r, rp.f);
  st.load(u0.v);

  Trajectory traj;
  traj.times.reserve(out_times.size());
  traj.frames.reserve(out_times.size());

  double t = 0;
  Field frame = u0;
  for (double t_out : out_times) {
    const double seg = t_out - t;
    if (seg > 0) {
      const long nsteps = std::max(1L, long(std::ceil(seg / dt - 1e-12)));
      const double h = seg / double(nsteps);
      for (long s = 0; s < nsteps; ++s) {
        double lo, hi;
        st.step(h, lo, hi);
        if (lo < lo_bound - tol || hi > hi_bound + tol) {
          const long bad = st.find_violation(lo_bound - tol, hi_bound + tol);
          const double val = bad >= 0 ? st.y[st.pad_index(bad)] : lo;
          throw SolverError(std::string(who) + ": solution left the invariant bounds",
                            t + (s + 1) * h, bad, val);
        }
      }
      t = t_out;
    }
    st.store(frame.v);
    traj.times.push_back(t_out);
    traj.frames.push_back(frame);
  }
  return traj;
}

}  // namespace

Field::Field(int dim_, int M_, std::vector<double> values)
    : dim(dim_), M(M_), v(std::move(values)) {
  validate_field(*this, "Field");
}

Field Field::constant(int dim_, int M_, double value) {
  Field f;
  f.dim = dim_;
  f.M = M_;
  f.v.assign(ipow(M_, dim_), value);
  validate_field(f, "Field");
  return f;
}

double Field::min() const { return *std::min_element(v.begin(), v.end()); }
double Field::max() const { return *std::max_element(v.begin(), v.end()); }

SolverError::SolverError(const std::string& msg, double t_, long index_,
                         double value_)
    : std::runtime_error(msg + " (t=" + std::to_string(t_) +
                         ", index=" + std::to_string(index_) +
                         ", value=" + std::to_string(value_) + ")"),
      t(t_), index(index_), value(value_) {}

double discrete_laplacian(const Field& u, long x) {
  validate_field(u, "discrete_laplacian");
  const long n = long(u.v.size());
  if (x < 0 || x >= n) throw DomainError("discrete_laplacian: site out of range");
  const double M2 = double(u.M) * double(u.M);
  if (u.dim == 1) {
    const long l = (x + u.M - 1) % u.M, rgt = (x + 1) % u.M;
    return M2 * (u.v[l] + u.v[rgt] - 2.0 * u.v[x]);
  }
  const long row = x / u.M, col = x % u.M;
  const long up = ((row + 1) % u.M) * u.M + col;
  const long dn = ((row + u.M - 1) % u.M) * u.M + col;
  const long lf = row * u.M + (col + u.M - 1) % u.M;
  const long rt = row * u.M + (col + 1) % u.M;
  return M2 * (u.v[up] + u.v[dn] + u.v[lf] + u.v[rt] - 4.0 * u.v[x]);
}

Trajectory solve_pnk(const Field& u0, const ReactionPolynomial& rp, double K,
                     const std::vector<double>& out_times, double dt_override) {
  validate_field(u0, "solve_pnk");
  if (!(K > 1)) throw DomainError("solve_pnk: K must exceed 1");
  for (double x : u0.v)
    if (!(x > 0 && x < 1))
      throw DomainError("solve_pnk: initial values must lie in (0,1)");
  const double sK = std::sqrt(K);
  const Poly df = rp.f.deriv();
  const double lo = std::min(u0.min(), rp.alpha_minus);
  const double hi = std::max(u0.max(), rp.alpha_plus);
  const double fp = poly_max_abs(df, lo, hi) + 1e-300;
  const double N2 = double(u0.M) * double(u0.M);
  double dt = std::min(sK / (8.0 * u0.dim * N2), 0.1 / (sK * fp));
  if (dt_override > 0) dt = dt_override;
  return integrate(u0, rp, 1.0 / sK, sK, out_times, dt, "solve_pnk");
}

Trajectory solve_pe(const Field& u0, const ReactionPolynomial& rp, double eps,
                    const std::vector<double>& out_times, double dt_override) {
  validate_field(u0, "solve_pe");
  if (!(eps > 0 && eps < 1)) throw DomainError("solve_pe: eps must lie in (0,1)");
  if (u0.M < 20.0 / eps) {
    std::ostringstream os;
    os << "solve_pe: interface under-resolved, need M >= " << std::ceil(20.0 / eps)
       << " for eps=" << eps;
    throw DomainError(os.str());
  }
  const Poly df = rp.f.deriv();
  const double lo = std::min(u0.min(), rp.alpha_minus);
  const double hi = std::max(u0.max(), rp.alpha_plus);
  const double fp = poly_max_abs(df, lo, hi) + 1e-300;
  const double M2 = double(u0.M) * double(u0.M);
  double dt = std::min(1.0 / (8.0 * u0.dim * eps * M2), 0.1 * eps / fp);
  if (dt_override > 0) dt = dt_override;
  return integrate(u0, rp, eps, 1.0 / eps, out_times, dt, "solve_pe");
}

long embed_cell(double coord, int N) {
  // box of x covers [x/N - 1/(2N), x/N + 1/(2N)), so x = floor(vN + 1/2) mod N
  double s = std::floor(coord * N + 0.5);
  long x = long(s) % N;
  if (x < 0) x += N;
  return x;
}

double embed_step(const Field& u, const std::vector<double>& point) {
  validate_field(u, "embed_step");
  if (int(point.size()) != u.dim)
    throw DomainError("embed_step: point dimension mismatch");
  long flat = 0;
  for (int k = 0; k < u.dim; ++k) flat = flat * u.M + embed_cell(point[k], u.M);
  return u.v[flat];
}

ComparisonReport check_comparison(const Trajectory& lower,
                                  const Trajectory& upper, double tol) {
  if (lower.times.size() != upper.times.size())
    throw DomainError("check_comparison: time grids differ");
  ComparisonReport rep;
  for (std::size_t k = 0; k < lower.times.size(); ++k) {
    if (lower.times[k] != upper.times[k])
      throw DomainError("check_comparison: time grids differ");
    const Field& a = lower.frames[k];
    const Field& b = upper.frames[k];
    if (a.v.size() != b.v.size())
      throw DomainError("check_comparison: field sizes differ");
    for (std::size_t i = 0; i < a.v.size(); ++i) {
      const double gap = a.v[i] - b.v[i];  // positive = violation
      if (gap > rep.worst_violation) rep.worst_violation = gap;
      if (gap > tol && rep.ok) {
        rep.ok = false;
        rep.first_time = lower.times[k];
        rep.first_index = long(i);
        rep.first_magnitude = gap;
      }
    }
  }
  return rep;
}

double generation_time_pe(const DerivedConstants& dc, double eps) {
  return std::abs(std::log(eps)) * eps / dc.gamma;
}

double generation_time_pnk(const DerivedConstants& dc, double K) {
  return std::log(K) / (2.0 * dc.gamma * std::sqrt(K));
}

GenerationReport generation_check(const Field& u_gen, const Field& u0,
                                  const ReactionPolynomial& rp,
                                  const DerivedConstants& dc, double eps,
                                  double delta, double M0) {
  if (!(delta > 0 && delta < dc.delta0))
    throw DomainError("generation_check: delta must lie in (0, delta0)");
  if (u_gen.v.size() != u0.v.size())
    throw DomainError("generation_check: field sizes differ");
  GenerationReport rep;
  rep.delta = delta;
  rep.eps = eps;
  rep.bounds_ok = true;
  rep.upper_ok = true;
  rep.lower_ok = true;
  double need = 0;  // smallest M0 excluding every conditional-clause violator
  const double am = rp.alpha_minus, as = rp.alpha_star, ap = rp.alpha_plus;
  for (std::size_t i = 0; i < u_gen.v.size(); ++i) {
    const double u = u_gen.v[i], w0 = u0.v[i];
    if (u < am - delta || u > ap + delta) rep.bounds_ok = false;
    if (w0 >= as + M0 * eps && u < ap - delta) rep.upper_ok = false;
    if (w0 <= as - M0 * eps && u > am + delta) rep.lower_ok = false;
    if (u < ap - delta && w0 > as)
      need = std::max(need, (w0 - as) / eps);
    if (u > am + delta && w0 < as)
      need = std::max(need, (as - w0) / eps);
  }
  rep.min_M0_pass = need;
  rep.pass = rep.bounds_ok && rep.upper_ok && rep.lower_ok;
  return rep;
}

GradientReport gradient_bounds(const Trajectory& traj, double K) {
  GradientReport rep;
  for (const Field& f : traj.frames) {
    const int M = f.M;
    const double N = M;
    if (f.dim == 1) {
      for (int i = 0; i < M; ++i) {
        const double d = std::abs(f.v[(i + 1) % M] - f.v[i]);
        rep.C_grad = std::max(rep.C_grad, N * d / K);
      }
    } else {
      for (int row = 0; row < M; ++row)
        for (int col = 0; col < M; ++col) {
          const long i = long(row) * M + col;
          const double dr =
              std::abs(f.v[long((row + 1) % M) * M + col] - f.v[i]);
          const double dc =
              std::abs(f.v[long(row) * M + (col + 1) % M] - f.v[i]);
          rep.C_grad = std::max(rep.C_grad, N * std::max(dr, dc) / K);
        }
    }
    for (long i = 0; i < long(f.v.size()); ++i)
      rep.C_lap = std::max(rep.C_lap, std::abs(discrete_laplacian(f, i)) / (K * K));
  }
  return rep;
}

std::string trajectory_csv(const Trajectory& traj) {
  std::ostringstream os;
  os.precision(17);
  os << "t,index,value\n";
  for (std::size_t k = 0; k < traj.times.size(); ++k)
    for (std::size_t i = 0; i < traj.frames[k].v.size(); ++i)
      os << traj.times[k] << ',' << i << ',' << traj.frames[k].v[i] << '\n';
  return os.str();
}

}  // namespace gklab
