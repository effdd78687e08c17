#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <memory>
#include <string>
#include <vector>

#include "gklab/experiment.hpp"

namespace py = pybind11;

namespace {

gklab::Field field_from_array(
    const py::array_t<double, py::array::c_style | py::array::forcecast>&
        arr) {
  if (arr.ndim() == 1) {
    std::vector<double> v(arr.data(), arr.data() + arr.size());
    return gklab::Field(1, static_cast<int>(arr.shape(0)), std::move(v));
  }
  if (arr.ndim() == 2 && arr.shape(0) == arr.shape(1)) {
    std::vector<double> v(arr.data(), arr.data() + arr.size());
    return gklab::Field(2, static_cast<int>(arr.shape(0)), std::move(v));
  }
  throw gklab::DomainError("field: expected a 1D vector or square 2D array");
}

py::array_t<double> to_array(const std::vector<double>& v) {
  py::array_t<double> a(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

py::array_t<double> frames_to_array(const gklab::Trajectory& traj) {
  const py::ssize_t rows = static_cast<py::ssize_t>(traj.frames.size());
  const py::ssize_t cols =
      rows > 0 ? static_cast<py::ssize_t>(traj.frames[0].v.size()) : 0;
  py::array_t<double> a({rows, cols});
  double* out = a.mutable_data();
  for (py::ssize_t r = 0; r < rows; ++r)
    std::copy(traj.frames[static_cast<std::size_t>(r)].v.begin(),
              traj.frames[static_cast<std::size_t>(r)].v.end(),
              out + r * cols);
  return a;
}

gklab::Configuration config_from_bits(const std::string& bits) {
  const int n = static_cast<int>(bits.size());
  if (n < 2) throw gklab::DomainError("eta needs at least two sites");
  auto geom = std::make_shared<gklab::TorusGeometry>(1, n);
  std::vector<std::uint8_t> occ(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const char ch = bits[static_cast<std::size_t>(i)];
    if (ch != '0' && ch != '1')
      throw gklab::DomainError("eta must be a 0/1 string");
    occ[static_cast<std::size_t>(i)] = ch == '1' ? 1 : 0;
  }
  return gklab::Configuration(geom, occ);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() =
      "Glauber-Kawasaki interface laboratory: lattice dynamics, sharp "
      "interface limits, and their certificates";

  m.def("default_config",
        [] { return gklab::config_to_json(gklab::ExperimentConfig{}); },
        "default configuration as JSON");

  m.def(
      "validate_config",
      [](const std::string& config_json, bool hydro) {
        return gklab::validate_config(gklab::config_from_json(config_json),
                                      hydro)
            .to_json();
      },
      py::arg("config_json"), py::arg("hydro") = false,
      "invariant checks with margins, as JSON");

  m.def(
      "design_rates",
      [](double scale, double am, double as, double ap) {
        const gklab::Poly target =
            gklab::cubic_model(scale, am, as, ap).f;
        return gklab::rate_to_json(
            gklab::design_rates(target, gklab::LocalWindow::cube(1, 1)));
      },
      py::arg("scale"), py::arg("alpha_minus"), py::arg("alpha_star"),
      py::arg("alpha_plus"), "radius-1 rate table realizing the cubic");

  m.def(
      "reaction_of_rates",
      [](const std::string& table_json) {
        const gklab::Poly f =
            gklab::reaction_polynomial(gklab::rate_from_json(table_json));
        return to_array(f.c);
      },
      py::arg("table_json"),
      "reaction polynomial coefficients induced by a rate table");

  m.def("cubic_speed", &gklab::cubic_wave_speed, py::arg("scale"),
        py::arg("alpha_minus"), py::arg("alpha_star"), py::arg("alpha_plus"),
        "closed-form wave speed of the cubic model");

  m.def(
      "wave_profile",
      [](const std::string& config_json) {
        const gklab::ExperimentConfig cfg =
            gklab::config_from_json(config_json);
        const gklab::ReactionPolynomial f = gklab::model_polynomial(cfg);
        const auto [Z, h] = gklab::default_wave_grid(f);
        const gklab::WaveProfile w = gklab::solve_wave(f, Z, h, 1e-12);
        return py::make_tuple(to_array(w.z), to_array(w.U), to_array(w.Up),
                              w.c_star);
      },
      py::arg("config_json"), "(z, U, U', c_star) of the traveling wave");

  m.def(
      "solve_pnk",
      [](const py::array_t<double, py::array::c_style |
                                       py::array::forcecast>& u0,
         const std::string& config_json, const std::vector<double>& times) {
        const gklab::ExperimentConfig cfg =
            gklab::config_from_json(config_json);
        const gklab::Trajectory traj = gklab::solve_pnk(
            field_from_array(u0), gklab::model_polynomial(cfg), cfg.K, times);
        return frames_to_array(traj);
      },
      py::arg("u0"), py::arg("config_json"), py::arg("times"),
      "lattice reaction-diffusion frames at the requested times");

  m.def(
      "solve_pe",
      [](const py::array_t<double, py::array::c_style |
                                       py::array::forcecast>& u0,
         const std::string& config_json, const std::vector<double>& times) {
        const gklab::ExperimentConfig cfg =
            gklab::config_from_json(config_json);
        const gklab::Trajectory traj = gklab::solve_pe(
            field_from_array(u0), gklab::model_polynomial(cfg), cfg.eps,
            times);
        return frames_to_array(traj);
      },
      py::arg("u0"), py::arg("config_json"), py::arg("times"),
      "sharp-interface scaling frames at the requested times");

  m.def(
      "profile_field",
      [](const std::string& config_json, int M) {
        const gklab::ExperimentConfig cfg =
            gklab::config_from_json(config_json);
        return to_array(gklab::profile_field(cfg.u0, cfg.dim, M).v);
      },
      py::arg("config_json"), py::arg("M"),
      "initial density profile sampled on an M-grid");

  m.def(
      "block_densities",
      [](const std::string& config_json, std::uint64_t stream) {
        const gklab::ExperimentConfig cfg =
            gklab::config_from_json(config_json);
        if (cfg.dim != 1) throw gklab::DomainError("block_densities: 1D");
        if (cfg.blocks < 1 || cfg.N % cfg.blocks != 0)
          throw gklab::DomainError("block_densities: blocks must divide N");
        const gklab::RateFunction rates = gklab::model_rates(cfg);
        auto geom = std::make_shared<gklab::TorusGeometry>(1, cfg.N);
        const gklab::Field u0 = gklab::profile_field(cfg.u0, 1, cfg.N);
        const gklab::Configuration eta0 = gklab::sample_product_measure(
            geom, u0.v, cfg.seed, 2 * stream);
        const int b = cfg.N / cfg.blocks;
        std::vector<std::vector<double>> dens;
        gklab::simulate(
            eta0, rates, cfg.K, cfg.out_times,
            [&](double, const gklab::Configuration& c) {
              dens.push_back(gklab::empirical_measure(c, b).density);
            },
            cfg.seed, 2 * stream + 1);
        py::array_t<double> a(
            {static_cast<py::ssize_t>(dens.size()),
             static_cast<py::ssize_t>(cfg.blocks)});
        double* out = a.mutable_data();
        for (std::size_t r = 0; r < dens.size(); ++r)
          std::copy(dens[r].begin(), dens[r].end(),
                    out + r * static_cast<std::size_t>(cfg.blocks));
        return py::make_tuple(to_array(cfg.out_times), a);
      },
      py::arg("config_json"), py::arg("stream") = 0,
      "one stochastic replica reduced to block densities");

  m.def(
      "exact_distribution",
      [](const std::string& eta_bits, const std::string& table_json, double K,
         double t) {
        return to_array(gklab::exact_distribution(
            config_from_bits(eta_bits), gklab::rate_from_json(table_json), K,
            t));
      },
      py::arg("eta"), py::arg("table_json"), py::arg("K"), py::arg("t"),
      "exact law at time t, bit-packed LSB-first by site");

  m.def(
      "run_certificates",
      [](const std::string& config_json) {
        const gklab::CertificateResult r =
            gklab::run_certificates(gklab::config_from_json(config_json));
        return py::make_tuple(r.pass, r.certificate_json);
      },
      py::arg("config_json"), "(pass, certificate_json)");

  m.def(
      "run_pde_ladder",
      [](const std::string& config_json) {
        const gklab::PdeLadderResult r =
            gklab::run_pde_ladder(gklab::config_from_json(config_json));
        return py::make_tuple(r.pass, r.report_json);
      },
      py::arg("config_json"), "(pass, report_json)");

  m.def(
      "run_hydrodynamic",
      [](const std::string& config_json) {
        const gklab::HydroResult r =
            gklab::run_hydrodynamic(gklab::config_from_json(config_json));
        return py::make_tuple(r.pass, r.report_json);
      },
      py::arg("config_json"), "(pass, report_json)");

  m.def("worker_count", &gklab::worker_count);
}
