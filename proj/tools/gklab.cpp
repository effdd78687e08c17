// Command-line front end: model design, wave and PDE solves, stochastic
// simulation, certificates, and the hydrodynamic experiment. Subcommands that
// check certificates exit 0 only when every selected certificate passes.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gklab/experiment.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw gklab::DomainError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spill(const std::string& path, const std::string& text) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw gklab::DomainError("cannot write " + path);
  out << text;
}

// JSON config plus dotted-path overrides; each --set leaf is parsed as JSON
// first and falls back to a plain string.
gklab::ExperimentConfig load_config(const std::string& config_path,
                                    const std::vector<std::string>& sets) {
  json j = json::object();
  if (!config_path.empty()) j = json::parse(slurp(config_path));
  for (const std::string& s : sets) {
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos || eq == 0)
      throw gklab::DomainError("--set expects dotted.path=value, got: " + s);
    std::vector<std::string> parts;
    {
      std::stringstream ps(s.substr(0, eq));
      std::string key;
      while (std::getline(ps, key, '.')) {
        if (key.empty())
          throw gklab::DomainError("--set path has an empty segment: " + s);
        parts.push_back(key);
      }
    }
    json* node = &j;
    for (std::size_t i = 0; i + 1 < parts.size(); ++i)
      node = &((*node)[parts[i]]);
    const std::string val = s.substr(eq + 1);
    json leaf;
    try {
      leaf = json::parse(val);
    } catch (...) {
      leaf = val;
    }
    (*node)[parts.back()] = leaf;
  }
  return gklab::config_from_json(j.dump());
}

void write_manifest(const gklab::ExperimentConfig& cfg,
                    const std::string& command,
                    const std::vector<std::string>& files) {
  nlohmann::ordered_json m;
  m["command"] = command;
  m["seed"] = cfg.seed;
  m["workers"] = gklab::worker_count();
  m["files"] = files;
  spill(cfg.out_dir + "/manifest.json", m.dump(2) + "\n");
}

int cmd_design_rates(double scale, const std::vector<double>& roots,
                     const std::string& out) {
  const gklab::Poly target =
      gklab::cubic_model(scale, roots[0], roots[1], roots[2]).f;
  const gklab::RateFunction c =
      gklab::design_rates(target, gklab::LocalWindow::cube(1, 1));
  const std::string text = gklab::rate_to_json(c) + "\n";
  if (out.empty())
    std::cout << text;
  else
    spill(out, text);
  return 0;
}

int cmd_wave(const gklab::ExperimentConfig& cfg) {
  const gklab::ReactionPolynomial f = gklab::model_polynomial(cfg);
  const auto [Z, h] = gklab::default_wave_grid(f);
  const gklab::WaveProfile w = gklab::solve_wave(f, Z, h, 1e-12);
  const gklab::TailReport tails = gklab::verify_tails(w);
  spill(cfg.out_dir + "/wave.csv", gklab::wave_profile_csv(w));
  spill(cfg.out_dir + "/wave_meta.json", gklab::wave_meta_json(w, tails));
  spill(cfg.out_dir + "/config.json", gklab::config_to_json(cfg) + "\n");
  write_manifest(cfg, "wave",
                 {"wave.csv", "wave_meta.json", "config.json"});
  std::cout << "c_star " << w.c_star << "\n";
  return 0;
}

int cmd_pde(const gklab::ExperimentConfig& cfg, const std::string& solver,
            bool ladder) {
  if (ladder) {
    const gklab::PdeLadderResult res = gklab::run_pde_ladder(cfg);
    spill(cfg.out_dir + "/pde_ladder.json", res.report_json + "\n");
    spill(cfg.out_dir + "/config.json", gklab::config_to_json(cfg) + "\n");
    write_manifest(cfg, "pde-ladder", {"pde_ladder.json", "config.json"});
    for (const auto& r : res.rungs)
      std::cout << "rung N " << r.N << " K " << r.K << " speed " << r.speed
                << " err " << r.speed_err << " off_fraction "
                << r.off_fraction << "\n";
    std::cout << "balanced_speed " << res.balanced_speed << "\n"
              << (res.pass ? "PASS" : "FAIL") << "\n";
    return res.pass ? 0 : 1;
  }
  const gklab::ReactionPolynomial f = gklab::model_polynomial(cfg);
  const gklab::Field u0 = gklab::profile_field(cfg.u0, cfg.dim, cfg.N);
  gklab::Trajectory traj;
  if (solver == "pnk") {
    traj = gklab::solve_pnk(u0, f, cfg.K, cfg.out_times);
  } else if (solver == "pe") {
    traj = gklab::solve_pe(u0, f, cfg.eps, cfg.out_times);
  } else {
    throw gklab::DomainError("pde: solver must be pnk or pe");
  }
  spill(cfg.out_dir + "/pde.csv", gklab::trajectory_csv(traj));
  spill(cfg.out_dir + "/config.json", gklab::config_to_json(cfg) + "\n");
  write_manifest(cfg, "pde", {"pde.csv", "config.json"});
  std::cout << "frames " << traj.frames.size() << "\n";
  return 0;
}

int cmd_kmc(const gklab::ExperimentConfig& cfg) {
  if (cfg.dim != 1)
    throw gklab::DomainError("kmc: the command-line runner is 1D");
  if (cfg.blocks < 1 || cfg.N % cfg.blocks != 0)
    throw gklab::DomainError("kmc: blocks must divide N");
  const gklab::RateFunction rates = gklab::model_rates(cfg);
  const auto geom = std::make_shared<gklab::TorusGeometry>(1, cfg.N);
  const gklab::Field u0 = gklab::profile_field(cfg.u0, 1, cfg.N);
  const gklab::Configuration eta0 =
      gklab::sample_product_measure(geom, u0.v, cfg.seed, 0);
  const int b = cfg.N / cfg.blocks;
  std::ostringstream csv;
  csv << "t,block,density\n";
  gklab::simulate(
      eta0, rates, cfg.K, cfg.out_times,
      [&](double t, const gklab::Configuration& c) {
        const gklab::EmpiricalField e = gklab::empirical_measure(c, b);
        for (std::size_t jb = 0; jb < e.density.size(); ++jb)
          csv << t << ',' << jb << ',' << e.density[jb] << "\n";
      },
      cfg.seed, 1);
  spill(cfg.out_dir + "/kmc.csv", csv.str());
  spill(cfg.out_dir + "/config.json", gklab::config_to_json(cfg) + "\n");
  write_manifest(cfg, "kmc", {"kmc.csv", "config.json"});
  std::cout << "observations " << cfg.out_times.size() << "\n";
  return 0;
}

int cmd_certify(const gklab::ExperimentConfig& cfg) {
  const gklab::CertificateResult res = gklab::run_certificates(cfg);
  spill(cfg.out_dir + "/certificate.json", res.certificate_json + "\n");
  spill(cfg.out_dir + "/config.json", gklab::config_to_json(cfg) + "\n");
  write_manifest(cfg, "certify", {"certificate.json", "config.json"});
  const json cert = json::parse(res.certificate_json);
  for (const char* sec :
       {"wave", "initial_sandwich", "residual", "sandwich", "consistency"})
    std::cout << sec << " "
              << (cert.at(sec).at("pass").get<bool>() ? "PASS" : "FAIL")
              << "\n";
  std::cout << (res.pass ? "PASS" : "FAIL") << "\n";
  return res.pass ? 0 : 1;
}

int cmd_hydro(const gklab::ExperimentConfig& cfg) {
  const gklab::HydroResult res = gklab::run_hydrodynamic(cfg);
  spill(cfg.out_dir + "/hydro.json", res.report_json + "\n");
  spill(cfg.out_dir + "/config.json", gklab::config_to_json(cfg) + "\n");
  {
    std::ostringstream csv;
    csv << "N,K,t,edge_left,edge_right\n";
    for (const auto& lvl : res.levels)
      for (std::size_t k = 0; k < lvl.times.size(); ++k)
        csv << lvl.N << ',' << lvl.K << ',' << lvl.times[k] << ','
            << lvl.edge_left[k] << ',' << lvl.edge_right[k] << "\n";
    spill(cfg.out_dir + "/edges.csv", csv.str());
  }
  {
    std::ostringstream csv;
    csv << "N,K,phi,replica,pairing,limit\n";
    for (const auto& lvl : res.levels)
      for (const auto& d : lvl.phis)
        for (std::size_t r = 0; r < d.replicas.size(); ++r)
          csv << lvl.N << ',' << lvl.K << ',' << d.name << ',' << r << ','
              << d.replicas[r] << ',' << d.limit << "\n";
    spill(cfg.out_dir + "/deviations.csv", csv.str());
  }
  write_manifest(cfg, "hydro",
                 {"hydro.json", "config.json", "edges.csv",
                  "deviations.csv"});
  for (const auto& lvl : res.levels)
    std::cout << "level N " << lvl.N << " K " << lvl.K << " speed "
              << lvl.speed << " +- " << lvl.speed_ci << " sup_deviation "
              << lvl.sup_deviation << "\n";
  std::cout << "c_star " << res.c_star << "\n"
            << (res.pass ? "PASS" : "FAIL") << "\n";
  return res.pass ? 0 : 1;
}

int cmd_oracle(const gklab::ExperimentConfig& cfg, const std::string& eta_bits,
               int replicas) {
  const int n = static_cast<int>(eta_bits.size());
  if (n < 2) throw gklab::DomainError("oracle: eta needs at least two sites");
  const auto geom = std::make_shared<gklab::TorusGeometry>(1, n);
  std::vector<std::uint8_t> occ(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const char ch = eta_bits[static_cast<std::size_t>(i)];
    if (ch != '0' && ch != '1')
      throw gklab::DomainError("oracle: eta must be a 0/1 string");
    occ[static_cast<std::size_t>(i)] = ch == '1' ? 1 : 0;
  }
  const gklab::Configuration eta0(geom, occ);
  const gklab::RateFunction rates = gklab::model_rates(cfg);
  const gklab::OracleReport rep =
      gklab::run_oracle(eta0, rates, cfg.K, cfg.out_times, replicas, cfg.seed);
  spill(cfg.out_dir + "/oracle.json", rep.report_json + "\n");
  write_manifest(cfg, "oracle", {"oracle.json"});
  for (const auto& row : rep.rows)
    std::cout << "t " << row.t << " chi2 " << row.chi2 << " dof " << row.dof
              << " threshold " << row.threshold << " "
              << (row.pass ? "PASS" : "FAIL") << "\n";
  std::cout << (rep.pass ? "PASS" : "FAIL") << "\n";
  return rep.pass ? 0 : 1;
}

// Minimal line chart; the first selected column is the abscissa.
int cmd_plot(const std::string& in, const std::string& out,
             const std::string& xcol, std::vector<std::string> ycols) {
  const std::string text = slurp(in);
  std::vector<std::vector<std::string>> rows;
  {
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
      if (line.empty()) continue;
      std::vector<std::string> cells;
      std::stringstream ls(line);
      std::string cell;
      while (std::getline(ls, cell, ',')) cells.push_back(cell);
      rows.push_back(cells);
    }
  }
  if (rows.size() < 3) throw gklab::DomainError("plot: too few rows");
  const std::vector<std::string>& header = rows[0];
  auto col_index = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw gklab::DomainError("plot: no column named " + name);
  };
  if (ycols.empty())
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] != xcol) ycols.push_back(header[i]);
  const std::size_t xi = col_index(xcol);
  std::vector<std::size_t> yis;
  for (const auto& yc : ycols) yis.push_back(col_index(yc));

  std::vector<double> xs;
  std::vector<std::vector<double>> ys(yis.size());
  for (std::size_t r = 1; r < rows.size(); ++r) {
    xs.push_back(std::stod(rows[r].at(xi)));
    for (std::size_t c = 0; c < yis.size(); ++c)
      ys[c].push_back(std::stod(rows[r].at(yis[c])));
  }
  double xmin = xs[0], xmax = xs[0], ymin = ys[0][0], ymax = ys[0][0];
  for (double v : xs) {
    xmin = std::min(xmin, v);
    xmax = std::max(xmax, v);
  }
  for (const auto& series : ys)
    for (double v : series) {
      ymin = std::min(ymin, v);
      ymax = std::max(ymax, v);
    }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;

  const double W = 720, H = 440, ml = 60, mr = 20, mt = 20, mb = 40;
  auto px = [&](double x) {
    return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr);
  };
  auto py = [&](double y) {
    return H - mb - (y - ymin) / (ymax - ymin) * (H - mt - mb);
  };
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b"};
  std::ostringstream svg;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W
      << "' height='" << H << "' viewBox='0 0 " << W << " " << H << "'>\n"
      << "<rect width='" << W << "' height='" << H << "' fill='white'/>\n"
      << "<line x1='" << ml << "' y1='" << H - mb << "' x2='" << W - mr
      << "' y2='" << H - mb << "' stroke='black'/>\n"
      << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='"
      << H - mb << "' stroke='black'/>\n";
  svg << "<text x='" << (ml + W - mr) / 2 << "' y='" << H - 8
      << "' text-anchor='middle' font-size='13'>" << xcol << "</text>\n";
  for (std::size_t c = 0; c < yis.size(); ++c) {
    svg << "<polyline fill='none' stroke='" << colors[c % 6]
        << "' stroke-width='1.5' points='";
    for (std::size_t i = 0; i < xs.size(); ++i)
      svg << px(xs[i]) << ',' << py(ys[c][i]) << ' ';
    svg << "'/>\n";
    svg << "<text x='" << W - mr - 8 << "' y='" << mt + 16 + 16 * double(c)
        << "' text-anchor='end' font-size='13' fill='" << colors[c % 6]
        << "'>" << ycols[c] << "</text>\n";
  }
  for (int k = 0; k <= 4; ++k) {
    const double xv = xmin + (xmax - xmin) * k / 4.0;
    const double yv = ymin + (ymax - ymin) * k / 4.0;
    svg << "<text x='" << px(xv) << "' y='" << H - mb + 16
        << "' text-anchor='middle' font-size='11'>" << xv << "</text>\n";
    svg << "<text x='" << ml - 6 << "' y='" << py(yv) + 4
        << "' text-anchor='end' font-size='11'>" << yv << "</text>\n";
  }
  svg << "</svg>\n";
  spill(out, svg.str());
  std::cout << "wrote " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Glauber-Kawasaki interface laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  int workers = 0;
  app.add_option("--config", config_path, "JSON configuration file");
  app.add_option("--set", sets,
                 "dotted.path=value override applied to the configuration");
  app.add_option("--workers", workers, "worker thread count");

  double dr_scale = 25.0;
  std::vector<double> dr_roots{0.25, 0.45, 0.75};
  std::string dr_out;
  CLI::App* design = app.add_subcommand(
      "design-rates", "design a flip-rate table for a cubic reaction");
  design->add_option("--scale", dr_scale, "cubic scale");
  design->add_option("--roots", dr_roots, "alpha-, alpha*, alpha+")
      ->expected(3);
  design->add_option("--out", dr_out, "output file (stdout when omitted)");

  CLI::App* wave =
      app.add_subcommand("wave", "solve the traveling-wave profile");

  std::string pde_solver = "pnk";
  bool pde_ladder = false;
  CLI::App* pde = app.add_subcommand("pde", "deterministic solvers");
  pde->add_option("--solver", pde_solver, "pnk or pe");
  pde->add_flag("--ladder", pde_ladder, "run the convergence ladder");

  CLI::App* kmc =
      app.add_subcommand("kmc", "one stochastic trajectory, block densities");

  CLI::App* certify =
      app.add_subcommand("certify", "run the certificate chain");

  CLI::App* hydro =
      app.add_subcommand("hydro", "stochastic hydrodynamic experiment");

  std::string or_eta = "1000";
  int or_replicas = 100000;
  CLI::App* oracle =
      app.add_subcommand("oracle", "chi^2 against the exact distribution");
  oracle->add_option("--eta", or_eta, "initial occupancy as a 0/1 string");
  oracle->add_option("--replicas", or_replicas, "Monte Carlo replicas");

  std::string pl_in, pl_out = "plot.svg", pl_x = "t";
  std::vector<std::string> pl_y;
  CLI::App* plot = app.add_subcommand("plot", "render a CSV as an SVG chart");
  plot->add_option("--in", pl_in, "input CSV")->required();
  plot->add_option("--out", pl_out, "output SVG");
  plot->add_option("--x", pl_x, "abscissa column");
  plot->add_option("--y", pl_y, "ordinate columns (default: all others)");

  for (CLI::App* s : {design, wave, pde, kmc, certify, hydro, oracle, plot})
    s->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    if (workers > 0) {
      const std::string w = std::to_string(workers);
      setenv("GKLAB_WORKERS", w.c_str(), 1);
    }
    if (design->parsed()) return cmd_design_rates(dr_scale, dr_roots, dr_out);
    if (plot->parsed()) return cmd_plot(pl_in, pl_out, pl_x, pl_y);
    const gklab::ExperimentConfig cfg = load_config(config_path, sets);
    if (wave->parsed()) return cmd_wave(cfg);
    if (pde->parsed()) return cmd_pde(cfg, pde_solver, pde_ladder);
    if (kmc->parsed()) return cmd_kmc(cfg);
    if (certify->parsed()) return cmd_certify(cfg);
    if (hydro->parsed()) return cmd_hydro(cfg);
    if (oracle->parsed()) return cmd_oracle(cfg, or_eta, or_replicas);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
