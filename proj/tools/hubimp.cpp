// hubimp: command-line front end for the impurity Hubbard chain solvers.
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <hubbard_impurity.hpp>

using namespace hubimp;

namespace {

// ---------- formatting and output

std::string num(double x) {
  if (std::isnan(x)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string join(const std::vector<std::string>& v, char sep = ',') {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += sep;
    s += v[i];
  }
  return s;
}

// Resolved options of a subcommand as one line.
std::string resolved_config(const CLI::App* sub) {
  std::istringstream in(sub->config_to_str(true, false));
  std::vector<std::string> kv;
  for (std::string line; std::getline(in, line);)
    if (!line.empty() && line[0] != '#' && line[0] != '[' && line.rfind("out=", 0) != 0 && line.rfind("out-dir=", 0) != 0 &&
        line.rfind("config-file=", 0) != 0) kv.push_back(line);
  return std::string(sub->get_name()) + ": " + join(kv, ';');
}

// CSV goes to --out when given (summary to stdout), otherwise to stdout (summary to stderr).
class Emitter {
 public:
  Emitter(const std::string& out, std::string config) : config_(std::move(config)) {
    if (!out.empty()) {
      file_.reset(std::fopen(out.c_str(), "w"));
      if (!file_) throw validation_error("cannot open output file " + out);
      csv_ = file_.get();
      summary_ = stdout;
    }
  }
  void header(const std::string& columns) {
    std::fprintf(csv_, "# %s\n%s\n", config_.c_str(), columns.c_str());
  }
  void block(const std::string& name, const std::string& columns) {
    if (!started_) std::fprintf(csv_, "# %s\n", config_.c_str());
    std::fprintf(csv_, "%s# block: %s\n%s\n", started_ ? "\n" : "", name.c_str(), columns.c_str());
    started_ = true;
  }
  void row(const std::vector<std::string>& cells) { std::fprintf(csv_, "%s\n", join(cells).c_str()); }
  void line(const std::string& s) { std::fprintf(csv_, "%s\n", s.c_str()); }
  template <class... A>
  void summary(const char* f, A... a) {
    std::fprintf(summary_, f, a...);
  }

 private:
  struct Closer {
    void operator()(FILE* f) const { std::fclose(f); }
  };
  std::unique_ptr<FILE, Closer> file_;
  FILE* csv_ = stdout;
  FILE* summary_ = stderr;
  std::string config_;
  bool started_ = false;
};

// ---------- ranges and sweeps

struct Range {
  double start = 0.0, stop = 0.0;
  int count = 0;
  std::vector<double> values() const { return linspace(start, stop, count); }
};

Range parse_range(const std::string& s, const char* what) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  for (std::string t; std::getline(ss, t, ':');) parts.push_back(t);
  Range r;
  try {
    if (parts.size() != 3) throw std::invalid_argument("");
    std::size_t used = 0;
    r.start = std::stod(parts[0], &used);
    if (used != parts[0].size()) throw std::invalid_argument("");
    r.stop = std::stod(parts[1], &used);
    if (used != parts[1].size()) throw std::invalid_argument("");
    r.count = std::stoi(parts[2], &used);
    if (used != parts[2].size()) throw std::invalid_argument("");
  } catch (const std::exception&) {
    throw validation_error(std::string(what) + ": expected start:stop:count, got '" + s + "'");
  }
  if (r.count < 1) throw validation_error(std::string(what) + ": range must contain at least one point");
  if (r.count > 1 && !(r.stop > r.start)) throw validation_error(std::string(what) + ": stop must exceed start");
  return r;
}

int thread_count() {
  const char* s = std::getenv("HUBIMP_THREADS");
  if (!s || !*s) return 1;
  char* end = nullptr;
  long n = std::strtol(s, &end, 10);
  if (*end || n < 1) throw validation_error("HUBIMP_THREADS must be a positive integer");
  return static_cast<int>(std::min<long>(n, 256));
}

// Evaluates f(i) for i < n on HUBIMP_THREADS workers; results keep their index order.
template <class T>
std::vector<T> parallel_map(std::size_t n, const std::function<T(std::size_t)>& f) {
  std::vector<T> out(n);
  std::vector<std::exception_ptr> err(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next++) < n;) {
      try {
        out[i] = f(i);
      } catch (...) {
        err[i] = std::current_exception();
      }
    }
  };
  int nt = std::min<int>(thread_count(), static_cast<int>(std::max<std::size_t>(n, 1)));
  std::vector<std::thread> pool;
  for (int t = 1; t < nt; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (auto& e : err)
    if (e) std::rethrow_exception(e);
  return out;
}

int region_number(Region r) { return static_cast<int>(r); }

// ---------- shared physical options

struct Physics {
  double U = 5.0, p = 2.0, phi = 0.3, n = 0.7;
  int nodes = default_nodes;
};

void add_physics(CLI::App* sub, Physics& ph, bool with_p, bool with_n) {
  sub->add_option("--U,--u", ph.U, "Hubbard interaction U")->capture_default_str();
  sub->add_option("--phi", ph.phi, "impurity parameter phi")->capture_default_str();
  if (with_p) sub->add_option("--p", ph.p, "impurity parameter p")->capture_default_str();
  if (with_n) {
    sub->add_option("--n", ph.n, "host electron density n")->capture_default_str();
    sub->add_option("--nodes", ph.nodes, "Gauss-Legendre nodes on [-Q, Q]")->capture_default_str()->check(CLI::Range(16, 8192));
  }
}

void check_density(double n) {
  if (!(n > 0.0 && n <= 1.0)) throw validation_error("density n must lie in (0, 1]");
}

// ---------- subcommands

int cmd_derive_params(CLI::App* sub, const std::string& out, const Physics& ph) {
  Emitter em(out, resolved_config(sub));
  DerivedCouplings c = derive_couplings(ph.U, ph.p, ph.phi);
  RegionReport r = classify_region(solve_xi(c), ph.U / 4.0);
  em.header("U,p,phi,V_re,V_im,gamma,eps1,eps2,delta,xi,u,xi1,xi2,region,kappa,t,Lambda,eta");
  em.row({num(ph.U), num(ph.p), num(ph.phi), num(c.V.real()), num(c.V.imag()), num(c.gamma), num(c.eps1), num(c.eps2),
          num(c.delta), num(r.xi), num(r.u), num(r.xi1), num(r.xi2), std::to_string(region_number(r.region)), num(r.kappa),
          num(r.t), num(r.Lambda), num(r.eta)});
  em.summary("xi = %.10g, Region %s (thresholds 1, %.6g, %.6g)\n", r.xi, to_string(r.region), r.xi1, r.xi2);
  return 0;
}

struct IntegrabilityArgs {
  int samples = 100, transfer_samples = 20, L = 2;
  unsigned seed = 2024;
  double tol = 1e-10;
};

int cmd_verify_integrability(CLI::App* sub, const std::string& out, const IntegrabilityArgs& a) {
  Emitter em(out, resolved_config(sub));
  std::mt19937 rng(a.seed);
  std::uniform_real_distribution<double> re(-0.7, 0.7), im(-0.2, 0.2), U(0.5, 8.0), p(0.5, 5.0);
  auto theta = [&] { return cplx(re(rng), im(rng)); };
  // keep samples away from the poles of R and K
  auto pole_free = [](cplx x, cplx y) {
    return std::abs(std::cos(x + y)) > 1e-3 && std::abs(std::cos(x - y)) > 1e-3 && std::abs(std::cos(x)) > 1e-3;
  };
  double ybe = 0.0, re1 = 0.0, re2 = 0.0, tm = 0.0;
  for (int i = 0; i < a.samples;) {
    cplx x = theta(), y = theta(), z = theta();
    if (!pole_free(x, y) || !pole_free(x, z) || !pole_free(y, z)) continue;
    ybe = std::max(ybe, check_ybe(x, y, z, U(rng)));
    ++i;
  }
  for (int i = 0; i < a.samples;) {
    cplx x = theta(), y = theta();
    if (!pole_free(x, y) || !pole_free(x, -y)) continue;
    re1 = std::max(re1, check_reflection(x, y, U(rng), p(rng)));
    re2 = std::max(re2, check_reflection_plus(x, y, U(rng)));
    ++i;
  }
  for (int i = 0; i < a.transfer_samples;) {
    cplx x = theta(), y = theta(), v = theta();
    if (!pole_free(x, y) || !pole_free(x, v) || !pole_free(y, v)) continue;
    tm = std::max(tm, check_transfer_commutativity(x, y, v, a.L, U(rng), p(rng)));
    ++i;
  }
  em.header("check,samples,max_residual,tol,pass");
  bool ok = true;
  auto emit = [&](const char* name, int n, double r) {
    bool pass = r <= a.tol;
    ok = ok && pass;
    em.row({name, std::to_string(n), num(r), num(a.tol), pass ? "1" : "0"});
    em.summary("%-22s %4d samples  max residual %.3e  %s\n", name, n, r, pass ? "ok" : "EXCEEDS TOL");
  };
  emit("yang_baxter", a.samples, ybe);
  emit("reflection_minus", a.samples, re1);
  emit("reflection_plus", a.samples, re2);
  emit("transfer_commutator", a.transfer_samples, tm);
  return ok ? 0 : 2;
}

struct EdArgs {
  int L = 4, nup = 2, ndown = 2, k = 10;
  double U = 2.0, p = 1.3, phi = 0.5, mu = 0.0, h = 0.0;
};

int cmd_ed(CLI::App* sub, const std::string& out, const EdArgs& a) {
  Emitter em(out, resolved_config(sub));
  ModelParams m;
  m.L = a.L;
  m.U = a.U;
  m.p = a.p;
  m.phi = a.phi;
  m.mu = a.mu;
  m.h = a.h;
  m.N = a.nup + a.ndown;
  m.M = a.ndown;
  if (a.k < 1) throw validation_error("k must be positive");
  SpectrumResult r = sector_spectrum(m, a.nup, a.ndown, a.k);
  em.header("index,energy");
  for (std::size_t i = 0; i < r.eigenvalues.size(); ++i) em.row({std::to_string(i), num(r.eigenvalues[i])});
  em.summary("L=%d sector (%d,%d): %zu lowest levels, ground energy %.12g\n", a.L, a.nup, a.ndown, r.eigenvalues.size(),
             r.eigenvalues.front());
  return 0;
}

struct BaeArgs {
  int L = 4, N = 4, M = 2;
  double U = 2.0, p = 1.3, phi = 0.5, mu = 0.0, h = 0.0, tol = 1e-10;
  std::string config = "auto";
};

nlohmann::json roots_json(const std::vector<cplx>& v) {
  nlohmann::json a = nlohmann::json::array();
  for (cplx z : v) a.push_back({z.real(), z.imag()});
  return a;
}

int cmd_bae(CLI::App* sub, const std::string& out, const BaeArgs& a) {
  Emitter em(out, resolved_config(sub));
  ModelParams m;
  m.L = a.L;
  m.U = a.U;
  m.p = a.p;
  m.phi = a.phi;
  m.mu = a.mu;
  m.h = a.h;
  m.N = a.N;
  m.M = a.M;
  validate_sector(m);
  BaeOptions opt;
  opt.tol = a.tol;
  RegionReport reg = region_of(m);
  std::vector<BetheState> states;
  if (a.config == "auto") {
    states.push_back(solve_ground_state(m, opt));
  } else if (a.config == "all") {
    for (RootConfig c : {RootConfig::AllReal, RootConfig::OneImagK, RootConfig::ImagKPlusSpinString, RootConfig::TwoImagK}) {
      if (!config_available(c, reg)) continue;
      try {
        states.push_back(solve_bae(m, c, nullptr, std::nullopt, opt));
      } catch (const convergence_error& e) {
        em.summary("%s: %s\n", to_string(c), e.what());
      }
    }
    if (states.empty()) throw convergence_error("no configuration converged");
  } else {
    RootConfig c = root_config_from_string(a.config);
    if (!config_available(c, reg))
      throw validation_error(std::string(to_string(c)) + " needs a larger xi than " + num(reg.xi));
    states.push_back(solve_bae(m, c, nullptr, std::nullopt, opt));
  }
  em.line("# " + resolved_config(sub));
  for (const BetheState& st : states) {
    StateCheck chk = check_state(st, a.tol);
    nlohmann::json j;
    j["config"] = to_string(st.config);
    j["L"] = a.L;
    j["N"] = a.N;
    j["M"] = a.M;
    j["xi"] = reg.xi;
    j["region"] = region_number(reg.region);
    j["energy"] = st.energy;
    j["residual"] = st.residual;
    j["valid"] = chk.ok;
    if (!chk.ok) j["invalid_reason"] = chk.reason;
    j["charge_roots"] = roots_json(st.charge_roots);
    j["spin_roots"] = roots_json(st.spin_roots);
    j["charge_quantum_numbers"] = st.quantum_numbers.charge;
    j["spin_quantum_numbers"] = st.quantum_numbers.spin;
    em.line(j.dump());
    em.summary("%s: energy %.12g, residual %.2e%s\n", to_string(st.config), st.energy, st.residual, chk.ok ? "" : " (invalid)");
  }
  return 0;
}

struct VerifyArgs {
  int L = 4;
  double U = 2.0, phi = 0.5, tol = 1e-8;
  std::string regions = "all";
};

// One p inside each region, away from the boundaries.
double representative_p(Region r, double U, double phi) {
  auto th = region_thresholds(U / 4.0);
  switch (r) {
    case Region::I: return 0.5 * (std::max(p_threshold(U, phi), 0.0) + 1.0);
    case Region::II: return 0.5 * (1.0 + th.xi1);
    // finite-L ground state of the upper part of Region III carries the string
    case Region::III: return th.xi1 + 0.85 * (th.xi2 - th.xi1);
    case Region::IV: return th.xi2 + 0.6;
  }
  return 0.0;
}

int cmd_verify(CLI::App* sub, const std::string& out, const VerifyArgs& a) {
  Emitter em(out, resolved_config(sub));
  std::vector<Region> regions;
  if (a.regions == "all") {
    regions = {Region::I, Region::II, Region::III, Region::IV};
  } else {
    std::stringstream ss(a.regions);
    for (std::string t; std::getline(ss, t, ',');) {
      if (t == "1" || t == "I") regions.push_back(Region::I);
      else if (t == "2" || t == "II") regions.push_back(Region::II);
      else if (t == "3" || t == "III") regions.push_back(Region::III);
      else if (t == "4" || t == "IV") regions.push_back(Region::IV);
      else throw validation_error("unknown region '" + t + "'");
    }
  }
  if (a.L < 2) throw validation_error("verify needs L >= 2");
  std::vector<std::pair<int, int>> sectors{{1, 1}, {a.L / 2, a.L / 2}};
  em.header("region,p,xi,n_up,n_down,config,e_bae,e_ed,diff,pass");
  bool ok = true;
  for (Region r : regions) {
    double p = representative_p(r, a.U, a.phi);
    ModelParams m;
    m.L = a.L;
    m.U = a.U;
    m.p = p;
    m.phi = a.phi;
    RegionReport reg = region_of(m);
    EdComparison cmp = verify_against_ed(m, sectors, std::numeric_limits<double>::infinity());
    for (const EdMatch& e : cmp.matches) {
      bool pass = e.diff <= a.tol;
      ok = ok && pass;
      em.row({std::to_string(region_number(reg.region)), num(p), num(reg.xi), std::to_string(e.n_up), std::to_string(e.n_down),
              to_string(e.config), num(e.e_bae), num(e.e_ed), num(e.diff), pass ? "1" : "0"});
    }
    em.summary("Region %-3s p=%.4f: max |E_bae - E_ed| = %.2e %s\n", to_string(reg.region), p, cmp.max_diff,
               cmp.max_diff <= a.tol ? "ok" : "MISMATCH");
  }
  return ok ? 0 : 2;
}

void emit_phase_grid(Emitter& em, const PhaseGrid& g) {
  for (std::size_t i = 0; i < g.p_axis.size(); ++i)
    for (std::size_t j = 0; j < g.U_axis.size(); ++j) {
      std::size_t k = g.index(i, j);
      bool f = g.feasible_mask[k];
      em.row({num(g.p_axis[i]), num(g.U_axis[j]), num(g.xi_values[k]), f ? std::to_string(region_number(g.region_labels[k])) : "",
              f ? "1" : "0"});
    }
}

void phase_summary(Emitter& em, const PhaseGrid& g) {
  std::array<int, 5> count{};
  for (std::size_t k = 0; k < g.xi_values.size(); ++k)
    if (g.feasible_mask[k]) ++count[region_number(g.region_labels[k])];
  em.summary("phi=%.3g: %zu cells, Region I %d, II %d, III %d, IV %d\n", g.phi, g.xi_values.size(), count[1], count[2], count[3],
             count[4]);
}

struct PhaseArgs {
  double phi = 0.2;
  std::string p = "0:10:200", U = "0:10:200";
};

int cmd_phase_diagram(CLI::App* sub, const std::string& out, const PhaseArgs& a) {
  auto ps = parse_range(a.p, "--p").values(), us = parse_range(a.U, "--u").values();
  Emitter em(out, resolved_config(sub));
  PhaseGrid g = scan_phase_diagram(a.phi, ps, us);
  em.header("p,u,xi,region,feasible");
  emit_phase_grid(em, g);
  phase_summary(em, g);
  return 0;
}

int cmd_densities(CLI::App* sub, const std::string& out, const Physics& ph, int spin_points, double spin_range) {
  check_density(ph.n);
  Emitter em(out, resolved_config(sub));
  DensitySolution d = solve_densities(ph.U, ph.p, ph.phi, ph.n, ph.nodes);
  ObservableDecomposition o = observables(d);
  const ChargeKernel& K = *d.host.kernel;
  em.block("charge", "k,weight,rho_inf,rho_b,rho_i,rho_i_driving,rho_i_smooth,eps");
  for (int j = 0; j < K.size(); ++j) {
    double k = K.node(j);
    const ChargeSolution& ci = d.impurity.charge;
    em.row({num(k), num(K.weight(j)), num(d.host.rho(j)), num(d.boundary.charge.rho()(j)), num(ci.rho()(j)),
            num(ci.driving().empty() ? 0.0 : ci.driving()(k)), num(ci.sigma()(j)), num(d.host.eps(j))});
  }
  em.block("spin", "lambda,rho_s_b,rho_s_i");
  for (double lam : linspace(-spin_range, spin_range, spin_points))
    em.row({num(lam), num(d.boundary.spin(lam)), num(d.impurity.spin(lam))});
  em.block("scalars", "name,value");
  auto kv = [&](const char* k, const std::string& v) { em.row({k, v}); };
  kv("xi", num(d.region.xi));
  kv("region", std::to_string(region_number(d.region.region)));
  kv("config", to_string(d.config));
  kv("Q", num(d.host.Q));
  kv("mu", num(d.host.mu));
  kv("n_inf", num(o.n_inf));
  kv("n_b", num(o.n_b));
  kv("n_i", num(o.n_i));
  kv("m_inf", num(o.m_inf));
  kv("m_b", num(o.m_b));
  kv("m_i", num(o.m_i));
  kv("H_xi_1", num(o.steps.H_xi_1));
  kv("H_xi_xi1", num(o.steps.H_xi_xi1));
  kv("H_xi_xi2", num(o.steps.H_xi_xi2));
  em.summary("Region %s, Q=%.10g, mu=%.10g, n_inf=%.10g, n_b=%.10g, n_i=%.10g\n", to_string(d.region.region), d.host.Q,
             d.host.mu, o.n_inf, o.n_b, o.n_i);
  return 0;
}

struct EnergyRow {
  std::vector<std::string> cells;
  int argmin = -1;
};

void emit_impurity_energy(Emitter& em, const Physics& ph, const std::vector<double>& ps) {
  check_density(ph.n);
  double u = ph.U / 4.0;
  HostSolution host = solve_host_h0(ph.n, u, ph.nodes);
  auto rows = parallel_map<EnergyRow>(ps.size(), [&](std::size_t i) {
    double p = ps[i];
    EnergyRow row;
    row.cells = {num(p), "", "", "", "", "", "", ""};
    if (!feasible_cell(ph.U, p, ph.phi)) return row;
    DerivedCouplings c = derive_couplings(ph.U, p, ph.phi);
    RegionReport r = classify_region(solve_xi(c), u);
    row.cells[1] = num(r.xi);
    row.cells[2] = std::to_string(region_number(r.region));
    try {
      ImpurityEnergyReport rep = impurity_energy(host, c, r);
      for (int k = 0; k < 4; ++k) row.cells[3 + k] = rep.available[k] ? num(rep.eps_imp[k]) : "";
      row.cells[7] = to_string(rep.argmin);
      row.argmin = static_cast<int>(rep.argmin);
    } catch (const pole_error&) {
    }
    return row;
  });
  em.header("p,xi,region,eps_none,eps_I,eps_II,eps_III,argmin");
  int poles = 0, infeasible = 0, last = -1;
  std::string switches;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    em.row(rows[i].cells);
    if (rows[i].cells[1].empty()) ++infeasible;
    else if (rows[i].argmin < 0) ++poles;
    else {
      if (last >= 0 && rows[i].argmin != last) switches += " " + num(ps[i]);
      last = rows[i].argmin;
    }
  }
  auto th = region_thresholds(u);
  em.summary("%zu points (%d infeasible, %d on the xi = 1 pole); argmin changes near p =%s; thresholds 1, %.6g, %.6g\n", ps.size(),
             infeasible, poles, switches.empty() ? " (none)" : switches.c_str(), th.xi1, th.xi2);
}

struct ChiRow {
  std::vector<std::string> cells;
};

void emit_susceptibility(Emitter& em, const Physics& ph, const std::vector<double>& ps, const std::string& n_column) {
  check_density(ph.n);
  double u = ph.U / 4.0;
  WeakFieldStencil st = host_stencil(ph.n, u, default_h_ratios(), WeakFieldOptions{ph.nodes});
  auto rows = parallel_map<ChiRow>(ps.size(), [&](std::size_t i) {
    double p = ps[i];
    ChiRow row;
    row.cells = {num(p), "", "", "", "", ""};
    if (!feasible_cell(ph.U, p, ph.phi)) return row;
    DerivedCouplings c = derive_couplings(ph.U, p, ph.phi);
    RegionReport r = classify_region(solve_xi(c), u);
    row.cells[1] = num(r.xi);
    row.cells[2] = std::to_string(region_number(r.region));
    try {
      SusceptibilityReport rep = susceptibility(st, r, c, WeakFieldOptions{ph.nodes});
      row.cells[3] = num(rep.chi_i_zero);
      row.cells[4] = num(rep.chi_inf_zero);
      row.cells[5] = num(rep.ratio);
    } catch (const pole_error&) {
    }
    if (!n_column.empty()) row.cells.insert(row.cells.begin(), n_column);
    return row;
  });
  std::size_t off = n_column.empty() ? 0 : 1;
  double best = -std::numeric_limits<double>::infinity(), p_best = std::numeric_limits<double>::quiet_NaN(), chi_inf = best;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    em.row(rows[i].cells);
    const std::string& v = rows[i].cells[off + 3];
    if (v.empty()) continue;
    chi_inf = std::stod(rows[i].cells[off + 4]);
    if (std::stod(v) > best) {
      best = std::stod(v);
      p_best = ps[i];
    }
  }
  em.summary("n=%.4g: largest chi_i on the grid %.6g at p=%.6g; chi_inf %.6g\n", ph.n, best, p_best, chi_inf);
}

struct RatioRow {
  double n, chi_max, p_max, chi_inf;
};

void emit_chi_ratio(Emitter& em, const Physics& ph, const std::vector<double>& ns) {
  for (double n : ns) check_density(n);
  double u = ph.U / 4.0;
  auto rows = parallel_map<RatioRow>(ns.size(), [&](std::size_t i) {
    WeakFieldStencil st = host_stencil(ns[i], u, default_h_ratios(), WeakFieldOptions{ph.nodes});
    ChiPeak pk = region2_chi_peak(st, ph.U, ph.phi);
    DerivedCouplings c = derive_couplings(ph.U, pk.p, ph.phi);
    double chi_inf = susceptibility(st, classify_region(solve_xi(c), u), c, WeakFieldOptions{ph.nodes}).chi_inf_zero;
    return RatioRow{ns[i], pk.chi, pk.p, chi_inf};
  });
  em.header("n,chi_i_max,p_at_max,chi_inf,ratio");
  int rises = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const RatioRow& r = rows[i];
    em.row({num(r.n), num(r.chi_max), num(r.p_max), num(r.chi_inf), num(r.chi_max / r.chi_inf)});
    if (i && r.chi_max / r.chi_inf >= rows[i - 1].chi_max / rows[i - 1].chi_inf) ++rises;
  }
  em.summary("%zu densities; ratio from %.6g to %.6g; %d non-decreasing steps\n", rows.size(),
             rows.front().chi_max / rows.front().chi_inf, rows.back().chi_max / rows.back().chi_inf, rises);
}

// ---------- reproduce

std::string figure_path(const std::string& dir, const std::string& name) {
  if (dir.empty()) return "";
  std::filesystem::create_directories(dir);
  return (std::filesystem::path(dir) / name).string();
}

int cmd_reproduce(CLI::App* sub, const std::string& which, const std::string& dir, int points, int nodes) {
  std::string cfg = resolved_config(sub);
  // report the figure's default resolution rather than the unset flag
  if (auto at = cfg.find("points=\"\""); at != std::string::npos) cfg.replace(at, 9, "points=" + std::to_string(points));
  if (which == "fig1") {
    Emitter em(figure_path(dir, "fig1_roots.csv"), cfg);
    ModelParams m;
    m.L = 4;
    m.N = 4;
    m.M = 2;
    m.U = 2.0;
    m.p = 1.3;
    m.phi = 0.5;
    BetheState st = solve_ground_state(m);
    double e_ed = sector_spectrum(m, 2, 2, 1).eigenvalues[0];
    em.header("sector,index,re,im");
    for (std::size_t i = 0; i < st.charge_roots.size(); ++i)
      em.row({"k", std::to_string(i + 1), num(st.charge_roots[i].real()), num(st.charge_roots[i].imag())});
    for (std::size_t i = 0; i < st.spin_roots.size(); ++i)
      em.row({"lambda", std::to_string(i + 1), num(st.spin_roots[i].real()), num(st.spin_roots[i].imag())});
    em.summary("fig1: %s ground state, E_bae=%.12g, E_ed=%.12g, Im k_N=%.10g vs ln xi=%.10g\n", to_string(st.config), st.energy,
               e_ed, st.charge_roots.back().imag(), std::log(region_of(m).xi));
    return 0;
  }
  if (which == "fig2") {
    for (double phi : {0.2, 0.4}) {
      std::string tag = phi == 0.2 ? "a" : "b";
      Emitter em(figure_path(dir, "fig2" + tag + "_phase_phi" + std::string(phi == 0.2 ? "0.2" : "0.4") + ".csv"),
                 cfg + ";phi=" + num(phi));
      PhaseGrid g = scan_phase_diagram(phi, linspace(0.0, 10.0, points), linspace(0.0, 10.0, points));
      em.header("p,u,xi,region,feasible");
      emit_phase_grid(em, g);
      phase_summary(em, g);
      if (dir.empty()) std::printf("\n");
    }
    return 0;
  }
  if (which == "fig3") {
    Physics ph;
    ph.U = 5.0;
    ph.phi = 0.3;
    ph.nodes = nodes;
    double p0 = p_threshold(ph.U, ph.phi);
    std::vector<double> ps;
    for (int i = 1; i <= points; ++i) ps.push_back(p0 + (10.0 - p0) * i / points);
    Emitter em(figure_path(dir, "fig3_chi_vs_p.csv"), cfg);
    em.header("n,p,xi,region,chi_i,chi_inf,ratio");
    for (double n : {0.1, 0.05, 0.02}) {
      ph.n = n;
      emit_susceptibility(em, ph, ps, num(n));
    }
    return 0;
  }
  if (which == "fig4") {
    Physics ph;
    ph.U = 5.0;
    ph.phi = 0.3;
    ph.nodes = nodes;
    Emitter em(figure_path(dir, "fig4_chi_ratio.csv"), cfg);
    emit_chi_ratio(em, ph, linspace(0.02, 0.98, points));
    return 0;
  }
  if (which == "fig5") {
    Physics ph;
    ph.U = 5.0;
    ph.phi = 0.3;
    ph.n = 0.7;
    ph.nodes = nodes;
    Emitter em(figure_path(dir, "fig5_impurity_energy.csv"), cfg);
    emit_impurity_energy(em, ph, linspace(0.0, 10.0, points));
    return 0;
  }
  throw validation_error("reproduce: unknown figure '" + which + "' (fig1..fig5)");
}

// ---------- flat config files

// Reads `key = value` lines (blank lines and # comments skipped) into flag tokens.
std::vector<std::string> config_tokens(const std::string& path, const CLI::App* sub) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot read config file " + path);
  std::vector<std::string> tok;
  int lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t\r"));
      s.erase(s.find_last_not_of(" \t\r") + 1);
      return s;
    };
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw validation_error(path + ":" + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (key == "config-file" || !sub->get_option_no_throw("--" + key))
      throw validation_error(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "' for " + sub->get_name());
    tok.push_back("--" + key);
    tok.push_back(value);
  }
  return tok;
}

// Splices the config file's flags in front of the command-line flags, so the latter win.
std::vector<std::string> expand_config(int argc, char** argv, const CLI::App& app) {
  std::vector<std::string> args(argv + 1, argv + argc);
  if (args.empty()) return args;
  const CLI::App* sub = nullptr;
  for (const CLI::App* s : app.get_subcommands([](const CLI::App*) { return true; }))
    if (s->get_name() == args[0]) sub = s;
  if (!sub) return args;
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config-file" && i + 1 < args.size()) path = args[i + 1];
    else if (args[i].rfind("--config-file=", 0) == 0) path = args[i].substr(14);
  }
  if (path.empty()) return args;
  auto tok = config_tokens(path, sub);
  args.insert(args.begin() + 1, tok.begin(), tok.end());
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Open Hubbard chain with an integrable boundary impurity: ED, Bethe ansatz and thermodynamic solvers"};
  app.set_help_flag("--help", "print this help and exit");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(0, 1);

  std::string out;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config-file", "flat key = value file; command-line flags take precedence");
    sub->add_option("--out", out, "write CSV/JSON here; the summary then goes to stdout");
  };

  Physics ph;
  ph.U = 2.0;
  ph.p = 1.3;
  ph.phi = 0.5;
  auto* derive = app.add_subcommand("derive-params", "derived couplings, xi and region for (U, p, phi)");
  add_common(derive);
  derive->add_option("--U,--u", ph.U, "Hubbard interaction U")->capture_default_str();
  derive->add_option("--p", ph.p, "impurity parameter p")->capture_default_str();
  derive->add_option("--phi", ph.phi, "impurity parameter phi")->capture_default_str();

  IntegrabilityArgs ia;
  auto* integ = app.add_subcommand("verify-integrability", "random-sample residuals of YBE, reflection equations and [t, t]");
  add_common(integ);
  integ->add_option("--samples", ia.samples, "samples for YBE and reflection checks")->capture_default_str()->check(CLI::PositiveNumber);
  integ->add_option("--transfer-samples", ia.transfer_samples, "samples for transfer-matrix commutation")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  integ->add_option("--L", ia.L, "chain length for the transfer matrix (2 or 3)")->capture_default_str()->check(CLI::Range(2, 3));
  integ->add_option("--seed", ia.seed, "RNG seed")->capture_default_str();
  integ->add_option("--tol", ia.tol, "residual threshold")->capture_default_str();

  EdArgs ea;
  auto* ed = app.add_subcommand("ed", "lowest levels of one (n_up, n_down) sector by exact diagonalization");
  add_common(ed);
  ed->add_option("--L", ea.L, "number of host sites")->capture_default_str();
  ed->add_option("--nup", ea.nup, "spin-up electrons")->capture_default_str();
  ed->add_option("--ndown", ea.ndown, "spin-down electrons")->capture_default_str();
  ed->add_option("--U,--u", ea.U, "Hubbard interaction U")->capture_default_str();
  ed->add_option("--p", ea.p, "impurity parameter p")->capture_default_str();
  ed->add_option("--phi", ea.phi, "impurity parameter phi")->capture_default_str();
  ed->add_option("--mu", ea.mu, "chemical potential")->capture_default_str();
  ed->add_option("--h", ea.h, "magnetic field")->capture_default_str();
  ed->add_option("--k", ea.k, "number of levels")->capture_default_str();

  BaeArgs ba;
  auto* bae = app.add_subcommand("bae", "solve the Bethe ansatz equations; JSON-lines output");
  add_common(bae);
  bae->add_option("--L", ba.L, "number of host sites")->capture_default_str();
  bae->add_option("--N", ba.N, "electrons")->capture_default_str();
  bae->add_option("--M", ba.M, "spin-down electrons")->capture_default_str();
  bae->add_option("--U,--u", ba.U, "Hubbard interaction U")->capture_default_str();
  bae->add_option("--p", ba.p, "impurity parameter p")->capture_default_str();
  bae->add_option("--phi", ba.phi, "impurity parameter phi")->capture_default_str();
  bae->add_option("--mu", ba.mu, "chemical potential")->capture_default_str();
  bae->add_option("--h", ba.h, "magnetic field")->capture_default_str();
  bae->add_option("--tol", ba.tol, "residual tolerance")->capture_default_str();
  bae->add_option("--config", ba.config, "auto (ground state), all, AllReal, OneImagK, ImagKPlusSpinString or TwoImagK")
      ->capture_default_str();

  VerifyArgs va;
  auto* verify = app.add_subcommand("verify", "ED vs Bethe ansatz ground energies, one point per region");
  add_common(verify);
  verify->add_option("--L", va.L, "number of host sites (<= 6)")->capture_default_str();
  verify->add_option("--U,--u", va.U, "Hubbard interaction U")->capture_default_str();
  verify->add_option("--phi", va.phi, "impurity parameter phi")->capture_default_str();
  verify->add_option("--regions", va.regions, "all, or a comma list of 1-4")->capture_default_str();
  verify->add_option("--tol", va.tol, "allowed energy difference")->capture_default_str();

  PhaseArgs pa;
  auto* phase = app.add_subcommand("phase-diagram", "region labels on a (p, U) grid");
  add_common(phase);
  phase->add_option("--phi", pa.phi, "impurity parameter phi")->capture_default_str();
  phase->add_option("--p", pa.p, "p axis start:stop:count")->capture_default_str();
  phase->add_option("--U,--u", pa.U, "U axis start:stop:count")->capture_default_str();

  Physics dp;
  int spin_points = 201;
  double spin_range = 10.0;
  auto* dens = app.add_subcommand("densities", "zero-field host, boundary and impurity densities");
  add_common(dens);
  add_physics(dens, dp, true, true);
  dens->add_option("--spin-points", spin_points, "lambda samples for the spin block")->capture_default_str()->check(CLI::PositiveNumber);
  dens->add_option("--spin-range", spin_range, "lambda samples cover [-range, range]")->capture_default_str();

  Physics ep;
  std::string e_sweep = "p=0:6:300", e_psweep;
  auto* energy = app.add_subcommand("impurity-energy", "impurity energy of each bound configuration along a p sweep");
  add_common(energy);
  add_physics(energy, ep, false, true);
  energy->add_option("--sweep", e_sweep, "p=start:stop:count")->capture_default_str();
  energy->add_option("--p-sweep", e_psweep, "start:stop:count (same as --sweep p=...)");

  Physics sp;
  sp.n = 0.05;
  std::string s_psweep = "0:6:200";
  auto* chi = app.add_subcommand("susceptibility", "zero-field chi_i and chi_inf along a p sweep");
  add_common(chi);
  add_physics(chi, sp, false, true);
  chi->add_option("--p-sweep", s_psweep, "start:stop:count")->capture_default_str();

  Physics rp;
  std::string r_nsweep = "0.02:0.98:40";
  auto* ratio = app.add_subcommand("chi-ratio", "Region II peak of chi_i over chi_inf along a density sweep");
  add_common(ratio);
  add_physics(ratio, rp, false, false);
  ratio->add_option("--nodes", rp.nodes, "Gauss-Legendre nodes on [-Q, Q]")->capture_default_str()->check(CLI::Range(16, 8192));
  ratio->add_option("--n-sweep", r_nsweep, "start:stop:count")->capture_default_str();

  std::string which, out_dir;
  int points = 0, rnodes = default_nodes;
  auto* repro = app.add_subcommand("reproduce", "data behind fig1..fig5");
  repro->add_option("--config-file", "flat key = value file; command-line flags take precedence");
  repro->add_option("figure", which, "fig1, fig2, fig3, fig4 or fig5")->required();
  repro->add_option("--out-dir", out_dir, "write one CSV per panel here instead of stdout");
  repro->add_option("--points", points, "sweep resolution (default depends on the figure)");
  repro->add_option("--nodes", rnodes, "Gauss-Legendre nodes on [-Q, Q]")->capture_default_str()->check(CLI::Range(16, 8192));

  if (argc < 2) {
    std::cerr << app.help();
    return 1;
  }
  try {
    std::vector<std::string> args;
    try {
      args = expand_config(argc, argv, app);
    } catch (const validation_error& e) {
      std::cerr << "validation error: " << e.what() << "\n";
      return 1;
    }
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*derive) return cmd_derive_params(derive, out, ph);
    if (*integ) return cmd_verify_integrability(integ, out, ia);
    if (*ed) return cmd_ed(ed, out, ea);
    if (*bae) return cmd_bae(bae, out, ba);
    if (*verify) return cmd_verify(verify, out, va);
    if (*phase) return cmd_phase_diagram(phase, out, pa);
    if (*dens) return cmd_densities(dens, out, dp, spin_points, spin_range);
    if (*energy) {
      std::string sweep = e_psweep.empty() ? e_sweep : "p=" + e_psweep;
      if (sweep.rfind("p=", 0) != 0) throw validation_error("--sweep: only p=start:stop:count is supported");
      auto ps = parse_range(sweep.substr(2), "--sweep").values();
      Emitter em(out, resolved_config(energy));
      emit_impurity_energy(em, ep, ps);
      return 0;
    }
    if (*chi) {
      auto ps = parse_range(s_psweep, "--p-sweep").values();
      Emitter em(out, resolved_config(chi));
      em.header("p,xi,region,chi_i,chi_inf,ratio");
      emit_susceptibility(em, sp, ps, "");
      return 0;
    }
    if (*ratio) {
      auto ns = parse_range(r_nsweep, "--n-sweep").values();
      Emitter em(out, resolved_config(ratio));
      emit_chi_ratio(em, rp, ns);
      return 0;
    }
    if (*repro) {
      if (points <= 0) points = which == "fig1" ? 1 : which == "fig2" ? 200 : which == "fig4" ? 40 : which == "fig3" ? 190 : 400;
      return cmd_reproduce(repro, which, out_dir, points, rnodes);
    }
    std::cerr << app.help();
    return 1;
  } catch (const validation_error& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const pole_error& e) {
    std::cerr << "pole: " << e.what() << "\n";
    return 1;
  } catch (const convergence_error& e) {
    std::cerr << "no convergence: " << e.what() << "\n";
    return 2;
  } catch (const anomaly_error& e) {
    std::cerr << "anomaly: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
