#include "twophase/report.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "twophase/error.hpp"

namespace twophase {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

struct Model {
  SizeGrid grid;
  ModelParams params;
  Kernel kernel;
  DiscreteGenerator gen;
};

Model build_model(const Scenario& sc) {
  SizeGrid grid = sc.grid();
  ModelParams params = sample_params(sc.coefficients, grid);
  Kernel kernel = build_kernel(sc.kernel, grid);
  DiscreteGenerator gen = DiscreteGenerator::assemble(grid, params, kernel);
  return {std::move(grid), std::move(params), std::move(kernel), std::move(gen)};
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

json num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

json opt(const std::optional<double>& v) { return v ? num(*v) : json(nullptr); }

SpectralReport compute_spectrum(const Scenario& sc, const Model& m, const Verdict& verdict,
                                bool with_probes) {
  SpectralOptions opts;
  opts.tol = sc.spectral.tol;
  opts.shift0 = sc.spectral.shift0;
  opts.max_iterations = sc.spectral.max_iterations;

  SpectralReport sr;
  const Eigenpair eig = spectral_bound(m.gen, Part::full, opts);
  sr.s_A = eig.value;
  sr.s_A_converged = eig.converged;
  sr.s_A_method = eig.method;
  sr.eigfun = eig.vector;

  if (!m.grid.truncated()) {
    const SBSurrogate sb = sB_surrogate_finite(m.gen);
    sr.s_B_surrogate = sb.value;
    sr.s_B_source = sb.divergent() ? "discrete, refinement-divergent" : "discrete";
  } else if (const auto tl = tail_limits(m.params)) {
    sr.lambda_star = closed_form_sB(tl->l1, tl->c2, tl->l_mu);
    sr.s_B_surrogate = *sr.lambda_star;
    sr.s_B_source = "closed form";
  } else {
    sr.s_B_surrogate = std::numeric_limits<double>::quiet_NaN();
    sr.s_B_source = "unavailable";
  }
  if (m.grid.truncated() && verdict.constant_case) {
    double int_beta1 = 0.0;
    for (double b : m.kernel.beta1) int_beta1 += b * m.grid.h();
    const GapBound g = spectral_gap_lower_bound(m.params.c1.front(), m.params.c2.front(),
                                                m.params.mu.front(), int_beta1);
    sr.lambda_star = g.lambda_star;
    sr.eps_bar = g.eps_bar;
    sr.delta = g.delta;
  }
  sr.gap = sr.s_A - sr.s_B_surrogate;

  if (with_probes && !sc.spectral.probe_lambdas.empty()) {
    std::vector<double> smax = sc.spectral.smax_list;
    const double L = m.grid.length();
    if (smax.empty()) smax = {0.25 * L, 0.5 * L, L};
    for (double lambda : sc.spectral.probe_lambdas)
      sr.probes.push_back(sB_probe_infinite(sc.coefficients, lambda, smax, m.grid.h()));
  }
  return sr;
}

StateVector initial_state(const Scenario& sc, const SizeGrid& grid) {
  if (sc.run.u0) return StateVector::sample(grid, sc.run.u0->first, sc.run.u0->second);
  const double quarter = 0.25 * grid.length();
  StateVector u = StateVector::sample(grid, Coefficient::indicator(0.0, quarter),
                                      Coefficient::constant(0.0));
  return u.normalized();
}

struct Context {
  double dt = 0.0;
  double gamma0 = 1.0;
};

void build_crossrefs(RunReport& rep, const Context& ctx) {
  rep.crossrefs.clear();
  if (!rep.verdict) return;
  const Verdict& v = *rep.verdict;
  const SpectralReport* sr = rep.spectral ? &*rep.spectral : nullptr;
  const bool truncated = rep.domain == DomainKind::truncated_infinite;

  {
    CrossRef c{"irreducibility", "irreducibility criterion",
               v.irreducible ? "irreducible" : "reducible", std::nullopt, std::nullopt};
    c.measured = v.discrete_irreducible ? "discrete generator strongly connected"
                                        : "discrete generator not strongly connected";
    c.agrees = v.irreducible == v.discrete_irreducible;
    rep.crossrefs.push_back(std::move(c));
  }

  if (!truncated) {
    const double bound = -0.5 * ctx.gamma0 / rep.h;
    CrossRef c{"nonempty spectrum", "empty spectrum without a one-sided kernel",
               v.H1bis.holds ? "finite spectral bound" : "spectral bound diverges under refinement",
               std::nullopt, std::nullopt};
    if (sr) {
      const bool finite = sr->s_A > bound;
      c.measured = "s_A = " + fmt(sr->s_A) + (finite ? " above " : " below ") + fmt(bound);
      c.agrees = finite == v.H1bis.holds;
    }
    rep.crossrefs.push_back(std::move(c));
  }

  {
    const bool gap_predicted =
        v.predicted == Predicted::irreducible_gap_aeg || v.predicted == Predicted::gap_only;
    const char* pred = gap_predicted                          ? "spectral gap"
                       : v.predicted == Predicted::no_gap     ? "no spectral gap"
                       : v.predicted == Predicted::empty_spectrum ? "empty spectrum"
                                                              : "undetermined";
    CrossRef c{"spectral gap", v.basis, pred, std::nullopt, std::nullopt};
    if (sr && std::isfinite(sr->s_A) && !std::isnan(sr->s_B_surrogate)) {
      const bool gap = sr->gap > 1e-9;
      c.measured = "s_A - s_B = " + (std::isfinite(sr->gap) ? fmt(sr->gap) : std::string("inf"));
      if (gap_predicted || v.predicted == Predicted::no_gap) c.agrees = gap == gap_predicted;
    } else if (sr && v.predicted == Predicted::no_gap) {
      c.measured = "s_A = " + fmt(sr->s_A) + " (s_B unavailable on the truncation)";
      c.agrees = std::abs(sr->s_A) <= 0.02;
    }
    rep.crossrefs.push_back(std::move(c));
  }

  if (v.predicted == Predicted::irreducible_gap_aeg) {
    CrossRef c{"asynchronous exponential growth", "gap characterization",
               "profile converges, lambda0 = s_A", std::nullopt, std::nullopt};
    if (sr && sr->aeg) {
      const AegFit& a = *sr->aeg;
      if (a.status == AegStatus::extinct) {
        c.measured = "extinct";
        c.agrees = false;
      } else {
        c.measured = "lambda0_fit = " + fmt(a.lambda0_fit) + ", profile decay rate = " +
                     fmt(a.profile_decay_rate) + ", residual = " + fmt(a.residual);
        c.agrees = a.profile_decay_rate < 0.0 &&
                   std::abs(a.lambda0_fit - sr->s_A) <= std::max(1e-3, 5.0 * ctx.dt);
      }
    }
    rep.crossrefs.push_back(std::move(c));
  }

  if (sr && sr->eps_bar && sr->lambda_star) {
    const double bound = *sr->lambda_star + *sr->eps_bar - 0.05;
    CrossRef c{"gap lower bound", "constant-rate gap bound", "s_A >= " + fmt(bound), std::nullopt,
               std::nullopt};
    c.measured = "s_A = " + fmt(sr->s_A);
    c.agrees = sr->s_A >= bound;
    rep.crossrefs.push_back(std::move(c));
  }

  if (truncated) {
    const auto& cons = v.conservativity;
    const bool super = cons.cls == Conservativity::super || cons.cls == Conservativity::neutral;
    const bool sub = cons.cls == Conservativity::sub || cons.cls == Conservativity::neutral;
    if (super || sub) {
      CrossRef c{"growth sign", super ? "super-conservative mass law" : "sub-conservative mass law",
                 super && sub ? "s_A = 0" : super ? "s_A >= 0" : "s_A <= 0", std::nullopt,
                 std::nullopt};
      if (sr) {
        c.measured = "s_A = " + fmt(sr->s_A);
        c.agrees = (!super || sr->s_A >= -1e-3) && (!sub || sr->s_A <= 1e-3);
      }
      rep.crossrefs.push_back(std::move(c));
    }
  }

  if (sr) {
    for (const ProbeResult& p : sr->probes) {
      CrossRef c{"resolvent probe at lambda = " + fmt(p.lambda), "", "", std::nullopt, std::nullopt};
      if (sr->lambda_star) {
        c.basis = "closed-form s(B)";
        c.predicted = p.lambda > *sr->lambda_star ? "resolvent-bounded" : "diverging";
      } else if (p.lambda > 0.0) {
        c.basis = "s(B) <= 0";
        c.predicted = "resolvent-bounded";
      } else {
        c.basis = "no applicable criterion";
        c.predicted = "undetermined";
      }
      c.measured = to_string(p.classification);
      if (c.predicted != "undetermined") c.agrees = c.predicted == *c.measured;
      rep.crossrefs.push_back(std::move(c));
    }
  }

  if (v.b.present() && !v.irreducible) {
    CrossRef c{"invariant subspace", "invariant subspace growth",
               "L1(" + fmt(*v.b.b1) + ", m) x L1(" + fmt(*v.b.b2) + ", m) invariant", std::nullopt,
               std::nullopt};
    if (rep.subspace_leakage) {
      c.measured = "leakage = " + fmt(*rep.subspace_leakage);
      c.agrees = *rep.subspace_leakage <= 1e-10;
    }
    rep.crossrefs.push_back(std::move(c));
  }

  if (rep.mass_balance) {
    CrossRef c{"mass identity", "integrated mass balance", "drift = O(dt)", std::nullopt, std::nullopt};
    c.measured = "max |drift| = " + fmt(rep.mass_balance->max_abs_drift);
    rep.crossrefs.push_back(std::move(c));
  }
}

json condition_json(const Condition& c) {
  return {{"holds", c.holds}, {"witness", opt(c.witness)}};
}

json verdict_json(const Verdict& v) {
  const bool inf = v.domain == DomainKind::truncated_infinite;
  json j;
  j["domain"] = to_string(v.domain);
  j["h"] = v.h;
  j[inf ? "H4" : "H1"] = condition_json(v.H1);
  j[inf ? "H5" : "H2"] = condition_json(v.H2);
  j[inf ? "H6" : "H3"] = condition_json(v.H3);
  j["H1bis"] = condition_json(v.H1bis);
  j["irreducible"] = v.irreducible;
  j["discrete_irreducible"] = v.discrete_irreducible;
  j["inf_supp_c1"] = opt(v.supports.inf_supp_c1());
  j["sup_supp_c2"] = opt(v.supports.sup_supp_c2());
  j["b1"] = opt(v.b.b1);
  j["b2"] = opt(v.b.b2);
  j["b_failed"] = v.b.present() ? json(nullptr) : json(v.b.failed);
  const auto& c = v.conservativity;
  j["conservativity"] = {{"class", to_string(c.cls)},
                         {"min_margin", num(c.min_margin)},
                         {"max_margin", num(c.max_margin)},
                         {"tail_window", c.tail_window},
                         {"liminf_mu", opt(c.liminf_mu)},
                         {"limsup_mu", opt(c.limsup_mu)},
                         {"liminf_c2", opt(c.liminf_c2)},
                         {"limsup_c2", opt(c.limsup_c2)}};
  j["weak_compact_sufficient"] =
      v.weak_compact_sufficient ? json(*v.weak_compact_sufficient) : json("unchecked");
  j["constant_case"] = v.constant_case;
  j["predicted"] = to_string(v.predicted);
  j["basis"] = v.basis;
  return j;
}

json aeg_json(const AegFit& a) {
  return {{"status", a.status == AegStatus::fitted ? "fitted" : "extinct"},
          {"lambda0_fit", num(a.lambda0_fit)},
          {"raw_log_slope", num(a.raw_log_slope)},
          {"profile_decay_rate", num(a.profile_decay_rate)},
          {"residual", num(a.residual)},
          {"window_records", a.window_records}};
}

json spectral_json(const SpectralReport& s) {
  json j;
  j["s_A"] = num(s.s_A);
  j["s_A_converged"] = s.s_A_converged;
  j["s_A_method"] = s.s_A_method;
  j["s_B_surrogate"] = num(s.s_B_surrogate);
  j["s_B_source"] = s.s_B_source;
  j["lambda_star"] = opt(s.lambda_star);
  j["eps_bar"] = opt(s.eps_bar);
  j["Delta"] = opt(s.delta);
  j["gap"] = num(s.gap);
  j["aeg_fit"] = s.aeg ? aeg_json(*s.aeg) : json(nullptr);
  json probes = json::array();
  for (const auto& p : s.probes) {
    json masses = json::array(), ratios = json::array();
    for (double m : p.masses) masses.push_back(num(m));
    for (double r : p.ratios) ratios.push_back(num(r));
    probes.push_back({{"lambda", p.lambda},
                      {"smax", p.smax},
                      {"masses", masses},
                      {"ratios", ratios},
                      {"classification", to_string(p.classification)}});
  }
  j["probes"] = probes;
  if (s.eigfun.cells() > 0) {
    const auto u1 = s.eigfun.u1();
    const auto u2 = s.eigfun.u2();
    j["eigenfunction"] = {{"u1", std::vector<double>(u1.begin(), u1.end())},
                          {"u2", std::vector<double>(u2.begin(), u2.end())}};
  }
  return j;
}

std::string profile_name(double t) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "profile_t%g.csv", t);
  return buf;
}

}  // namespace

void write_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw ConfigError("failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw ConfigError("cannot move " + tmp.string() + " into place: " + ec.message());
  }
}

RunReport run_scenario(const Scenario& sc, unsigned stages, const fs::path& out_dir,
                       RunReport* partial) {
  using clock = std::chrono::steady_clock;
  RunReport rep;
  rep.scenario_name = sc.name;
  rep.scenario_echo = sc.canonical;
  rep.stages = stages;
  rep.n = sc.n;
  rep.domain = sc.domain.kind;
  Context ctx;
  ctx.dt = sc.run.dt;
  ctx.gamma0 = sc.coefficients.gamma0;

  auto timed = [&rep](const char* name, auto&& fn) {
    const auto t0 = clock::now();
    fn();
    rep.timings.push_back({name, std::chrono::duration<double>(clock::now() - t0).count()});
  };

  try {
    std::optional<Model> model;
    timed("assemble", [&] { model.emplace(build_model(sc)); });
    const Model& m = *model;
    rep.h = m.grid.h();

    if (sc.outputs.export_matrix) {
      std::ostringstream os;
      m.gen.export_coo(os, Part::full);
      write_atomic(out_dir / "matrix_full.coo", os.str());
      rep.files.push_back("matrix_full.coo");
    }

    timed("criteria", [&] { rep.verdict = full_verdict(m.kernel, m.params, m.grid); });

    if (stages & stage_spectrum) {
      timed("spectrum", [&] {
        rep.spectral = compute_spectrum(sc, m, *rep.verdict, true);
        std::ostringstream os;
        write_profile_csv(os, m.grid, rep.spectral->eigfun);
        write_atomic(out_dir / "eigenfunction.csv", os.str());
        rep.files.push_back("eigenfunction.csv");
      });
    }

    if (stages & stage_simulate) {
      timed("simulate", [&] {
        const StateVector u0 = initial_state(sc, m.grid);
        const Trajectory traj = evolve(m.gen, u0, sc.run.dt, sc.run.T, sc.run.record_every);
        rep.steps = traj.steps();
        rep.final_mass = traj.masses.back();
        std::ostringstream os;
        write_trajectory_csv(os, traj);
        write_atomic(out_dir / "trajectory.csv", os.str());
        rep.files.push_back("trajectory.csv");

        std::vector<double> times = sc.outputs.profile_times;
        if (times.empty()) times.push_back(traj.record_times.back());
        for (double t : times) {
          std::size_t best = 0;
          for (std::size_t r = 1; r < traj.record_times.size(); ++r)
            if (std::abs(traj.record_times[r] - t) < std::abs(traj.record_times[best] - t)) best = r;
          std::ostringstream ps;
          write_profile_csv(ps, m.grid, traj.states[best]);
          const std::string name = profile_name(traj.record_times[best]);
          write_atomic(out_dir / name, ps.str());
          rep.files.push_back(name);
        }

        if (traj.states.size() >= 2) rep.mass_balance = mass_balance(traj, m.gen);

        std::optional<StateVector> candidate;
        if (rep.spectral && rep.spectral->s_A_converged &&
            rep.verdict->predicted == Predicted::irreducible_gap_aeg)
          candidate = rep.spectral->eigfun;
        try {
          const AegFit fit = detect_AEG(traj, candidate);
          if (!rep.spectral) rep.spectral.emplace();
          rep.spectral->aeg = fit;
        } catch (const InsufficientDataError&) {
          // Short or coarsely recorded runs carry no fit.
        }

        const Verdict& v = *rep.verdict;
        if (v.b.present() && !v.irreducible && sc.run.T > 0.0) {
          const Ideal ideal = Ideal::small(*v.b.b1, *v.b.b2);
          StateVector sub(m.grid.size(), m.grid.h());
          for (int i = 0; i < m.grid.size(); ++i) {
            if (m.grid.center(i) >= ideal.u1_from) sub.u1()[i] = 1.0;
            if (m.grid.center(i) >= ideal.u2_from) sub.u2()[i] = 1.0;
          }
          const auto probe = ideal_invariance_probe(m.gen, ideal, sub.normalized(),
                                                    std::min(sc.run.T, 2.0), sc.run.dt,
                                                    sc.run.record_every);
          rep.subspace_leakage = probe.max_leakage;
        }
      });
    }
    rep.complete = true;
    build_crossrefs(rep, ctx);
  } catch (const std::exception& e) {
    rep.complete = false;
    rep.error = e.what();
    build_crossrefs(rep, ctx);
    if (partial) *partial = rep;
    throw;
  }
  if (partial) *partial = rep;
  return rep;
}

std::string report_json(const RunReport& rep, bool with_timings) {
  json j;
  json echo = json::parse(rep.scenario_echo.empty() ? "{}" : rep.scenario_echo);
  j["scenario"] = {{"name", rep.scenario_name}, {"input", echo}};
  j["complete"] = rep.complete;
  j["error"] = rep.error.empty() ? json(nullptr) : json(rep.error);
  json stages = json::array();
  if (rep.stages & stage_criteria) stages.push_back("criteria");
  if (rep.stages & stage_spectrum) stages.push_back("spectrum");
  if (rep.stages & stage_simulate) stages.push_back("simulate");
  j["stages"] = stages;
  j["grid"] = {{"kind", to_string(rep.domain)}, {"n", rep.n}, {"h", rep.h}};
  j["verdict"] = rep.verdict ? verdict_json(*rep.verdict) : json(nullptr);
  j["spectral"] = rep.spectral ? spectral_json(*rep.spectral) : json(nullptr);
  if (rep.stages & stage_simulate) {
    j["trajectory"] = {{"steps", rep.steps}, {"final_mass", num(rep.final_mass)}};
    j["mass_balance"] = rep.mass_balance
                            ? json{{"max_abs_drift", num(rep.mass_balance->max_abs_drift)},
                                   {"mean_log_rate", num(rep.mass_balance->mean_log_rate)},
                                   {"intervals", rep.mass_balance->drift.size()}}
                            : json(nullptr);
    j["subspace_leakage"] = opt(rep.subspace_leakage);
  }
  json refs = json::array();
  for (const auto& c : rep.crossrefs)
    refs.push_back({{"claim", c.claim},
                    {"basis", c.basis},
                    {"predicted", c.predicted},
                    {"measured", c.measured ? json(*c.measured) : json(nullptr)},
                    {"agrees", c.agrees ? json(*c.agrees) : json(nullptr)}});
  j["crossrefs"] = refs;
  j["files"] = rep.files;
  if (with_timings) {
    json t = json::object();
    for (const auto& s : rep.timings) t[s.stage] = s.seconds;
    j["timings"] = t;
  }
  return j.dump(2) + "\n";
}

SweepRange SweepRange::parse(const std::string& text) {
  SweepRange r;
  char extra = 0;
  if (std::sscanf(text.c_str(), "%lf:%lf:%lf%c", &r.from, &r.to, &r.step, &extra) != 3)
    throw ConfigError("sweep range must look like a:b:step, got '" + text + "'");
  if (!(r.step > 0.0) || !(r.to >= r.from) || !std::isfinite(r.from) || !std::isfinite(r.to))
    throw ConfigError("sweep range needs a <= b and step > 0");
  return r;
}

std::vector<double> SweepRange::values() const {
  const auto count = static_cast<long>(std::floor((to - from) / step + 1e-9)) + 1;
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(count));
  for (long k = 0; k < count; ++k) out.push_back(from + static_cast<double>(k) * step);
  return out;
}

unsigned sweep_threads() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("TWOPHASE_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<unsigned>(v);
  }
  return hw;
}

std::vector<SweepRow> run_sweep(const std::string& text, const std::string& origin,
                                const Overrides& base, const std::string& key,
                                const SweepRange& range, unsigned threads) {
  const std::vector<double> values = range.values();
  std::vector<SweepRow> rows(values.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr config_error;
  std::mutex error_mutex;

  auto worker = [&] {
    while (true) {
      const std::size_t k = next.fetch_add(1);
      if (k >= values.size()) return;
      SweepRow& row = rows[k];
      row.parameter = values[k];
      try {
        Overrides ov = base;
        ov[key] = values[k];
        const Scenario sc = parse_scenario_text(text, ov, origin);
        const Model m = build_model(sc);
        const Verdict v = full_verdict(m.kernel, m.params, m.grid);
        const SpectralReport sr = compute_spectrum(sc, m, v, false);
        row.s_A = sr.s_A;
        row.lambda_star = sr.lambda_star;
        row.eps_bar = sr.eps_bar;
        if (!std::isnan(sr.gap)) row.gap = sr.gap;
      } catch (const ConfigError&) {
        std::lock_guard lock(error_mutex);
        if (!config_error) config_error = std::current_exception();
      } catch (const NumericalError& e) {
        row.error = e.what();
      }
    }
  };

  const unsigned count = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(values.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < count; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (config_error) std::rethrow_exception(config_error);
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  auto cell = [](const std::optional<double>& v) {
    if (!v) return std::string("NA");
    if (std::isinf(*v)) return std::string(*v > 0 ? "inf" : "-inf");
    return fmt(*v);
  };
  std::string out = "parameter,s_A,lambda_star,eps_bar,gap\n";
  for (const auto& r : rows)
    out += fmt(r.parameter) + ',' + cell(r.s_A) + ',' + cell(r.lambda_star) + ',' + cell(r.eps_bar) +
           ',' + cell(r.gap) + '\n';
  return out;
}

}  // namespace twophase
