#include "pwabs/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "pwabs/error.hpp"
#include "pwabs/rng.hpp"

namespace pwabs {

std::vector<Atom> case_study_atoms() {
  Vec h1(2), h2(2);
  h1 << 1.0, 0.0;
  h2 << 0.0, -1.0;
  return {Atom{"p1", h1, 0.3}, Atom{"p2", h2, -0.6}};
}

void PipelineConfig::validate() const {
  ident.validate();
  sampler.validate();
  if (trials < 1) throw ConfigError("trials must be >= 1");
  if (initial_sample_count < 1) throw ConfigError("initial_sample_count must be >= 1");
  if (active_sample_budget < 0) throw ConfigError("active_sample_budget must be >= 0");
  if (!(abstraction.eta > 0.0 && abstraction.eta < 1.0)) throw ConfigError("abstraction.eta must lie in (0, 1)");
  if (abstraction.refinement_cap < 0 || benchmark_refinement_cap < 0) throw ConfigError("refinement caps must be >= 0");
  for (int g : abstraction.grid)
    if (g < 1) throw ConfigError("abstraction.grid counts must be >= 1");
  if (!(sigma_step > 0.0) || sigma_max_steps < 1) throw ConfigError("sigma grid must be positive");
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be >= 0");
}

const std::vector<Atom>& PipelineConfig::effective_atoms() const {
  static const std::vector<Atom> fallback = case_study_atoms();
  return atoms.empty() ? fallback : atoms;
}

// ---------------------------------------------------------------- config JSON

namespace {

class Reader {
 public:
  Reader(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + " must be an object");
  }
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError("unknown key " + where_ + "." + it.key());
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const Json::exception&) {
      throw ConfigError("bad value for " + where_ + "." + key);
    }
  }
  const Json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

 private:
  const Json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace

Json config_to_json(const PipelineConfig& c) {
  Json j;
  j["ident"] = {{"sigma_hat", c.ident.sigma_hat}, {"r", c.ident.r}, {"J", c.ident.J}, {"beta", c.ident.beta},
                {"mu", c.ident.mu}, {"kappa", c.ident.kappa}, {"theta", c.ident.theta},
                {"ball_radius", c.ident.ball_radius}, {"max_iterations", c.ident.max_iterations},
                {"candidate_mode", c.ident.candidate_mode == CandidateMode::MinimalSubset ? "minimal_subset" : "uniform"},
                {"svm_iterations", c.ident.svm_iterations}, {"svm_lambda", c.ident.svm_lambda},
                {"seed", c.ident.seed}};
  j["sampler"] = {{"B", c.sampler.B}, {"failure_prob", c.sampler.failure_prob},
                  {"gamma_mode", c.sampler.gamma_mode == GammaMode::Constant ? "constant" : "logdet"},
                  {"gamma", c.sampler.gamma}, {"lengthscale", c.sampler.lengthscale},
                  {"signal_var", c.sampler.signal_var}, {"jitter", c.sampler.jitter}, {"seed", c.sampler.seed},
                  {"candidate_count", c.sampler.candidate_count}};
  j["abstraction"] = {{"grid", c.abstraction.grid}, {"eta", c.abstraction.eta},
                      {"refinement_cap", c.abstraction.refinement_cap},
                      {"sliver_fraction", c.abstraction.sliver_fraction},
                      {"volume_samples", c.abstraction.volume_samples}, {"max_states", c.abstraction.max_states},
                      {"seed", c.abstraction.seed}};
  j["formula"] = c.formula;
  j["atoms"] = atoms_to_json(c.effective_atoms());
  j["noise_sigma"] = c.noise_sigma;
  j["trials"] = c.trials;
  j["seed"] = c.seed;
  j["initial_sample_count"] = c.initial_sample_count;
  j["active_sample_budget"] = c.active_sample_budget;
  j["benchmark_refinement_cap"] = c.benchmark_refinement_cap;
  j["sigma_step"] = c.sigma_step;
  j["sigma_max_steps"] = c.sigma_max_steps;
  j["metric_samples"] = c.metric_samples;
  j["prediction_bound"] = c.prediction_bound;
  j["variance_convention"] = c.variance_convention == VarianceConvention::Linear ? "linear" : "squared";
  j["scope"] = c.scope == SimulationScope::AllStates ? "all" : "initial";
  return j;
}

PipelineConfig config_from_json(const Json& j) {
  PipelineConfig c;
  {
    Reader r(j, "config");
    if (const Json* id = r.child("ident")) {
      Reader s(*id, "ident");
      s.get("sigma_hat", c.ident.sigma_hat);
      s.get("r", c.ident.r);
      s.get("J", c.ident.J);
      s.get("beta", c.ident.beta);
      s.get("mu", c.ident.mu);
      s.get("kappa", c.ident.kappa);
      s.get("theta", c.ident.theta);
      s.get("ball_radius", c.ident.ball_radius);
      s.get("max_iterations", c.ident.max_iterations);
      std::string mode;
      s.get("candidate_mode", mode);
      if (mode == "uniform") c.ident.candidate_mode = CandidateMode::Uniform;
      else if (mode == "minimal_subset" || mode.empty()) c.ident.candidate_mode = CandidateMode::MinimalSubset;
      else throw ConfigError("ident.candidate_mode must be minimal_subset or uniform");
      s.get("svm_iterations", c.ident.svm_iterations);
      s.get("svm_lambda", c.ident.svm_lambda);
      s.get("seed", c.ident.seed);
      s.finish();
    }
    if (const Json* sm = r.child("sampler")) {
      Reader s(*sm, "sampler");
      s.get("B", c.sampler.B);
      s.get("failure_prob", c.sampler.failure_prob);
      std::string mode;
      s.get("gamma_mode", mode);
      if (mode == "logdet") c.sampler.gamma_mode = GammaMode::LogDet;
      else if (mode == "constant" || mode.empty()) c.sampler.gamma_mode = GammaMode::Constant;
      else throw ConfigError("sampler.gamma_mode must be constant or logdet");
      s.get("gamma", c.sampler.gamma);
      s.get("lengthscale", c.sampler.lengthscale);
      s.get("signal_var", c.sampler.signal_var);
      s.get("jitter", c.sampler.jitter);
      s.get("seed", c.sampler.seed);
      s.get("candidate_count", c.sampler.candidate_count);
      s.finish();
    }
    if (const Json* ab = r.child("abstraction")) {
      Reader s(*ab, "abstraction");
      s.get("grid", c.abstraction.grid);
      s.get("eta", c.abstraction.eta);
      s.get("refinement_cap", c.abstraction.refinement_cap);
      s.get("sliver_fraction", c.abstraction.sliver_fraction);
      s.get("volume_samples", c.abstraction.volume_samples);
      s.get("max_states", c.abstraction.max_states);
      s.get("seed", c.abstraction.seed);
      s.finish();
    }
    r.get("formula", c.formula);
    if (const Json* at = r.child("atoms")) {
      try {
        c.atoms = atoms_from_json(*at);
      } catch (const FormatError& e) {
        throw ConfigError(std::string("atoms: ") + e.what());
      }
    }
    r.get("noise_sigma", c.noise_sigma);
    r.get("trials", c.trials);
    r.get("seed", c.seed);
    r.get("initial_sample_count", c.initial_sample_count);
    r.get("active_sample_budget", c.active_sample_budget);
    r.get("benchmark_refinement_cap", c.benchmark_refinement_cap);
    r.get("sigma_step", c.sigma_step);
    r.get("sigma_max_steps", c.sigma_max_steps);
    r.get("metric_samples", c.metric_samples);
    r.get("prediction_bound", c.prediction_bound);
    std::string conv;
    r.get("variance_convention", conv);
    if (conv == "squared") c.variance_convention = VarianceConvention::Squared;
    else if (conv == "linear" || conv.empty()) c.variance_convention = VarianceConvention::Linear;
    else throw ConfigError("variance_convention must be linear or squared");
    std::string scope;
    r.get("scope", scope);
    if (scope == "initial") c.scope = SimulationScope::InitialOnly;
    else if (scope == "all" || scope.empty()) c.scope = SimulationScope::AllStates;
    else throw ConfigError("scope must be all or initial");
    r.finish();
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------- pipeline

namespace {

template <class F>
auto staged(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e);
  }
}

double default_lengthscale(const Polytope& domain, const SamplerConfig& cfg) {
  return cfg.lengthscale > 0.0 ? cfg.lengthscale : 0.2 * bounding_box(domain).diameter();
}

}  // namespace

Abstraction benchmark_abstraction(const PwaModel& truth, const PipelineConfig& cfg) {
  const auto& atoms = cfg.effective_atoms();
  const auto buchi = to_dba(parse_ltl(cfg.formula, atoms), static_cast<int>(atoms.size()));
  AbstractionConfig ac = cfg.abstraction;
  ac.refinement_cap = cfg.benchmark_refinement_cap;
  return abstract_model(truth, atoms, buchi, ac);
}

PipelineResult run_pipeline(BlackBox& box, const PipelineConfig& cfg, const FiniteTS* benchmark) {
  cfg.validate();
  PipelineResult out;
  const auto& atoms = cfg.effective_atoms();
  const Polytope domain = box.domain();

  out.buchi = staged("logic", [&] {
    return to_dba(parse_ltl(cfg.formula, atoms), static_cast<int>(atoms.size()));
  });

  staged("sample", [&] {
    const auto xs = sample_uniform(Region(domain), static_cast<std::size_t>(cfg.initial_sample_count),
                                   mix_seed(cfg.seed, 0x5a));
    out.data = generate_dataset(box, xs);
  });

  IdentConfig icfg = cfg.ident;
  out.ident = staged("identify", [&] { return init_identify(out.data, domain, icfg); });

  auto quotient = [&] {
    return staged("abstract", [&] {
      return build_quotient(out.ident.model, initial_partition(out.ident.model, atoms, cfg.abstraction.grid));
    });
  };

  SamplerConfig scfg = cfg.sampler;
  scfg.lengthscale = default_lengthscale(domain, scfg);
  for (int t = 1; t <= cfg.active_sample_budget; ++t) {
    const FiniteTS ts0 = quotient();
    out.ident = staged("identify", [&] { return refine_identify(out.data, std::move(out.ident), &ts0, icfg); });
    const Vec x = staged("sample", [&] {
      std::vector<GpModel> gps;
      std::vector<Region> regions;
      for (int i = 0; i < out.ident.mode_count(); ++i) {
        const auto& m = out.ident.model.mode(i);
        std::vector<Vec> in;
        std::vector<double> tg;
        for (int k : out.ident.clusters[static_cast<std::size_t>(i)]) {
          const auto& xk = out.data.xs[static_cast<std::size_t>(k)];
          in.push_back(xk);
          tg.push_back((out.data.ys[static_cast<std::size_t>(k)] - m.A * xk - m.b).norm());
        }
        gps.emplace_back(std::move(in), std::move(tg), scfg.lengthscale, scfg.signal_var, scfg.jitter);
        regions.emplace_back(intersect(m.region, domain));
      }
      return select_next(gps, regions, t, scfg).point;
    });
    out.data.push_back(x, box.query(x));
    out.ident.unassigned.push_back(static_cast<int>(out.data.size()) - 1);
    out.active_points.push_back(x);
  }
  {
    const FiniteTS ts0 = quotient();
    out.ident = staged("identify", [&] { return refine_identify(out.data, std::move(out.ident), &ts0, icfg); });
  }

  out.abstraction = staged("abstract", [&] { return abstract_model(out.ident.model, atoms, out.buchi, cfg.abstraction); });

  if (benchmark) {
    out.certificate = staged("verify", [&] {
      SimulationOptions opts;
      opts.scope = cfg.scope;
      opts.samples = cfg.metric_samples;
      opts.seed = mix_seed(cfg.seed, 0xce);
      if (cfg.scope == SimulationScope::InitialOnly) {
        // Initial states of the benchmark are not stored with the TS; every
        // non-sink state is a possible start.
        for (int q = 0; q < benchmark->size(); ++q)
          if (!benchmark->states[static_cast<std::size_t>(q)].obs.sink) opts.initial.push_back(q);
      }
      ObservationDistance dist(*benchmark, out.abstraction.ts, opts.samples, opts.seed);
      int lo = -1, hi = cfg.sigma_max_steps;
      auto holds = [&](int j) {
        return check_sigma_simulation(*benchmark, out.abstraction.ts, cfg.sigma_step * j, dist, opts).holds;
      };
      if (holds(hi)) {
        while (hi - lo > 1) {
          const int mid = lo + (hi - lo) / 2;
          (holds(mid) ? hi : lo) = mid;
        }
      }
      SigmaCertificate cert = check_sigma_simulation(*benchmark, out.abstraction.ts, cfg.sigma_step * hi, dist, opts);
      const double eps = out.abstraction.trace.su_volume.empty() ? 0.0 : out.abstraction.trace.su_volume.back();
      const double C = cfg.prediction_bound > 0.0 ? cfg.prediction_bound : std::sqrt(out.ident.residual);
      const double sigma_e = out.ident.model.noise_sigma();
      if (cert.holds && cert.sigma > eps && sigma_e + C > 0.0)
        cert.delta_bound = confidence_bound(cert.sigma, eps, sigma_e, C, cfg.variance_convention);
      return cert;
    });
  }
  return out;
}

// ---------------------------------------------------------------- metrics

TrialMetrics parameter_metrics(const PwaModel& truth, const PwaModel& est, const MetricOptions& opts) {
  (void)opts;
  TrialMetrics m;
  const int st = truth.mode_count();
  const int se = est.mode_count();
  m.estimated_modes = se;
  auto cost = [&](int i, int j) {
    return (truth.mode(i).A - est.mode(j).A).norm() + (truth.mode(i).b - est.mode(j).b).norm();
  };
  // Brute-force minimum-cost injection from the smaller side to the larger.
  const bool truth_small = st <= se;
  const int small = truth_small ? st : se;
  const int large = truth_small ? se : st;
  std::vector<int> perm(static_cast<std::size_t>(large));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> best_perm;
  do {
    double c = 0.0;
    for (int a = 0; a < small; ++a) {
      const int b = perm[static_cast<std::size_t>(a)];
      c += truth_small ? cost(a, b) : cost(b, a);
    }
    if (c < best - 1e-15) {
      best = c;
      best_perm.assign(perm.begin(), perm.begin() + small);
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  m.parameter_error = best;
  if (!truth_small) {
    // Unmatched true modes are charged against their nearest estimate.
    m.modes_matched = false;
    for (int i = 0; i < st; ++i) {
      if (std::find(best_perm.begin(), best_perm.end(), i) != best_perm.end()) continue;
      double near = std::numeric_limits<double>::infinity();
      for (int j = 0; j < se; ++j) near = std::min(near, cost(i, j));
      m.parameter_error += near;
    }
  } else if (se != st) {
    m.modes_matched = false;
  }
  return m;
}

TrialMetrics identification_metrics(const PwaModel& truth, const PwaModel& est, const MetricOptions& opts) {
  TrialMetrics m = parameter_metrics(truth, est, opts);
  const int st = truth.mode_count();
  const int se = est.mode_count();
  const double diam = bounding_box(truth.domain()).diameter();

  // Region error under the same matching rule (recomputed on A/b cost).
  std::vector<int> match(static_cast<std::size_t>(st), -1);
  {
    std::vector<int> perm(static_cast<std::size_t>(std::max(st, se)));
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
      double c = 0.0;
      std::vector<int> cand(static_cast<std::size_t>(st), -1);
      for (int i = 0; i < st; ++i) {
        const int j = perm[static_cast<std::size_t>(i)];
        if (j < se) {
          c += (truth.mode(i).A - est.mode(j).A).norm() + (truth.mode(i).b - est.mode(j).b).norm();
          cand[static_cast<std::size_t>(i)] = j;
        }
      }
      if (c < best - 1e-15) {
        best = c;
        match = cand;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
  for (int i = 0; i < st; ++i) {
    int j = match[static_cast<std::size_t>(i)];
    if (j < 0) {
      double near = std::numeric_limits<double>::infinity();
      for (int k = 0; k < se; ++k) {
        const double c = (truth.mode(i).A - est.mode(k).A).norm() + (truth.mode(i).b - est.mode(k).b).norm();
        if (c < near) {
          near = c;
          j = k;
        }
      }
    }
    const Region tr(intersect(truth.mode(i).region, truth.domain()));
    const Region er(intersect(est.mode(j).region, est.domain()));
    try {
      m.region_error += hausdorff_distance(tr, er, opts.hausdorff_samples, mix_seed(opts.seed, static_cast<std::uint64_t>(i)));
    } catch (const Error&) {
      m.region_error += diam;
      m.modes_matched = false;
    }
  }
  return m;
}

TrialMetrics compute_metrics(const PwaModel& truth, const PwaModel& est, const FiniteTS& benchmark,
                             const FiniteTS& got, const MetricOptions& opts) {
  TrialMetrics m = identification_metrics(truth, est, opts);
  SimulationOptions so;
  so.samples = opts.hausdorff_samples;
  so.seed = opts.seed;
  ObservationDistance dist(benchmark, got, so.samples, so.seed);
  int lo = -1, hi = opts.sigma_max_steps;
  auto holds = [&](int j) { return check_sigma_simulation(benchmark, got, opts.sigma_step * j, dist, so).holds; };
  if (holds(hi)) {
    while (hi - lo > 1) {
      const int mid = lo + (hi - lo) / 2;
      (holds(mid) ? hi : lo) = mid;
    }
    m.sigma = opts.sigma_step * hi;
    const double vol = mc_volume(Region(truth.domain()), 4000, mix_seed(opts.seed, 0x7f)).value;
    m.sigma_bar = *m.sigma / vol;
  }
  return m;
}

// ---------------------------------------------------------------- tables

ExperimentReport run_tables(const PipelineConfig& base, const std::function<void(const std::string&)>& progress) {
  base.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const PwaModel truth = case_study_model(base.noise_sigma);
  ExperimentReport report;

  struct Sweep {
    const char* table;
    int samples;
    int steps;
  };
  const std::vector<Sweep> sweeps = {{"samples", 20, 20}, {"samples", 40, 20}, {"samples", 60, 20},
                                   {"steps", 10, 5},    {"steps", 10, 10},   {"steps", 10, 20}};
  const Abstraction bench = benchmark_abstraction(truth, base);

  for (const auto& sp : sweeps) {
    TableCell cell;
    cell.table = sp.table;
    cell.samples = sp.samples;
    cell.steps = sp.steps;
    double sum = 0.0;
    int ok = 0;
    for (int trial = 0; trial < base.trials; ++trial) {
      const auto s0 = std::chrono::steady_clock::now();
      PipelineConfig cfg = base;
      cfg.active_sample_budget = sp.samples;
      cfg.abstraction.refinement_cap = sp.steps;
      // Paired design: trial k uses the same seeds in every cell.
      cfg.seed = mix_seed(base.seed, static_cast<std::uint64_t>(trial));
      cfg.ident.seed = mix_seed(cfg.seed, 1);
      cfg.sampler.seed = mix_seed(cfg.seed, 2);
      TrialMetrics tm;
      try {
        BlackBox box(truth, mix_seed(cfg.seed, 3));
        const auto res = run_pipeline(box, cfg);
        MetricOptions mo;
        mo.sigma_step = cfg.sigma_step;
        mo.sigma_max_steps = cfg.sigma_max_steps;
        mo.hausdorff_samples = cfg.metric_samples;
        mo.seed = mix_seed(cfg.seed, 4);
        tm = compute_metrics(truth, res.ident.model, bench.ts, res.abstraction.ts, mo);
        if (!tm.sigma_bar) tm.failure = "no sigma on the grid";
      } catch (const Error& e) {
        tm.failure = e.what();
      }
      tm.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - s0).count();
      if (tm.failure.empty()) {
        sum += *tm.sigma_bar;
        ++ok;
      } else {
        ++cell.failures;
      }
      if (progress) {
        std::ostringstream os;
        os << sp.table << " samples=" << sp.samples << " steps=" << sp.steps << " trial=" << trial;
        if (tm.failure.empty()) os << " sigma_bar=" << *tm.sigma_bar;
        else os << " failed: " << tm.failure;
        os << " (" << std::fixed << std::setprecision(1) << tm.seconds << " s)";
        progress(os.str());
      }
      cell.trials.push_back(std::move(tm));
    }
    cell.mean_sigma_bar = ok ? sum / ok : std::numeric_limits<double>::quiet_NaN();
    report.cells.push_back(std::move(cell));
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

std::string tables_csv(const ExperimentReport& report) {
  std::ostringstream os;
  os << "table,samples,steps,trial,sigma_bar,parameter_error,region_error,modes,failure\n";
  for (const auto& c : report.cells)
    for (std::size_t t = 0; t < c.trials.size(); ++t) {
      const auto& m = c.trials[t];
      os << c.table << ',' << c.samples << ',' << c.steps << ',' << t << ',';
      if (m.sigma_bar) os << std::setprecision(6) << *m.sigma_bar;
      os << ',' << m.parameter_error << ',' << m.region_error << ',' << m.estimated_modes << ',';
      std::string f = m.failure;
      std::replace(f.begin(), f.end(), ',', ';');
      os << f << '\n';
    }
  return os.str();
}

std::string tables_markdown(const ExperimentReport& report) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3);
  auto row = [&](const char* table, const char* label, auto key) {
    os << "| | ";
    for (const auto& c : report.cells)
      if (c.table == table) os << key(c) << " | ";
    os << "\n|---|";
    for (const auto& c : report.cells)
      if (c.table == table) os << "---|";
    os << "\n| " << label << " | ";
    for (const auto& c : report.cells)
      if (c.table == table) os << c.mean_sigma_bar << (c.failures ? "*" : "") << " | ";
    os << "\n\n";
  };
  os << "Mean normalized sigma, refinement steps fixed at 20, by number of active samples:\n\n";
  row("samples", "sigma_bar", [](const TableCell& c) { return c.samples; });
  os << "Mean normalized sigma, active samples fixed at 10, by number of refinement steps:\n\n";
  row("steps", "sigma_bar", [](const TableCell& c) { return c.steps; });
  os << "(* = at least one failed trial, excluded from the mean)\n";
  return os.str();
}

Json report_to_json(const ExperimentReport& report) {
  Json cells = Json::array();
  for (const auto& c : report.cells) {
    Json trials = Json::array();
    for (const auto& m : c.trials) {
      Json t{{"parameter_error", m.parameter_error}, {"region_error", m.region_error},
             {"estimated_modes", m.estimated_modes}, {"modes_matched", m.modes_matched},
             {"failure", m.failure}};
      t["sigma_bar"] = m.sigma_bar ? Json(*m.sigma_bar) : Json(nullptr);
      trials.push_back(std::move(t));
    }
    cells.push_back(Json{{"table", c.table}, {"samples", c.samples}, {"steps", c.steps},
                         {"mean_sigma_bar", std::isnan(c.mean_sigma_bar) ? Json(nullptr) : Json(c.mean_sigma_bar)},
                         {"failures", c.failures}, {"trials", trials}});
  }
  return Json{{"cells", cells}};
}

}  // namespace pwabs
