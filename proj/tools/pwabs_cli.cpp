#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "pwabs/harness.hpp"

namespace fs = std::filesystem;
using namespace pwabs;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out_dir = "out";
};

PipelineConfig load_config(const Globals& g) {
  PipelineConfig cfg;
  if (!g.config.empty()) {
    Json j;
    try {
      j = read_json_file(g.config);
    } catch (const FormatError& e) {
      throw ConfigError(e.what());
    }
    cfg = config_from_json(j);
  }
  if (g.seed) {
    cfg.seed = *g.seed;
    cfg.ident.seed = mix_seed(*g.seed, 1);
    cfg.sampler.seed = mix_seed(*g.seed, 2);
  }
  cfg.validate();
  return cfg;
}

void write(const Globals& g, const std::string& name, const std::string& text) {
  write_text_file(fs::path(g.out_dir) / name, text);
}

void write(const Globals& g, const std::string& name, const Json& j) {
  write_json_file(fs::path(g.out_dir) / name, j);
}

BuchiAutomaton buchi_for(const std::string& formula, const std::vector<Atom>& atoms) {
  return to_dba(parse_ltl(formula, atoms), static_cast<int>(atoms.size()));
}

std::vector<std::string> names_of(const std::vector<Atom>& atoms) {
  std::vector<std::string> out;
  for (const auto& a : atoms) out.push_back(a.name);
  return out;
}

Json summary_of(const Abstraction& a) {
  return Json{{"states", a.ts.size()},
              {"product_states", a.product.size()},
              {"top", a.classification.top.size()},
              {"bottom", a.classification.bot.size()},
              {"undecided", a.classification.undecided.size()},
              {"su_volume", a.trace.su_volume},
              {"state_counts", a.trace.state_counts},
              {"passes", a.trace.passes},
              {"merged_slivers", a.trace.merged_slivers},
              {"hit_state_ceiling", a.trace.hit_state_ceiling}};
}

Json certificate_json(const SigmaCertificate& c) {
  Json rel = Json::array();
  for (const auto& [a, b] : c.witness_relation) rel.push_back(Json::array({a, b}));
  Json j{{"sigma", c.sigma}, {"holds", c.holds}, {"witness_relation", rel}, {"inputs_digest", c.inputs_digest}};
  j["delta_bound"] = c.delta_bound ? Json(*c.delta_bound) : Json(nullptr);
  return j;
}

Json ident_json(const IdentResult& r) {
  return Json{{"modes", r.mode_count()},
              {"residual", r.residual},
              {"sigma_hat", r.diag.sigma_hat},
              {"ball_radius", r.diag.ball_radius},
              {"peel_rounds", r.diag.peel_rounds},
              {"iterations", r.diag.iterations},
              {"merges", r.diag.merges},
              {"mode_discards", r.diag.mode_discards},
              {"reassigned", r.diag.reassigned},
              {"no_neighbours", r.diag.no_neighbours},
              {"outside_abstraction", r.diag.outside_abstraction},
              {"discarded", r.discarded.size()},
              {"unassigned", r.unassigned.size()},
              {"warnings", r.diag.warnings}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Data-driven abstraction of black-box piecewise-affine systems"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Master seed");
  app.add_option("--config", g.config, "Pipeline configuration JSON");
  app.add_option("--out-dir", g.out_dir, "Directory for artifacts")->capture_default_str();

  auto* identify = app.add_subcommand("identify", "Identify a PWA model from a dataset CSV");
  std::string data_path, model_out = "model.json";
  bool skip_refine = false;
  identify->add_option("--data", data_path, "Dataset CSV (x1..xN,y1..yN)")->required();
  identify->add_option("--out", model_out, "Model file name inside --out-dir")->capture_default_str();
  identify->add_flag("--init-only", skip_refine, "Stop after the initialization algorithm");

  auto* sample = app.add_subcommand("sample", "Pick new query points by GP acquisition and append them");
  std::string model_path, gp_path, truth_path;
  int n_new = 10;
  sample->add_option("--model", model_path, "Estimated model JSON")->required();
  sample->add_option("--data", data_path, "Dataset CSV to extend")->required();
  sample->add_option("--gp", gp_path, "Sampler settings JSON (the sampler section of a config)");
  sample->add_option("--truth", truth_path, "Simulator model JSON (default: the case-study system)");
  sample->add_option("--n", n_new, "Number of points")->capture_default_str();

  auto* abstract = app.add_subcommand("abstract", "Abstract a model against an LTL formula");
  std::string atoms_path, formula;
  abstract->add_option("--model", model_path, "Model JSON")->required();
  abstract->add_option("--atoms", atoms_path, "Atoms JSON (default: config atoms)");
  abstract->add_option("--formula", formula, "LTL formula (default: config formula)");

  auto* check = app.add_subcommand("check", "Check lhs ≺_sigma rhs and print the certificate");
  std::string lhs_path, rhs_path, scope = "all";
  double sigma = 0.0;
  std::optional<double> epsilon, sigma_e, bound_c;
  check->add_option("--lhs", lhs_path, "Left transition system JSON")->required();
  check->add_option("--rhs", rhs_path, "Right transition system JSON")->required();
  check->add_option("--sigma", sigma, "Approximation level")->required();
  check->add_option("--scope", scope, "all | initial")->capture_default_str();
  check->add_option("--epsilon", epsilon, "Abstraction error for the confidence bound");
  check->add_option("--sigma-e", sigma_e, "Noise level for the confidence bound");
  check->add_option("--C", bound_c, "Prediction-error bound for the confidence bound");

  auto* pipeline = app.add_subcommand("pipeline", "Run the identify/abstract/sample loop on a simulator");
  pipeline->add_option("--truth", truth_path, "Simulator model JSON (default: the case-study system)");

  auto* tables = app.add_subcommand("tables", "Reproduce the sample-count and refinement-step sweeps");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 3;
  }

  try {
    const PipelineConfig cfg = load_config(g);

    if (*identify) {
      const Dataset data = dataset_from_csv(read_text_file(data_path));
      const Polytope domain = unit_box(data.dim());
      IdentResult res;
      try {
        res = init_identify(data, domain, cfg.ident);
        if (!skip_refine) res = refine_identify(data, std::move(res), nullptr, cfg.ident);
      } catch (const Error& e) {
        throw StageError("identify", e);
      }
      write(g, model_out, model_to_json(res.model));
      const auto labels = res.labels(data.size());
      write(g, "clusters.csv", dataset_to_csv(data, &labels));
      write(g, "identify.json", ident_json(res));
      std::cout << "modes: " << res.mode_count() << "\n";
    } else if (*sample) {
      const PwaModel model = model_from_json(read_json_file(model_path));
      Dataset data = dataset_from_csv(read_text_file(data_path));
      SamplerConfig scfg = cfg.sampler;
      if (!gp_path.empty()) {
        Json j;
        j["sampler"] = read_json_file(gp_path);
        scfg = config_from_json(j).sampler;
      }
      if (!(scfg.lengthscale > 0.0)) scfg.lengthscale = 0.2 * bounding_box(model.domain()).diameter();
      BlackBox box(truth_path.empty() ? case_study_model(cfg.noise_sigma) : model_from_json(read_json_file(truth_path)),
                   mix_seed(cfg.seed, 3));
      try {
        for (int t = 1; t <= n_new; ++t) {
          std::vector<GpModel> gps;
          std::vector<Region> regions;
          for (int i = 0; i < model.mode_count(); ++i) {
            const auto& m = model.mode(i);
            std::vector<Vec> in;
            std::vector<double> tg;
            for (std::size_t k = 0; k < data.size(); ++k)
              if (model.mode_of(data.xs[k]) == i) {
                in.push_back(data.xs[k]);
                tg.push_back((data.ys[k] - m.A * data.xs[k] - m.b).norm());
              }
            gps.emplace_back(std::move(in), std::move(tg), scfg.lengthscale, scfg.signal_var, scfg.jitter);
            regions.emplace_back(intersect(m.region, model.domain()));
          }
          const Vec x = select_next(gps, regions, t, scfg).point;
          data.push_back(x, box.query(x));
        }
      } catch (const Error& e) {
        throw StageError("sample", e);
      }
      write_text_file(data_path, dataset_to_csv(data));
      std::cout << "dataset size: " << data.size() << "\n";
    } else if (*abstract) {
      const PwaModel model = model_from_json(read_json_file(model_path));
      const std::vector<Atom> atoms = atoms_path.empty() ? cfg.effective_atoms() : atoms_from_json(read_json_file(atoms_path));
      Abstraction a;
      BuchiAutomaton buchi;
      try {
        buchi = buchi_for(formula.empty() ? cfg.formula : formula, atoms);
        a = abstract_model(model, atoms, buchi, cfg.abstraction);
      } catch (const Error& e) {
        throw StageError("abstract", e);
      }
      write(g, "ts.json", ts_to_json(a.ts));
      write(g, "ts.dot", a.ts.to_dot());
      write(g, "partition.csv", partition_csv(a.ts));
      write(g, "buchi.dot", buchi.to_dot(names_of(atoms)));
      write(g, "abstraction.json", summary_of(a));
      std::cout << "states: " << a.ts.size() << "\n";
    } else if (*check) {
      const FiniteTS lhs = ts_from_json(read_json_file(lhs_path));
      const FiniteTS rhs = ts_from_json(read_json_file(rhs_path));
      SimulationOptions opts;
      opts.samples = cfg.metric_samples;
      opts.seed = mix_seed(cfg.seed, 0xce);
      if (scope == "initial") {
        opts.scope = SimulationScope::InitialOnly;
        for (int q = 0; q < lhs.size(); ++q)
          if (!lhs.states[static_cast<std::size_t>(q)].obs.sink) opts.initial.push_back(q);
      } else if (scope != "all") {
        throw ConfigError("--scope must be all or initial");
      }
      SigmaCertificate cert;
      try {
        cert = check_sigma_simulation(lhs, rhs, sigma, opts);
        if (epsilon && sigma_e && bound_c)
          cert.delta_bound = confidence_bound(sigma, *epsilon, *sigma_e, *bound_c, cfg.variance_convention);
      } catch (const Error& e) {
        throw StageError("check", e);
      }
      const Json j = certificate_json(cert);
      write(g, "certificate.json", j);
      std::cout << j.dump(2) << "\n";
    } else if (*pipeline) {
      const PwaModel truth =
          truth_path.empty() ? case_study_model(cfg.noise_sigma) : model_from_json(read_json_file(truth_path));
      Abstraction bench;
      try {
        bench = benchmark_abstraction(truth, cfg);
      } catch (const Error& e) {
        throw StageError("benchmark", e);
      }
      BlackBox box(truth, mix_seed(cfg.seed, 3));
      const PipelineResult res = run_pipeline(box, cfg, &bench.ts);
      const auto labels = res.ident.labels(res.data.size());
      write(g, "config.json", config_to_json(cfg));
      write(g, "model.json", model_to_json(res.ident.model));
      write(g, "dataset.csv", dataset_to_csv(res.data, &labels));
      write(g, "identify.json", ident_json(res.ident));
      write(g, "ts.json", ts_to_json(res.abstraction.ts));
      write(g, "ts.dot", res.abstraction.ts.to_dot());
      write(g, "partition.csv", partition_csv(res.abstraction.ts));
      write(g, "abstraction.json", summary_of(res.abstraction));
      write(g, "buchi.dot", res.buchi.to_dot(names_of(cfg.effective_atoms())));
      write(g, "benchmark_ts.json", ts_to_json(bench.ts));
      write(g, "benchmark_partition.csv", partition_csv(bench.ts));
      Json cert = certificate_json(*res.certificate);
      cert["sigma_bar"] = res.certificate->holds ? Json(res.certificate->sigma / mc_volume(Region(truth.domain()), 4000, 0).value)
                                                 : Json(nullptr);
      write(g, "certificate.json", cert);
      std::cout << "modes: " << res.ident.mode_count() << ", states: " << res.abstraction.ts.size()
                << ", sigma: " << res.certificate->sigma << (res.certificate->holds ? "" : " (not reached)") << "\n";
    } else if (*tables) {
      const ExperimentReport rep = run_tables(cfg, [](const std::string& line) { std::cerr << line << "\n"; });
      write(g, "tables.csv", tables_csv(rep));
      write(g, "tables.md", tables_markdown(rep));
      write(g, "tables.json", report_to_json(rep));
      std::cout << tables_markdown(rep);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 3;
  } catch (const FormatError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 3;
  } catch (const StageError& e) {
    std::cerr << "stage failure: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error (" << e.kind() << "): " << e.what() << "\n";
    return 2;
  }
  return 0;
}
