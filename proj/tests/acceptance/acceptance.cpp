// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance --cli <pwabs binary> --work-dir <dir> [--only N] [--strict]
//
// The exit status is 0 once every criterion has been evaluated; with --strict
// it is 1 when any criterion fails.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "oracles/generators.hpp"
#include "oracles/oracles.hpp"
#include "pwabs/harness.hpp"

using namespace pwabs;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr double kTrendSlack = 0.005;
constexpr double kMagnitudeLow = 0.5;
constexpr double kMagnitudeHigh = 2.0;
constexpr double kSampleSweepReference[3] = {0.046, 0.042, 0.035};
constexpr double kStepSweepReference[3] = {0.077, 0.068, 0.050};
constexpr double kExactParam = 1e-6;
constexpr double kExactBoundary = 0.02;
constexpr double kNoisyParam = 0.15;
constexpr double kNoisyRegion = 0.1;
constexpr double kQuadratureTol = 1e-9;
constexpr double kHausdorffTol = 0.05;
constexpr double kStderrSlack = 3.0;
constexpr double kSmallCellShare = 0.5;

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_seconds;
  std::function<Outcome()> run;
};

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(4);
  os << x;
  return os.str();
}

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Non-increasing with at most one adjacent rise, itself no larger than the slack.
bool trend_ok(const std::vector<double>& xs) {
  int rises = 0;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    const double up = xs[i + 1] - xs[i];
    if (up > 0.0) {
      ++rises;
      if (up > kTrendSlack) return false;
    }
  }
  return rises <= 1;
}

Outcome table_trends() {
  PipelineConfig cfg;
  cfg.noise_sigma = 0.1;
  cfg.trials = 5;
  const ExperimentReport rep = run_tables(cfg);
  std::vector<double> samples, steps;
  for (const auto& c : rep.cells) (c.table == "samples" ? samples : steps).push_back(c.mean_sigma_bar);
  Outcome o;
  if (samples.size() != 3 || steps.size() != 3) return {false, "unexpected table shape"};
  const bool trends = trend_ok(samples) && trend_ok(steps);
  bool magnitude = true;
  for (int i = 0; i < 3; ++i) {
    magnitude = magnitude && samples[i] >= kMagnitudeLow * kSampleSweepReference[i] && samples[i] <= kMagnitudeHigh * kSampleSweepReference[i];
    magnitude = magnitude && steps[i] >= kMagnitudeLow * kStepSweepReference[i] && steps[i] <= kMagnitudeHigh * kStepSweepReference[i];
  }
  o.pass = trends && magnitude;
  o.detail = "samples 20/40/60: " + fmt(samples[0]) + " " + fmt(samples[1]) + " " + fmt(samples[2]) +
             "; steps 5/10/20: " + fmt(steps[0]) + " " + fmt(steps[1]) + " " + fmt(steps[2]) +
             "; trend " + (trends ? "ok" : "violated") + ", magnitude " + (magnitude ? "ok" : "outside [0.5x, 2x]");
  return o;
}

double boundary_offset(const PwaModel& m) {
  const int left = m.mode(0).b.norm() < m.mode(1).b.norm() ? 0 : 1;
  const Polytope& reg = m.mode(left).region;
  double best = 1e9;
  for (int r = m.domain().rows(); r < reg.rows(); ++r) best = std::min(best, std::abs(reg.K()(r) / reg.H().row(r).norm() - 0.3));
  return best;
}

Outcome noiseless_identification() {
  const PwaModel truth = case_study_model(0.0);
  BlackBox box(truth, 1);
  std::vector<Vec> xs;
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 10; ++j) xs.push_back(v2((i + 0.5) / 20, (j + 0.5) / 10));
  const Dataset d = generate_dataset(box, xs);
  const IdentConfig cfg;
  const auto r = refine_identify(d, init_identify(d, truth.domain(), cfg), nullptr, cfg);
  if (r.mode_count() != 2) return {false, "s = " + std::to_string(r.mode_count())};
  const double err = parameter_metrics(truth, r.model).parameter_error;
  const double off = boundary_offset(r.model);
  return {err <= kExactParam && off <= kExactBoundary,
          "s = 2, parameter error " + fmt(err) + ", boundary offset " + fmt(off)};
}

Outcome noisy_identification() {
  const PwaModel truth = case_study_model(0.1);
  std::vector<double> params, regions;
  std::string modes;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    BlackBox box(truth, seed);
    const Dataset d = generate_dataset(box, sample_uniform(Region(truth.domain()), 500, mix_seed(seed, 9)));
    IdentConfig cfg;
    cfg.seed = seed;
    const auto r = refine_identify(d, init_identify(d, truth.domain(), cfg), nullptr, cfg);
    MetricOptions mo;
    mo.seed = seed;
    const auto m = identification_metrics(truth, r.model, mo);
    params.push_back(m.parameter_error);
    regions.push_back(m.region_error);
    modes += (modes.empty() ? "" : "/") + std::to_string(r.mode_count());
  }
  const double mp = median(params), mr = median(regions);
  return {mp <= kNoisyParam && mr <= kNoisyRegion,
          "median parameter error " + fmt(mp) + ", median region error " + fmt(mr) + ", modes " + modes};
}

Outcome confidence() {
  const double got = confidence_bound(1.0, 0.0, 1.0, 0.0);
  const double quad = oracle::confidence_by_quadrature(1.0, 1.0);
  bool mono = true;
  for (int i = 1; i <= 20; ++i)
    for (int j = 1; j <= 20; ++j) {
      const double gap = 0.1 * i, v = 0.1 * j;
      const double here = confidence_bound(gap, 0.0, v, 0.0);
      mono = mono && confidence_bound(gap + 0.1, 0.0, v, 0.0) < here && confidence_bound(gap, 0.0, v + 0.1, 0.0) > here;
    }
  const bool close = std::abs(got - quad) <= kQuadratureTol && std::abs(got - (1.0 - std::erf(1.0 / std::sqrt(2.0)))) <= kQuadratureTol;
  return {close && mono, "delta " + fmt(got) + " vs quadrature " + fmt(quad) + ", monotone " + (mono ? "yes" : "no")};
}

Outcome classification_oracle() {
  Rng rng(404);
  int mismatches = 0, states = 0;
  for (int c = 0; c < 200; ++c) {
    const ProductAutomaton p = gen::random_product(rng, 1 + c % 6);
    const auto cls = classify_states(p);
    const auto want = oracle::lasso_verdicts(p.succ, p.accepting);
    for (int s = 0; s < p.size(); ++s) {
      const auto& w = want[static_cast<std::size_t>(s)];
      const Verdict expect = !w.some_accepting ? Verdict::Bottom : !w.some_rejecting ? Verdict::Top : Verdict::Undecided;
      mismatches += cls.verdict[static_cast<std::size_t>(s)] == expect ? 0 : 1;
      ++states;
    }
  }
  return {mismatches == 0, std::to_string(mismatches) + " mismatches over " + std::to_string(states) + " product states"};
}

Outcome simulation_oracle() {
  Rng rng(31);
  int mismatches = 0, reflexive_failures = 0;
  for (int c = 0; c < 50; ++c) {
    const int n1 = 1 + c % 5, n2 = 1 + (c / 5) % 5;
    const FiniteTS l = gen::random_ts(rng, n1), r = gen::random_ts(rng, n2);
    SimulationOptions opts;
    opts.seed = static_cast<std::uint64_t>(c);
    ObservationDistance dist(l, r, opts.samples, opts.seed);
    std::vector<double> all;
    for (int a = 0; a < n1; ++a)
      for (int b = 0; b < n2; ++b) all.push_back(dist(a, b));
    std::sort(all.begin(), all.end());
    // threshold between two observed distances; at most 13 close pairs
    const std::size_t k = std::min<std::size_t>(all.size() - 1, 13);
    const double sigma = all.size() == 1 ? all[0] + 1e-9 : 0.5 * (all[k - 1] + all[k]);
    std::vector<std::vector<bool>> close(static_cast<std::size_t>(n1), std::vector<bool>(static_cast<std::size_t>(n2)));
    for (int a = 0; a < n1; ++a)
      for (int b = 0; b < n2; ++b) close[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = dist(a, b) <= sigma;
    const auto want = oracle::brute_force_simulation(l.succ, r.succ, close);
    mismatches += greatest_simulation(l.succ, r.succ, close) == want ? 0 : 1;
    bool related = true;
    for (const auto& row : want) related = related && std::find(row.begin(), row.end(), true) != row.end();
    mismatches += check_sigma_simulation(l, r, sigma, dist, opts).holds == related ? 0 : 1;
    reflexive_failures += check_sigma_simulation(l, l, 0.0).holds ? 0 : 1;
    reflexive_failures += check_sigma_simulation(r, r, 0.0).holds ? 0 : 1;
  }
  return {mismatches == 0 && reflexive_failures == 0,
          std::to_string(mismatches) + " mismatches, " + std::to_string(reflexive_failures) + " reflexivity failures"};
}

Outcome geometry_oracles() {
  Rng rng(101);
  int empty_mismatch = 0, escaped = 0;
  for (int c = 0; c < 100; ++c) {
    const Polytope P = gen::random_polytope(rng, 1 + c % 4);
    empty_mismatch += is_empty(P) == !oracle::nonempty_by_vertices(P.H(), P.K()) ? 0 : 1;
    if (is_empty(P)) continue;
    const Mat A = gen::random_nonsingular(rng);
    const Vec b = v2(uniform01(rng), uniform01(rng));
    const Polytope img = affine_image(P, A, b);
    for (const auto& x : sample_uniform(Region(P), 100, static_cast<std::uint64_t>(c)))
      escaped += img.contains_closed(A * x + b, 1e-9) ? 0 : 1;
  }

  Mat H(3, 2);
  H << -1, 0, 0, -1, 1, 1;
  Vec K(3);
  K << 0, 0, 1;
  const auto tri = mc_volume(Region(Polytope(H, K)), 4000, 2);
  const auto rect = mc_volume(Region(Polytope::box(v2(0, 0), v2(2, 0.5))), 4000, 3);
  const bool volumes = std::abs(tri.value - 0.5) <= kStderrSlack * tri.stderr_ && std::abs(rect.value - 1.0) <= kStderrSlack * rect.stderr_ + 1e-12;

  const Region U(Polytope::box(v2(0, 0), v2(1, 1))), T(Polytope::box(v2(0.3, 0.2), v2(1.3, 1.2)));
  const double h = hausdorff_distance(U, T, 2000, 1);
  const bool haus = std::abs(h - std::hypot(0.3, 0.2)) <= kHausdorffTol;

  return {empty_mismatch == 0 && escaped == 0 && volumes && haus,
          std::to_string(empty_mismatch) + " emptiness mismatches, " + std::to_string(escaped) +
              " image escapes, volumes " + (volumes ? "ok" : "off") + ", hausdorff " + fmt(h)};
}

Outcome refinement_soundness() {
  const PwaModel truth = case_study_model(0.0);
  const auto atoms = case_study_atoms();
  std::vector<std::string> names;
  for (const auto& a : atoms) names.push_back(a.name);
  const auto buchi = to_dba(parse_ltl("G(p1 & F p2)", names), static_cast<int>(atoms.size()), names);
  AbstractionConfig cfg;
  cfg.refinement_cap = 20;
  const Abstraction a = abstract_model(truth, atoms, buchi, cfg);
  const auto& tr = a.trace;
  int rises = 0;
  for (std::size_t k = 0; k + 1 < tr.su_volume.size(); ++k)
    if (tr.su_volume[k + 1] > tr.su_volume[k] + kStderrSlack * std::hypot(tr.su_stderr[k], tr.su_stderr[k + 1])) ++rises;

  int missed = 0;
  for (const auto& x0 : sample_uniform(Region(truth.domain()), 1000, 23)) {
    Vec x = x0;
    int q = a.ts.state_of(x);
    for (int k = 0; k < 20 && q >= 0; ++k) {
      const Vec y = truth.mean_step(x);
      const auto& out = a.ts.succ[static_cast<std::size_t>(q)];
      const int t = truth.domain().contains_closed(y, 0.0) ? a.ts.state_of(y) : a.ts.sink();
      if (t < 0 || !std::binary_search(out.begin(), out.end(), t)) {
        ++missed;
        break;
      }
      if (t == a.ts.sink()) break;
      x = y;
      q = t;
    }
    if (q < 0) ++missed;
  }

  // partition shape: cells on the lines x(1) = 0.3 and x(2) = 0.6 are small
  std::vector<double> vols;
  std::vector<BoundingBox> boxes;
  for (const auto& s : a.ts.states) {
    if (s.obs.sink) continue;
    vols.push_back(mc_volume(s.region, 2000, 1).value);
    boxes.push_back(bounding_box(s.region));
  }
  auto sorted = vols;
  std::sort(sorted.begin(), sorted.end());
  const double med = sorted[sorted.size() / 2];
  int touching = 0, small = 0;
  for (std::size_t i = 0; i < vols.size(); ++i) {
    const auto& b = boxes[i];
    const bool on = (b.lower(0) <= 0.3 + 1e-9 && b.upper(0) >= 0.3 - 1e-9) || (b.lower(1) <= 0.6 + 1e-9 && b.upper(1) >= 0.6 - 1e-9);
    if (!on) continue;
    ++touching;
    small += vols[i] < med ? 1 : 0;
  }
  const double share = touching ? static_cast<double>(small) / touching : 0.0;

  return {rises == 0 && missed == 0 && share >= kSmallCellShare,
          std::to_string(tr.passes) + " passes until S_u = " + fmt(tr.su_volume.back()) + ", " + std::to_string(rises) +
              " volume rises, " + std::to_string(missed) + " uncovered trajectories, " + std::to_string(small) + "/" +
              std::to_string(touching) + " line cells below median volume"};
}

Outcome determinism(const std::string& cli, const fs::path& work) {
  if (cli.empty()) return {false, "no --cli given"};
  const fs::path a = work / "run_a", b = work / "run_b";
  fs::remove_all(a);
  fs::remove_all(b);
  fs::create_directories(work);
  for (const auto& dir : {a, b}) {
    const std::string cmd = "\"" + cli + "\" --seed 11 --out-dir \"" + dir.string() + "\" pipeline > \"" + dir.string() + ".log\" 2>&1";
    if (std::system(cmd.c_str()) != 0) return {false, "pipeline run failed, see " + dir.string() + ".log"};
  }
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  int files = 0, differing = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    if (e.path().extension() != ".json") continue;
    ++files;
    const fs::path other = b / e.path().filename();
    if (!fs::exists(other) || slurp(e.path()) != slurp(other)) ++differing;
  }
  return {files > 0 && differing == 0, std::to_string(files) + " JSON artifacts, " + std::to_string(differing) + " differ"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite"};
  std::string cli;
  std::string work = "acceptance_work";
  int only = 0;
  bool strict = false;
  app.add_option("--cli", cli, "Path to the pwabs executable");
  app.add_option("--work-dir", work, "Scratch directory for CLI runs");
  app.add_option("--only", only, "Run a single criterion");
  app.add_flag("--strict", strict, "Exit 1 when any criterion fails");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {1, "table trends", 15 * 60.0, table_trends},
      {2, "noiseless identification", 30.0, noiseless_identification},
      {3, "noisy identification", 120.0, noisy_identification},
      {4, "confidence bound", 1.0, confidence},
      {5, "classification oracle", 60.0, classification_oracle},
      {6, "simulation oracle", 120.0, simulation_oracle},
      {7, "geometry oracles", 60.0, geometry_oracles},
      {8, "refinement soundness", 300.0, refinement_soundness},
      {9, "determinism", 300.0, [&] { return determinism(cli, fs::path(work)); }},
  };

  int failed = 0, ran = 0;
  for (const auto& c : criteria) {
    if (only && c.id != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.budget_seconds) {
      o.pass = false;
      o.detail += "; over the " + fmt(c.budget_seconds) + " s budget";
    }
    ++ran;
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << "): " << o.detail << " ["
              << fmt(secs) << " s]" << std::endl;
  }
  std::cout << (ran - failed) << " passed, " << failed << " failed" << std::endl;
  return strict && failed ? 1 : 0;
}
