#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "oracles/generators.hpp"
#include "oracles/oracles.hpp"
#include "pwabs/abstract.hpp"
#include "pwabs/harness.hpp"
#include "pwabs/logic.hpp"
#include "pwabs/verify.hpp"

using namespace pwabs;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

PwaModel single_mode(const Mat& A, const Vec& b) {
  return PwaModel({PwaMode{A, b, unit_box(2)}}, unit_box(2), 0.0);
}

std::vector<std::string> names_of(const std::vector<Atom>& atoms) {
  std::vector<std::string> out;
  for (const auto& a : atoms) out.push_back(a.name);
  return out;
}

BuchiAutomaton automaton(const std::string& text, const std::vector<Atom>& atoms) {
  const auto names = names_of(atoms);
  return to_dba(parse_ltl(text, names), static_cast<int>(atoms.size()), names);
}

bool has_edge(const FiniteTS& ts, int q, int t) {
  const auto& s = ts.succ[static_cast<std::size_t>(q)];
  return std::binary_search(s.begin(), s.end(), t);
}

// Follows noiseless trajectories and counts concrete steps the abstraction
// does not cover.
int missed_steps(const PwaModel& model, const FiniteTS& ts, int runs, int length, std::uint64_t seed) {
  int missed = 0;
  for (const auto& x0 : sample_uniform(Region(model.domain()), static_cast<std::size_t>(runs), seed)) {
    Vec x = x0;
    int q = ts.state_of(x);
    if (q < 0) {
      ++missed;
      continue;
    }
    for (int k = 0; k < length; ++k) {
      const Vec y = model.mean_step(x);
      if (!model.domain().contains_closed(y, 0.0)) {
        if (ts.sink() < 0 || !has_edge(ts, q, ts.sink())) ++missed;
        break;
      }
      const int t = ts.state_of(y);
      if (t < 0 || !has_edge(ts, q, t)) {
        ++missed;
        break;
      }
      x = y;
      q = t;
    }
  }
  return missed;
}

void check_partition(const Classification& c, int n) {
  std::vector<int> seen(static_cast<std::size_t>(n), 0);
  for (int s : c.top) ++seen[static_cast<std::size_t>(s)];
  for (int s : c.bot) ++seen[static_cast<std::size_t>(s)];
  for (int s : c.undecided) ++seen[static_cast<std::size_t>(s)];
  for (int s = 0; s < n; ++s) CHECK(seen[static_cast<std::size_t>(s)] == 1);
}

}  // namespace

TEST_CASE("initial partition") {
  const PwaModel cs = case_study_model(0.0);
  const auto atoms = case_study_atoms();
  const std::vector<int> one{1, 1};
  const auto coarse = initial_partition(cs, atoms, one);
  CHECK(coarse.size() >= 3U);
  for (const auto& s : coarse) {
    CHECK(s.obs.mode >= 0);
    for (Truth t : eval_atoms(s.region, atoms)) CHECK(t != Truth::Mixed);
  }

  const std::vector<int> two{2, 2};
  const auto cells = initial_partition(single_mode(Mat::Identity(2, 2), Vec::Zero(2)), std::vector<Atom>{}, two);
  CHECK(cells.size() == 4U);

  const std::vector<int> ten{10, 10};
  for (const auto& s : initial_partition(cs, atoms, ten))
    for (Truth t : eval_atoms(s.region, atoms)) CHECK(t != Truth::Mixed);
}

TEST_CASE("identity dynamics give every state a self-loop") {
  const PwaModel m = single_mode(Mat::Identity(2, 2), Vec::Zero(2));
  const std::vector<int> grid{3, 3};
  const FiniteTS ts = build_quotient(m, initial_partition(m, std::vector<Atom>{}, grid));
  for (int q = 0; q < ts.size(); ++q) {
    if (ts.states[static_cast<std::size_t>(q)].obs.sink) continue;
    CHECK(has_edge(ts, q, q));
  }
}

TEST_CASE("contraction toward the centre") {
  const PwaModel m = single_mode(0.5 * Mat::Identity(2, 2), v2(0.25, 0.25));
  const std::vector<int> grid{4, 4};
  const FiniteTS ts = build_quotient(m, initial_partition(m, std::vector<Atom>{}, grid));

  // every forward-mapped sample lands in a successor
  for (int q = 0; q < ts.size(); ++q) {
    const auto& st = ts.states[static_cast<std::size_t>(q)];
    if (st.obs.sink) continue;
    for (const auto& x : sample_uniform(st.region, 100, static_cast<std::uint64_t>(q))) {
      const int t = ts.state_of(m.mean_step(x));
      REQUIRE(t >= 0);
      CHECK(has_edge(ts, q, t));
    }
  }

  std::vector<int> all;
  for (int q = 0; q < ts.size(); ++q)
    if (!ts.states[static_cast<std::size_t>(q)].obs.sink) all.push_back(q);
  const auto reach = reach_set(ts, all);
  if (ts.sink() >= 0) CHECK(std::find(reach.begin(), reach.end(), ts.sink()) == reach.end());

  const Vec centre = v2(0.5, 0.5);
  for (int q : all) {
    const std::vector<int> from{q};
    bool hits = false;
    for (int t : reach_set(ts, from)) hits = hits || ts.states[static_cast<std::size_t>(t)].region.contains_closed(centre, 1e-12);
    CHECK(hits);
  }
}

TEST_CASE("case-study strip cells stay in the strip") {
  const PwaModel cs = case_study_model(0.0);
  const auto atoms = case_study_atoms();
  const std::vector<int> grid{10, 10};
  const FiniteTS ts = build_quotient(cs, initial_partition(cs, atoms, grid));
  int strip = 0;
  for (int q = 0; q < ts.size(); ++q) {
    const auto& st = ts.states[static_cast<std::size_t>(q)];
    if (st.obs.sink || st.obs.mode != 0) continue;
    ++strip;
    for (int t : ts.succ[static_cast<std::size_t>(q)]) {
      const auto& tt = ts.states[static_cast<std::size_t>(t)];
      REQUIRE_FALSE(tt.obs.sink);
      CHECK(bounding_box(tt.region).lower(0) < 0.3 - 1e-9);
    }
  }
  CHECK(strip >= 30);
}

TEST_CASE("quotient covers concrete trajectories") {
  const PwaModel cs = case_study_model(0.0);
  const std::vector<int> grid{10, 10};
  const FiniteTS ts = build_quotient(cs, initial_partition(cs, case_study_atoms(), grid));
  CHECK(missed_steps(cs, ts, 1000, 20, 17) == 0);
  for (int q = 0; q < ts.size(); ++q) CHECK_FALSE(ts.succ[static_cast<std::size_t>(q)].empty());
}

TEST_CASE("product construction") {
  const PwaModel cs = case_study_model(0.0);
  const auto atoms = case_study_atoms();
  const std::vector<int> grid{5, 5};
  const FiniteTS ts = build_quotient(cs, initial_partition(cs, atoms, grid));

  const BuchiAutomaton any = automaton("true", atoms);
  const ProductAutomaton flat = build_product(ts, any);
  CHECK(flat.size() <= ts.size() * any.size());
  for (int s = 0; s < flat.size(); ++s) {
    const bool sink = ts.states[static_cast<std::size_t>(flat.states[static_cast<std::size_t>(s)].first)].obs.sink;
    CHECK(flat.accepting[static_cast<std::size_t>(s)] == !sink);
  }

  const BuchiAutomaton b = automaton("G(p1 & F p2)", atoms);
  const ProductAutomaton p = build_product(ts, b);
  CHECK(p.size() <= ts.size() * b.size());
  for (int s = 0; s < p.size(); ++s) {
    const auto [q, g] = p.states[static_cast<std::size_t>(s)];
    const auto& o = ts.states[static_cast<std::size_t>(q)].obs;
    const int g2 = o.sink ? g : b.next(g, o.letter);
    std::vector<int> want;
    for (int t : ts.succ[static_cast<std::size_t>(q)]) want.push_back(t);
    std::vector<int> got;
    for (int s2 : p.succ[static_cast<std::size_t>(s)]) {
      CHECK(p.states[static_cast<std::size_t>(s2)].second == g2);
      got.push_back(p.states[static_cast<std::size_t>(s2)].first);
    }
    std::sort(got.begin(), got.end());
    CHECK(got == want);
  }
}

TEST_CASE("self-loop on p1 without p2 never accepts") {
  const auto atoms = case_study_atoms();
  FiniteTS ts;
  // letter bit i is atom i: p1 true, p2 false
  ts.states.push_back(TsState{Region(Polytope::box(v2(0, 0), v2(0.3, 0.6))), Observation{0, 1, false}});
  ts.succ.push_back({0});
  const BuchiAutomaton b = automaton("G(p1 & F p2)", atoms);
  const ProductAutomaton p = build_product(ts, b);
  for (int s = 0; s < p.size(); ++s) CHECK_FALSE(p.accepting[static_cast<std::size_t>(s)]);
  const auto c = classify_states(p);
  CHECK(c.bot.size() == static_cast<std::size_t>(p.size()));
}

TEST_CASE("trivial classifications") {
  ProductAutomaton acc;
  acc.states = {{0, 0}};
  acc.initial = {0};
  acc.succ = {{0}};
  acc.accepting = {true};
  CHECK(classify_states(acc).top.size() == 1U);
  acc.accepting = {false};
  CHECK(classify_states(acc).bot.size() == 1U);
}

TEST_CASE("classification agrees with exhaustive lasso enumeration") {
  Rng rng(404);
  int counts[3] = {0, 0, 0};
  for (int c = 0; c < 200; ++c) {
    const ProductAutomaton p = gen::random_product(rng, 6);
    const auto cls = classify_states(p);
    check_partition(cls, p.size());
    const auto want = oracle::lasso_verdicts(p.succ, p.accepting);
    for (int s = 0; s < p.size(); ++s) {
      const auto& w = want[static_cast<std::size_t>(s)];
      const Verdict expect = !w.some_accepting ? Verdict::Bottom : !w.some_rejecting ? Verdict::Top : Verdict::Undecided;
      CHECK(cls.verdict[static_cast<std::size_t>(s)] == expect);
      ++counts[static_cast<int>(expect)];
    }
  }
  for (int k : counts) CHECK(k > 50);
}

TEST_CASE("refinement with nothing undecided is a no-op") {
  const PwaModel m = single_mode(Mat::Identity(2, 2), Vec::Zero(2));
  const auto atoms = case_study_atoms();
  const std::vector<int> grid{3, 3};
  const FiniteTS ts = build_quotient(m, initial_partition(m, atoms, grid));
  AbstractionConfig cfg;
  const Abstraction a = refine_abstraction(m, ts, automaton("true", atoms), cfg);
  CHECK(a.trace.passes == 0);
  CHECK(a.ts.size() == ts.size());
  CHECK(a.ts.edges() == ts.edges());
  CHECK(a.classification.undecided.empty());
}

TEST_CASE("case-study refinement") {
  const PwaModel cs = case_study_model(0.0);
  const auto atoms = case_study_atoms();
  AbstractionConfig cfg;
  const Abstraction a = abstract_model(cs, atoms, automaton("G(p1 & F p2)", atoms), cfg);
  const auto& tr = a.trace;
  REQUIRE(tr.su_volume.size() == static_cast<std::size_t>(tr.passes) + 1);
  CHECK(tr.passes >= 1);
  CHECK(tr.passes <= cfg.refinement_cap);
  for (std::size_t k = 0; k + 1 < tr.su_volume.size(); ++k) {
    CAPTURE(k);
    const double se = std::hypot(tr.su_stderr[k], tr.su_stderr[k + 1]);
    CHECK(tr.su_volume[k + 1] <= tr.su_volume[k] + 3.0 * se);
    CHECK(tr.state_counts[k + 1] >= tr.state_counts[k]);
  }
  check_partition(a.classification, a.product.size());

  // footprints tile the domain
  std::vector<int> all;
  for (int q = 0; q < a.ts.size(); ++q)
    if (!a.ts.states[static_cast<std::size_t>(q)].obs.sink) all.push_back(q);
  const auto vol = footprint_volume(a.ts, all, 20000, 5);
  CHECK(std::abs(vol.value - 1.0) <= 3.0 * vol.stderr_ + 1e-9);
  for (const auto& x : sample_uniform(Region(unit_box(2)), 2000, 6)) {
    int inside = 0;
    for (int q : all) inside += a.ts.states[static_cast<std::size_t>(q)].region.contains(x) ? 1 : 0;
    CHECK(inside == 1);
  }

  CHECK(missed_steps(cs, a.ts, 1000, 20, 23) == 0);
}
