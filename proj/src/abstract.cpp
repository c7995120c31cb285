#include "pwabs/abstract.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pwabs/error.hpp"
#include "pwabs/graph.hpp"
#include "pwabs/rng.hpp"

namespace pwabs {

// ---------------------------------------------------------------- FiniteTS

int FiniteTS::sink() const {
  for (int q = size() - 1; q >= 0; --q)
    if (states[static_cast<std::size_t>(q)].obs.sink) return q;
  return -1;
}

int FiniteTS::state_of(const Vec& x) const {
  for (int q = 0; q < size(); ++q) {
    const auto& s = states[static_cast<std::size_t>(q)];
    if (!s.obs.sink && s.region.contains_closed(x, 1e-12)) return q;
  }
  return -1;
}

std::vector<std::pair<int, int>> FiniteTS::edges() const {
  std::vector<std::pair<int, int>> out;
  for (int q = 0; q < size(); ++q)
    for (int t : succ[static_cast<std::size_t>(q)]) out.emplace_back(q, t);
  return out;
}

std::string FiniteTS::to_dot() const {
  std::ostringstream os;
  os << "digraph ts {\n";
  for (int q = 0; q < size(); ++q) {
    const auto& o = states[static_cast<std::size_t>(q)].obs;
    os << "  q" << q << " [label=\"" << q;
    if (o.sink) os << " sink";
    else os << " m" << o.mode << " L" << o.letter;
    os << "\"];\n";
  }
  for (const auto& [a, b] : edges()) os << "  q" << a << " -> q" << b << ";\n";
  os << "}\n";
  return os.str();
}

// ---------------------------------------------------------------- partition

std::vector<TsState> initial_partition(const PwaModel& model, std::span<const Atom> atoms, std::span<const int> grid) {
  const int n = model.dim();
  if (static_cast<int>(grid.size()) != n) throw DimensionMismatch("initial_partition: grid needs one count per axis");
  for (int g : grid)
    if (g < 1) throw PreconditionViolation("initial_partition: grid counts must be >= 1");
  for (const auto& a : atoms)
    if (a.h.size() != n) throw DimensionMismatch("initial_partition: atom dimension mismatch");

  const BoundingBox dom = bounding_box(model.domain());
  std::vector<Polytope> cells;
  std::vector<int> idx(static_cast<std::size_t>(n), 0);
  while (true) {
    Vec lo(n), hi(n);
    for (int d = 0; d < n; ++d) {
      const double w = (dom.upper(d) - dom.lower(d)) / grid[static_cast<std::size_t>(d)];
      lo(d) = dom.lower(d) + w * idx[static_cast<std::size_t>(d)];
      hi(d) = idx[static_cast<std::size_t>(d)] + 1 == grid[static_cast<std::size_t>(d)] ? dom.upper(d) : lo(d) + w;
    }
    cells.push_back(Polytope::box(lo, hi));
    int d = 0;
    while (d < n && ++idx[static_cast<std::size_t>(d)] == grid[static_cast<std::size_t>(d)]) idx[static_cast<std::size_t>(d++)] = 0;
    if (d == n) break;
  }

  std::vector<TsState> out;
  auto emit = [&](const Polytope& piece, int mode) {
    std::vector<Polytope> work{piece};
    for (const auto& atom : atoms) {
      std::vector<Polytope> next;
      for (const auto& p : work) {
        const Truth t = eval_atoms(Region(p), std::span<const Atom>(&atom, 1)).front();
        if (t != Truth::Mixed) {
          next.push_back(p);
          continue;
        }
        next.push_back(prune_redundant(p.with_halfspace(atom.h, atom.k)));
        next.push_back(prune_redundant(p.with_halfspace(-atom.h, -atom.k)));
      }
      work = std::move(next);
    }
    for (auto& p : work) {
      if (is_empty(p)) continue;
      Region r(std::move(p));
      const auto truths = eval_atoms(r, atoms);
      out.push_back(TsState{std::move(r), Observation{mode, letter_of(truths), false}});
    }
  };

  for (const auto& cell : cells) {
    const Polytope c = prune_redundant(intersect(cell, model.domain()));
    if (is_empty(c)) continue;
    Region covered(n);
    for (int i = 0; i < model.mode_count(); ++i) {
      Polytope piece = intersect(c, model.mode(i).region);
      if (is_empty(piece)) continue;
      piece = prune_redundant(piece);
      if (model.mode_count() >= 3) covered.append(piece);
      emit(piece, i);
    }
    if (model.mode_count() >= 3) {
      // Pairwise separators can leave gaps for three or more modes.
      for (const auto& gap : set_difference(Region(c), covered).pieces())
        emit(gap, model.mode_of(chebyshev_ball(gap).center));
    }
  }
  return out;
}

// ---------------------------------------------------------------- quotient

namespace {

struct StateGeom {
  std::vector<BoundingBox> piece_box;
  std::vector<BoundingBox> piece_image_box;
  BoundingBox box;
  BoundingBox image_box;
  bool leaves_domain = false;
};

StateGeom geometry_of(const PwaModel& model, const TsState& s) {
  StateGeom g;
  if (s.obs.sink) return g;
  const auto& m = model.mode(s.obs.mode);
  const int n = model.dim();
  for (const auto& p : s.region.pieces()) {
    g.piece_box.push_back(bounding_box(p));
    BoundingBox img{Vec(n), Vec(n)};
    for (int d = 0; d < n; ++d) {
      const Vec row = m.A.row(d).transpose();
      img.upper(d) = *support(p, row) + m.b(d);
      img.lower(d) = -*support(p, -row) + m.b(d);
    }
    g.piece_image_box.push_back(img);
    g.box.extend(g.piece_box.back());
    g.image_box.extend(img);
    const auto& dom = model.domain();
    for (int j = 0; j < dom.rows() && !g.leaves_domain; ++j) {
      // p ∩ {h_j (A x + b) > k_j}
      const Vec h = dom.H().row(j).transpose();
      const Vec hA = m.A.transpose() * h;
      if (!is_empty(p.with_halfspace(-hA, -(dom.K()(j) - h.dot(m.b))))) g.leaves_domain = true;
    }
  }
  return g;
}

bool has_edge(const PwaModel& model, const TsState& from, const StateGeom& gf, const TsState& to, const StateGeom& gt) {
  if (!gf.image_box.overlaps(gt.box, 1e-9)) return false;
  const auto& m = model.mode(from.obs.mode);
  for (std::size_t i = 0; i < from.region.pieces().size(); ++i) {
    if (!gf.piece_image_box[i].overlaps(gt.box, 1e-9)) continue;
    for (std::size_t j = 0; j < to.region.pieces().size(); ++j) {
      if (!gf.piece_image_box[i].overlaps(gt.piece_box[j], 1e-9)) continue;
      const Polytope pre = affine_preimage(to.region.pieces()[j], m.A, m.b);
      if (!is_empty(intersect(from.region.pieces()[i], pre))) return true;
    }
  }
  return false;
}

// Builds the quotient over `states` (no sink among them). `known` answers
// edges between states that existed before; it returns -1 when unknown.
template <typename Known>
FiniteTS assemble(const PwaModel& model, std::vector<TsState> states, const std::vector<StateGeom>& geom, Known known) {
  FiniteTS ts;
  const int n = static_cast<int>(states.size());
  ts.succ.assign(static_cast<std::size_t>(n), {});
  bool any_leave = false;
  for (int q = 0; q < n; ++q) {
    auto& out = ts.succ[static_cast<std::size_t>(q)];
    for (int t = 0; t < n; ++t) {
      const int k = known(q, t);
      const bool e = k >= 0 ? k == 1
                            : has_edge(model, states[static_cast<std::size_t>(q)], geom[static_cast<std::size_t>(q)],
                                       states[static_cast<std::size_t>(t)], geom[static_cast<std::size_t>(t)]);
      if (e) out.push_back(t);
    }
    any_leave = any_leave || geom[static_cast<std::size_t>(q)].leaves_domain;
  }
  ts.states = std::move(states);
  if (any_leave) {
    const int sink = n;
    for (int q = 0; q < n; ++q)
      if (geom[static_cast<std::size_t>(q)].leaves_domain) ts.succ[static_cast<std::size_t>(q)].push_back(sink);
    ts.states.push_back(TsState{Region(model.dim()), Observation{-1, 0, true}});
    ts.succ.push_back({sink});
  }
  return ts;
}

std::vector<TsState> without_sink(std::vector<TsState> states) {
  std::erase_if(states, [](const TsState& s) { return s.obs.sink; });
  return states;
}

}  // namespace

FiniteTS build_quotient(const PwaModel& model, std::vector<TsState> states) {
  states = without_sink(std::move(states));
  for (const auto& s : states)
    if (s.obs.mode < 0 || s.obs.mode >= model.mode_count())
      throw PreconditionViolation("build_quotient: state carries an invalid mode label");
  std::vector<StateGeom> geom;
  geom.reserve(states.size());
  for (const auto& s : states) geom.push_back(geometry_of(model, s));
  return assemble(model, std::move(states), geom, [](int, int) { return -1; });
}

// ---------------------------------------------------------------- product

ProductAutomaton build_product(const FiniteTS& ts, const BuchiAutomaton& buchi) {
  ProductAutomaton p;
  const int nb = buchi.size();
  std::vector<int> index(static_cast<std::size_t>(ts.size()) * static_cast<std::size_t>(nb), -1);
  auto intern = [&](int q, int g) {
    auto& slot = index[static_cast<std::size_t>(q) * static_cast<std::size_t>(nb) + static_cast<std::size_t>(g)];
    if (slot < 0) {
      slot = p.size();
      p.states.emplace_back(q, g);
      p.succ.emplace_back();
      const bool sink = ts.states[static_cast<std::size_t>(q)].obs.sink;
      p.accepting.push_back(!sink && buchi.accepting[static_cast<std::size_t>(g)]);
    }
    return slot;
  };
  for (int q = 0; q < ts.size(); ++q) {
    const auto& o = ts.states[static_cast<std::size_t>(q)].obs;
    if (o.sink) continue;
    p.initial.push_back(intern(q, buchi.next(buchi.initial, o.letter)));
  }
  for (std::size_t s = 0; s < p.states.size(); ++s) {
    const auto [q, g] = p.states[s];
    const auto& o = ts.states[static_cast<std::size_t>(q)].obs;
    const int g2 = o.sink ? g : buchi.next(g, o.letter);
    std::vector<int> out;
    for (int t : ts.succ[static_cast<std::size_t>(q)]) out.push_back(intern(t, g2));
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    p.succ[s] = std::move(out);
  }
  return p;
}

Classification classify_states(const ProductAutomaton& product) {
  const int n = product.size();
  const auto& g = product.succ;
  const auto comp = graph::scc(g);
  const int ncomp = n == 0 ? 0 : *std::max_element(comp.begin(), comp.end()) + 1;

  std::vector<int> comp_size(static_cast<std::size_t>(ncomp), 0);
  std::vector<bool> comp_loop(static_cast<std::size_t>(ncomp), false);
  std::vector<bool> comp_acc(static_cast<std::size_t>(ncomp), false);
  for (int v = 0; v < n; ++v) {
    const auto c = static_cast<std::size_t>(comp[static_cast<std::size_t>(v)]);
    ++comp_size[c];
    comp_acc[c] = comp_acc[c] || product.accepting[static_cast<std::size_t>(v)];
    for (int w : g[static_cast<std::size_t>(v)])
      if (w == v) comp_loop[c] = true;
  }
  std::vector<bool> good(static_cast<std::size_t>(n), false);
  for (int v = 0; v < n; ++v) {
    const auto c = static_cast<std::size_t>(comp[static_cast<std::size_t>(v)]);
    good[static_cast<std::size_t>(v)] = comp_acc[c] && (comp_size[c] > 1 || comp_loop[c]);
  }

  // Cycles that avoid the accepting set: SCCs of the non-accepting subgraph.
  graph::Adjacency rej(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v) {
    if (product.accepting[static_cast<std::size_t>(v)]) continue;
    for (int w : g[static_cast<std::size_t>(v)])
      if (!product.accepting[static_cast<std::size_t>(w)]) rej[static_cast<std::size_t>(v)].push_back(w);
  }
  const auto rcomp = graph::scc(rej);
  std::vector<int> rsize(static_cast<std::size_t>(n) + 1, 0);
  for (int v = 0; v < n; ++v)
    if (!product.accepting[static_cast<std::size_t>(v)]) ++rsize[static_cast<std::size_t>(rcomp[static_cast<std::size_t>(v)])];
  std::vector<bool> bad(static_cast<std::size_t>(n), false);
  for (int v = 0; v < n; ++v) {
    const auto sv = static_cast<std::size_t>(v);
    if (g[sv].empty()) {
      bad[sv] = true;  // deadlock
      continue;
    }
    if (product.accepting[sv]) continue;
    const bool self = std::find(rej[sv].begin(), rej[sv].end(), v) != rej[sv].end();
    bad[sv] = rsize[static_cast<std::size_t>(rcomp[sv])] > 1 || self;
  }

  const auto reach_good = graph::can_reach(g, good);
  const auto reach_bad = graph::can_reach(g, bad);
  Classification cls;
  cls.verdict.resize(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v) {
    const auto sv = static_cast<std::size_t>(v);
    if (!reach_good[sv]) {
      cls.verdict[sv] = Verdict::Bottom;
      cls.bot.push_back(v);
    } else if (!reach_bad[sv]) {
      cls.verdict[sv] = Verdict::Top;
      cls.top.push_back(v);
    } else {
      cls.verdict[sv] = Verdict::Undecided;
      cls.undecided.push_back(v);
    }
  }
  return cls;
}

std::vector<int> undecided_ts_states(const ProductAutomaton& product, const Classification& cls) {
  std::vector<int> out;
  for (int v : cls.undecided) out.push_back(product.states[static_cast<std::size_t>(v)].first);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

VolumeEstimate footprint_volume(const FiniteTS& ts, std::span<const int> states, std::size_t n, std::uint64_t seed) {
  VolumeEstimate total;
  double var = 0.0;
  for (int q : states) {
    const auto& r = ts.states[static_cast<std::size_t>(q)].region;
    if (!r.has_pieces()) continue;
    const auto v = mc_volume(r, n, mix_seed(seed, fingerprint(r)));
    total.value += v.value;
    var += v.stderr_ * v.stderr_;
  }
  total.stderr_ = std::sqrt(var);
  return total;
}

// ---------------------------------------------------------------- refinement

namespace {

class Refiner {
 public:
  Refiner(const PwaModel& model, const BuchiAutomaton& buchi, const AbstractionConfig& cfg)
      : model_(model), buchi_(buchi), cfg_(cfg) {
    domain_volume_ = mc_volume(Region(model.domain()), 4 * cfg.volume_samples, cfg.seed).value;
    floor_ = cfg.sliver_fraction * domain_volume_;
  }

  Abstraction run(FiniteTS ts) {
    std::vector<TsState> states = without_sink(ts.states);
    std::vector<StateGeom> geom;
    for (const auto& s : states) geom.push_back(geometry_of(model_, s));
    std::vector<VolumeEstimate> vol;
    for (const auto& s : states) vol.push_back(volume_of(s.region));

    Abstraction out;
    out.ts = std::move(ts);
    classify(out, vol);

    while (out.trace.passes < cfg_.refinement_cap && out.classification.su_volume >= cfg_.eta * domain_volume_) {
      const auto targets = undecided_ts_states(out.product, out.classification);
      if (targets.empty()) break;
      if (static_cast<int>(states.size()) >= cfg_.max_states) {
        out.trace.hit_state_ceiling = true;
        break;
      }
      std::vector<TsState> next;
      std::vector<int> origin;
      bool split_any = false;
      std::vector<bool> is_target(states.size(), false);
      for (int q : targets) is_target[static_cast<std::size_t>(q)] = true;
      for (std::size_t q = 0; q < states.size(); ++q) {
        if (!is_target[q] || static_cast<int>(next.size() + states.size() - q) >= cfg_.max_states) {
          next.push_back(states[q]);
          origin.push_back(static_cast<int>(q));
          continue;
        }
        auto pieces = split_state(states, q, out.ts.succ[q], out.trace);
        if (pieces.size() > 1) split_any = true;
        for (auto& r : pieces) {
          next.push_back(TsState{std::move(r), states[q].obs});
          origin.push_back(pieces.size() == 1 ? static_cast<int>(q) : -1);
        }
      }
      if (!split_any) break;

      std::vector<StateGeom> next_geom;
      std::vector<VolumeEstimate> next_vol;
      for (std::size_t i = 0; i < next.size(); ++i) {
        if (origin[i] >= 0) {
          next_geom.push_back(geom[static_cast<std::size_t>(origin[i])]);
          next_vol.push_back(vol[static_cast<std::size_t>(origin[i])]);
        } else {
          next_geom.push_back(geometry_of(model_, next[i]));
          next_vol.push_back(volume_of(next[i].region));
        }
      }
      const auto& old_succ = out.ts.succ;
      auto known = [&](int a, int b) {
        const int oa = origin[static_cast<std::size_t>(a)];
        const int ob = origin[static_cast<std::size_t>(b)];
        if (oa < 0 || ob < 0) return -1;
        const auto& s = old_succ[static_cast<std::size_t>(oa)];
        return std::binary_search(s.begin(), s.end(), ob) ? 1 : 0;
      };
      out.ts = assemble(model_, next, next_geom, known);
      states = std::move(next);
      geom = std::move(next_geom);
      vol = std::move(next_vol);
      ++out.trace.passes;
      classify(out, vol);
    }
    return out;
  }

 private:
  VolumeEstimate volume_of(const Region& r) const {
    return mc_volume(r, cfg_.volume_samples, mix_seed(cfg_.seed, fingerprint(r)));
  }

  bool sliver(const Region& r) const {
    double box = 0.0;
    for (const auto& p : r.pieces()) box += bounding_box(p).volume();
    if (box < floor_) return true;
    return mc_volume(r, 64, mix_seed(cfg_.seed ^ 0x5a5aULL, fingerprint(r))).value < floor_;
  }

  std::vector<Region> split_state(const std::vector<TsState>& states, std::size_t q, const std::vector<int>& succ,
                                  RefinementTrace& trace) const {
    const auto& s = states[q];
    const auto& m = model_.mode(s.obs.mode);
    std::vector<Region> pieces{s.region};
    for (int t : succ) {
      if (static_cast<std::size_t>(t) >= states.size()) continue;  // sink
      const Region pre = affine_preimage(states[static_cast<std::size_t>(t)].region, m.A, m.b);
      std::vector<Region> next;
      for (auto& r : pieces) {
        Region inside = intersect(r, pre);
        if (!inside.has_pieces()) {
          next.push_back(std::move(r));
          continue;
        }
        Region outside = set_difference(r, pre);
        if (!outside.has_pieces()) {
          next.push_back(std::move(r));
          continue;
        }
        if (sliver(inside) || sliver(outside)) {
          ++trace.merged_slivers;
          next.push_back(std::move(r));
          continue;
        }
        next.push_back(std::move(inside));
        next.push_back(std::move(outside));
      }
      pieces = std::move(next);
    }
    return pieces;
  }

  void classify(Abstraction& a, const std::vector<VolumeEstimate>& vol) const {
    a.product = build_product(a.ts, buchi_);
    a.classification = classify_states(a.product);
    double v = 0.0, var = 0.0;
    for (int q : undecided_ts_states(a.product, a.classification)) {
      if (static_cast<std::size_t>(q) >= vol.size()) continue;  // sink
      v += vol[static_cast<std::size_t>(q)].value;
      var += vol[static_cast<std::size_t>(q)].stderr_ * vol[static_cast<std::size_t>(q)].stderr_;
    }
    a.classification.su_volume = v;
    a.classification.su_stderr = std::sqrt(var);
    a.trace.su_volume.push_back(v);
    a.trace.su_stderr.push_back(std::sqrt(var));
    a.trace.state_counts.push_back(a.ts.size());
  }

  const PwaModel& model_;
  const BuchiAutomaton& buchi_;
  const AbstractionConfig& cfg_;
  double domain_volume_ = 1.0;
  double floor_ = 0.0;
};

}  // namespace

Abstraction refine_abstraction(const PwaModel& model, FiniteTS ts, const BuchiAutomaton& buchi,
                               const AbstractionConfig& cfg) {
  if (!(cfg.eta > 0.0 && cfg.eta < 1.0)) throw PreconditionViolation("refine_abstraction: eta must lie in (0,1)");
  return Refiner(model, buchi, cfg).run(std::move(ts));
}

Abstraction abstract_model(const PwaModel& model, std::span<const Atom> atoms, const BuchiAutomaton& buchi,
                           const AbstractionConfig& cfg) {
  return refine_abstraction(model, build_quotient(model, initial_partition(model, atoms, cfg.grid)), buchi, cfg);
}

}  // namespace pwabs
