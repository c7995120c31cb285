#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pwabs/dynamics.hpp"
#include "pwabs/geometry.hpp"
#include "pwabs/logic.hpp"

namespace pwabs {

struct Observation {
  int mode = -1;
  Letter letter = 0;
  bool sink = false;

  friend bool operator==(const Observation&, const Observation&) = default;
};

struct TsState {
  Region region;
  Observation obs;
};

/// Finite abstraction: each state owns a concrete footprint. The optional
/// out-of-domain sink has an empty footprint and a self-loop.
struct FiniteTS {
  std::vector<TsState> states;
  std::vector<std::vector<int>> succ;  // sorted successor lists

  int size() const { return static_cast<int>(states.size()); }
  int sink() const;  // index of the sink state or -1
  bool deadlock(int q) const { return succ[static_cast<std::size_t>(q)].empty(); }
  /// Lowest-index non-sink state whose closed footprint contains x, or -1.
  int state_of(const Vec& x) const;
  std::vector<std::pair<int, int>> edges() const;
  std::string to_dot() const;
};

struct AbstractionConfig {
  std::vector<int> grid{10, 10};
  double eta = 0.01;
  int refinement_cap = 20;
  /// Split pieces below this fraction of the domain volume are merged back.
  double sliver_fraction = 1e-6;
  std::size_t volume_samples = 400;
  /// Hard ceiling on |Q|; splitting stops once reached.
  int max_states = 4000;
  std::uint64_t seed = 7;
};

/// Uniform grid cells intersected with every mode region and split on every
/// atom until all atom values are definite. Empty pieces are dropped.
std::vector<TsState> initial_partition(const PwaModel& model, std::span<const Atom> atoms, std::span<const int> grid);

/// Existential quotient: q -> q' iff some point of q maps into q' under the
/// mode of q. States whose image leaves the domain get an edge to a sink.
FiniteTS build_quotient(const PwaModel& model, std::vector<TsState> states);

struct ProductAutomaton {
  std::vector<std::pair<int, int>> states;  // (TS state, Büchi state)
  std::vector<int> initial;
  std::vector<std::vector<int>> succ;
  std::vector<bool> accepting;

  int size() const { return static_cast<int>(states.size()); }
};

/// Synchronous product reading the source TS state's letter. Pairs on the
/// sink are absorbing and never accepting.
ProductAutomaton build_product(const FiniteTS& ts, const BuchiAutomaton& buchi);

enum class Verdict { Top, Bottom, Undecided };

struct Classification {
  std::vector<Verdict> verdict;  // per product state
  std::vector<int> top, bot, undecided;
  double su_volume = 0.0;
  double su_stderr = 0.0;
};

/// Bottom: no accepting lasso reachable. Top: no reachable cycle avoiding the
/// accepting set and no reachable deadlock. Undecided: the rest.
Classification classify_states(const ProductAutomaton& product);

/// Sorted TS states underlying undecided product states.
std::vector<int> undecided_ts_states(const ProductAutomaton& product, const Classification& cls);

struct RefinementTrace {
  std::vector<double> su_volume;  // before each pass, then the final value
  std::vector<double> su_stderr;
  std::vector<int> state_counts;
  int passes = 0;
  int merged_slivers = 0;
  bool hit_state_ceiling = false;
};

struct Abstraction {
  FiniteTS ts;
  ProductAutomaton product;
  Classification classification;
  RefinementTrace trace;
};

/// Predecessor-splitting refinement: while the undecided footprint volume is
/// at least eta times the domain volume and the pass cap is not reached,
/// every TS state under an undecided product state is split against the
/// predecessor set of each of its successors.
Abstraction refine_abstraction(const PwaModel& model, FiniteTS ts, const BuchiAutomaton& buchi,
                               const AbstractionConfig& cfg);

/// initial_partition + build_quotient + refine_abstraction.
Abstraction abstract_model(const PwaModel& model, std::span<const Atom> atoms, const BuchiAutomaton& buchi,
                           const AbstractionConfig& cfg);

/// Monte-Carlo footprint volume of a set of TS states.
VolumeEstimate footprint_volume(const FiniteTS& ts, std::span<const int> states, std::size_t n, std::uint64_t seed);

}  // namespace pwabs
