#pragma once

#include <vector>

namespace pwabs::graph {

using Adjacency = std::vector<std::vector<int>>;

/// Strongly connected components (iterative Tarjan). Returns the component id
/// of every vertex; ids are in reverse topological order.
std::vector<int> scc(const Adjacency& g);

/// Vertices from which some vertex in `targets` is reachable (targets
/// included).
std::vector<bool> can_reach(const Adjacency& g, const std::vector<bool>& targets);

/// Vertices reachable from `sources` (sources included).
std::vector<bool> reachable_from(const Adjacency& g, const std::vector<int>& sources);

}  // namespace pwabs::graph
