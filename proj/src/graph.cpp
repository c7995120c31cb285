#include "pwabs/graph.hpp"

#include <algorithm>
#include <utility>

namespace pwabs::graph {

std::vector<int> scc(const Adjacency& g) {
  const int n = static_cast<int>(g.size());
  std::vector<int> index(n, -1), low(n, 0), comp(n, -1);
  std::vector<bool> on_stack(n, false);
  std::vector<int> stack;
  std::vector<std::pair<int, std::size_t>> work;
  int counter = 0;
  int comps = 0;
  for (int root = 0; root < n; ++root) {
    if (index[root] >= 0) continue;
    work.emplace_back(root, 0);
    while (!work.empty()) {
      auto& [v, edge] = work.back();
      if (edge == 0 && index[v] < 0) {
        index[v] = low[v] = counter++;
        stack.push_back(v);
        on_stack[v] = true;
      }
      if (edge < g[v].size()) {
        const int w = g[v][edge++];
        if (index[w] < 0) {
          work.emplace_back(w, 0);
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
        continue;
      }
      if (low[v] == index[v]) {
        int w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          comp[w] = comps;
        } while (w != v);
        ++comps;
      }
      const int done = v;
      work.pop_back();
      if (!work.empty()) {
        const int parent = work.back().first;
        low[parent] = std::min(low[parent], low[done]);
      }
    }
  }
  return comp;
}

std::vector<bool> can_reach(const Adjacency& g, const std::vector<bool>& targets) {
  const std::size_t n = g.size();
  Adjacency rev(n);
  for (std::size_t v = 0; v < n; ++v)
    for (int w : g[v]) rev[static_cast<std::size_t>(w)].push_back(static_cast<int>(v));
  std::vector<bool> mark(targets);
  std::vector<int> queue;
  for (std::size_t v = 0; v < n; ++v)
    if (mark[v]) queue.push_back(static_cast<int>(v));
  while (!queue.empty()) {
    const int v = queue.back();
    queue.pop_back();
    for (int u : rev[static_cast<std::size_t>(v)])
      if (!mark[static_cast<std::size_t>(u)]) {
        mark[static_cast<std::size_t>(u)] = true;
        queue.push_back(u);
      }
  }
  return mark;
}

std::vector<bool> reachable_from(const Adjacency& g, const std::vector<int>& sources) {
  std::vector<bool> mark(g.size(), false);
  std::vector<int> queue;
  for (int s : sources)
    if (!mark[static_cast<std::size_t>(s)]) {
      mark[static_cast<std::size_t>(s)] = true;
      queue.push_back(s);
    }
  while (!queue.empty()) {
    const int v = queue.back();
    queue.pop_back();
    for (int w : g[static_cast<std::size_t>(v)])
      if (!mark[static_cast<std::size_t>(w)]) {
        mark[static_cast<std::size_t>(w)] = true;
        queue.push_back(w);
      }
  }
  return mark;
}

}  // namespace pwabs::graph
