#include "pwabs/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "pwabs/error.hpp"
#include "pwabs/graph.hpp"
#include "pwabs/io.hpp"
#include "pwabs/rng.hpp"

namespace pwabs {

std::vector<int> reach_set(const FiniteTS& ts, std::span<const int> from) {
  for (int q : from)
    if (q < 0 || q >= ts.size()) throw PreconditionViolation("reach_set: state index out of range");
  const auto mark = graph::reachable_from(ts.succ, std::vector<int>(from.begin(), from.end()));
  std::vector<int> out;
  for (int q = 0; q < ts.size(); ++q)
    if (mark[static_cast<std::size_t>(q)]) out.push_back(q);
  return out;
}

namespace {

Region reach_footprint(const FiniteTS& ts) {
  std::vector<int> all(static_cast<std::size_t>(ts.size()));
  for (int q = 0; q < ts.size(); ++q) all[static_cast<std::size_t>(q)] = q;
  const int dim = ts.states.empty() ? 0 : [&] {
    for (const auto& s : ts.states)
      if (s.region.dim() > 0) return s.region.dim();
    return 0;
  }();
  Region out(dim);
  for (int q : reach_set(ts, all)) {
    const auto& r = ts.states[static_cast<std::size_t>(q)].region;
    if (r.has_pieces()) out.append(r);
  }
  return out;
}

}  // namespace

double reachability_metric(const FiniteTS& a, const FiniteTS& b, std::size_t n, std::uint64_t seed) {
  const Region ra = reach_footprint(a);
  const Region rb = reach_footprint(b);
  if (!ra.has_pieces() || !rb.has_pieces()) throw UndefinedDistance("reachability_metric: empty reach set");
  return hausdorff_distance(ra, rb, n, seed);
}

// ---------------------------------------------------------------- distances

std::vector<ObservationDistance::Cloud> ObservationDistance::clouds_of(const FiniteTS& ts, std::size_t samples,
                                                                       std::uint64_t seed) {
  std::vector<Cloud> out;
  for (const auto& s : ts.states) {
    Cloud c;
    if (s.obs.sink || !s.region.has_pieces()) {
      c.sink = true;
      out.push_back(std::move(c));
      continue;
    }
    try {
      c.points = sample_uniform(s.region, samples, mix_seed(seed, fingerprint(s.region)));
    } catch (const ThinRegion&) {
      // Degenerate footprint: fall back to the pieces' Chebyshev centres.
      for (const auto& p : s.region.pieces()) c.points.push_back(chebyshev_ball(p).center);
    }
    c.box = BoundingBox{c.points.front(), c.points.front()};
    for (const auto& x : c.points) {
      c.box.lower = c.box.lower.cwiseMin(x);
      c.box.upper = c.box.upper.cwiseMax(x);
    }
    out.push_back(std::move(c));
  }
  return out;
}

ObservationDistance::ObservationDistance(const FiniteTS& lhs, const FiniteTS& rhs, std::size_t samples,
                                         std::uint64_t seed)
    : lhs_(clouds_of(lhs, samples, seed)),
      rhs_(clouds_of(rhs, samples, seed)),
      memo_(lhs_.size() * rhs_.size(), std::numeric_limits<double>::quiet_NaN()) {}

double ObservationDistance::lower_bound(int q1, int q2) const {
  const auto& a = lhs_[static_cast<std::size_t>(q1)];
  const auto& b = rhs_[static_cast<std::size_t>(q2)];
  if (a.sink || b.sink) return a.sink && b.sink ? 0.0 : std::numeric_limits<double>::infinity();
  return hausdorff_lower_bound(a.box, b.box);
}

double ObservationDistance::operator()(int q1, int q2) {
  double& slot = memo_[static_cast<std::size_t>(q1) * rhs_.size() + static_cast<std::size_t>(q2)];
  if (!std::isnan(slot)) return slot;
  const auto& a = lhs_[static_cast<std::size_t>(q1)];
  const auto& b = rhs_[static_cast<std::size_t>(q2)];
  if (a.sink || b.sink) {
    slot = a.sink && b.sink ? 0.0 : std::numeric_limits<double>::infinity();
  } else {
    slot = hausdorff_distance(std::span<const Vec>(a.points), std::span<const Vec>(b.points));
  }
  return slot;
}

bool ObservationDistance::within(int q1, int q2, double sigma) {
  if (lower_bound(q1, q2) > sigma) return false;
  return (*this)(q1, q2) <= sigma;
}

// ---------------------------------------------------------------- fixpoint

std::vector<std::vector<bool>> greatest_simulation(const std::vector<std::vector<int>>& succ1,
                                                   const std::vector<std::vector<int>>& succ2,
                                                   std::vector<std::vector<bool>> rel) {
  const std::size_t n1 = succ1.size();
  const std::size_t n2 = succ2.size();
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t a = 0; a < n1; ++a) {
      for (std::size_t b = 0; b < n2; ++b) {
        if (!rel[a][b]) continue;
        for (int a2 : succ1[a]) {
          bool matched = false;
          for (int b2 : succ2[b])
            if (rel[static_cast<std::size_t>(a2)][static_cast<std::size_t>(b2)]) {
              matched = true;
              break;
            }
          if (!matched) {
            rel[a][b] = false;
            changed = true;
            break;
          }
        }
      }
    }
  }
  return rel;
}

SigmaCertificate check_sigma_simulation(const FiniteTS& lhs, const FiniteTS& rhs, double sigma,
                                        ObservationDistance& dist, const SimulationOptions& opts) {
  if (!(sigma >= 0.0)) throw PreconditionViolation("check_sigma_simulation: sigma must be >= 0");
  const auto n1 = static_cast<std::size_t>(lhs.size());
  const auto n2 = static_cast<std::size_t>(rhs.size());
  std::vector<std::vector<bool>> close(n1, std::vector<bool>(n2, false));
  for (std::size_t a = 0; a < n1; ++a)
    for (std::size_t b = 0; b < n2; ++b) close[a][b] = dist.within(static_cast<int>(a), static_cast<int>(b), sigma);
  const auto rel = greatest_simulation(lhs.succ, rhs.succ, std::move(close));

  SigmaCertificate cert;
  cert.sigma = sigma;
  std::vector<int> required;
  if (opts.scope == SimulationScope::AllStates) {
    for (int q = 0; q < lhs.size(); ++q) required.push_back(q);
  } else {
    required = opts.initial;
  }
  cert.holds = std::all_of(required.begin(), required.end(), [&](int q) {
    const auto& row = rel[static_cast<std::size_t>(q)];
    return std::find(row.begin(), row.end(), true) != row.end();
  });
  for (std::size_t a = 0; a < n1; ++a)
    for (std::size_t b = 0; b < n2; ++b)
      if (rel[a][b]) cert.witness_relation.emplace_back(static_cast<int>(a), static_cast<int>(b));
  cert.inputs_digest = digest_pair(ts_to_json(lhs).dump(), ts_to_json(rhs).dump());
  return cert;
}

SigmaCertificate check_sigma_simulation(const FiniteTS& lhs, const FiniteTS& rhs, double sigma,
                                        const SimulationOptions& opts) {
  ObservationDistance dist(lhs, rhs, opts.samples, opts.seed);
  return check_sigma_simulation(lhs, rhs, sigma, dist, opts);
}

std::optional<double> minimal_sigma(const FiniteTS& lhs, const FiniteTS& rhs, double step, int max_steps,
                                    const SimulationOptions& opts) {
  ObservationDistance dist(lhs, rhs, opts.samples, opts.seed);
  auto holds = [&](int j) { return check_sigma_simulation(lhs, rhs, step * j, dist, opts).holds; };
  if (!holds(max_steps)) return std::nullopt;
  int lo = -1;  // fails (virtual)
  int hi = max_steps;
  while (hi - lo > 1) {
    const int mid = lo + (hi - lo) / 2;
    if (holds(mid)) hi = mid;
    else lo = mid;
  }
  return step * hi;
}

double confidence_bound(double sigma, double epsilon, double sigma_e, double C, VarianceConvention convention) {
  if (!(epsilon >= 0.0) || !(sigma >= epsilon))
    throw PreconditionViolation("confidence_bound: need sigma >= epsilon >= 0");
  const double v = convention == VarianceConvention::Linear ? sigma_e + C : sigma_e * sigma_e + C * C;
  if (!(v > 0.0)) throw PreconditionViolation("confidence_bound: variance term must be positive");
  if (std::isinf(sigma)) return 0.0;
  return 1.0 - std::erf((sigma - epsilon) / std::sqrt(2.0 * v));
}

std::string digest_pair(const std::string& a, const std::string& b) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= 0xff;
    h *= 0x100000001b3ULL;
  };
  feed(a);
  feed(b);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace pwabs
