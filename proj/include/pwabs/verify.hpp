#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pwabs/abstract.hpp"

namespace pwabs {

std::vector<int> reach_set(const FiniteTS& ts, std::span<const int> from);

/// Sampled Hausdorff distance between the footprints of the states reachable
/// from all states of each system. Throws UndefinedDistance on an empty side.
double reachability_metric(const FiniteTS& a, const FiniteTS& b, std::size_t n, std::uint64_t seed);

enum class SimulationScope { AllStates, InitialOnly };

enum class VarianceConvention { Linear, Squared };

struct SimulationOptions {
  SimulationScope scope = SimulationScope::AllStates;
  /// States of the left system that must be related; used with InitialOnly.
  std::vector<int> initial;
  std::size_t samples = 100;
  std::uint64_t seed = 0;
};

/// Pairwise observation distances between two systems' footprints, computed
/// lazily from per-state point clouds and memoized. Sink states are at
/// distance 0 from each other and infinitely far from everything else.
class ObservationDistance {
 public:
  ObservationDistance(const FiniteTS& lhs, const FiniteTS& rhs, std::size_t samples, std::uint64_t seed);

  double operator()(int q1, int q2);
  /// true iff distance(q1, q2) <= sigma, skipping the sampled distance when
  /// the box bound already decides it.
  bool within(int q1, int q2, double sigma);
  double lower_bound(int q1, int q2) const;

 private:
  struct Cloud {
    std::vector<Vec> points;
    BoundingBox box;
    bool sink = false;
  };
  static std::vector<Cloud> clouds_of(const FiniteTS& ts, std::size_t samples, std::uint64_t seed);

  std::vector<Cloud> lhs_;
  std::vector<Cloud> rhs_;
  std::vector<double> memo_;  // NaN = not computed
};

/// Greatest relation R contained in `close` such that every successor of q1
/// is matched by some successor of q2 inside R. close is row-major
/// |succ1| x |succ2|.
std::vector<std::vector<bool>> greatest_simulation(const std::vector<std::vector<int>>& succ1,
                                                   const std::vector<std::vector<int>>& succ2,
                                                   std::vector<std::vector<bool>> close);

struct SigmaCertificate {
  double sigma = 0.0;
  bool holds = false;
  std::vector<std::pair<int, int>> witness_relation;
  std::optional<double> delta_bound;
  std::string inputs_digest;
};

/// Checks lhs ≺_sigma rhs by greatest-fixpoint pruning of the observation
/// relation.
SigmaCertificate check_sigma_simulation(const FiniteTS& lhs, const FiniteTS& rhs, double sigma,
                                        const SimulationOptions& opts = {});

/// Same check with a shared distance cache, for sweeps over sigma.
SigmaCertificate check_sigma_simulation(const FiniteTS& lhs, const FiniteTS& rhs, double sigma,
                                        ObservationDistance& dist, const SimulationOptions& opts);

/// Smallest sigma on the grid {step * j : j = 0..max_steps} at which
/// lhs ≺_sigma rhs holds (bisection on the monotone predicate); nullopt if it
/// never holds.
std::optional<double> minimal_sigma(const FiniteTS& lhs, const FiniteTS& rhs, double step, int max_steps,
                                    const SimulationOptions& opts = {});

/// delta = 1 - erf((sigma - epsilon) / sqrt(2 v)) with v = sigma_e + C
/// (Linear) or sigma_e^2 + C^2 (Squared).
double confidence_bound(double sigma, double epsilon, double sigma_e, double C,
                        VarianceConvention convention = VarianceConvention::Linear);

/// 16-hex-digit digest of two serialized transition systems.
std::string digest_pair(const std::string& a, const std::string& b);

}  // namespace pwabs
