#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pwabs/abstract.hpp"
#include "pwabs/dynamics.hpp"

namespace pwabs {

/// How the initialization draws candidate affine laws.
enum class CandidateMode {
  MinimalSubset,  // exact fit through N+1 random samples
  Uniform,        // A entries in [-2, 2], b entries over the observed y range
};

struct IdentConfig {
  /// Inlier bound; <= 0 means 3 x estimate_noise_std(data).
  double sigma_hat = 0.0;
  double r = 0.05;
  int J = 2000;
  double beta = 0.1;
  double mu = 0.05;
  double kappa = 1e-6;
  double theta = 0.9;
  /// Neighbourhood radius in joint (x, y) space; <= 0 means 10% of the
  /// domain diameter.
  double ball_radius = 0.0;
  int max_iterations = 50;
  CandidateMode candidate_mode = CandidateMode::MinimalSubset;
  int svm_iterations = 1000;
  double svm_lambda = 1e-3;
  std::uint64_t seed = 7;

  void validate() const;
};

struct AffineFit {
  Mat A;
  Vec b;
};

/// Least-squares affine law over the selected pairs. Throws DegenerateCluster
/// when the regressor [x; 1] is rank deficient.
AffineFit fit_affine(const Dataset& data, std::span<const int> indices);

/// Copy of cfg with the automatic sigma_hat and ball_radius filled in.
IdentConfig resolve_config(const IdentConfig& cfg, const Dataset& data, const Polytope& domain);

/// Median over samples of the residual std of a local affine fit on the
/// nearest neighbours in x.
double estimate_noise_std(const Dataset& data);

struct IdentDiagnostics {
  double sigma_hat = 0.0;
  double ball_radius = 0.0;
  int peel_rounds = 0;
  int iterations = 0;
  int merges = 0;
  int mode_discards = 0;
  int reassigned = 0;
  int no_neighbours = 0;
  int outside_abstraction = 0;
  std::vector<std::string> warnings;
};

struct IdentResult {
  PwaModel model;
  std::vector<std::vector<int>> clusters;  // sorted sample indices per mode
  std::vector<int> unassigned;             // retained but fitting no mode yet
  std::vector<int> discarded;              // removed as unfeasible
  double residual = 0.0;
  IdentDiagnostics diag;

  int mode_count() const { return static_cast<int>(clusters.size()); }
  /// Per sample: mode index, -1 unassigned, -2 discarded.
  std::vector<int> labels(std::size_t n) const;
};

/// Initialization: repeatedly keep the candidate with most inliers, refit, peel its
/// inliers, until fewer than r*K samples remain; then fit boundaries.
IdentResult init_identify(const Dataset& data, const Polytope& domain, const IdentConfig& cfg);

/// Pairwise linear soft-margin separators; region i is the domain cut by
/// every separator that i wins. Requires at least two nonempty clusters.
std::vector<Polytope> fit_boundaries(const Dataset& data, const std::vector<std::vector<int>>& clusters,
                                     const Polytope& domain, const IdentConfig& cfg,
                                     std::vector<std::string>* warnings = nullptr);

/// Moves every sample consistent with at least two modes to the mode holding
/// most of its neighbours in the joint (x, y) ball; ties go to the lower mode.
std::vector<std::vector<int>> reassign_undecidable(const Dataset& data, const PwaModel& model,
                                                   std::vector<std::vector<int>> clusters, const IdentConfig& cfg,
                                                   IdentDiagnostics* diag = nullptr);

struct PruneResult {
  std::vector<std::vector<int>> clusters;
  std::vector<int> unassigned;
  std::vector<int> discarded;
};

/// Samples consistent with no mode: discarded when y is at least sigma_hat
/// away from the footprint of the abstract successors of x's state, otherwise
/// reassigned by neighbourhood vote. Without an abstraction nothing changes.
PruneResult prune_unfeasible(const Dataset& data, const PwaModel& model, std::vector<std::vector<int>> clusters,
                             std::vector<int> unassigned, const FiniteTS* ts, const IdentConfig& cfg,
                             IdentDiagnostics* diag = nullptr);

/// Refinement: merge, reassign, discard and refit with thresholds decayed by
/// theta^l until every parameter change is at most kappa.
IdentResult refine_identify(const Dataset& data, IdentResult init, const FiniteTS* ts, const IdentConfig& cfg);

/// Mean squared residual of the assigned samples under their modes' laws.
double mean_cost(const Dataset& data, const PwaModel& model, const std::vector<std::vector<int>>& clusters);

/// Euclidean distance from x to the closure of P (0 inside).
double distance_to_polytope(const Polytope& P, const Vec& x);

}  // namespace pwabs
