#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pwabs/geometry.hpp"
#include "pwabs/rng.hpp"

namespace pwabs {

struct PwaMode {
  Mat A;
  Vec b;
  Polytope region;
};

/// x_{k+1} = A_i x_k + b_i + e, with i the mode whose region contains x_k and
/// e ~ N(0, noise_sigma^2 I) drawn per component.
class PwaModel {
 public:
  PwaModel() = default;
  PwaModel(std::vector<PwaMode> modes, Polytope domain, double noise_sigma);

  int dim() const { return domain_.dim(); }
  int mode_count() const { return static_cast<int>(modes_.size()); }
  const std::vector<PwaMode>& modes() const { return modes_; }
  const PwaMode& mode(int i) const { return modes_.at(static_cast<std::size_t>(i)); }
  const Polytope& domain() const { return domain_; }
  double noise_sigma() const { return noise_sigma_; }

  /// Lowest-index mode whose closed region contains x. Points of the domain
  /// that fall in no mode closure (gaps left by pairwise separators) go to the
  /// mode with the smallest constraint violation. Throws OutsideDomain.
  int mode_of(const Vec& x) const;

  /// Noiseless map f(x).
  Vec mean_step(const Vec& x) const;
  Vec step(const Vec& x, Rng& rng) const;

  /// Sampling-based partition check: every sampled domain point lies in at
  /// least one mode closure and at most one mode interior.
  bool partition_consistent(std::size_t n, std::uint64_t seed) const;

 private:
  std::vector<PwaMode> modes_;
  Polytope domain_;
  double noise_sigma_ = 0.0;
};

struct Dataset {
  std::vector<Vec> xs;
  std::vector<Vec> ys;
  /// Ground-truth mode of each pair when known (never produced by BlackBox).
  std::optional<std::vector<int>> attributions;

  std::size_t size() const { return xs.size(); }
  int dim() const { return xs.empty() ? 0 : static_cast<int>(xs.front().size()); }
  void push_back(Vec x, Vec y);
};

/// Resettable simulator: queries at arbitrary states, one owned RNG stream.
class BlackBox {
 public:
  BlackBox(PwaModel model, std::uint64_t seed) : model_(std::move(model)), seed_(seed), rng_(seed) {}

  Vec query(const Vec& x);
  const Polytope& domain() const { return model_.domain(); }
  int dim() const { return model_.dim(); }
  BlackBox clone_with_seed(std::uint64_t seed) const { return BlackBox(model_, seed); }

 private:
  PwaModel model_;
  std::uint64_t seed_;
  Rng rng_;
};

Dataset generate_dataset(BlackBox& box, std::span<const Vec> xs);

/// Two-mode planar soft-robot model on [0,1]^2 with the switching line
/// x(1) = 0.3.
PwaModel case_study_model(double noise_sigma = 0.1);

/// Unit box [0,1]^dim.
Polytope unit_box(int dim);

}  // namespace pwabs
