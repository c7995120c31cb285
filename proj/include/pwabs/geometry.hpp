#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace pwabs {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Slack used for every strict-inequality LP test.
inline constexpr double kStrictTol = 1e-9;

/// Open convex polytope {x : H x < K}.
class Polytope {
 public:
  Polytope() = default;
  Polytope(Mat H, Vec K);

  static Polytope box(const Vec& lower, const Vec& upper);
  /// No constraints at all.
  static Polytope universe(int dim);

  int dim() const { return static_cast<int>(H_.cols()); }
  int rows() const { return static_cast<int>(H_.rows()); }
  const Mat& H() const { return H_; }
  const Vec& K() const { return K_; }

  bool contains(const Vec& x) const;
  bool contains_closed(const Vec& x, double tol = 1e-12) const;

  /// Adds the halfspace h.x < k.
  Polytope with_halfspace(const Vec& h, double k) const;

  friend bool operator==(const Polytope& a, const Polytope& b) {
    return a.H_.rows() == b.H_.rows() && a.H_.cols() == b.H_.cols() && a.H_ == b.H_ && a.K_ == b.K_;
  }

 private:
  Mat H_;
  Vec K_;
};

/// Finite union of interior-disjoint polytopes of a common dimension. An empty
/// piece list is the empty set.
class Region {
 public:
  explicit Region(int dim = 0) : dim_(dim) {}
  Region(Polytope piece);  // NOLINT(google-explicit-constructor)
  Region(int dim, std::vector<Polytope> pieces);

  int dim() const { return dim_; }
  const std::vector<Polytope>& pieces() const { return pieces_; }
  bool has_pieces() const { return !pieces_.empty(); }
  bool contains(const Vec& x) const;
  bool contains_closed(const Vec& x, double tol = 1e-12) const;

  void append(Polytope piece);
  void append(const Region& other);

 private:
  int dim_;
  std::vector<Polytope> pieces_;
};

struct BoundingBox {
  Vec lower;
  Vec upper;

  double volume() const;
  double diameter() const { return (upper - lower).norm(); }
  bool overlaps(const BoundingBox& other, double tol = 0.0) const;
  void extend(const BoundingBox& other);
};

struct ChebyshevBall {
  Vec center;
  /// Radius of the largest inscribed ball, capped at 1; negative or zero when
  /// the polytope has no interior.
  double radius = 0.0;
};

ChebyshevBall chebyshev_ball(const Polytope& P);

bool is_empty(const Polytope& P, double tol = kStrictTol);
bool is_empty(const Region& R, double tol = kStrictTol);

/// sup of dir.x over P; nullopt when unbounded. P must be nonempty.
std::optional<double> support(const Polytope& P, const Vec& dir);

/// Tight axis-aligned box by 2N LPs. Throws UnboundedRegion.
BoundingBox bounding_box(const Polytope& P);
BoundingBox bounding_box(const Region& R);

/// P subset of {h.x < k} up to tol (closure-wise).
bool inside_halfspace(const Polytope& P, const Vec& h, double k, double tol = kStrictTol);

/// Removes rows implied by the others, and exact duplicates.
Polytope prune_redundant(const Polytope& P);

Polytope intersect(const Polytope& P, const Polytope& Q, bool prune = false);
/// Pairwise piece intersections with empty results dropped.
Region intersect(const Region& P, const Region& Q, bool prune = true);

/// P minus Q by recursive halfspace peeling; pieces stay interior-disjoint.
Region set_difference(const Region& P, const Region& Q);

/// {A x + b : x in P}; A must be nonsingular (throws SingularMatrix).
Polytope affine_image(const Polytope& P, const Mat& A, const Vec& b);

/// {x : A x + b in P}; valid for any A.
Polytope affine_preimage(const Polytope& P, const Mat& A, const Vec& b);
Region affine_preimage(const Region& P, const Mat& A, const Vec& b);

/// Uniform rejection sampling over the union. Each draw picks a piece with
/// probability proportional to its bounding-box volume, so the result is
/// exactly uniform over the (disjoint) union. Throws ThinRegion when the
/// acceptance budget runs out and UnboundedRegion for unbounded pieces.
std::vector<Vec> sample_uniform(const Region& R, std::size_t n, std::uint64_t seed);

struct VolumeEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
};

/// Monte-Carlo volume: sum over pieces of box volume times hit fraction.
VolumeEstimate mc_volume(const Region& R, std::size_t n, std::uint64_t seed);

/// Symmetric Hausdorff distance between two finite point sets.
double hausdorff_distance(std::span<const Vec> a, std::span<const Vec> b);

/// Sampled Hausdorff distance, n points per side. Each side is sampled with a
/// seed derived from `seed` and the region's own fingerprint, so identical
/// regions yield identical clouds. Throws UndefinedDistance on an empty side.
double hausdorff_distance(const Region& P, const Region& Q, std::size_t n = 100,
                          std::uint64_t seed = 0);

/// Lower bound on the Hausdorff distance of sets with the given tight boxes.
double hausdorff_lower_bound(const BoundingBox& a, const BoundingBox& b);

/// Stable 64-bit content hash (FNV-1a over the raw coefficients).
std::uint64_t fingerprint(const Polytope& P);
std::uint64_t fingerprint(const Region& R);

}  // namespace pwabs
