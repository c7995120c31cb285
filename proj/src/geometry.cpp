#include "pwabs/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "pwabs/error.hpp"
#include "pwabs/lp.hpp"
#include "pwabs/rng.hpp"

namespace pwabs {

// ---------------------------------------------------------------- Polytope

Polytope::Polytope(Mat H, Vec K) : H_(std::move(H)), K_(std::move(K)) {
  if (H_.rows() != K_.size())
    throw DimensionMismatch("polytope: H has " + std::to_string(H_.rows()) + " rows but K has " +
                            std::to_string(K_.size()) + " entries");
  if (!H_.allFinite() || !K_.allFinite()) throw PreconditionViolation("polytope: non-finite coefficients");
}

Polytope Polytope::box(const Vec& lower, const Vec& upper) {
  if (lower.size() != upper.size()) throw DimensionMismatch("box: bound sizes differ");
  const int n = static_cast<int>(lower.size());
  Mat H = Mat::Zero(2 * n, n);
  Vec K(2 * n);
  for (int i = 0; i < n; ++i) {
    H(2 * i, i) = 1.0;
    K(2 * i) = upper(i);
    H(2 * i + 1, i) = -1.0;
    K(2 * i + 1) = -lower(i);
  }
  return Polytope(std::move(H), std::move(K));
}

Polytope Polytope::universe(int dim) { return Polytope(Mat::Zero(0, dim), Vec::Zero(0)); }

bool Polytope::contains(const Vec& x) const {
  if (x.size() != dim()) throw DimensionMismatch("polytope: point dimension mismatch");
  return ((H_ * x - K_).array() < 0.0).all();
}

bool Polytope::contains_closed(const Vec& x, double tol) const {
  if (x.size() != dim()) throw DimensionMismatch("polytope: point dimension mismatch");
  return ((H_ * x - K_).array() <= tol).all();
}

Polytope Polytope::with_halfspace(const Vec& h, double k) const {
  if (h.size() != dim()) throw DimensionMismatch("halfspace dimension mismatch");
  Mat H(H_.rows() + 1, H_.cols());
  Vec K(K_.size() + 1);
  H << H_, h.transpose();
  K << K_, k;
  return Polytope(std::move(H), std::move(K));
}

// ---------------------------------------------------------------- Region

Region::Region(Polytope piece) : dim_(piece.dim()) { pieces_.push_back(std::move(piece)); }

Region::Region(int dim, std::vector<Polytope> pieces) : dim_(dim), pieces_(std::move(pieces)) {
  for (const auto& p : pieces_)
    if (p.dim() != dim_) throw DimensionMismatch("region: pieces of mixed dimension");
}

bool Region::contains(const Vec& x) const {
  return std::any_of(pieces_.begin(), pieces_.end(), [&](const Polytope& p) { return p.contains(x); });
}

bool Region::contains_closed(const Vec& x, double tol) const {
  return std::any_of(pieces_.begin(), pieces_.end(),
                     [&](const Polytope& p) { return p.contains_closed(x, tol); });
}

void Region::append(Polytope piece) {
  if (piece.dim() != dim_) throw DimensionMismatch("region: appended piece has wrong dimension");
  pieces_.push_back(std::move(piece));
}

void Region::append(const Region& other) {
  if (other.dim() != dim_) throw DimensionMismatch("region: appended region has wrong dimension");
  pieces_.insert(pieces_.end(), other.pieces_.begin(), other.pieces_.end());
}

// ---------------------------------------------------------------- BoundingBox

double BoundingBox::volume() const { return (upper - lower).cwiseMax(0.0).prod(); }

bool BoundingBox::overlaps(const BoundingBox& other, double tol) const {
  return ((lower.array() <= other.upper.array() + tol) && (other.lower.array() <= upper.array() + tol)).all();
}

void BoundingBox::extend(const BoundingBox& other) {
  if (lower.size() == 0) {
    *this = other;
    return;
  }
  lower = lower.cwiseMin(other.lower);
  upper = upper.cwiseMax(other.upper);
}

// ---------------------------------------------------------------- LP-backed queries

ChebyshevBall chebyshev_ball(const Polytope& P) {
  const int n = P.dim();
  const int m = P.rows();
  // Rows with a zero normal are either vacuous or contradictory.
  std::vector<int> live;
  for (int i = 0; i < m; ++i) {
    const double norm = P.H().row(i).norm();
    if (norm > 1e-14) {
      live.push_back(i);
    } else if (P.K()(i) <= kStrictTol) {
      return ChebyshevBall{Vec::Zero(n), -1.0};
    }
  }
  // Variables (x, s) with t = t0 + s: maximize t s.t. h_i.x + |h_i| t <= k_i,
  // t <= 1. t0 makes x = 0, s = 0 feasible, so every rhs is nonnegative and
  // the simplex needs no phase 1.
  const int rows = static_cast<int>(live.size()) + 1;
  double t0 = 1.0;
  for (int i : live) t0 = std::min(t0, P.K()(i) / P.H().row(i).norm());
  Mat A = Mat::Zero(rows, n + 1);
  Vec b(rows);
  for (int r = 0; r < static_cast<int>(live.size()); ++r) {
    const int i = live[r];
    const double norm = P.H().row(i).norm();
    A.row(r).head(n) = P.H().row(i);
    A(r, n) = norm;
    b(r) = std::max(0.0, P.K()(i) - norm * t0);
  }
  A(rows - 1, n) = 1.0;
  b(rows - 1) = 1.0 - t0;
  Vec c = Vec::Zero(n + 1);
  c(n) = 1.0;
  const auto res = lp::maximize(c, A, b);
  if (res.status != lp::Status::Optimal) throw NumericalFailure("chebyshev LP did not reach an optimum");
  return ChebyshevBall{res.x.head(n), t0 + res.x(n)};
}

bool is_empty(const Polytope& P, double tol) { return chebyshev_ball(P).radius <= tol; }

bool is_empty(const Region& R, double tol) {
  return std::all_of(R.pieces().begin(), R.pieces().end(), [&](const Polytope& p) { return is_empty(p, tol); });
}

std::optional<double> support(const Polytope& P, const Vec& dir) {
  const auto res = lp::maximize(dir, P.H(), P.K());
  if (res.status == lp::Status::Unbounded) return std::nullopt;
  if (res.status == lp::Status::Infeasible) throw PreconditionViolation("support of an empty polytope");
  return res.objective;
}

BoundingBox bounding_box(const Polytope& P) {
  const int n = P.dim();
  BoundingBox box{Vec(n), Vec(n)};
  for (int d = 0; d < n; ++d) {
    Vec e = Vec::Zero(n);
    e(d) = 1.0;
    const auto hi = support(P, e);
    const auto lo = support(P, -e);
    if (!hi || !lo) throw UnboundedRegion("bounding box of an unbounded polytope");
    box.upper(d) = *hi;
    box.lower(d) = -*lo;
  }
  return box;
}

BoundingBox bounding_box(const Region& R) {
  BoundingBox box;
  for (const auto& p : R.pieces()) box.extend(bounding_box(p));
  if (box.lower.size() == 0) throw UndefinedDistance("bounding box of an empty region");
  return box;
}

bool inside_halfspace(const Polytope& P, const Vec& h, double k, double tol) {
  const auto s = support(P, h);
  return s && *s <= k + tol;
}

Polytope prune_redundant(const Polytope& P) {
  const int m = P.rows();
  if (m <= 1) return P;
  // Normalize rows so duplicates and near-duplicates compare equal.
  std::vector<int> keep;
  Mat Hn(m, P.dim());
  Vec Kn(m);
  for (int i = 0; i < m; ++i) {
    const double norm = P.H().row(i).norm();
    if (norm <= 1e-14) {
      if (P.K()(i) > 0.0) continue;  // vacuous row
      Hn.row(i) = P.H().row(i);
      Kn(i) = P.K()(i);
    } else {
      Hn.row(i) = P.H().row(i) / norm;
      Kn(i) = P.K()(i) / norm;
    }
    bool dup = false;
    for (int j : keep) {
      if ((Hn.row(j) - Hn.row(i)).norm() < 1e-12) {
        Kn(j) = std::min(Kn(j), Kn(i));
        dup = true;
        break;
      }
    }
    if (!dup) keep.push_back(i);
  }
  std::vector<int> final_rows;
  for (std::size_t a = 0; a < keep.size(); ++a) {
    const int i = keep[a];
    // Maximize h_i.x against every other surviving row (including later ones).
    std::vector<int> others;
    for (int j : final_rows) others.push_back(j);
    for (std::size_t b = a + 1; b < keep.size(); ++b) others.push_back(keep[b]);
    Mat A(others.size(), P.dim());
    Vec bb(others.size());
    for (std::size_t r = 0; r < others.size(); ++r) {
      A.row(r) = Hn.row(others[r]);
      bb(r) = Kn(others[r]);
    }
    const auto res = lp::maximize(Hn.row(i).transpose(), A, bb);
    const bool redundant = res.status == lp::Status::Optimal && res.objective <= Kn(i) + 1e-12;
    if (res.status == lp::Status::Infeasible) {
      // The remaining rows are already contradictory; this row cannot matter.
      continue;
    }
    if (!redundant) final_rows.push_back(i);
  }
  if (final_rows.empty()) {
    // Everything was implied: keep one row so emptiness information survives.
    if (!keep.empty()) final_rows.push_back(keep.front());
  }
  Mat H(final_rows.size(), P.dim());
  Vec K(final_rows.size());
  for (std::size_t r = 0; r < final_rows.size(); ++r) {
    H.row(r) = Hn.row(final_rows[r]);
    K(r) = Kn(final_rows[r]);
  }
  return Polytope(std::move(H), std::move(K));
}

Polytope intersect(const Polytope& P, const Polytope& Q, bool prune) {
  if (P.dim() != Q.dim()) throw DimensionMismatch("intersect: dimension mismatch");
  Mat H(P.rows() + Q.rows(), P.dim());
  Vec K(P.rows() + Q.rows());
  H << P.H(), Q.H();
  K << P.K(), Q.K();
  Polytope out(std::move(H), std::move(K));
  return prune ? prune_redundant(out) : out;
}

Region intersect(const Region& P, const Region& Q, bool prune) {
  if (P.dim() != Q.dim()) throw DimensionMismatch("intersect: dimension mismatch");
  Region out(P.dim());
  for (const auto& p : P.pieces())
    for (const auto& q : Q.pieces()) {
      Polytope r = intersect(p, q, false);
      if (is_empty(r)) continue;
      out.append(prune ? prune_redundant(r) : std::move(r));
    }
  return out;
}

namespace {

// p minus a single convex q, appended to `out`.
void subtract_convex(const Polytope& p, const Polytope& q, std::vector<Polytope>& out) {
  if (is_empty(intersect(p, q))) {
    out.push_back(p);
    return;
  }
  const Polytope qq = prune_redundant(q);
  Polytope remaining = p;
  for (int j = 0; j < qq.rows(); ++j) {
    const Vec h = qq.H().row(j).transpose();
    const double k = qq.K()(j);
    Polytope outside = remaining.with_halfspace(-h, -k);
    if (!is_empty(outside)) out.push_back(prune_redundant(outside));
    remaining = remaining.with_halfspace(h, k);
    if (is_empty(remaining)) break;
  }
}

}  // namespace

Region set_difference(const Region& P, const Region& Q) {
  if (P.dim() != Q.dim()) throw DimensionMismatch("set_difference: dimension mismatch");
  std::vector<Polytope> current;
  for (const auto& p : P.pieces())
    if (!is_empty(p)) current.push_back(p);
  for (const auto& q : Q.pieces()) {
    if (is_empty(q)) continue;
    std::vector<Polytope> next;
    for (const auto& p : current) subtract_convex(p, q, next);
    current = std::move(next);
    if (current.empty()) break;
  }
  return Region(P.dim(), std::move(current));
}

Polytope affine_image(const Polytope& P, const Mat& A, const Vec& b) {
  const int n = P.dim();
  if (A.rows() != n || A.cols() != n || b.size() != n) throw DimensionMismatch("affine_image: map size");
  Eigen::JacobiSVD<Mat> svd(A);
  const auto& s = svd.singularValues();
  if (s(n - 1) <= 1e-12 * std::max(1.0, s(0)) || s(0) / s(n - 1) > 1e12)
    throw SingularMatrix("affine_image: map is singular or ill-conditioned");
  const Mat HAinv = P.H() * A.inverse();
  return Polytope(HAinv, P.K() + HAinv * b);
}

Polytope affine_preimage(const Polytope& P, const Mat& A, const Vec& b) {
  if (A.rows() != P.dim() || b.size() != P.dim()) throw DimensionMismatch("affine_preimage: map size");
  return Polytope(P.H() * A, P.K() - P.H() * b);
}

Region affine_preimage(const Region& P, const Mat& A, const Vec& b) {
  Region out(static_cast<int>(A.cols()));
  for (const auto& p : P.pieces()) out.append(affine_preimage(p, A, b));
  return out;
}

// ---------------------------------------------------------------- Monte Carlo

namespace {

struct PieceBox {
  const Polytope* piece;
  BoundingBox box;
};

std::vector<PieceBox> piece_boxes(const Region& R) {
  std::vector<PieceBox> out;
  for (const auto& p : R.pieces()) {
    if (is_empty(p)) continue;
    out.push_back({&p, bounding_box(p)});
  }
  return out;
}

Vec draw_in_box(const BoundingBox& box, Rng& rng) {
  Vec x(box.lower.size());
  for (int d = 0; d < x.size(); ++d) x(d) = box.lower(d) + (box.upper(d) - box.lower(d)) * uniform01(rng);
  return x;
}

}  // namespace

std::vector<Vec> sample_uniform(const Region& R, std::size_t n, std::uint64_t seed) {
  std::vector<Vec> out;
  if (n == 0) return out;
  const auto boxes = piece_boxes(R);
  std::vector<double> weights;
  for (const auto& pb : boxes) weights.push_back(pb.box.volume());
  double total = 0.0;
  for (double w : weights) total += w;
  if (boxes.empty() || total <= 0.0) throw ThinRegion("sample_uniform: region has no interior");

  Rng rng(seed);
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  const std::size_t cap = 2000 * n + 20000;
  out.reserve(n);
  for (std::size_t attempt = 0; out.size() < n; ++attempt) {
    if (attempt >= cap)
      throw ThinRegion("sample_uniform: acceptance rate too low (" + std::to_string(out.size()) + "/" +
                       std::to_string(n) + " after " + std::to_string(cap) + " draws)");
    const auto& pb = boxes[pick(rng)];
    Vec x = draw_in_box(pb.box, rng);
    if (pb.piece->contains(x)) out.push_back(std::move(x));
  }
  return out;
}

VolumeEstimate mc_volume(const Region& R, std::size_t n, std::uint64_t seed) {
  const auto boxes = piece_boxes(R);
  if (boxes.empty() || n == 0) return {};
  double total_box = 0.0;
  for (const auto& pb : boxes) total_box += pb.box.volume();
  if (total_box <= 0.0) return {};
  Rng rng(seed);
  VolumeEstimate est;
  double var = 0.0;
  for (const auto& pb : boxes) {
    const double bv = pb.box.volume();
    if (bv <= 0.0) continue;
    const std::size_t ni = std::max<std::size_t>(16, static_cast<std::size_t>(std::ceil(n * bv / total_box)));
    std::size_t hits = 0;
    for (std::size_t k = 0; k < ni; ++k)
      if (pb.piece->contains(draw_in_box(pb.box, rng))) ++hits;
    const double p = static_cast<double>(hits) / static_cast<double>(ni);
    est.value += bv * p;
    var += bv * bv * p * (1.0 - p) / static_cast<double>(ni);
  }
  est.stderr_ = std::sqrt(var);
  return est;
}

double hausdorff_distance(std::span<const Vec> a, std::span<const Vec> b) {
  if (a.empty() || b.empty()) throw UndefinedDistance("hausdorff: empty point set");
  auto directed = [](std::span<const Vec> from, std::span<const Vec> to) {
    double worst = 0.0;
    for (const auto& x : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& y : to) {
        best = std::min(best, (x - y).squaredNorm());
        if (best <= worst) break;
      }
      worst = std::max(worst, best);
    }
    return std::sqrt(worst);
  };
  return std::max(directed(a, b), directed(b, a));
}

double hausdorff_distance(const Region& P, const Region& Q, std::size_t n, std::uint64_t seed) {
  if (P.dim() != Q.dim()) throw DimensionMismatch("hausdorff: dimension mismatch");
  if (!P.has_pieces() || !Q.has_pieces() || is_empty(P) || is_empty(Q))
    throw UndefinedDistance("hausdorff: empty operand");
  const auto a = sample_uniform(P, n, mix_seed(seed, fingerprint(P)));
  const auto b = sample_uniform(Q, n, mix_seed(seed, fingerprint(Q)));
  return hausdorff_distance(std::span<const Vec>(a), std::span<const Vec>(b));
}

double hausdorff_lower_bound(const BoundingBox& a, const BoundingBox& b) {
  return std::max((a.lower - b.lower).cwiseAbs().maxCoeff(), (a.upper - b.upper).cwiseAbs().maxCoeff());
}

// ---------------------------------------------------------------- hashing

namespace {

void fnv_bytes(std::uint64_t& h, const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
}

}  // namespace

std::uint64_t fingerprint(const Polytope& P) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const std::int64_t shape[2] = {P.H().rows(), P.H().cols()};
  fnv_bytes(h, shape, sizeof(shape));
  fnv_bytes(h, P.H().data(), sizeof(double) * P.H().size());
  fnv_bytes(h, P.K().data(), sizeof(double) * P.K().size());
  return h;
}

std::uint64_t fingerprint(const Region& R) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const std::int64_t dim = R.dim();
  fnv_bytes(h, &dim, sizeof(dim));
  for (const auto& p : R.pieces()) {
    const std::uint64_t ph = fingerprint(p);
    fnv_bytes(h, &ph, sizeof(ph));
  }
  return h;
}

}  // namespace pwabs
