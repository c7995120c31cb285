#include <doctest.h>

#include <cmath>

#include "oracles/generators.hpp"
#include "oracles/oracles.hpp"
#include "pwabs/error.hpp"
#include "pwabs/geometry.hpp"

using namespace pwabs;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

Polytope box2(double x0, double y0, double x1, double y1) { return Polytope::box(v2(x0, y0), v2(x1, y1)); }

Polytope triangle() {
  Mat H(3, 2);
  H << -1, 0, 0, -1, 1, 1;
  Vec K(3);
  K << 0, 0, 1;
  return Polytope(H, K);
}

int membership_count(const Region& R, const Vec& x) {
  int c = 0;
  for (const auto& p : R.pieces()) c += p.contains(x) ? 1 : 0;
  return c;
}

}  // namespace

TEST_CASE("is_empty on boxes and contradictions") {
  CHECK_FALSE(is_empty(box2(0, 0, 1, 1)));
  Mat H(2, 1);
  H << 1, -1;
  Vec K(2);
  K << 0, -1;
  CHECK(is_empty(Polytope(H, K)));
  // a segment has no interior
  CHECK(is_empty(box2(0, 0, 1, 1).with_halfspace(v2(0, 1), 0.5).with_halfspace(v2(0, -1), -0.5)));
}

TEST_CASE("is_empty agrees with vertex enumeration") {
  Rng rng(101);
  int empties = 0;
  for (int c = 0; c < 200; ++c) {
    const Polytope P = gen::random_polytope(rng, 1 + c % 4);
    const bool expect = !oracle::nonempty_by_vertices(P.H(), P.K());
    CHECK(is_empty(P) == expect);
    empties += expect ? 1 : 0;
  }
  CHECK(empties > 20);
  CHECK(empties < 180);
}

TEST_CASE("intersect") {
  const Polytope P = box2(0, 0, 1, 1);
  Rng rng(3);
  const Polytope PP = intersect(P, P);
  for (int i = 0; i < 200; ++i) {
    const Vec x = v2(2 * uniform01(rng) - 0.5, 2 * uniform01(rng) - 0.5);
    CHECK(PP.contains(x) == P.contains(x));
  }
  CHECK(is_empty(intersect(P, box2(2, 2, 3, 3))));
  const auto bb = bounding_box(intersect(P, box2(0.5, 0.5, 2, 2)));
  CHECK(bb.lower(0) == doctest::Approx(0.5));
  CHECK(bb.lower(1) == doctest::Approx(0.5));
  CHECK(bb.upper(0) == doctest::Approx(1.0));
  CHECK(bb.upper(1) == doctest::Approx(1.0));
  CHECK_THROWS_AS(intersect(P, Polytope::box(Vec::Zero(3), Vec::Ones(3))), DimensionMismatch);
}

TEST_CASE("set_difference") {
  const Region P(box2(0, 0, 2, 2));
  const Region Q(box2(0, 0, 1, 1));
  CHECK(mc_volume(set_difference(P, Region(2)), 20000, 1).value == doctest::Approx(4.0).epsilon(0.02));
  CHECK_FALSE(set_difference(P, P).has_pieces());
  const Region D = set_difference(P, Q);
  CHECK(std::abs(mc_volume(D, 100000, 2).value - 3.0) <= 0.05);

  Rng rng(5);
  for (int c = 0; c < 20; ++c) {
    const Region A(gen::random_polytope(rng, 2));
    const Region B(gen::random_polytope(rng, 2));
    if (is_empty(A)) continue;
    const Region diff = set_difference(A, B);
    for (int i = 0; i < 200; ++i) {
      const Vec x = v2(2 * uniform01(rng) - 1, 2 * uniform01(rng) - 1);
      CHECK(membership_count(diff, x) <= 1);
      CHECK(diff.contains(x) == (A.contains(x) && !B.contains_closed(x, 0.0)));
    }
  }
}

TEST_CASE("affine_image") {
  const Polytope P = box2(0, 0, 1, 1);
  const Polytope same = affine_image(P, Mat::Identity(2, 2), Vec::Zero(2));
  const auto b0 = bounding_box(same);
  CHECK(b0.upper(1) == doctest::Approx(1.0));
  Mat A1(2, 2);
  A1 << 1.0, 0.0, 0.0, 0.98;
  const auto bb = bounding_box(affine_image(P, A1, Vec::Zero(2)));
  CHECK(bb.lower(0) == doctest::Approx(0.0));
  CHECK(bb.lower(1) == doctest::Approx(0.0));
  CHECK(bb.upper(0) == doctest::Approx(1.0));
  CHECK(bb.upper(1) == doctest::Approx(0.98));
  CHECK_THROWS_AS(affine_image(P, Mat::Zero(2, 2), Vec::Zero(2)), SingularMatrix);

  Rng rng(7);
  for (int c = 0; c < 30; ++c) {
    const Polytope Q = gen::random_polytope(rng, 2);
    if (is_empty(Q)) continue;
    const Mat A = gen::random_nonsingular(rng);
    const Vec b = v2(uniform01(rng), uniform01(rng));
    const Polytope img = affine_image(Q, A, b);
    for (const auto& x : sample_uniform(Region(Q), 100, c)) CHECK(img.contains_closed(A * x + b, 1e-9));
  }
}

TEST_CASE("affine_preimage") {
  const Polytope P = box2(0, 0, 1, 0.98);
  Mat A(2, 2);
  A << 1.0, 0.0, 0.0, 0.98;
  const auto bb = bounding_box(affine_preimage(P, A, Vec::Zero(2)));
  CHECK(bb.upper(1) == doctest::Approx(1.0));
  CHECK(bb.lower(1) == doctest::Approx(0.0));

  Rng rng(9);
  for (int c = 0; c < 10; ++c) {
    const Polytope Q = gen::random_polytope(rng, 2);
    const Mat M = gen::random_nonsingular(rng);
    const Vec b = v2(uniform01(rng) - 0.5, uniform01(rng) - 0.5);
    const Polytope pre = affine_preimage(Q, M, b);
    for (int i = 0; i < 1000; ++i) {
      const Vec x = v2(4 * uniform01(rng) - 2, 4 * uniform01(rng) - 2);
      CHECK(pre.contains(x) == Q.contains(M * x + b));
    }
    if (is_empty(pre)) continue;
    const Polytope back = affine_image(pre, M, b);
    for (const auto& y : sample_uniform(Region(back), 100, c)) CHECK(Q.contains_closed(y, 1e-9));
  }
}

TEST_CASE("sample_uniform") {
  const Region sq(box2(0, 0, 1, 1));
  CHECK(sample_uniform(sq, 0, 1).empty());
  const auto pts = sample_uniform(sq, 1000, 1);
  Vec mean = Vec::Zero(2);
  for (const auto& x : pts) {
    CHECK(sq.contains(x));
    mean += x / 1000.0;
  }
  CHECK(std::abs(mean(0) - 0.5) < 0.05);
  CHECK(std::abs(mean(1) - 0.5) < 0.05);
  CHECK(sample_uniform(sq, 10, 4) == sample_uniform(sq, 10, 4));
  const Polytope sliver = box2(0, 0, 1, 1).with_halfspace(v2(1, -1), 1e-7).with_halfspace(v2(-1, 1), 0.0);
  CHECK_THROWS_AS(sample_uniform(Region(sliver), 10, 1), ThinRegion);
}

TEST_CASE("mc_volume") {
  CHECK(mc_volume(Region(2), 100, 1).value == 0.0);
  const auto sq = mc_volume(Region(box2(0, 0, 1, 1)), 1000, 1);
  CHECK(std::abs(sq.value - 1.0) <= 3 * sq.stderr_ + 1e-12);
  const auto tri = mc_volume(Region(triangle()), 4000, 2);
  CHECK(std::abs(tri.value - 0.5) <= 3 * tri.stderr_);

  // additivity over disjoint parts
  const Region a(box2(0, 0, 0.5, 1));
  const Region b(box2(0.5, 0, 1, 1).with_halfspace(v2(1, 1), 1.5));
  Region ab = a;
  ab.append(b);
  const auto va = mc_volume(a, 4000, 3), vb = mc_volume(b, 4000, 4), vab = mc_volume(ab, 8000, 5);
  const double se = std::sqrt(va.stderr_ * va.stderr_ + vb.stderr_ * vb.stderr_ + vab.stderr_ * vab.stderr_);
  CHECK(std::abs(vab.value - va.value - vb.value) <= 3 * se);
  CHECK_THROWS_AS(mc_volume(Region(Polytope::universe(2)), 10, 1), UnboundedRegion);
}

TEST_CASE("hausdorff_distance") {
  const Region P(box2(0, 0, 1, 1));
  CHECK(hausdorff_distance(P, P, 100, 3) == 0.0);
  // [0,1] and [2,3] on a line, thickened negligibly in the second axis
  const Region L1(box2(0, 0, 1, 1e-3)), L2(box2(2, 0, 3, 1e-3));
  CHECK(std::abs(hausdorff_distance(L1, L2, 100, 1) - 2.0) < 0.05);
  const Region T(box2(0.3, 0.2, 1.3, 1.2));
  CHECK(hausdorff_distance(P, T, 100, 1) >= 0.0);
  const double d = hausdorff_distance(P, T, 2000, 1);
  CHECK(std::abs(d - std::hypot(0.3, 0.2)) < 0.05);
  CHECK_THROWS_AS(hausdorff_distance(P, Region(2), 100, 1), UndefinedDistance);
  std::vector<Vec> a{v2(0, 0)}, b{v2(3, 4)};
  CHECK(hausdorff_distance(a, b) == doctest::Approx(5.0));
}

TEST_CASE("bounding box lower bound never exceeds the distance") {
  Rng rng(13);
  for (int c = 0; c < 20; ++c) {
    const Region A(gen::random_polytope(rng, 1)), B(gen::random_polytope(rng, 1));
    if (is_empty(A) || is_empty(B)) continue;
    const double lb = hausdorff_lower_bound(bounding_box(A), bounding_box(B));
    CHECK(lb <= hausdorff_distance(A, B, 400, c) + 1e-9);
  }
}
