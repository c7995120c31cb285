#include "pwabs/dynamics.hpp"

#include <limits>

#include "pwabs/error.hpp"

namespace pwabs {

PwaModel::PwaModel(std::vector<PwaMode> modes, Polytope domain, double noise_sigma)
    : modes_(std::move(modes)), domain_(std::move(domain)), noise_sigma_(noise_sigma) {
  if (!(noise_sigma_ >= 0.0)) throw PreconditionViolation("noise_sigma must be >= 0");
  const int n = domain_.dim();
  for (const auto& m : modes_) {
    if (m.A.rows() != n || m.A.cols() != n || m.b.size() != n || m.region.dim() != n)
      throw DimensionMismatch("pwa mode does not match the domain dimension");
    if (!m.A.allFinite() || !m.b.allFinite()) throw PreconditionViolation("pwa mode has non-finite parameters");
  }
}

int PwaModel::mode_of(const Vec& x) const {
  if (x.size() != dim()) throw DimensionMismatch("mode_of: point dimension mismatch");
  if (!domain_.contains_closed(x, 1e-9)) throw OutsideDomain("mode_of: point outside the domain");
  for (int i = 0; i < mode_count(); ++i)
    if (modes_[static_cast<std::size_t>(i)].region.contains_closed(x, 1e-12)) return i;
  int best = -1;
  double best_violation = std::numeric_limits<double>::infinity();
  for (int i = 0; i < mode_count(); ++i) {
    const auto& r = modes_[static_cast<std::size_t>(i)].region;
    const double v = r.rows() == 0 ? 0.0 : (r.H() * x - r.K()).maxCoeff();
    if (v < best_violation) {
      best_violation = v;
      best = i;
    }
  }
  if (best < 0) throw OutsideDomain("mode_of: model has no modes");
  return best;
}

Vec PwaModel::mean_step(const Vec& x) const {
  const auto& m = mode(mode_of(x));
  return m.A * x + m.b;
}

Vec PwaModel::step(const Vec& x, Rng& rng) const {
  Vec y = mean_step(x);
  if (noise_sigma_ > 0.0) {
    std::normal_distribution<double> noise(0.0, noise_sigma_);
    for (int d = 0; d < y.size(); ++d) y(d) += noise(rng);
  }
  return y;
}

bool PwaModel::partition_consistent(std::size_t n, std::uint64_t seed) const {
  for (const auto& x : sample_uniform(Region(domain_), n, seed)) {
    int closures = 0;
    int interiors = 0;
    for (const auto& m : modes_) {
      closures += m.region.contains_closed(x, 1e-12) ? 1 : 0;
      interiors += m.region.contains(x) ? 1 : 0;
    }
    if (closures < 1 || interiors > 1) return false;
  }
  return true;
}

void Dataset::push_back(Vec x, Vec y) {
  xs.push_back(std::move(x));
  ys.push_back(std::move(y));
}

Vec BlackBox::query(const Vec& x) { return model_.step(x, rng_); }

Dataset generate_dataset(BlackBox& box, std::span<const Vec> xs) {
  Dataset out;
  for (const auto& x : xs) out.push_back(x, box.query(x));
  return out;
}

Polytope unit_box(int dim) { return Polytope::box(Vec::Zero(dim), Vec::Ones(dim)); }

PwaModel case_study_model(double noise_sigma) {
  const Polytope domain = unit_box(2);
  Mat A1(2, 2);
  A1 << 1.0, 0.0, 0.0, 0.98;
  Mat A2(2, 2);
  A2 << 0.83, 0.12, 0.12, 0.81;
  Vec b2(2);
  b2 << 0.01, 0.03;
  Vec e1(2);
  e1 << 1.0, 0.0;
  PwaMode left{A1, Vec::Zero(2), domain.with_halfspace(e1, 0.3)};
  PwaMode right{A2, b2, domain.with_halfspace(-e1, -0.3)};
  return PwaModel({left, right}, domain, noise_sigma);
}

}  // namespace pwabs
