#include "pwabs/sample.hpp"

#include <cmath>
#include <limits>

#include "pwabs/error.hpp"
#include "pwabs/rng.hpp"

namespace pwabs {

void SamplerConfig::validate() const {
  if (!(failure_prob > 0.0 && failure_prob < 1.0)) throw ConfigError("sampler.failure_prob must lie in (0, 1)");
  if (candidate_count < 1) throw ConfigError("sampler.candidate_count must be >= 1");
  if (!(signal_var > 0.0) || !(jitter >= 0.0)) throw ConfigError("sampler.signal_var must be > 0 and jitter >= 0");
  if (!(B >= 0.0) || !(gamma >= 0.0)) throw ConfigError("sampler.B and sampler.gamma must be >= 0");
}

GpModel::GpModel(std::vector<Vec> inputs, std::vector<double> targets, double lengthscale, double signal_var,
                 double jitter)
    : inputs_(std::move(inputs)), lengthscale_(lengthscale), signal_var_(signal_var), jitter_(jitter) {
  if (inputs_.size() != targets.size()) throw DimensionMismatch("GpModel: inputs and targets differ in length");
  if (!(lengthscale_ > 0.0) || !(signal_var_ > 0.0)) throw PreconditionViolation("GpModel: kernel parameters must be > 0");
  const auto n = static_cast<Eigen::Index>(inputs_.size());
  Mat gram(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= i; ++j)
      gram(i, j) = gram(j, i) = kernel(inputs_[static_cast<std::size_t>(i)], inputs_[static_cast<std::size_t>(j)]);
  Vec y(n);
  for (Eigen::Index i = 0; i < n; ++i) y(i) = targets[static_cast<std::size_t>(i)];
  double j = jitter_;
  for (int attempt = 0; attempt < 10; ++attempt) {
    chol_.compute(gram + j * Mat::Identity(n, n));
    if (chol_.info() == Eigen::Success) {
      jitter_ = j;
      alpha_ = chol_.solve(y);
      return;
    }
    j = j > 0.0 ? 10.0 * j : 1e-12;
  }
  throw NumericalFailure("GpModel: Cholesky failed after jitter escalation");
}

double GpModel::kernel(const Vec& a, const Vec& b) const {
  return signal_var_ * std::exp(-(a - b).squaredNorm() / (2.0 * lengthscale_ * lengthscale_));
}

GpModel::Posterior GpModel::posterior(const Vec& x) const {
  if (inputs_.empty()) return {0.0, signal_var_};
  Vec k(static_cast<Eigen::Index>(inputs_.size()));
  for (std::size_t i = 0; i < inputs_.size(); ++i) k(static_cast<Eigen::Index>(i)) = kernel(x, inputs_[i]);
  const Vec v = chol_.matrixL().solve(k);
  return {k.dot(alpha_), std::max(0.0, signal_var_ - v.squaredNorm())};
}

double GpModel::information_gain() const {
  const auto n = static_cast<Eigen::Index>(inputs_.size());
  if (n == 0) return 0.0;
  Mat gram(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      gram(i, j) = kernel(inputs_[static_cast<std::size_t>(i)], inputs_[static_cast<std::size_t>(j)]);
  Eigen::LLT<Mat> llt(Mat::Identity(n, n) + gram / signal_var_);
  if (llt.info() != Eigen::Success) throw NumericalFailure("information_gain: factorization failed");
  return llt.matrixLLT().diagonal().array().log().sum();
}

GpModel::Posterior gp_posterior(const GpModel& gp, const Vec& x) { return gp.posterior(x); }

double lambda_schedule(int t, const SamplerConfig& cfg, double gamma_t) {
  if (t < 1) throw PreconditionViolation("lambda_schedule: t must be >= 1");
  const double lg = std::max(0.0, std::log(static_cast<double>(t) / cfg.failure_prob));
  return 2.0 * cfg.B + 300.0 * gamma_t * lg * lg * lg;
}

double gamma_of(const GpModel& gp, const SamplerConfig& cfg) {
  return cfg.gamma_mode == GammaMode::Constant ? cfg.gamma : gp.information_gain();
}

Selection select_next(std::span<const GpModel> models, std::span<const Region> regions, int t,
                      const SamplerConfig& cfg) {
  cfg.validate();
  if (models.empty() || models.size() != regions.size())
    throw PreconditionViolation("select_next: need one GP per region");
  Selection out;
  double best_mean = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < models.size(); ++i) {
    const double lam = lambda_schedule(t, cfg, gamma_of(models[i], cfg));
    const auto cands = sample_uniform(regions[i], static_cast<std::size_t>(cfg.candidate_count),
                                      mix_seed(mix_seed(cfg.seed, static_cast<std::uint64_t>(t)), i));
    double max_mean = -std::numeric_limits<double>::infinity();
    double best_acq = -std::numeric_limits<double>::infinity();
    Vec arg;
    for (const auto& x : cands) {
      const auto p = models[i].posterior(x);
      max_mean = std::max(max_mean, p.mean);
      const double acq = p.mean + std::sqrt(lam) * std::sqrt(p.variance);
      if (acq > best_acq) {
        best_acq = acq;
        arg = x;
      }
    }
    out.max_mean.push_back(max_mean);
    if (max_mean < best_mean) {
      best_mean = max_mean;
      out.mode = static_cast<int>(i);
      out.point = arg;
      out.acquisition = best_acq;
    }
  }
  return out;
}

}  // namespace pwabs
