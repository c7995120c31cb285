#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pwabs/geometry.hpp"

namespace pwabs {

enum class GammaMode { Constant, LogDet };

struct SamplerConfig {
  double B = 1.0;
  double failure_prob = 0.1;
  GammaMode gamma_mode = GammaMode::Constant;
  double gamma = 1.0;  // used in Constant mode
  /// <= 0 means 20% of the domain diameter.
  double lengthscale = 0.0;
  double signal_var = 1.0;
  double jitter = 1e-6;
  std::uint64_t seed = 11;
  int candidate_count = 500;

  void validate() const;
};

/// Zero-mean GP with squared-exponential kernel s^2 exp(-|x-x'|^2 / (2 l^2)).
class GpModel {
 public:
  GpModel(std::vector<Vec> inputs, std::vector<double> targets, double lengthscale, double signal_var,
          double jitter);

  struct Posterior {
    double mean;
    double variance;
  };
  Posterior posterior(const Vec& x) const;

  /// 1/2 log det(I + s^-2 Gram), the information-gain proxy.
  double information_gain() const;

  double kernel(const Vec& a, const Vec& b) const;
  std::size_t size() const { return inputs_.size(); }
  double jitter_used() const { return jitter_; }

 private:
  std::vector<Vec> inputs_;
  double lengthscale_;
  double signal_var_;
  double jitter_;
  Eigen::LLT<Mat> chol_;
  Vec alpha_;
};

GpModel::Posterior gp_posterior(const GpModel& gp, const Vec& x);

/// lambda_t = 2B + 300 gamma_t max(0, log(t / failure_prob))^3.
double lambda_schedule(int t, const SamplerConfig& cfg, double gamma_t);

/// gamma_t for the configured mode given the current GP of a mode.
double gamma_of(const GpModel& gp, const SamplerConfig& cfg);

struct Selection {
  int mode = 0;
  Vec point;
  double acquisition = 0.0;
  std::vector<double> max_mean;  // per mode, over its candidates
};

/// Per mode, the acquisition mean + sqrt(lambda_t) * sd is maximized over
/// candidate_count seeded samples of the mode's region; the mode whose
/// largest posterior mean is smallest wins (lowest index on ties).
Selection select_next(std::span<const GpModel> models, std::span<const Region> regions, int t,
                      const SamplerConfig& cfg);

}  // namespace pwabs
