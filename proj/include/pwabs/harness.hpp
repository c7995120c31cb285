#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pwabs/abstract.hpp"
#include "pwabs/error.hpp"
#include "pwabs/identify.hpp"
#include "pwabs/io.hpp"
#include "pwabs/sample.hpp"
#include "pwabs/verify.hpp"

namespace pwabs {

/// Error raised by run_pipeline; carries the failing stage and the kind of
/// the underlying error.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error("stage-failure", "[" + stage + "] " + cause.kind() + ": " + cause.what()),
        stage_(std::move(stage)),
        cause_kind_(cause.kind()) {}
  const std::string& stage() const { return stage_; }
  const std::string& cause_kind() const { return cause_kind_; }

 private:
  std::string stage_;
  std::string cause_kind_;
};

struct PipelineConfig {
  IdentConfig ident;
  SamplerConfig sampler;
  AbstractionConfig abstraction;
  std::string formula = "G(p1 & F p2)";
  std::vector<Atom> atoms;  // empty means the case-study atoms
  double noise_sigma = 0.1;
  int trials = 5;
  std::uint64_t seed = 7;
  int initial_sample_count = 100;
  int active_sample_budget = 20;
  /// Refinement passes for the white-box benchmark abstraction.
  int benchmark_refinement_cap = 20;
  double sigma_step = 0.005;
  int sigma_max_steps = 400;
  std::size_t metric_samples = 100;
  /// Prediction-error constant C of the confidence bound; <= 0 means the RMS
  /// residual of the identified model.
  double prediction_bound = 0.0;
  VarianceConvention variance_convention = VarianceConvention::Linear;
  SimulationScope scope = SimulationScope::AllStates;

  void validate() const;
  const std::vector<Atom>& effective_atoms() const;
};

Json config_to_json(const PipelineConfig& cfg);
/// Keys absent from j keep their defaults; unknown keys or bad types throw
/// ConfigError.
PipelineConfig config_from_json(const Json& j);

/// p1: x(1) < 0.3, p2: x(2) > 0.6.
std::vector<Atom> case_study_atoms();

struct PipelineResult {
  Dataset data;
  IdentResult ident;
  Abstraction abstraction;
  BuchiAutomaton buchi;
  std::vector<Vec> active_points;
  std::optional<SigmaCertificate> certificate;
};

/// Initial uniform dataset and model initialization, then per active round:
/// quotient of the current model, model refinement, one GP-selected query.
/// Finishes with model refinement, the refined abstraction and, given a benchmark, the sigma certificate of
/// benchmark against the result at the smallest grid sigma that holds.
PipelineResult run_pipeline(BlackBox& box, const PipelineConfig& cfg, const FiniteTS* benchmark = nullptr);

/// White-box abstraction of the true model, refined benchmark_refinement_cap passes.
Abstraction benchmark_abstraction(const PwaModel& truth, const PipelineConfig& cfg);

struct TrialMetrics {
  double parameter_error = 0.0;
  double region_error = 0.0;
  std::optional<double> sigma;
  std::optional<double> sigma_bar;
  int estimated_modes = 0;
  bool modes_matched = true;
  double seconds = 0.0;
  std::string failure;  // empty when the trial succeeded
};

struct MetricOptions {
  double sigma_step = 0.005;
  int sigma_max_steps = 400;
  std::size_t hausdorff_samples = 100;
  std::uint64_t seed = 0;
};

/// Mode matching by minimum-cost assignment; parameter error sums
/// |A_i - A|_F + |b_i - b|, region error sums sampled Hausdorff distances,
/// sigma_bar is the grid-minimal sigma with benchmark ≺_sigma got over |X|.
TrialMetrics compute_metrics(const PwaModel& truth, const PwaModel& est, const FiniteTS& benchmark,
                             const FiniteTS& got, const MetricOptions& opts = {});

/// Parameter and region errors without the simulation search.
TrialMetrics identification_metrics(const PwaModel& truth, const PwaModel& est, const MetricOptions& opts = {});

/// Parameter error and mode matching alone.
TrialMetrics parameter_metrics(const PwaModel& truth, const PwaModel& est, const MetricOptions& opts = {});

struct TableCell {
  std::string table;  // "samples" or "steps"
  int samples = 0;
  int steps = 0;
  std::vector<TrialMetrics> trials;
  double mean_sigma_bar = 0.0;
  int failures = 0;
};

struct ExperimentReport {
  std::vector<TableCell> cells;
  double seconds = 0.0;
};

/// Sample-count sweep (active samples 20/40/60 at 20 refinement steps) and
/// refinement-step sweep (steps 5/10/20 at 10 samples), cfg.trials each.
ExperimentReport run_tables(const PipelineConfig& cfg,
                            const std::function<void(const std::string&)>& progress = {});

std::string tables_csv(const ExperimentReport& report);
std::string tables_markdown(const ExperimentReport& report);
Json report_to_json(const ExperimentReport& report);

}  // namespace pwabs
