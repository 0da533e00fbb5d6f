#pragma once

#include "dmldeep/dml.hpp"
#include "dmldeep/fusion.hpp"
#include "dmldeep/learners.hpp"
#include "dmldeep/types.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace dmldeep {

struct ModelEntry {
  std::string name;
  LearnerSpec spec;
  std::vector<std::string> modalities;
};

struct ModelRow {
  std::string name;
  std::string learner;  // kind name
  std::vector<std::string> modalities;
  std::size_t repeats = 0;
  MeanSd theta;
  std::optional<MeanSd> r2_y_rel;
  std::optional<MeanSd> r2_d_rel;
  // Some repeat scored above the oracle ceiling.
  bool y_above_ceiling = false;
  bool d_above_ceiling = false;
  std::vector<double> theta_values;
};

struct BenchmarkBounds {
  double theta0 = 0.0;
  double ols_theta = 0.0;
  std::optional<double> oracle_r2_y;
  std::optional<double> oracle_r2_d;
  std::optional<double> attenuated_plim;  // surrogate datasets only
};

struct BenchmarkReport {
  std::vector<ModelRow> rows;
  BenchmarkBounds bounds;
  std::string scheme;
  std::string config_digest;
};

// Runs repeat_splits for every model with the same scheme. Repeats of one model run in parallel;
// models run in roster order.
BenchmarkReport run_benchmark(const SemiSynthDataset& data, const std::vector<ModelEntry>& roster,
                              const SplitScheme& scheme, std::size_t threads = 1,
                              const std::string& config_digest = "");

// Bounds row from the full dataset.
BenchmarkBounds benchmark_bounds(const SemiSynthDataset& data);

nlohmann::json report_to_json(const BenchmarkReport& r);

struct EpochPoint {
  std::size_t epoch = 0;
  double theta_hat = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::optional<double> r2_y_rel;
  std::optional<double> r2_d_rel;
};

struct EpochTrace {
  std::vector<EpochPoint> points;
};

// One estimate per logged epoch from its holdout predictions. `l0`/`m0` are the oracle nuisances on
// the holdout rows, or null to skip relative R^2.
EpochTrace epoch_trace(const TrainingLog& log, const Vector& y, const Vector& d, const Vector* l0 = nullptr,
                       const Vector* m0 = nullptr, double alpha = 0.05);

struct TraceRun {
  EpochTrace trace;
  SplitResult split;  // estimate from the returned network on the test rows
};

// Trains a fusion net on one split with the test rows as the logged holdout.
TraceRun run_trace(const SemiSynthDataset& data, const FusionParams& params, std::uint64_t learner_seed,
                   double train_fraction, std::uint64_t split_seed, const std::vector<std::string>& modalities,
                   double alpha = 0.05);

}  // namespace dmldeep
