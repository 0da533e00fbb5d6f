#pragma once

#include "dmldeep/learners.hpp"
#include "dmldeep/types.hpp"

#include <json.hpp>

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace dmldeep {

// Orthogonal PLR score (Y - l - theta (D - m)) (D - m).
Vector score_psi(const Vector& y, const Vector& d, const Vector& l_hat, const Vector& m_hat, double theta);

// Non-orthogonal comparison score (Y - l - theta (D - m)) D.
Vector score_naive(const Vector& y, const Vector& d, const Vector& l_hat, const Vector& m_hat, double theta);

enum class ScoreKind { orthogonal, naive };

// Closed-form root of the mean score with the plug-in sandwich variance.
// Rejects in-sample predictions and treatment residuals with mean square below 1e-8 Var(d).
EffectEstimate solve_theta(const NuisancePredictions& preds, const Vector& y, const Vector& d, double alpha = 0.05);

struct ScoreDiagnostics {
  double psi_mean = 0.0;
  double psi_var = 0.0;
  // Derivative of the mean score in the direction of the standardized l_hat / m_hat.
  double orth_deriv_l = 0.0;
  double orth_deriv_m = 0.0;
  std::optional<double> rate_product;
};

ScoreDiagnostics score_diagnostics(const NuisancePredictions& preds, const Vector& y, const Vector& d, double theta,
                                   const OracleColumns* oracle);

// ||m - m0|| (||m - m0|| + ||l - l0||) sqrt(N) with empirical norms.
double rate_diagnostic(const NuisancePredictions& preds, const Vector& l0, const Vector& m0);

enum class SplitKind { single, kfold };

struct SplitScheme {
  SplitKind kind = SplitKind::single;
  double train_fraction = 0.5;
  std::size_t folds = 5;
  std::size_t repeats = 1;
  std::uint64_t seed = 0;
  // Optional explicit per-repeat seeds; otherwise derived from `seed`.
  std::vector<std::uint64_t> repeat_seeds;

  std::string describe() const;
};

void check_scheme(const SplitScheme& s);
nlohmann::json scheme_to_json(const SplitScheme& s);
SplitScheme scheme_from_json(const nlohmann::json& j);

struct SplitResult {
  EffectEstimate estimate;
  ScoreDiagnostics diagnostics;
  NuisancePredictions predictions;  // aligned with eval_rows
  std::vector<std::size_t> eval_rows;
  std::vector<std::size_t> train_rows;  // single split only
  std::vector<double> fold_theta;       // per-fold roots, cross-fitting only
  std::shared_ptr<const FittedLearner> learner;  // single split only
};

// Rows [0, n) shuffled with `seed`; the first round(n * train_fraction) rows train.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_rows(std::size_t n, double train_fraction,
                                                                          std::uint64_t seed);

SplitResult run_split(const SemiSynthDataset& data, const LearnerSpec& spec, double train_fraction,
                      std::uint64_t split_seed, const std::vector<std::string>& modalities, double alpha = 0.05);

// Pooled out-of-fold predictions with one global moment equation.
SplitResult run_crossfit(const SemiSynthDataset& data, const LearnerSpec& spec, std::size_t folds,
                         std::uint64_t split_seed, const std::vector<std::string>& modalities,
                         std::size_t threads = 1, double alpha = 0.05);

struct RepeatResult {
  std::uint64_t split_seed = 0;
  SplitResult split;
  std::optional<double> r2_y_rel;
  std::optional<double> r2_d_rel;
};

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;  // sample sd
};

MeanSd mean_sd(const std::vector<double>& values);

struct RepeatSummary {
  std::vector<RepeatResult> repeats;
  MeanSd theta;
  std::optional<MeanSd> r2_y_rel;
  std::optional<MeanSd> r2_d_rel;
};

std::vector<std::uint64_t> repeat_seeds(const SplitScheme& s);

// Median aggregation over repeats: theta = median theta_r, se^2 = median(se_r^2 + (theta_r - theta)^2).
EffectEstimate aggregate_repeats(const RepeatSummary& s);

// Runs the scheme `repeats` times with distinct seeds. Relative R^2 uses oracle bounds
// evaluated on the same rows as the predictions.
RepeatSummary repeat_splits(const SemiSynthDataset& data, const LearnerSpec& spec, const SplitScheme& scheme,
                            const std::vector<std::string>& modalities, std::size_t threads = 1,
                            double alpha = 0.05);

struct OrthogonalityResult {
  double deriv_l = 0.0;
  double deriv_m = 0.0;
};

// Central finite-difference Gateaux derivative of the mean score at (theta0, eta0) in bounded
// seeded directions delta(X) = tanh(sum_mod a_mod Z_mod), Z_mod the standardized latent targets.
OrthogonalityResult orthogonality_check(const SemiSynthDataset& data, double t, std::uint64_t seed,
                                        ScoreKind kind = ScoreKind::orthogonal);

nlohmann::json estimate_to_json(const EffectEstimate& e);
nlohmann::json diagnostics_to_json(const ScoreDiagnostics& d);

}  // namespace dmldeep
