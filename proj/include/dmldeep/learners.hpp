#pragma once

#include "dmldeep/boosting.hpp"
#include "dmldeep/fusion.hpp"
#include "dmldeep/ridge.hpp"
#include "dmldeep/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

namespace dmldeep {

struct RidgeParams {
  double penalty = 1.0;
};

// Boosting over [H_E, X_tab] where H_E comes from a fusion net trained on the same rows.
struct EmbeddingParams {
  FusionParams fusion;
  GbtParams gbt;
  std::string tabular_modality = "tab";
};

// Test fixture: returns the oracle nuisances of whatever dataset it predicts on.
struct OracleParams {};

// Predicts the training means of Y and D.
struct ConstantParams {};

using LearnerKind = std::variant<RidgeParams, GbtParams, FusionParams, EmbeddingParams, OracleParams, ConstantParams>;

struct LearnerSpec {
  LearnerKind kind;
  std::uint64_t seed = 0;

  std::string kind_name() const;
};

void check_spec(const LearnerSpec& spec);

nlohmann::json learner_spec_to_json(const LearnerSpec& spec);
LearnerSpec learner_spec_from_json(const nlohmann::json& j);

class FittedLearner {
 public:
  virtual ~FittedLearner() = default;

  // (l_hat, m_hat) for every row of `data`.
  std::pair<Vector, Vector> predict_values(const SemiSynthDataset& data) const;

  const std::string& tag() const { return tag_; }
  const std::vector<std::string>& modalities() const { return modalities_; }
  std::uint64_t training_fingerprint() const { return fingerprint_; }

 protected:
  FittedLearner(std::string tag, std::vector<std::string> modalities, const SemiSynthDataset& train);
  virtual std::pair<Vector, Vector> predict_impl(const SemiSynthDataset& data) const = 0;

 private:
  std::string tag_;
  std::vector<std::string> modalities_;
  std::vector<Index> widths_;
  std::uint64_t fingerprint_ = 0;
};

// Identifies a dataset by its outcome, treatment and row count.
std::uint64_t dataset_fingerprint(const SemiSynthDataset& data);

std::unique_ptr<FittedLearner> fit(const LearnerSpec& spec, const SemiSynthDataset& train,
                                   const std::vector<std::string>& modalities);

// Predictions tagged with `fold_id`; predictions on the training rows are tagged -1.
NuisancePredictions predict(const FittedLearner& fitted, const SemiSynthDataset& data, int fold_id = 0);

// Boosted learners for l and m over [H_E(net), X_tab].
std::unique_ptr<FittedLearner> fit_embedding_model(std::shared_ptr<const FusionNet> net,
                                                   const SemiSynthDataset& train, const GbtParams& gbt,
                                                   const std::string& tabular_modality, std::uint64_t seed);

// The trained network behind a fusion or embedding learner, if any.
const FusionNet* fusion_network(const FittedLearner& fitted);

}  // namespace dmldeep
