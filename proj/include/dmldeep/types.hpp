#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dmldeep {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

inline constexpr const char* kGeneratorVersion = "dmldeep-dgp/1";

enum class TargetKind { continuous, binary, categorical };
enum class Link { linear, tanh };

// How "signal-to-noise ratio snr" is calibrated for the outcome.
//   total_signal: Var(theta0 * D + g0) = snr, so Var(Y) = snr + 1.
//   structural:   Var(theta0 * m0 + g0) = snr, so Var(Y) = snr + theta0^2 + 1.
// Both set Var(m0) = snr for the treatment.
enum class SnrConvention { total_signal, structural };

std::string to_string(TargetKind kind);
std::string to_string(Link link);
std::string to_string(SnrConvention c);
TargetKind target_kind_from_string(const std::string& s);
Link link_from_string(const std::string& s);
SnrConvention snr_convention_from_string(const std::string& s);

struct ModalitySpec {
  std::string name;
  // 0 marks a target-only modality whose feature block has not been imported yet.
  std::size_t feature_dim = 1;
  TargetKind target_kind = TargetKind::continuous;
  std::size_t categories = 0;  // k for categorical targets
  double explainable_fraction = 1.0;
  Link link = Link::linear;
  // Ingest mode only: CSV with `id,target[,features...]`.
  std::string target_path;
  // Ingest mode only: label for each numeric code, in code order.
  std::vector<std::string> category_codes;
};

struct Manifest {
  double theta0 = 0.5;
  double snr = 2.0;
  std::uint64_t seed = 0;
  double scale_m = 1.0;  // lambda: m0 = -lambda * sum_mod Z_mod
  double scale_g = 1.0;  // mu:     g0 =  mu * sum_mod Z_mod
  SnrConvention snr_convention = SnrConvention::total_signal;
  std::string mode = "surrogate";
  std::vector<ModalitySpec> modality_specs;
  std::string generator_version = kGeneratorVersion;

  const ModalitySpec* find_spec(const std::string& name) const;
};

struct NamedColumn {
  std::string name;
  Vector values;
};

struct OracleColumns {
  Vector g0;
  Vector m0;
  Vector l0;
  Vector eps;
  Vector nu;
  std::vector<NamedColumn> targets;   // raw latent targets per modality
  std::vector<NamedColumn> feasible;  // E[target | features], surrogate mode only

  const Vector* target(const std::string& modality) const;
  const Vector* feasible_target(const std::string& modality) const;
};

struct FeatureBlock {
  std::string name;
  std::vector<std::string> columns;  // column suffixes, e.g. "f0" or "e12"
  Matrix values;                     // n x columns.size()
};

struct SemiSynthDataset {
  Vector y;
  Vector d;
  std::vector<FeatureBlock> blocks;
  std::optional<OracleColumns> oracle;
  Manifest manifest;
  // Row identifiers as written to CSV; empty means 0..n-1.
  std::vector<std::string> ids;

  Index n() const { return y.size(); }
  const FeatureBlock* block(const std::string& name) const;
  FeatureBlock* block(const std::string& name);
  std::vector<std::string> modality_names() const;
  std::string id(Index row) const;

  // Rows in the given order; oracle and manifest carried along.
  SemiSynthDataset subset(std::span<const std::size_t> rows) const;
};

// Horizontal concatenation of the named blocks.
Matrix stack_features(const SemiSynthDataset& data, const std::vector<std::string>& modalities);

struct NuisancePredictions {
  Vector l_hat;
  Vector m_hat;
  // Held-out fold of each row; -1 marks an in-sample prediction.
  std::vector<int> fold_id;
  std::string learner_tag;

  Index size() const { return l_hat.size(); }
  bool out_of_sample() const;
};

struct EffectEstimate {
  double theta_hat = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double alpha = 0.05;
  std::size_t n_used = 0;
  double score_mean = 0.0;
  double denom = 0.0;  // mean((d - m_hat)^2)
};

struct Violation {
  std::string field;
  std::optional<Index> row;
  std::string kind;

  bool operator==(const Violation&) const = default;
  std::string describe() const;
};

// Empty iff every dataset invariant holds.
std::vector<Violation> validate(const SemiSynthDataset& data);

}  // namespace dmldeep
