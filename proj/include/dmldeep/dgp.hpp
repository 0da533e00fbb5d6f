#pragma once

#include "dmldeep/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dmldeep {

enum class DgpMode { surrogate, ingest };

struct DgpConfig {
  std::size_t n = 50'000;
  double theta0 = 0.5;
  double snr = 2.0;
  SnrConvention snr_convention = SnrConvention::total_signal;
  std::vector<ModalitySpec> modality_specs;
  DgpMode mode = DgpMode::surrogate;
  std::uint64_t seed = 0;
};

// Three symmetric modalities named tab/txt/img, as in the benchmark design.
DgpConfig default_dgp_config(std::size_t n, std::uint64_t seed, double explainable_fraction = 1.0,
                             std::size_t feature_dim = 8);

void check_config(const DgpConfig& cfg);

// (v - mean) / sd with the population sd.
Vector standardize_target(const Vector& values);

struct Confounding {
  Vector g0;
  Vector m0;
  double lambda = 0.0;  // m0 = -lambda * Z
  double mu = 0.0;      // g0 =  mu * Z
};

// Z = sum of the standardized targets. lambda sets Var(m0) = snr; mu follows the convention.
Confounding build_confounders(const std::vector<Vector>& standardized_targets, double theta0, double snr,
                              SnrConvention convention = SnrConvention::total_signal);

// Scales for Var(Z) = z_variance, shared by build_confounders and the population formulas.
std::pair<double, double> confounding_scales(double z_variance, double theta0, double snr,
                                             SnrConvention convention);

SemiSynthDataset generate(const DgpConfig& cfg);

struct OracleBounds {
  double r2_d = 0.0;
  double r2_y = 0.0;
  double rmse_d = 0.0;
  double rmse_y = 0.0;
  double ols_theta = 0.0;
  std::optional<double> feasible_r2_d;
  std::optional<double> feasible_r2_y;
};

OracleBounds oracle_bounds(const SemiSynthDataset& data);

// Feasible nuisances E[D|X], E[Y|X] from the surrogate conditional expectations.
std::pair<Vector, Vector> feasible_nuisances(const SemiSynthDataset& data);

// Limit of theta_hat when the nuisances equal E[.|X] and only the explainable
// share of each latent target is observable.
double attenuated_theta_plim(const DgpConfig& cfg);

struct Descriptives {
  std::size_t count = 0;
  double mean = 0.0;
  double std = 0.0;  // ddof = 1
  double min = 0.0;
  double q25 = 0.0;
  double q50 = 0.0;
  double q75 = 0.0;
  double max = 0.0;
};

Descriptives describe(const Vector& v);

struct DescriptiveTable {
  Descriptives y;
  Descriptives d;
};

DescriptiveTable descriptives(const SemiSynthDataset& data);
std::string format_descriptives(const DescriptiveTable& t);

}  // namespace dmldeep
