#pragma once

#include "dmldeep/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dmldeep {

enum class Activation { relu, tanh, identity };
std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct EncoderArch {
  std::string modality;
  std::vector<std::size_t> widths;
};

// Middle-fusion architecture: one MLP encoder per modality, a fusion layer
// producing the embedding H_E, and two linear heads for l_hat and m_hat.
struct FusionArch {
  std::vector<std::size_t> encoder_widths{32};  // used for modalities without an override
  std::vector<EncoderArch> encoders;            // per-modality overrides
  std::size_t embedding_dim = 16;
  Activation activation = Activation::relu;

  const std::vector<std::size_t>& widths_for(const std::string& modality) const;
};

void check_arch(const FusionArch& arch);

enum class EpochSelection { min_holdout_loss, last_epoch };

struct FusionParams {
  FusionArch arch;
  std::size_t epochs = 40;
  std::size_t batch_size = 64;
  double step_size = 0.01;
  double weight_init_scale = 1.0;
  EpochSelection selection = EpochSelection::min_holdout_loss;
  // Share of the training rows held back for epoch selection when fitting through a learner.
  double validation_fraction = 0.2;
};

void check_params(const FusionParams& p);

struct DenseLayer {
  Matrix weight;  // fan_in x fan_out
  Vector bias;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double holdout_loss = 0.0;
  double holdout_rmse_l = 0.0;
  double holdout_rmse_m = 0.0;
  Vector holdout_l_hat;
  Vector holdout_m_hat;
};

struct TrainingLog {
  std::optional<double> initial_holdout_loss;
  std::vector<EpochRecord> epochs;
  std::size_t selected_epoch = 0;
};

// sqrt(mean((d - m_hat)^2)) * sqrt(mean((y - l_hat)^2)).
double combined_loss(const Vector& l_hat, const Vector& m_hat, const Vector& y, const Vector& d);

class FusionNet {
 public:
  struct Input {
    std::string modality;
    std::size_t dim = 0;
  };

  FusionNet(FusionArch arch, std::vector<Input> inputs, std::uint64_t seed, double init_scale = 1.0);

  const FusionArch& arch() const { return arch_; }
  const std::vector<Input>& inputs() const { return inputs_; }
  std::vector<std::string> modalities() const;

  // Per-column affine input normalization (x - center) / scale.
  void set_normalization(const SemiSynthDataset& train);

  std::pair<Vector, Vector> predict(const SemiSynthDataset& data) const;
  Matrix embed(const SemiSynthDataset& data) const;
  double loss(const SemiSynthDataset& data) const;

  // Combined loss over all rows of `data` and its gradient, flattened in parameter order.
  double loss_and_gradient(const SemiSynthDataset& data, std::vector<double>& gradient) const;

  // Layer-major order: encoders in input order, fusion layer, l head, m head; row-major weights then bias.
  std::vector<double> parameters() const;
  void set_parameters(const std::vector<double>& flat);
  std::size_t parameter_count() const;

  std::vector<DenseLayer>& encoder(std::size_t k) { return encoders_[k]; }
  DenseLayer& fusion_layer() { return fusion_; }
  DenseLayer& head_l() { return head_l_; }
  DenseLayer& head_m() { return head_m_; }

  nlohmann::json to_json() const;
  static FusionNet from_json(const nlohmann::json& j);

  TrainingLog log;

 private:
  friend FusionNet train_fusion(const FusionParams&, std::uint64_t, const SemiSynthDataset&,
                                const SemiSynthDataset*, const std::vector<std::string>&);

  struct Cache {
    std::vector<std::vector<Matrix>> encoder_acts;  // per encoder: input, then each layer output
    Matrix concat;
    Matrix embedding;
    Vector l_hat;
    Vector m_hat;
  };
  struct Gradient {
    std::vector<std::vector<DenseLayer>> encoders;
    DenseLayer fusion;
    DenseLayer head_l;
    DenseLayer head_m;
  };

  std::vector<Matrix> normalized_inputs(const SemiSynthDataset& data, const std::vector<Index>* rows) const;
  void forward(const std::vector<Matrix>& inputs, Cache& cache) const;
  double backward(const Cache& cache, const Vector& y, const Vector& d, Gradient& grad) const;
  Gradient zero_gradient() const;
  void apply(const Gradient& grad, double step);
  static void flatten(const std::vector<const DenseLayer*>& layers, std::vector<double>& out);
  std::vector<const DenseLayer*> layer_list(const Gradient* g) const;

  FusionArch arch_;
  std::vector<Input> inputs_;
  std::vector<Eigen::RowVectorXd> center_;
  std::vector<Eigen::RowVectorXd> scale_;
  std::vector<std::vector<DenseLayer>> encoders_;
  DenseLayer fusion_;
  DenseLayer head_l_;
  DenseLayer head_m_;
};

// Mini-batch gradient descent on the combined loss. With a holdout, every epoch logs holdout
// losses and predictions, and `params.selection` picks the returned weights.
FusionNet train_fusion(const FusionParams& params, std::uint64_t seed, const SemiSynthDataset& train,
                       const SemiSynthDataset* holdout, const std::vector<std::string>& modalities);

// Fusion-layer activations H_E, one row per observation.
Matrix extract_embedding(const FusionNet& net, const SemiSynthDataset& data);

}  // namespace dmldeep
