#include "dmldeep/fusion.hpp"

#include "dmldeep/error.hpp"
#include "dmldeep/rng.hpp"

#include <algorithm>
#include <cmath>

namespace dmldeep {

using nlohmann::json;

std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
  }
  return "relu";
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  if (s == "identity") return Activation::identity;
  throw ValidationError("unknown activation '" + s + "'");
}

const std::vector<std::size_t>& FusionArch::widths_for(const std::string& modality) const {
  for (const auto& e : encoders)
    if (e.modality == modality) return e.widths;
  return encoder_widths;
}

void check_arch(const FusionArch& arch) {
  if (arch.embedding_dim < 1) throw ValidationError("fusion: embedding_dim must be >= 1");
  auto check = [](const std::vector<std::size_t>& widths, const std::string& who) {
    if (widths.empty()) throw ValidationError("fusion: encoder for " + who + " has no hidden layers");
    for (auto w : widths)
      if (w < 1) throw ValidationError("fusion: encoder widths for " + who + " must be >= 1");
  };
  check(arch.encoder_widths, "default");
  for (const auto& e : arch.encoders) check(e.widths, "'" + e.modality + "'");
}

void check_params(const FusionParams& p) {
  check_arch(p.arch);
  if (p.epochs < 1) throw ValidationError("fusion: epochs must be >= 1");
  if (p.batch_size < 1) throw ValidationError("fusion: batch_size must be >= 1");
  if (!(p.step_size > 0.0)) throw ValidationError("fusion: step_size must be > 0");
  if (!(p.weight_init_scale > 0.0)) throw ValidationError("fusion: weight_init_scale must be > 0");
  if (!(p.validation_fraction >= 0.0 && p.validation_fraction < 1.0))
    throw ValidationError("fusion: validation_fraction must lie in [0,1)");
}

double combined_loss(const Vector& l_hat, const Vector& m_hat, const Vector& y, const Vector& d) {
  const Index n = y.size();
  if (n < 1 || d.size() != n || l_hat.size() != n || m_hat.size() != n)
    throw ValidationError("combined_loss: lengths differ or are empty");
  const double rm = std::sqrt((d - m_hat).squaredNorm() / static_cast<double>(n));
  const double rl = std::sqrt((y - l_hat).squaredNorm() / static_cast<double>(n));
  return rm * rl;
}

namespace {

void activate(Matrix& z, Activation a) {
  switch (a) {
    case Activation::relu: z = z.cwiseMax(0.0); break;
    case Activation::tanh: z = z.array().tanh(); break;
    case Activation::identity: break;
  }
}

// Multiplies the upstream gradient by the activation derivative, expressed through the output.
void activation_backward(Matrix& grad, const Matrix& out, Activation a) {
  switch (a) {
    case Activation::relu: grad = (out.array() > 0.0).select(grad, 0.0); break;
    case Activation::tanh: grad = grad.array() * (1.0 - out.array().square()); break;
    case Activation::identity: break;
  }
}

DenseLayer init_layer(Index fan_in, Index fan_out, Rng& rng, double scale) {
  DenseLayer l{Matrix(fan_in, fan_out), Vector::Zero(fan_out)};
  const double bound = scale / std::sqrt(static_cast<double>(fan_in));
  for (Index i = 0; i < fan_in; ++i)
    for (Index j = 0; j < fan_out; ++j) l.weight(i, j) = rng.uniform(-bound, bound);
  return l;
}

DenseLayer zeros_like(const DenseLayer& l) {
  return {Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size())};
}

Matrix affine(const Matrix& x, const DenseLayer& l) { return (x * l.weight).rowwise() + l.bias.transpose(); }

json layer_to_json(const DenseLayer& l) {
  std::vector<double> w;
  w.reserve(static_cast<std::size_t>(l.weight.size()));
  for (Index i = 0; i < l.weight.rows(); ++i)
    for (Index j = 0; j < l.weight.cols(); ++j) w.push_back(l.weight(i, j));
  return {{"fan_in", l.weight.rows()},
          {"fan_out", l.weight.cols()},
          {"weight", w},
          {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}};
}

DenseLayer layer_from_json(const json& j) {
  const auto in = j.at("fan_in").get<Index>();
  const auto out = j.at("fan_out").get<Index>();
  const auto w = j.at("weight").get<std::vector<double>>();
  const auto b = j.at("bias").get<std::vector<double>>();
  if (static_cast<Index>(w.size()) != in * out || static_cast<Index>(b.size()) != out)
    throw ValidationError("fusion weights: layer shape does not match its values");
  DenseLayer l{Matrix(in, out), Vector(out)};
  for (Index i = 0; i < in; ++i)
    for (Index k = 0; k < out; ++k) l.weight(i, k) = w[static_cast<std::size_t>(i * out + k)];
  for (Index k = 0; k < out; ++k) l.bias[k] = b[static_cast<std::size_t>(k)];
  return l;
}

}  // namespace

FusionNet::FusionNet(FusionArch arch, std::vector<Input> inputs, std::uint64_t seed, double init_scale)
    : arch_(std::move(arch)), inputs_(std::move(inputs)) {
  check_arch(arch_);
  if (inputs_.empty()) throw ValidationError("fusion: at least one input modality required");
  Rng rng(derive_seed(seed, "fusion-init"));
  Index concat_width = 0;
  for (const auto& in : inputs_) {
    if (in.dim < 1) throw ValidationError("fusion: modality '" + in.modality + "' has no features");
    center_.push_back(Eigen::RowVectorXd::Zero(static_cast<Index>(in.dim)));
    scale_.push_back(Eigen::RowVectorXd::Ones(static_cast<Index>(in.dim)));
    std::vector<DenseLayer> enc;
    auto fan_in = static_cast<Index>(in.dim);
    for (auto w : arch_.widths_for(in.modality)) {
      enc.push_back(init_layer(fan_in, static_cast<Index>(w), rng, init_scale));
      fan_in = static_cast<Index>(w);
    }
    concat_width += fan_in;
    encoders_.push_back(std::move(enc));
  }
  const auto e = static_cast<Index>(arch_.embedding_dim);
  fusion_ = init_layer(concat_width, e, rng, init_scale);
  head_l_ = init_layer(e, 1, rng, init_scale);
  head_m_ = init_layer(e, 1, rng, init_scale);
}

std::vector<std::string> FusionNet::modalities() const {
  std::vector<std::string> out;
  for (const auto& in : inputs_) out.push_back(in.modality);
  return out;
}

void FusionNet::set_normalization(const SemiSynthDataset& train) {
  for (std::size_t k = 0; k < inputs_.size(); ++k) {
    const auto* b = train.block(inputs_[k].modality);
    if (!b || static_cast<std::size_t>(b->values.cols()) != inputs_[k].dim)
      throw SchemaError("fusion input '" + inputs_[k].modality + "'");
    center_[k] = b->values.colwise().mean();
    Eigen::RowVectorXd sd = ((b->values.rowwise() - center_[k]).array().square().colwise().mean()).sqrt();
    scale_[k] = (sd.array() > 0.0).select(sd, 1.0);
  }
}

std::vector<Matrix> FusionNet::normalized_inputs(const SemiSynthDataset& data, const std::vector<Index>* rows) const {
  std::vector<Matrix> out;
  for (std::size_t k = 0; k < inputs_.size(); ++k) {
    const auto* b = data.block(inputs_[k].modality);
    if (!b) throw SchemaError("dataset has no feature block '" + inputs_[k].modality + "'");
    if (static_cast<std::size_t>(b->values.cols()) != inputs_[k].dim)
      throw SchemaError("block '" + inputs_[k].modality + "' has " + std::to_string(b->values.cols()) +
                        " columns, network expects " + std::to_string(inputs_[k].dim));
    Matrix x;
    if (rows) {
      x.resize(static_cast<Index>(rows->size()), b->values.cols());
      for (std::size_t i = 0; i < rows->size(); ++i) x.row(static_cast<Index>(i)) = b->values.row((*rows)[i]);
    } else {
      x = b->values;
    }
    x = (x.rowwise() - center_[k]).array().rowwise() / scale_[k].array();
    out.push_back(std::move(x));
  }
  return out;
}

void FusionNet::forward(const std::vector<Matrix>& inputs, Cache& cache) const {
  cache.encoder_acts.assign(inputs_.size(), {});
  Index width = 0;
  for (std::size_t k = 0; k < inputs_.size(); ++k) {
    auto& acts = cache.encoder_acts[k];
    acts.push_back(inputs[k]);
    for (const auto& layer : encoders_[k]) {
      Matrix z = affine(acts.back(), layer);
      activate(z, arch_.activation);
      acts.push_back(std::move(z));
    }
    width += acts.back().cols();
  }
  const Index rows = inputs.front().rows();
  cache.concat.resize(rows, width);
  Index at = 0;
  for (const auto& acts : cache.encoder_acts) {
    cache.concat.middleCols(at, acts.back().cols()) = acts.back();
    at += acts.back().cols();
  }
  cache.embedding = affine(cache.concat, fusion_);
  activate(cache.embedding, arch_.activation);
  cache.l_hat = affine(cache.embedding, head_l_).col(0);
  cache.m_hat = affine(cache.embedding, head_m_).col(0);
}

FusionNet::Gradient FusionNet::zero_gradient() const {
  Gradient g;
  for (const auto& enc : encoders_) {
    std::vector<DenseLayer> ge;
    for (const auto& l : enc) ge.push_back(zeros_like(l));
    g.encoders.push_back(std::move(ge));
  }
  g.fusion = zeros_like(fusion_);
  g.head_l = zeros_like(head_l_);
  g.head_m = zeros_like(head_m_);
  return g;
}

double FusionNet::backward(const Cache& cache, const Vector& y, const Vector& d, Gradient& grad) const {
  const auto n = static_cast<double>(y.size());
  const Vector res_l = y - cache.l_hat;
  const Vector res_m = d - cache.m_hat;
  const double rl = std::sqrt(res_l.squaredNorm() / n);
  const double rm = std::sqrt(res_m.squaredNorm() / n);
  const double loss = rl * rm;

  // dL = rm * d(rl) + rl * d(rm), with d(rl)/d(l_hat_i) = -res_l_i / (n * rl).
  Matrix dl = Matrix::Zero(y.size(), 1);
  Matrix dm = Matrix::Zero(y.size(), 1);
  if (rl > 0.0) dl.col(0) = -(rm / (n * rl)) * res_l;
  if (rm > 0.0) dm.col(0) = -(rl / (n * rm)) * res_m;

  grad.head_l.weight = cache.embedding.transpose() * dl;
  grad.head_l.bias = dl.colwise().sum().transpose();
  grad.head_m.weight = cache.embedding.transpose() * dm;
  grad.head_m.bias = dm.colwise().sum().transpose();

  Matrix dh = dl * head_l_.weight.transpose() + dm * head_m_.weight.transpose();
  activation_backward(dh, cache.embedding, arch_.activation);
  grad.fusion.weight = cache.concat.transpose() * dh;
  grad.fusion.bias = dh.colwise().sum().transpose();
  const Matrix dconcat = dh * fusion_.weight.transpose();

  Index at = 0;
  for (std::size_t k = 0; k < inputs_.size(); ++k) {
    const auto& acts = cache.encoder_acts[k];
    Matrix da = dconcat.middleCols(at, acts.back().cols());
    at += acts.back().cols();
    for (std::size_t li = encoders_[k].size(); li-- > 0;) {
      activation_backward(da, acts[li + 1], arch_.activation);
      grad.encoders[k][li].weight = acts[li].transpose() * da;
      grad.encoders[k][li].bias = da.colwise().sum().transpose();
      if (li > 0) da = da * encoders_[k][li].weight.transpose();
    }
  }
  return loss;
}

void FusionNet::apply(const Gradient& grad, double step) {
  auto upd = [step](DenseLayer& l, const DenseLayer& g) {
    l.weight -= step * g.weight;
    l.bias -= step * g.bias;
  };
  for (std::size_t k = 0; k < encoders_.size(); ++k)
    for (std::size_t li = 0; li < encoders_[k].size(); ++li) upd(encoders_[k][li], grad.encoders[k][li]);
  upd(fusion_, grad.fusion);
  upd(head_l_, grad.head_l);
  upd(head_m_, grad.head_m);
}

std::pair<Vector, Vector> FusionNet::predict(const SemiSynthDataset& data) const {
  Cache cache;
  forward(normalized_inputs(data, nullptr), cache);
  return {cache.l_hat, cache.m_hat};
}

Matrix FusionNet::embed(const SemiSynthDataset& data) const {
  Cache cache;
  forward(normalized_inputs(data, nullptr), cache);
  return cache.embedding;
}

double FusionNet::loss(const SemiSynthDataset& data) const {
  const auto [l, m] = predict(data);
  return combined_loss(l, m, data.y, data.d);
}

std::vector<const DenseLayer*> FusionNet::layer_list(const Gradient* g) const {
  std::vector<const DenseLayer*> out;
  for (std::size_t k = 0; k < encoders_.size(); ++k)
    for (std::size_t li = 0; li < encoders_[k].size(); ++li)
      out.push_back(g ? &g->encoders[k][li] : &encoders_[k][li]);
  out.push_back(g ? &g->fusion : &fusion_);
  out.push_back(g ? &g->head_l : &head_l_);
  out.push_back(g ? &g->head_m : &head_m_);
  return out;
}

void FusionNet::flatten(const std::vector<const DenseLayer*>& layers, std::vector<double>& out) {
  out.clear();
  for (const auto* l : layers) {
    for (Index i = 0; i < l->weight.rows(); ++i)
      for (Index j = 0; j < l->weight.cols(); ++j) out.push_back(l->weight(i, j));
    for (Index j = 0; j < l->bias.size(); ++j) out.push_back(l->bias[j]);
  }
}

double FusionNet::loss_and_gradient(const SemiSynthDataset& data, std::vector<double>& gradient) const {
  Cache cache;
  forward(normalized_inputs(data, nullptr), cache);
  Gradient g = zero_gradient();
  const double loss = backward(cache, data.y, data.d, g);
  flatten(layer_list(&g), gradient);
  return loss;
}

std::vector<double> FusionNet::parameters() const {
  std::vector<double> out;
  flatten(layer_list(nullptr), out);
  return out;
}

std::size_t FusionNet::parameter_count() const {
  std::size_t c = 0;
  for (const auto* l : layer_list(nullptr)) c += static_cast<std::size_t>(l->weight.size() + l->bias.size());
  return c;
}

void FusionNet::set_parameters(const std::vector<double>& flat) {
  if (flat.size() != parameter_count()) throw ValidationError("fusion: parameter vector has wrong length");
  std::size_t at = 0;
  for (const auto* cl : layer_list(nullptr)) {
    auto* l = const_cast<DenseLayer*>(cl);
    for (Index i = 0; i < l->weight.rows(); ++i)
      for (Index j = 0; j < l->weight.cols(); ++j) l->weight(i, j) = flat[at++];
    for (Index j = 0; j < l->bias.size(); ++j) l->bias[j] = flat[at++];
  }
}

json FusionNet::to_json() const {
  json arch = {{"encoder_widths", arch_.encoder_widths},
               {"embedding_dim", arch_.embedding_dim},
               {"activation", to_string(arch_.activation)}};
  json inputs = json::array();
  json encoders = json::array();
  for (std::size_t k = 0; k < inputs_.size(); ++k) {
    inputs.push_back({{"modality", inputs_[k].modality},
                      {"dim", inputs_[k].dim},
                      {"widths", arch_.widths_for(inputs_[k].modality)},
                      {"center", std::vector<double>(center_[k].data(), center_[k].data() + center_[k].size())},
                      {"scale", std::vector<double>(scale_[k].data(), scale_[k].data() + scale_[k].size())}});
    json enc = json::array();
    for (const auto& l : encoders_[k]) enc.push_back(layer_to_json(l));
    encoders.push_back(std::move(enc));
  }
  return {{"format", "dmldeep-fusion/1"},
          {"arch", arch},
          {"inputs", inputs},
          {"encoders", encoders},
          {"fusion", layer_to_json(fusion_)},
          {"head_l", layer_to_json(head_l_)},
          {"head_m", layer_to_json(head_m_)},
          {"selected_epoch", log.selected_epoch}};
}

FusionNet FusionNet::from_json(const json& j) {
  try {
    FusionArch arch;
    arch.encoder_widths = j.at("arch").at("encoder_widths").get<std::vector<std::size_t>>();
    arch.embedding_dim = j.at("arch").at("embedding_dim").get<std::size_t>();
    arch.activation = activation_from_string(j.at("arch").at("activation").get<std::string>());
    std::vector<Input> inputs;
    for (const auto& in : j.at("inputs")) {
      inputs.push_back({in.at("modality").get<std::string>(), in.at("dim").get<std::size_t>()});
      arch.encoders.push_back({inputs.back().modality, in.at("widths").get<std::vector<std::size_t>>()});
    }
    FusionNet net(arch, inputs, 0);
    const auto& jin = j.at("inputs");
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      const auto c = jin[k].at("center").get<std::vector<double>>();
      const auto s = jin[k].at("scale").get<std::vector<double>>();
      if (c.size() != inputs[k].dim || s.size() != inputs[k].dim)
        throw ValidationError("fusion weights: normalization size mismatch");
      net.center_[k] = Eigen::Map<const Eigen::RowVectorXd>(c.data(), static_cast<Index>(c.size()));
      net.scale_[k] = Eigen::Map<const Eigen::RowVectorXd>(s.data(), static_cast<Index>(s.size()));
      const auto& enc = j.at("encoders")[k];
      if (enc.size() != net.encoders_[k].size()) throw ValidationError("fusion weights: encoder depth mismatch");
      for (std::size_t li = 0; li < enc.size(); ++li) net.encoders_[k][li] = layer_from_json(enc[li]);
    }
    net.fusion_ = layer_from_json(j.at("fusion"));
    net.head_l_ = layer_from_json(j.at("head_l"));
    net.head_m_ = layer_from_json(j.at("head_m"));
    net.log.selected_epoch = j.value("selected_epoch", std::size_t{0});
    return net;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed fusion weights: ") + e.what());
  }
}

FusionNet train_fusion(const FusionParams& params, std::uint64_t seed, const SemiSynthDataset& train,
                       const SemiSynthDataset* holdout, const std::vector<std::string>& modalities) {
  check_params(params);
  if (modalities.empty()) throw ValidationError("fusion: modality subset is empty");
  if (train.n() < 1) throw ValidationError("fusion: empty training set");

  std::vector<FusionNet::Input> inputs;
  for (const auto& m : modalities) {
    const auto* b = train.block(m);
    if (!b) throw SchemaError("dataset has no feature block '" + m + "'");
    inputs.push_back({m, static_cast<std::size_t>(b->values.cols())});
  }
  FusionNet net(params.arch, inputs, seed, params.weight_init_scale);
  net.set_normalization(train);
  net.head_l_.bias[0] = train.y.mean();
  net.head_m_.bias[0] = train.d.mean();

  const auto all_inputs = net.normalized_inputs(train, nullptr);
  std::optional<std::vector<Matrix>> holdout_inputs;
  if (holdout && holdout->n() > 0) {
    holdout_inputs = net.normalized_inputs(*holdout, nullptr);
    FusionNet::Cache c;
    net.forward(*holdout_inputs, c);
    net.log.initial_holdout_loss = combined_loss(c.l_hat, c.m_hat, holdout->y, holdout->d);
  }

  const auto n = static_cast<std::size_t>(train.n());
  FusionNet best = net;
  double best_loss = std::numeric_limits<double>::infinity();
  FusionNet::Cache cache;
  FusionNet::Gradient grad = net.zero_gradient();
  std::vector<Matrix> batch_inputs(inputs.size());
  Vector by, bd;

  for (std::size_t epoch = 1; epoch <= params.epochs; ++epoch) {
    Rng rng(derive_seed(seed, "fusion-epoch", epoch));
    const auto order = rng.permutation(n);
    for (std::size_t start = 0; start < n; start += params.batch_size) {
      const std::size_t stop = std::min(n, start + params.batch_size);
      const auto b = static_cast<Index>(stop - start);
      for (std::size_t k = 0; k < inputs.size(); ++k) {
        batch_inputs[k].resize(b, all_inputs[k].cols());
        for (Index i = 0; i < b; ++i) batch_inputs[k].row(i) = all_inputs[k].row(static_cast<Index>(order[start + static_cast<std::size_t>(i)]));
      }
      by.resize(b);
      bd.resize(b);
      for (Index i = 0; i < b; ++i) {
        by[i] = train.y[static_cast<Index>(order[start + static_cast<std::size_t>(i)])];
        bd[i] = train.d[static_cast<Index>(order[start + static_cast<std::size_t>(i)])];
      }
      net.forward(batch_inputs, cache);
      const double batch_loss = net.backward(cache, by, bd, grad);
      if (!std::isfinite(batch_loss)) throw TrainingDivergedError(epoch, "non-finite mini-batch loss");
      net.apply(grad, params.step_size);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    net.forward(all_inputs, cache);
    rec.train_loss = combined_loss(cache.l_hat, cache.m_hat, train.y, train.d);
    if (!std::isfinite(rec.train_loss)) throw TrainingDivergedError(epoch, "non-finite training loss");
    if (holdout_inputs) {
      net.forward(*holdout_inputs, cache);
      rec.holdout_loss = combined_loss(cache.l_hat, cache.m_hat, holdout->y, holdout->d);
      rec.holdout_rmse_l = std::sqrt((holdout->y - cache.l_hat).squaredNorm() / static_cast<double>(holdout->n()));
      rec.holdout_rmse_m = std::sqrt((holdout->d - cache.m_hat).squaredNorm() / static_cast<double>(holdout->n()));
      rec.holdout_l_hat = cache.l_hat;
      rec.holdout_m_hat = cache.m_hat;
      if (!std::isfinite(rec.holdout_loss)) throw TrainingDivergedError(epoch, "non-finite holdout loss");
    }
    const double score = holdout_inputs ? rec.holdout_loss : rec.train_loss;
    net.log.epochs.push_back(std::move(rec));
    const bool take = params.selection == EpochSelection::last_epoch || !holdout_inputs ? epoch == params.epochs
                                                                                        : score < best_loss;
    if (take) {
      best_loss = score;
      TrainingLog keep = std::move(net.log);
      net.log = {};
      best = net;
      best.log.selected_epoch = epoch;
      net.log = std::move(keep);
    }
  }
  const std::size_t selected = best.log.selected_epoch;
  best.log = std::move(net.log);
  best.log.selected_epoch = selected;
  return best;
}

Matrix extract_embedding(const FusionNet& net, const SemiSynthDataset& data) { return net.embed(data); }

}  // namespace dmldeep
