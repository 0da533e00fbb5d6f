#include "dmldeep/learners.hpp"

#include "dmldeep/error.hpp"
#include "dmldeep/rng.hpp"

#include <cstring>
#include <sstream>

namespace dmldeep {

using nlohmann::json;

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

json gbt_to_json(const GbtParams& p) {
  return {{"trees", p.trees},
          {"depth", p.depth},
          {"learning_rate", p.learning_rate},
          {"subsample", p.subsample},
          {"min_leaf", p.min_leaf}};
}

GbtParams gbt_from_json(const json& j) {
  GbtParams p;
  p.trees = j.value("trees", p.trees);
  p.depth = j.value("depth", p.depth);
  p.learning_rate = j.value("learning_rate", p.learning_rate);
  p.subsample = j.value("subsample", p.subsample);
  p.min_leaf = j.value("min_leaf", p.min_leaf);
  return p;
}

json fusion_to_json(const FusionParams& p) {
  json enc = json::object();
  for (const auto& e : p.arch.encoders) enc[e.modality] = e.widths;
  return {{"encoder_widths", p.arch.encoder_widths},
          {"encoders", enc},
          {"embedding_dim", p.arch.embedding_dim},
          {"activation", to_string(p.arch.activation)},
          {"epochs", p.epochs},
          {"batch_size", p.batch_size},
          {"step_size", p.step_size},
          {"weight_init_scale", p.weight_init_scale},
          {"selection", p.selection == EpochSelection::last_epoch ? "last_epoch" : "min_holdout_loss"},
          {"validation_fraction", p.validation_fraction}};
}

FusionParams fusion_from_json(const json& j) {
  FusionParams p;
  p.arch.encoder_widths = j.value("encoder_widths", p.arch.encoder_widths);
  if (j.contains("encoders"))
    for (const auto& [name, widths] : j["encoders"].items())
      p.arch.encoders.push_back({name, widths.get<std::vector<std::size_t>>()});
  p.arch.embedding_dim = j.value("embedding_dim", p.arch.embedding_dim);
  p.arch.activation = activation_from_string(j.value("activation", std::string("relu")));
  p.epochs = j.value("epochs", p.epochs);
  p.batch_size = j.value("batch_size", p.batch_size);
  p.step_size = j.value("step_size", p.step_size);
  p.weight_init_scale = j.value("weight_init_scale", p.weight_init_scale);
  const auto sel = j.value("selection", std::string("min_holdout_loss"));
  if (sel == "last_epoch") p.selection = EpochSelection::last_epoch;
  else if (sel == "min_holdout_loss") p.selection = EpochSelection::min_holdout_loss;
  else throw ValidationError("unknown fusion selection rule '" + sel + "'");
  p.validation_fraction = j.value("validation_fraction", p.validation_fraction);
  return p;
}

std::string join(const std::vector<std::string>& parts) {
  std::string s;
  for (std::size_t i = 0; i < parts.size(); ++i) s += (i ? "," : "") + parts[i];
  return s;
}

}  // namespace

std::string LearnerSpec::kind_name() const {
  return std::visit(Overloaded{[](const RidgeParams&) { return "ridge"; },
                               [](const GbtParams&) { return "gbt"; },
                               [](const FusionParams&) { return "fusion"; },
                               [](const EmbeddingParams&) { return "embedding"; },
                               [](const OracleParams&) { return "oracle"; },
                               [](const ConstantParams&) { return "constant"; }},
                    kind);
}

void check_spec(const LearnerSpec& spec) {
  std::visit(Overloaded{[](const RidgeParams& p) {
                          if (!(p.penalty >= 0.0)) throw ValidationError("ridge penalty must be >= 0");
                        },
                        [](const GbtParams& p) { check_params(p); },
                        [](const FusionParams& p) { check_params(p); },
                        [](const EmbeddingParams& p) {
                          check_params(p.fusion);
                          check_params(p.gbt);
                        },
                        [](const OracleParams&) {}, [](const ConstantParams&) {}},
             spec.kind);
}

json learner_spec_to_json(const LearnerSpec& spec) {
  json j = std::visit(Overloaded{[](const RidgeParams& p) { return json{{"penalty", p.penalty}}; },
                                 [](const GbtParams& p) { return gbt_to_json(p); },
                                 [](const FusionParams& p) { return fusion_to_json(p); },
                                 [](const EmbeddingParams& p) {
                                   return json{{"fusion", fusion_to_json(p.fusion)},
                                               {"gbt", gbt_to_json(p.gbt)},
                                               {"tabular_modality", p.tabular_modality}};
                                 },
                                 [](const OracleParams&) { return json::object(); },
                                 [](const ConstantParams&) { return json::object(); }},
                      spec.kind);
  j["kind"] = spec.kind_name();
  j["seed"] = spec.seed;
  return j;
}

LearnerSpec learner_spec_from_json(const json& j) {
  try {
    LearnerSpec s;
    s.seed = j.value("seed", std::uint64_t{0});
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "ridge") s.kind = RidgeParams{j.value("penalty", 1.0)};
    else if (kind == "gbt") s.kind = gbt_from_json(j);
    else if (kind == "fusion") s.kind = fusion_from_json(j);
    else if (kind == "embedding") {
      EmbeddingParams p;
      p.fusion = fusion_from_json(j.value("fusion", json::object()));
      p.gbt = gbt_from_json(j.value("gbt", json::object()));
      p.tabular_modality = j.value("tabular_modality", p.tabular_modality);
      s.kind = p;
    } else if (kind == "oracle") s.kind = OracleParams{};
    else if (kind == "constant") s.kind = ConstantParams{};
    else throw ValidationError("unknown learner kind '" + kind + "'");
    check_spec(s);
    return s;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed learner spec: ") + e.what());
  }
}

std::uint64_t dataset_fingerprint(const SemiSynthDataset& data) {
  std::string bytes(static_cast<std::size_t>(data.n()) * 2 * sizeof(double) + sizeof(Index), '\0');
  const Index n = data.n();
  std::memcpy(bytes.data(), &n, sizeof n);
  std::memcpy(bytes.data() + sizeof n, data.y.data(), static_cast<std::size_t>(n) * sizeof(double));
  std::memcpy(bytes.data() + sizeof n + static_cast<std::size_t>(n) * sizeof(double), data.d.data(),
              static_cast<std::size_t>(n) * sizeof(double));
  return fnv1a64(bytes);
}

FittedLearner::FittedLearner(std::string tag, std::vector<std::string> modalities, const SemiSynthDataset& train)
    : tag_(std::move(tag)), modalities_(std::move(modalities)), fingerprint_(dataset_fingerprint(train)) {
  for (const auto& m : modalities_) {
    const auto* b = train.block(m);
    widths_.push_back(b ? b->values.cols() : 0);
  }
}

std::pair<Vector, Vector> FittedLearner::predict_values(const SemiSynthDataset& data) const {
  if (data.n() < 1) throw ValidationError("predict: empty dataset");
  for (std::size_t k = 0; k < modalities_.size(); ++k) {
    const auto* b = data.block(modalities_[k]);
    if (widths_[k] == 0) continue;
    if (!b) throw SchemaError("dataset has no feature block '" + modalities_[k] + "'");
    if (b->values.cols() != widths_[k])
      throw SchemaError("block '" + modalities_[k] + "' has " + std::to_string(b->values.cols()) +
                        " columns, learner was fit on " + std::to_string(widths_[k]));
  }
  auto out = predict_impl(data);
  if (!out.first.allFinite() || !out.second.allFinite()) throw NumericalError("learner produced non-finite predictions");
  return out;
}

namespace {

class RidgeLearner final : public FittedLearner {
 public:
  RidgeLearner(const RidgeParams& p, const SemiSynthDataset& train, const std::vector<std::string>& mods)
      : FittedLearner("ridge(penalty=" + std::to_string(p.penalty) + ")[" + join(mods) + "]", mods, train) {
    const Matrix x = stack_features(train, mods);
    l_ = fit_ridge(x, train.y, p.penalty);
    m_ = fit_ridge(x, train.d, p.penalty);
  }

 protected:
  std::pair<Vector, Vector> predict_impl(const SemiSynthDataset& data) const override {
    const Matrix x = stack_features(data, modalities());
    return {l_.predict(x), m_.predict(x)};
  }

 private:
  RidgeModel l_, m_;
};

std::string gbt_tag(const GbtParams& p) {
  std::ostringstream s;
  s << "gbt(trees=" << p.trees << ",depth=" << p.depth << ",lr=" << p.learning_rate << ",subsample=" << p.subsample
    << ")";
  return s.str();
}

class GbtLearner final : public FittedLearner {
 public:
  GbtLearner(const GbtParams& p, std::uint64_t seed, const SemiSynthDataset& train,
             const std::vector<std::string>& mods)
      : FittedLearner(gbt_tag(p) + "[" + join(mods) + "]", mods, train) {
    const Matrix x = stack_features(train, mods);
    l_ = fit_boosted(x, train.y, p, derive_seed(seed, "gbt-l"));
    m_ = fit_boosted(x, train.d, p, derive_seed(seed, "gbt-m"));
  }

 protected:
  std::pair<Vector, Vector> predict_impl(const SemiSynthDataset& data) const override {
    const Matrix x = stack_features(data, modalities());
    return {l_.predict(x), m_.predict(x)};
  }

 private:
  BoostedTrees l_, m_;
};

class FusionLearner final : public FittedLearner {
 public:
  FusionLearner(std::shared_ptr<const FusionNet> net, const SemiSynthDataset& train, std::string tag)
      : FittedLearner(std::move(tag), net->modalities(), train), net_(std::move(net)) {}
  const FusionNet& net() const { return *net_; }

 protected:
  std::pair<Vector, Vector> predict_impl(const SemiSynthDataset& data) const override { return net_->predict(data); }

 private:
  std::shared_ptr<const FusionNet> net_;
};

class EmbeddingLearner final : public FittedLearner {
 public:
  EmbeddingLearner(std::shared_ptr<const FusionNet> net, const SemiSynthDataset& train, const GbtParams& gbt,
                   std::string tab, std::uint64_t seed)
      : FittedLearner("embedding[H_E(" + join(net->modalities()) + ")+" + tab + "]/" + gbt_tag(gbt),
                      with_tab(net->modalities(), tab), train),
        net_(std::move(net)),
        tab_(std::move(tab)) {
    const Matrix x = design(train);
    l_ = fit_boosted(x, train.y, gbt, derive_seed(seed, "embedding-gbt-l"));
    m_ = fit_boosted(x, train.d, gbt, derive_seed(seed, "embedding-gbt-m"));
  }
  const FusionNet& net() const { return *net_; }

 protected:
  std::pair<Vector, Vector> predict_impl(const SemiSynthDataset& data) const override {
    const Matrix x = design(data);
    return {l_.predict(x), m_.predict(x)};
  }

 private:
  static std::vector<std::string> with_tab(std::vector<std::string> mods, const std::string& tab) {
    if (std::find(mods.begin(), mods.end(), tab) == mods.end()) mods.push_back(tab);
    return mods;
  }
  Matrix design(const SemiSynthDataset& data) const {
    const Matrix h = net_->embed(data);
    const auto* tab = data.block(tab_);
    if (!tab) throw SchemaError("embedding model needs tabular block '" + tab_ + "'");
    Matrix x(data.n(), h.cols() + tab->values.cols());
    x << h, tab->values;
    return x;
  }

  std::shared_ptr<const FusionNet> net_;
  std::string tab_;
  BoostedTrees l_, m_;
};

class OracleLearner final : public FittedLearner {
 public:
  OracleLearner(const SemiSynthDataset& train, const std::vector<std::string>& mods)
      : FittedLearner("oracle", mods, train) {}

 protected:
  std::pair<Vector, Vector> predict_impl(const SemiSynthDataset& data) const override {
    if (!data.oracle) throw ValidationError("oracle learner needs oracle columns");
    return {data.oracle->l0, data.oracle->m0};
  }
};

class ConstantLearner final : public FittedLearner {
 public:
  ConstantLearner(const SemiSynthDataset& train, const std::vector<std::string>& mods)
      : FittedLearner("constant", mods, train), l_(train.y.mean()), m_(train.d.mean()) {}

 protected:
  std::pair<Vector, Vector> predict_impl(const SemiSynthDataset& data) const override {
    return {Vector::Constant(data.n(), l_), Vector::Constant(data.n(), m_)};
  }

 private:
  double l_, m_;
};

std::shared_ptr<const FusionNet> train_for_learner(const FusionParams& p, std::uint64_t seed,
                                                   const SemiSynthDataset& train,
                                                   const std::vector<std::string>& mods) {
  const auto n = static_cast<std::size_t>(train.n());
  const auto n_val = static_cast<std::size_t>(std::floor(p.validation_fraction * static_cast<double>(n)));
  if (p.selection == EpochSelection::min_holdout_loss && n_val >= 1 && n_val < n) {
    Rng rng(derive_seed(seed, "fusion-validation"));
    auto perm = rng.permutation(n);
    std::vector<std::size_t> val(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> fit_rows(perm.begin() + static_cast<std::ptrdiff_t>(n_val), perm.end());
    std::sort(val.begin(), val.end());
    std::sort(fit_rows.begin(), fit_rows.end());
    const auto fit_part = train.subset(fit_rows);
    const auto val_part = train.subset(val);
    return std::make_shared<FusionNet>(train_fusion(p, seed, fit_part, &val_part, mods));
  }
  return std::make_shared<FusionNet>(train_fusion(p, seed, train, nullptr, mods));
}

}  // namespace

std::unique_ptr<FittedLearner> fit_embedding_model(std::shared_ptr<const FusionNet> net,
                                                   const SemiSynthDataset& train, const GbtParams& gbt,
                                                   const std::string& tabular_modality, std::uint64_t seed) {
  if (!net) throw ValidationError("embedding model needs a trained network");
  check_params(gbt);
  if (net->arch().embedding_dim < 1) throw ValidationError("embedding model: embedding_dim must be >= 1");
  return std::make_unique<EmbeddingLearner>(std::move(net), train, gbt, tabular_modality, seed);
}

std::unique_ptr<FittedLearner> fit(const LearnerSpec& spec, const SemiSynthDataset& train,
                                   const std::vector<std::string>& modalities) {
  check_spec(spec);
  if (modalities.empty()) throw ValidationError("fit: modality subset is empty");
  if (auto v = validate(train); !v.empty()) throw ValidationError("fit: training data invalid: " + v.front().describe());
  for (const auto& m : modalities)
    if (!train.block(m)) throw SchemaError("dataset has no feature block '" + m + "'");

  return std::visit(
      Overloaded{
          [&](const RidgeParams& p) -> std::unique_ptr<FittedLearner> {
            return std::make_unique<RidgeLearner>(p, train, modalities);
          },
          [&](const GbtParams& p) -> std::unique_ptr<FittedLearner> {
            return std::make_unique<GbtLearner>(p, spec.seed, train, modalities);
          },
          [&](const FusionParams& p) -> std::unique_ptr<FittedLearner> {
            auto net = train_for_learner(p, spec.seed, train, modalities);
            std::ostringstream tag;
            tag << "fusion(E=" << p.arch.embedding_dim << ",epochs=" << p.epochs << ",selected=" << net->log.selected_epoch
                << ")[" << join(modalities) << "]";
            return std::make_unique<FusionLearner>(std::move(net), train, tag.str());
          },
          [&](const EmbeddingParams& p) -> std::unique_ptr<FittedLearner> {
            auto net = train_for_learner(p.fusion, spec.seed, train, modalities);
            return fit_embedding_model(std::move(net), train, p.gbt, p.tabular_modality, spec.seed);
          },
          [&](const OracleParams&) -> std::unique_ptr<FittedLearner> {
            return std::make_unique<OracleLearner>(train, modalities);
          },
          [&](const ConstantParams&) -> std::unique_ptr<FittedLearner> {
            return std::make_unique<ConstantLearner>(train, modalities);
          }},
      spec.kind);
}

NuisancePredictions predict(const FittedLearner& fitted, const SemiSynthDataset& data, int fold_id) {
  auto [l, m] = fitted.predict_values(data);
  NuisancePredictions p;
  p.l_hat = std::move(l);
  p.m_hat = std::move(m);
  const bool in_sample = dataset_fingerprint(data) == fitted.training_fingerprint();
  p.fold_id.assign(static_cast<std::size_t>(data.n()), in_sample ? -1 : fold_id);
  p.learner_tag = fitted.tag();
  return p;
}

const FusionNet* fusion_network(const FittedLearner& fitted) {
  if (const auto* f = dynamic_cast<const FusionLearner*>(&fitted)) return &f->net();
  if (const auto* e = dynamic_cast<const EmbeddingLearner*>(&fitted)) return &e->net();
  return nullptr;
}

}  // namespace dmldeep
