#include "dmldeep/dgp.hpp"

#include "dmldeep/dataset_io.hpp"
#include "dmldeep/error.hpp"
#include "dmldeep/metrics.hpp"
#include "dmldeep/rng.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <set>

namespace dmldeep {

DgpConfig default_dgp_config(std::size_t n, std::uint64_t seed, double explainable_fraction,
                             std::size_t feature_dim) {
  DgpConfig cfg;
  cfg.n = n;
  cfg.seed = seed;
  for (const char* name : {"tab", "txt", "img"}) {
    ModalitySpec s;
    s.name = name;
    s.feature_dim = feature_dim;
    s.explainable_fraction = explainable_fraction;
    cfg.modality_specs.push_back(s);
  }
  return cfg;
}

void check_config(const DgpConfig& cfg) {
  if (cfg.n < 10) throw ValidationError("dgp: n must be at least 10");
  if (!(cfg.snr > 0.0)) throw ValidationError("dgp: snr must be positive");
  if (cfg.snr_convention == SnrConvention::total_signal && !(cfg.snr > cfg.theta0 * cfg.theta0))
    throw ValidationError("dgp: total_signal convention needs snr > theta0^2");
  if (cfg.modality_specs.empty()) throw ValidationError("dgp: at least one modality required");
  std::set<std::string> names;
  for (const auto& s : cfg.modality_specs) {
    if (s.name.empty() || s.name.find_first_of(":,") != std::string::npos)
      throw ValidationError("dgp: invalid modality name '" + s.name + "'");
    if (!names.insert(s.name).second) throw ValidationError("dgp: duplicate modality '" + s.name + "'");
    if (!(s.explainable_fraction >= 0.0 && s.explainable_fraction <= 1.0))
      throw ValidationError("dgp: explainable_fraction of '" + s.name + "' outside [0,1]");
    if (cfg.mode == DgpMode::surrogate && s.feature_dim < 1)
      throw ValidationError("dgp: feature_dim of '" + s.name + "' must be >= 1");
    if (cfg.mode == DgpMode::ingest && s.target_path.empty())
      throw ValidationError("dgp: ingest mode needs target_path for '" + s.name + "'");
  }
}

Vector standardize_target(const Vector& values) {
  if (values.size() < 2) throw ValidationError("standardize_target: need at least 2 values");
  const double mu = values.mean();
  const double sd = std::sqrt((values.array() - mu).square().mean());
  if (!(sd > 0.0)) throw DegenerateError("standardize_target: target has zero variance");
  return (values.array() - mu) / sd;
}

std::pair<double, double> confounding_scales(double z_variance, double theta0, double snr,
                                             SnrConvention convention) {
  if (!(z_variance > 0.0)) throw DegenerateError("confounder sum has zero variance");
  const double lambda = std::sqrt(snr / z_variance);
  // Var(theta0 * m0 + g0) = (mu - theta0 * lambda)^2 * Var(Z).
  const double structural_signal =
      convention == SnrConvention::structural ? snr : snr - theta0 * theta0;
  if (!(structural_signal > 0.0)) throw ValidationError("snr too small for theta0 under total_signal convention");
  const double mu = theta0 * lambda + std::sqrt(structural_signal / z_variance);
  return {lambda, mu};
}

Confounding build_confounders(const std::vector<Vector>& standardized_targets, double theta0, double snr,
                              SnrConvention convention) {
  if (standardized_targets.empty()) throw ValidationError("build_confounders: no modalities");
  Vector z = Vector::Zero(standardized_targets.front().size());
  for (const auto& t : standardized_targets) {
    if (t.size() != z.size()) throw ValidationError("build_confounders: length mismatch");
    z += t;
  }
  const auto [lambda, mu] = confounding_scales(variance(z), theta0, snr, convention);
  return {mu * z, -lambda * z, lambda, mu};
}

namespace {

// sqrt(E[tanh(Z)^2]) for Z ~ N(0,1), composite Simpson on [-12, 12].
double tanh_link_sd() {
  constexpr int steps = 4800;
  constexpr double lo = -12.0, hi = 12.0;
  const double h = (hi - lo) / steps;
  double acc = 0.0;
  for (int i = 0; i <= steps; ++i) {
    const double x = lo + h * i;
    const double w = (i == 0 || i == steps) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    acc += w * std::tanh(x) * std::tanh(x) * std::exp(-0.5 * x * x);
  }
  return std::sqrt(acc * h / 3.0 / std::sqrt(2.0 * M_PI));
}

Vector normal_column(std::uint64_t seed, Index n) {
  Rng rng(seed);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

struct LatentTarget {
  Vector target;    // X~_mod
  Vector feasible;  // E[X~_mod | X_mod]
  FeatureBlock block;
};

LatentTarget surrogate_modality(const ModalitySpec& s, std::uint64_t seed, Index n) {
  LatentTarget out;
  const auto p = static_cast<Index>(s.feature_dim);
  out.block.name = s.name;
  out.block.values.resize(n, p);
  for (Index j = 0; j < p; ++j) {
    out.block.columns.push_back("f" + std::to_string(j));
    out.block.values.col(j) = normal_column(derive_seed(seed, "features/" + s.name, static_cast<std::uint64_t>(j)), n);
  }
  Vector w = normal_column(derive_seed(seed, "direction/" + s.name), p);
  if (!(w.norm() > 0.0)) w = Vector::Ones(p);
  w /= w.norm();

  // X w ~ N(0,1); the link output is scaled to unit population variance.
  Vector signal = out.block.values * w;
  if (s.link == Link::tanh) {
    static const double sd = tanh_link_sd();
    signal = signal.array().tanh() / sd;
  }
  const double rho = s.explainable_fraction;
  out.feasible = std::sqrt(rho) * signal;
  const Vector noise = normal_column(derive_seed(seed, "unexplained/" + s.name), n);
  out.target = out.feasible + std::sqrt(1.0 - rho) * noise;
  return out;
}

struct IngestedTarget {
  std::vector<std::string> ids;
  Vector target;
  FeatureBlock block;
  std::size_t categories = 0;
  std::vector<std::string> codes;
};

IngestedTarget ingest_modality(const ModalitySpec& s, Index n) {
  const CsvTable t = read_csv(s.target_path);
  if (t.header.size() < 2 || t.header[0] != "id" || t.header[1] != "target")
    throw ValidationError(s.target_path + ": header must start with id,target");
  if (static_cast<Index>(t.rows.size()) < n)
    throw ValidationError(s.target_path + ": has " + std::to_string(t.rows.size()) + " rows, need " +
                          std::to_string(n));
  IngestedTarget out;
  out.target.resize(n);
  bool numeric = s.target_kind != TargetKind::categorical;
  if (numeric) {
    for (Index i = 0; i < n && numeric; ++i) {
      char* end = nullptr;
      const auto& cell = t.rows[static_cast<std::size_t>(i)][1];
      std::strtod(cell.c_str(), &end);
      numeric = !cell.empty() && end == cell.c_str() + cell.size();
    }
  }
  if (numeric) {
    for (Index i = 0; i < n; ++i)
      out.target[i] = parse_double(t.rows[static_cast<std::size_t>(i)][1], s.target_path);
  } else {
    // Codes follow order of first appearance in the file.
    std::map<std::string, double> code;
    for (Index i = 0; i < n; ++i) {
      const auto& label = t.rows[static_cast<std::size_t>(i)][1];
      auto [it, inserted] = code.emplace(label, static_cast<double>(out.codes.size()));
      if (inserted) out.codes.push_back(label);
      out.target[i] = it->second;
    }
    out.categories = out.codes.size();
  }
  if (s.target_kind == TargetKind::binary) {
    std::set<double> distinct(out.target.data(), out.target.data() + n);
    if (distinct.size() != 2) throw ValidationError(s.target_path + ": binary target must take two values");
  }

  const std::size_t p = t.header.size() - 2;
  out.block.name = s.name;
  out.block.values.resize(n, static_cast<Index>(p));
  for (std::size_t j = 0; j < p; ++j) {
    out.block.columns.push_back(t.header[j + 2]);
    for (Index i = 0; i < n; ++i)
      out.block.values(i, static_cast<Index>(j)) =
          parse_double(t.rows[static_cast<std::size_t>(i)][j + 2], s.target_path + ":" + t.header[j + 2]);
  }
  for (Index i = 0; i < n; ++i) out.ids.push_back(t.rows[static_cast<std::size_t>(i)][0]);
  return out;
}

}  // namespace

SemiSynthDataset generate(const DgpConfig& cfg) {
  check_config(cfg);
  const auto n = static_cast<Index>(cfg.n);

  SemiSynthDataset data;
  OracleColumns oracle;
  Manifest& man = data.manifest;
  man.theta0 = cfg.theta0;
  man.snr = cfg.snr;
  man.seed = cfg.seed;
  man.snr_convention = cfg.snr_convention;
  man.mode = cfg.mode == DgpMode::surrogate ? "surrogate" : "ingest";
  man.modality_specs = cfg.modality_specs;

  std::vector<Vector> standardized;
  std::vector<Vector> standardized_feasible;
  std::vector<std::vector<std::string>> file_ids;
  for (std::size_t k = 0; k < cfg.modality_specs.size(); ++k) {
    const auto& spec = cfg.modality_specs[k];
    Vector target;
    std::optional<Vector> feasible;
    FeatureBlock block;
    if (cfg.mode == DgpMode::surrogate) {
      auto lt = surrogate_modality(spec, cfg.seed, n);
      target = std::move(lt.target);
      feasible = std::move(lt.feasible);
      block = std::move(lt.block);
    } else {
      auto it = ingest_modality(spec, n);
      target = std::move(it.target);
      block = std::move(it.block);
      file_ids.push_back(std::move(it.ids));
      auto& ms = man.modality_specs[k];
      ms.feature_dim = static_cast<std::size_t>(block.values.cols());
      if (!it.codes.empty()) {
        ms.target_kind = TargetKind::categorical;
        ms.categories = it.categories;
        ms.category_codes = it.codes;
      }
    }
    Vector z;
    try {
      z = standardize_target(target);
    } catch (const DegenerateError&) {
      throw DegenerateError("target of modality '" + spec.name + "' has zero variance");
    }
    if (feasible) {
      // Same affine map as the target, so this is E[Z_mod | X_mod].
      const double mu = target.mean();
      const double sd = std::sqrt((target.array() - mu).square().mean());
      standardized_feasible.push_back((feasible->array() - mu) / sd);
      oracle.feasible.push_back({spec.name, *feasible});
    }
    oracle.targets.push_back({spec.name, target});
    standardized.push_back(std::move(z));
    if (block.values.cols() > 0) data.blocks.push_back(std::move(block));
  }

  if (!file_ids.empty()) {
    bool shared = true;
    for (const auto& ids : file_ids) shared = shared && ids == file_ids.front();
    if (shared) data.ids = file_ids.front();
  }

  Confounding conf = build_confounders(standardized, cfg.theta0, cfg.snr, cfg.snr_convention);
  man.scale_m = conf.lambda;
  man.scale_g = conf.mu;

  oracle.eps = normal_column(derive_seed(cfg.seed, "eps"), n);
  oracle.nu = normal_column(derive_seed(cfg.seed, "nu"), n);
  oracle.g0 = std::move(conf.g0);
  oracle.m0 = std::move(conf.m0);
  oracle.l0 = cfg.theta0 * oracle.m0 + oracle.g0;
  data.d = oracle.m0 + oracle.nu;
  data.y = cfg.theta0 * data.d + oracle.g0 + oracle.eps;
  data.oracle = std::move(oracle);
  return data;
}

std::pair<Vector, Vector> feasible_nuisances(const SemiSynthDataset& data) {
  if (!data.oracle) throw ValidationError("feasible_nuisances: dataset has no oracle columns");
  const auto& o = *data.oracle;
  const Manifest& man = data.manifest;
  Vector z = Vector::Zero(data.n());
  for (const auto& spec : man.modality_specs) {
    const Vector* t = o.target(spec.name);
    const Vector* f = o.feasible_target(spec.name);
    if (!t || !f) throw ValidationError("feasible_nuisances: modality '" + spec.name + "' has no feasible column");
    const double mu = t->mean();
    const double sd = std::sqrt((t->array() - mu).square().mean());
    z += ((f->array() - mu) / sd).matrix();
  }
  const Vector m = -man.scale_m * z;
  const Vector l = man.theta0 * m + man.scale_g * z;
  return {l, m};
}

OracleBounds oracle_bounds(const SemiSynthDataset& data) {
  if (!data.oracle) throw ValidationError("oracle_bounds: dataset has no oracle columns");
  const auto& o = *data.oracle;
  OracleBounds b;
  b.r2_d = r_squared(data.d, o.m0);
  b.r2_y = r_squared(data.y, o.l0);
  b.rmse_d = rmse(data.d, o.m0);
  b.rmse_y = rmse(data.y, o.l0);
  b.ols_theta = ols_baseline(data.y, data.d);
  if (!o.feasible.empty() && o.feasible.size() == data.manifest.modality_specs.size()) {
    const auto [l, m] = feasible_nuisances(data);
    b.feasible_r2_d = r_squared(data.d, m);
    b.feasible_r2_y = r_squared(data.y, l);
  }
  return b;
}

double attenuated_theta_plim(const DgpConfig& cfg) {
  if (cfg.mode != DgpMode::surrogate) throw ValidationError("attenuated_theta_plim: surrogate mode only");
  check_config(cfg);
  // Standardized independent targets: Var(Z) = number of modalities.
  const auto [lambda, mu] = confounding_scales(static_cast<double>(cfg.modality_specs.size()), cfg.theta0,
                                               cfg.snr, cfg.snr_convention);
  double unexplained = 0.0;
  for (const auto& s : cfg.modality_specs) unexplained += 1.0 - s.explainable_fraction;
  return cfg.theta0 - lambda * mu * unexplained / (lambda * lambda * unexplained + 1.0);
}

Descriptives describe(const Vector& v) {
  if (v.size() < 2) throw ValidationError("descriptives: need at least 2 observations");
  Descriptives s;
  s.count = static_cast<std::size_t>(v.size());
  s.mean = v.mean();
  s.std = sample_sd(v);
  s.min = v.minCoeff();
  s.q25 = quantile(v, 0.25);
  s.q50 = quantile(v, 0.50);
  s.q75 = quantile(v, 0.75);
  s.max = v.maxCoeff();
  return s;
}

DescriptiveTable descriptives(const SemiSynthDataset& data) { return {describe(data.y), describe(data.d)}; }

std::string format_descriptives(const DescriptiveTable& t) {
  std::string out = "           Y           D\n";
  char buf[96];
  std::snprintf(buf, sizeof buf, "count %11zu %11zu\n", t.y.count, t.d.count);
  out += buf;
  const std::pair<const char*, double Descriptives::*> rows[] = {
      {"mean ", &Descriptives::mean}, {"std  ", &Descriptives::std}, {"min  ", &Descriptives::min},
      {"25%  ", &Descriptives::q25},  {"50%  ", &Descriptives::q50}, {"75%  ", &Descriptives::q75},
      {"max  ", &Descriptives::max}};
  for (const auto& [label, field] : rows) {
    std::snprintf(buf, sizeof buf, "%s %11.6f %11.6f\n", label, t.y.*field, t.d.*field);
    out += buf;
  }
  return out;
}

}  // namespace dmldeep
