#include "dmldeep/types.hpp"

#include "dmldeep/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace dmldeep {

std::string to_string(TargetKind kind) {
  switch (kind) {
    case TargetKind::continuous: return "continuous";
    case TargetKind::binary: return "binary";
    case TargetKind::categorical: return "categorical";
  }
  return "continuous";
}

std::string to_string(Link link) { return link == Link::tanh ? "tanh" : "linear"; }

std::string to_string(SnrConvention c) {
  return c == SnrConvention::structural ? "structural" : "total_signal";
}

TargetKind target_kind_from_string(const std::string& s) {
  if (s == "continuous") return TargetKind::continuous;
  if (s == "binary") return TargetKind::binary;
  if (s == "categorical") return TargetKind::categorical;
  throw ValidationError("unknown target_kind '" + s + "'");
}

Link link_from_string(const std::string& s) {
  if (s == "linear") return Link::linear;
  if (s == "tanh") return Link::tanh;
  throw ValidationError("unknown link '" + s + "'");
}

SnrConvention snr_convention_from_string(const std::string& s) {
  if (s == "total_signal") return SnrConvention::total_signal;
  if (s == "structural") return SnrConvention::structural;
  throw ValidationError("unknown snr_convention '" + s + "'");
}

const ModalitySpec* Manifest::find_spec(const std::string& name) const {
  for (const auto& s : modality_specs)
    if (s.name == name) return &s;
  return nullptr;
}

namespace {

const Vector* find_column(const std::vector<NamedColumn>& cols, const std::string& name) {
  for (const auto& c : cols)
    if (c.name == name) return &c.values;
  return nullptr;
}

Vector take(const Vector& v, std::span<const std::size_t> rows) {
  Vector out(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Index>(i)] = v[static_cast<Index>(rows[i])];
  return out;
}

Matrix take_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(static_cast<Index>(rows[i]));
  return out;
}

}  // namespace

const Vector* OracleColumns::target(const std::string& modality) const {
  return find_column(targets, modality);
}

const Vector* OracleColumns::feasible_target(const std::string& modality) const {
  return find_column(feasible, modality);
}

const FeatureBlock* SemiSynthDataset::block(const std::string& name) const {
  for (const auto& b : blocks)
    if (b.name == name) return &b;
  return nullptr;
}

FeatureBlock* SemiSynthDataset::block(const std::string& name) {
  for (auto& b : blocks)
    if (b.name == name) return &b;
  return nullptr;
}

std::vector<std::string> SemiSynthDataset::modality_names() const {
  std::vector<std::string> names;
  for (const auto& b : blocks) names.push_back(b.name);
  return names;
}

std::string SemiSynthDataset::id(Index row) const {
  return ids.empty() ? std::to_string(row) : ids[static_cast<std::size_t>(row)];
}

SemiSynthDataset SemiSynthDataset::subset(std::span<const std::size_t> rows) const {
  SemiSynthDataset out;
  for (auto r : rows) out.ids.push_back(ids.empty() ? std::to_string(r) : ids[r]);
  out.y = take(y, rows);
  out.d = take(d, rows);
  out.manifest = manifest;
  for (const auto& b : blocks) out.blocks.push_back({b.name, b.columns, take_rows(b.values, rows)});
  if (oracle) {
    OracleColumns o;
    o.g0 = take(oracle->g0, rows);
    o.m0 = take(oracle->m0, rows);
    o.l0 = take(oracle->l0, rows);
    o.eps = take(oracle->eps, rows);
    o.nu = take(oracle->nu, rows);
    for (const auto& t : oracle->targets) o.targets.push_back({t.name, take(t.values, rows)});
    for (const auto& t : oracle->feasible) o.feasible.push_back({t.name, take(t.values, rows)});
    out.oracle = std::move(o);
  }
  return out;
}

Matrix stack_features(const SemiSynthDataset& data, const std::vector<std::string>& modalities) {
  Index cols = 0;
  for (const auto& name : modalities) {
    const auto* b = data.block(name);
    if (!b) throw SchemaError("dataset has no feature block '" + name + "'");
    cols += b->values.cols();
  }
  Matrix x(data.n(), cols);
  Index at = 0;
  for (const auto& name : modalities) {
    const auto& v = data.block(name)->values;
    x.middleCols(at, v.cols()) = v;
    at += v.cols();
  }
  return x;
}

bool NuisancePredictions::out_of_sample() const {
  return std::none_of(fold_id.begin(), fold_id.end(), [](int f) { return f < 0; });
}

std::string Violation::describe() const {
  std::string s = field;
  if (row) s += "[" + std::to_string(*row) + "]";
  return s + ": " + kind;
}

namespace {

void check_vector(std::vector<Violation>& out, const std::string& field, const Vector& v, Index n) {
  if (v.size() != n) {
    out.push_back({field, std::nullopt, "length " + std::to_string(v.size()) + " != n"});
    return;
  }
  for (Index i = 0; i < n; ++i)
    if (!std::isfinite(v[i])) out.push_back({field, i, "non-finite"});
}

void check_identity(std::vector<Violation>& out, const std::string& field, const Vector& lhs,
                    const Vector& a, double coef, const Vector& b, const Vector* c) {
  const Index n = lhs.size();
  if (a.size() != n || b.size() != n || (c && c->size() != n)) return;
  for (Index i = 0; i < n; ++i) {
    double rhs = coef * a[i] + b[i];
    double scale = std::abs(coef * a[i]) + std::abs(b[i]);
    if (c) {
      rhs += (*c)[i];
      scale += std::abs((*c)[i]);
    }
    if (!std::isfinite(lhs[i]) || !std::isfinite(rhs)) continue;
    if (std::abs(lhs[i] - rhs) > 1e-12 * std::max({1.0, std::abs(lhs[i]), scale}))
      out.push_back({field, i, "identity"});
  }
}

}  // namespace

std::vector<Violation> validate(const SemiSynthDataset& data) {
  std::vector<Violation> out;
  const Index n = data.y.size();
  if (n < 2) out.push_back({"n", std::nullopt, "fewer than 2 observations"});
  check_vector(out, "y", data.y, n);
  check_vector(out, "d", data.d, n);
  if (!data.ids.empty() && static_cast<Index>(data.ids.size()) != n)
    out.push_back({"ids", std::nullopt, "length != n"});

  std::set<std::string> names;
  for (const auto& b : data.blocks) {
    if (!names.insert(b.name).second) out.push_back({"blocks." + b.name, std::nullopt, "duplicate modality"});
    if (b.values.rows() != n) {
      out.push_back({b.name, std::nullopt, "rows " + std::to_string(b.values.rows()) + " != n"});
      continue;
    }
    if (b.values.cols() < 1) out.push_back({b.name, std::nullopt, "empty feature block"});
    if (static_cast<std::size_t>(b.values.cols()) != b.columns.size())
      out.push_back({b.name, std::nullopt, "column names do not match block width"});
    for (Index i = 0; i < n; ++i)
      if (!b.values.row(i).allFinite()) out.push_back({b.name, i, "non-finite"});
  }

  const Manifest& m = data.manifest;
  if (!(m.scale_m > 0)) out.push_back({"manifest.scale_m", std::nullopt, "must be > 0"});
  if (!(m.scale_g > 0)) out.push_back({"manifest.scale_g", std::nullopt, "must be > 0"});
  if (!(m.snr > 0)) out.push_back({"manifest.snr", std::nullopt, "must be > 0"});
  std::set<std::string> spec_names;
  for (const auto& s : m.modality_specs) {
    const std::string f = "manifest.modality_specs." + s.name;
    if (!spec_names.insert(s.name).second) out.push_back({f, std::nullopt, "duplicate modality"});
    if (!(s.explainable_fraction >= 0.0 && s.explainable_fraction <= 1.0))
      out.push_back({f, std::nullopt, "explainable_fraction outside [0,1]"});
    if (s.target_kind == TargetKind::categorical && s.categories < 2)
      out.push_back({f, std::nullopt, "categorical target needs k >= 2"});
    const auto* b = data.block(s.name);
    if (b && static_cast<std::size_t>(b->values.cols()) != s.feature_dim)
      out.push_back({f, std::nullopt, "feature_dim does not match block"});
    if (!b && s.feature_dim != 0) out.push_back({f, std::nullopt, "missing feature block"});
  }

  if (data.oracle) {
    const auto& o = *data.oracle;
    check_vector(out, "g0", o.g0, n);
    check_vector(out, "m0", o.m0, n);
    check_vector(out, "l0", o.l0, n);
    check_vector(out, "eps", o.eps, n);
    check_vector(out, "nu", o.nu, n);
    for (const auto& t : o.targets) check_vector(out, t.name + ":target", t.values, n);
    for (const auto& t : o.feasible) check_vector(out, t.name + ":feasible", t.values, n);
    check_identity(out, "l0", o.l0, o.m0, m.theta0, o.g0, nullptr);
    check_identity(out, "y", data.y, data.d, m.theta0, o.g0, &o.eps);
    check_identity(out, "d", data.d, o.m0, 1.0, o.nu, nullptr);
  }
  return out;
}

}  // namespace dmldeep
