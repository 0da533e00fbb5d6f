#include "dmldeep/eval.hpp"

#include "dmldeep/dgp.hpp"
#include "dmldeep/error.hpp"
#include "dmldeep/metrics.hpp"

#include <algorithm>

namespace dmldeep {

using nlohmann::json;

BenchmarkBounds benchmark_bounds(const SemiSynthDataset& data) {
  BenchmarkBounds b;
  b.theta0 = data.manifest.theta0;
  b.ols_theta = ols_baseline(data.y, data.d);
  if (data.oracle) {
    b.oracle_r2_y = r_squared(data.y, data.oracle->l0);
    b.oracle_r2_d = r_squared(data.d, data.oracle->m0);
  }
  if (data.manifest.mode == "surrogate" && !data.manifest.modality_specs.empty()) {
    DgpConfig cfg;
    cfg.n = static_cast<std::size_t>(data.n());
    cfg.theta0 = data.manifest.theta0;
    cfg.snr = data.manifest.snr;
    cfg.snr_convention = data.manifest.snr_convention;
    cfg.modality_specs = data.manifest.modality_specs;
    try {
      b.attenuated_plim = attenuated_theta_plim(cfg);
    } catch (const ValidationError&) {
      // Imported blocks can leave a surrogate manifest without a usable config.
    }
  }
  return b;
}

BenchmarkReport run_benchmark(const SemiSynthDataset& data, const std::vector<ModelEntry>& roster,
                              const SplitScheme& scheme, std::size_t threads, const std::string& config_digest) {
  if (roster.empty()) throw ValidationError("benchmark: model roster is empty");
  for (std::size_t i = 0; i < roster.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (roster[i].name == roster[j].name) throw ValidationError("benchmark: duplicate model name '" + roster[i].name + "'");

  BenchmarkReport report;
  report.bounds = benchmark_bounds(data);
  report.scheme = scheme.describe();
  report.config_digest = config_digest;
  for (const auto& entry : roster) {
    const auto summary = repeat_splits(data, entry.spec, scheme, entry.modalities, threads);
    ModelRow row;
    row.name = entry.name;
    row.learner = entry.spec.kind_name();
    row.modalities = entry.modalities;
    row.repeats = summary.repeats.size();
    row.theta = summary.theta;
    row.r2_y_rel = summary.r2_y_rel;
    row.r2_d_rel = summary.r2_d_rel;
    for (const auto& r : summary.repeats) {
      row.theta_values.push_back(r.split.estimate.theta_hat);
      if (r.r2_y_rel && exceeds_ceiling(*r.r2_y_rel)) row.y_above_ceiling = true;
      if (r.r2_d_rel && exceeds_ceiling(*r.r2_d_rel)) row.d_above_ceiling = true;
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

namespace {

json mean_sd_json(const std::optional<MeanSd>& v) {
  if (!v) return nullptr;
  return {{"mean", v->mean}, {"sd", v->sd}};
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

json report_to_json(const BenchmarkReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"name", row.name},
                    {"learner", row.learner},
                    {"modalities", row.modalities},
                    {"repeats", row.repeats},
                    {"theta", mean_sd_json(row.theta)},
                    {"theta_values", row.theta_values},
                    {"r2_y_rel", mean_sd_json(row.r2_y_rel)},
                    {"r2_d_rel", mean_sd_json(row.r2_d_rel)},
                    {"r2_y_rel_above_ceiling", row.y_above_ceiling},
                    {"r2_d_rel_above_ceiling", row.d_above_ceiling}});
  }
  return {{"rows", rows},
          {"bounds",
           {{"theta0", r.bounds.theta0},
            {"ols_theta", r.bounds.ols_theta},
            {"oracle_r2_y", optional_json(r.bounds.oracle_r2_y)},
            {"oracle_r2_d", optional_json(r.bounds.oracle_r2_d)},
            {"attenuated_plim", optional_json(r.bounds.attenuated_plim)}}},
          {"scheme", r.scheme},
          {"config_digest", r.config_digest}};
}

EpochTrace epoch_trace(const TrainingLog& log, const Vector& y, const Vector& d, const Vector* l0, const Vector* m0,
                       double alpha) {
  if (log.epochs.empty()) throw ValidationError("epoch_trace: training log is empty");
  std::optional<double> oracle_y, oracle_d;
  if (l0) oracle_y = r_squared(y, *l0);
  if (m0) oracle_d = r_squared(d, *m0);

  EpochTrace trace;
  for (const auto& rec : log.epochs) {
    if (rec.holdout_l_hat.size() != y.size() || rec.holdout_m_hat.size() != y.size())
      throw ValidationError("epoch_trace: epoch " + std::to_string(rec.epoch) + " has no holdout predictions for these rows");
    if (!trace.points.empty() && rec.epoch <= trace.points.back().epoch)
      throw ValidationError("epoch_trace: epochs are not strictly increasing");
    NuisancePredictions p;
    p.l_hat = rec.holdout_l_hat;
    p.m_hat = rec.holdout_m_hat;
    p.fold_id.assign(static_cast<std::size_t>(y.size()), 0);
    const auto e = solve_theta(p, y, d, alpha);
    EpochPoint pt;
    pt.epoch = rec.epoch;
    pt.theta_hat = e.theta_hat;
    pt.ci_low = e.ci_low;
    pt.ci_high = e.ci_high;
    if (oracle_y) pt.r2_y_rel = relative_r2(y, p.l_hat, *oracle_y);
    if (oracle_d) pt.r2_d_rel = relative_r2(d, p.m_hat, *oracle_d);
    trace.points.push_back(pt);
  }
  return trace;
}

TraceRun run_trace(const SemiSynthDataset& data, const FusionParams& params, std::uint64_t learner_seed,
                   double train_fraction, std::uint64_t split_seed, const std::vector<std::string>& modalities,
                   double alpha) {
  auto [train_rows, test_rows] = split_rows(static_cast<std::size_t>(data.n()), train_fraction, split_seed);
  const auto train = data.subset(train_rows);
  const auto test = data.subset(test_rows);

  // The test rows are only observed, never used for selection.
  FusionParams p = params;
  p.selection = EpochSelection::last_epoch;
  const FusionNet net = train_fusion(p, learner_seed, train, &test, modalities);

  TraceRun out;
  out.trace = epoch_trace(net.log, test.y, test.d, test.oracle ? &test.oracle->l0 : nullptr,
                          test.oracle ? &test.oracle->m0 : nullptr, alpha);
  auto [l, m] = net.predict(test);
  out.split.predictions.l_hat = std::move(l);
  out.split.predictions.m_hat = std::move(m);
  out.split.predictions.fold_id.assign(test_rows.size(), 0);
  out.split.predictions.learner_tag = "fusion-trace";
  out.split.estimate = solve_theta(out.split.predictions, test.y, test.d, alpha);
  out.split.diagnostics = score_diagnostics(out.split.predictions, test.y, test.d, out.split.estimate.theta_hat,
                                            test.oracle ? &*test.oracle : nullptr);
  out.split.eval_rows = std::move(test_rows);
  out.split.train_rows = std::move(train_rows);
  return out;
}

}  // namespace dmldeep
