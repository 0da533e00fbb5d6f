#include "dmldeep/dml.hpp"

#include "dmldeep/dgp.hpp"
#include "dmldeep/error.hpp"
#include "dmldeep/metrics.hpp"
#include "dmldeep/parallel.hpp"
#include "dmldeep/rng.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace dmldeep {

using nlohmann::json;

namespace {

void require_same_length(const Vector& y, const Vector& d, const Vector& l, const Vector& m) {
  if (d.size() != y.size() || l.size() != y.size() || m.size() != y.size())
    throw ValidationError("score: input lengths differ");
}

}  // namespace

Vector score_psi(const Vector& y, const Vector& d, const Vector& l_hat, const Vector& m_hat, double theta) {
  require_same_length(y, d, l_hat, m_hat);
  const Vector rd = d - m_hat;
  return ((y - l_hat - theta * rd).array() * rd.array()).matrix();
}

Vector score_naive(const Vector& y, const Vector& d, const Vector& l_hat, const Vector& m_hat, double theta) {
  require_same_length(y, d, l_hat, m_hat);
  return ((y - l_hat - theta * (d - m_hat)).array() * d.array()).matrix();
}

EffectEstimate solve_theta(const NuisancePredictions& preds, const Vector& y, const Vector& d, double alpha) {
  require_same_length(y, d, preds.l_hat, preds.m_hat);
  if (y.size() < 2) throw ValidationError("solve_theta: need at least 2 observations");
  if (static_cast<Index>(preds.fold_id.size()) != y.size())
    throw ValidationError("solve_theta: fold ids do not cover the predictions");
  if (!preds.out_of_sample())
    throw ValidationError("solve_theta: in-sample predictions (fold_id = -1) cannot be used for estimation");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("solve_theta: alpha must lie in (0,1)");

  const auto n = static_cast<double>(y.size());
  const Vector rd = d - preds.m_hat;
  const Vector ry = y - preds.l_hat;
  const double j = rd.squaredNorm() / n;
  const double var_d = variance(d);
  if (!(j >= 1e-8 * var_d) || !(j > 0.0))
    throw WeakIdentificationError("mean((d - m_hat)^2) = " + std::to_string(j) + " below 1e-8 * Var(d)");

  EffectEstimate e;
  e.theta_hat = ry.dot(rd) / rd.squaredNorm();
  const Vector psi = ((ry - e.theta_hat * rd).array() * rd.array()).matrix();
  const double sigma2 = psi.squaredNorm() / n / (j * j);
  e.se = std::sqrt(sigma2 / n);
  const double z = normal_quantile(1.0 - alpha / 2.0);
  e.ci_low = e.theta_hat - z * e.se;
  e.ci_high = e.theta_hat + z * e.se;
  e.alpha = alpha;
  e.n_used = static_cast<std::size_t>(y.size());
  e.score_mean = psi.mean();
  e.denom = j;
  return e;
}

ScoreDiagnostics score_diagnostics(const NuisancePredictions& preds, const Vector& y, const Vector& d, double theta,
                                   const OracleColumns* oracle) {
  require_same_length(y, d, preds.l_hat, preds.m_hat);
  ScoreDiagnostics out;
  const Vector psi = score_psi(y, d, preds.l_hat, preds.m_hat, theta);
  out.psi_mean = psi.mean();
  out.psi_var = variance(psi);

  auto direction = [](const Vector& v) -> Vector {
    const double sd = std::sqrt(variance(v));
    if (!(sd > 0.0)) return Vector::Zero(v.size());
    return (v.array() - v.mean()) / sd;
  };
  const Vector dl = direction(preds.l_hat);
  const Vector dm = direction(preds.m_hat);
  const Vector rd = d - preds.m_hat;
  const Vector u = y - preds.l_hat - theta * rd;
  // The score is linear in l and quadratic in m; these are exact directional derivatives.
  out.orth_deriv_l = -(dl.array() * rd.array()).mean();
  out.orth_deriv_m = (dm.array() * (theta * rd - u).array()).mean();
  if (oracle) out.rate_product = rate_diagnostic(preds, oracle->l0, oracle->m0);
  return out;
}

double rate_diagnostic(const NuisancePredictions& preds, const Vector& l0, const Vector& m0) {
  if (l0.size() != preds.size() || m0.size() != preds.size())
    throw ValidationError("rate_diagnostic: oracle columns do not match predictions");
  const double em = empirical_norm(preds.m_hat - m0);
  const double el = empirical_norm(preds.l_hat - l0);
  return em * (em + el) * std::sqrt(static_cast<double>(preds.size()));
}

std::string SplitScheme::describe() const {
  std::ostringstream s;
  if (kind == SplitKind::single) s << "single(train_fraction=" << train_fraction << ")";
  else s << "kfold(K=" << folds << ")";
  s << " x" << repeats << " seed=" << seed;
  return s.str();
}

void check_scheme(const SplitScheme& s) {
  if (s.kind == SplitKind::single && !(s.train_fraction > 0.0 && s.train_fraction < 1.0))
    throw ValidationError("split: train_fraction must lie in (0,1)");
  if (s.kind == SplitKind::kfold && s.folds < 2) throw ValidationError("split: K must be >= 2");
  if (s.repeats < 1) throw ValidationError("split: repeats must be >= 1");
  if (!s.repeat_seeds.empty() && s.repeat_seeds.size() != s.repeats)
    throw ValidationError("split: repeat_seeds must list one seed per repeat");
}

json scheme_to_json(const SplitScheme& s) {
  json j = {{"kind", s.kind == SplitKind::single ? "single" : "kfold"},
            {"train_fraction", s.train_fraction},
            {"folds", s.folds},
            {"repeats", s.repeats},
            {"seed", s.seed}};
  if (!s.repeat_seeds.empty()) j["repeat_seeds"] = s.repeat_seeds;
  return j;
}

SplitScheme scheme_from_json(const json& j) {
  try {
    SplitScheme s;
    const auto kind = j.value("kind", std::string("single"));
    if (kind == "single") s.kind = SplitKind::single;
    else if (kind == "kfold") s.kind = SplitKind::kfold;
    else throw ValidationError("unknown split kind '" + kind + "'");
    s.train_fraction = j.value("train_fraction", s.train_fraction);
    s.folds = j.value("folds", s.folds);
    s.repeats = j.value("repeats", s.repeats);
    s.seed = j.value("seed", s.seed);
    if (j.contains("repeat_seeds")) s.repeat_seeds = j["repeat_seeds"].get<std::vector<std::uint64_t>>();
    check_scheme(s);
    return s;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed split scheme: ") + e.what());
  }
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_rows(std::size_t n, double train_fraction,
                                                                          std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ValidationError("split: train_fraction must lie in (0,1)");
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  if (n_train < 2 || n - n_train < 2) throw ValidationError("split: dataset too small for the requested split");
  Rng rng(derive_seed(seed, "split"));
  auto perm = rng.permutation(n);
  std::vector<std::size_t> train(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {train, test};
}

SplitResult run_split(const SemiSynthDataset& data, const LearnerSpec& spec, double train_fraction,
                      std::uint64_t split_seed, const std::vector<std::string>& modalities, double alpha) {
  auto [train_rows, test_rows] = split_rows(static_cast<std::size_t>(data.n()), train_fraction, split_seed);
  const auto train = data.subset(train_rows);
  const auto test = data.subset(test_rows);

  SplitResult r;
  std::shared_ptr<const FittedLearner> learner = fit(spec, train, modalities);
  r.predictions = predict(*learner, test, 0);
  r.estimate = solve_theta(r.predictions, test.y, test.d, alpha);
  r.diagnostics = score_diagnostics(r.predictions, test.y, test.d, r.estimate.theta_hat,
                                    test.oracle ? &*test.oracle : nullptr);
  r.eval_rows = std::move(test_rows);
  r.train_rows = std::move(train_rows);
  r.learner = std::move(learner);
  return r;
}

SplitResult run_crossfit(const SemiSynthDataset& data, const LearnerSpec& spec, std::size_t folds,
                         std::uint64_t split_seed, const std::vector<std::string>& modalities, std::size_t threads,
                         double alpha) {
  const auto n = static_cast<std::size_t>(data.n());
  if (folds < 2) throw ValidationError("crossfit: K must be >= 2");
  if (folds > n / 2) throw ValidationError("crossfit: K must be <= n/2");

  Rng rng(derive_seed(split_seed, "kfold"));
  const auto perm = rng.permutation(n);
  std::vector<int> fold_of(n);
  for (std::size_t i = 0; i < n; ++i) fold_of[perm[i]] = static_cast<int>(i % folds);

  SplitResult r;
  r.predictions.l_hat.resize(data.n());
  r.predictions.m_hat.resize(data.n());
  r.predictions.fold_id.assign(n, -1);
  r.fold_theta.assign(folds, 0.0);
  std::vector<std::string> tags(folds);

  parallel_for(folds, threads, [&](std::size_t k) {
    std::vector<std::size_t> train_rows, test_rows;
    for (std::size_t i = 0; i < n; ++i) (fold_of[i] == static_cast<int>(k) ? test_rows : train_rows).push_back(i);
    LearnerSpec fold_spec = spec;
    fold_spec.seed = derive_seed(spec.seed, "fold", k);
    const auto test = data.subset(test_rows);
    const auto learner = fit(fold_spec, data.subset(train_rows), modalities);
    const auto p = predict(*learner, test, static_cast<int>(k));
    for (std::size_t i = 0; i < test_rows.size(); ++i) {
      r.predictions.l_hat[static_cast<Index>(test_rows[i])] = p.l_hat[static_cast<Index>(i)];
      r.predictions.m_hat[static_cast<Index>(test_rows[i])] = p.m_hat[static_cast<Index>(i)];
      r.predictions.fold_id[test_rows[i]] = p.fold_id[i];
    }
    const Vector rd = test.d - p.m_hat;
    r.fold_theta[k] = (test.y - p.l_hat).dot(rd) / rd.squaredNorm();
    tags[k] = p.learner_tag;
  });

  r.predictions.learner_tag = tags.front();
  r.estimate = solve_theta(r.predictions, data.y, data.d, alpha);
  r.diagnostics = score_diagnostics(r.predictions, data.y, data.d, r.estimate.theta_hat,
                                    data.oracle ? &*data.oracle : nullptr);
  r.eval_rows.resize(n);
  for (std::size_t i = 0; i < n; ++i) r.eval_rows[i] = i;
  return r;
}

MeanSd mean_sd(const std::vector<double>& values) {
  if (values.empty()) throw ValidationError("mean_sd: no values");
  const Vector v = Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
  return {v.mean(), sample_sd(v)};
}

std::vector<std::uint64_t> repeat_seeds(const SplitScheme& s) {
  if (!s.repeat_seeds.empty()) return s.repeat_seeds;
  std::vector<std::uint64_t> out;
  for (std::size_t r = 0; r < s.repeats; ++r) out.push_back(derive_seed(s.seed, "repeat", r));
  return out;
}

EffectEstimate aggregate_repeats(const RepeatSummary& s) {
  if (s.repeats.empty()) throw ValidationError("aggregate_repeats: no repeats");
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto k = v.size() / 2;
    return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
  };
  std::vector<double> theta;
  for (const auto& r : s.repeats) theta.push_back(r.split.estimate.theta_hat);
  const auto& first = s.repeats.front().split.estimate;
  EffectEstimate e;
  e.theta_hat = median(theta);
  std::vector<double> var;
  for (const auto& r : s.repeats) {
    const double dev = r.split.estimate.theta_hat - e.theta_hat;
    var.push_back(r.split.estimate.se * r.split.estimate.se + dev * dev);
  }
  e.se = std::sqrt(median(var));
  const double z = normal_quantile(1.0 - first.alpha / 2.0);
  e.ci_low = e.theta_hat - z * e.se;
  e.ci_high = e.theta_hat + z * e.se;
  e.alpha = first.alpha;
  e.n_used = first.n_used;
  std::vector<double> sm, dn;
  for (const auto& r : s.repeats) {
    sm.push_back(r.split.estimate.score_mean);
    dn.push_back(r.split.estimate.denom);
  }
  e.score_mean = median(sm);
  e.denom = median(dn);
  return e;
}

RepeatSummary repeat_splits(const SemiSynthDataset& data, const LearnerSpec& spec, const SplitScheme& scheme,
                            const std::vector<std::string>& modalities, std::size_t threads, double alpha) {
  check_scheme(scheme);
  if (scheme.repeats < 2) throw ValidationError("repeat_splits: need at least 2 repeats");
  const auto seeds = repeat_seeds(scheme);
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
    throw ValidationError("repeat_splits: repeats must use distinct seeds");

  RepeatSummary out;
  out.repeats.resize(seeds.size());
  parallel_for(seeds.size(), threads, [&](std::size_t r) {
    LearnerSpec rspec = spec;
    rspec.seed = derive_seed(spec.seed, "repeat", r);
    RepeatResult& rr = out.repeats[r];
    rr.split_seed = seeds[r];
    rr.split = scheme.kind == SplitKind::single
                   ? run_split(data, rspec, scheme.train_fraction, seeds[r], modalities, alpha)
                   : run_crossfit(data, rspec, scheme.folds, seeds[r], modalities, 1, alpha);
    if (data.oracle) {
      const auto eval = data.subset(rr.split.eval_rows);
      rr.r2_y_rel = relative_r2(eval.y, rr.split.predictions.l_hat, r_squared(eval.y, eval.oracle->l0));
      rr.r2_d_rel = relative_r2(eval.d, rr.split.predictions.m_hat, r_squared(eval.d, eval.oracle->m0));
    }
  });

  std::vector<double> theta, ry, rd;
  for (const auto& rr : out.repeats) {
    theta.push_back(rr.split.estimate.theta_hat);
    if (rr.r2_y_rel) ry.push_back(*rr.r2_y_rel);
    if (rr.r2_d_rel) rd.push_back(*rr.r2_d_rel);
  }
  out.theta = mean_sd(theta);
  if (!ry.empty()) out.r2_y_rel = mean_sd(ry);
  if (!rd.empty()) out.r2_d_rel = mean_sd(rd);
  return out;
}

OrthogonalityResult orthogonality_check(const SemiSynthDataset& data, double t, std::uint64_t seed, ScoreKind kind) {
  if (t == 0.0) throw ValidationError("orthogonality_check: t must be nonzero");
  if (!data.oracle) throw ValidationError("orthogonality_check: dataset has no oracle columns");
  const auto& o = *data.oracle;
  if (o.targets.empty()) throw ValidationError("orthogonality_check: oracle has no latent targets");

  auto make_direction = [&](const char* tag) {
    Rng rng(derive_seed(seed, tag));
    Vector s = Vector::Zero(data.n());
    for (const auto& target : o.targets) s += rng.uniform(0.5, 1.0) * standardize_target(target.values);
    return Vector(s.array().tanh());
  };
  const Vector delta_l = make_direction("orthogonality-l");
  const Vector delta_m = make_direction("orthogonality-m");
  const double theta0 = data.manifest.theta0;
  auto mean_score = [&](const Vector& l, const Vector& m) {
    return kind == ScoreKind::orthogonal ? score_psi(data.y, data.d, l, m, theta0).mean()
                                         : score_naive(data.y, data.d, l, m, theta0).mean();
  };

  OrthogonalityResult r;
  r.deriv_l = (mean_score(o.l0 + t * delta_l, o.m0) - mean_score(o.l0 - t * delta_l, o.m0)) / (2.0 * t);
  r.deriv_m = (mean_score(o.l0, o.m0 + t * delta_m) - mean_score(o.l0, o.m0 - t * delta_m)) / (2.0 * t);
  return r;
}

json estimate_to_json(const EffectEstimate& e) {
  return {{"theta_hat", e.theta_hat},       {"se", e.se},
          {"ci", {e.ci_low, e.ci_high}},    {"alpha", e.alpha},
          {"n_used", e.n_used},             {"score_mean", e.score_mean},
          {"denom", e.denom}};
}

json diagnostics_to_json(const ScoreDiagnostics& d) {
  json j = {{"psi_mean", d.psi_mean},
            {"psi_var", d.psi_var},
            {"orth_deriv_l", d.orth_deriv_l},
            {"orth_deriv_m", d.orth_deriv_m}};
  j["rate_product"] = d.rate_product ? json(*d.rate_product) : json(nullptr);
  return j;
}

}  // namespace dmldeep
