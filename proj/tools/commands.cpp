#include "commands.hpp"

#include "dmldeep/config.hpp"
#include "dmldeep/dataset_io.hpp"
#include "dmldeep/dgp.hpp"
#include "dmldeep/dml.hpp"
#include "dmldeep/error.hpp"
#include "dmldeep/eval.hpp"
#include "dmldeep/metrics.hpp"
#include "dmldeep/render.hpp"

#include <cstdio>
#include <filesystem>
#include <ostream>

namespace dmldeep::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
}

void write_run_json(const json& invocation, const fs::path& dir) {
  json j = invocation;
  j["tool"] = "dmldeep";
  j["version"] = kVersion;
  write_text_file(dir / "run.json", j.dump(2) + "\n");
}

std::vector<std::string> resolve_modalities(const SemiSynthDataset& data, const std::vector<std::string>& mods) {
  return mods.empty() ? data.modality_names() : mods;
}

void print_bounds(const SemiSynthDataset& data, std::ostream& out) {
  const auto b = oracle_bounds(data);
  out << "oracle bounds\n"
      << "  RMSE(D, m0)  " << fmt(b.rmse_d) << "\n"
      << "  RMSE(Y, l0)  " << fmt(b.rmse_y) << "\n"
      << "  R2(D, m0)    " << fmt(b.r2_d) << "\n"
      << "  R2(Y, l0)    " << fmt(b.r2_y) << "\n";
  if (b.feasible_r2_d) out << "  R2(D, E[m0|X]) " << fmt(*b.feasible_r2_d) << "\n";
  if (b.feasible_r2_y) out << "  R2(Y, E[l0|X]) " << fmt(*b.feasible_r2_y) << "\n";
  out << "  OLS theta    " << fmt(b.ols_theta) << "\n"
      << "  theta0       " << fmt(data.manifest.theta0) << "\n";
  if (const auto plim = benchmark_bounds(data).attenuated_plim) out << "  attenuated plim " << fmt(*plim) << "\n";
}

json summary_json(const MeanSd& m) { return {{"mean", m.mean}, {"sd", m.sd}}; }

int cmd_generate(const json& inv, std::ostream& out) {
  const auto cfg = run_config_from_json(inv.at("config"));
  if (!cfg.dgp) throw ValidationError("config has no \"dgp\" section");
  const fs::path dir = inv["args"].at("out").get<std::string>();
  const auto data = generate(*cfg.dgp);
  write_dataset(data, dir);
  write_run_json(inv, dir);
  out << "wrote " << data.n() << " rows to " << dir.string() << "\n";
  out << format_descriptives(descriptives(data));
  out << "Var(Y) " << fmt(variance(data.y)) << "  Var(D) " << fmt(variance(data.d)) << "\n";
  print_bounds(data, out);
  return 0;
}

int cmd_estimate(const json& inv, std::ostream& out) {
  const auto& a = inv.at("args");
  const auto data = read_dataset(a.at("data").get<std::string>());
  const auto spec = learner_spec_from_json(a.at("learner_spec"));
  const auto mods = resolve_modalities(data, a.at("modalities").get<std::vector<std::string>>());
  const auto scheme = scheme_from_json(a.at("scheme"));
  const double alpha = a.at("alpha").get<double>();
  const auto threads = a.at("threads").get<std::size_t>();
  const fs::path dir = a.at("out").get<std::string>();

  json result = {{"learner", a.at("learner")},
                 {"kind", spec.kind_name()},
                 {"modalities", mods},
                 {"scheme", scheme_to_json(scheme)}};
  json repeats = json::array();
  json top;
  if (scheme.repeats == 1) {
    const auto seed = repeat_seeds(scheme).front();
    const auto r = scheme.kind == SplitKind::single
                       ? run_split(data, spec, scheme.train_fraction, seed, mods, alpha)
                       : run_crossfit(data, spec, scheme.folds, seed, mods, threads, alpha);
    json rj = {{"split_seed", seed},
               {"learner_tag", r.predictions.learner_tag},
               {"estimate", estimate_to_json(r.estimate)},
               {"diagnostics", diagnostics_to_json(r.diagnostics)}};
    if (!r.fold_theta.empty()) rj["fold_theta"] = r.fold_theta;
    repeats.push_back(rj);
    top = estimate_to_json(r.estimate);
    top["diagnostics"] = diagnostics_to_json(r.diagnostics);
    top["learner_tag"] = r.predictions.learner_tag;
    if (const auto* net = r.learner ? fusion_network(*r.learner) : nullptr) {
      ensure_dir(dir);
      write_text_file(dir / "fusion_weights.json", net->to_json().dump(2) + "\n");
    }
    const auto& e = r.estimate;
    out << "theta_hat " << fmt(e.theta_hat) << "  se " << fmt(e.se) << "  " << fmt(100 * (1 - e.alpha), 0)
        << "% CI [" << fmt(e.ci_low) << ", " << fmt(e.ci_high) << "]  n " << e.n_used << "\n";
  } else {
    const auto s = repeat_splits(data, spec, scheme, mods, threads, alpha);
    for (const auto& r : s.repeats) {
      json rj = {{"split_seed", r.split_seed},
                 {"learner_tag", r.split.predictions.learner_tag},
                 {"estimate", estimate_to_json(r.split.estimate)},
                 {"diagnostics", diagnostics_to_json(r.split.diagnostics)},
                 {"r2_y_rel", r.r2_y_rel ? json(*r.r2_y_rel) : json(nullptr)},
                 {"r2_d_rel", r.r2_d_rel ? json(*r.r2_d_rel) : json(nullptr)}};
      if (!r.split.fold_theta.empty()) rj["fold_theta"] = r.split.fold_theta;
      repeats.push_back(rj);
      const auto& e = r.split.estimate;
      out << "repeat seed " << r.split_seed << ": theta_hat " << fmt(e.theta_hat) << "  CI [" << fmt(e.ci_low)
          << ", " << fmt(e.ci_high) << "]\n";
    }
    top = estimate_to_json(aggregate_repeats(s));
    top["diagnostics"] = nullptr;
    top["learner_tag"] = s.repeats.front().split.predictions.learner_tag;
    result["aggregate"] = {{"theta", summary_json(s.theta)},
                           {"r2_y_rel", s.r2_y_rel ? summary_json(*s.r2_y_rel) : json(nullptr)},
                           {"r2_d_rel", s.r2_d_rel ? summary_json(*s.r2_d_rel) : json(nullptr)}};
    out << "theta_hat " << fmt(s.theta.mean) << " +- " << fmt(s.theta.sd) << " over " << s.repeats.size()
        << " repeats\n";
    if (s.r2_y_rel && s.r2_d_rel)
      out << "relative r2  Y " << fmt(s.r2_y_rel->mean) << "  D " << fmt(s.r2_d_rel->mean) << "\n";
  }
  top["split_descriptor"] = scheme.describe();
  top.update(result);
  result = top;
  result["repeats"] = repeats;
  ensure_dir(dir);
  write_text_file(dir / "estimate.json", result.dump(2) + "\n");
  write_run_json(inv, dir);
  return 0;
}

SemiSynthDataset benchmark_data(const RunConfig& cfg, const json& args) {
  const std::string data_dir = args.value("data", cfg.data);
  if (!data_dir.empty()) return read_dataset(data_dir);
  if (!cfg.dgp) throw ValidationError("benchmark needs a dataset: set \"data\" or a \"dgp\" section");
  return generate(*cfg.dgp);
}

std::vector<ModelEntry> default_roster(const RunConfig& cfg) {
  const auto available = available_learners(cfg);
  auto pick = [&](const std::string& name, const std::string& fallback) {
    for (const auto& l : available)
      if (l.name == name) return l.spec;
    return find_learner(available, fallback).spec;
  };
  return {{"Baseline", pick("Baseline", "gbt"), {"tab"}},
          {"Embedding", pick("Embedding", "embedding"), {}},
          {"Deep", pick("Deep", "fusion"), {}}};
}

int cmd_benchmark(const json& inv, std::ostream& out) {
  const auto cfg = run_config_from_json(inv.at("config"));
  const auto& a = inv.at("args");
  const fs::path dir = a.at("out").get<std::string>();
  const auto data = benchmark_data(cfg, a);
  auto roster = cfg.roster.empty() ? default_roster(cfg) : cfg.roster;
  for (auto& m : roster) m.modalities = resolve_modalities(data, m.modalities);
  const auto report = run_benchmark(data, roster, cfg.scheme, a.at("threads").get<std::size_t>(), config_digest(cfg));
  render_report(report, dir);
  write_text_file(dir / "report.json", report_to_json(report).dump(2) + "\n");
  write_run_json(inv, dir);
  out << report_markdown(report);
  return 0;
}

int cmd_trace(const json& inv, std::ostream& out) {
  const auto& a = inv.at("args");
  const auto data = read_dataset(a.at("data").get<std::string>());
  const auto spec = learner_spec_from_json(a.at("learner_spec"));
  const auto* params = std::get_if<FusionParams>(&spec.kind);
  if (!params) throw ValidationError("trace needs a fusion learner, got '" + spec.kind_name() + "'");
  const auto mods = resolve_modalities(data, a.at("modalities").get<std::vector<std::string>>());
  const fs::path dir = a.at("out").get<std::string>();
  const auto run = run_trace(data, *params, spec.seed, a.at("train_fraction").get<double>(),
                             a.at("split_seed").get<std::uint64_t>(), mods, a.at("alpha").get<double>());
  std::optional<double> reference;
  if (a.contains("reference") && !a["reference"].is_null()) reference = a["reference"].get<double>();
  else reference = benchmark_bounds(data).attenuated_plim.value_or(data.manifest.theta0);
  render_trace(run.trace, dir, reference);
  write_run_json(inv, dir);
  for (const auto& p : run.trace.points)
    out << "epoch " << p.epoch << "  theta_hat " << fmt(p.theta_hat) << "  CI [" << fmt(p.ci_low) << ", "
        << fmt(p.ci_high) << "]\n";
  return 0;
}

int cmd_import(const json& inv, std::ostream& out) {
  const auto& a = inv.at("args");
  const fs::path src = a.at("data").get<std::string>();
  const fs::path dir = a.value("out", src.string());
  auto data = read_dataset(src);
  const auto modality = a.at("modality").get<std::string>();
  import_embeddings(data, a.at("embeddings").get<std::string>(), modality, a.value("replace", false));
  write_dataset(data, dir);
  write_run_json(inv, dir);
  const auto* b = data.block(modality);
  out << "imported " << b->values.cols() << " columns into block '" << modality << "' (" << data.n() << " rows)\n";
  return 0;
}

}  // namespace

int execute(const json& invocation, std::ostream& out) {
  try {
    const auto command = invocation.at("command").get<std::string>();
    if (command == "generate") return cmd_generate(invocation, out);
    if (command == "estimate") return cmd_estimate(invocation, out);
    if (command == "benchmark") return cmd_benchmark(invocation, out);
    if (command == "trace") return cmd_trace(invocation, out);
    if (command == "import-embeddings") return cmd_import(invocation, out);
    throw ValidationError("unknown command '" + command + "'");
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed invocation: ") + e.what());
  }
}

int exit_code_for_current_exception(std::ostream& err) {
  try {
    throw;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::io);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace dmldeep::cli
