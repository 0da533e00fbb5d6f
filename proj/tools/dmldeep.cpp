#include "commands.hpp"

#include "dmldeep/config.hpp"
#include "dmldeep/error.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dmldeep;

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::string absolute(const std::string& p) { return fs::absolute(p).lexically_normal().string(); }

json config_json(const std::string& path, std::optional<std::uint64_t> split_seed,
                 std::optional<std::uint64_t> learner_seed) {
  json j = path.empty() ? json::object() : load_json(path);
  if (!j.is_object()) throw ValidationError("config " + path + " must hold a JSON object");
  if (split_seed) j["seeds"]["split"] = *split_seed;
  if (learner_seed) j["seeds"]["learner"] = *learner_seed;
  if (split_seed && j.contains("scheme")) j["scheme"].erase("seed");
  return j;
}

struct Flags {
  std::string config, data, out, learner, modalities, embeddings, modality, run_file;
  double split = 0.5, alpha = 0.05;
  std::optional<double> reference;
  std::size_t folds = 0, repeats = 1, threads = 1;
  std::optional<std::uint64_t> split_seed, learner_seed;
  bool replace = false;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Double machine learning with multimodal confounders"};
  app.require_subcommand(1);
  Flags f;

  auto* gen = app.add_subcommand("generate", "Generate a semi-synthetic dataset from a config");
  gen->add_option("--config", f.config, "Run config JSON")->required();
  gen->add_option("--out", f.out, "Dataset directory (default: config outputs)");

  auto* est = app.add_subcommand("estimate", "Estimate theta on a dataset directory");
  est->add_option("--data", f.data, "Dataset directory")->required();
  est->add_option("--learner", f.learner, "Learner name")->default_val("ridge");
  est->add_option("--config", f.config, "Run config JSON with named learners");
  est->add_option("--split", f.split, "Training share of a single split")->default_val(0.5);
  est->add_option("--folds", f.folds, "Cross-fit with K folds instead of a single split");
  est->add_option("--repeats", f.repeats, "Repeated splits")->default_val(1);
  est->add_option("--modalities", f.modalities, "Comma separated feature blocks (default: all)");
  est->add_option("--threads", f.threads, "Worker threads")->default_val(1);
  est->add_option("--split-seed", f.split_seed, "Split seed");
  est->add_option("--learner-seed", f.learner_seed, "Learner seed");
  est->add_option("--alpha", f.alpha, "CI level is 1 - alpha")->default_val(0.05);
  est->add_option("--out", f.out, "Output directory (default: <data>/estimate)");

  auto* bench = app.add_subcommand("benchmark", "Run a model roster and write report files");
  bench->add_option("--config", f.config, "Run config JSON")->required();
  bench->add_option("--data", f.data, "Dataset directory (default: config data or dgp)");
  bench->add_option("--out", f.out, "Output directory (default: config outputs)");
  bench->add_option("--threads", f.threads, "Worker threads");

  auto* tr = app.add_subcommand("trace", "Per-epoch theta trace of a fusion network");
  tr->add_option("--data", f.data, "Dataset directory")->required();
  tr->add_option("--learner", f.learner, "Fusion learner name")->default_val("fusion");
  tr->add_option("--config", f.config, "Run config JSON with named learners");
  tr->add_option("--split", f.split, "Training share")->default_val(0.5);
  tr->add_option("--modalities", f.modalities, "Comma separated feature blocks (default: all)");
  tr->add_option("--split-seed", f.split_seed, "Split seed");
  tr->add_option("--learner-seed", f.learner_seed, "Learner seed");
  tr->add_option("--reference", f.reference, "Reference line (default: attenuated plim or theta0)");
  tr->add_option("--alpha", f.alpha, "CI level is 1 - alpha")->default_val(0.05);
  tr->add_option("--out", f.out, "Output directory (default: <data>/trace)");

  auto* imp = app.add_subcommand("import-embeddings", "Add an embedding CSV as a feature block");
  imp->add_option("--data", f.data, "Dataset directory")->required();
  imp->add_option("--embeddings", f.embeddings, "CSV with id,e0,...")->required();
  imp->add_option("--modality", f.modality, "Block name")->required();
  imp->add_flag("--replace", f.replace, "Replace an existing block");
  imp->add_option("--out", f.out, "Write the updated dataset here instead of in place");

  auto* rerun = app.add_subcommand("rerun", "Replay a run.json");
  rerun->add_option("run", f.run_file, "run.json path")->required();
  rerun->add_option("--out", f.out, "Override the output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ErrorKind::validation);
  }

  try {
    json inv;
    json args = json::object();
    if (gen->parsed()) {
      const auto cfg = run_config_from_json(config_json(f.config, std::nullopt, std::nullopt));
      inv = {{"command", "generate"}, {"config", run_config_to_json(cfg)}};
      args["out"] = absolute(f.out.empty() ? cfg.outputs : f.out);
    } else if (est->parsed() || tr->parsed()) {
      const auto cfg = run_config_from_json(config_json(f.config, f.split_seed, f.learner_seed));
      const auto learner = find_learner(available_learners(cfg), f.learner);
      inv = {{"command", est->parsed() ? "estimate" : "trace"}, {"config", nullptr}};
      args["data"] = absolute(f.data);
      args["learner"] = learner.name;
      args["learner_spec"] = learner_spec_to_json(learner.spec);
      args["modalities"] = split_list(f.modalities);
      args["alpha"] = f.alpha;
      if (est->parsed()) {
        SplitScheme s;
        s.kind = f.folds > 0 ? SplitKind::kfold : SplitKind::single;
        s.train_fraction = f.split;
        if (f.folds > 0) s.folds = f.folds;
        s.repeats = f.repeats;
        s.seed = f.split_seed.value_or(cfg.seeds.split);
        check_scheme(s);
        args["scheme"] = scheme_to_json(s);
        args["threads"] = f.threads;
        args["out"] = absolute(f.out.empty() ? (fs::path(f.data) / "estimate").string() : f.out);
      } else {
        args["train_fraction"] = f.split;
        args["split_seed"] = f.split_seed.value_or(cfg.seeds.split);
        args["reference"] = f.reference ? json(*f.reference) : json(nullptr);
        args["out"] = absolute(f.out.empty() ? (fs::path(f.data) / "trace").string() : f.out);
      }
    } else if (bench->parsed()) {
      const auto cfg = run_config_from_json(config_json(f.config, std::nullopt, std::nullopt));
      inv = {{"command", "benchmark"}, {"config", run_config_to_json(cfg)}};
      if (!f.data.empty()) args["data"] = absolute(f.data);
      else if (!cfg.data.empty()) args["data"] = absolute(cfg.data);
      args["threads"] = bench->count("--threads") ? f.threads : cfg.threads;
      args["out"] = absolute(f.out.empty() ? cfg.outputs : f.out);
    } else if (imp->parsed()) {
      inv = {{"command", "import-embeddings"}, {"config", nullptr}};
      args["data"] = absolute(f.data);
      args["embeddings"] = absolute(f.embeddings);
      args["modality"] = f.modality;
      args["replace"] = f.replace;
      args["out"] = absolute(f.out.empty() ? f.data : f.out);
    } else {
      inv = load_json(f.run_file);
      if (!inv.is_object() || !inv.contains("args")) throw ValidationError(f.run_file + " is not a run.json");
      if (!f.out.empty()) inv["args"]["out"] = absolute(f.out);
      inv.erase("tool");
      inv.erase("version");
      return cli::execute(inv, std::cout);
    }
    inv["args"] = args;
    return cli::execute(inv, std::cout);
  } catch (...) {
    return cli::exit_code_for_current_exception(std::cerr);
  }
}
