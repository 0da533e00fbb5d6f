#include "dmldeep/config.hpp"

#include "dmldeep/error.hpp"
#include "dmldeep/rng.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace dmldeep {

using nlohmann::json;

json dgp_config_to_json(const DgpConfig& c) {
  json mods = json::array();
  for (const auto& s : c.modality_specs) {
    json js = {{"name", s.name},
               {"feature_dim", s.feature_dim},
               {"target_kind", to_string(s.target_kind)},
               {"explainable_fraction", s.explainable_fraction},
               {"link", to_string(s.link)}};
    if (s.target_kind == TargetKind::categorical) js["categories"] = s.categories;
    if (!s.target_path.empty()) js["target_path"] = s.target_path;
    mods.push_back(std::move(js));
  }
  return {{"n", c.n},
          {"theta0", c.theta0},
          {"snr", c.snr},
          {"snr_convention", to_string(c.snr_convention)},
          {"mode", c.mode == DgpMode::surrogate ? "surrogate" : "ingest"},
          {"modalities", mods}};
}

DgpConfig dgp_config_from_json(const json& j) {
  try {
    DgpConfig c;
    c.n = j.value("n", c.n);
    c.theta0 = j.value("theta0", c.theta0);
    c.snr = j.value("snr", c.snr);
    c.snr_convention = snr_convention_from_string(j.value("snr_convention", std::string("total_signal")));
    const auto mode = j.value("mode", std::string("surrogate"));
    if (mode == "surrogate") c.mode = DgpMode::surrogate;
    else if (mode == "ingest") c.mode = DgpMode::ingest;
    else throw ValidationError("unknown dgp mode '" + mode + "'");
    if (j.contains("modalities")) {
      for (const auto& js : j.at("modalities")) {
        ModalitySpec s;
        s.name = js.at("name").get<std::string>();
        s.feature_dim = js.value("feature_dim", std::size_t{8});
        s.target_kind = target_kind_from_string(js.value("target_kind", std::string("continuous")));
        s.categories = js.value("categories", std::size_t{0});
        s.explainable_fraction = js.value("explainable_fraction", 1.0);
        s.link = link_from_string(js.value("link", std::string("linear")));
        s.target_path = js.value("target_path", std::string());
        c.modality_specs.push_back(std::move(s));
      }
    } else {
      c.modality_specs = default_dgp_config(c.n, 0, j.value("explainable_fraction", 1.0),
                                            j.value("feature_dim", std::size_t{8}))
                             .modality_specs;
    }
    return c;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed dgp config: ") + e.what());
  }
}

RunConfig run_config_from_json(const json& j) {
  try {
    if (!j.is_object()) throw ValidationError("run config must be a JSON object");
    RunConfig c;
    if (j.contains("seeds")) {
      const auto& s = j["seeds"];
      c.seeds.dgp = s.value("dgp", std::uint64_t{0});
      c.seeds.split = s.value("split", std::uint64_t{0});
      c.seeds.learner = s.value("learner", std::uint64_t{0});
    }
    if (j.contains("dgp")) {
      c.dgp = dgp_config_from_json(j["dgp"]);
      c.dgp->seed = c.seeds.dgp;
    }
    c.data = j.value("data", std::string());
    if (j.contains("learners")) {
      std::set<std::string> seen;
      for (const auto& [name, spec] : j["learners"].items()) {
        if (!seen.insert(name).second) throw ValidationError("duplicate learner name '" + name + "'");
        NamedLearner l{name, learner_spec_from_json(spec)};
        if (!spec.contains("seed")) l.spec.seed = derive_seed(c.seeds.learner, name);
        c.learners.push_back(std::move(l));
      }
    }
    c.scheme = j.contains("scheme") ? scheme_from_json(j["scheme"]) : SplitScheme{};
    c.scheme.seed = c.seeds.split;
    if (j.contains("scheme") && j["scheme"].contains("seed")) c.scheme.seed = j["scheme"]["seed"].get<std::uint64_t>();
    c.outputs = j.value("outputs", c.outputs);
    c.threads = j.value("threads", c.threads);
    if (c.threads < 1) throw ValidationError("threads must be >= 1");

    const auto available = available_learners(c);
    if (j.contains("roster")) {
      std::set<std::string> names;
      for (const auto& e : j["roster"]) {
        ModelEntry m;
        m.name = e.at("name").get<std::string>();
        if (!names.insert(m.name).second) throw ValidationError("duplicate roster entry '" + m.name + "'");
        if (e.contains("spec")) m.spec = learner_spec_from_json(e["spec"]);
        else m.spec = find_learner(available, e.value("learner", m.name)).spec;
        if (e.contains("modalities")) m.modalities = e["modalities"].get<std::vector<std::string>>();
        c.roster.push_back(std::move(m));
      }
    }
    return c;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed run config: ") + e.what());
  }
}

json run_config_to_json(const RunConfig& c) {
  json j;
  j["seeds"] = {{"dgp", c.seeds.dgp}, {"split", c.seeds.split}, {"learner", c.seeds.learner}};
  if (c.dgp) j["dgp"] = dgp_config_to_json(*c.dgp);
  if (!c.data.empty()) j["data"] = c.data;
  json learners = json::object();
  for (const auto& l : c.learners) learners[l.name] = learner_spec_to_json(l.spec);
  j["learners"] = learners;
  json roster = json::array();
  for (const auto& m : c.roster) {
    roster.push_back({{"name", m.name}, {"spec", learner_spec_to_json(m.spec)}, {"modalities", m.modalities}});
  }
  j["roster"] = roster;
  j["scheme"] = scheme_to_json(c.scheme);
  j["outputs"] = c.outputs;
  j["threads"] = c.threads;
  return j;
}

json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

RunConfig load_run_config(const std::filesystem::path& path) { return run_config_from_json(load_json(path)); }

std::string config_digest(const RunConfig& c) {
  json j = run_config_to_json(c);
  j.erase("outputs");
  j.erase("threads");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

std::vector<NamedLearner> builtin_learners(std::uint64_t learner_seed) {
  std::vector<NamedLearner> out;
  auto add = [&](const std::string& name, LearnerKind kind) {
    out.push_back({name, LearnerSpec{std::move(kind), derive_seed(learner_seed, name)}});
  };
  add("ridge", RidgeParams{});
  add("gbt", GbtParams{});
  add("fusion", FusionParams{});
  add("embedding", EmbeddingParams{});
  add("oracle", OracleParams{});
  add("constant", ConstantParams{});
  return out;
}

std::vector<NamedLearner> available_learners(const RunConfig& c) {
  auto out = c.learners;
  for (auto& b : builtin_learners(c.seeds.learner)) {
    bool shadowed = false;
    for (const auto& l : c.learners) shadowed = shadowed || l.name == b.name;
    if (!shadowed) out.push_back(std::move(b));
  }
  return out;
}

const NamedLearner& find_learner(const std::vector<NamedLearner>& learners, const std::string& name) {
  for (const auto& l : learners)
    if (l.name == name) return l;
  std::string names;
  for (std::size_t i = 0; i < learners.size(); ++i) names += (i ? ", " : "") + learners[i].name;
  throw ValidationError("unknown learner '" + name + "'; available: " + names);
}

}  // namespace dmldeep
