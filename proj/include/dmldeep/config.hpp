#pragma once

#include "dmldeep/dgp.hpp"
#include "dmldeep/dml.hpp"
#include "dmldeep/eval.hpp"
#include "dmldeep/learners.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dmldeep {

// Three independent seed domains.
struct Seeds {
  std::uint64_t dgp = 0;
  std::uint64_t split = 0;
  std::uint64_t learner = 0;
};

struct NamedLearner {
  std::string name;
  LearnerSpec spec;
};

struct RunConfig {
  std::optional<DgpConfig> dgp;
  // Existing dataset directory, used instead of `dgp` when set.
  std::string data;
  std::vector<NamedLearner> learners;
  std::vector<ModelEntry> roster;
  SplitScheme scheme;
  Seeds seeds;
  std::string outputs = "out";
  std::size_t threads = 1;
};

nlohmann::json dgp_config_to_json(const DgpConfig& c);
DgpConfig dgp_config_from_json(const nlohmann::json& j);

// Learners without an explicit "seed" get derive_seed(seeds.learner, name).
RunConfig run_config_from_json(const nlohmann::json& j);
// Fully resolved: every seed is explicit, so parsing the result gives the same config.
nlohmann::json run_config_to_json(const RunConfig& c);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json load_json(const std::filesystem::path& path);

// Hex FNV-1a of the canonical resolved JSON.
std::string config_digest(const RunConfig& c);

// Learners available by name without a config: ridge, gbt, fusion, embedding, oracle, constant.
std::vector<NamedLearner> builtin_learners(std::uint64_t learner_seed);

// Config learners first, then built-ins not shadowed by them.
std::vector<NamedLearner> available_learners(const RunConfig& c);

// Throws ValidationError listing the available names.
const NamedLearner& find_learner(const std::vector<NamedLearner>& learners, const std::string& name);

}  // namespace dmldeep
