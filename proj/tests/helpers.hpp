#pragma once

#include "dmldeep/dgp.hpp"
#include "dmldeep/types.hpp"

#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>

namespace testing {

inline dmldeep::SemiSynthDataset small_dataset(std::size_t n = 400, std::uint64_t seed = 1, double rho = 1.0,
                                               std::size_t dim = 4) {
  return dmldeep::generate(dmldeep::default_dgp_config(n, seed, rho, dim));
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("dmldeep_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace testing
