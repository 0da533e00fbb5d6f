#pragma once

#include "dmldeep/types.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace dmldeep {

namespace fs = std::filesystem;

// 17 significant digits; parses back to the identical double.
std::string format_double(double v);
double parse_double(const std::string& s, const std::string& context);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column, or -1.
  int column(const std::string& name) const;
};

CsvTable read_csv(const fs::path& path);
void write_text_file(const fs::path& path, const std::string& contents);

nlohmann::json manifest_to_json(const Manifest& m);
Manifest manifest_from_json(const nlohmann::json& j);

// Directory layout: manifest.json, data.csv, optional oracle.csv.
void write_dataset(const SemiSynthDataset& data, const fs::path& dir);
SemiSynthDataset read_dataset(const fs::path& dir);

// Adds or replaces `modality` with the columns of an `id,e0,...` embedding file.
// Ids must match the dataset row by row.
void import_embeddings(SemiSynthDataset& data, const fs::path& embedding_csv,
                       const std::string& modality, bool replace);

}  // namespace dmldeep
