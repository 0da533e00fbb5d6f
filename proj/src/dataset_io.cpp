#include "dmldeep/dataset_io.hpp"

#include "dmldeep/error.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace dmldeep {

using nlohmann::json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, const std::string& context) {
  if (s.empty()) throw ValidationError("empty numeric cell in " + context);
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || (errno == ERANGE && std::isinf(v)))
    throw ValidationError("non-numeric cell '" + s + "' in " + context);
  return v;
}

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

}  // namespace

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty CSV file " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.header = split_line(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != t.header.size())
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(t.header.size()) + " cells, got " +
                            std::to_string(cells.size()));
    t.rows.push_back(std::move(cells));
  }
  return t;
}

void write_text_file(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << contents;
  if (!out) throw IoError("write failed for " + path.string());
}

json manifest_to_json(const Manifest& m) {
  json specs = json::array();
  for (const auto& s : m.modality_specs) {
    json js = {{"name", s.name},
               {"feature_dim", s.feature_dim},
               {"target_kind", to_string(s.target_kind)},
               {"explainable_fraction", s.explainable_fraction},
               {"link", to_string(s.link)}};
    if (s.target_kind == TargetKind::categorical) js["categories"] = s.categories;
    if (!s.target_path.empty()) js["target_path"] = s.target_path;
    if (!s.category_codes.empty()) js["category_codes"] = s.category_codes;
    specs.push_back(std::move(js));
  }
  return {{"theta0", m.theta0},
          {"snr", m.snr},
          {"seed", m.seed},
          {"scale_m", m.scale_m},
          {"scale_g", m.scale_g},
          {"snr_convention", to_string(m.snr_convention)},
          {"mode", m.mode},
          {"modality_specs", specs},
          {"generator_version", m.generator_version}};
}

Manifest manifest_from_json(const json& j) {
  try {
    Manifest m;
    m.theta0 = j.at("theta0").get<double>();
    m.snr = j.at("snr").get<double>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.scale_m = j.at("scale_m").get<double>();
    m.scale_g = j.at("scale_g").get<double>();
    m.snr_convention = snr_convention_from_string(j.value("snr_convention", "total_signal"));
    m.mode = j.value("mode", "surrogate");
    m.generator_version = j.value("generator_version", "");
    for (const auto& js : j.at("modality_specs")) {
      ModalitySpec s;
      s.name = js.at("name").get<std::string>();
      s.feature_dim = js.at("feature_dim").get<std::size_t>();
      s.target_kind = target_kind_from_string(js.value("target_kind", "continuous"));
      s.categories = js.value("categories", std::size_t{0});
      s.explainable_fraction = js.value("explainable_fraction", 1.0);
      s.link = link_from_string(js.value("link", "linear"));
      s.target_path = js.value("target_path", "");
      if (js.contains("category_codes")) s.category_codes = js["category_codes"].get<std::vector<std::string>>();
      m.modality_specs.push_back(std::move(s));
    }
    return m;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed manifest: ") + e.what());
  }
}

void write_dataset(const SemiSynthDataset& data, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  write_text_file(dir / "manifest.json", manifest_to_json(data.manifest).dump(2) + "\n");

  const Index n = data.n();
  std::string out = "id,y,d";
  for (const auto& b : data.blocks)
    for (const auto& c : b.columns) out += "," + b.name + ":" + c;
  out += "\n";
  for (Index i = 0; i < n; ++i) {
    out += data.id(i) + "," + format_double(data.y[i]) + "," + format_double(data.d[i]);
    for (const auto& b : data.blocks)
      for (Index c = 0; c < b.values.cols(); ++c) out += "," + format_double(b.values(i, c));
    out += "\n";
  }
  write_text_file(dir / "data.csv", out);

  if (!data.oracle) {
    fs::remove(dir / "oracle.csv", ec);
    return;
  }
  const auto& o = *data.oracle;
  out = "id,g0,m0,l0,eps,nu";
  for (const auto& t : o.targets) out += "," + t.name + ":target";
  for (const auto& t : o.feasible) out += "," + t.name + ":feasible";
  out += "\n";
  for (Index i = 0; i < n; ++i) {
    out += data.id(i);
    for (const Vector* v : {&o.g0, &o.m0, &o.l0, &o.eps, &o.nu}) out += "," + format_double((*v)[i]);
    for (const auto& t : o.targets) out += "," + format_double(t.values[i]);
    for (const auto& t : o.feasible) out += "," + format_double(t.values[i]);
    out += "\n";
  }
  write_text_file(dir / "oracle.csv", out);
}

namespace {

Vector numeric_column(const CsvTable& t, std::size_t col, const std::string& context) {
  Vector v(static_cast<Index>(t.rows.size()));
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    v[static_cast<Index>(i)] = parse_double(t.rows[i][col], context + " row " + std::to_string(i));
  return v;
}

bool ids_are_row_indices(const std::vector<std::string>& ids) {
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (ids[i] != std::to_string(i)) return false;
  return true;
}

}  // namespace

SemiSynthDataset read_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("dataset directory not found: " + dir.string());
  SemiSynthDataset data;
  data.manifest = manifest_from_json(read_json_file(dir / "manifest.json"));

  const CsvTable t = read_csv(dir / "data.csv");
  if (t.header.size() < 3 || t.header[0] != "id" || t.header[1] != "y" || t.header[2] != "d")
    throw ValidationError("data.csv header must start with id,y,d");
  std::vector<std::string> ids;
  for (const auto& r : t.rows) ids.push_back(r[0]);
  if (!ids_are_row_indices(ids)) data.ids = ids;
  data.y = numeric_column(t, 1, "data.csv:y");
  data.d = numeric_column(t, 2, "data.csv:d");

  for (std::size_t c = 3; c < t.header.size(); ++c) {
    const auto& h = t.header[c];
    const auto colon = h.find(':');
    if (colon == std::string::npos) throw ValidationError("data.csv column '" + h + "' lacks <modality>: prefix");
    const std::string mod = h.substr(0, colon);
    FeatureBlock* b = data.block(mod);
    if (!b) {
      data.blocks.push_back({mod, {}, Matrix()});
      b = &data.blocks.back();
    }
    b->columns.push_back(h.substr(colon + 1));
  }
  for (auto& b : data.blocks) {
    b.values.resize(static_cast<Index>(t.rows.size()), static_cast<Index>(b.columns.size()));
    for (std::size_t j = 0; j < b.columns.size(); ++j) {
      const int col = t.column(b.name + ":" + b.columns[j]);
      b.values.col(static_cast<Index>(j)) = numeric_column(t, static_cast<std::size_t>(col), "data.csv:" + b.name);
    }
  }

  if (fs::exists(dir / "oracle.csv")) {
    const CsvTable o = read_csv(dir / "oracle.csv");
    if (o.rows.size() != t.rows.size()) throw ValidationError("oracle.csv row count differs from data.csv");
    OracleColumns oc;
    auto req = [&](const char* name) {
      const int c = o.column(name);
      if (c < 0) throw ValidationError(std::string("oracle.csv lacks column ") + name);
      return numeric_column(o, static_cast<std::size_t>(c), std::string("oracle.csv:") + name);
    };
    oc.g0 = req("g0");
    oc.m0 = req("m0");
    oc.l0 = req("l0");
    oc.eps = req("eps");
    oc.nu = req("nu");
    for (std::size_t c = 6; c < o.header.size(); ++c) {
      const auto& h = o.header[c];
      const auto colon = h.find(':');
      if (colon == std::string::npos) throw ValidationError("oracle.csv column '" + h + "' is unknown");
      const std::string mod = h.substr(0, colon);
      const std::string kind = h.substr(colon + 1);
      Vector v = numeric_column(o, c, "oracle.csv:" + h);
      if (kind == "target") oc.targets.push_back({mod, std::move(v)});
      else if (kind == "feasible") oc.feasible.push_back({mod, std::move(v)});
      else throw ValidationError("oracle.csv column '" + h + "' is unknown");
    }
    data.oracle = std::move(oc);
  }
  return data;
}

void import_embeddings(SemiSynthDataset& data, const fs::path& embedding_csv,
                       const std::string& modality, bool replace) {
  const CsvTable t = read_csv(embedding_csv);
  if (t.header.empty() || t.header[0] != "id") throw ValidationError("embedding file must start with an id column");
  const std::size_t dim = t.header.size() - 1;
  if (dim == 0) throw ValidationError("embedding file has dimension 0");
  for (std::size_t j = 0; j < dim; ++j)
    if (t.header[j + 1] != "e" + std::to_string(j))
      throw ValidationError("embedding column " + std::to_string(j + 1) + " must be named e" + std::to_string(j));
  if (static_cast<Index>(t.rows.size()) != data.n())
    throw ValidationError("embedding file has " + std::to_string(t.rows.size()) + " rows, dataset has " +
                          std::to_string(data.n()));
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    if (t.rows[i][0] != data.id(static_cast<Index>(i)))
      throw ValidationError("embedding id mismatch at row " + std::to_string(i) + ": first offending id '" +
                            t.rows[i][0] + "' (dataset has '" + data.id(static_cast<Index>(i)) + "')");
  if (data.block(modality) && !replace)
    throw ValidationError("modality '" + modality + "' already has a feature block; pass --replace");

  FeatureBlock b{modality, {}, Matrix(static_cast<Index>(t.rows.size()), static_cast<Index>(dim))};
  for (std::size_t j = 0; j < dim; ++j) {
    b.columns.push_back("e" + std::to_string(j));
    b.values.col(static_cast<Index>(j)) = numeric_column(t, j + 1, embedding_csv.string());
  }
  if (!b.values.allFinite()) throw ValidationError("embedding file contains non-finite values");

  if (auto* existing = data.block(modality)) *existing = std::move(b);
  else data.blocks.push_back(std::move(b));

  bool found = false;
  for (auto& s : data.manifest.modality_specs)
    if (s.name == modality) {
      s.feature_dim = dim;
      found = true;
    }
  if (!found) {
    ModalitySpec s;
    s.name = modality;
    s.feature_dim = dim;
    data.manifest.modality_specs.push_back(s);
  }
}

}  // namespace dmldeep
