#include "dmldeep/config.hpp"
#include "dmldeep/dataset_io.hpp"
#include "dmldeep/dgp.hpp"
#include "dmldeep/dml.hpp"
#include "dmldeep/error.hpp"
#include "dmldeep/eval.hpp"
#include "dmldeep/metrics.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace dmldeep;
using nlohmann::json;

namespace {

json parse(const std::string& s) {
  try {
    return json::parse(s);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("invalid JSON: ") + e.what());
  }
}

std::vector<std::string> resolve(const SemiSynthDataset& data, const std::vector<std::string>& mods) {
  return mods.empty() ? data.modality_names() : mods;
}

std::string estimate(const SemiSynthDataset& data, const std::string& spec_json,
                     const std::vector<std::string>& modalities, const std::string& scheme_json, std::size_t threads,
                     double alpha) {
  const auto spec = learner_spec_from_json(parse(spec_json));
  const auto scheme = scheme_from_json(parse(scheme_json));
  check_scheme(scheme);
  const auto mods = resolve(data, modalities);
  py::gil_scoped_release release;
  json out;
  if (scheme.repeats == 1) {
    const auto seed = repeat_seeds(scheme).front();
    const auto r = scheme.kind == SplitKind::single
                       ? run_split(data, spec, scheme.train_fraction, seed, mods, alpha)
                       : run_crossfit(data, spec, scheme.folds, seed, mods, threads, alpha);
    out = estimate_to_json(r.estimate);
    out["diagnostics"] = diagnostics_to_json(r.diagnostics);
    out["learner_tag"] = r.predictions.learner_tag;
    if (!r.fold_theta.empty()) out["fold_theta"] = r.fold_theta;
  } else {
    const auto s = repeat_splits(data, spec, scheme, mods, threads, alpha);
    out = estimate_to_json(aggregate_repeats(s));
    json reps = json::array();
    for (const auto& r : s.repeats) reps.push_back(estimate_to_json(r.split.estimate));
    out["repeats"] = reps;
    out["theta_mean"] = s.theta.mean;
    out["theta_sd"] = s.theta.sd;
  }
  out["split_descriptor"] = scheme.describe();
  return out.dump();
}

std::string benchmark(const SemiSynthDataset& data, const std::string& config_json, std::size_t threads) {
  const auto cfg = run_config_from_json(parse(config_json));
  auto roster = cfg.roster;
  if (roster.empty()) throw ValidationError("benchmark config needs a roster");
  for (auto& m : roster) m.modalities = resolve(data, m.modalities);
  py::gil_scoped_release release;
  return report_to_json(run_benchmark(data, roster, cfg.scheme, threads, config_digest(cfg))).dump();
}

std::string trace(const SemiSynthDataset& data, const std::string& spec_json, const std::vector<std::string>& modalities,
                  double train_fraction, std::uint64_t split_seed, double alpha) {
  const auto spec = learner_spec_from_json(parse(spec_json));
  const auto* params = std::get_if<FusionParams>(&spec.kind);
  if (!params) throw ValidationError("trace needs a fusion learner, got '" + spec.kind_name() + "'");
  const auto mods = resolve(data, modalities);
  py::gil_scoped_release release;
  const auto run = run_trace(data, *params, spec.seed, train_fraction, split_seed, mods, alpha);
  json out = json::array();
  for (const auto& p : run.trace.points) {
    out.push_back({{"epoch", p.epoch},
                   {"theta_hat", p.theta_hat},
                   {"ci_low", p.ci_low},
                   {"ci_high", p.ci_high},
                   {"r2_y_rel", p.r2_y_rel ? json(*p.r2_y_rel) : json(nullptr)},
                   {"r2_d_rel", p.r2_d_rel ? json(*p.r2_d_rel) : json(nullptr)}});
  }
  return out.dump();
}

py::dict oracle_dict(const SemiSynthDataset& data) {
  py::dict out;
  if (!data.oracle) return out;
  const auto& o = *data.oracle;
  out["g0"] = o.g0;
  out["m0"] = o.m0;
  out["l0"] = o.l0;
  out["eps"] = o.eps;
  out["nu"] = o.nu;
  for (const auto& t : o.targets) out[py::str(t.name + ":target")] = t.values;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Double machine learning with multimodal confounders";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  auto validation = py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<SchemaError>(m, "SchemaError", validation.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());
  auto numerical = py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
  py::register_exception<DegenerateError>(m, "DegenerateError", numerical.ptr());
  py::register_exception<WeakIdentificationError>(m, "WeakIdentificationError", numerical.ptr());
  py::register_exception<TrainingDivergedError>(m, "TrainingDivergedError", numerical.ptr());

  py::class_<SemiSynthDataset>(m, "Dataset")
      .def_property_readonly("n", &SemiSynthDataset::n)
      .def_property_readonly("y", [](const SemiSynthDataset& d) { return d.y; })
      .def_property_readonly("d", [](const SemiSynthDataset& d) { return d.d; })
      .def_property_readonly("ids", [](const SemiSynthDataset& d) {
        std::vector<std::string> out;
        for (Index i = 0; i < d.n(); ++i) out.push_back(d.id(i));
        return out;
      })
      .def("modalities", &SemiSynthDataset::modality_names)
      .def("block", [](const SemiSynthDataset& d, const std::string& name) {
        const auto* b = d.block(name);
        if (!b) throw SchemaError("dataset has no feature block '" + name + "'");
        return b->values;
      })
      .def("columns", [](const SemiSynthDataset& d, const std::string& name) {
        const auto* b = d.block(name);
        if (!b) throw SchemaError("dataset has no feature block '" + name + "'");
        return b->columns;
      })
      .def("oracle", &oracle_dict)
      .def("manifest_json", [](const SemiSynthDataset& d) { return manifest_to_json(d.manifest).dump(); })
      .def("violations", [](const SemiSynthDataset& d) {
        std::vector<std::string> out;
        for (const auto& v : validate(d)) out.push_back(v.describe());
        return out;
      });

  m.def("_generate", [](const std::string& dgp_json, std::uint64_t seed) {
    auto cfg = dgp_config_from_json(parse(dgp_json));
    cfg.seed = seed;
    return generate(cfg);
  });
  m.def("_attenuated_theta_plim", [](const std::string& dgp_json) {
    return attenuated_theta_plim(dgp_config_from_json(parse(dgp_json)));
  });
  m.def("read_dataset", [](const std::string& dir) { return read_dataset(dir); }, py::arg("path"));
  m.def("write_dataset", [](const SemiSynthDataset& d, const std::string& dir) { write_dataset(d, dir); },
        py::arg("dataset"), py::arg("path"));
  m.def("import_embeddings",
        [](SemiSynthDataset& d, const std::string& csv, const std::string& modality, bool replace) {
          import_embeddings(d, csv, modality, replace);
        },
        py::arg("dataset"), py::arg("embeddings"), py::arg("modality"), py::arg("replace") = false);
  m.def("_oracle_bounds", [](const SemiSynthDataset& d) {
    const auto b = oracle_bounds(d);
    json j = {{"r2_d", b.r2_d}, {"r2_y", b.r2_y}, {"rmse_d", b.rmse_d}, {"rmse_y", b.rmse_y}, {"ols_theta", b.ols_theta}};
    j["feasible_r2_d"] = b.feasible_r2_d ? json(*b.feasible_r2_d) : json(nullptr);
    j["feasible_r2_y"] = b.feasible_r2_y ? json(*b.feasible_r2_y) : json(nullptr);
    return j.dump();
  });
  m.def("ols_baseline", &ols_baseline, py::arg("y"), py::arg("d"));
  m.def("_estimate", &estimate);
  m.def("_benchmark", &benchmark);
  m.def("_trace", &trace);
  m.def("_orthogonality_check", [](const SemiSynthDataset& d, double t, std::uint64_t seed, bool naive) {
    const auto r = orthogonality_check(d, t, seed, naive ? ScoreKind::naive : ScoreKind::orthogonal);
    return std::make_pair(r.deriv_l, r.deriv_m);
  });
}
