// Model directory layout: a JSON manifest next to one binary matrix file per
// learned parameter block, the two code sets with their sidecars, and the
// objective trace as CSV. The manifest is written last, through a rename, so
// a directory with a manifest is always a complete model.
#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "xmq/codes.hpp"
#include "xmq/core.hpp"
#include "xmq/matrix_io.hpp"
#include "xmq/trainer.hpp"

namespace xmq {

inline constexpr int kModelFormatVersion = 1;

inline void write_json_atomic(const nlohmann::json& j, const std::filesystem::path& path) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError("write_json_atomic: cannot open " + tmp.string());
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write_json_atomic: write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

namespace detail {

inline void save_vector(const Vector& v, const std::filesystem::path& path) {
  save_matrix(Matrix(v), path);
}

inline Vector load_vector(const std::filesystem::path& path) {
  const Matrix m = load_matrix(path);
  if (m.cols() != 1) {
    throw FormatError("load_vector: expected a single column in " + path.string());
  }
  return m.col(0);
}

inline void save_trace(const TrainedModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("save_trace: cannot open " + path.string());
  out << "round,objective,constrained_objective,violation\n";
  out.precision(17);
  for (std::size_t i = 0; i < model.objective_trace.size(); ++i) {
    const auto& [constrained, violation] = model.constrained_trace[i];
    out << i << ',' << model.objective_trace[i] << ',' << constrained << ',' << violation
        << '\n';
  }
  if (!out) throw IoError("save_trace: write failed for " + path.string());
}

inline void load_trace(TrainedModel& model, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_trace: cannot open " + path.string());
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<double> values;
    std::getline(row, cell, ',');  // round index, unused
    while (std::getline(row, cell, ',')) values.push_back(std::stod(cell));
    if (values.size() != 3) throw FormatError("load_trace: malformed row in " + path.string());
    model.objective_trace.push_back(values[0]);
    model.constrained_trace.emplace_back(values[1], values[2]);
  }
}

}  // namespace detail

inline void save_model(const TrainedModel& model, const std::filesystem::path& dir) {
  model.validate();
  namespace fs = std::filesystem;
  fs::create_directories(dir / "common_space");
  fs::create_directories(dir / "mapping");
  fs::create_directories(dir / "quantizer_a");
  fs::create_directories(dir / "quantizer_b");

  save_matrix(model.common_space.basis_b, dir / "common_space" / "basis_b.xmqm");
  save_matrix(model.common_space.factor_u, dir / "common_space" / "factor_u.xmqm");
  save_matrix(model.common_space.transform_r, dir / "common_space" / "transform_r.xmqm");
  detail::save_vector(model.common_space.mean_a, dir / "common_space" / "mean_a.xmqm");
  detail::save_vector(model.common_space.mean_b, dir / "common_space" / "mean_b.xmqm");
  save_matrix(model.common_space.pca_projection,
              dir / "common_space" / "pca_projection.xmqm");

  save_matrix(model.mapping.sparse_codes, dir / "mapping" / "sparse_codes.xmqm");
  save_matrix(model.mapping.latent_b, dir / "mapping" / "latent_b.xmqm");
  save_matrix(model.latent_a, dir / "mapping" / "latent_a.xmqm");

  save_matrix(model.quant_a.elements, dir / "quantizer_a" / "elements.xmqm");
  save_matrix(model.quant_b.elements, dir / "quantizer_b" / "elements.xmqm");
  save_codes(model.codes_a, dir / "codes_a.xmqm");
  save_codes(model.codes_b, dir / "codes_b.xmqm");
  detail::save_trace(model, dir / "trace.csv");

  nlohmann::json manifest;
  manifest["format_version"] = kModelFormatVersion;
  manifest["library_version"] = kVersion;
  manifest["hyper"] = {{"rho", model.common_space.hyper.rho},
                       {"eta", model.common_space.hyper.eta},
                       {"lambda", model.common_space.hyper.lambda},
                       {"gamma", model.quant_hyper.gamma},
                       {"mu", model.quant_hyper.mu}};
  manifest["quantizer"] = {{"M", model.quant_a.num_dictionaries},
                           {"K", model.quant_a.dictionary_size},
                           {"epsilon_a", model.quant_a.epsilon},
                           {"epsilon_b", model.quant_b.epsilon}};
  write_json_atomic(manifest, dir / "manifest.json");
}

inline TrainedModel load_model(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw IoError("load_model: missing manifest in " + dir.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("load_model: bad manifest: " + std::string(e.what()));
  }
  if (manifest.value("format_version", 0) != kModelFormatVersion) {
    throw FormatError("load_model: unsupported model format version");
  }

  TrainedModel model;
  const auto& h = manifest.at("hyper");
  model.common_space.hyper.rho = h.at("rho").get<double>();
  model.common_space.hyper.eta = h.at("eta").get<double>();
  model.common_space.hyper.lambda = h.at("lambda").get<double>();
  model.quant_hyper.gamma = h.at("gamma").get<double>();
  model.quant_hyper.mu = h.at("mu").get<double>();

  model.common_space.basis_b = load_matrix(dir / "common_space" / "basis_b.xmqm");
  model.common_space.factor_u = load_matrix(dir / "common_space" / "factor_u.xmqm");
  model.common_space.transform_r = load_matrix(dir / "common_space" / "transform_r.xmqm");
  model.common_space.mean_a = detail::load_vector(dir / "common_space" / "mean_a.xmqm");
  model.common_space.mean_b = detail::load_vector(dir / "common_space" / "mean_b.xmqm");
  model.common_space.pca_projection =
      load_matrix(dir / "common_space" / "pca_projection.xmqm");

  model.mapping.sparse_codes = load_matrix(dir / "mapping" / "sparse_codes.xmqm");
  model.mapping.latent_b = load_matrix(dir / "mapping" / "latent_b.xmqm");
  model.latent_a = load_matrix(dir / "mapping" / "latent_a.xmqm");

  const auto& q = manifest.at("quantizer");
  model.quant_a.num_dictionaries = q.at("M").get<int>();
  model.quant_a.dictionary_size = q.at("K").get<int>();
  model.quant_a.epsilon = q.at("epsilon_a").get<double>();
  model.quant_b.num_dictionaries = model.quant_a.num_dictionaries;
  model.quant_b.dictionary_size = model.quant_a.dictionary_size;
  model.quant_b.epsilon = q.at("epsilon_b").get<double>();
  model.quant_a.elements = load_matrix(dir / "quantizer_a" / "elements.xmqm");
  model.quant_b.elements = load_matrix(dir / "quantizer_b" / "elements.xmqm");

  model.codes_a = load_codes(dir / "codes_a.xmqm");
  model.codes_b = load_codes(dir / "codes_b.xmqm");
  detail::load_trace(model, dir / "trace.csv");
  model.validate();
  return model;
}

}  // namespace xmq
