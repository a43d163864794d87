// Command-line pipeline: dataset synthesis, preprocessing, training, encoding
// of held-out items, table-based search, and metric reports. Every command
// finishes by writing a run manifest (config snapshot, input digests, output
// paths, timing) next to its output, so a pipeline can be traced end to end.
#include <algorithm>
#include <bit>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "xmq/core.hpp"
#include "xmq/dataset.hpp"
#include "xmq/eval.hpp"
#include "xmq/matrix_io.hpp"
#include "xmq/model_io.hpp"
#include "xmq/search.hpp"
#include "xmq/synth.hpp"
#include "xmq/trainer.hpp"

namespace {

namespace fs = std::filesystem;

std::uint64_t fnv1a_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw xmq::IoError("cannot digest " + path.string());
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  char buffer[4096];
  while (in.read(buffer, sizeof buffer) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      hash ^= static_cast<unsigned char>(buffer[i]);
      hash *= 0x100000001b3ULL;
    }
    if (!in) break;
  }
  return hash;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << v;
  return out.str();
}

// Collects everything the run manifest records; written as a sibling of the
// main output so output directories stay byte-comparable across runs.
struct RunTracker {
  std::string command;
  nlohmann::json config;
  std::uint64_t seed = 0;
  nlohmann::json inputs = nlohmann::json::object();
  std::vector<std::string> outputs;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void add_input(const fs::path& path) { inputs[path.string()] = hex64(fnv1a_file(path)); }

  void write(const fs::path& main_output) const {
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    nlohmann::json manifest;
    manifest["command"] = command;
    manifest["library_version"] = xmq::kVersion;
    manifest["config"] = config;
    manifest["seed"] = seed;
    manifest["inputs"] = inputs;
    manifest["outputs"] = outputs;
    manifest["timings"] = {{"wall_seconds", seconds}};
    fs::path where = main_output;
    where += ".run.json";
    xmq::write_json_atomic(manifest, where);
  }
};

int env_threads() {
  if (const char* raw = std::getenv("XMQ_THREADS")) {
    const int v = std::atoi(raw);
    if (v >= 1) return v;
  }
  return 1;
}

xmq::Modality parse_modality(const std::string& name) {
  if (name == "a" || name == "A") return xmq::Modality::kA;
  if (name == "b" || name == "B") return xmq::Modality::kB;
  throw xmq::FormatError("modality must be 'a' or 'b', got '" + name + "'");
}

xmq::PairedDataset load_dataset(const fs::path& features_a, const fs::path& features_b,
                                const fs::path& labels, RunTracker& run) {
  xmq::PairedDataset ds;
  ds.features_a = xmq::load_matrix(features_a);
  ds.features_b = xmq::load_matrix(features_b);
  run.add_input(features_a);
  run.add_input(features_b);
  if (!labels.empty()) {
    ds.labels = xmq::to_label_sets(xmq::load_labels(labels));
    run.add_input(labels);
  }
  ds.validate();
  return ds;
}

void write_results_csv(const std::vector<xmq::ResultList>& results, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw xmq::IoError("cannot open " + path.string());
  out.precision(17);
  out << "query_id,rank,item_id,score\n";
  for (std::size_t q = 0; q < results.size(); ++q) {
    for (std::size_t r = 0; r < results[q].size(); ++r) {
      out << q << ',' << (r + 1) << ',' << results[q][r].id << ',' << results[q][r].score
          << '\n';
    }
  }
  if (!out) throw xmq::IoError("write failed for " + path.string());
}

std::vector<xmq::ResultList> read_results_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw xmq::IoError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);  // header
  std::vector<xmq::ResultList> results;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() != 4) throw xmq::FormatError("malformed results row: " + line);
    const auto query = static_cast<std::size_t>(std::stoull(cells[0]));
    const auto item = static_cast<std::size_t>(std::stoull(cells[2]));
    const double score = std::stod(cells[3]);
    if (query >= results.size()) results.resize(query + 1);
    results[query].push_back({item, score});
  }
  return results;
}

int cmd_synth(const xmq::SynthConfig& cfg, const fs::path& out_dir) {
  RunTracker run;
  run.command = "synth";
  run.seed = cfg.seed;
  run.config = {{"clusters", cfg.clusters},   {"latent_dim", cfg.latent_dim},
                {"dim_a", cfg.dim_a},         {"dim_b", cfg.dim_b},
                {"items", cfg.items},         {"noise", cfg.noise},
                {"seed", cfg.seed}};

  const xmq::PairedDataset ds = xmq::synth_dataset(cfg);
  fs::create_directories(out_dir);
  xmq::save_matrix(ds.features_a, out_dir / "features_a.xmqm");
  xmq::save_matrix(ds.features_b, out_dir / "features_b.xmqm");
  std::vector<std::vector<int>> labels;
  labels.reserve(ds.labels.size());
  for (const auto& l : ds.labels) labels.push_back(l.ids);
  xmq::save_labels(labels, out_dir / "labels.txt");

  for (const char* name : {"features_a.xmqm", "features_b.xmqm", "labels.txt"}) {
    run.outputs.push_back((out_dir / name).string());
  }
  run.write(out_dir);
  std::cout << "synth: wrote " << ds.size() << " pairs to " << out_dir.string() << "\n";
  return 0;
}

int cmd_preprocess(const fs::path& features_a, const fs::path& features_b,
                   const fs::path& labels, Eigen::Index pca_dim, const fs::path& out_dir) {
  RunTracker run;
  run.command = "preprocess";
  run.config = {{"pca_dim", pca_dim}};

  const xmq::PairedDataset ds = load_dataset(features_a, features_b, labels, run);
  const xmq::PreprocessResult pre = xmq::preprocess(ds, pca_dim);

  fs::create_directories(out_dir);
  xmq::save_matrix(pre.data.features_a, out_dir / "features_a.xmqm");
  xmq::save_matrix(pre.data.features_b, out_dir / "features_b.xmqm");
  xmq::save_matrix(xmq::Matrix(pre.mean_a), out_dir / "mean_a.xmqm");
  xmq::save_matrix(xmq::Matrix(pre.mean_b), out_dir / "mean_b.xmqm");
  xmq::save_matrix(pre.pca_projection, out_dir / "pca_projection.xmqm");
  if (!labels.empty()) fs::copy_file(labels, out_dir / "labels.txt",
                                     fs::copy_options::overwrite_existing);

  for (const char* name :
       {"features_a.xmqm", "features_b.xmqm", "mean_a.xmqm", "mean_b.xmqm",
        "pca_projection.xmqm"}) {
    run.outputs.push_back((out_dir / name).string());
  }
  run.write(out_dir);
  std::cout << "preprocess: " << pre.data.size() << " pairs, modality A reduced to "
            << pre.pca_projection.rows() << " dims\n";
  return 0;
}

int cmd_train(const fs::path& features_a, const fs::path& features_b, const fs::path& labels,
              const xmq::TrainConfig& cfg, const fs::path& config_path,
              const fs::path& out_dir) {
  RunTracker run;
  run.command = "train";
  run.seed = cfg.seed;
  run.config = cfg;
  if (!config_path.empty()) run.add_input(config_path);

  const xmq::PairedDataset ds = load_dataset(features_a, features_b, labels, run);
  const xmq::TrainedModel model = xmq::train(ds, cfg);
  xmq::save_model(model, out_dir);

  run.outputs.push_back((out_dir / "manifest.json").string());
  run.outputs.push_back((out_dir / "trace.csv").string());
  run.write(out_dir);
  std::cout << "train: " << model.objective_trace.size() << " rounds, final objective "
            << (model.objective_trace.empty() ? 0.0 : model.objective_trace.back()) << "\n";
  return 0;
}

int cmd_encode(const fs::path& model_dir, const fs::path& features_path,
               const std::string& modality_name, int cycles, int threads,
               const fs::path& out_path) {
  RunTracker run;
  run.command = "encode";
  run.config = {{"modality", modality_name}, {"cycles", cycles}, {"threads", threads}};
  run.add_input(model_dir / "manifest.json");
  run.add_input(features_path);

  const xmq::Modality modality = parse_modality(modality_name);
  const xmq::TrainedModel model = xmq::load_model(model_dir);
  const xmq::Matrix features = xmq::load_matrix(features_path);
  if (features.cols() == 0) throw xmq::DimensionError("encode: feature file holds no items");
  const Eigen::Index expected = modality == xmq::Modality::kA
                                    ? model.common_space.mean_a.size()
                                    : model.common_space.mean_b.size();
  if (features.rows() != expected) {
    throw xmq::DimensionError("encode: features have " + std::to_string(features.rows()) +
                              " rows, model expects " + std::to_string(expected));
  }

  const xmq::CompositeQuantizer& quant =
      modality == xmq::Modality::kA ? model.quant_a : model.quant_b;
  xmq::Matrix latents(quant.dim(), features.cols());
  xmq::parallel_for_chunks(
      static_cast<std::size_t>(features.cols()), threads,
      [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
          const auto col = static_cast<Eigen::Index>(i);
          latents.col(col) = xmq::detail::embed_raw_query(model.common_space,
                                                          features.col(col), modality);
        }
      });

  // held-out items have no paired counterpart, so the pair-alignment weight
  // is dropped and only the fit and cross-term penalty drive the codes
  const xmq::QuantizationHyper hyper{0.0, model.quant_hyper.mu};
  xmq::CodeMatrix codes(static_cast<std::size_t>(features.cols()),
                        static_cast<std::size_t>(quant.num_dictionaries),
                        static_cast<std::size_t>(quant.dictionary_size));
  const xmq::Matrix zeros = xmq::Matrix::Zero(latents.rows(), latents.cols());
  codes = xmq::assign_codes(quant, std::move(codes), latents, zeros, hyper, cycles);
  xmq::save_codes(codes, out_path);

  const double err = (latents - xmq::reconstruct(quant, codes)).squaredNorm() /
                     static_cast<double>(features.cols());
  run.outputs.push_back(out_path.string());
  run.outputs.push_back(xmq::codes_sidecar_path(out_path).string());
  run.write(out_path);
  std::cout << "encode: " << features.cols() << " items, mean reconstruction error " << err
            << "\n";
  return 0;
}

int cmd_search(const fs::path& model_dir, const fs::path& codes_path,
               const fs::path& queries_path, const std::string& modality_name,
               std::size_t top_t, bool exhaustive, int threads, const fs::path& out_path) {
  RunTracker run;
  run.command = "search";
  run.config = {{"query_modality", modality_name},
                {"top", top_t},
                {"exhaustive", exhaustive},
                {"threads", threads}};
  run.add_input(model_dir / "manifest.json");
  run.add_input(codes_path);
  run.add_input(queries_path);

  const xmq::Modality query_modality = parse_modality(modality_name);
  const xmq::TrainedModel model = xmq::load_model(model_dir);
  const xmq::Matrix queries = xmq::load_matrix(queries_path);

  // the database lives in the opposite modality of the queries
  xmq::SearchIndex index;
  index.quantizer = query_modality == xmq::Modality::kA ? model.quant_b : model.quant_a;
  index.codes = xmq::load_codes(codes_path);
  index.common_space = model.common_space;
  if (index.codes.num_dictionaries !=
          static_cast<std::size_t>(index.quantizer.num_dictionaries) ||
      index.codes.dictionary_size !=
          static_cast<std::size_t>(index.quantizer.dictionary_size)) {
    throw xmq::DimensionError("search: codes do not match the database-side quantizer");
  }
  const Eigen::Index expected = query_modality == xmq::Modality::kA
                                    ? model.common_space.mean_a.size()
                                    : model.common_space.mean_b.size();
  if (queries.rows() != expected) {
    throw xmq::DimensionError("search: queries have " + std::to_string(queries.rows()) +
                              " rows, model expects " + std::to_string(expected));
  }

  std::size_t effective_t = top_t;
  if (effective_t > index.codes.num_items) {
    effective_t = index.codes.num_items;
    std::cerr << "search: top " << top_t << " clamped to database size " << effective_t
              << "\n";
  }

  std::vector<xmq::ResultList> results(static_cast<std::size_t>(queries.cols()));
  xmq::parallel_for_chunks(
      results.size(), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t q = begin; q < end; ++q) {
          const auto col = static_cast<Eigen::Index>(q);
          results[q] = exhaustive
                           ? xmq::exhaustive_query(index, queries.col(col), query_modality,
                                                   effective_t)
                           : xmq::query_cross_modal(index, queries.col(col), query_modality,
                                                    effective_t);
        }
      });
  write_results_csv(results, out_path);

  run.outputs.push_back(out_path.string());
  run.write(out_path);
  std::cout << "search: " << results.size() << " queries against " << index.codes.num_items
            << " items, top " << effective_t << "\n";
  return 0;
}

int cmd_eval(const fs::path& results_path, const fs::path& query_labels_path,
             const fs::path& database_labels_path, std::vector<std::size_t> cutoffs,
             const fs::path& out_json, const fs::path& out_csv) {
  RunTracker run;
  run.command = "eval";
  run.config = {{"cutoffs", cutoffs}};
  run.add_input(results_path);
  run.add_input(query_labels_path);
  run.add_input(database_labels_path);

  const std::vector<xmq::ResultList> results = read_results_csv(results_path);
  const std::vector<xmq::LabelSet> query_labels =
      xmq::to_label_sets(xmq::load_labels(query_labels_path));
  const std::vector<xmq::LabelSet> database_labels =
      xmq::to_label_sets(xmq::load_labels(database_labels_path));

  if (results.size() > query_labels.size()) {
    throw xmq::DimensionError("eval: results reference more queries than labeled");
  }
  std::size_t max_item = 0;
  for (const auto& ranking : results) {
    for (const auto& r : ranking) max_item = std::max(max_item, r.id);
  }
  if (!results.empty() && max_item >= database_labels.size()) {
    throw xmq::DimensionError("eval: results reference item " + std::to_string(max_item) +
                              " beyond the " + std::to_string(database_labels.size()) +
                              " labeled items");
  }

  const xmq::RelevanceJudge judge{&query_labels, &database_labels};
  if (cutoffs.empty()) cutoffs = {1, 10, 50};
  std::sort(cutoffs.begin(), cutoffs.end());
  cutoffs.erase(std::unique(cutoffs.begin(), cutoffs.end()), cutoffs.end());

  xmq::MetricReport report;
  for (const std::size_t t : cutoffs) report.map_at_t[t] = xmq::map_at(results, judge, t);
  report.precision_curve = xmq::precision_at(results, judge, cutoffs);
  const std::size_t ap_cut = cutoffs.back();
  report.per_query_ap.reserve(results.size());
  for (std::size_t q = 0; q < results.size(); ++q) {
    report.per_query_ap.push_back(xmq::average_precision(results[q], judge, q, ap_cut));
  }

  {
    std::ofstream out(out_json, std::ios::trunc);
    if (!out) throw xmq::IoError("cannot open " + out_json.string());
    out << report.to_json() << '\n';
  }
  {
    std::ofstream out(out_csv, std::ios::trunc);
    if (!out) throw xmq::IoError("cannot open " + out_csv.string());
    out << report.to_csv();
  }

  run.outputs.push_back(out_json.string());
  run.outputs.push_back(out_csv.string());
  run.write(out_json);
  std::cout << "eval: " << results.size() << " queries";
  for (const auto& [t, v] : report.map_at_t) std::cout << "  MAP@" << t << "=" << v;
  std::cout << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cross-modal quantized similarity search"};
  app.set_version_flag("--version", xmq::kVersion);
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a paired synthetic dataset");
  xmq::SynthConfig synth_cfg;
  std::string synth_out;
  synth->add_option("--clusters", synth_cfg.clusters, "number of latent clusters");
  synth->add_option("--latent-dim", synth_cfg.latent_dim, "generator latent dimension");
  synth->add_option("--dim-a", synth_cfg.dim_a, "modality A feature dimension");
  synth->add_option("--dim-b", synth_cfg.dim_b, "modality B feature dimension");
  synth->add_option("--items", synth_cfg.items, "number of pairs");
  synth->add_option("--noise", synth_cfg.noise, "additive feature noise");
  synth->add_option("--seed", synth_cfg.seed, "generator seed");
  synth->add_option("--out", synth_out, "output directory")->required();

  // preprocess
  auto* prep = app.add_subcommand("preprocess", "center, project, and normalize a dataset");
  std::string prep_a, prep_b, prep_labels, prep_out;
  Eigen::Index prep_pca = 64;
  prep->add_option("--features-a", prep_a, "modality A matrix")->required();
  prep->add_option("--features-b", prep_b, "modality B matrix")->required();
  prep->add_option("--labels", prep_labels, "labels file (copied through)");
  prep->add_option("--pca-dim", prep_pca, "projection dimension for modality A");
  prep->add_option("--out", prep_out, "output directory")->required();

  // train
  auto* train = app.add_subcommand("train", "train a model from a paired dataset");
  std::string train_a, train_b, train_labels, train_config, train_out;
  xmq::TrainConfig train_cfg;
  int opt_bits = 0, opt_m = 0, opt_k = 0, opt_rounds = 0, opt_threads = 0;
  std::uint64_t opt_seed = 0;
  Eigen::Index opt_pca = 0, opt_basis = 0;
  double opt_rho = 0, opt_eta = 0, opt_lambda = 0, opt_gamma = 0, opt_mu = 0;
  train->add_option("--features-a", train_a, "modality A matrix")->required();
  train->add_option("--features-b", train_b, "modality B matrix")->required();
  train->add_option("--labels", train_labels, "labels file (optional)");
  train->add_option("--config", train_config, "training config JSON");
  train->add_option("--out", train_out, "model output directory")->required();
  auto* o_bits = train->add_option("--bits", opt_bits, "total code bits");
  auto* o_m = train->add_option("--M", opt_m, "number of dictionaries");
  auto* o_k = train->add_option("--K", opt_k, "elements per dictionary");
  auto* o_rounds = train->add_option("--outer-rounds", opt_rounds, "outer rounds");
  auto* o_seed = train->add_option("--seed", opt_seed, "training seed");
  auto* o_pca = train->add_option("--pca-dim", opt_pca, "modality A projection dimension");
  auto* o_basis = train->add_option("--basis-count", opt_basis, "sparse basis size");
  auto* o_rho = train->add_option("--rho", opt_rho, "sparsity weight");
  auto* o_eta = train->add_option("--eta", opt_eta, "modality balance weight");
  auto* o_lambda = train->add_option("--lambda", opt_lambda, "latent alignment weight");
  auto* o_gamma = train->add_option("--gamma", opt_gamma, "pair alignment weight");
  auto* o_mu = train->add_option("--mu", opt_mu, "cross-term penalty weight");
  auto* o_threads = train->add_option("--threads", opt_threads, "worker threads");
  bool flag_gamma_zero = false, flag_lambda_zero = false, flag_shared = false;
  train->add_flag("--gamma-zero", flag_gamma_zero, "drop the pair-alignment term");
  train->add_flag("--lambda-zero", flag_lambda_zero, "drop the latent-alignment term");
  train->add_flag("--shared-dictionary", flag_shared, "use one element matrix for both");

  // encode
  auto* encode = app.add_subcommand("encode", "assign codes to held-out items");
  std::string enc_model, enc_features, enc_modality, enc_out;
  int enc_cycles = 3;
  int enc_threads = env_threads();
  encode->add_option("--model", enc_model, "model directory")->required();
  encode->add_option("--features", enc_features, "feature matrix to encode")->required();
  encode->add_option("--modality", enc_modality, "a or b")->required();
  encode->add_option("--cycles", enc_cycles, "greedy assignment cycles");
  encode->add_option("--threads", enc_threads, "worker threads");
  encode->add_option("--out", enc_out, "output codes file")->required();

  // search
  auto* search = app.add_subcommand("search", "answer cross-modal queries from files");
  std::string srch_model, srch_codes, srch_queries, srch_modality, srch_out;
  std::size_t srch_top = 50;
  bool srch_exhaustive = false;
  int srch_threads = env_threads();
  search->add_option("--model", srch_model, "model directory")->required();
  search->add_option("--codes", srch_codes, "database codes file")->required();
  search->add_option("--queries", srch_queries, "query feature matrix")->required();
  search->add_option("--query-modality", srch_modality, "a or b")->required();
  search->add_option("--top", srch_top, "results per query");
  search->add_flag("--exhaustive", srch_exhaustive, "rank by full reconstruction distance");
  search->add_option("--threads", srch_threads, "worker threads");
  search->add_option("--out", srch_out, "results CSV path")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "score a results file against labels");
  std::string eval_results, eval_qlabels, eval_dlabels, eval_json, eval_csv;
  std::vector<std::size_t> eval_cutoffs;
  eval->add_option("--results", eval_results, "search results CSV")->required();
  eval->add_option("--query-labels", eval_qlabels, "query labels file")->required();
  eval->add_option("--database-labels", eval_dlabels, "database labels file")->required();
  eval->add_option("--top", eval_cutoffs, "cutoffs (repeatable)");
  eval->add_option("--out-json", eval_json, "JSON report path")->required();
  eval->add_option("--out-csv", eval_csv, "CSV report path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(synth_cfg, synth_out);
    if (prep->parsed()) return cmd_preprocess(prep_a, prep_b, prep_labels, prep_pca, prep_out);
    if (train->parsed()) {
      if (!train_config.empty()) {
        std::ifstream in(train_config);
        if (!in) throw xmq::IoError("cannot open config " + train_config);
        train_cfg = nlohmann::json::parse(in).get<xmq::TrainConfig>();
      }
      if (*o_bits) train_cfg.bits = opt_bits;
      if (*o_k) train_cfg.dictionary_size = opt_k;
      if (*o_m) {
        train_cfg.num_dictionaries = opt_m;
      } else if (*o_bits || *o_k) {
        const int per = std::bit_width(
                            static_cast<unsigned>(std::max(train_cfg.dictionary_size, 2))) -
                        1;
        if (per > 0) train_cfg.num_dictionaries = train_cfg.bits / per;
      }
      if (*o_rounds) train_cfg.outer_rounds = opt_rounds;
      if (*o_seed) train_cfg.seed = opt_seed;
      if (*o_pca) train_cfg.pca_dim = opt_pca;
      if (*o_basis) train_cfg.basis_count = opt_basis;
      if (*o_rho) train_cfg.mapping.rho = opt_rho;
      if (*o_eta) train_cfg.mapping.eta = opt_eta;
      if (*o_lambda) train_cfg.mapping.lambda = opt_lambda;
      if (*o_gamma) train_cfg.quant.gamma = opt_gamma;
      if (*o_mu) train_cfg.quant.mu = opt_mu;
      if (*o_threads) {
        train_cfg.threads = opt_threads;
      } else if (train_cfg.threads == 1) {
        train_cfg.threads = env_threads();
      }
      if (flag_gamma_zero) train_cfg.ablation.gamma_zero = true;
      if (flag_lambda_zero) train_cfg.ablation.lambda_zero = true;
      if (flag_shared) train_cfg.ablation.shared_dictionary = true;
      train_cfg.validate();
      return cmd_train(train_a, train_b, train_labels, train_cfg, train_config, train_out);
    }
    if (encode->parsed()) {
      return cmd_encode(enc_model, enc_features, enc_modality, enc_cycles, enc_threads,
                        enc_out);
    }
    if (search->parsed()) {
      return cmd_search(srch_model, srch_codes, srch_queries, srch_modality, srch_top,
                        srch_exhaustive, srch_threads, srch_out);
    }
    if (eval->parsed()) {
      return cmd_eval(eval_results, eval_qlabels, eval_dlabels, eval_cutoffs, eval_json,
                      eval_csv);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
