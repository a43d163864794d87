// Full training driver: preprocessing, warm-up of the mapping and the two
// quantizers, then alternation between the mapping sub-problem and the
// quantization sub-problem with an objective trace per outer round. Also
// hosts config (de)serialization and validation-based hyper selection.
#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "xmq/codes.hpp"
#include "xmq/common_space.hpp"
#include "xmq/core.hpp"
#include "xmq/dataset.hpp"
#include "xmq/eval.hpp"
#include "xmq/quantizer.hpp"
#include "xmq/search.hpp"
#include "xmq/solvers.hpp"

namespace xmq {

struct AblationFlags {
  bool gamma_zero = false;         // drop the pair-alignment term
  bool lambda_zero = false;        // drop the latent-alignment term
  bool shared_dictionary = false;  // one element matrix serves both modalities
};

struct TrainConfig {
  int bits = 32;
  int num_dictionaries = 4;   // M
  int dictionary_size = 256;  // K

  CommonSpaceHyper mapping;
  QuantizationHyper quant;

  int outer_rounds = 10;
  int mapping_rounds_per_outer = 3;
  int quant_rounds_per_outer = 3;
  int init_mapping_rounds = 10;
  int init_quant_rounds = 3;
  int greedy_cycles = 3;

  Eigen::Index pca_dim = 64;
  Eigen::Index basis_count = 512;

  AblationFlags ablation;
  std::uint64_t seed = 0;

  int lasso_iterations = 200;
  int qcls_iterations = 200;
  int lbfgs_iterations = 30;
  int threads = 1;

  // The latent width tracks the code length.
  Eigen::Index latent_dim() const { return bits; }

  int bits_per_dictionary() const {
    return std::bit_width(static_cast<unsigned>(dictionary_size)) - 1;
  }

  void validate() const {
    if (bits < 1) throw DimensionError("TrainConfig: bits must be positive");
    if (num_dictionaries < 1) throw DimensionError("TrainConfig: M must be positive");
    if (dictionary_size < 2 || !std::has_single_bit(static_cast<unsigned>(dictionary_size))) {
      throw DimensionError("TrainConfig: K must be a power of two, at least 2");
    }
    if (bits != num_dictionaries * bits_per_dictionary()) {
      throw DimensionError("TrainConfig: bits must equal M*log2(K)");
    }
    if (outer_rounds < 0 || mapping_rounds_per_outer < 0 || quant_rounds_per_outer < 0 ||
        init_mapping_rounds < 0 || init_quant_rounds < 0) {
      throw DimensionError("TrainConfig: round counts must be non-negative");
    }
    if (greedy_cycles < 1) throw DimensionError("TrainConfig: greedy_cycles must be positive");
    if (pca_dim < 1 || basis_count < 1) {
      throw DimensionError("TrainConfig: pca_dim and basis_count must be positive");
    }
    if (lasso_iterations < 1 || qcls_iterations < 1 || lbfgs_iterations < 1) {
      throw DimensionError("TrainConfig: solver budgets must be positive");
    }
    if (threads < 1) throw DimensionError("TrainConfig: threads must be positive");
    if (mapping.rho < 0 || mapping.eta < 0 || mapping.lambda < 0 || quant.gamma < 0 ||
        quant.mu < 0) {
      throw DimensionError("TrainConfig: hyper-parameters must be non-negative");
    }
  }
};

inline void to_json(nlohmann::json& j, const AblationFlags& a) {
  j = {{"gamma_zero", a.gamma_zero},
       {"lambda_zero", a.lambda_zero},
       {"shared_dictionary", a.shared_dictionary}};
}

inline void from_json(const nlohmann::json& j, AblationFlags& a) {
  a.gamma_zero = j.value("gamma_zero", false);
  a.lambda_zero = j.value("lambda_zero", false);
  a.shared_dictionary = j.value("shared_dictionary", false);
}

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"bits", c.bits},
       {"M", c.num_dictionaries},
       {"K", c.dictionary_size},
       {"hyper",
        {{"rho", c.mapping.rho},
         {"eta", c.mapping.eta},
         {"lambda", c.mapping.lambda},
         {"gamma", c.quant.gamma},
         {"mu", c.quant.mu}}},
       {"outer_rounds", c.outer_rounds},
       {"mapping_rounds_per_outer", c.mapping_rounds_per_outer},
       {"quant_rounds_per_outer", c.quant_rounds_per_outer},
       {"init_mapping_rounds", c.init_mapping_rounds},
       {"init_quant_rounds", c.init_quant_rounds},
       {"greedy_cycles", c.greedy_cycles},
       {"pca_dim", c.pca_dim},
       {"basis_count", c.basis_count},
       {"ablation", c.ablation},
       {"seed", c.seed},
       {"solvers",
        {{"lasso_iterations", c.lasso_iterations},
         {"qcls_iterations", c.qcls_iterations},
         {"lbfgs_iterations", c.lbfgs_iterations}}},
       {"threads", c.threads}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  const TrainConfig defaults;
  c.bits = j.value("bits", defaults.bits);
  c.dictionary_size = j.value("K", defaults.dictionary_size);
  if (j.contains("M")) {
    c.num_dictionaries = j.at("M").get<int>();
  } else {
    // derive M from the bit budget when only K is given
    const int per = std::bit_width(static_cast<unsigned>(std::max(c.dictionary_size, 2))) - 1;
    c.num_dictionaries = per > 0 ? c.bits / per : 0;
  }
  if (j.contains("hyper")) {
    const auto& h = j.at("hyper");
    c.mapping.rho = h.value("rho", defaults.mapping.rho);
    c.mapping.eta = h.value("eta", defaults.mapping.eta);
    c.mapping.lambda = h.value("lambda", defaults.mapping.lambda);
    c.quant.gamma = h.value("gamma", defaults.quant.gamma);
    c.quant.mu = h.value("mu", defaults.quant.mu);
  }
  c.outer_rounds = j.value("outer_rounds", defaults.outer_rounds);
  c.mapping_rounds_per_outer =
      j.value("mapping_rounds_per_outer", defaults.mapping_rounds_per_outer);
  c.quant_rounds_per_outer = j.value("quant_rounds_per_outer", defaults.quant_rounds_per_outer);
  c.init_mapping_rounds = j.value("init_mapping_rounds", defaults.init_mapping_rounds);
  c.init_quant_rounds = j.value("init_quant_rounds", defaults.init_quant_rounds);
  c.greedy_cycles = j.value("greedy_cycles", defaults.greedy_cycles);
  c.pca_dim = j.value("pca_dim", defaults.pca_dim);
  c.basis_count = j.value("basis_count", defaults.basis_count);
  c.ablation = j.value("ablation", defaults.ablation);
  c.seed = j.value("seed", defaults.seed);
  if (j.contains("solvers")) {
    const auto& s = j.at("solvers");
    c.lasso_iterations = s.value("lasso_iterations", defaults.lasso_iterations);
    c.qcls_iterations = s.value("qcls_iterations", defaults.qcls_iterations);
    c.lbfgs_iterations = s.value("lbfgs_iterations", defaults.lbfgs_iterations);
  }
  c.threads = j.value("threads", defaults.threads);
}

// Everything a finished (or initialized) training run produces. The mapping
// state and the materialized latent matrix X' = R·S are kept so the
// quantization objective can be re-evaluated exactly.
struct TrainedModel {
  CommonSpaceModel common_space;
  MappingState mapping;
  Matrix latent_a;  // X' = R·S, refreshed after every mapping pass
  CompositeQuantizer quant_a;
  CompositeQuantizer quant_b;
  CodeMatrix codes_a;
  CodeMatrix codes_b;
  QuantizationHyper quant_hyper;  // with ablations applied

  std::vector<double> objective_trace;  // penalty-form objective per outer round
  // constrained form per outer round: (objective without the cross-term
  // penalties, summed squared constraint violation)
  std::vector<std::pair<double, double>> constrained_trace;

  PenaltyObjective objective() const {
    return {&quant_a, &quant_b, &codes_a, &codes_b, &latent_a, &mapping.latent_b,
            quant_hyper};
  }

  void validate() const {
    quant_a.validate();
    quant_b.validate();
    codes_a.validate();
    codes_b.validate();
    if (codes_a.num_dictionaries != static_cast<std::size_t>(quant_a.num_dictionaries) ||
        codes_a.dictionary_size != static_cast<std::size_t>(quant_a.dictionary_size) ||
        codes_b.num_dictionaries != static_cast<std::size_t>(quant_b.num_dictionaries) ||
        codes_b.dictionary_size != static_cast<std::size_t>(quant_b.dictionary_size)) {
      throw DimensionError("TrainedModel: codes inconsistent with quantizers");
    }
    for (const double v : objective_trace) {
      if (!std::isfinite(v)) throw NonFiniteError("TrainedModel: non-finite trace value");
    }
  }
};

// Penalty-form training objective: the mapping terms plus the full
// quantization penalty.
inline double full_objective(const TrainedModel& model, const Matrix& x, const Matrix& y) {
  return mapping_objective(model.common_space, model.mapping, x, y) +
         evaluate_psi(model.objective());
}

namespace detail {

// One mapping sub-loop. During warm-up the quantization terms are absent;
// afterwards the two reconstructions are held fixed for the whole loop.
inline void mapping_pass(TrainedModel& model, const Matrix& x, const Matrix& y,
                         const TrainConfig& cfg, bool warm_up) {
  Matrix cp, dq;
  const Matrix* cp_ptr = nullptr;
  const Matrix* dq_ptr = nullptr;
  if (!warm_up) {
    cp = reconstruct(model.quant_a, model.codes_a);
    dq = reconstruct(model.quant_b, model.codes_b);
    cp_ptr = &cp;
    dq_ptr = &dq;
  }
  const int rounds = warm_up ? cfg.init_mapping_rounds : cfg.mapping_rounds_per_outer;
  for (int r = 0; r < rounds; ++r) {
    model.mapping.latent_b = update_latent_text(model.common_space, model.mapping, y, dq_ptr);
    model.mapping.sparse_codes = update_sparse_codes(model.common_space, model.mapping, x,
                                                     cp_ptr, cfg.lasso_iterations);
    update_dictionaries(model.common_space, model.mapping, x, y, cp_ptr,
                        cfg.qcls_iterations);
  }
  model.latent_a = model.common_space.transform_r * model.mapping.sparse_codes;
}

// One quantization sub-loop: element matrices, then codes, then the
// cross-term constants, each against the current state of the others.
inline void quantization_pass(TrainedModel& model, const TrainConfig& cfg) {
  LbfgsConfig lcfg;
  lcfg.max_iterations = cfg.lbfgs_iterations;
  for (int r = 0; r < cfg.quant_rounds_per_outer; ++r) {
    PenaltyObjective obj = model.objective();
    if (cfg.ablation.shared_dictionary) {
      update_shared_dictionary(model.quant_a, obj, lcfg);
      model.quant_b.elements = model.quant_a.elements;
    } else {
      update_dictionary(obj, Modality::kA, model.quant_a, lcfg);
      update_dictionary(obj, Modality::kB, model.quant_b, lcfg);
    }
    model.codes_a = assign_codes(obj, Modality::kA, cfg.greedy_cycles);
    model.codes_b = assign_codes(obj, Modality::kB, cfg.greedy_cycles);
    update_epsilon(model.quant_a, model.codes_a);
    update_epsilon(model.quant_b, model.codes_b);
  }
}

inline CodeMatrix take_items(const CodeMatrix& joint, std::size_t first, std::size_t count) {
  CodeMatrix out(count, joint.num_dictionaries, joint.dictionary_size);
  const auto begin = joint.codes.begin() +
                     static_cast<std::ptrdiff_t>(first * joint.num_dictionaries);
  std::copy(begin, begin + static_cast<std::ptrdiff_t>(count * joint.num_dictionaries),
            out.codes.begin());
  return out;
}

}  // namespace detail

// Warm-up state: the mapping is fit with the quantization terms dropped, then
// each modality gets a plain composite quantizer of its latent points.
inline TrainedModel initialize(const PreprocessResult& pre, const TrainConfig& cfg) {
  cfg.validate();
  const Matrix& x = pre.data.features_a;
  const Matrix& y = pre.data.features_b;

  TrainedModel model;
  CommonSpaceHyper map_hyper = cfg.mapping;
  if (cfg.ablation.lambda_zero) map_hyper.lambda = 0.0;
  model.quant_hyper = cfg.quant;
  if (cfg.ablation.gamma_zero) model.quant_hyper.gamma = 0.0;

  auto [cs, st] = initialize_common_space(x, y, cfg.latent_dim(), cfg.basis_count,
                                          map_hyper, cfg.seed);
  model.common_space = std::move(cs);
  model.mapping = std::move(st);
  model.common_space.mean_a = pre.mean_a;
  model.common_space.mean_b = pre.mean_b;
  model.common_space.pca_projection = pre.pca_projection;

  detail::mapping_pass(model, x, y, cfg, /*warm_up=*/true);

  const int m_count = cfg.num_dictionaries;
  const int k = cfg.dictionary_size;
  const auto n = static_cast<std::size_t>(x.cols());
  if (cfg.ablation.shared_dictionary) {
    Matrix both(model.latent_a.rows(), model.latent_a.cols() + model.mapping.latent_b.cols());
    both << model.latent_a, model.mapping.latent_b;
    auto [q, joint_codes] = initialize_quantizer(both, m_count, k,
                                                 split_seed(cfg.seed, 0x73686172'6564ULL));
    model.quant_a = q;
    model.quant_b = std::move(q);
    model.codes_a = detail::take_items(joint_codes, 0, n);
    model.codes_b = detail::take_items(joint_codes, n, n);
  } else {
    auto [qa, ca] = initialize_quantizer(model.latent_a, m_count, k,
                                         split_seed(cfg.seed, 0x696e69'745f61ULL));
    auto [qb, cb] = initialize_quantizer(model.mapping.latent_b, m_count, k,
                                         split_seed(cfg.seed, 0x696e69'745f62ULL));
    model.quant_a = std::move(qa);
    model.quant_b = std::move(qb);
    model.codes_a = std::move(ca);
    model.codes_b = std::move(cb);
  }
  update_epsilon(model.quant_a, model.codes_a);
  update_epsilon(model.quant_b, model.codes_b);

  // a few uncoupled quantization rounds on the frozen latents
  const QuantizationHyper warm{0.0, cfg.quant.mu};
  const Matrix zero_a = Matrix::Zero(model.latent_a.rows(), model.latent_a.cols());
  const Matrix zero_b = Matrix::Zero(model.mapping.latent_b.rows(),
                                     model.mapping.latent_b.cols());
  LbfgsConfig lcfg;
  lcfg.max_iterations = cfg.lbfgs_iterations;
  for (int r = 0; r < cfg.init_quant_rounds; ++r) {
    if (cfg.ablation.shared_dictionary) {
      PenaltyObjective obj = model.objective();
      obj.hyper = warm;
      update_shared_dictionary(model.quant_a, obj, lcfg);
      model.quant_b.elements = model.quant_a.elements;
    } else {
      update_dictionary(model.quant_a, model.codes_a, model.latent_a, zero_a, warm, lcfg);
      update_dictionary(model.quant_b, model.codes_b, model.mapping.latent_b, zero_b, warm,
                        lcfg);
    }
    model.codes_a = assign_codes(model.quant_a, model.codes_a, model.latent_a, zero_a, warm,
                                 cfg.greedy_cycles);
    model.codes_b = assign_codes(model.quant_b, model.codes_b, model.mapping.latent_b,
                                 zero_b, warm, cfg.greedy_cycles);
    update_epsilon(model.quant_a, model.codes_a);
    update_epsilon(model.quant_b, model.codes_b);
  }
  return model;
}

namespace detail {

inline std::pair<double, double> constrained_value(const TrainedModel& model,
                                                   double penalty_value) {
  const Vector ca = cross_terms(model.quant_a, model.codes_a);
  const Vector cb = cross_terms(model.quant_b, model.codes_b);
  const double violation = (ca.array() - model.quant_a.epsilon).square().sum() +
                           (cb.array() - model.quant_b.epsilon).square().sum();
  return {penalty_value - model.quant_hyper.mu * violation, violation};
}

}  // namespace detail

inline TrainedModel train(const PairedDataset& ds, const TrainConfig& cfg) {
  cfg.validate();
  ds.validate();
  const PreprocessResult pre = preprocess(ds, cfg.pca_dim);
  TrainedModel model = initialize(pre, cfg);
  const Matrix& x = pre.data.features_a;
  const Matrix& y = pre.data.features_b;

  model.objective_trace.reserve(static_cast<std::size_t>(cfg.outer_rounds));
  for (int round = 0; round < cfg.outer_rounds; ++round) {
    try {
      detail::mapping_pass(model, x, y, cfg, /*warm_up=*/false);
      detail::quantization_pass(model, cfg);
    } catch (const Error& e) {
      throw SolverError("train: outer round " + std::to_string(round) + ": " + e.what());
    }
    const double f = full_objective(model, x, y);
    if (!std::isfinite(f)) {
      throw NonFiniteError("train: objective diverged at round " + std::to_string(round));
    }
    model.objective_trace.push_back(f);
    model.constrained_trace.push_back(detail::constrained_value(model, f));
  }
  model.validate();
  return model;
}

struct HyperGridPoint {
  CommonSpaceHyper mapping;
  QuantizationHyper quant;
};

struct ValidationChoice {
  std::size_t index = 0;
  HyperGridPoint hyper;
  std::vector<double> scores;  // mean cross-modal MAP per grid point
};

// Trains one model per grid point on a seeded 90% split and scores each by
// MAP over held-out queries, averaged over both query directions. The first
// maximum wins.
inline ValidationChoice validate_select(const PairedDataset& ds,
                                        const std::vector<HyperGridPoint>& grid,
                                        const TrainConfig& base) {
  if (grid.empty()) throw DimensionError("validate_select: empty grid");
  if (!ds.has_labels()) throw DimensionError("validate_select: labels required");
  ds.validate();
  const std::size_t n = ds.size();
  if (n < 2) throw DimensionError("validate_select: need at least two pairs");

  std::size_t held = std::clamp<std::size_t>(n / 10, 1, 2000);
  if (held >= n) held = n - 1;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(split_seed(base.seed, 0x76616c'5f73656cULL));
  std::shuffle(order.begin(), order.end(), rng);

  PairedDataset queries, database;
  queries.features_a.resize(ds.features_a.rows(), static_cast<Eigen::Index>(held));
  queries.features_b.resize(ds.features_b.rows(), static_cast<Eigen::Index>(held));
  database.features_a.resize(ds.features_a.rows(), static_cast<Eigen::Index>(n - held));
  database.features_b.resize(ds.features_b.rows(), static_cast<Eigen::Index>(n - held));
  for (std::size_t i = 0; i < n; ++i) {
    const auto src = static_cast<Eigen::Index>(order[i]);
    PairedDataset& dst = i < held ? queries : database;
    const auto col = static_cast<Eigen::Index>(i < held ? i : i - held);
    dst.features_a.col(col) = ds.features_a.col(src);
    dst.features_b.col(col) = ds.features_b.col(src);
    dst.labels.push_back(ds.labels[order[i]]);
  }

  const std::size_t cutoff = std::min<std::size_t>(50, database.size());
  ValidationChoice choice;
  for (const HyperGridPoint& point : grid) {
    TrainConfig cfg = base;
    cfg.mapping = point.mapping;
    cfg.quant = point.quant;
    const TrainedModel model = train(database, cfg);

    SearchIndex index_b{model.quant_b, model.codes_b, database.labels, model.common_space};
    SearchIndex index_a{model.quant_a, model.codes_a, database.labels, model.common_space};
    std::vector<ResultList> a_to_b, b_to_a;
    for (std::size_t q = 0; q < held; ++q) {
      const auto col = static_cast<Eigen::Index>(q);
      a_to_b.push_back(query_cross_modal(index_b, queries.features_a.col(col),
                                         Modality::kA, cutoff));
      b_to_a.push_back(query_cross_modal(index_a, queries.features_b.col(col),
                                         Modality::kB, cutoff));
    }
    const RelevanceJudge judge{&queries.labels, &database.labels};
    const double score =
        0.5 * (map_at(a_to_b, judge, cutoff) + map_at(b_to_a, judge, cutoff));
    choice.scores.push_back(score);
  }

  choice.index = static_cast<std::size_t>(
      std::max_element(choice.scores.begin(), choice.scores.end()) - choice.scores.begin());
  choice.hyper = grid[choice.index];
  return choice;
}

}  // namespace xmq
