#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "xmq/core.hpp"
#include "xmq/matrix_io.hpp"

namespace xmq {

// Composite codes: each item selects exactly one element per dictionary,
// stored as M small indices per item.
struct CodeMatrix {
  std::size_t num_items = 0;
  std::size_t num_dictionaries = 0;  // M
  std::size_t dictionary_size = 0;   // K

  // item-major: codes[item * M + m]
  std::vector<std::uint32_t> codes;

  CodeMatrix() = default;
  CodeMatrix(std::size_t items, std::size_t m, std::size_t k)
      : num_items(items), num_dictionaries(m), dictionary_size(k), codes(items * m, 0) {}

  std::uint32_t at(std::size_t item, std::size_t m) const {
    return codes[item * num_dictionaries + m];
  }
  std::uint32_t& at(std::size_t item, std::size_t m) {
    return codes[item * num_dictionaries + m];
  }
  const std::uint32_t* item(std::size_t n) const { return codes.data() + n * num_dictionaries; }

  void validate() const {
    if (codes.size() != num_items * num_dictionaries) {
      throw DimensionError("CodeMatrix: storage size mismatch");
    }
    for (std::uint32_t c : codes) {
      if (c >= dictionary_size) throw DimensionError("CodeMatrix: code index out of range");
    }
  }
};

// Expands codes into the stacked one-hot indicator matrix of shape
// (M*K) x N: block m of column n holds e_{codes(n,m)}.
inline Matrix expand_codes(const CodeMatrix& c) {
  c.validate();
  const std::size_t m_count = c.num_dictionaries;
  const std::size_t k = c.dictionary_size;
  Matrix p = Matrix::Zero(static_cast<Eigen::Index>(m_count * k),
                          static_cast<Eigen::Index>(c.num_items));
  for (std::size_t n = 0; n < c.num_items; ++n) {
    for (std::size_t m = 0; m < m_count; ++m) {
      p(static_cast<Eigen::Index>(m * k + c.at(n, m)), static_cast<Eigen::Index>(n)) = 1.0;
    }
  }
  return p;
}

// Inverse of expand_codes. Each block of K rows must contain exactly one 1.
inline CodeMatrix codes_from_indicator(const Matrix& p, std::size_t m_count, std::size_t k) {
  if (static_cast<std::size_t>(p.rows()) != m_count * k) {
    throw DimensionError("codes_from_indicator: row count is not M*K");
  }
  CodeMatrix c(static_cast<std::size_t>(p.cols()), m_count, k);
  for (Eigen::Index n = 0; n < p.cols(); ++n) {
    for (std::size_t m = 0; m < m_count; ++m) {
      int ones = 0;
      for (std::size_t j = 0; j < k; ++j) {
        const double v = p(static_cast<Eigen::Index>(m * k + j), n);
        if (v == 1.0) {
          c.at(static_cast<std::size_t>(n), m) = static_cast<std::uint32_t>(j);
          ++ones;
        } else if (v != 0.0) {
          throw DimensionError("codes_from_indicator: entry is neither 0 nor 1");
        }
      }
      if (ones != 1) throw DimensionError("codes_from_indicator: block does not sum to 1");
    }
  }
  return c;
}

// Codes are persisted as a matrix with one row per item (indices as doubles)
// plus a JSON sidecar {"M", "K", "num_items"} next to it.

inline std::filesystem::path codes_sidecar_path(const std::filesystem::path& path) {
  std::filesystem::path p = path;
  p += ".json";
  return p;
}

inline void save_codes(const CodeMatrix& c, const std::filesystem::path& path) {
  c.validate();
  Matrix m(static_cast<Eigen::Index>(c.num_items), static_cast<Eigen::Index>(c.num_dictionaries));
  for (std::size_t n = 0; n < c.num_items; ++n) {
    for (std::size_t d = 0; d < c.num_dictionaries; ++d) {
      m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d)) =
          static_cast<double>(c.at(n, d));
    }
  }
  save_matrix(m, path);

  nlohmann::json sidecar;
  sidecar["M"] = c.num_dictionaries;
  sidecar["K"] = c.dictionary_size;
  sidecar["num_items"] = c.num_items;
  std::ofstream out(codes_sidecar_path(path), std::ios::trunc);
  if (!out) throw IoError("save_codes: cannot open sidecar for " + path.string());
  out << sidecar.dump(2) << '\n';
}

inline CodeMatrix load_codes(const std::filesystem::path& path) {
  std::ifstream side(codes_sidecar_path(path));
  if (!side) throw IoError("load_codes: missing sidecar for " + path.string());
  nlohmann::json sidecar = nlohmann::json::parse(side);

  const auto m_count = sidecar.at("M").get<std::size_t>();
  const auto k = sidecar.at("K").get<std::size_t>();
  const auto items = sidecar.at("num_items").get<std::size_t>();

  Matrix m = load_matrix(path);
  if (static_cast<std::size_t>(m.rows()) != items ||
      static_cast<std::size_t>(m.cols()) != m_count) {
    throw DimensionError("load_codes: matrix shape disagrees with sidecar");
  }
  CodeMatrix c(items, m_count, k);
  for (std::size_t n = 0; n < items; ++n) {
    for (std::size_t d = 0; d < m_count; ++d) {
      const double v = m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
      if (v < 0.0 || v != std::floor(v)) {
        throw FormatError("load_codes: non-integral code value");
      }
      c.at(n, d) = static_cast<std::uint32_t>(v);
    }
  }
  c.validate();
  return c;
}

}  // namespace xmq
