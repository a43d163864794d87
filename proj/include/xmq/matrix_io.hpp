#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "xmq/core.hpp"

// Binary matrix container: magic "XMQM", version u32 = 1, rows u64, cols u64,
// then rows*cols little-endian IEEE f64 values in row-major order. Round-trips
// are bit-exact for any finite matrix.

namespace xmq {

static_assert(std::endian::native == std::endian::little,
              "matrix files are little-endian; big-endian hosts are unsupported");

inline constexpr char kMatrixMagic[4] = {'X', 'M', 'Q', 'M'};
inline constexpr std::uint32_t kMatrixVersion = 1;
inline constexpr std::size_t kMatrixHeaderBytes = 4 + 4 + 8 + 8;

inline void save_matrix(const Matrix& m, const std::filesystem::path& path) {
  if (!all_finite(m)) {
    throw NonFiniteError("save_matrix: refusing to write non-finite values to " + path.string());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("save_matrix: cannot open " + path.string());

  out.write(kMatrixMagic, 4);
  const std::uint32_t version = kMatrixVersion;
  const std::uint64_t rows = static_cast<std::uint64_t>(m.rows());
  const std::uint64_t cols = static_cast<std::uint64_t>(m.cols());
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
  out.write(reinterpret_cast<const char*>(&cols), sizeof(cols));

  std::vector<double> row(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(double)));
  }
  if (!out) throw IoError("save_matrix: write failed for " + path.string());
}

inline Matrix load_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_matrix: cannot open " + path.string());

  char header[kMatrixHeaderBytes];
  in.read(header, kMatrixHeaderBytes);
  if (in.gcount() != static_cast<std::streamsize>(kMatrixHeaderBytes)) {
    throw FormatError("load_matrix: short header in " + path.string());
  }
  if (std::memcmp(header, kMatrixMagic, 4) != 0) {
    throw FormatError("load_matrix: bad magic in " + path.string());
  }
  std::uint32_t version = 0;
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  std::memcpy(&version, header + 4, sizeof(version));
  std::memcpy(&rows, header + 8, sizeof(rows));
  std::memcpy(&cols, header + 16, sizeof(cols));
  if (version != kMatrixVersion) {
    throw FormatError("load_matrix: unsupported version " + std::to_string(version) + " in " +
                      path.string());
  }

  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  std::vector<double> row(static_cast<std::size_t>(cols));
  for (std::uint64_t r = 0; r < rows; ++r) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(double)));
    if (in.gcount() != static_cast<std::streamsize>(row.size() * sizeof(double))) {
      throw TruncationError("load_matrix: truncated payload in " + path.string());
    }
    for (std::uint64_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[static_cast<std::size_t>(c)];
    }
  }
  if (!all_finite(m)) {
    throw NonFiniteError("load_matrix: non-finite values in " + path.string());
  }
  return m;
}

// Labels are stored as text, one line per item, space-separated integers.

inline void save_labels(const std::vector<std::vector<int>>& labels,
                        const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("save_labels: cannot open " + path.string());
  for (const auto& item : labels) {
    for (std::size_t i = 0; i < item.size(); ++i) {
      if (i) out << ' ';
      out << item[i];
    }
    out << '\n';
  }
  if (!out) throw IoError("save_labels: write failed for " + path.string());
}

inline std::vector<std::vector<int>> load_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_labels: cannot open " + path.string());
  std::vector<std::vector<int>> labels;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::vector<int> item;
    int v = 0;
    while (ls >> v) item.push_back(v);
    if (!ls.eof()) throw FormatError("load_labels: non-integer token in " + path.string());
    labels.push_back(std::move(item));
  }
  return labels;
}

}  // namespace xmq
