#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <fmt/format.h>

#include "cotd/intrinsic_dim.hpp"

namespace cotd::dim {
namespace {

[[noreturn]] void fail(const std::string& what) { throw std::runtime_error("matrix file: " + what); }

bool next_line(std::istream& in, std::string& line, std::size_t& lineno) {
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    return true;
  }
  return false;
}

std::vector<double> split_numbers(const std::string& line, std::size_t lineno) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= line.size()) {
    const auto comma = line.find(',', pos);
    const auto cell = line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(cell, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    while (used < cell.size() && (cell[used] == ' ' || cell[used] == '\t')) ++used;
    if (cell.empty() || used != cell.size()) fail(fmt::format("line {}: bad number '{}'", lineno, cell));
    out.push_back(v);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) fail("truncated binary input");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

constexpr std::uint64_t kMaxEntries = std::uint64_t{1} << 31;

}  // namespace

EmbeddingMatrix read_matrix_csv(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  if (!next_line(in, line, lineno)) fail("empty file");
  const auto header = split_numbers(line, lineno);
  if (header.size() != 2 || header[0] < 0 || header[1] < 0 || header[0] != std::floor(header[0]) ||
      header[1] != std::floor(header[1])) {
    fail("first line must be 'rows,cols'");
  }
  const auto rows = static_cast<Eigen::Index>(header[0]);
  const auto cols = static_cast<Eigen::Index>(header[1]);
  if (static_cast<std::uint64_t>(rows) * static_cast<std::uint64_t>(cols) > kMaxEntries) {
    fail("matrix is too large");
  }
  EmbeddingMatrix x;
  x.data.resize(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (!next_line(in, line, lineno)) fail(fmt::format("expected {} rows, found {}", rows, r));
    const auto values = split_numbers(line, lineno);
    if (static_cast<Eigen::Index>(values.size()) != cols) {
      fail(fmt::format("line {}: expected {} values, found {}", lineno, cols, values.size()));
    }
    for (Eigen::Index c = 0; c < cols; ++c) x.data(r, c) = values[static_cast<std::size_t>(c)];
  }
  if (next_line(in, line, lineno)) fail(fmt::format("line {}: more rows than declared", lineno));
  return x;
}

void write_matrix_csv(std::ostream& out, const EmbeddingMatrix& x) {
  out << x.data.rows() << ',' << x.data.cols() << '\n';
  for (Eigen::Index r = 0; r < x.data.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.data.cols(); ++c) {
      if (c) out << ',';
      out << fmt::format("{:.17g}", x.data(r, c));
    }
    out << '\n';
  }
}

EmbeddingMatrix read_matrix_binary(std::istream& in) {
  if (in.peek() == std::char_traits<char>::eof()) fail("empty file");
  const auto rows = read_u64(in);
  const auto cols = read_u64(in);
  if (cols != 0 && rows > kMaxEntries / cols) fail("matrix is too large");
  EmbeddingMatrix x;
  x.data.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  static_assert(sizeof(double) == 8);
  for (Eigen::Index i = 0; i < x.data.size(); ++i) {
    const auto bits = read_u64(in);
    double v;
    std::memcpy(&v, &bits, 8);
    x.data.data()[i] = v;  // Eigen default storage is column-major
  }
  if (in.peek() != std::char_traits<char>::eof()) fail("trailing bytes after matrix data");
  return x;
}

void write_matrix_binary(std::ostream& out, const EmbeddingMatrix& x) {
  write_u64(out, static_cast<std::uint64_t>(x.data.rows()));
  write_u64(out, static_cast<std::uint64_t>(x.data.cols()));
  for (Eigen::Index i = 0; i < x.data.size(); ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, x.data.data() + i, 8);
    write_u64(out, bits);
  }
}

EmbeddingMatrix read_matrix_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open '" + path.string() + "'");
  try {
    return path.extension() == ".bin" ? read_matrix_binary(in) : read_matrix_csv(in);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(std::string(e.what()) + " (" + path.string() + ")");
  }
}

}  // namespace cotd::dim
