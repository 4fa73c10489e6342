#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <sstream>
#include <string>

#include "lpmkl/io_util.hpp"
#include "lpmkl/kernel.hpp"

// Kernel file formats.
//
// Text (.km): header `n <n> name <label>` then n lines of n decimals.
// Text rows (prediction inputs): header `rows <r> cols <c> name <label>`
// then r lines of c decimals. A square `n` header is accepted as rows too.
// Binary (.kmb): 8-byte magic, little-endian u64 n, then n*n little-endian
// f64 values in row-major order. Binary rows use a second magic followed
// by u64 rows, u64 cols and the values.

namespace lpmkl::io {

inline constexpr char kKernelMagic[8] = {'L', 'P', 'M', 'K', 'L', 'K', 'M', '1'};
inline constexpr char kRowsMagic[8] = {'L', 'P', 'M', 'K', 'L', 'K', 'R', '1'};

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline std::uint64_t get_u64(const std::string& in, std::size_t& pos) {
  if (pos + 8 > in.size()) throw IoError("binary kernel file truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += 8;
  return v;
}

inline void put_matrix(std::string& out, const Matrix& m) {
  out.reserve(out.size() + static_cast<std::size_t>(m.size()) * 8);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) put_u64(out, std::bit_cast<std::uint64_t>(m(i, j)));
}

inline Matrix get_matrix(const std::string& in, std::size_t& pos, std::uint64_t rows, std::uint64_t cols,
                         const std::string& path) {
  const std::uint64_t count = rows * cols;
  if (cols != 0 && count / cols != rows) throw IoError("'" + path + "': dimension overflow");
  if (in.size() - pos != count * 8) {
    throw IoError("'" + path + "': payload holds " + std::to_string((in.size() - pos) / 8) + " values, header says " +
                  std::to_string(count));
  }
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::uint64_t i = 0; i < rows; ++i)
    for (std::uint64_t j = 0; j < cols; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = std::bit_cast<double>(get_u64(in, pos));
  return m;
}

inline bool is_binary_path(const std::filesystem::path& p) { return p.extension() == ".kmb"; }

struct TextHeader {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::string name;
};

inline std::size_t parse_size(const std::string& tok, const std::string& path) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) throw IoError("'" + path + "': bad size '" + tok + "'");
  return v;
}

inline TextHeader parse_header(const std::string& line, const std::string& path) {
  const auto toks = split_ws(line);
  TextHeader h;
  std::size_t name_pos = 0;
  if (toks.size() >= 2 && toks[0] == "n") {
    h.rows = h.cols = parse_size(toks[1], path);
    name_pos = 2;
  } else if (toks.size() >= 4 && toks[0] == "rows" && toks[2] == "cols") {
    h.rows = parse_size(toks[1], path);
    h.cols = parse_size(toks[3], path);
    name_pos = 4;
  } else {
    throw IoError("'" + path + "': malformed header '" + line + "'");
  }
  if (toks.size() > name_pos) {
    if (toks[name_pos] != "name") throw IoError("'" + path + "': malformed header '" + line + "'");
    // The label is the remainder of the line after `name `.
    const auto at = line.find("name", line.find_first_not_of(" \t") + 1);
    auto label = line.substr(at + 4);
    label.erase(0, label.find_first_not_of(" \t"));
    label.erase(label.find_last_not_of(" \t\r") + 1);
    h.name = label;
  }
  return h;
}

inline Matrix parse_text_body(std::istream& in, const TextHeader& h, const std::string& path) {
  Matrix m(static_cast<Eigen::Index>(h.rows), static_cast<Eigen::Index>(h.cols));
  std::string line;
  std::size_t r = 0;
  while (std::getline(in, line)) {
    const auto toks = split_ws(line);
    if (toks.empty()) continue;
    if (r >= h.rows) throw IoError("'" + path + "': more than " + std::to_string(h.rows) + " rows");
    if (toks.size() != h.cols) {
      throw IoError("'" + path + "': row " + std::to_string(r) + " has " + std::to_string(toks.size()) +
                    " values, expected " + std::to_string(h.cols));
    }
    for (std::size_t c = 0; c < h.cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = parse_double(toks[c], path);
    ++r;
  }
  if (r != h.rows) {
    throw IoError("'" + path + "': found " + std::to_string(r) + " rows, expected " + std::to_string(h.rows));
  }
  return m;
}

inline std::string format_matrix_rows(const Matrix& m) {
  std::string out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out.push_back(' ');
      out += format_double(m(i, j));
    }
    out.push_back('\n');
  }
  return out;
}

}  // namespace detail

inline std::string encode_kernel_text(const KernelMatrix& K) {
  std::string out = "n " + std::to_string(K.n()) + " name " + K.name() + "\n";
  out += detail::format_matrix_rows(K.values());
  return out;
}

inline std::string encode_kernel_binary(const KernelMatrix& K) {
  std::string out(kKernelMagic, 8);
  detail::put_u64(out, K.n());
  detail::put_matrix(out, K.values());
  return out;
}

inline KernelMatrix decode_kernel(const std::string& bytes, const std::string& path, const std::string& fallback_name) {
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kKernelMagic, 8) == 0) {
    std::size_t pos = 8;
    const auto n = detail::get_u64(bytes, pos);
    Matrix m = detail::get_matrix(bytes, pos, n, n, path);
    return KernelMatrix(std::move(m), fallback_name);
  }
  std::istringstream in(bytes);
  std::string header;
  if (!std::getline(in, header)) throw IoError("'" + path + "': empty file");
  const auto h = detail::parse_header(header, path);
  if (h.rows != h.cols) throw IoError("'" + path + "': kernel file must be square");
  Matrix m = detail::parse_text_body(in, h, path);
  return KernelMatrix(std::move(m), h.name.empty() ? fallback_name : h.name);
}

inline void write_kernel(const std::filesystem::path& path, const KernelMatrix& K) {
  write_atomic(path, detail::is_binary_path(path) ? encode_kernel_binary(K) : encode_kernel_text(K));
}

inline KernelMatrix read_kernel(const std::filesystem::path& path) {
  return decode_kernel(read_file(path), path.string(), path.stem().string());
}

inline std::string encode_rows_text(const KernelRows& R) {
  std::string out = "rows " + std::to_string(R.rows()) + " cols " + std::to_string(R.cols()) + " name " + R.name + "\n";
  out += detail::format_matrix_rows(R.values);
  return out;
}

inline std::string encode_rows_binary(const KernelRows& R) {
  std::string out(kRowsMagic, 8);
  detail::put_u64(out, R.rows());
  detail::put_u64(out, R.cols());
  detail::put_matrix(out, R.values);
  return out;
}

inline void write_rows(const std::filesystem::path& path, const KernelRows& R) {
  write_atomic(path, detail::is_binary_path(path) ? encode_rows_binary(R) : encode_rows_text(R));
}

inline KernelRows read_rows(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const std::string p = path.string();
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kRowsMagic, 8) == 0) {
    std::size_t pos = 8;
    const auto r = detail::get_u64(bytes, pos);
    const auto c = detail::get_u64(bytes, pos);
    return KernelRows{detail::get_matrix(bytes, pos, r, c, p), path.stem().string()};
  }
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kKernelMagic, 8) == 0) {
    const auto K = decode_kernel(bytes, p, path.stem().string());
    return KernelRows{K.values(), K.name()};
  }
  std::istringstream in(bytes);
  std::string header;
  if (!std::getline(in, header)) throw IoError("'" + p + "': empty file");
  const auto h = detail::parse_header(header, p);
  Matrix m = detail::parse_text_body(in, h, p);
  if (!m.allFinite()) throw IoError("'" + p + "': non-finite entry");
  return KernelRows{std::move(m), h.name.empty() ? path.stem().string() : h.name};
}

}  // namespace lpmkl::io
