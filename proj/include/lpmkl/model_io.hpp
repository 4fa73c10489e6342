#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>

#include "lpmkl/io_util.hpp"
#include "lpmkl/mkl.hpp"

// Model file: one keyword per line followed by its values.
//
//   p inf
//   C 1
//   b -0.125
//   theta 0.5 0.5 ...
//   alpha 0.25 -0.25 ...
//   support 0 1 ...
//
// Numbers use 17 significant digits so they parse back to the same doubles.
// A `q_block` line is written only for block-norm models, and a `kernels`
// line with the training kernel names when none of them contains spaces.

namespace lpmkl::io {

namespace detail {

inline std::string join_values(const Vector& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out.push_back(' ');
    out += format_double(v[i]);
  }
  return out;
}

inline Vector parse_values(const std::vector<std::string>& toks, const std::string& path) {
  Vector v(static_cast<Eigen::Index>(toks.size() - 1));
  for (std::size_t i = 1; i < toks.size(); ++i) v[static_cast<Eigen::Index>(i - 1)] = parse_double(toks[i], path);
  return v;
}

}  // namespace detail

inline std::string encode_model(const MklModel& model) {
  std::string out;
  out += "p " + model.config.p.to_string() + "\n";
  if (model.config.q_block) out += "q_block " + format_double(*model.config.q_block) + "\n";
  out += "C " + format_double(model.config.C) + "\n";
  out += "b " + format_double(model.bias) + "\n";
  out += "theta" + detail::join_values(model.theta) + "\n";
  out += "alpha" + detail::join_values(model.alpha) + "\n";
  const bool plain_names =
      !model.kernel_names.empty() && std::none_of(model.kernel_names.begin(), model.kernel_names.end(), [](const auto& n) {
        return n.empty() || n.find_first_of(" \t\r\n") != std::string::npos;
      });
  if (plain_names) {
    out += "kernels";
    for (const auto& n : model.kernel_names) out += " " + n;
    out += "\n";
  }
  out += "support";
  for (auto i : model.support_indices()) out += " " + std::to_string(i);
  out += "\n";
  return out;
}

inline MklModel decode_model(const std::string& text, const std::string& path) {
  std::map<std::string, std::vector<std::string>> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto toks = split_ws(line);
    if (toks.empty()) continue;
    static const char* known[] = {"p", "q_block", "C", "b", "theta", "alpha", "kernels", "support"};
    if (std::find(std::begin(known), std::end(known), toks[0]) == std::end(known)) {
      throw IoError("'" + path + "': unknown model field '" + toks[0] + "'");
    }
    if (!lines.emplace(toks[0], toks).second) throw IoError("'" + path + "': duplicate model field '" + toks[0] + "'");
  }
  for (const char* key : {"p", "C", "b", "theta", "alpha"}) {
    if (!lines.count(key)) throw IoError("'" + path + "': missing model field '" + std::string(key) + "'");
  }
  auto scalar = [&](const char* key) {
    const auto& t = lines.at(key);
    if (t.size() != 2) throw IoError("'" + path + "': field '" + std::string(key) + "' takes one value");
    return t[1];
  };

  MklModel model;
  model.config.p = NormParameter::parse(scalar("p"));
  if (lines.count("q_block")) model.config.q_block = parse_double(scalar("q_block"), path);
  model.config.C = parse_double(scalar("C"), path);
  model.bias = parse_double(scalar("b"), path);
  model.theta = detail::parse_values(lines.at("theta"), path);
  model.alpha = detail::parse_values(lines.at("alpha"), path);
  if (model.theta.size() == 0) throw IoError("'" + path + "': model has no kernels");
  if (model.alpha.size() == 0) throw IoError("'" + path + "': model has no training samples");
  if (lines.count("kernels")) {
    const auto& t = lines.at("kernels");
    model.kernel_names.assign(t.begin() + 1, t.end());
    if (model.kernel_names.size() != static_cast<std::size_t>(model.theta.size())) {
      throw IoError("'" + path + "': kernels line lists " + std::to_string(model.kernel_names.size()) +
                    " names for " + std::to_string(model.theta.size()) + " weights");
    }
  }
  if (lines.count("support")) {
    const auto& t = lines.at("support");
    std::vector<std::size_t> listed;
    for (std::size_t i = 1; i < t.size(); ++i) listed.push_back(static_cast<std::size_t>(parse_double(t[i], path)));
    if (listed != model.support_indices()) throw IoError("'" + path + "': support list disagrees with alpha");
  }
  return model;
}

inline void write_model(const std::filesystem::path& path, const MklModel& model) {
  write_atomic(path, encode_model(model));
}

inline MklModel read_model(const std::filesystem::path& path) { return decode_model(read_file(path), path.string()); }

}  // namespace lpmkl::io
