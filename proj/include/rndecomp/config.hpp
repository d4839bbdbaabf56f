#pragma once

// Line-oriented `key = value` experiment description. '#' starts a comment.

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "rndecomp/train.hpp"

namespace rndecomp {

struct ExperimentConfig {
  OperatorKind op = OperatorKind::inpainting;
  double mask_keep = 0.5;      // inpainting: fraction of pixels observed
  std::size_t factor = 2;      // block_downsample
  double freq_keep = 0.5;      // subsampled_dft: fraction of admissible frequencies
  std::size_t gauss_d = 0;     // gaussian: measurement count (0: D / 2)
  std::string image = "piecewise";
  std::size_t rows = 32;
  std::size_t cols = 32;
  std::vector<std::size_t> n_train{64};
  std::size_t n_test = 32;
  double sigma = 0.01;
  double lambda1 = 1.0;
  double lambda2 = 1e-4;
  std::size_t epochs = 500;
  std::size_t batch = 8;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  TrainingMode mode = TrainingMode::joint;
  std::vector<Mechanism> mechanisms{Mechanism::ddn_cascade};
  std::string out_dir = "out";

  /// Canonical `key = value` lines, in key order of the file format.
  std::vector<std::pair<std::string, std::string>> entries() const;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double parse_real(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &used);
  } catch (const std::logic_error&) {
    used = 0;
  }
  if (used != v.size() || !std::isfinite(d)) {
    throw Error("config: key '" + key + "' expects a number, got '" + v + "'");
  }
  return d;
}

inline std::size_t parse_count(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
    throw Error("config: key '" + key + "' expects a non-negative integer, got '" + v + "'");
  }
  return std::stoull(v);
}

inline std::string fmt_real(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace detail

inline OperatorKind parse_operator_kind(const std::string& s) {
  for (OperatorKind k : {OperatorKind::inpainting, OperatorKind::block_downsample,
                         OperatorKind::subsampled_dft, OperatorKind::gaussian}) {
    if (s == operator_kind_name(k)) return k;
  }
  throw Error("config: unknown operator '" + s + "'");
}

inline ExperimentConfig parse_config(std::istream& in) {
  using namespace detail;
  ExperimentConfig c;
  std::map<std::string, std::string> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!seen.emplace(key, value).second) {
      throw Error("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    if (key == "operator") {
      c.op = parse_operator_kind(value);
    } else if (key == "mask_keep") {
      c.mask_keep = parse_real(key, value);
    } else if (key == "factor") {
      c.factor = parse_count(key, value);
    } else if (key == "freq_keep") {
      c.freq_keep = parse_real(key, value);
    } else if (key == "gauss_d") {
      c.gauss_d = parse_count(key, value);
    } else if (key == "image") {
      c.image = value;
    } else if (key == "size") {
      const auto x = value.find('x');
      c.rows = parse_count(key, x == std::string::npos ? value : value.substr(0, x));
      c.cols = x == std::string::npos ? c.rows : parse_count(key, value.substr(x + 1));
    } else if (key == "n_train") {
      c.n_train.clear();
      for (const auto& s : split_list(value)) c.n_train.push_back(parse_count(key, s));
    } else if (key == "n_test") {
      c.n_test = parse_count(key, value);
    } else if (key == "sigma") {
      c.sigma = parse_real(key, value);
    } else if (key == "lambda1") {
      c.lambda1 = parse_real(key, value);
    } else if (key == "lambda2") {
      c.lambda2 = parse_real(key, value);
    } else if (key == "epochs") {
      c.epochs = parse_count(key, value);
    } else if (key == "batch") {
      c.batch = parse_count(key, value);
    } else if (key == "lr") {
      c.lr = parse_real(key, value);
    } else if (key == "seed") {
      c.seed = parse_count(key, value);
    } else if (key == "mode") {
      if (value == "joint") {
        c.mode = TrainingMode::joint;
      } else if (value == "decoupled") {
        c.mode = TrainingMode::decoupled;
      } else {
        throw Error("config: mode must be 'joint' or 'decoupled', got '" + value + "'");
      }
    } else if (key == "mechanism") {
      c.mechanisms.clear();
      for (const auto& s : split_list(value)) c.mechanisms.push_back(parse_mechanism(s));
    } else if (key == "out_dir") {
      c.out_dir = value;
    } else {
      throw Error("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }

  if (c.rows < 8 || c.cols < 8) throw Error("config: size must be at least 8x8");
  if (c.n_train.empty()) throw Error("config: n_train is empty");
  for (std::size_t n : c.n_train) {
    if (n == 0) throw Error("config: n_train values must be positive");
  }
  if (c.mechanisms.empty()) throw Error("config: mechanism is empty");
  if (c.batch == 0) throw Error("config: batch must be positive");
  if (c.sigma < 0.0) throw Error("config: sigma must be >= 0");
  if (c.lambda1 < 0.0 || c.lambda2 < 0.0) throw Error("config: lambda1/lambda2 must be >= 0");
  if (!(c.lr > 0.0)) throw Error("config: lr must be positive");
  if (!(c.mask_keep > 0.0 && c.mask_keep <= 1.0)) throw Error("config: mask_keep must be in (0, 1]");
  if (!(c.freq_keep > 0.0 && c.freq_keep <= 1.0)) throw Error("config: freq_keep must be in (0, 1]");
  if (c.out_dir.empty()) throw Error("config: out_dir is empty");
  return c;
}

inline ExperimentConfig parse_config_string(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("config: cannot open " + path);
  return parse_config(in);
}

inline std::vector<std::pair<std::string, std::string>> ExperimentConfig::entries() const {
  using detail::fmt_real;
  auto join = [](const auto& v, auto&& fmt) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
    return s;
  };
  return {
      {"operator", operator_kind_name(op)},
      {"mask_keep", fmt_real(mask_keep)},
      {"factor", std::to_string(factor)},
      {"freq_keep", fmt_real(freq_keep)},
      {"gauss_d", std::to_string(gauss_d)},
      {"image", image},
      {"size", std::to_string(rows) + "x" + std::to_string(cols)},
      {"n_train", join(n_train, [](std::size_t n) { return std::to_string(n); })},
      {"n_test", std::to_string(n_test)},
      {"sigma", fmt_real(sigma)},
      {"lambda1", fmt_real(lambda1)},
      {"lambda2", fmt_real(lambda2)},
      {"epochs", std::to_string(epochs)},
      {"batch", std::to_string(batch)},
      {"lr", fmt_real(lr)},
      {"seed", std::to_string(seed)},
      {"mode", mode == TrainingMode::joint ? "joint" : "decoupled"},
      {"mechanism", join(mechanisms, [](Mechanism m) { return std::string(mechanism_name(m)); })},
      {"out_dir", out_dir},
  };
}

}  // namespace rndecomp
