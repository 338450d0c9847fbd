#pragma once

// Experiment configuration: `key = value` lines grouped under `[section]`
// headers. '#' starts a comment. Every key has a default; unknown keys are
// rejected.

#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "drope/errors.hpp"
#include "drope/estimators.hpp"
#include "drope/io.hpp"

namespace drope {

struct ExperimentConfig {
  // [environment]
  std::string env = "gridworld";
  int size = 8;
  /// MDP file; overrides env/size when set
  std::string mdp_file;
  double gamma = 0.99;
  bool average = false;
  double tau = 1.0;
  double tau0 = 1.5;

  // [train]
  /// trajectories behind the rough inputs
  int rough_n = 20;
  int rough_T = 200;
  /// trajectories behind the good inputs; 0 means oracle-exact
  int good_n = 0;
  int good_T = 200;
  /// model_based or minimax (tabular families)
  std::string learner = "model_based";
  int minimax_steps = 2000;
  int minimax_batch = 0;
  double step_primal = 1e-2;
  double step_test = 1e-1;
  int inner_steps = 5;

  // [evaluate]
  std::vector<EstimatorId> estimators{EstimatorId::val, EstimatorId::sis, EstimatorId::dr};
  std::vector<int> ns{40, 160, 640};
  std::vector<int> horizons{200};
  std::vector<double> alphas{1.0};
  std::vector<double> betas{1.0};
  int runs = 200;
  std::string normalization = "self_normalized";
  int n0 = 0;
  long total_samples = 0;
  bool population = false;
  int threads = 0;
  /// directory holding trained inputs; empty trains them in-process
  std::string inputs;

  // [run]
  std::uint64_t seed = 20191003;
  std::string out = "out";

  void set(const std::string& section, const std::string& key, const std::string& value);
  void validate() const;
  void print(std::ostream& os) const;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T x{};
  const char* first = value.data();
  const char* last = value.data() + value.size();
  auto res = std::from_chars(first, last, x);
  if (res.ec != std::errc() || res.ptr != last) throw config_error("bad value for " + key + ": '" + value + "'");
  return x;
}

inline double parse_real(const std::string& key, const std::string& value) {
  if (value == "inf") return std::numeric_limits<double>::infinity();
  return parse_number<double>(key, value);
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw config_error("bad value for " + key + ": '" + value + "'");
}

template <class T, class Parse>
std::vector<T> parse_list(const std::string& key, const std::string& value, Parse parse) {
  std::vector<T> out;
  for (const auto& item : split_list(value)) out.push_back(parse(key, item));
  if (out.empty()) throw config_error(key + " must be a nonempty list");
  return out;
}

template <class T>
std::string join(const std::vector<T>& xs) {
  std::ostringstream out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out << ',';
    if constexpr (std::is_floating_point_v<T>) {
      out << format_real(xs[i]);
    } else {
      out << xs[i];
    }
  }
  return out.str();
}

}  // namespace detail

inline void ExperimentConfig::set(const std::string& section, const std::string& key, const std::string& value) {
  using namespace detail;
  const std::string full = section.empty() ? key : section + "." + key;
  auto integer = [&](const std::string& k, const std::string& v) { return parse_number<int>(k, v); };
  auto real = [&](const std::string& k, const std::string& v) { return parse_real(k, v); };
  if (section == "environment") {
    if (key == "env") env = value;
    else if (key == "size") size = parse_number<int>(full, value);
    else if (key == "mdp_file") mdp_file = value;
    else if (key == "gamma") gamma = parse_real(full, value);
    else if (key == "average") average = parse_bool(full, value);
    else if (key == "tau") tau = parse_real(full, value);
    else if (key == "tau0") tau0 = parse_real(full, value);
    else throw config_error("unknown key " + full);
  } else if (section == "train") {
    if (key == "rough_n") rough_n = parse_number<int>(full, value);
    else if (key == "rough_T") rough_T = parse_number<int>(full, value);
    else if (key == "good_n") good_n = parse_number<int>(full, value);
    else if (key == "good_T") good_T = parse_number<int>(full, value);
    else if (key == "learner") learner = value;
    else if (key == "minimax_steps") minimax_steps = parse_number<int>(full, value);
    else if (key == "minimax_batch") minimax_batch = parse_number<int>(full, value);
    else if (key == "step_primal") step_primal = parse_real(full, value);
    else if (key == "step_test") step_test = parse_real(full, value);
    else if (key == "inner_steps") inner_steps = parse_number<int>(full, value);
    else throw config_error("unknown key " + full);
  } else if (section == "evaluate") {
    if (key == "estimators") {
      estimators.clear();
      for (const auto& name : split_list(value)) {
        const auto id = parse_estimator(name);
        if (!id) throw config_error("unknown estimator '" + name + "'");
        estimators.push_back(*id);
      }
    } else if (key == "n") ns = parse_list<int>(full, value, integer);
    else if (key == "T") horizons = parse_list<int>(full, value, integer);
    else if (key == "alpha") alphas = parse_list<double>(full, value, real);
    else if (key == "beta") betas = parse_list<double>(full, value, real);
    else if (key == "K") runs = parse_number<int>(full, value);
    else if (key == "normalization") normalization = value;
    else if (key == "n0") n0 = parse_number<int>(full, value);
    else if (key == "total_samples") total_samples = parse_number<long>(full, value);
    else if (key == "population") population = parse_bool(full, value);
    else if (key == "threads") threads = parse_number<int>(full, value);
    else if (key == "inputs") inputs = value;
    else throw config_error("unknown key " + full);
  } else if (section == "run") {
    if (key == "seed") seed = parse_number<std::uint64_t>(full, value);
    else if (key == "out") out = value;
    else throw config_error("unknown key " + full);
  } else {
    throw config_error("unknown section [" + section + "]");
  }
}

inline void ExperimentConfig::validate() const {
  auto fail = [](const std::string& what) { throw config_error(what); };
  if (mdp_file.empty() && env != "gridworld" && env != "two_state" && env != "taxi_mini") {
    fail("unknown environment '" + env + "'");
  }
  if (!average && !(gamma > 0.0 && gamma < 1.0)) fail("gamma must lie in (0,1) unless average = true");
  if (!(tau > 0.0) || !(tau0 > 0.0)) fail("temperatures must be positive");
  if (rough_n < 1 || rough_T < 1 || good_n < 0 || good_T < 1) fail("training budgets must be positive");
  if (learner != "model_based" && learner != "minimax") fail("learner must be model_based or minimax");
  if (estimators.empty() || ns.empty() || horizons.empty() || alphas.empty() || betas.empty()) {
    fail("grid lists must be nonempty");
  }
  if (runs < 1) fail("K must be at least 1");
  if (normalization != "self_normalized" && normalization != "constant") {
    fail("normalization must be self_normalized or constant");
  }
}

inline void ExperimentConfig::print(std::ostream& os) const {
  using detail::format_real;
  using detail::join;
  std::vector<std::string> names;
  for (EstimatorId id : estimators) names.emplace_back(estimator_name(id));
  os << "[environment]\n"
      << "env = " << env << '\n'
      << "size = " << size << '\n'
      << "mdp_file = " << mdp_file << '\n'
      << "gamma = " << format_real(gamma) << '\n'
      << "average = " << (average ? "true" : "false") << '\n'
      << "tau = " << format_real(tau) << '\n'
      << "tau0 = " << format_real(tau0) << '\n'
      << "\n[train]\n"
      << "rough_n = " << rough_n << '\n'
      << "rough_T = " << rough_T << '\n'
      << "good_n = " << good_n << '\n'
      << "good_T = " << good_T << '\n'
      << "learner = " << learner << '\n'
      << "minimax_steps = " << minimax_steps << '\n'
      << "minimax_batch = " << minimax_batch << '\n'
      << "step_primal = " << format_real(step_primal) << '\n'
      << "step_test = " << format_real(step_test) << '\n'
      << "inner_steps = " << inner_steps << '\n'
      << "\n[evaluate]\n"
      << "estimators = " << join(names) << '\n'
      << "n = " << join(ns) << '\n'
      << "T = " << join(horizons) << '\n'
      << "alpha = " << join(alphas) << '\n'
      << "beta = " << join(betas) << '\n'
      << "K = " << runs << '\n'
      << "normalization = " << normalization << '\n'
      << "n0 = " << n0 << '\n'
      << "total_samples = " << total_samples << '\n'
      << "population = " << (population ? "true" : "false") << '\n'
      << "threads = " << threads << '\n'
      << "inputs = " << inputs << '\n'
      << "\n[run]\n"
      << "seed = " << seed << '\n'
      << "out = " << out << '\n';
}

inline ExperimentConfig parse_config(std::istream& in, ExperimentConfig cfg = {}) {
  std::string line;
  std::string section;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw config_error("line " + std::to_string(number) + ": malformed section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw config_error("line " + std::to_string(number) + ": expected key = value");
    cfg.set(section, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  return cfg;
}

}  // namespace drope
