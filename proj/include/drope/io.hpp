#pragma once

// Line-oriented text formats for models, datasets and learned functions.
// Reals are written in shortest round-trip form, so load(save(x)) is
// bit-identical to x and save(load(text)) reproduces canonical text.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "drope/errors.hpp"
#include "drope/mdp.hpp"
#include "drope/simulate.hpp"

namespace drope {

namespace detail {

inline std::string format_real(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

class LineReader {
 public:
  explicit LineReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  /// Next non-empty, non-comment line split on whitespace; false at EOF.
  bool next(std::vector<std::string_view>& fields) {
    while (std::getline(in_, line_)) {
      ++number_;
      fields.clear();
      std::string_view rest(line_);
      while (!rest.empty()) {
        const auto start = rest.find_first_not_of(" \t\r");
        if (start == std::string_view::npos) break;
        rest.remove_prefix(start);
        const auto end = rest.find_first_of(" \t\r");
        fields.push_back(rest.substr(0, end));
        rest.remove_prefix(end == std::string_view::npos ? rest.size() : end);
      }
      if (fields.empty() || fields.front().starts_with('#')) continue;
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw format_error(source_ + ":" + std::to_string(number_) + ": " + what);
  }

  double real(std::string_view f) const {
    double x = 0.0;
    auto res = std::from_chars(f.data(), f.data() + f.size(), x);
    if (res.ec != std::errc() || res.ptr != f.data() + f.size()) fail("bad number '" + std::string(f) + "'");
    return x;
  }

  template <class Int>
  Int integer(std::string_view f) const {
    Int x{};
    auto res = std::from_chars(f.data(), f.data() + f.size(), x);
    if (res.ec != std::errc() || res.ptr != f.data() + f.size()) fail("bad integer '" + std::string(f) + "'");
    return x;
  }

  int index(std::string_view f, int bound, const char* what) const {
    const int i = integer<int>(f);
    if (i < 0 || i >= bound) fail(std::string(what) + " index " + std::to_string(i) + " out of range");
    return i;
  }

 private:
  std::istream& in_;
  std::string source_;
  std::string line_;
  int number_ = 0;
};

inline bool stored(double x) { return x != 0.0 || std::signbit(x); }

}  // namespace detail

// ---------------------------------------------------------------------------
// MDP files: "S A gamma", then "T s a s' p", "R s a r", "MU0 s p" lines.
// ---------------------------------------------------------------------------

struct MdpFile {
  TabularMDP mdp;
  /// 1 denotes the average-reward setting.
  double gamma = 0.99;
};

inline void save_mdp(std::ostream& out, const TabularMDP& mdp, double gamma) {
  using detail::format_real;
  out << mdp.num_states << ' ' << mdp.num_actions << ' ' << format_real(gamma) << '\n';
  for (int s = 0; s < mdp.num_states; ++s) {
    for (int a = 0; a < mdp.num_actions; ++a) {
      for (int s2 = 0; s2 < mdp.num_states; ++s2) {
        const double p = mdp.prob(s, a, s2);
        if (detail::stored(p)) out << "T " << s << ' ' << a << ' ' << s2 << ' ' << format_real(p) << '\n';
      }
    }
  }
  for (int s = 0; s < mdp.num_states; ++s) {
    for (int a = 0; a < mdp.num_actions; ++a) {
      const double r = mdp.reward(s, a);
      if (detail::stored(r)) out << "R " << s << ' ' << a << ' ' << format_real(r) << '\n';
    }
  }
  for (int s = 0; s < mdp.num_states; ++s) {
    const double p = mdp.initial_dist[s];
    if (detail::stored(p)) out << "MU0 " << s << ' ' << format_real(p) << '\n';
  }
}

inline MdpFile load_mdp(std::istream& in, const std::string& source = "<mdp>") {
  detail::LineReader reader(in, source);
  std::vector<std::string_view> f;
  if (!reader.next(f) || f.size() != 3) reader.fail("expected header 'S A gamma'");
  const int S = reader.integer<int>(f[0]);
  const int A = reader.integer<int>(f[1]);
  if (S <= 0 || A <= 0) reader.fail("state and action counts must be positive");
  MdpFile file{TabularMDP::zeros(S, A), reader.real(f[2])};
  while (reader.next(f)) {
    if (f[0] == "T") {
      if (f.size() != 5) reader.fail("expected 'T s a s' p'");
      file.mdp.prob(reader.index(f[1], S, "state"), reader.index(f[2], A, "action"),
                    reader.index(f[3], S, "state")) = reader.real(f[4]);
    } else if (f[0] == "R") {
      if (f.size() != 4) reader.fail("expected 'R s a r'");
      file.mdp.reward(reader.index(f[1], S, "state"), reader.index(f[2], A, "action")) =
          reader.real(f[3]);
    } else if (f[0] == "MU0") {
      if (f.size() != 3) reader.fail("expected 'MU0 s p'");
      file.mdp.initial_dist[reader.index(f[1], S, "state")] = reader.real(f[2]);
    } else {
      reader.fail("unknown record '" + std::string(f[0]) + "'");
    }
  }
  return file;
}

// ---------------------------------------------------------------------------
// Datasets: header "n T seed", then "i t s a r s'" per transition.
// ---------------------------------------------------------------------------

inline void save_batch(std::ostream& out, const TrajectoryBatch& batch) {
  out << batch.size() << ' ' << batch.horizon() << ' ' << batch.seed << '\n';
  for (int i = 0; i < batch.size(); ++i) {
    for (const Transition& tr : batch.trajectories[i]) {
      out << i << ' ' << tr.time << ' ' << tr.state << ' ' << tr.action << ' '
          << detail::format_real(tr.reward) << ' ' << tr.next_state << '\n';
    }
  }
}

inline TrajectoryBatch load_batch(std::istream& in, const std::string& source = "<dataset>") {
  detail::LineReader reader(in, source);
  std::vector<std::string_view> f;
  if (!reader.next(f) || f.size() != 3) reader.fail("expected header 'n T seed'");
  const int n = reader.integer<int>(f[0]);
  const int T = reader.integer<int>(f[1]);
  if (n <= 0 || T <= 0) reader.fail("n and T must be positive");
  TrajectoryBatch batch;
  batch.seed = reader.integer<std::uint64_t>(f[2]);
  batch.trajectories.assign(n, std::vector<Transition>(T));
  std::vector<char> seen(static_cast<std::size_t>(n) * T, 0);
  while (reader.next(f)) {
    if (f.size() != 6) reader.fail("expected 'i t s a r s''");
    const int i = reader.index(f[0], n, "trajectory");
    const int t = reader.index(f[1], T, "time");
    auto& slot = seen[static_cast<std::size_t>(i) * T + t];
    if (slot) reader.fail("duplicate transition");
    slot = 1;
    Transition& tr = batch.trajectories[i][t];
    tr.time = t;
    tr.state = reader.integer<int>(f[2]);
    tr.action = reader.integer<int>(f[3]);
    tr.reward = reader.real(f[4]);
    tr.next_state = reader.integer<int>(f[5]);
    if (tr.state < 0 || tr.action < 0 || tr.next_state < 0) reader.fail("negative index");
  }
  for (char c : seen) {
    if (!c) throw format_error(source + ": dataset is missing transitions");
  }
  return batch;
}

// ---------------------------------------------------------------------------
// StateFunction files: header "<role> S", then "s value" for every state.
// ---------------------------------------------------------------------------

inline void save_state_function(std::ostream& out, const StateFunction& f) {
  out << role_name(f.role) << ' ' << f.size() << '\n';
  for (int s = 0; s < f.size(); ++s) out << s << ' ' << detail::format_real(f[s]) << '\n';
}

inline StateFunction load_state_function(std::istream& in, const std::string& source = "<function>") {
  detail::LineReader reader(in, source);
  std::vector<std::string_view> f;
  if (!reader.next(f) || f.size() != 2) reader.fail("expected header '<role> S'");
  const auto role = parse_role(f[0]);
  if (!role) reader.fail("unknown role '" + std::string(f[0]) + "'");
  const int S = reader.integer<int>(f[1]);
  if (S <= 0) reader.fail("state count must be positive");
  StateFunction out(Vector::Zero(S), *role);
  std::vector<char> seen(S, 0);
  while (reader.next(f)) {
    if (f.size() != 2) reader.fail("expected 's value'");
    const int s = reader.index(f[0], S, "state");
    out[s] = reader.real(f[1]);
    seen[s] = 1;
  }
  for (char c : seen) {
    if (!c) throw format_error(source + ": state function is not total");
  }
  return out;
}

// File-path conveniences.

template <class Saver, class Value>
void save_file(const std::string& path, Saver saver, const Value& value) {
  std::ofstream out(path);
  if (!out) throw format_error("cannot write " + path);
  saver(out, value);
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw format_error("cannot read " + path);
  return in;
}

inline std::string to_text(const StateFunction& f) {
  std::ostringstream out;
  save_state_function(out, f);
  return out.str();
}

}  // namespace drope
