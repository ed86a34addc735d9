#pragma once

// Plain-text MDP format:
//
//   # comment
//   mdp <n_states> <n_actions> <gamma>
//   terminal <count> <s_1> ... <s_count>
//   <one line per (s, a), in order s * n_actions + a: P(0|s,a) ... P(S-1|s,a) R(s,a)>
//
// Blank lines and lines starting with '#' are ignored.

#include "msrl/format.hpp"
#include "msrl/mdp.hpp"

#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace msrl {

template <typename Scalar>
void write_mdp_text(std::ostream &out, const TabularMDP<Scalar> &mdp) {
  const Index S = mdp.n_states();
  const Index A = mdp.n_actions();
  out << "mdp " << S << ' ' << A << ' ' << format_number(mdp.gamma()) << '\n';
  out << "terminal " << mdp.terminal_states().size();
  for (Index s : mdp.terminal_states()) out << ' ' << s;
  out << '\n';
  const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> dense =
      mdp.transitions().toDense();
  for (Index s = 0; s < S; ++s) {
    for (Index a = 0; a < A; ++a) {
      for (Index t = 0; t < S; ++t) out << format_number(dense(mdp.row(s, a), t)) << ' ';
      out << format_number(mdp.rewards()(s, a)) << '\n';
    }
  }
}

template <typename Scalar = double>
TabularMDP<Scalar> read_mdp_text(std::istream &in) {
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    lines.push_back(line);
  }
  auto tokens = [](const std::string &line) {
    std::istringstream ss(line);
    std::vector<std::string> out;
    for (std::string tok; ss >> tok;) out.push_back(tok);
    return out;
  };
  if (lines.size() < 2) throw std::invalid_argument("read_mdp_text: missing header");

  const auto header = tokens(lines[0]);
  if (header.size() != 4 || header[0] != "mdp")
    throw std::invalid_argument("read_mdp_text: expected 'mdp <states> <actions> <gamma>'");
  const auto S = parse_number<Index>(header[1]);
  const auto A = parse_number<Index>(header[2]);
  const auto gamma = parse_number<Scalar>(header[3]);
  if (S <= 0 || A <= 0) throw std::invalid_argument("read_mdp_text: empty state or action space");

  const auto term = tokens(lines[1]);
  if (term.size() < 2 || term[0] != "terminal")
    throw std::invalid_argument("read_mdp_text: expected 'terminal <count> ...'");
  const auto count = parse_number<std::size_t>(term[1]);
  if (term.size() != count + 2) throw std::invalid_argument("read_mdp_text: terminal count mismatch");
  std::vector<Index> terminal;
  for (std::size_t i = 0; i < count; ++i) terminal.push_back(parse_number<Index>(term[i + 2]));

  if (lines.size() != static_cast<std::size_t>(2 + S * A))
    throw std::invalid_argument("read_mdp_text: expected one line per (state, action)");

  std::vector<Eigen::Triplet<Scalar>> entries;
  RewardTable<Scalar> rewards(S, A);
  for (Index row = 0; row < S * A; ++row) {
    const auto toks = tokens(lines[static_cast<std::size_t>(2 + row)]);
    if (toks.size() != static_cast<std::size_t>(S + 1))
      throw std::invalid_argument("read_mdp_text: line " + std::to_string(row + 3) +
                                  " must hold S probabilities and a reward");
    for (Index t = 0; t < S; ++t) {
      const auto p = parse_number<Scalar>(toks[static_cast<std::size_t>(t)]);
      if (p != Scalar(0)) entries.emplace_back(row, t, p);
    }
    rewards(row / A, row % A) = parse_number<Scalar>(toks.back());
  }
  TransitionMatrix<Scalar> P(S * A, S);
  P.setFromTriplets(entries.begin(), entries.end());
  return TabularMDP<Scalar>(std::move(P), std::move(rewards), gamma, std::move(terminal));
}

}  // namespace msrl
