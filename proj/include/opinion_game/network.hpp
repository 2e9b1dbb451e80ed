#pragma once

// Game instances and the coupling matrices assembled from them.

#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "opinion_game/dense_matrix.hpp"
#include "opinion_game/errors.hpp"

namespace opinion_game {

/// Directed influence edge; `weight` is how strongly agent `to` pulls on agent
/// `from`. Indices are 0-based here; files and reports use 1-based indices.
struct Edge {
  std::size_t from = 0;
  std::size_t to = 0;
  double weight = 0.0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

struct InfluenceNetwork {
  std::string name;
  std::size_t n = 0;
  std::vector<Edge> edges;
  Vector stubbornness;  ///< k_i
  Vector x0;            ///< initial opinions
  double horizon = 0.0;

  friend bool operator==(const InfluenceNetwork&, const InfluenceNetwork&) = default;
};

struct Diagnostic {
  enum class Severity { warning, error };
  Severity severity = Severity::error;
  std::string message;

  bool is_error() const { return severity == Severity::error; }
};

/// Every invariant violation of `net`. Opinions outside [0, 1] are warnings;
/// the dynamics never clip, so the solver accepts them.
inline std::vector<Diagnostic> validate(const InfluenceNetwork& net) {
  std::vector<Diagnostic> out;
  auto error = [&](std::string msg) { out.push_back({Diagnostic::Severity::error, std::move(msg)}); };
  auto warn = [&](std::string msg) { out.push_back({Diagnostic::Severity::warning, std::move(msg)}); };

  if (net.n < 1) error("agent count must be at least 1");
  if (!(net.horizon > 0.0) || !std::isfinite(net.horizon)) error("horizon T must be positive and finite");
  if (net.stubbornness.size() != net.n)
    error("stubbornness vector has " + std::to_string(net.stubbornness.size()) + " entries, expected " +
          std::to_string(net.n));
  if (net.x0.size() != net.n)
    error("initial opinion vector has " + std::to_string(net.x0.size()) + " entries, expected " +
          std::to_string(net.n));

  for (std::size_t i = 0; i < net.stubbornness.size(); ++i) {
    const double k = net.stubbornness[i];
    if (!std::isfinite(k) || k < 0.0)
      error("agent " + std::to_string(i + 1) + ": stubbornness must be finite and nonnegative");
  }
  for (std::size_t i = 0; i < net.x0.size(); ++i) {
    const double x = net.x0[i];
    if (!std::isfinite(x)) {
      error("agent " + std::to_string(i + 1) + ": initial opinion is not finite");
    } else if (x < 0.0 || x > 1.0) {
      std::ostringstream msg;
      msg << "agent " << i + 1 << ": initial opinion " << x << " lies outside [0, 1]";
      warn(msg.str());
    }
  }

  std::vector<char> seen(net.n * net.n, 0);
  for (const Edge& e : net.edges) {
    const std::string tag = "edge (" + std::to_string(e.from + 1) + ", " + std::to_string(e.to + 1) + ")";
    if (e.from >= net.n || e.to >= net.n) {
      error(tag + ": agent index out of range 1.." + std::to_string(net.n));
      continue;
    }
    if (e.from == e.to) error(tag + ": self-edge");
    if (!std::isfinite(e.weight) || e.weight < 0.0) error(tag + ": weight must be finite and nonnegative");
    char& flag = seen[e.from * net.n + e.to];
    if (flag) error(tag + ": duplicate edge");
    flag = 1;
  }
  return out;
}

inline bool has_errors(const std::vector<Diagnostic>& diags) {
  for (const auto& d : diags)
    if (d.is_error()) return true;
  return false;
}

/// Throws InputError listing every error-level diagnostic.
inline void require_valid(const InfluenceNetwork& net) {
  const auto diags = validate(net);
  if (!has_errors(diags)) return;
  std::string msg = "invalid network";
  if (!net.name.empty()) msg += " '" + net.name + "'";
  for (const auto& d : diags)
    if (d.is_error()) msg += "; " + d.message;
  throw InputError(msg);
}

/// Dense influence weights, entry (i, j) = w_ij.
inline Matrix weight_matrix(const InfluenceNetwork& net) {
  Matrix w(net.n, net.n);
  for (const Edge& e : net.edges) w(e.from, e.to) = e.weight;
  return w;
}

struct GameMatrices {
  Matrix W;        ///< q_i on the diagonal, -w_ij off it
  Vector K;        ///< stubbornness, the diagonal of K
  Vector q;        ///< diagonal of W
  Matrix weights;  ///< raw w_ij

  std::size_t n() const { return K.size(); }
};

inline GameMatrices build_matrices(const InfluenceNetwork& net) {
  require_valid(net);
  GameMatrices gm;
  gm.weights = weight_matrix(net);
  gm.K = net.stubbornness;
  gm.q = net.stubbornness;
  gm.W = Matrix(net.n, net.n);
  for (std::size_t i = 0; i < net.n; ++i) {
    for (std::size_t j = 0; j < net.n; ++j) {
      if (i == j) continue;
      gm.q[i] += gm.weights(i, j);
      gm.W(i, j) = -gm.weights(i, j);
    }
    gm.W(i, i) = gm.q[i];
  }
  return gm;
}

// Topologies with closed-form equilibria.
struct CompleteUniform {
  double w = 0.0;
  double k = 0.0;
};
struct SingleLeader {};
struct GeneralTopology {};

using Topology = std::variant<CompleteUniform, SingleLeader, GeneralTopology>;

/// CompleteUniform: every ordered pair is an edge with one common weight and
/// all stubbornness values agree. SingleLeader: agent 1 is influenced by
/// nobody and every other agent is influenced by agent 1 alone. A zero weight
/// counts as a missing edge.
inline Topology classify_topology(const InfluenceNetwork& net) {
  require_valid(net);
  const std::size_t n = net.n;
  const Matrix w = weight_matrix(net);
  if (n < 2) return GeneralTopology{};

  bool complete = true;
  const double w_common = w(0, 1);
  for (std::size_t i = 0; i < n && complete; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && (w(i, j) <= 0.0 || w(i, j) != w_common)) {
        complete = false;
        break;
      }
  if (complete) {
    bool uniform_k = true;
    for (double k : net.stubbornness) uniform_k = uniform_k && k == net.stubbornness[0];
    if (uniform_k) return CompleteUniform{w_common, net.stubbornness[0]};
  }

  bool leader = true;
  for (std::size_t j = 1; j < n && leader; ++j) leader = w(0, j) == 0.0;
  for (std::size_t i = 1; i < n && leader; ++i) {
    if (w(i, 0) <= 0.0) leader = false;
    for (std::size_t j = 1; j < n && leader; ++j)
      if (j != i && w(i, j) != 0.0) leader = false;
  }
  if (leader) return SingleLeader{};
  return GeneralTopology{};
}

inline std::string topology_name(const Topology& t) {
  if (std::holds_alternative<CompleteUniform>(t)) return "complete-uniform";
  if (std::holds_alternative<SingleLeader>(t)) return "single-leader";
  return "general";
}

}  // namespace opinion_game
