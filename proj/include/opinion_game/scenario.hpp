#pragma once

// Scenario files, the built-in figure presets, and trajectory output formats.
//
// Scenario JSON:
//   {"n": int, "T": float, "x0": [float], "k": [float],
//    "edges": [{"from": int, "to": int, "w": float}], "name": string?}
// "from" = i, "to" = j stores w_ij, the pull of agent j on agent i. Indices
// are 1-based. Unknown keys are rejected.

#include <array>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "opinion_game/errors.hpp"
#include "opinion_game/nash_solver.hpp"
#include "opinion_game/network.hpp"

namespace opinion_game {

namespace detail {

inline const nlohmann::json& require_key(const nlohmann::json& obj, const char* key, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw InputError(where + ": missing key \"" + key + "\"");
  return *it;
}

inline void reject_unknown(const nlohmann::json& obj, std::initializer_list<std::string_view> allowed,
                           const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw InputError(where + ": unknown key \"" + key + "\"");
  }
}

inline double read_number(const nlohmann::json& v, const std::string& what) {
  if (!v.is_number()) throw InputError(what + " must be a number");
  return v.get<double>();
}

inline std::size_t read_index(const nlohmann::json& v, std::size_t n, const std::string& what) {
  if (!v.is_number_integer()) throw InputError(what + " must be an integer agent index");
  const auto idx = v.get<long long>();
  if (idx < 1 || static_cast<unsigned long long>(idx) > n)
    throw InputError(what + " = " + std::to_string(idx) + " is outside 1.." + std::to_string(n));
  return static_cast<std::size_t>(idx - 1);
}

inline Vector read_vector(const nlohmann::json& v, const std::string& what) {
  if (!v.is_array()) throw InputError(what + " must be an array of numbers");
  Vector out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(read_number(v[i], what + "[" + std::to_string(i) + "]"));
  return out;
}

}  // namespace detail

/// Parses and validates a scenario. Validation warnings are appended to
/// `warnings` when given; errors throw InputError.
inline InfluenceNetwork parse_scenario(const nlohmann::json& doc, std::vector<std::string>* warnings = nullptr) {
  const std::string where = "scenario";
  if (!doc.is_object()) throw InputError("scenario: top level must be a JSON object");
  detail::reject_unknown(doc, {"n", "T", "x0", "k", "edges", "name"}, where);

  InfluenceNetwork net;
  const auto& n_val = detail::require_key(doc, "n", where);
  if (!n_val.is_number_integer() || n_val.get<long long>() < 1) throw InputError("scenario: n must be an integer >= 1");
  net.n = static_cast<std::size_t>(n_val.get<long long>());
  net.horizon = detail::read_number(detail::require_key(doc, "T", where), "scenario: T");
  net.x0 = detail::read_vector(detail::require_key(doc, "x0", where), "scenario: x0");
  net.stubbornness = detail::read_vector(detail::require_key(doc, "k", where), "scenario: k");
  if (const auto it = doc.find("name"); it != doc.end()) {
    if (!it->is_string()) throw InputError("scenario: name must be a string");
    net.name = it->get<std::string>();
  }
  const auto& edges = detail::require_key(doc, "edges", where);
  if (!edges.is_array()) throw InputError("scenario: edges must be an array");
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const std::string ew = "scenario: edges[" + std::to_string(e) + "]";
    const auto& obj = edges[e];
    if (!obj.is_object()) throw InputError(ew + " must be an object");
    detail::reject_unknown(obj, {"from", "to", "w"}, ew);
    Edge edge;
    edge.from = detail::read_index(detail::require_key(obj, "from", ew), net.n, ew + ".from");
    edge.to = detail::read_index(detail::require_key(obj, "to", ew), net.n, ew + ".to");
    edge.weight = detail::read_number(detail::require_key(obj, "w", ew), ew + ".w");
    net.edges.push_back(edge);
  }

  const auto diags = validate(net);
  if (warnings != nullptr)
    for (const auto& d : diags)
      if (!d.is_error()) warnings->push_back(d.message);
  require_valid(net);
  return net;
}

inline InfluenceNetwork parse_scenario_text(const std::string& text, std::vector<std::string>* warnings = nullptr) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("scenario: malformed JSON: ") + e.what());
  }
  return parse_scenario(doc, warnings);
}

inline InfluenceNetwork load_scenario(const std::string& path, std::vector<std::string>* warnings = nullptr) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open scenario file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario_text(buf.str(), warnings);
}

inline nlohmann::json scenario_to_json(const InfluenceNetwork& net) {
  nlohmann::json doc;
  if (!net.name.empty()) doc["name"] = net.name;
  doc["n"] = net.n;
  doc["T"] = net.horizon;
  doc["x0"] = net.x0;
  doc["k"] = net.stubbornness;
  doc["edges"] = nlohmann::json::array();
  for (const Edge& e : net.edges) doc["edges"].push_back({{"from", e.from + 1}, {"to", e.to + 1}, {"w", e.weight}});
  return doc;
}

// ---------------------------------------------------------------------------
// Presets: n = 10, T = 5, initial opinions evenly spread over (0, 1).

inline Vector preset_opinions() {
  return {0.05, 0.15, 0.25, 0.35, 0.45, 0.55, 0.65, 0.75, 0.85, 0.95};
}

inline InfluenceNetwork complete_network(std::string name, std::size_t n, double w, double k, double horizon,
                                         Vector x0) {
  InfluenceNetwork net{std::move(name), n, {}, Vector(n, k), std::move(x0), horizon};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) net.edges.push_back({i, j, w});
  return net;
}

inline InfluenceNetwork leader_network(std::string name, Vector follower_weights, Vector k, double horizon,
                                       Vector x0) {
  const std::size_t n = k.size();
  InfluenceNetwork net{std::move(name), n, {}, std::move(k), std::move(x0), horizon};
  for (std::size_t i = 1; i < n; ++i) net.edges.push_back({i, 0, follower_weights.at(i)});
  return net;
}

/// Two camps: leaders are agents 1 and 10, followers-1 are agents 2-5 and
/// followers-10 are agents 6-9; complete influence inside each camp. A
/// follower's pull from the other leader defaults to 1/100 of its own
/// leader's.
struct TwoLeaderWeights {
  double leader1_on_followers1 = 10.0;
  double leader10_on_followers10 = 10.0;
  double within_group = 2.0;
  double followers1_on_followers10 = 0.2;
  double followers10_on_followers1 = 0.2;
  double leader1_on_followers10 = 0.1;
  double leader10_on_followers1 = 0.1;
};

inline InfluenceNetwork two_leader_network(std::string name, const TwoLeaderWeights& tw) {
  const std::size_t n = 10;
  InfluenceNetwork net{std::move(name), n, {}, Vector(n, 0.2), preset_opinions(), 5.0};
  const std::size_t leader1 = 0, leader10 = 9;
  auto in_group1 = [](std::size_t a) { return a >= 1 && a <= 4; };
  auto in_group10 = [](std::size_t a) { return a >= 5 && a <= 8; };
  for (std::size_t i = 1; i <= 8; ++i) {
    const bool g1 = in_group1(i);
    net.edges.push_back({i, g1 ? leader1 : leader10, g1 ? tw.leader1_on_followers1 : tw.leader10_on_followers10});
    net.edges.push_back({i, g1 ? leader10 : leader1, g1 ? tw.leader10_on_followers1 : tw.leader1_on_followers10});
    for (std::size_t j = 1; j <= 8; ++j) {
      if (j == i) continue;
      double w = tw.within_group;
      if (g1 && in_group10(j)) w = tw.followers10_on_followers1;
      if (!g1 && in_group1(j)) w = tw.followers1_on_followers10;
      net.edges.push_back({i, j, w});
    }
  }
  return net;
}

inline const std::vector<std::string>& figure_ids() {
  static const std::vector<std::string> ids = {"fig1b", "fig1c", "fig2b", "fig2c", "fig3b", "fig3c"};
  return ids;
}

/// Built-in scenario by name; also accepts fig1/fig1_weak/fig2/fig2_weak/fig3.
inline std::optional<InfluenceNetwork> preset(const std::string& raw) {
  static const std::map<std::string, std::string> aliases = {
      {"fig1", "fig1b"}, {"fig1_weak", "fig1c"}, {"fig2", "fig2b"}, {"fig2_weak", "fig2c"}, {"fig3", "fig3b"}};
  std::string name = raw;
  if (const auto it = aliases.find(raw); it != aliases.end()) name = it->second;
  const std::size_t n = 10;
  if (name == "fig1b") return complete_network(name, n, 2.0, 0.2, 5.0, preset_opinions());
  if (name == "fig1c") return complete_network(name, n, 0.4, 0.04, 5.0, preset_opinions());
  if (name == "fig2b" || name == "fig2c") {
    const double w = name == "fig2b" ? 2.0 : 0.4;
    const double k = name == "fig2b" ? 0.2 : 0.04;
    Vector fw(n, w);
    fw[0] = 0.0;
    return leader_network(name, fw, Vector(n, k), 5.0, preset_opinions());
  }
  if (name == "fig3b") return two_leader_network(name, TwoLeaderWeights{});
  if (name == "fig3c") {
    TwoLeaderWeights tw;
    tw.leader1_on_followers1 = 20.0;
    tw.followers1_on_followers10 = 10.0;
    return two_leader_network(name, tw);
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Output formats.

inline std::string format_number(double v) {
  std::array<char, 40> buf{};
  std::snprintf(buf.data(), buf.size(), "%.17g", v);
  return buf.data();
}

/// Header t,x1,...,xn (plus p1,...,pn with costates), one row per sample.
inline std::string trajectory_csv(const EquilibriumTrajectory& traj, bool with_costate = false) {
  std::string out = "t";
  const std::size_t n = traj.agents();
  for (std::size_t i = 0; i < n; ++i) out += ",x" + std::to_string(i + 1);
  if (with_costate)
    for (std::size_t i = 0; i < n; ++i) out += ",p" + std::to_string(i + 1);
  out += '\n';
  for (std::size_t g = 0; g < traj.samples(); ++g) {
    out += format_number(traj.grid[g]);
    for (std::size_t i = 0; i < n; ++i) out += "," + format_number(traj.x(g, i));
    if (with_costate)
      for (std::size_t i = 0; i < n; ++i) out += "," + format_number(traj.p(g, i));
    out += '\n';
  }
  return out;
}

/// gnuplot script plotting every opinion column of `csv_name` against time.
inline std::string gnuplot_script(const std::string& title, const std::string& csv_name, std::size_t agents) {
  std::ostringstream s;
  s << "# opinion trajectories: " << title << "\n"
    << "set datafile separator ','\n"
    << "set key outside right\n"
    << "set xlabel 't'\n"
    << "set ylabel 'opinion'\n"
    << "set yrange [0:1]\n"
    << "set title '" << title << "'\n"
    << "set terminal pngcairo size 800,500\n"
    << "set output '" << title << ".png'\n"
    << "plot ";
  for (std::size_t i = 0; i < agents; ++i) {
    if (i > 0) s << ", \\\n     ";
    s << "'" << csv_name << "' using 1:" << i + 2 << " with lines title 'x" << i + 1 << "'";
  }
  s << "\n";
  return s.str();
}

}  // namespace opinion_game
