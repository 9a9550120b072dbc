#pragma once

// JSON run configuration: measure schema, simulation settings, grids and
// check switches. Uses nlohmann/json.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "lcpkit/measure.hpp"
#include "lcpkit/sampler.hpp"
#include "lcpkit/tvkit.hpp"

namespace lcpkit {

using json = nlohmann::json;

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what, int line = 0, int column = 0)
      : std::runtime_error(what), line_(line), column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

namespace config_detail {

[[noreturn]] inline void fail(const std::string& where, const std::string& what) {
  throw ConfigError(where + ": " + what);
}

inline void only_keys(const json& j, const std::string& where,
                      std::initializer_list<const char*> allowed) {
  if (!j.is_object()) {
    fail(where, "expected an object");
  }
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : allowed) {
      ok = ok || item.key() == k;
    }
    if (!ok) {
      fail(where, "unknown key \"" + item.key() + "\"");
    }
  }
}

inline double number(const json& j, const std::string& where, const char* key) {
  if (!j.contains(key)) {
    fail(where, std::string("missing required field \"") + key + "\"");
  }
  const json& v = j.at(key);
  if (!v.is_number()) {
    fail(where, std::string("field \"") + key + "\" must be a number");
  }
  return v.get<double>();
}

inline double number_or(const json& j, const std::string& where, const char* key, double dflt) {
  return j.contains(key) ? number(j, where, key) : dflt;
}

inline std::vector<double> numbers(const json& v, const std::string& where) {
  if (!v.is_array()) {
    fail(where, "expected an array of numbers");
  }
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) {
      fail(where, "expected an array of numbers");
    }
    out.push_back(e.get<double>());
  }
  return out;
}

inline std::vector<Atom> atom_list(const json& v, const std::string& where) {
  if (!v.is_array()) {
    fail(where, "expected an array of [location, mass] pairs");
  }
  std::vector<Atom> out;
  for (const auto& e : v) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number()) {
      fail(where, "expected an array of [location, mass] pairs");
    }
    out.push_back({e[0].get<double>(), e[1].get<double>()});
  }
  return out;
}

inline SideGrid side_grid(const json& j, const std::string& where) {
  only_keys(j, where, {"edges", "values", "tail"});
  if (!j.contains("edges") || !j.contains("values")) {
    fail(where, "tabulated side needs \"edges\" and \"values\"");
  }
  auto edges = numbers(j.at("edges"), where + ".edges");
  auto values = numbers(j.at("values"), where + ".values");
  if (edges.size() != values.size() + 1) {
    fail(where, "need exactly one more edge than values");
  }
  const bool fit = !j.contains("tail") || j.at("tail") == "fit";
  if (!fit && j.at("tail") != "none") {
    fail(where, "\"tail\" must be \"fit\" or \"none\"");
  }
  if (fit) {
    return SideGrid::fitted(std::move(edges), std::move(values));
  }
  SideGrid g;
  g.edges = std::move(edges);
  g.values = std::move(values);
  return g;
}

}  // namespace config_detail

inline Component parse_component(const json& j, const std::string& where) {
  using namespace config_detail;
  if (!j.is_object() || !j.contains("type") || !j.at("type").is_string()) {
    fail(where, "component needs a string \"type\"");
  }
  const std::string type = j.at("type").get<std::string>();
  if (type == "power_law") {
    only_keys(j, where, {"type", "alpha", "c_plus", "c_minus"});
    return PowerLaw{number(j, where, "alpha"), number_or(j, where, "c_plus", 0.0),
                    number_or(j, where, "c_minus", 0.0)};
  }
  if (type == "atoms" || type == "big_jumps") {
    only_keys(j, where, {"type", "atoms"});
    if (!j.contains("atoms")) {
      fail(where, "missing required field \"atoms\"");
    }
    auto list = atom_list(j.at("atoms"), where + ".atoms");
    if (type == "atoms") {
      return Atoms{std::move(list)};
    }
    return BigJumps{std::move(list)};
  }
  if (type == "tabulated") {
    only_keys(j, where, {"type", "plus", "minus"});
    Tabulated t;
    if (j.contains("plus")) {
      t.plus = side_grid(j.at("plus"), where + ".plus");
    }
    if (j.contains("minus")) {
      t.minus = side_grid(j.at("minus"), where + ".minus");
    }
    return t;
  }
  fail(where, "unknown component type \"" + type + "\"");
}

// {"components": [...]}
inline LevyMeasure parse_measure(const json& j) {
  using namespace config_detail;
  only_keys(j, "measure", {"components"});
  if (!j.contains("components") || !j.at("components").is_array()) {
    fail("measure", "missing \"components\" array");
  }
  std::vector<Component> comps;
  std::size_t i = 0;
  for (const auto& c : j.at("components")) {
    comps.push_back(parse_component(c, "measure.components[" + std::to_string(i++) + "]"));
  }
  try {
    return LevyMeasure(std::move(comps));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("measure: ") + e.what());
  }
}

inline DiscreteDist parse_discrete(const json& j, const std::string& where) {
  using namespace config_detail;
  only_keys(j, where, {"support", "probs"});
  if (!j.contains("support") || !j.contains("probs")) {
    fail(where, "needs \"support\" and \"probs\"");
  }
  try {
    return DiscreteDist(numbers(j.at("support"), where + ".support"),
                        numbers(j.at("probs"), where + ".probs"));
  } catch (const std::invalid_argument& e) {
    fail(where, e.what());
  }
}

// Densities available to the tv command.
inline DensityFn parse_density(const json& j, const std::string& where) {
  using namespace config_detail;
  only_keys(j, where, {"kind", "lo", "hi"});
  const std::string kind = j.value("kind", "");
  const double lo = number_or(j, where, "lo", 0.0);
  const double hi = number_or(j, where, "hi", 1.0);
  if (!(hi > lo)) {
    fail(where, "need lo < hi");
  }
  if (kind == "uniform") {
    return DensityFn::uniform(lo, hi);
  }
  if (kind == "triangle") {
    const double mid = 0.5 * (lo + hi);
    const double half = 0.5 * (hi - lo);
    return {[mid, half](double x) { return (half - std::abs(x - mid)) / (half * half); }, lo, hi,
            {mid}};
  }
  fail(where, "\"kind\" must be \"uniform\" or \"triangle\"");
}

struct TvProfileSpec {
  std::string name;
  TranslationTarget target;
};

struct TvConfig {
  std::vector<TvProfileSpec> profiles;
  std::vector<double> a_grid;
  std::optional<std::vector<double>> contraction_p;
  std::optional<std::vector<double>> contraction_q;
  Matrix contraction_matrix;
  std::size_t contraction_steps = 0;
  std::optional<DiscreteDist> coupling_p;
  std::optional<DiscreteDist> coupling_q;
  std::size_t coupling_draws = 0;
};

struct CheckSwitches {
  bool law = true;
  bool tau_bar_decay = true;
  bool tau_bar_bound = true;
  bool tail_bound = true;
  bool lcp = true;
  bool tv = true;
};

struct RunConfig {
  json raw;  // effective configuration after command-line overrides
  std::optional<LevyMeasure> measure;
  SimConfig sim;
  std::vector<double> a_grid;
  std::vector<double> eps_grid;
  std::vector<double> xi_grid{0.5, 1.0, 2.0};
  std::size_t n_paths = 1000;
  CheckSwitches checks;
  std::optional<TvConfig> tv;

  const LevyMeasure& require_measure() const {
    if (!measure) {
      throw ConfigError("config: this command needs a \"measure\"");
    }
    return *measure;
  }
};

// 64-bit FNV-1a over the canonical (key-sorted, compact) JSON with the
// worker count removed, so runs differing only in parallelism share a hash.
inline std::string config_hash(const json& raw) {
  json j = raw;
  if (j.is_object()) {
    j.erase("workers");
  }
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace config_detail {

inline TvConfig parse_tv(const json& j) {
  only_keys(j, "tv", {"profiles", "a_grid", "contraction", "coupling"});
  TvConfig tv;
  if (j.contains("profiles")) {
    std::size_t i = 0;
    for (const auto& p : j.at("profiles")) {
      const std::string where = "tv.profiles[" + std::to_string(i++) + "]";
      only_keys(p, where, {"name", "density", "atoms"});
      TvProfileSpec spec;
      spec.name = p.value("name", "profile" + std::to_string(i - 1));
      if (p.contains("density") == p.contains("atoms")) {
        fail(where, "give exactly one of \"density\" or \"atoms\"");
      }
      if (p.contains("density")) {
        spec.target = parse_density(p.at("density"), where + ".density");
      } else {
        spec.target = parse_discrete(p.at("atoms"), where + ".atoms");
      }
      tv.profiles.push_back(std::move(spec));
    }
  }
  if (j.contains("a_grid")) {
    tv.a_grid = numbers(j.at("a_grid"), "tv.a_grid");
  }
  if (j.contains("contraction")) {
    const json& c = j.at("contraction");
    only_keys(c, "tv.contraction", {"p", "q", "matrix", "steps"});
    if (!c.contains("p") || !c.contains("q") || !c.contains("matrix")) {
      fail("tv.contraction", "needs \"p\", \"q\" and \"matrix\"");
    }
    tv.contraction_p = numbers(c.at("p"), "tv.contraction.p");
    tv.contraction_q = numbers(c.at("q"), "tv.contraction.q");
    if (!c.at("matrix").is_array()) {
      fail("tv.contraction.matrix", "expected an array of rows");
    }
    for (const auto& row : c.at("matrix")) {
      tv.contraction_matrix.push_back(numbers(row, "tv.contraction.matrix"));
    }
    const double steps = number_or(c, "tv.contraction", "steps", 3.0);
    if (!(steps >= 0.0 && steps <= 1e6) || steps != std::floor(steps)) {
      fail("tv.contraction", "\"steps\" must be a nonnegative integer");
    }
    tv.contraction_steps = static_cast<std::size_t>(steps);
  }
  if (j.contains("coupling")) {
    const json& c = j.at("coupling");
    only_keys(c, "tv.coupling", {"p", "q", "draws"});
    if (!c.contains("p") || !c.contains("q")) {
      fail("tv.coupling", "needs \"p\" and \"q\"");
    }
    tv.coupling_p = parse_discrete(c.at("p"), "tv.coupling.p");
    tv.coupling_q = parse_discrete(c.at("q"), "tv.coupling.q");
    const double draws = number_or(c, "tv.coupling", "draws", 100000.0);
    if (!(draws >= 1.0 && draws <= 1e9) || draws != std::floor(draws)) {
      fail("tv.coupling", "\"draws\" must be a positive integer");
    }
    tv.coupling_draws = static_cast<std::size_t>(draws);
  }
  return tv;
}

inline std::vector<double> positive_grid(const json& j, const char* key) {
  auto v = numbers(j.at(key), key);
  if (v.empty()) {
    fail(key, "grid must be nonempty");
  }
  for (double x : v) {
    if (!(x > 0.0) || !std::isfinite(x)) {
      fail(key, "grid values must be positive");
    }
  }
  return v;
}

// 1-based line and column of a byte offset.
inline std::pair<int, int> line_column(const std::string& text, std::size_t offset) {
  int line = 1;
  int col = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace config_detail

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
};

inline RunConfig parse_config(const json& input, const Overrides& ov = {}) {
  using namespace config_detail;
  only_keys(input, "config",
            {"measure", "epsilon", "horizon", "seed", "delta_couple", "workers", "a_grid",
             "eps_grid", "xi_grid", "n_paths", "checks", "tv"});
  RunConfig rc;
  rc.raw = input;
  if (ov.seed) {
    rc.raw["seed"] = *ov.seed;
  }
  if (ov.workers) {
    rc.raw["workers"] = *ov.workers;
  }
  const json& j = rc.raw;
  if (j.contains("measure")) {
    rc.measure = parse_measure(j.at("measure"));
  }
  rc.sim.epsilon = number_or(j, "config", "epsilon", rc.sim.epsilon);
  rc.sim.horizon = number_or(j, "config", "horizon", rc.sim.horizon);
  rc.sim.delta_couple = number_or(j, "config", "delta_couple", rc.sim.delta_couple);
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) {
      fail("config", "\"seed\" must be a nonnegative integer");
    }
    rc.sim.master_seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("workers")) {
    if (!j.at("workers").is_number_unsigned() || j.at("workers").get<std::uint64_t>() == 0 ||
        j.at("workers").get<std::uint64_t>() > 1024) {
      fail("config", "\"workers\" must be an integer in [1, 1024]");
    }
    rc.sim.workers = j.at("workers").get<unsigned>();
  }
  try {
    rc.sim.validate();
  } catch (const std::invalid_argument& e) {
    fail("config", e.what());
  }
  if (j.contains("a_grid")) {
    rc.a_grid = positive_grid(j, "a_grid");
  }
  if (j.contains("eps_grid")) {
    rc.eps_grid = positive_grid(j, "eps_grid");
  }
  if (j.contains("xi_grid")) {
    rc.xi_grid = numbers(j.at("xi_grid"), "xi_grid");
  }
  if (j.contains("n_paths")) {
    if (!j.at("n_paths").is_number_unsigned() || j.at("n_paths").get<std::uint64_t>() < 100) {
      fail("config", "\"n_paths\" must be an integer of at least 100");
    }
    rc.n_paths = j.at("n_paths").get<std::size_t>();
  }
  if (j.contains("checks")) {
    const json& c = j.at("checks");
    if (c.is_boolean()) {
      const bool on = c.get<bool>();
      rc.checks = {on, on, on, on, on, on};
    } else {
      only_keys(c, "checks", {"law", "tau_bar_decay", "tau_bar_bound", "tail_bound", "lcp", "tv"});
      auto flag = [&](const char* k, bool& out) {
        if (c.contains(k)) {
          if (!c.at(k).is_boolean()) {
            fail("checks", std::string("\"") + k + "\" must be true or false");
          }
          out = c.at(k).get<bool>();
        }
      };
      flag("law", rc.checks.law);
      flag("tau_bar_decay", rc.checks.tau_bar_decay);
      flag("tau_bar_bound", rc.checks.tau_bar_bound);
      flag("tail_bound", rc.checks.tail_bound);
      flag("lcp", rc.checks.lcp);
      flag("tv", rc.checks.tv);
    }
  }
  if (j.contains("tv")) {
    rc.tv = parse_tv(j.at("tv"));
  }
  return rc;
}

inline RunConfig parse_config_text(const std::string& text, const Overrides& ov = {}) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = config_detail::line_column(text, e.byte > 0 ? e.byte - 1 : 0);
    throw ConfigError("malformed JSON at line " + std::to_string(line) + ", column " +
                          std::to_string(col) + ": " + e.what(),
                      line, col);
  }
  return parse_config(j, ov);
}

inline RunConfig load_config(const std::string& path, const Overrides& ov = {}) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot read config file " + path);
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), ov);
}

}  // namespace lcpkit
