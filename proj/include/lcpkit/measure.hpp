#pragma once

// One-dimensional Levy measures: representation, reflection, the meet of two
// measures, the symmetric part rho = nu ^ reflect(nu), the characteristic
// exponent, and the rho-calculus (eta, the convex potential g and the
// sufficiency verdict for the local coupling property).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "lcpkit/quadrature.hpp"

namespace lcpkit {

enum class Side { plus, minus };

inline Side opposite(Side s) { return s == Side::plus ? Side::minus : Side::plus; }
inline double sign_of(Side s) { return s == Side::plus ? 1.0 : -1.0; }

struct Atom {
  double x = 0.0;
  double mass = 0.0;
  friend bool operator==(const Atom&, const Atom&) = default;
};

// Density c_plus x^(-1-alpha) on (0,1] and c_minus |x|^(-1-alpha) on [-1,0).
struct PowerLaw {
  double alpha = 1.0;
  double c_plus = 0.0;
  double c_minus = 0.0;
  friend bool operator==(const PowerLaw&, const PowerLaw&) = default;
};

// Point masses with 0 < |x| <= 1.
struct Atoms {
  std::vector<Atom> atoms;
  friend bool operator==(const Atoms&, const Atoms&) = default;
};

// Piecewise-constant density on one half-line, indexed by |x|. Below the
// first edge the density continues as tail_value * (|x| / x_min)^tail_exponent.
struct SideGrid {
  std::vector<double> edges;
  std::vector<double> values;
  double tail_value = 0.0;
  double tail_exponent = 0.0;

  // Fits the tail power law through the two innermost cells (geometric
  // midpoints); a single cell or a vanishing second cell gives a flat tail.
  static SideGrid fitted(std::vector<double> edges, std::vector<double> values) {
    SideGrid g{std::move(edges), std::move(values), 0.0, 0.0};
    if (g.values.empty()) {
      return g;
    }
    const double v0 = g.values[0];
    if (v0 <= 0.0) {
      return g;
    }
    const double m0 = std::sqrt(g.edges[0] * g.edges[1]);
    double slope = 0.0;
    if (g.values.size() >= 2 && g.values[1] > 0.0) {
      const double m1 = std::sqrt(g.edges[1] * g.edges[2]);
      slope = std::log(g.values[1] / v0) / std::log(m1 / m0);
    }
    g.tail_exponent = slope;
    g.tail_value = v0 * std::pow(g.edges[0] / m0, slope);
    return g;
  }

  bool empty() const { return values.empty(); }
  double x_min() const { return edges.empty() ? 0.0 : edges.front(); }
  double x_max() const { return edges.empty() ? 0.0 : edges.back(); }

  double tail(double r) const {
    if (tail_value == 0.0) {
      return 0.0;
    }
    return tail_value * std::pow(r / x_min(), tail_exponent);
  }

  // Density at |x| = r > 0.
  double density(double r) const {
    if (empty() || r > x_max()) {
      return 0.0;
    }
    if (r < x_min()) {
      return tail(r);
    }
    const auto it = std::upper_bound(edges.begin(), edges.end(), r);
    const auto cell = static_cast<std::size_t>(std::distance(edges.begin(), it)) - 1;
    return values[std::min(cell, values.size() - 1)];
  }

  friend bool operator==(const SideGrid&, const SideGrid&) = default;
};

struct Tabulated {
  SideGrid plus;
  SideGrid minus;

  const SideGrid& side(Side s) const { return s == Side::plus ? plus : minus; }

  // Samples the two half-line densities (functions of |x|) at geometric cell
  // midpoints of a log-spaced grid from x_min to 1.
  static Tabulated log_grid(const std::function<double(double)>& f_plus,
                            const std::function<double(double)>& f_minus,
                            std::size_t cells = 512, double x_min = 1e-8) {
    std::vector<double> edges(cells + 1);
    const double log_lo = std::log(x_min);
    for (std::size_t i = 0; i <= cells; ++i) {
      edges[i] = std::exp(log_lo * (1.0 - static_cast<double>(i) / static_cast<double>(cells)));
    }
    edges.front() = x_min;
    edges.back() = 1.0;
    auto sample = [&](const std::function<double(double)>& f) {
      std::vector<double> v(cells);
      for (std::size_t i = 0; i < cells; ++i) {
        v[i] = f ? f(std::sqrt(edges[i] * edges[i + 1])) : 0.0;
      }
      return SideGrid::fitted(edges, std::move(v));
    };
    return Tabulated{sample(f_plus), sample(f_minus)};
  }

  friend bool operator==(const Tabulated&, const Tabulated&) = default;
};

// Finite measure on {|x| > 1}; compound-Poisson part of the Levy-Ito split.
struct BigJumps {
  std::vector<Atom> atoms;
  friend bool operator==(const BigJumps&, const BigJumps&) = default;
};

using Component = std::variant<PowerLaw, Atoms, Tabulated, BigJumps>;

// Density coef * r^exponent for r = |x| in (lo, hi] on one side.
struct PowerSegment {
  double lo = 0.0;
  double hi = 0.0;
  double coef = 0.0;
  double exponent = 0.0;

  double value(double r) const {
    return (r > lo && r <= hi) ? coef * std::pow(r, exponent) : 0.0;
  }

  // Integral of r^k times the density over [a, b] clipped to the segment.
  double moment(int k, double a, double b) const {
    const double l = std::max(lo, a);
    const double h = std::min(hi, b);
    if (!(h > l) || coef == 0.0) {
      return 0.0;
    }
    const double p = static_cast<double>(k) + exponent + 1.0;
    if (l == 0.0) {
      if (p <= 0.0) {
        return std::numeric_limits<double>::infinity();
      }
      return coef * std::pow(h, p) / p;
    }
    const double log_ratio = std::log1p((h - l) / l);
    if (std::abs(p) < 1e-12) {
      return coef * log_ratio;
    }
    return coef * std::pow(l, p) * std::expm1(p * log_ratio) / p;
  }

  // Inverse-CDF draw from the normalized density restricted to [a, b].
  double sample(double a, double b, double v) const {
    const double l = std::max(lo, a);
    const double h = std::min(hi, b);
    const double p = exponent + 1.0;
    if (l == 0.0) {
      return h * std::pow(v, 1.0 / p);
    }
    const double log_ratio = std::log1p((h - l) / l);
    if (std::abs(p) < 1e-12) {
      return l * std::exp(v * log_ratio);
    }
    const double x = l * std::exp(std::log1p(v * std::expm1(p * log_ratio)) / p);
    return std::clamp(x, l, h);
  }
};

namespace detail {

inline std::vector<Atom> merge_atoms(std::vector<Atom> atoms) {
  std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.x < b.x; });
  std::vector<Atom> out;
  for (const auto& a : atoms) {
    if (!out.empty() && out.back().x == a.x) {
      out.back().mass += a.mass;
    } else {
      out.push_back(a);
    }
  }
  out.erase(std::remove_if(out.begin(), out.end(), [](const Atom& a) { return a.mass <= 0.0; }),
            out.end());
  return out;
}

inline std::vector<Atom> meet_atoms(const std::vector<Atom>& a, const std::vector<Atom>& b) {
  // Both inputs sorted and merged.
  std::vector<Atom> out;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i].x < b[j].x) {
      ++i;
    } else if (b[j].x < a[i].x) {
      ++j;
    } else {
      // 0.5 * (m + n - |m - n|), the atom-wise meet.
      const double m = 0.5 * (a[i].mass + b[j].mass - std::abs(a[i].mass - b[j].mass));
      if (m > 0.0) {
        out.push_back({a[i].x, m});
      }
      ++i;
      ++j;
    }
  }
  return out;
}

inline void require(bool ok, const std::string& what) {
  if (!ok) {
    throw std::invalid_argument(what);
  }
}

inline void validate_grid(const SideGrid& g) {
  if (g.empty()) {
    require(g.edges.empty() || g.edges.size() == 1, "tabulated: edges without values");
    return;
  }
  require(g.edges.size() == g.values.size() + 1, "tabulated: need one more edge than values");
  require(g.edges.front() > 0.0 && g.edges.back() <= 1.0, "tabulated: edges must lie in (0,1]");
  for (std::size_t i = 1; i < g.edges.size(); ++i) {
    require(g.edges[i] > g.edges[i - 1], "tabulated: edges must be strictly increasing");
  }
  for (double v : g.values) {
    require(std::isfinite(v) && v >= 0.0, "tabulated: density values must be finite and >= 0");
  }
  require(std::isfinite(g.tail_value) && g.tail_value >= 0.0, "tabulated: bad tail value");
  require(std::isfinite(g.tail_exponent), "tabulated: bad tail exponent");
  // x^2 integrability of the extrapolated tail near 0.
  require(g.tail_value == 0.0 || g.tail_exponent > -3.0,
          "tabulated: tail exponent must exceed -3 for a Levy measure");
}

}  // namespace detail

class LevyMeasure {
 public:
  LevyMeasure() = default;

  explicit LevyMeasure(std::vector<Component> components) : components_(std::move(components)) {
    using detail::require;
    for (const auto& c : components_) {
      std::visit(
          [](const auto& comp) {
            using T = std::decay_t<decltype(comp)>;
            if constexpr (std::is_same_v<T, PowerLaw>) {
              require(std::isfinite(comp.alpha) && comp.alpha > 0.0 && comp.alpha < 2.0,
                      "power_law: alpha must lie in (0,2)");
              require(std::isfinite(comp.c_plus) && comp.c_plus >= 0.0 &&
                          std::isfinite(comp.c_minus) && comp.c_minus >= 0.0,
                      "power_law: c_plus and c_minus must be finite and >= 0");
            } else if constexpr (std::is_same_v<T, Atoms>) {
              for (const auto& a : comp.atoms) {
                require(std::isfinite(a.x) && a.x != 0.0 && std::abs(a.x) <= 1.0,
                        "atoms: locations must lie in [-1,1] minus {0}");
                require(std::isfinite(a.mass) && a.mass > 0.0, "atoms: masses must be > 0");
              }
            } else if constexpr (std::is_same_v<T, Tabulated>) {
              detail::validate_grid(comp.plus);
              detail::validate_grid(comp.minus);
            } else {
              for (const auto& a : comp.atoms) {
                require(std::isfinite(a.x) && std::abs(a.x) > 1.0,
                        "big_jumps: locations must satisfy |x| > 1");
                require(std::isfinite(a.mass) && a.mass > 0.0, "big_jumps: masses must be > 0");
              }
            }
          },
          c);
    }
  }

  const std::vector<Component>& components() const { return components_; }

  bool has_density() const {
    for (const auto& c : components_) {
      if (const auto* p = std::get_if<PowerLaw>(&c); p && (p->c_plus > 0.0 || p->c_minus > 0.0)) {
        return true;
      }
      if (const auto* t = std::get_if<Tabulated>(&c); t && (!t->plus.empty() || !t->minus.empty())) {
        return true;
      }
    }
    return false;
  }

  bool is_zero() const {
    return !has_density() && small_atoms().empty() && big_jumps().empty();
  }

  // Small-jump density at x (0 < |x| <= 1).
  double density(double x) const {
    const double r = std::abs(x);
    if (x == 0.0 || r > 1.0) {
      return 0.0;
    }
    const Side s = x > 0.0 ? Side::plus : Side::minus;
    double d = 0.0;
    for (const auto& c : components_) {
      if (const auto* p = std::get_if<PowerLaw>(&c)) {
        const double coef = s == Side::plus ? p->c_plus : p->c_minus;
        if (coef > 0.0) {
          d += coef * std::pow(r, -1.0 - p->alpha);
        }
      } else if (const auto* t = std::get_if<Tabulated>(&c)) {
        d += t->side(s).density(r);
      }
    }
    return d;
  }

  double atom_mass(double x) const {
    double m = 0.0;
    for (const auto& c : components_) {
      if (const auto* a = std::get_if<Atoms>(&c)) {
        for (const auto& at : a->atoms) {
          if (at.x == x) {
            m += at.mass;
          }
        }
      }
    }
    return m;
  }

  std::vector<Atom> small_atoms() const { return collect<Atoms>(); }
  std::vector<Atom> big_jumps() const { return collect<BigJumps>(); }

  LevyMeasure small_part() const {
    std::vector<Component> out;
    for (const auto& c : components_) {
      if (!std::holds_alternative<BigJumps>(c)) {
        out.push_back(c);
      }
    }
    return LevyMeasure(std::move(out));
  }

  // Density pieces of the small-jump part on one side, in |x|.
  std::vector<PowerSegment> segments(Side s) const {
    std::vector<PowerSegment> out;
    for (const auto& c : components_) {
      if (const auto* p = std::get_if<PowerLaw>(&c)) {
        const double coef = s == Side::plus ? p->c_plus : p->c_minus;
        if (coef > 0.0) {
          out.push_back({0.0, 1.0, coef, -1.0 - p->alpha});
        }
      } else if (const auto* t = std::get_if<Tabulated>(&c)) {
        const SideGrid& g = t->side(s);
        if (g.empty()) {
          continue;
        }
        if (g.tail_value > 0.0) {
          out.push_back({0.0, g.x_min(), g.tail_value * std::pow(g.x_min(), -g.tail_exponent),
                         g.tail_exponent});
        }
        for (std::size_t i = 0; i < g.values.size(); ++i) {
          if (g.values[i] > 0.0) {
            out.push_back({g.edges[i], g.edges[i + 1], g.values[i], 0.0});
          }
        }
      }
    }
    return out;
  }

  // True when every neighbourhood (0, r) on this side carries mass.
  bool has_mass_near_zero(Side s) const {
    for (const auto& seg : segments(s)) {
      if (seg.lo == 0.0 && seg.coef > 0.0) {
        return true;
      }
    }
    return false;
  }

  // Integral of |x|^k over the small-jump part with |x| between lo and hi on
  // one side. Atoms on the boundary are counted according to the flags.
  double side_moment(Side s, int k, double lo, double hi, bool lo_closed = true,
                     bool hi_closed = true) const {
    CompensatedSum acc;
    for (const auto& seg : segments(s)) {
      acc.add(seg.moment(k, lo, hi));
    }
    for (const auto& a : small_atoms()) {
      if ((a.x > 0.0) != (s == Side::plus)) {
        continue;
      }
      const double r = std::abs(a.x);
      const bool above = lo_closed ? r >= lo : r > lo;
      const bool below = hi_closed ? r <= hi : r < hi;
      if (above && below) {
        acc.add(std::pow(r, k) * a.mass);
      }
    }
    return acc.value();
  }

  friend bool operator==(const LevyMeasure&, const LevyMeasure&) = default;

 private:
  template <typename T>
  std::vector<Atom> collect() const {
    std::vector<Atom> all;
    for (const auto& c : components_) {
      if (const auto* a = std::get_if<T>(&c)) {
        all.insert(all.end(), a->atoms.begin(), a->atoms.end());
      }
    }
    return detail::merge_atoms(std::move(all));
  }

  std::vector<Component> components_;
};

// nu-bar(dx) = nu(-dx), component by component.
inline LevyMeasure reflect(const LevyMeasure& nu) {
  std::vector<Component> out;
  out.reserve(nu.components().size());
  for (const auto& c : nu.components()) {
    std::visit(
        [&](const auto& comp) {
          using T = std::decay_t<decltype(comp)>;
          if constexpr (std::is_same_v<T, PowerLaw>) {
            out.emplace_back(PowerLaw{comp.alpha, comp.c_minus, comp.c_plus});
          } else if constexpr (std::is_same_v<T, Tabulated>) {
            out.emplace_back(Tabulated{comp.minus, comp.plus});
          } else {
            T flipped = comp;
            for (auto& a : flipped.atoms) {
              a.x = -a.x;
            }
            out.emplace_back(std::move(flipped));
          }
        },
        c);
  }
  return LevyMeasure(std::move(out));
}

namespace detail {

// If every density component is a PowerLaw with one common exponent, their sum.
inline std::optional<PowerLaw> single_power_law(const LevyMeasure& m) {
  std::optional<PowerLaw> acc;
  for (const auto& c : m.components()) {
    if (std::holds_alternative<Tabulated>(c)) {
      const auto& t = std::get<Tabulated>(c);
      if (!t.plus.empty() || !t.minus.empty()) {
        return std::nullopt;
      }
    }
    if (const auto* p = std::get_if<PowerLaw>(&c)) {
      if (p->c_plus == 0.0 && p->c_minus == 0.0) {
        continue;
      }
      if (!acc) {
        acc = *p;
      } else if (acc->alpha != p->alpha) {
        return std::nullopt;
      } else {
        acc->c_plus += p->c_plus;
        acc->c_minus += p->c_minus;
      }
    }
  }
  return acc;
}

// Infimum of the total small-jump density over the cell [a, b] on one side,
// assuming every tabulated edge of the measure is a grid edge.
inline double cell_lower_bound(const LevyMeasure& m, Side s, double a, double b) {
  double d = 0.0;
  for (const auto& c : m.components()) {
    if (const auto* p = std::get_if<PowerLaw>(&c)) {
      const double coef = s == Side::plus ? p->c_plus : p->c_minus;
      d += coef > 0.0 ? coef * std::pow(b, -1.0 - p->alpha) : 0.0;
    } else if (const auto* t = std::get_if<Tabulated>(&c)) {
      const SideGrid& g = t->side(s);
      if (g.empty()) {
        continue;
      }
      if (b <= g.x_min()) {
        d += std::min(g.tail(a), g.tail(b));
      } else {
        d += g.density(std::sqrt(a * b));
      }
    }
  }
  return d;
}

// Most singular density term reaching down to 0, used as a lower bound of the
// total density on (0, x_min].
inline std::optional<PowerSegment> dominant_tail(const LevyMeasure& m, Side s) {
  std::optional<PowerSegment> best;
  for (const auto& seg : m.segments(s)) {
    if (seg.lo == 0.0 && seg.coef > 0.0 && (!best || seg.exponent < best->exponent)) {
      best = seg;
    }
  }
  return best;
}

inline std::vector<double> default_log_edges(std::size_t cells = 512, double x_min = 1e-8) {
  return Tabulated::log_grid(nullptr, nullptr, cells, x_min).plus.edges;
}

inline SideGrid meet_side(const LevyMeasure& mu, const LevyMeasure& nu, Side s) {
  std::vector<double> edges;
  bool has_power = false;
  for (const LevyMeasure* m : {&mu, &nu}) {
    for (const auto& c : m->components()) {
      if (const auto* t = std::get_if<Tabulated>(&c)) {
        const auto& e = t->side(s).edges;
        if (!t->side(s).empty()) {
          edges.insert(edges.end(), e.begin(), e.end());
        }
      } else if (const auto* p = std::get_if<PowerLaw>(&c)) {
        has_power = has_power || (s == Side::plus ? p->c_plus : p->c_minus) > 0.0;
      }
    }
  }
  if (edges.empty()) {
    if (!has_power) {
      return {};
    }
    edges = default_log_edges();
  }
  if (has_power) {
    edges.push_back(1.0);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  if (edges.size() < 2) {
    return {};
  }
  SideGrid g;
  g.edges = edges;
  g.values.resize(edges.size() - 1);
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    g.values[i] = std::min(cell_lower_bound(mu, s, edges[i], edges[i + 1]),
                           cell_lower_bound(nu, s, edges[i], edges[i + 1]));
  }
  const auto tm = dominant_tail(mu, s);
  const auto tn = dominant_tail(nu, s);
  if (tm && tn) {
    const double xm = edges.front();
    g.tail_exponent = std::max(tm->exponent, tn->exponent);
    g.tail_value = std::min(tm->coef * std::pow(xm, tm->exponent),
                            tn->coef * std::pow(xm, tn->exponent));
  }
  return g;
}

}  // namespace detail

// mu ^ nu = (mu + nu - |mu - nu|) / 2. Densities meet pointwise, atoms meet
// location by location, density against atom contributes nothing. Unequal
// power-law exponents fall back to a tabulated lower envelope.
inline LevyMeasure meet(const LevyMeasure& mu, const LevyMeasure& nu) {
  std::vector<Component> out;
  if (mu.has_density() && nu.has_density()) {
    const auto pm = detail::single_power_law(mu);
    const auto pn = detail::single_power_law(nu);
    if (pm && pn && pm->alpha == pn->alpha) {
      const PowerLaw p{pm->alpha, std::min(pm->c_plus, pn->c_plus),
                       std::min(pm->c_minus, pn->c_minus)};
      if (p.c_plus > 0.0 || p.c_minus > 0.0) {
        out.emplace_back(p);
      }
    } else {
      Tabulated t{detail::meet_side(mu, nu, Side::plus), detail::meet_side(mu, nu, Side::minus)};
      if (!t.plus.empty() || !t.minus.empty()) {
        out.emplace_back(std::move(t));
      }
    }
  }
  if (auto a = detail::meet_atoms(mu.small_atoms(), nu.small_atoms()); !a.empty()) {
    out.emplace_back(Atoms{std::move(a)});
  }
  if (auto b = detail::meet_atoms(mu.big_jumps(), nu.big_jumps()); !b.empty()) {
    out.emplace_back(BigJumps{std::move(b)});
  }
  return LevyMeasure(std::move(out));
}

// rho = nu ^ reflect(nu) over the small-jump part; big jumps are coupled
// identically and never enter rho.
inline LevyMeasure symmetric_part(const LevyMeasure& nu) {
  const LevyMeasure small = nu.small_part();
  return meet(small, reflect(small));
}

// ---------------------------------------------------------------------------
// Characteristic exponent

namespace detail {

// cos(y) - 1 and sin(y) - y without cancellation.
inline double cos_m1(double y) {
  const double s = std::sin(0.5 * y);
  return -2.0 * s * s;
}

inline double sin_m_id(double y) {
  if (std::abs(y) < 0.1) {
    const double y2 = y * y;
    return -y * y2 / 6.0 * (1.0 - y2 / 20.0 * (1.0 - y2 / 42.0 * (1.0 - y2 / 72.0)));
  }
  return std::sin(y) - y;
}

// Integral of (e^{i xi r} - 1 - i xi r) over a density segment restricted to
// [lo, hi], for xi >= 0.
inline std::complex<double> segment_exponent(const PowerSegment& seg, double xi, double lo,
                                             double hi) {
  const double a = std::max(seg.lo, lo);
  const double b = std::min(seg.hi, hi);
  if (!(b > a) || seg.coef == 0.0 || xi == 0.0) {
    return {0.0, 0.0};
  }
  // Below xi*r = 1e-3 a four-term Taylor expansion is exact to double precision.
  const double h = 1e-3 / xi;
  std::complex<double> total{0.0, 0.0};
  if (a < h) {
    const double sb = std::min(b, h);
    const double x2 = xi * xi;
    const double re = -x2 / 2.0 * seg.moment(2, a, sb) + x2 * x2 / 24.0 * seg.moment(4, a, sb) -
                      x2 * x2 * x2 / 720.0 * seg.moment(6, a, sb);
    const double im = -x2 * xi / 6.0 * seg.moment(3, a, sb) +
                      x2 * x2 * xi / 120.0 * seg.moment(5, a, sb);
    total += std::complex<double>(re, im);
  }
  double lo_q = std::max(a, h);
  if (b > lo_q) {
    auto f = [&](double r) {
      const double w = seg.coef * std::pow(r, seg.exponent);
      return std::complex<double>(w * cos_m1(xi * r), w * sin_m_id(xi * r));
    };
    std::vector<double> breaks;
    for (double x = 2.0 * lo_q; x < b; x *= 2.0) {
      breaks.push_back(x);
    }
    total += integrate_pieces(f, lo_q, b, std::move(breaks), 0.0, 1e-13).value;
  }
  return total;
}

}  // namespace detail

// psi_eps(xi): exponent of the law that drops jumps with |x| < eps. The
// compensated form covers |x| <= 1, big jumps enter uncompensated.
inline std::complex<double> truncated_exponent(const LevyMeasure& nu, double xi, double eps) {
  if (xi == 0.0) {
    return {0.0, 0.0};
  }
  const double axi = std::abs(xi);
  std::complex<double> plus{0.0, 0.0};
  std::complex<double> minus{0.0, 0.0};
  for (const auto& seg : nu.segments(Side::plus)) {
    plus += detail::segment_exponent(seg, axi, eps, 1.0);
  }
  for (const auto& seg : nu.segments(Side::minus)) {
    minus += detail::segment_exponent(seg, axi, eps, 1.0);
  }
  std::complex<double> total = plus + std::conj(minus);
  for (const auto& a : nu.small_atoms()) {
    if (std::abs(a.x) >= eps) {
      const double y = axi * a.x;
      total += a.mass * std::complex<double>(detail::cos_m1(y), detail::sin_m_id(y));
    }
  }
  for (const auto& a : nu.big_jumps()) {
    const double y = axi * a.x;
    total += a.mass * std::complex<double>(detail::cos_m1(y), std::sin(y));
  }
  return xi < 0.0 ? std::conj(total) : total;
}

inline std::complex<double> char_exponent(const LevyMeasure& nu, double xi) {
  return truncated_exponent(nu, xi, 0.0);
}

// sigma^2_eps = integral of x^2 over |x| < eps.
inline double truncated_variance(const LevyMeasure& nu, double eps) {
  return nu.side_moment(Side::plus, 2, 0.0, eps, false, false) +
         nu.side_moment(Side::minus, 2, 0.0, eps, false, false);
}

// ---------------------------------------------------------------------------
// rho calculus

// eta(r) = integral of x^2 rho(dx) over (0, r], positive side only.
class EtaFunction {
 public:
  EtaFunction() = default;

  explicit EtaFunction(const LevyMeasure& rho) {
    for (const auto& c : rho.components()) {
      if (const auto* p = std::get_if<PowerLaw>(&c)) {
        if (p->c_plus > 0.0) {
          powers_.push_back({p->c_plus / (2.0 - p->alpha), 2.0 - p->alpha});
        }
      } else if (const auto* t = std::get_if<Tabulated>(&c)) {
        const SideGrid& g = t->plus;
        if (g.empty()) {
          continue;
        }
        Grid grid;
        grid.edges = g.edges;
        grid.values = g.values;
        grid.tail_p = g.tail_exponent + 3.0;
        grid.tail_coef = g.tail_value > 0.0
                             ? g.tail_value * std::pow(g.x_min(), -g.tail_exponent) / grid.tail_p
                             : 0.0;
        grid.cum.resize(g.edges.size());
        grid.cum[0] = grid.tail_coef * std::pow(g.x_min(), grid.tail_p);
        for (std::size_t i = 0; i < g.values.size(); ++i) {
          const PowerSegment cell{g.edges[i], g.edges[i + 1], g.values[i], 0.0};
          grid.cum[i + 1] = grid.cum[i] + cell.moment(2, g.edges[i], g.edges[i + 1]);
        }
        grids_.push_back(std::move(grid));
      }
    }
    for (const auto& a : rho.small_atoms()) {
      if (a.x > 0.0) {
        atom_x_.push_back(a.x);
        const double prev = atom_cum_.empty() ? 0.0 : atom_cum_.back();
        atom_cum_.push_back(prev + a.x * a.x * a.mass);
      }
    }
  }

  double operator()(double r) const { return eval(r, true); }

  // Same integral over the open interval (0, r).
  double below(double r) const { return eval(r, false); }

  // Points in (lo, hi) where r -> eta(scale * r) has a jump or a kink.
  std::vector<double> breakpoints(double lo, double hi, double scale) const {
    std::vector<double> out;
    auto add_range = [&](const std::vector<double>& xs) {
      auto first = std::upper_bound(xs.begin(), xs.end(), lo * scale);
      for (auto it = first; it != xs.end() && *it < hi * scale; ++it) {
        out.push_back(*it / scale);
      }
    };
    add_range(atom_x_);
    for (const auto& g : grids_) {
      add_range(g.edges);
    }
    if (scale < 1.0 && hi > 1.0 / scale && lo < 1.0 / scale) {
      out.push_back(1.0 / scale);
    }
    return out;
  }

 private:
  struct Grid {
    std::vector<double> edges;
    std::vector<double> values;
    std::vector<double> cum;
    double tail_coef = 0.0;
    double tail_p = 3.0;
  };

  double eval(double r, bool closed) const {
    if (!(r > 0.0)) {
      return 0.0;
    }
    r = std::min(r, 1.0);
    double total = 0.0;
    for (const auto& [coef, p] : powers_) {
      total += coef * std::pow(r, p);
    }
    for (const auto& g : grids_) {
      if (r <= g.edges.front()) {
        total += g.tail_coef * std::pow(r, g.tail_p);
      } else if (r >= g.edges.back()) {
        total += g.cum.back();
      } else {
        const auto it = std::upper_bound(g.edges.begin(), g.edges.end(), r);
        const auto i = static_cast<std::size_t>(std::distance(g.edges.begin(), it)) - 1;
        const PowerSegment cell{g.edges[i], g.edges[i + 1], g.values[i], 0.0};
        total += g.cum[i] + cell.moment(2, g.edges[i], r);
      }
    }
    if (!atom_x_.empty()) {
      const auto it = closed ? std::upper_bound(atom_x_.begin(), atom_x_.end(), r)
                             : std::lower_bound(atom_x_.begin(), atom_x_.end(), r);
      const auto n = static_cast<std::size_t>(std::distance(atom_x_.begin(), it));
      if (n > 0) {
        total += atom_cum_[n - 1];
      }
    }
    return total;
  }

  std::vector<std::pair<double, double>> powers_;
  std::vector<Grid> grids_;
  std::vector<double> atom_x_;
  std::vector<double> atom_cum_;
};

struct LcpVerdict {
  enum class Kind { holds, fails, inconclusive };
  Kind kind = Kind::inconclusive;
  // Integral of r / eta(r) over (0,1]: finite for holds, +inf for fails,
  // NaN when undecided.
  double value = std::numeric_limits<double>::quiet_NaN();
  std::string reason;

  bool holds() const { return kind == Kind::holds; }
};

inline const char* to_string(LcpVerdict::Kind k) {
  switch (k) {
    case LcpVerdict::Kind::holds:
      return "Holds";
    case LcpVerdict::Kind::fails:
      return "Fails";
    default:
      return "Inconclusive";
  }
}

// h(x) = int_x^1 int_y^1 1/eta(scale * r) dr dy = int_x^1 (r - x)/eta(scale r) dr
// on [0,1], continued past 1 with h'' = 1/eta(min(1, scale x)). Convex and
// nonincreasing on [0,1], h(1) = h'(1) = 0.
class Potential {
 public:
  Potential(std::shared_ptr<const EtaFunction> eta, double scale, double at_zero)
      : eta_(std::move(eta)), scale_(scale), at_zero_(at_zero) {}

  double scale() const { return scale_; }

  double operator()(double x) const {
    if (!(x >= 0.0)) {
      throw std::domain_error("potential: argument must be >= 0");
    }
    if (x == 0.0) {
      return at_zero_;
    }
    if (x > 1.0) {
      auto f = [&](double r) { return (x - r) / eta_at(r); };
      return integrate_pieces(f, 1.0, x, eta_->breakpoints(1.0, x, scale_), 0.0, 1e-13).value;
    }
    auto f = [&](double r) { return (r - x) / eta_at(r); };
    return over_shells(f, x);
  }

  double derivative(double x) const {
    if (!(x > 0.0)) {
      throw std::domain_error("potential derivative: argument must be > 0");
    }
    auto f = [&](double r) { return 1.0 / eta_at(r); };
    if (x > 1.0) {
      return integrate_pieces(f, 1.0, x, eta_->breakpoints(1.0, x, scale_), 0.0, 1e-13).value;
    }
    return -over_shells(f, x);
  }

  double second_derivative(double x) const { return 1.0 / eta_at(x); }

 private:
  double eta_at(double r) const { return (*eta_)(std::min(1.0, scale_ * r)); }

  template <typename F>
  double over_shells(F& f, double x) const {
    CompensatedSum acc;
    double hi = 1.0;
    while (hi > x) {
      const double lo = std::max(0.5 * hi, x);
      acc.add(integrate_pieces(f, lo, hi, eta_->breakpoints(lo, hi, scale_), 0.0, 1e-14).value);
      hi = 0.5 * hi;
    }
    return acc.value();
  }

  std::shared_ptr<const EtaFunction> eta_;
  double scale_;
  double at_zero_;
};

// Symmetric part rho of a Levy measure with its eta, the potential g and the
// verdict on the integrability of r / eta(r) near 0.
class RhoProfile {
 public:
  explicit RhoProfile(const LevyMeasure& nu) : RhoProfile(symmetric_part(nu), 0) {}

  static RhoProfile from_rho(LevyMeasure rho) { return RhoProfile(std::move(rho), 0); }

  const LevyMeasure& rho() const { return rho_; }
  const EtaFunction& eta_function() const { return *eta_; }
  double eta(double r) const { return (*eta_)(r); }
  double eta_below(double r) const { return eta_->below(r); }

  const LcpVerdict& verdict() const { return verdict_; }
  double condition_value() const { return verdict_.value; }

  // Potential built on r -> eta(scale * r); scale 1 gives g.
  Potential potential(double scale) const {
    if (!verdict_.holds()) {
      throw std::domain_error("potential requires the sufficiency condition to hold (verdict " +
                              std::string(to_string(verdict_.kind)) + ")");
    }
    if (!(scale > 0.0 && scale <= 1.0)) {
      throw std::invalid_argument("potential: scale must lie in (0,1]");
    }
    if (scale == 1.0) {
      return Potential(eta_, 1.0, verdict_.value);
    }
    const auto d = condition_integral(scale);
    if (d.status != DyadicIntegral::Status::converged) {
      throw std::domain_error("potential: scaled condition integral did not converge");
    }
    return Potential(eta_, scale, d.value);
  }

  double g(double x) const { return potential(1.0)(x); }
  double g_prime(double x) const { return potential(1.0).derivative(x); }

 private:
  RhoProfile(LevyMeasure rho, int) : rho_(std::move(rho)) {
    eta_ = std::make_shared<const EtaFunction>(rho_);
    if (!rho_.has_mass_near_zero(Side::plus)) {
      verdict_ = {LcpVerdict::Kind::fails, std::numeric_limits<double>::infinity(),
                  "rho vanishes near 0"};
      return;
    }
    const auto d = condition_integral(1.0);
    switch (d.status) {
      case DyadicIntegral::Status::converged:
        verdict_ = {LcpVerdict::Kind::holds, d.value, ""};
        break;
      case DyadicIntegral::Status::diverged:
        verdict_ = {LcpVerdict::Kind::fails, std::numeric_limits<double>::infinity(),
                    "dyadic increments of the integral of r/eta(r) do not decay"};
        break;
      default:
        verdict_ = {LcpVerdict::Kind::inconclusive, std::numeric_limits<double>::quiet_NaN(),
                    "dyadic increments unsettled: last ratio " + std::to_string(d.last_ratio) +
                        ", tail uncertainty " + std::to_string(d.tail_uncertainty)};
        break;
    }
  }

  DyadicIntegral condition_integral(double scale) const {
    auto f = [&](double r) { return r / (*eta_)(std::min(1.0, scale * r)); };
    auto breaks = [&](double lo, double hi) { return eta_->breakpoints(lo, hi, scale); };
    return dyadic_integral(f, breaks);
  }

  LevyMeasure rho_;
  std::shared_ptr<const EtaFunction> eta_;
  LcpVerdict verdict_;
};

inline LcpVerdict check_lcp_condition(const RhoProfile& profile) { return profile.verdict(); }

}  // namespace lcpkit
