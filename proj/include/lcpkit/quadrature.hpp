#pragma once

// Numerical integration and summation primitives shared by the measure
// calculus and the total-variation kit.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <type_traits>
#include <vector>

namespace lcpkit {

// Neumaier compensated summation. Order of add() calls fixes the result, so
// callers that need reproducibility must feed values in a fixed order.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  CompensatedSum& operator+=(double v) {
    add(v);
    return *this;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

namespace detail {

template <typename T>
double magnitude(const T& v) {
  if constexpr (std::is_same_v<T, double>) {
    return std::abs(v);
  } else {
    return std::abs(v.real()) + std::abs(v.imag());
  }
}

// 15-point Kronrod nodes (positive half) and weights, with the embedded
// 7-point Gauss weights.
inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

}  // namespace detail

template <typename T>
struct QuadResult {
  T value{};
  double error = 0.0;
};

// Single Gauss-Kronrod 7/15 panel on [a, b].
template <typename F>
auto gauss_kronrod15(F&& f, double a, double b) {
  using T = std::decay_t<decltype(f(a))>;
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const T fc = f(center);
  T kronrod = fc * detail::kKronrodWeights[7];
  T gauss = fc * detail::kGaussWeights[3];
  for (std::size_t j = 0; j < 7; ++j) {
    const double dx = half * detail::kKronrodNodes[j];
    const T fsum = f(center - dx) + f(center + dx);
    kronrod += fsum * detail::kKronrodWeights[j];
    if (j % 2 == 1) {
      gauss += fsum * detail::kGaussWeights[j / 2];
    }
  }
  return QuadResult<T>{kronrod * half, detail::magnitude(T((kronrod - gauss) * half))};
}

namespace detail {

template <typename F, typename T>
void gk_recurse(F& f, double a, double b, const QuadResult<T>& whole, double abs_tol,
                double rel_tol, int depth, QuadResult<T>& acc) {
  const double tol = std::max(abs_tol, rel_tol * magnitude(whole.value));
  if (whole.error <= tol || depth <= 0 || !(b - a > 4.0 * std::numeric_limits<double>::min())) {
    acc.value += whole.value;
    acc.error += whole.error;
    return;
  }
  const double mid = 0.5 * (a + b);
  const auto left = gauss_kronrod15(f, a, mid);
  const auto right = gauss_kronrod15(f, mid, b);
  gk_recurse(f, a, mid, left, 0.5 * abs_tol, rel_tol, depth - 1, acc);
  gk_recurse(f, mid, b, right, 0.5 * abs_tol, rel_tol, depth - 1, acc);
}

}  // namespace detail

// Adaptive bisection on Gauss-Kronrod panels. The integrand should be smooth
// on (a, b); pass breakpoints through integrate_pieces() otherwise.
template <typename F>
auto integrate(F&& f, double a, double b, double abs_tol = 1e-14, double rel_tol = 1e-13,
               int max_depth = 48) {
  using T = std::decay_t<decltype(f(a))>;
  QuadResult<T> acc{};
  if (!(b > a)) {
    return acc;
  }
  const auto whole = gauss_kronrod15(f, a, b);
  detail::gk_recurse(f, a, b, whole, abs_tol, rel_tol, max_depth, acc);
  return acc;
}

// Integrate over [a, b] split at the given interior breakpoints.
template <typename F>
auto integrate_pieces(F&& f, double a, double b, std::vector<double> breaks,
                      double abs_tol = 1e-14, double rel_tol = 1e-13) {
  using T = std::decay_t<decltype(f(a))>;
  QuadResult<T> acc{};
  if (!(b > a)) {
    return acc;
  }
  breaks.erase(std::remove_if(breaks.begin(), breaks.end(),
                              [&](double x) { return !(x > a && x < b); }),
               breaks.end());
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  double lo = a;
  const auto n_pieces = static_cast<double>(breaks.size() + 1);
  auto run = [&](double x0, double x1) {
    const auto piece = integrate(f, x0, x1, abs_tol / n_pieces, rel_tol);
    acc.value += piece.value;
    acc.error += piece.error;
  };
  for (double x : breaks) {
    run(lo, x);
    lo = x;
  }
  run(lo, b);
  return acc;
}

namespace detail {

struct SimpsonPanel {
  double a, m, b;
  double fa, fm, fb;
  double whole;
};

template <typename F>
double simpson_recurse(F& f, const SimpsonPanel& p, double tol, int depth) {
  const double lm = 0.5 * (p.a + p.m);
  const double rm = 0.5 * (p.m + p.b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (p.m - p.a) / 6.0 * (p.fa + 4.0 * flm + p.fm);
  const double right = (p.b - p.m) / 6.0 * (p.fm + 4.0 * frm + p.fb);
  const double delta = left + right - p.whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
    // Richardson extrapolation of the two Simpson estimates.
    return left + right + delta / 15.0;
  }
  return simpson_recurse(f, {p.a, lm, p.m, p.fa, flm, p.fm, left}, 0.5 * tol, depth - 1) +
         simpson_recurse(f, {p.m, rm, p.b, p.fm, frm, p.fb, right}, 0.5 * tol, depth - 1);
}

}  // namespace detail

// Adaptive Simpson bisection with Richardson acceptance; `abs_tol` bounds the
// absolute error of the whole integral.
template <typename F>
double adaptive_simpson(F&& f, double a, double b, double abs_tol = 1e-9, int max_depth = 50) {
  if (!(b > a)) {
    return 0.0;
  }
  const double m = 0.5 * (a + b);
  const double fa = f(a);
  const double fm = f(m);
  const double fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::simpson_recurse(f, {a, m, b, fa, fm, fb, whole}, abs_tol, max_depth);
}

// Outcome of integrating f over (0, 1] by dyadic shells [2^-(j+1), 2^-j].
struct DyadicIntegral {
  enum class Status { converged, diverged, undecided };
  Status status = Status::undecided;
  double value = std::numeric_limits<double>::infinity();
  std::vector<double> increments;
  double last_ratio = std::numeric_limits<double>::quiet_NaN();
  double tail_uncertainty = 0.0;
};

// Integrates f over (0, 1] as a series of dyadic increments I_j (j <= levels)
// and decides convergence from the ratios I_{j+1}/I_j over the last `window`
// shells. When the ratios settle below one, the remainder is summed as a
// geometric tail. `breaks(lo, hi)` supplies discontinuities inside a shell.
template <typename F, typename B>
DyadicIntegral dyadic_integral(F&& f, B&& breaks, int levels = 60, int window = 8) {
  DyadicIntegral out;
  out.increments.reserve(static_cast<std::size_t>(levels) + 1);
  CompensatedSum total;
  for (int j = 0; j <= levels; ++j) {
    const double hi = std::ldexp(1.0, -j);
    const double lo = 0.5 * hi;
    const double inc = integrate_pieces(f, lo, hi, breaks(lo, hi), 0.0, 1e-14).value;
    if (!std::isfinite(inc)) {
      out.status = DyadicIntegral::Status::diverged;
      return out;
    }
    out.increments.push_back(inc);
    total.add(inc);
  }
  const auto& inc = out.increments;
  const std::size_t n = inc.size();
  if (inc[n - 1] == 0.0) {
    bool all_zero = true;
    for (std::size_t i = n - static_cast<std::size_t>(window); i < n; ++i) {
      all_zero = all_zero && inc[i] == 0.0;
    }
    if (all_zero) {
      out.status = DyadicIntegral::Status::converged;
      out.value = total.value();
      out.last_ratio = 0.0;
      return out;
    }
  }
  double q_lo = std::numeric_limits<double>::infinity();
  double q_hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = n - static_cast<std::size_t>(window); i < n; ++i) {
    const double q = inc[i - 1] > 0.0 ? inc[i] / inc[i - 1]
                                      : std::numeric_limits<double>::infinity();
    q_lo = std::min(q_lo, q);
    q_hi = std::max(q_hi, q);
  }
  out.last_ratio = inc[n - 2] > 0.0 ? inc[n - 1] / inc[n - 2]
                                    : std::numeric_limits<double>::infinity();
  constexpr double kUnit = 1.0 - 1e-9;
  if (q_lo >= kUnit) {
    out.status = DyadicIntegral::Status::diverged;
    return out;
  }
  if (q_hi < kUnit) {
    const double q = out.last_ratio;
    const double tail = inc[n - 1] * q / (1.0 - q);
    out.tail_uncertainty =
        inc[n - 1] * std::abs(q_hi / (1.0 - q_hi) - q_lo / (1.0 - q_lo));
    const double value = total.value() + tail;
    if (out.tail_uncertainty <= 1e-8 * value) {
      out.status = DyadicIntegral::Status::converged;
      out.value = value;
      return out;
    }
  }
  out.status = DyadicIntegral::Status::undecided;
  return out;
}

}  // namespace lcpkit
