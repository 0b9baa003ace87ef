#pragma once

#include <array>
#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "esrm/summation.hpp"

namespace esrm {

enum class QuadratureRule { trapezoid, simpson, niederreiter, weyl };

inline constexpr std::array<QuadratureRule, 4> kAllRules = {
    QuadratureRule::trapezoid, QuadratureRule::simpson, QuadratureRule::niederreiter,
    QuadratureRule::weyl};

inline std::string_view to_string(QuadratureRule rule) noexcept {
  switch (rule) {
    case QuadratureRule::trapezoid: return "trapezoid";
    case QuadratureRule::simpson: return "simpson";
    case QuadratureRule::niederreiter: return "niederreiter";
    case QuadratureRule::weyl: return "weyl";
  }
  return "unknown";
}

inline QuadratureRule parse_rule(std::string_view name) {
  for (auto rule : kAllRules) {
    if (to_string(rule) == name) return rule;
  }
  throw std::invalid_argument("unknown quadrature rule '" + std::string(name) +
                              "' (expected trapezoid|simpson|niederreiter|weyl)");
}

inline bool is_newton_cotes(QuadratureRule rule) noexcept {
  return rule == QuadratureRule::trapezoid || rule == QuadratureRule::simpson;
}

/// How closed Newton-Cotes grids keep away from p = 0 and p = 1, where the
/// quantile of an unbounded loss distribution is infinite. QMC grids never
/// touch the endpoints and ignore this.
enum class EndpointPolicy {
  /// n uniform nodes spanning [h, 1 - h], h = 1/(n-1); weights renormalised
  /// to sum to 1. The tail beyond 1 - h is dropped, which gives the
  /// characteristic downward bias of roughly phi(1) * pdf(q_{1-h}).
  truncate_domain,
  /// Uniform nodes j*h on [0,1] with only the two endpoint nodes moved
  /// inward to h/2 and 1 - h/2.
  clip_half_spacing,
};

inline constexpr EndpointPolicy kDefaultEndpointPolicy = EndpointPolicy::truncate_domain;

/// Quadrature nodes and weights over the probability axis.
struct Grid {
  QuadratureRule rule = QuadratureRule::simpson;
  EndpointPolicy policy = kDefaultEndpointPolicy;
  std::size_t n = 0;
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Raw composite Newton-Cotes weights for n equally spaced nodes on [0,1],
/// endpoints included. Sum is 1 up to rounding.
inline std::vector<double> closed_newton_cotes_weights(QuadratureRule rule, std::size_t n) {
  if (!is_newton_cotes(rule)) {
    throw std::invalid_argument("closed_newton_cotes_weights: rule is not Newton-Cotes");
  }
  if (n < 3) throw std::invalid_argument("closed_newton_cotes_weights: need n >= 3");
  if (rule == QuadratureRule::simpson && n % 2 == 0) {
    throw std::invalid_argument("closed_newton_cotes_weights: Simpson needs odd n, got " +
                                std::to_string(n));
  }
  const double h = 1.0 / static_cast<double>(n - 1);
  std::vector<double> w(n);
  if (rule == QuadratureRule::trapezoid) {
    for (std::size_t j = 0; j < n; ++j) w[j] = h;
    w.front() = w.back() = h / 2.0;
  } else {
    for (std::size_t j = 0; j < n; ++j) w[j] = (j % 2 == 1 ? 4.0 : 2.0) * h / 3.0;
    w.front() = w.back() = h / 3.0;
  }
  return w;
}

/// Base-2 radical inverse (van der Corput sequence) of index >= 1.
inline double van_der_corput(std::uint64_t index) {
  if (index == 0) throw std::invalid_argument("van_der_corput: index must be >= 1");
  std::uint64_t v = index;
  v = ((v >> 1) & UINT64_C(0x5555555555555555)) | ((v & UINT64_C(0x5555555555555555)) << 1);
  v = ((v >> 2) & UINT64_C(0x3333333333333333)) | ((v & UINT64_C(0x3333333333333333)) << 2);
  v = ((v >> 4) & UINT64_C(0x0F0F0F0F0F0F0F0F)) | ((v & UINT64_C(0x0F0F0F0F0F0F0F0F)) << 4);
  v = ((v >> 8) & UINT64_C(0x00FF00FF00FF00FF)) | ((v & UINT64_C(0x00FF00FF00FF00FF)) << 8);
  v = ((v >> 16) & UINT64_C(0x0000FFFF0000FFFF)) | ((v & UINT64_C(0x0000FFFF0000FFFF)) << 16);
  v = (v >> 32) | (v << 32);
  return std::ldexp(static_cast<double>(v), -64);
}

/// frac(index * (sqrt(2) - 1)), index >= 1. Extended precision keeps the
/// fractional part accurate for indices well past 10^7.
inline double weyl_node(std::uint64_t index) {
  if (index == 0) throw std::invalid_argument("weyl_node: index must be >= 1");
  constexpr long double alpha = 0.41421356237309504880168872420969807856967187537694L;
  const long double x = static_cast<long double>(index) * alpha;
  return static_cast<double>(x - std::floor(x));
}

inline Grid build_grid(QuadratureRule rule, std::size_t n,
                       EndpointPolicy policy = kDefaultEndpointPolicy) {
  if (n < 3) throw std::invalid_argument("build_grid: n must be >= 3, got " + std::to_string(n));
  if (rule == QuadratureRule::simpson && n % 2 == 0) {
    throw std::invalid_argument("build_grid: Simpson's rule requires odd n, got " +
                                std::to_string(n));
  }

  Grid grid{rule, policy, n, std::vector<double>(n), {}};
  if (is_newton_cotes(rule)) {
    grid.weights = closed_newton_cotes_weights(rule, n);
    const double h = 1.0 / static_cast<double>(n - 1);
    if (policy == EndpointPolicy::truncate_domain) {
      const double spacing = (1.0 - 2.0 * h) / static_cast<double>(n - 1);
      for (std::size_t j = 0; j < n; ++j) grid.nodes[j] = h + static_cast<double>(j) * spacing;
      grid.nodes.back() = 1.0 - h;
    } else {
      for (std::size_t j = 0; j < n; ++j) grid.nodes[j] = static_cast<double>(j) * h;
      grid.nodes.front() = h / 2.0;
      grid.nodes.back() = 1.0 - h / 2.0;
    }
    CompensatedSum total;
    for (double w : grid.weights) total += w;
    const double scale = 1.0 / total.value();
    for (double& w : grid.weights) w *= scale;
  } else {
    for (std::size_t j = 0; j < n; ++j) {
      grid.nodes[j] = rule == QuadratureRule::niederreiter ? van_der_corput(j + 1) : weyl_node(j + 1);
    }
    grid.weights.assign(n, 1.0 / static_cast<double>(n));
  }
  return grid;
}

/// Anything exposing a weight over cumulative probability.
template <typename S>
concept WeightFunction = requires(const S& s, double p) {
  { s.weight(p) } -> std::convertible_to<double>;
};

/// Thrown when the integrand is not finite at a node.
class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(std::size_t node_index, double node, const std::string& what)
      : std::runtime_error(what), node_index_(node_index), node_(node) {}

  std::size_t node_index() const noexcept { return node_index_; }
  double node() const noexcept { return node_; }

 private:
  std::size_t node_index_;
  double node_;
};

namespace detail {

template <WeightFunction S, typename ValueAt>
double weighted_sum(const S& spectrum, const Grid& grid, ValueAt&& value_at) {
  CompensatedSum total;
  CompensatedSum mass;
  for (std::size_t j = 0; j < grid.n; ++j) {
    const double p = grid.nodes[j];
    const double phi = spectrum.weight(p);
    const double q = value_at(j, p);
    if (!std::isfinite(phi) || !std::isfinite(q)) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "non-finite integrand at node " << j << " (p = " << p << "): weight = " << phi
          << ", quantile = " << q;
      throw IntegrationError(j, p, msg.str());
    }
    total += grid.weights[j] * phi * q;
    mass += grid.weights[j] * phi;
  }
  if (!(mass.value() > 0.0)) {
    throw std::invalid_argument("spectrum places no weight on any node of the grid");
  }
  return total.value() / mass.value();
}

}  // namespace detail

/// Spectrum-weighted average of the quantile over the grid:
/// sum w_j phi(p_j) q(p_j) / sum w_j phi(p_j). Dividing by the discrete
/// spectrum mass keeps the estimate exactly translation equivariant.
template <WeightFunction S, typename QuantileFn>
  requires std::invocable<const QuantileFn&, double>
double integrate_weighted(const S& spectrum, const QuantileFn& quantile_fn, const Grid& grid) {
  return detail::weighted_sum(spectrum, grid,
                              [&](std::size_t, double p) { return static_cast<double>(quantile_fn(p)); });
}

/// As integrate_weighted, with the quantile at node j supplied as values[j].
template <WeightFunction S>
double integrate_weighted_values(const S& spectrum, std::span<const double> values,
                                 const Grid& grid) {
  if (values.size() != grid.n) {
    throw std::invalid_argument("integrate_weighted_values: " + std::to_string(values.size()) +
                                " values for a grid of " + std::to_string(grid.n) + " nodes");
  }
  return detail::weighted_sum(spectrum, grid, [&](std::size_t j, double) { return values[j]; });
}

/// Node indices ordered by node position. Identity for Newton-Cotes grids;
/// a permutation for QMC grids.
inline std::vector<std::size_t> ascending_node_order(const Grid& grid) {
  std::vector<std::size_t> order(grid.n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (!is_newton_cotes(grid.rule)) {
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return grid.nodes[a] < grid.nodes[b]; });
  }
  return order;
}

}  // namespace esrm
