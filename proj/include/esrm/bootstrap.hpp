#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "esrm/distributions.hpp"
#include "esrm/quadrature.hpp"
#include "esrm/random.hpp"
#include "esrm/spectra.hpp"
#include "esrm/summation.hpp"

namespace esrm {

struct BootstrapConfig {
  std::size_t n = 10001;  // losses per trial, equal to the grid node count
  std::size_t b = 1000;   // trials
  double confidence = 0.90;
  std::uint64_t master_seed = 0;
  QuadratureRule rule = QuadratureRule::simpson;
  SpectrumSpec spectrum = ExponentialSpectrum(5.0);
  NormalLossModel model;
  EndpointPolicy policy = kDefaultEndpointPolicy;
  unsigned workers = 1;  // scheduling only; never changes the result

  void validate() const {
    if (b < 2) throw std::invalid_argument("bootstrap: b must be >= 2, got " + std::to_string(b));
    if (!(confidence > 0.0 && confidence < 1.0)) {
      throw std::invalid_argument("bootstrap: confidence must lie in (0,1)");
    }
    if (n < 3) throw std::invalid_argument("bootstrap: n must be >= 3");
    if (rule == QuadratureRule::simpson && n % 2 == 0) {
      throw std::invalid_argument("bootstrap: Simpson's rule requires odd n, got " +
                                  std::to_string(n));
    }
    if (workers == 0) throw std::invalid_argument("bootstrap: workers must be >= 1");
  }
};

struct BootstrapResult {
  double estimates_mean = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double std_lower = 0.0;
  double std_upper = 0.0;
  BootstrapConfig config;
  std::vector<double> estimates;  // indexed by trial
  std::chrono::duration<double> elapsed{0.0};
};

/// Empirical quantile of `sorted` (ascending) at probability q using the
/// (b+1)q order-statistic position, linear interpolation between
/// neighbours, and the position clamped to [1, b].
inline double interpolated_order_statistic(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("interpolated_order_statistic: empty sample");
  const auto b = static_cast<double>(sorted.size());
  const double r = std::clamp((b + 1.0) * q, 1.0, b);
  const auto lo = static_cast<std::size_t>(std::floor(r));
  const double frac = r - static_cast<double>(lo);
  if (lo >= sorted.size()) return sorted.back();
  return sorted[lo - 1] + frac * (sorted[lo] - sorted[lo - 1]);
}

namespace detail {

// Shared per-run state: the grid and the node ranks are the same for every
// trial.
struct TrialPlan {
  Grid grid;
  std::vector<std::size_t> node_order;

  explicit TrialPlan(const BootstrapConfig& config)
      : grid(build_grid(config.rule, config.n, config.policy)),
        node_order(ascending_node_order(grid)) {}
};

inline double run_trial(const BootstrapConfig& config, const TrialPlan& plan,
                        std::size_t trial_index) {
  std::vector<double> losses =
      sample(config.model, split_seed(config.master_seed, trial_index), config.n);
  std::sort(losses.begin(), losses.end());
  // j-th smallest loss goes to the j-th smallest node.
  std::vector<double> at_node(config.n);
  for (std::size_t j = 0; j < config.n; ++j) at_node[plan.node_order[j]] = losses[j];
  return integrate_weighted_values(SpectrumRef{config.spectrum}, at_node, plan.grid);
}

}  // namespace detail

/// One parametric bootstrap estimate: n simulated losses, sorted, used as
/// the quantiles at the grid nodes.
inline double bootstrap_trial(const BootstrapConfig& config, std::size_t trial_index) {
  config.validate();
  if (trial_index >= config.b) {
    throw std::out_of_range("bootstrap_trial: trial index " + std::to_string(trial_index) +
                            " >= b = " + std::to_string(config.b));
  }
  return detail::run_trial(config, detail::TrialPlan(config), trial_index);
}

/// Percentile confidence interval from b bootstrap trials. Trials are
/// strided across `config.workers` threads; each writes only its own slots,
/// so the result does not depend on the worker count.
inline BootstrapResult bootstrap_ci(const BootstrapConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const detail::TrialPlan plan(config);

  std::vector<double> estimates(config.b);
  const unsigned workers =
      static_cast<unsigned>(std::min<std::size_t>(config.workers, config.b));
  std::vector<std::exception_ptr> failures(workers);
  auto work = [&](unsigned w) {
    try {
      for (std::size_t t = w; t < config.b; t += workers) {
        estimates[t] = detail::run_trial(config, plan, t);
      }
    } catch (...) {
      failures[w] = std::current_exception();
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  BootstrapResult result;
  result.config = config;
  CompensatedSum total;
  for (double e : estimates) total += e;
  result.estimates_mean = total.value() / static_cast<double>(config.b);

  std::vector<double> sorted = estimates;
  std::sort(sorted.begin(), sorted.end());
  const double tail = (1.0 - config.confidence) / 2.0;
  result.lower = interpolated_order_statistic(sorted, tail);
  result.upper = interpolated_order_statistic(sorted, 1.0 - tail);
  result.std_lower = result.lower / result.estimates_mean;
  result.std_upper = result.upper / result.estimates_mean;
  result.estimates = std::move(estimates);
  result.elapsed = std::chrono::steady_clock::now() - start;
  return result;
}

}  // namespace esrm
