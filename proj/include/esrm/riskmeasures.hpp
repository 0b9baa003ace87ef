#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "esrm/distributions.hpp"
#include "esrm/quadrature.hpp"
#include "esrm/random.hpp"
#include "esrm/spectra.hpp"
#include "esrm/summation.hpp"

namespace esrm {

/// One computed risk measure value with the method that produced it.
struct SRMEstimate {
  double value = 0.0;
  std::string spectrum;
  QuadratureRule rule = QuadratureRule::simpson;
  std::size_t n = 0;
  EndpointPolicy policy = kDefaultEndpointPolicy;
  std::chrono::duration<double> elapsed{0.0};
};

template <typename S>
std::string spectrum_label(const S& spectrum) {
  if constexpr (std::is_same_v<S, SpectrumSpec>) {
    return describe(spectrum);
  } else if constexpr (std::is_same_v<S, ExponentialSpectrum> || std::is_same_v<S, ESSpectrum>) {
    return describe(SpectrumSpec{spectrum});
  } else if constexpr (std::is_same_v<S, SpectrumRef>) {
    return describe(spectrum.spec);
  } else {
    return "custom";
  }
}

/// Spectral risk measure: integral over [0,1] of phi(p) q_p, discretised on
/// build_grid(rule, n, policy). `elapsed` covers grid construction and the
/// weighted sum.
template <WeightFunction S, LossModel M>
SRMEstimate srm(const S& spectrum, const M& model, QuadratureRule rule, std::size_t n,
                EndpointPolicy policy = kDefaultEndpointPolicy) {
  if constexpr (!std::is_same_v<S, SpectrumRef> && !std::is_same_v<S, ExponentialSpectrum> &&
                !std::is_same_v<S, ESSpectrum>) {
    // Built-in spectra are admissible by construction; anything else gets a
    // coarse check.
    if (!validate_spectrum(spectrum, 1001, 1e-2).all_ok()) {
      throw std::invalid_argument("srm: weight function is not an admissible spectrum");
    }
  }
  const auto start = std::chrono::steady_clock::now();
  const Grid grid = build_grid(rule, n, policy);
  const double value =
      integrate_weighted(spectrum, [&model](double p) { return model.quantile(p); }, grid);
  const auto stop = std::chrono::steady_clock::now();
  return {value, spectrum_label(spectrum), rule, n, policy, stop - start};
}

template <LossModel M>
SRMEstimate srm(const SpectrumSpec& spectrum, const M& model, QuadratureRule rule, std::size_t n,
                EndpointPolicy policy = kDefaultEndpointPolicy) {
  return srm(SpectrumRef{spectrum}, model, rule, n, policy);
}

namespace detail {

struct ReferenceIntegral {
  double value;
  double error;
};

template <typename M>
concept HasUpperTailQuantile = requires(const M& m, double t) {
  { m.upper_tail_quantile(t) } -> std::convertible_to<double>;
};

// Quantile at 1 - t without forming 1 - t when the model can avoid it.
template <LossModel M>
double quantile_from_top(const M& model, double t) {
  if constexpr (HasUpperTailQuantile<M>) {
    return model.upper_tail_quantile(t);
  } else {
    return model.quantile(1.0 - t);
  }
}

// Adaptive Gauss-Kronrod over [eps, 1/2] and [1/2, 1 - eps], each half
// mapped to a log-distance-from-the-endpoint variable so the quantile
// singularities become smooth, slowly varying integrands.
template <LossModel M>
ReferenceIntegral exponential_srm_integral(double a, const M& model, double eps) {
  const ExponentialSpectrum spectrum(a);
  auto lower = [&](double u) {
    const double p = std::exp(u);
    return spectrum.weight(p) * model.quantile(p) * p;
  };
  auto upper = [&](double u) {
    const double t = std::exp(u);
    return spectrum.weight(1.0 - t) * quantile_from_top(model, t) * t;
  };

  using Rule = boost::math::quadrature::gauss_kronrod<double, 61>;
  const double lo = std::log(eps);
  const double hi = std::log(0.5);
  double lower_error = 0.0;
  double upper_error = 0.0;
  const double value = Rule::integrate(lower, lo, hi, 15, 1e-13, &lower_error) +
                       Rule::integrate(upper, lo, hi, 15, 1e-13, &upper_error);
  return {value, lower_error + upper_error};
}

}  // namespace detail

/// High-accuracy value of the exponential SRM, for use as an oracle.
///
/// The domain is truncated to [1e-14, 1 - 1e-14]; the result is accepted
/// only if the quadrature error estimate is below 1e-9 and halving the
/// truncation changes the value by less than 1e-10.
template <LossModel M>
double reference_srm(double a, const M& model) {
  constexpr double eps = 1e-14;
  const auto full = detail::exponential_srm_integral(a, model, eps);
  if (!(full.error <= 1e-9) || !std::isfinite(full.value)) {
    throw std::runtime_error("reference_srm: error estimate " + std::to_string(full.error) +
                             " exceeds 1e-9 for a = " + std::to_string(a));
  }
  const auto halved = detail::exponential_srm_integral(a, model, eps / 2.0);
  if (!(std::fabs(halved.value - full.value) < 1e-10)) {
    throw std::runtime_error("reference_srm: tail truncation not negligible for a = " +
                             std::to_string(a));
  }
  return full.value;
}

/// Value-at-Risk: the alpha quantile of the loss distribution.
template <LossModel M>
double var(const M& model, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::domain_error("var: alpha must lie in (0,1), got " + std::to_string(alpha));
  }
  return model.quantile(alpha);
}

enum class EsMode { closed_form, quadrature };

/// Expected Shortfall. Closed form exists for normal models only; the
/// quadrature mode integrates the ES step spectrum on the standard grid.
template <LossModel M>
double es(const M& model, double alpha, EsMode mode, std::size_t n = 100001,
          QuadratureRule rule = QuadratureRule::simpson,
          EndpointPolicy policy = kDefaultEndpointPolicy) {
  const ESSpectrum spectrum(alpha);
  if (mode == EsMode::quadrature) return srm(spectrum, model, rule, n, policy).value;
  if constexpr (std::is_same_v<M, NormalLossModel>) {
    return model.mu() + model.sigma() * normal_pdf(normal_quantile(alpha)) / (1.0 - alpha);
  } else {
    throw std::invalid_argument("es: closed form is only available for normal loss models");
  }
}

namespace detail {

inline void require_lpm_order(double k) {
  if (!(k >= 0.0) || !std::isfinite(k)) {
    throw std::domain_error("lpm: order k must be finite and >= 0, got " + std::to_string(k));
  }
}

// max(0, target - r)^k with 0^0 = 0, so order 0 counts shortfalls.
inline double shortfall_power(double r, double k, double target) {
  const double d = target - r;
  if (!(d > 0.0)) return 0.0;
  return k == 0.0 ? 1.0 : std::pow(d, k);
}

}  // namespace detail

/// Lower partial moment E[max(0, target - r)^k] of an observed sample.
inline double lpm(std::span<const double> returns, double k, double target) {
  detail::require_lpm_order(k);
  if (returns.empty()) throw std::invalid_argument("lpm: empty sample");
  CompensatedSum total;
  for (double r : returns) total += detail::shortfall_power(r, k, target);
  return total.value() / static_cast<double>(returns.size());
}

/// Monte Carlo lower partial moment of returns distributed as `model`.
inline double lpm(const NormalLossModel& model, double k, double target, std::size_t n_draws,
                  std::uint64_t seed) {
  detail::require_lpm_order(k);
  if (n_draws == 0) throw std::invalid_argument("lpm: n_draws must be >= 1");
  UniformStream uniforms(seed);
  CompensatedSum total;
  for (std::size_t i = 0; i < n_draws; ++i) {
    total += detail::shortfall_power(model.quantile(uniforms.next()), k, target);
  }
  return total.value() / static_cast<double>(n_draws);
}

}  // namespace esrm
