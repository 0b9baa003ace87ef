#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <variant>

#include "esrm/quadrature.hpp"
#include "esrm/summation.hpp"

namespace esrm {

namespace detail {

inline void require_probability(double p, const char* who) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::domain_error(std::string(who) + ": p must lie in [0,1], got " + std::to_string(p));
  }
}

inline void require_positive_ara(double a, const char* who) {
  if (!(a > 0.0) || !std::isfinite(a)) {
    throw std::domain_error(std::string(who) + ": risk aversion a must be finite and > 0, got " +
                            std::to_string(a));
  }
}

}  // namespace detail

/// lambda = a / (1 - e^{-a}), the constant that makes lambda e^{-a(1-p)}
/// integrate to one over [0,1].
inline double normalization_constant(double a) {
  detail::require_positive_ara(a, "normalization_constant");
  return a / -std::expm1(-a);
}

/// Exponential risk-aversion weight lambda e^{-a(1-p)}, evaluated in log
/// space so large a cannot overflow.
inline double exp_weight(double p, double a) {
  detail::require_probability(p, "exp_weight");
  detail::require_positive_ara(a, "exp_weight");
  const double log_lambda = std::log(a) - std::log(-std::expm1(-a));
  return std::exp(log_lambda - a * (1.0 - p));
}

/// Expected Shortfall weight: 1/(1-alpha) on the closed tail [alpha, 1].
inline double es_weight(double p, double alpha) {
  detail::require_probability(p, "es_weight");
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::domain_error("es_weight: alpha must lie in (0,1), got " + std::to_string(alpha));
  }
  return p >= alpha ? 1.0 / (1.0 - alpha) : 0.0;
}

/// Spectrum generated by exponential utility with absolute risk aversion a.
class ExponentialSpectrum {
 public:
  explicit ExponentialSpectrum(double a) : a_(a) {
    detail::require_positive_ara(a, "ExponentialSpectrum");
    log_lambda_ = std::log(a) - std::log(-std::expm1(-a));
  }

  double a() const noexcept { return a_; }
  double lambda() const noexcept { return std::exp(log_lambda_); }

  double weight(double p) const {
    detail::require_probability(p, "ExponentialSpectrum::weight");
    return std::exp(log_lambda_ - a_ * (1.0 - p));
  }

  friend bool operator==(const ExponentialSpectrum&, const ExponentialSpectrum&) = default;

 private:
  double a_;
  double log_lambda_;
};

class ESSpectrum {
 public:
  explicit ESSpectrum(double alpha) : alpha_(alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
      throw std::domain_error("ESSpectrum: alpha must lie in (0,1), got " + std::to_string(alpha));
    }
  }

  double alpha() const noexcept { return alpha_; }
  double weight(double p) const { return es_weight(p, alpha_); }

  friend bool operator==(const ESSpectrum&, const ESSpectrum&) = default;

 private:
  double alpha_;
};

/// Adapts a plain callable double(double) to the WeightFunction interface.
template <typename F>
class FunctionSpectrum {
 public:
  explicit FunctionSpectrum(F f) : f_(std::move(f)) {}
  double weight(double p) const { return f_(p); }

 private:
  F f_;
};

/// The spectra the command line and bootstrap can name at run time.
using SpectrumSpec = std::variant<ExponentialSpectrum, ESSpectrum>;

inline double weight(const SpectrumSpec& spec, double p) {
  return std::visit([p](const auto& s) { return s.weight(p); }, spec);
}

/// Adapter so a SpectrumSpec satisfies WeightFunction.
struct SpectrumRef {
  const SpectrumSpec& spec;
  double weight(double p) const { return esrm::weight(spec, p); }
};

/// Shortest text that reads back as exactly `x`.
inline std::string format_real(double x) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, end);
}

/// "exp:<a>" or "es:<alpha>".
inline std::string describe(const SpectrumSpec& spec) {
  if (const auto* e = std::get_if<ExponentialSpectrum>(&spec)) return "exp:" + format_real(e->a());
  return "es:" + format_real(std::get<ESSpectrum>(spec).alpha());
}

inline double parse_real(std::string_view text, const char* what) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || text.empty()) {
    throw std::invalid_argument(std::string("cannot parse ") + what + " from '" +
                                std::string(text) + "'");
  }
  return value;
}

inline SpectrumSpec parse_spectrum(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw std::invalid_argument("spectrum must be exp:<a> or es:<alpha>, got '" +
                                std::string(text) + "'");
  }
  const auto kind = text.substr(0, colon);
  const double value = parse_real(text.substr(colon + 1), "spectrum parameter");
  if (kind == "exp") return ExponentialSpectrum(value);
  if (kind == "es") return ESSpectrum(value);
  throw std::invalid_argument("unknown spectrum kind '" + std::string(kind) +
                              "' (expected exp or es)");
}

/// Outcome of the admissibility checks on a weight function.
struct SpectrumReport {
  bool positivity_ok = false;
  double normalisation_value = 0.0;
  bool increasing_ok = false;
  double tolerance = 0.0;

  bool normalisation_ok() const noexcept {
    return std::fabs(normalisation_value - 1.0) <= tolerance;
  }
  bool all_ok() const noexcept { return positivity_ok && increasing_ok && normalisation_ok(); }
};

/// Checks positivity, normalisation (Simpson over the closed uniform grid)
/// and monotonicity of `spectrum` on grid_size points. Failed checks are
/// reported, not thrown; grid_size must be odd and >= 3.
template <WeightFunction S>
SpectrumReport validate_spectrum(const S& spectrum, std::size_t grid_size, double tolerance) {
  const auto w = closed_newton_cotes_weights(QuadratureRule::simpson, grid_size);
  const double h = 1.0 / static_cast<double>(grid_size - 1);

  SpectrumReport report;
  report.tolerance = tolerance;
  report.positivity_ok = true;
  report.increasing_ok = true;
  CompensatedSum integral;
  double previous = 0.0;
  for (std::size_t j = 0; j < grid_size; ++j) {
    const double p = j + 1 == grid_size ? 1.0 : static_cast<double>(j) * h;
    const double phi = spectrum.weight(p);
    if (!(phi >= 0.0)) report.positivity_ok = false;
    if (j > 0 && !(phi >= previous)) report.increasing_ok = false;
    integral += w[j] * phi;
    previous = phi;
  }
  report.normalisation_value = integral.value();
  return report;
}

inline SpectrumReport validate_spectrum(const SpectrumSpec& spec, std::size_t grid_size,
                                        double tolerance) {
  return validate_spectrum(SpectrumRef{spec}, grid_size, tolerance);
}

/// Exponential utility U(x) = -e^{-ax}.
inline double utility(double x, double a) {
  detail::require_positive_ara(a, "utility");
  return -std::exp(-a * x);
}

/// -U''/U' for exponential utility: the constant a.
inline double absolute_risk_aversion(double a) {
  detail::require_positive_ara(a, "absolute_risk_aversion");
  return a;
}

/// -x U''/U' for exponential utility: x a.
inline double relative_risk_aversion(double x, double a) {
  detail::require_positive_ara(a, "relative_risk_aversion");
  return x * a;
}

}  // namespace esrm
