#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "esrm/random.hpp"

namespace esrm {

/// Standard normal density.
inline double normal_pdf(double z) noexcept {
  constexpr double inv_sqrt_2pi = 0.3989422804014326779399460599343818684758586311649;
  return inv_sqrt_2pi * std::exp(-0.5 * z * z);
}

/// Standard normal CDF. erfc keeps full relative accuracy in the lower tail.
inline double normal_cdf(double z) noexcept {
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

namespace detail {

// Wichura's AS241 (PPND16) rational approximations.
inline double as241_quantile(double p) {
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    const double num =
        (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
              6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
            1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
          1.3314166789178437745e+2) * r + 3.3871328727963666080e+0);
    const double den =
        (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
              3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
            5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
          4.2313330701600911252e+1) * r + 1.0);
    return q * num / den;
  }

  double r = std::sqrt(-std::log(q < 0.0 ? p : 1.0 - p));
  double value;
  if (r <= 5.0) {
    r -= 1.6;
    const double num =
        (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
              2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
            3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
          4.63033784615654529590e+0) * r + 1.42343711074968357734e+0);
    const double den =
        (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
              1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
            6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
          2.05319162663775882187e+0) * r + 1.0);
    value = num / den;
  } else {
    r -= 5.0;
    const double num =
        (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
              1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
            2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
          5.46378491116411436990e+0) * r + 6.65790464350110377720e+0);
    const double den =
        (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
              1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
            1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
          5.99832206555887937690e-1) * r + 1.0);
    value = num / den;
  }
  return q < 0.0 ? -value : value;
}

}  // namespace detail

/// Inverse of the standard normal CDF: AS241 polished by one Halley step
/// against the erfc-based CDF.
/// Throws std::domain_error unless 0 < p < 1; callers integrating over [0,1]
/// must keep nodes off the endpoints.
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::domain_error("normal_quantile: probability must lie in (0,1), got " +
                            std::to_string(p));
  }
  double z = detail::as241_quantile(p);
  // One Halley step on whichever tail probability is smaller; 1 - p is exact
  // for p >= 1/2.
  const double residual = p <= 0.5 ? 0.5 * std::erfc(-z / std::numbers::sqrt2) - p
                                   : (1.0 - p) - 0.5 * std::erfc(z / std::numbers::sqrt2);
  const double density = normal_pdf(z);
  if (density > 0.0 && std::isfinite(residual)) {
    const double step = residual / density;
    z -= step / (1.0 + 0.5 * z * step);
  }
  return z;
}

/// Anything that can report a loss quantile at cumulative probability p.
template <typename M>
concept LossModel = requires(const M& m, double p) {
  { m.quantile(p) } -> std::convertible_to<double>;
};

/// Normal loss distribution N(mu, sigma^2). Immutable.
class NormalLossModel {
 public:
  NormalLossModel() = default;
  NormalLossModel(double mu, double sigma) : mu_(mu), sigma_(sigma) {
    if (!std::isfinite(mu)) throw std::domain_error("NormalLossModel: mu must be finite");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
      throw std::domain_error("NormalLossModel: sigma must be finite and > 0");
    }
  }

  static NormalLossModel standard() { return {}; }

  double mu() const noexcept { return mu_; }
  double sigma() const noexcept { return sigma_; }

  double quantile(double p) const { return mu_ + sigma_ * normal_quantile(p); }
  /// quantile(1 - t), accurate for t far below machine epsilon.
  double upper_tail_quantile(double t) const { return mu_ - sigma_ * normal_quantile(t); }
  double cdf(double x) const noexcept { return normal_cdf((x - mu_) / sigma_); }
  double pdf(double x) const noexcept { return normal_pdf((x - mu_) / sigma_) / sigma_; }

  friend bool operator==(const NormalLossModel&, const NormalLossModel&) = default;

 private:
  double mu_ = 0.0;
  double sigma_ = 1.0;
};

/// n i.i.d. draws from `model`, by inverse-CDF transform of a seeded uniform
/// stream. Deterministic in (model, seed, n).
inline std::vector<double> sample(const NormalLossModel& model, std::uint64_t seed,
                                  std::size_t n) {
  if (n == 0) throw std::invalid_argument("sample: n must be >= 1");
  UniformStream uniforms(seed);
  std::vector<double> draws(n);
  for (auto& x : draws) x = model.quantile(uniforms.next());
  return draws;
}

/// Loss distribution given by an ascending array of simulated losses.
class EmpiricalLossModel {
 public:
  /// Sorts `losses` ascending.
  explicit EmpiricalLossModel(std::vector<double> losses) : sorted_(std::move(losses)) {
    if (sorted_.empty()) throw std::invalid_argument("EmpiricalLossModel: needs at least one loss");
    std::sort(sorted_.begin(), sorted_.end());
  }

  std::size_t size() const noexcept { return sorted_.size(); }
  std::span<const double> sorted_losses() const noexcept { return sorted_; }

  /// The (index+1)-th smallest loss.
  double order_statistic(std::size_t index) const {
    if (index >= sorted_.size()) {
      throw std::out_of_range("EmpiricalLossModel: order statistic index " +
                              std::to_string(index) + " out of range for n = " +
                              std::to_string(sorted_.size()));
    }
    return sorted_[index];
  }

  /// Inverse of the empirical CDF: smallest x with F_n(x) >= p.
  double quantile(double p) const {
    if (!(p > 0.0 && p < 1.0)) {
      throw std::domain_error("EmpiricalLossModel::quantile: probability must lie in (0,1)");
    }
    const auto n = static_cast<double>(sorted_.size());
    auto k = static_cast<std::size_t>(std::ceil(n * p));
    return sorted_[std::clamp<std::size_t>(k, 1, sorted_.size()) - 1];
  }

 private:
  std::vector<double> sorted_;
};

inline double empirical_quantile(const EmpiricalLossModel& model, std::size_t grid_index) {
  return model.order_statistic(grid_index);
}

}  // namespace esrm
