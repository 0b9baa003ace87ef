#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "esrm/esrm.hpp"
#include "table.hpp"

namespace esrm::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,  // validate: a spectrum property does not hold
  kExitUsage = 2,        // bad flags or out-of-domain flag values
  kExitNumeric = 3,      // failure while computing
};

/// Bad input detected before any computation starts.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raw flag values as given on the command line.
struct RunConfig {
  std::string dist = "normal:0,1";
  std::string spectrum = "exp:5";
  std::string rule = "simpson";
  std::string rules = "trapezoid,simpson,niederreiter,weyl";
  std::size_t n = 10001;
  std::string n_list = "1001,10001,100001";
  std::string sweep_a;
  std::string mode = "quadrature";
  std::string endpoint = "truncate";
  std::size_t b = 1000;
  double confidence = 0.90;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::optional<double> tolerance;
  std::size_t points = 101;
  std::string format = "csv";
  std::string out;
};

namespace detail {

inline std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    parts.emplace_back(text.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

template <typename F>
auto as_usage(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  } catch (const std::domain_error& e) {
    throw UsageError(e.what());
  }
}

inline std::size_t parse_count(std::string_view text) {
  const double v = parse_real(text, "integer");
  if (!(v >= 0.0) || v != std::floor(v) || v > 9.007199254740992e15) {
    throw std::invalid_argument("expected a non-negative integer, got '" + std::string(text) + "'");
  }
  return static_cast<std::size_t>(v);
}

}  // namespace detail

/// "normal:<mu>,<sigma>"
inline NormalLossModel parse_dist(std::string_view text) {
  return detail::as_usage([&] {
    constexpr std::string_view prefix = "normal:";
    if (text.substr(0, prefix.size()) != prefix) {
      throw std::invalid_argument("distribution must be normal:<mu>,<sigma>, got '" +
                                  std::string(text) + "'");
    }
    const auto parts = detail::split(text.substr(prefix.size()), ',');
    if (parts.size() != 2) {
      throw std::invalid_argument("distribution must be normal:<mu>,<sigma>, got '" +
                                  std::string(text) + "'");
    }
    return NormalLossModel(parse_real(parts[0], "mu"), parse_real(parts[1], "sigma"));
  });
}

/// "start:stop:count", count >= 1 values evenly spaced from start to stop.
inline std::vector<double> parse_sweep(std::string_view text) {
  return detail::as_usage([&] {
    const auto parts = detail::split(text, ':');
    if (parts.size() != 3) {
      throw std::invalid_argument("sweep must be start:stop:count, got '" + std::string(text) + "'");
    }
    const double start = parse_real(parts[0], "sweep start");
    const double stop = parse_real(parts[1], "sweep stop");
    const std::size_t count = detail::parse_count(parts[2]);
    if (count == 0) throw std::invalid_argument("sweep count must be >= 1");
    std::vector<double> values(count);
    for (std::size_t i = 0; i < count; ++i) {
      values[i] = count == 1 ? start
                             : start + (stop - start) * static_cast<double>(i) /
                                           static_cast<double>(count - 1);
    }
    if (count > 1) values.back() = stop;
    return values;
  });
}

/// Comma-separated node counts; an item "lo..hi[:count]" expands to count
/// (default 40) roughly log-spaced odd integers from lo to hi.
inline std::vector<std::size_t> parse_n_list(std::string_view text) {
  return detail::as_usage([&] {
    std::vector<std::size_t> out;
    for (const auto& item : detail::split(text, ',')) {
      const auto dots = item.find("..");
      if (dots == std::string::npos) {
        out.push_back(detail::parse_count(item));
        continue;
      }
      std::string rest = item.substr(dots + 2);
      std::size_t count = 40;
      if (const auto colon = rest.find(':'); colon != std::string::npos) {
        count = detail::parse_count(rest.substr(colon + 1));
        rest = rest.substr(0, colon);
      }
      const auto lo = detail::parse_count(item.substr(0, dots));
      const auto hi = detail::parse_count(rest);
      if (lo < 3 || hi < lo || count < 2) {
        throw std::invalid_argument("bad n range '" + item + "'");
      }
      const double ratio = std::log(static_cast<double>(hi) / static_cast<double>(lo));
      for (std::size_t i = 0; i < count; ++i) {
        auto v = static_cast<std::size_t>(std::llround(
            static_cast<double>(lo) * std::exp(ratio * static_cast<double>(i) /
                                               static_cast<double>(count - 1))));
        if (v % 2 == 0) ++v;
        if (out.empty() || out.back() != v) out.push_back(v);
      }
    }
    if (out.empty()) throw std::invalid_argument("empty n list");
    return out;
  });
}

inline std::vector<QuadratureRule> parse_rules(std::string_view text) {
  return detail::as_usage([&] {
    std::vector<QuadratureRule> rules;
    for (const auto& name : detail::split(text, ',')) rules.push_back(parse_rule(name));
    return rules;
  });
}

inline EndpointPolicy parse_endpoint(std::string_view text) {
  if (text == "truncate") return EndpointPolicy::truncate_domain;
  if (text == "clip-half") return EndpointPolicy::clip_half_spacing;
  throw UsageError("endpoint policy must be truncate or clip-half, got '" + std::string(text) + "'");
}

inline std::string_view to_string(EndpointPolicy policy) {
  return policy == EndpointPolicy::truncate_domain ? "truncate" : "clip-half";
}

inline void check_grid_size(QuadratureRule rule, std::size_t n) {
  if (n < 3) throw UsageError("--n must be >= 3, got " + std::to_string(n));
  if (rule == QuadratureRule::simpson && n % 2 == 0) {
    throw UsageError("simpson requires an odd node count, got " + std::to_string(n));
  }
}

inline SpectrumSpec parse_spectrum_flag(std::string_view text) {
  return detail::as_usage([&] { return parse_spectrum(text); });
}

inline double seconds(std::chrono::duration<double> d) { return d.count(); }

inline Table cmd_compute(const RunConfig& config) {
  const auto model = parse_dist(config.dist);
  const auto spectrum = parse_spectrum_flag(config.spectrum);
  const auto rule = detail::as_usage([&] { return parse_rule(config.rule); });
  const auto policy = parse_endpoint(config.endpoint);
  if (config.mode != "quadrature" && config.mode != "closed-form") {
    throw UsageError("--mode must be quadrature or closed-form, got '" + config.mode + "'");
  }
  const bool closed_form = config.mode == "closed-form";

  Table table;
  if (const auto* es_spectrum = std::get_if<ESSpectrum>(&spectrum)) {
    if (!config.sweep_a.empty()) throw UsageError("--sweep-a needs an exp spectrum");
    if (!closed_form) check_grid_size(rule, config.n);
    table.header = {"alpha", "es_value", "var_value", "mode", "rule", "n",
                    "mu", "sigma", "endpoint", "elapsed_seconds"};
    const double alpha = es_spectrum->alpha();
    const auto start = std::chrono::steady_clock::now();
    const double value = es(model, alpha, closed_form ? EsMode::closed_form : EsMode::quadrature,
                            config.n, rule, policy);
    const auto elapsed = std::chrono::steady_clock::now() - start;
    table.rows.push_back({alpha, value, var(model, alpha),
                          std::string(closed_form ? "closed_form" : "quadrature"),
                          std::string(closed_form ? "" : esrm::to_string(rule)),
                          static_cast<std::uint64_t>(closed_form ? 0 : config.n), model.mu(),
                          model.sigma(), std::string(to_string(policy)),
                          seconds(elapsed)});
    return table;
  }

  if (closed_form) throw UsageError("--mode closed-form is only available for es spectra");
  check_grid_size(rule, config.n);
  std::vector<double> as{std::get<ExponentialSpectrum>(spectrum).a()};
  if (!config.sweep_a.empty()) {
    as = parse_sweep(config.sweep_a);
    for (double a : as) {
      if (!(a > 0.0)) throw UsageError("--sweep-a values must be > 0");
    }
  }
  table.header = {"a", "srm_value", "rule", "n", "mu", "sigma", "endpoint", "elapsed_seconds"};
  for (double a : as) {
    const auto estimate = srm(ExponentialSpectrum(a), model, rule, config.n, policy);
    table.rows.push_back({a, estimate.value, std::string(esrm::to_string(rule)),
                          static_cast<std::uint64_t>(config.n), model.mu(), model.sigma(),
                          std::string(to_string(policy)), seconds(estimate.elapsed)});
  }
  return table;
}

inline Table cmd_converge(const RunConfig& config) {
  const auto model = parse_dist(config.dist);
  const auto spectrum = parse_spectrum_flag(config.spectrum);
  const auto rules = parse_rules(config.rules);
  const auto ns = parse_n_list(config.n_list);
  const auto policy = parse_endpoint(config.endpoint);
  for (auto rule : rules) {
    for (auto n : ns) check_grid_size(rule, n);
  }

  double reference = 0.0;
  if (const auto* e = std::get_if<ExponentialSpectrum>(&spectrum)) {
    reference = reference_srm(e->a(), model);
  } else {
    reference = es(model, std::get<ESSpectrum>(spectrum).alpha(), EsMode::closed_form);
  }

  Table table;
  table.header = {"rule", "n", "estimate", "reference", "pct_error", "elapsed_seconds",
                  "spectrum", "mu", "sigma", "endpoint"};
  for (auto rule : rules) {
    for (auto n : ns) {
      const auto estimate = srm(spectrum, model, rule, n, policy);
      table.rows.push_back({std::string(esrm::to_string(rule)), static_cast<std::uint64_t>(n),
                            estimate.value, reference,
                            100.0 * (estimate.value - reference) / reference,
                            seconds(estimate.elapsed), describe(spectrum), model.mu(),
                            model.sigma(), std::string(to_string(policy))});
    }
  }
  return table;
}

inline BootstrapConfig bootstrap_config(const RunConfig& config) {
  BootstrapConfig bc;
  bc.model = parse_dist(config.dist);
  bc.spectrum = parse_spectrum_flag(config.spectrum);
  bc.rule = detail::as_usage([&] { return parse_rule(config.rule); });
  bc.policy = parse_endpoint(config.endpoint);
  bc.n = config.n;
  bc.b = config.b;
  bc.confidence = config.confidence;
  bc.master_seed = config.seed;
  bc.workers = config.workers;
  detail::as_usage([&] {
    bc.validate();
    return 0;
  });
  return bc;
}

inline Table cmd_ci(const RunConfig& config, std::ostream* timing = nullptr) {
  const auto bc = bootstrap_config(config);
  const auto result = bootstrap_ci(bc);
  if (timing) {
    *timing << "elapsed_seconds=" << format_real(seconds(result.elapsed)) << '\n';
  }
  Table table;
  table.header = {"spectrum", "mu", "sigma", "rule", "n", "b",
                  "confidence", "seed", "endpoint", "estimates_mean", "lower", "upper",
                  "std_lower", "std_upper"};
  table.rows.push_back({describe(bc.spectrum), bc.model.mu(), bc.model.sigma(),
                        std::string(esrm::to_string(bc.rule)), static_cast<std::uint64_t>(bc.n),
                        static_cast<std::uint64_t>(bc.b), bc.confidence, bc.master_seed,
                        std::string(to_string(bc.policy)), result.estimates_mean, result.lower,
                        result.upper, result.std_lower, result.std_upper});
  return table;
}

/// Returns the report table and whether every check passed.
inline std::pair<Table, bool> cmd_validate(const RunConfig& config) {
  const auto spectrum = parse_spectrum_flag(config.spectrum);
  if (config.n < 3 || config.n % 2 == 0) {
    throw UsageError("--n (grid size) must be odd and >= 3, got " + std::to_string(config.n));
  }
  // The ES step cannot be integrated to better than about one grid spacing.
  const double tolerance = config.tolerance.value_or(
      std::holds_alternative<ESSpectrum>(spectrum) ? 1e-3 : 1e-8);
  if (!(tolerance > 0.0)) throw UsageError("--tolerance must be > 0");

  const auto report = validate_spectrum(spectrum, config.n, tolerance);
  Table table;
  table.header = {"spectrum", "grid_size", "tolerance", "positivity_ok",
                  "normalisation_value", "normalisation_ok", "increasing_ok"};
  table.rows.push_back({describe(spectrum), static_cast<std::uint64_t>(config.n), tolerance,
                        report.positivity_ok, report.normalisation_value,
                        report.normalisation_ok(), report.increasing_ok});
  return {table, report.all_ok()};
}

/// Weight curve p -> phi(p) on n evenly spaced points of [0,1].
inline Table cmd_weights(const RunConfig& config) {
  const auto spectrum = parse_spectrum_flag(config.spectrum);
  const std::size_t n = config.points;
  if (n < 2) throw UsageError("--n must be >= 2");
  Table table;
  table.header = {"p", "weight", "spectrum"};
  const auto label = describe(spectrum);
  for (std::size_t j = 0; j < n; ++j) {
    const double p = j + 1 == n ? 1.0 : static_cast<double>(j) / static_cast<double>(n - 1);
    table.rows.push_back({p, weight(spectrum, p), label});
  }
  return table;
}

inline int emit(const Table& table, const RunConfig& config, std::ostream& out) {
  std::ofstream file;
  std::ostream* os = &out;
  if (!config.out.empty()) {
    file.open(config.out, std::ios::binary | std::ios::trunc);
    if (!file) throw std::runtime_error("cannot open output file '" + config.out + "'");
    os = &file;
  }
  if (config.format == "json") {
    write_json(*os, table);
  } else {
    write_csv(*os, table);
  }
  os->flush();
  if (!*os) throw std::runtime_error("failed writing output");
  return kExitOk;
}

/// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig config;
  CLI::App app{"Exponential spectral risk measures: compute, converge, ci, validate, weights"};
  app.require_subcommand(1);

  auto add_format = [&](CLI::App* sub) {
    sub->add_option("--format", config.format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--out", config.out, "Output path (default standard output)");
  };
  auto add_model = [&](CLI::App* sub) {
    sub->add_option("--dist", config.dist, "Loss distribution normal:<mu>,<sigma>");
    sub->add_option("--spectrum", config.spectrum, "exp:<a> or es:<alpha>");
  };

  auto* compute = app.add_subcommand("compute", "Spectral risk measure, ES or VaR");
  add_model(compute);
  compute->add_option("--rule", config.rule, "trapezoid|simpson|niederreiter|weyl");
  compute->add_option("--n", config.n, "Quadrature node count");
  compute->add_option("--sweep-a", config.sweep_a, "start:stop:count risk-aversion sweep");
  compute->add_option("--mode", config.mode, "quadrature or closed-form (es only)");
  compute->add_option("--endpoint", config.endpoint, "truncate or clip-half");
  add_format(compute);

  auto* converge = app.add_subcommand("converge", "Error and timing against a reference value");
  add_model(converge);
  converge->add_option("--rules", config.rules, "Comma-separated quadrature rules");
  converge->add_option("--n-list", config.n_list, "Comma-separated node counts or lo..hi[:count]");
  converge->add_option("--endpoint", config.endpoint, "truncate or clip-half");
  add_format(converge);

  auto* ci = app.add_subcommand("ci", "Parametric bootstrap confidence interval");
  add_model(ci);
  ci->add_option("--rule", config.rule, "Quadrature rule");
  ci->add_option("--n", config.n, "Losses per trial (= node count)");
  ci->add_option("--b", config.b, "Bootstrap trials");
  ci->add_option("--confidence", config.confidence, "Confidence level");
  ci->add_option("--seed", config.seed, "Master seed");
  ci->add_option("--workers", config.workers, "Worker threads");
  ci->add_option("--endpoint", config.endpoint, "truncate or clip-half");
  add_format(ci);

  auto* validate = app.add_subcommand("validate", "Check spectrum admissibility");
  validate->add_option("--spectrum", config.spectrum, "exp:<a> or es:<alpha>");
  validate->add_option("--n", config.n, "Grid size (odd)");
  validate->add_option("--tolerance", config.tolerance, "Normalisation tolerance");
  add_format(validate);

  auto* weights = app.add_subcommand("weights", "Weight curve p vs phi(p)");
  weights->add_option("--spectrum", config.spectrum, "exp:<a> or es:<alpha>");
  weights->add_option("--n", config.points, "Number of points");
  add_format(weights);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (compute->parsed()) return emit(cmd_compute(config), config, out);
    if (converge->parsed()) return emit(cmd_converge(config), config, out);
    if (ci->parsed()) return emit(cmd_ci(config, &err), config, out);
    if (weights->parsed()) return emit(cmd_weights(config), config, out);
    const auto [table, passed] = cmd_validate(config);
    emit(table, config, out);
    return passed ? kExitOk : kExitCheckFailed;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumeric;
  }
}

}  // namespace esrm::cli
