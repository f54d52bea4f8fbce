#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gibbs/errors.hpp"
#include "gibbs/parallel.hpp"
#include "gibbs/rng.hpp"

namespace gibbs {

// The analytic temperature model. For a d-dimensional isotropic Gaussian task
// the loss-minimizing inverse temperature is approximated by the maximizer of
//
//   xi(beta) = e^{a^2/2} beta c^2 / sqrt(e^{2 a^2} - 4 e^{a^2} beta^2 c^4),
//   c = 1 / (pi sqrt(d - 2)),  a = beta c,
//
// whose stationary point is beta* = pi sqrt(d - 2). Everything is evaluated in
// log space; e^{2a^2} overflows a double once a^2 > ~354.

/// pi * sqrt(d - 2); throws DomainError for d < 2.
inline double beta_star_closed_form(double d) {
  if (!(d >= 2.0)) throw DomainError("beta* is defined for d >= 2, got d=" + std::to_string(d));
  return std::numbers::pi * std::sqrt(d - 2.0);
}

namespace detail {
inline double xi_scale(double d) {
  if (!(d >= 3.0)) throw DomainError("the xi model needs d >= 3, got d=" + std::to_string(d));
  return 1.0 / (std::numbers::pi * std::sqrt(d - 2.0));
}
}  // namespace detail

/// log xi(beta) for beta > 0, d >= 3.
inline double log_xi(double beta, double d) {
  const double c = detail::xi_scale(d);
  if (!(beta > 0.0) || !std::isfinite(beta))
    throw DomainError("xi needs a finite beta > 0", beta);
  const double a2 = (beta * c) * (beta * c);
  const double log_num = 0.5 * a2 + std::log(beta) + 2.0 * std::log(c);
  // e^{2a^2} - 4 e^{a^2} beta^2 c^4 = e^{2a^2} (1 - 4 beta^2 c^4 e^{-a^2})
  const double deficit = 4.0 * beta * beta * c * c * c * c * std::exp(-a2);
  if (!(deficit < 1.0))
    throw DomainError("xi radicand is not positive at beta=" + std::to_string(beta), beta);
  const double log_radicand = 2.0 * a2 + std::log1p(-deficit);
  return log_num - 0.5 * log_radicand;
}

inline double xi(double beta, double d) { return std::exp(log_xi(beta, d)); }

enum class Spacing { log, linear };

/// A grid of beta values. Defaults cover every beta* for d up to ~10^5.
struct GridSpec {
  double min = 0.1;
  double max = 1000.0;
  std::size_t points = 400;
  Spacing spacing = Spacing::log;

  void validate() const {
    if (points < 2) throw ConfigError("beta grid needs at least 2 points");
    if (!(min < max)) throw ConfigError("beta grid needs min < max");
    if (spacing == Spacing::log && !(min > 0.0)) throw ConfigError("log-spaced beta grid needs min > 0");
    if (!(min >= 0.0)) throw ConfigError("beta grid needs min >= 0");
  }

  std::vector<double> values() const {
    validate();
    std::vector<double> v(points);
    const double last = static_cast<double>(points - 1);
    for (std::size_t k = 0; k < points; ++k) {
      const double t = static_cast<double>(k) / last;
      v[k] = spacing == Spacing::log ? min * std::pow(max / min, t) : min + (max - min) * t;
    }
    v.front() = min;
    v.back() = max;
    return v;
  }

  /// Spacing between neighbours relative to beta (constant for log grids).
  double relative_step(double beta) const {
    const double last = static_cast<double>(points - 1);
    if (spacing == Spacing::log) return std::pow(max / min, 1.0 / last) - 1.0;
    return (max - min) / last / beta;
  }
};

struct BetaPrediction {
  double d = 0;
  double beta_closed = 0;
  double beta_grid = 0;
  GridSpec grid;
  std::size_t skipped_points = 0;  // grid points outside xi's domain
  bool degenerate = false;         // d == 2: closed form is 0, xi undefined
};

/// Closed form alongside the grid argmax of xi (ties resolve to the lowest beta).
inline BetaPrediction beta_star_grid(double d, const GridSpec& grid = {}) {
  BetaPrediction p;
  p.d = d;
  p.grid = grid;
  p.beta_closed = beta_star_closed_form(d);
  const auto betas = grid.values();
  if (d < 3.0) {
    p.degenerate = true;
    p.beta_grid = betas.front();
    return p;
  }
  double best = -std::numeric_limits<double>::infinity();
  bool found = false;
  for (double b : betas) {
    if (!(b > 0.0)) {
      ++p.skipped_points;
      continue;
    }
    double v;
    try {
      v = log_xi(b, d);
    } catch (const DomainError&) {
      ++p.skipped_points;
      continue;
    }
    if (!found || v > best) {
      best = v;
      p.beta_grid = b;
      found = true;
    }
  }
  if (!found) throw DomainError("no grid point lies in the domain of xi");
  return p;
}

/// Mean and variance of one classifier's contribution Y under the CLT model,
/// parameterized by beta_tilde = beta / 2.
struct CltParams {
  double d = 0;
  double beta_tilde = 0;
  double mu = 0;
  double sigma2 = 0;
  double log_snr = 0;  // log(mu / sigma), kept separately to survive overflow of sigma2

  double snr() const { return std::exp(log_snr); }
};

inline CltParams clt_params(double beta_tilde, double d) {
  const double c = detail::xi_scale(d);
  if (!(beta_tilde >= 0.0) || !std::isfinite(beta_tilde))
    throw DomainError("beta_tilde must be finite and >= 0", 2.0 * beta_tilde);
  CltParams p{d, beta_tilde, 0.0, 1.0, -std::numeric_limits<double>::infinity()};
  if (beta_tilde == 0.0) return p;
  const double k = 2.0 * c;                  // 2 / (pi sqrt(d-2))
  const double half_exp = 0.5 * (beta_tilde * k) * (beta_tilde * k);
  const double log_mu = half_exp + std::log(beta_tilde) + 2.0 * std::log(k);
  const double log_second = 8.0 * beta_tilde * beta_tilde * c * c;  // log E[Y^2]
  const double ratio = 2.0 * log_mu - log_second;                   // log(mu^2 / E[Y^2])
  if (!(ratio < 0.0))
    throw DomainError("CLT variance degenerates at beta=" + std::to_string(2.0 * beta_tilde), 2.0 * beta_tilde);
  const double log_sigma2 = log_second + std::log(-std::expm1(ratio));
  p.mu = std::exp(log_mu);
  p.sigma2 = std::exp(log_sigma2);
  p.log_snr = log_mu - 0.5 * log_sigma2;
  return p;
}

/// Standard normal CDF through erfc (absolute error at the level of double rounding).
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// 1 - Phi(sqrt(n) mu / sigma) at beta_tilde = beta / 2: a monotone proxy for the
/// expected ensemble loss of n classifiers.
inline double clt_loss_proxy(double beta, double d, double n) {
  if (!(n >= 1.0)) throw DomainError("clt_loss_proxy needs n >= 1");
  const CltParams p = clt_params(0.5 * beta, d);
  const double z = std::sqrt(n) * p.snr();
  return 0.5 * std::erfc(z / std::numbers::sqrt2);
}

// ---------------------------------------------------------------------------
// Monte-Carlo oracles for the approximations behind the model.

struct MonteCarloEstimate {
  double estimate = 0;
  double standard_error = 0;
};

/// E_x[sign(u.x) sign(v.x)] for x ~ N(0, I); the exact value is
/// (2/pi) arcsin(cos angle(u, v)).
inline MonteCarloEstimate grothendieck_estimate(std::span<const double> u, std::span<const double> v,
                                                std::size_t samples, SeededStream stream,
                                                unsigned threads = 1) {
  if (u.size() != v.size() || u.empty()) throw DimensionError("grothendieck_estimate: u and v must share a dimension");
  auto nonzero = [](std::span<const double> x) {
    for (double e : x)
      if (e != 0.0) return true;
    return false;
  };
  if (!nonzero(u) || !nonzero(v)) throw std::invalid_argument("grothendieck_estimate: zero vector");
  if (samples < 1000) throw std::invalid_argument("grothendieck_estimate: needs at least 1000 samples");

  constexpr std::size_t chunk = 4096;
  const std::size_t tasks = (samples + chunk - 1) / chunk;
  std::vector<std::int64_t> agree(tasks, 0);
  parallel_for(tasks, threads, [&](std::size_t t) {
    std::vector<double> x(u.size());
    const std::size_t end = std::min(samples, (t + 1) * chunk);
    std::int64_t acc = 0;
    for (std::size_t s = t * chunk; s < end; ++s) {
      fill_gaussian_row(stream, s, x);
      double du = 0.0, dv = 0.0;
      for (std::size_t k = 0; k < x.size(); ++k) {
        du += u[k] * x[k];
        dv += v[k] * x[k];
      }
      acc += sign_label(du) * sign_label(dv);
    }
    agree[t] = acc;
  });
  std::int64_t total = 0;
  for (auto a : agree) total += a;
  const double S = static_cast<double>(samples);
  const double m = static_cast<double>(total) / S;
  const double var = std::max(0.0, (1.0 - m * m) * S / (S - 1.0));
  return {m, std::sqrt(var / S)};
}

struct InverseNormStats {
  std::size_t d = 0;
  std::size_t samples = 0;
  double mean_inv_norm = 0;     // E[1/|w|]
  double mean_inv_sq_norm = 0;  // E[1/|w|^2], exactly 1/(d-2)
  double mean_fluctuation = 0;  // E| 1/|w| - E[1/|w|] |
  double stderr_inv_norm = 0;
  double stderr_inv_sq_norm = 0;

  double fluctuation_ratio() const { return mean_fluctuation / mean_inv_norm; }
};

inline InverseNormStats inverse_norm_stats(std::size_t d, std::size_t samples, SeededStream stream,
                                           unsigned threads = 1) {
  if (d < 3) throw DomainError("inverse_norm_stats needs d >= 3");
  if (samples < 2) throw std::invalid_argument("inverse_norm_stats needs at least 2 samples");
  std::vector<double> inv(samples);
  constexpr std::size_t chunk = 1024;
  parallel_for((samples + chunk - 1) / chunk, threads, [&](std::size_t t) {
    std::vector<double> w(d);
    const std::size_t end = std::min(samples, (t + 1) * chunk);
    for (std::size_t s = t * chunk; s < end; ++s) {
      fill_gaussian_row(stream, s, w);
      double sq = 0.0;
      for (double x : w) sq += x * x;
      inv[s] = 1.0 / std::sqrt(sq);
    }
  });

  const double S = static_cast<double>(samples);
  double sum = 0.0, sum_sq = 0.0;
  for (double x : inv) {
    sum += x;
    sum_sq += x * x;
  }
  InverseNormStats st;
  st.d = d;
  st.samples = samples;
  st.mean_inv_norm = sum / S;
  st.mean_inv_sq_norm = sum_sq / S;
  double var1 = 0.0, var2 = 0.0, fluct = 0.0;
  for (double x : inv) {
    fluct += std::abs(x - st.mean_inv_norm);
    var1 += (x - st.mean_inv_norm) * (x - st.mean_inv_norm);
    var2 += (x * x - st.mean_inv_sq_norm) * (x * x - st.mean_inv_sq_norm);
  }
  st.mean_fluctuation = fluct / S;
  st.stderr_inv_norm = std::sqrt(var1 / (S - 1.0) / S);
  st.stderr_inv_sq_norm = std::sqrt(var2 / (S - 1.0) / S);
  return st;
}

}  // namespace gibbs
