#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>

namespace cmc {

using Rng = std::mt19937_64;

/// Seeds a generator from a base seed and a stream id so that independent
/// consumers of one user seed never share a sequence.
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

enum class Family { Gaussian, Binomial, Gamma, NegativeBinomial, Poisson };

std::string_view family_token(Family f);
Family parse_family(std::string_view token);

/// Closed interval of natural parameters.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  [[nodiscard]] bool contains(double x) const { return lo <= x && x <= hi; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

/// One source's natural exponential family with its known nuisance parameter.
///
/// nuisance is sigma^2 (Gaussian), the trial count N (Binomial), the shape
/// alpha (Gamma), the count r (negative binomial) and is ignored for Poisson.
/// gamma bounds the sup-norm of the natural parameters and kappa is the
/// constant K widening the curvature interval to [-gamma-1/K, gamma+1/K].
///
/// Gamma and negative binomial live on eta < 0. For them `support` holds the
/// admissible parameter range [gamma1, gamma2] (both negative) and gamma is
/// |gamma1|.
struct ExpFamilyModel {
  Family family = Family::Gaussian;
  double nuisance = 1.0;
  double gamma = 1.0;
  double kappa = 1.0;
  std::optional<Interval> support;

  static ExpFamilyModel gaussian(double sigma2, double gamma = 1.0, double kappa = 1.0);
  static ExpFamilyModel binomial(double trials, double gamma = 1.0, double kappa = 1.0);
  static ExpFamilyModel gamma_dist(double shape, Interval support, double kappa = 1.0);
  static ExpFamilyModel negative_binomial(double r, Interval support, double kappa = 1.0);
  static ExpFamilyModel poisson(double gamma = 1.0, double kappa = 1.0);

  /// Throws ConfigError when an invariant is violated.
  void validate() const;

  /// True when eta lies in the open natural-parameter domain of the family.
  [[nodiscard]] bool in_domain(double eta) const;

  /// Interval on which the curvature constants are evaluated.
  [[nodiscard]] Interval curvature_interval() const;

  friend bool operator==(const ExpFamilyModel&, const ExpFamilyModel&) = default;
};

/// Log-partition function G(eta).
double g_value(const ExpFamilyModel& model, double eta);
/// Mean link G'(eta).
double g_prime(const ExpFamilyModel& model, double eta);
/// Variance function G''(eta).
double g_second(const ExpFamilyModel& model, double eta);

struct CurvatureBounds {
  double l_sq = 0.0;  ///< inf of G'' over the curvature interval
  double u_sq = 0.0;  ///< sup of G'' over the curvature interval
};

/// Lower and upper curvature of G over curvature_interval(), computed as the
/// extremes of G'' over a dense grid plus the endpoints and interior
/// stationary points.
CurvatureBounds strong_convexity_bounds(const ExpFamilyModel& model);

/// d_G(x, y) = G(x) - G(y) - (x - y) G'(y).
double bregman(const ExpFamilyModel& model, double x, double y);

/// One draw X with density h(x) exp(eta x - G(eta)).
double sample(const ExpFamilyModel& model, double eta, Rng& rng);
double sample(const ExpFamilyModel& model, double eta, std::uint64_t seed);

}  // namespace cmc
