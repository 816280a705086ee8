#include "cmc/expfam.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "cmc/errors.hpp"

namespace cmc {

namespace {

constexpr int kCurvatureGrid = 10000;

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_domain(const ExpFamilyModel& m, double eta) {
  if (!m.in_domain(eta)) {
    throw DomainError("natural parameter " + std::to_string(eta) + " outside the domain of the " +
                      std::string(family_token(m.family)) + " family");
  }
}

bool negative_side(Family f) { return f == Family::Gamma || f == Family::NegativeBinomial; }

}  // namespace

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

std::string_view family_token(Family f) {
  switch (f) {
    case Family::Gaussian: return "gaussian";
    case Family::Binomial: return "binomial";
    case Family::Gamma: return "gamma";
    case Family::NegativeBinomial: return "negbinomial";
    case Family::Poisson: return "poisson";
  }
  return "unknown";
}

Family parse_family(std::string_view token) {
  static constexpr std::array<Family, 5> all{Family::Gaussian, Family::Binomial, Family::Gamma,
                                             Family::NegativeBinomial, Family::Poisson};
  for (Family f : all) {
    if (family_token(f) == token) return f;
  }
  throw ConfigError("unknown family '" + std::string(token) +
                    "' (expected gaussian|binomial|gamma|negbinomial|poisson)");
}

ExpFamilyModel ExpFamilyModel::gaussian(double sigma2, double gamma, double kappa) {
  ExpFamilyModel m{Family::Gaussian, sigma2, gamma, kappa, std::nullopt};
  m.validate();
  return m;
}

ExpFamilyModel ExpFamilyModel::binomial(double trials, double gamma, double kappa) {
  ExpFamilyModel m{Family::Binomial, trials, gamma, kappa, std::nullopt};
  m.validate();
  return m;
}

ExpFamilyModel ExpFamilyModel::gamma_dist(double shape, Interval support, double kappa) {
  ExpFamilyModel m{Family::Gamma, shape, std::max(std::abs(support.lo), std::abs(support.hi)),
                   kappa, support};
  m.validate();
  return m;
}

ExpFamilyModel ExpFamilyModel::negative_binomial(double r, Interval support, double kappa) {
  ExpFamilyModel m{Family::NegativeBinomial, r,
                   std::max(std::abs(support.lo), std::abs(support.hi)), kappa, support};
  m.validate();
  return m;
}

ExpFamilyModel ExpFamilyModel::poisson(double gamma, double kappa) {
  ExpFamilyModel m{Family::Poisson, 1.0, gamma, kappa, std::nullopt};
  m.validate();
  return m;
}

void ExpFamilyModel::validate() const {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma must be positive");
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw ConfigError("kappa must be positive");
  if (family != Family::Poisson && (!(nuisance > 0.0) || !std::isfinite(nuisance))) {
    throw ConfigError("nuisance parameter of the " + std::string(family_token(family)) +
                      " family must be positive");
  }
  if (family == Family::Binomial && nuisance != std::floor(nuisance)) {
    throw ConfigError("binomial trial count must be an integer");
  }
  if (negative_side(family)) {
    if (!support) {
      throw ConfigError(std::string(family_token(family)) +
                        " family needs an explicit negative parameter interval");
    }
    // gamma1 * gamma2 > 0 with both on the negative side.
    if (!(support->lo <= support->hi) || !(support->hi < 0.0)) {
      throw ConfigError(std::string(family_token(family)) +
                        " parameter interval must satisfy lo <= hi < 0");
    }
    if (std::abs(gamma - std::abs(support->lo)) > 1e-12 * gamma) {
      throw ConfigError("gamma must equal |lo| of the parameter interval");
    }
  }
}

bool ExpFamilyModel::in_domain(double eta) const {
  if (!std::isfinite(eta)) return false;
  if (negative_side(family)) return eta < 0.0;
  return true;
}

Interval ExpFamilyModel::curvature_interval() const {
  const double reach = gamma + 1.0 / kappa;
  if (negative_side(family)) {
    // Widened on the far side only; the near-zero end stays at gamma2.
    return {-reach, support->hi};
  }
  return {-reach, reach};
}

double g_value(const ExpFamilyModel& m, double eta) {
  check_domain(m, eta);
  switch (m.family) {
    case Family::Gaussian: return 0.5 * m.nuisance * eta * eta;
    case Family::Binomial: return m.nuisance * softplus(eta);
    case Family::Gamma: return -m.nuisance * std::log(-eta);
    case Family::NegativeBinomial: return -m.nuisance * std::log(-std::expm1(eta));
    case Family::Poisson: return std::exp(eta);
  }
  return 0.0;
}

double g_prime(const ExpFamilyModel& m, double eta) {
  check_domain(m, eta);
  switch (m.family) {
    case Family::Gaussian: return m.nuisance * eta;
    case Family::Binomial: return m.nuisance * sigmoid(eta);
    case Family::Gamma: return -m.nuisance / eta;
    case Family::NegativeBinomial: return m.nuisance * std::exp(eta) / -std::expm1(eta);
    case Family::Poisson: return std::exp(eta);
  }
  return 0.0;
}

double g_second(const ExpFamilyModel& m, double eta) {
  check_domain(m, eta);
  switch (m.family) {
    case Family::Gaussian: return m.nuisance;
    case Family::Binomial: {
      const double s = sigmoid(eta);
      return m.nuisance * s * sigmoid(-eta);
    }
    case Family::Gamma: return m.nuisance / (eta * eta);
    case Family::NegativeBinomial: {
      const double d = std::expm1(eta);
      return m.nuisance * std::exp(eta) / (d * d);
    }
    case Family::Poisson: return std::exp(eta);
  }
  return 0.0;
}

CurvatureBounds strong_convexity_bounds(const ExpFamilyModel& model) {
  model.validate();
  const Interval iv = model.curvature_interval();
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  auto visit = [&](double eta) {
    const double v = g_second(model, eta);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  };
  for (int k = 0; k <= kCurvatureGrid; ++k) {
    const double t = static_cast<double>(k) / kCurvatureGrid;
    visit(iv.lo + t * (iv.hi - iv.lo));
  }
  visit(iv.lo);
  visit(iv.hi);
  // The binomial variance peaks at eta = 0.
  if (model.family == Family::Binomial && iv.contains(0.0)) visit(0.0);
  return {lo, hi};
}

double bregman(const ExpFamilyModel& model, double x, double y) {
  return g_value(model, x) - g_value(model, y) - (x - y) * g_prime(model, y);
}

double sample(const ExpFamilyModel& m, double eta, Rng& rng) {
  check_domain(m, eta);
  switch (m.family) {
    case Family::Gaussian: {
      std::normal_distribution<double> dist(m.nuisance * eta, std::sqrt(m.nuisance));
      return dist(rng);
    }
    case Family::Binomial: {
      std::binomial_distribution<long> dist(static_cast<long>(m.nuisance), sigmoid(eta));
      return static_cast<double>(dist(rng));
    }
    case Family::Gamma: {
      std::gamma_distribution<double> dist(m.nuisance, 1.0 / -eta);
      return dist(rng);
    }
    case Family::NegativeBinomial: {
      // Gamma-Poisson mixture; handles non-integer r.
      std::gamma_distribution<double> rate(m.nuisance, std::exp(eta) / -std::expm1(eta));
      const double lambda = rate(rng);
      if (lambda <= 0.0) return 0.0;
      std::poisson_distribution<long> dist(lambda);
      return static_cast<double>(dist(rng));
    }
    case Family::Poisson: {
      std::poisson_distribution<long> dist(std::exp(eta));
      return static_cast<double>(dist(rng));
    }
  }
  return 0.0;
}

double sample(const ExpFamilyModel& model, double eta, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  return sample(model, eta, rng);
}

}  // namespace cmc
