#include "odpp/priors.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "odpp/errors.hpp"

namespace odpp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(1 + exp(x)) without overflow.
double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

double log_density(const Prior& prior, double x) {
  return std::visit(
      Overloaded{
          [x](const InverseGamma& p) {
            if (!(x > 0.0)) return kNegInf;
            return p.shape * std::log(p.scale) - std::lgamma(p.shape) -
                   (p.shape + 1.0) * std::log(x) - p.scale / x;
          },
          [x](const Normal& p) {
            const double d = x - p.mean;
            return -0.5 * std::log(2.0 * std::numbers::pi * p.variance) - 0.5 * d * d / p.variance;
          },
          [x](const Uniform& p) {
            if (x < p.lo || x > p.hi) return kNegInf;
            return -std::log(p.hi - p.lo);
          },
          [](const Flat&) { return 0.0; },
      },
      prior);
}

void validate(const Prior& prior) {
  std::visit(Overloaded{
                 [](const InverseGamma& p) {
                   if (!(p.shape > 0.0) || !(p.scale > 0.0)) {
                     throw ConfigError("inverse-gamma prior needs shape > 0 and scale > 0");
                   }
                 },
                 [](const Normal& p) {
                   if (!(p.variance > 0.0)) throw ConfigError("normal prior needs variance > 0");
                 },
                 [](const Uniform& p) {
                   if (!(p.lo < p.hi)) throw ConfigError("uniform prior needs lo < hi");
                 },
                 [](const Flat&) {},
             },
             prior);
}

Prior prior_or(const PriorSpec& spec, const std::string& name, const Prior& fallback) {
  const auto it = spec.find(name);
  Prior p = it == spec.end() ? fallback : it->second;
  validate(p);
  return p;
}

std::string describe(const Prior& prior) {
  std::ostringstream os;
  std::visit(Overloaded{
                 [&os](const InverseGamma& p) { os << "IG(" << p.shape << ", " << p.scale << ")"; },
                 [&os](const Normal& p) { os << "N(" << p.mean << ", " << p.variance << ")"; },
                 [&os](const Uniform& p) { os << "U[" << p.lo << ", " << p.hi << "]"; },
                 [&os](const Flat&) { os << "flat"; },
             },
             prior);
  return os.str();
}

double Transform::to_natural(double u) const {
  switch (kind) {
    case Kind::Identity:
      return u;
    case Kind::Log:
      return std::exp(u);
    case Kind::Logit:
      return lo + (hi - lo) / (1.0 + std::exp(-u));
  }
  return u;
}

double Transform::to_unconstrained(double x) const {
  switch (kind) {
    case Kind::Identity:
      return x;
    case Kind::Log:
      return std::log(x);
    case Kind::Logit: {
      const double s = (x - lo) / (hi - lo);
      return std::log(s) - std::log1p(-s);
    }
  }
  return x;
}

double Transform::log_jacobian(double u) const {
  switch (kind) {
    case Kind::Identity:
      return 0.0;
    case Kind::Log:
      return u;
    case Kind::Logit:
      // log(hi - lo) + log s + log(1 - s), s = sigmoid(u)
      return std::log(hi - lo) - softplus(-u) - softplus(u);
  }
  return 0.0;
}

Transform default_transform(const Prior& prior) {
  return std::visit(Overloaded{
                        [](const InverseGamma&) { return Transform{Transform::Kind::Log}; },
                        [](const Normal&) { return Transform{}; },
                        [](const Uniform& p) { return Transform{Transform::Kind::Logit, p.lo, p.hi}; },
                        [](const Flat&) { return Transform{}; },
                    },
                    prior);
}

}  // namespace odpp
