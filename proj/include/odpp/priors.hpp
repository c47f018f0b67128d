#pragma once

#include <map>
#include <string>
#include <variant>

namespace odpp {

/// IG(shape, scale): density b^a / Gamma(a) x^{-a-1} exp(-b / x).
struct InverseGamma {
  double shape = 2.0;
  double scale = 0.1;
};

struct Normal {
  double mean = 0.0;
  double variance = 100.0;
};

struct Uniform {
  double lo = 0.0;
  double hi = 10.0;
};

/// Improper constant density on the real line.
struct Flat {};

using Prior = std::variant<InverseGamma, Normal, Uniform, Flat>;

/// Named prior entries; models look up their parameters by name and fall
/// back to their documented defaults.
using PriorSpec = std::map<std::string, Prior>;

double log_density(const Prior& prior, double x);
void validate(const Prior& prior);
Prior prior_or(const PriorSpec& spec, const std::string& name, const Prior& fallback);
std::string describe(const Prior& prior);

/// Map between a parameter's natural support and the real line on which the
/// random-walk proposals live.
struct Transform {
  enum class Kind { Identity, Log, Logit };

  Kind kind = Kind::Identity;
  double lo = 0.0;
  double hi = 1.0;

  double to_natural(double u) const;
  double to_unconstrained(double x) const;
  /// log |dx/du| at u.
  double log_jacobian(double u) const;
};

/// Identity for normal/flat priors, log for inverse-gamma, logit(lo, hi) for
/// uniform.
Transform default_transform(const Prior& prior);

}  // namespace odpp
