#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <string_view>

#include "ogcp/error.hpp"

namespace ogcp {

enum class LossKind { Gaussian, Poisson, Bernoulli };

LossKind parse_loss_kind(std::string_view name);
const char* to_string(LossKind kind);

/// Elementwise GCP loss f(x, m) and its derivative in m.
///
///   gaussian   f = (x - m)^2                     link: identity (normal mean)
///   poisson    f = m - x log(m + eps)            link: l(eta) = eta
///   bernoulli  f = log(m + 1) - x log(m + eps)   link: l(eta) = eta / (1 - eta)
///
/// eps sits inside every logarithm and every derivative denominator so both are
/// defined at m = 0. Models work directly in m; the link only documents how m
/// relates to the distribution parameter.
class LossFunction {
 public:
  explicit LossFunction(LossKind kind, double eps = 1e-10) : kind_(kind), eps_(eps) {
    if (!(eps > 0.0) || !std::isfinite(eps))
      fail(ErrorKind::Domain, "loss epsilon must be positive and finite");
  }

  LossKind kind() const { return kind_; }
  double eps() const { return eps_; }

  /// -inf for gaussian, 0 for poisson and bernoulli.
  double lower_bound() const {
    return kind_ == LossKind::Gaussian
               ? -std::numeric_limits<double>::infinity()
               : 0.0;
  }

  template <typename Scalar>
  Scalar value(Scalar x, Scalar m) const {
    check(x, m);
    return value_unchecked(x, m);
  }

  template <typename Scalar>
  Scalar deriv(Scalar x, Scalar m) const {
    check(x, m);
    return deriv_unchecked(x, m);
  }

  template <typename Scalar>
  Scalar value_unchecked(Scalar x, Scalar m) const {
    switch (kind_) {
      case LossKind::Gaussian:
        return (x - m) * (x - m);
      case LossKind::Poisson:
        return m - x * std::log(m + Scalar(eps_));
      case LossKind::Bernoulli:
        return std::log(m + Scalar(1)) - x * std::log(m + Scalar(eps_));
    }
    return Scalar(0);
  }

  template <typename Scalar>
  Scalar deriv_unchecked(Scalar x, Scalar m) const {
    switch (kind_) {
      case LossKind::Gaussian:
        return Scalar(2) * (m - x);
      case LossKind::Poisson:
        return Scalar(1) - x / (m + Scalar(eps_));
      case LossKind::Bernoulli:
        return Scalar(1) / (m + Scalar(1)) - x / (m + Scalar(eps_));
    }
    return Scalar(0);
  }

  template <typename Scalar>
  void check(Scalar x, Scalar m) const {
    if (!std::isfinite(x) || !std::isfinite(m))
      fail(ErrorKind::Domain, "non-finite loss argument (x=" +
                                  std::to_string(x) + ", m=" +
                                  std::to_string(m) + ")");
    if (m < Scalar(lower_bound()))
      fail(ErrorKind::Domain, std::string(to_string(kind_)) +
                                  " loss evaluated below its lower bound (m=" +
                                  std::to_string(m) + ")");
    if (kind_ == LossKind::Poisson && x < Scalar(0))
      fail(ErrorKind::Domain, "poisson loss requires x >= 0");
    if (kind_ == LossKind::Bernoulli && x != Scalar(0) && x != Scalar(1))
      fail(ErrorKind::Domain, "bernoulli loss requires x in {0,1}");
  }

 private:
  LossKind kind_;
  double eps_;
};

}  // namespace ogcp
