#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "ogcp/error.hpp"

namespace ogcp {

struct AdamParams {
  double rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double rate_decay = 0.1;
  double lower_bound = -std::numeric_limits<double>::infinity();
};

namespace detail {

// A variable set is either one dense Eigen object or a vector of them.
template <typename Dense>
void zeros_like(const Dense& a, Dense& out) {
  out = Dense::Zero(a.rows(), a.cols());
}
template <typename Dense>
void zeros_like(const std::vector<Dense>& a, std::vector<Dense>& out) {
  out.resize(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) zeros_like(a[k], out[k]);
}

template <typename Dense>
bool same_shape(const Dense& a, const Dense& b) {
  return a.rows() == b.rows() && a.cols() == b.cols();
}
template <typename Dense>
bool same_shape(const std::vector<Dense>& a, const std::vector<Dense>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k)
    if (!same_shape(a[k], b[k])) return false;
  return true;
}

template <typename Dense, typename Fn>
void for_each_block(Dense& a, Dense& u, Dense& v, const Dense& g, Fn&& fn) {
  fn(a, u, v, g);
}
template <typename Dense, typename Fn>
void for_each_block(std::vector<Dense>& a, std::vector<Dense>& u,
                    std::vector<Dense>& v, const std::vector<Dense>& g,
                    Fn&& fn) {
  for (std::size_t k = 0; k < a.size(); ++k) fn(a[k], u[k], v[k], g[k]);
}

}  // namespace detail

/// ADAM stepper with epoch snapshots.
///
/// `step` applies one bias-corrected update followed by the lower-bound clamp.
/// `update(a, true)` records (u, v, a) as the last accepted state;
/// `update(a, false)` restores it and cuts the learning rate by `rate_decay`.
/// Callers snapshot with an initial `update(a, true)` before the first epoch so
/// a rejection never falls back to the zero state from `init`.
template <typename Var>
class AdamStepper {
 public:
  AdamStepper() = default;
  explicit AdamStepper(AdamParams params) : params_(params) {
    if (!(params.beta1 >= 0 && params.beta1 < 1) ||
        !(params.beta2 >= 0 && params.beta2 < 1))
      fail(ErrorKind::Domain, "ADAM decay rates must lie in [0,1)");
    if (!(params.rate > 0)) fail(ErrorKind::Domain, "ADAM rate must be > 0");
    if (!(params.rate_decay > 0 && params.rate_decay < 1))
      fail(ErrorKind::Domain, "ADAM rate decay must lie in (0,1)");
  }

  void init(const Var& a) {
    detail::zeros_like(a, u_);
    detail::zeros_like(a, v_);
    detail::zeros_like(a, u_saved_);
    detail::zeros_like(a, v_saved_);
    detail::zeros_like(a, a_saved_);
    initialized_ = true;
  }

  /// One ADAM update. `step_count` is the 1-based number of steps taken so
  /// far including this one, used as the bias-correction exponent.
  void step(Var& a, const Var& g, std::int64_t step_count) {
    if (!initialized_) fail(ErrorKind::Contract, "ADAM stepper not initialized");
    if (!detail::same_shape(a, u_) || !detail::same_shape(a, g))
      fail(ErrorKind::Shape, "ADAM variable/gradient shape mismatch");
    if (step_count < 1)
      fail(ErrorKind::Contract, "ADAM step count must be >= 1");
    const double b1 = params_.beta1, b2 = params_.beta2;
    const double n = static_cast<double>(step_count);
    const double rate = params_.rate * std::sqrt(1.0 - std::pow(b2, n)) /
                        (1.0 - std::pow(b1, n));
    const double eps = params_.eps, lb = params_.lower_bound;
    detail::for_each_block(a, u_, v_, g, [&](auto& ab, auto& ub, auto& vb,
                                             const auto& gb) {
      ub = b1 * ub + (1.0 - b1) * gb;
      vb.array() = b2 * vb.array() + (1.0 - b2) * gb.array().square();
      ab.array() -= rate * ub.array() / (vb.array().sqrt() + eps);
      ab = ab.cwiseMax(lb);
    });
  }

  /// Accept (snapshot) or reject (restore and decay the rate) the last epoch.
  void update(Var& a, bool passed) {
    if (!initialized_) fail(ErrorKind::Contract, "ADAM stepper not initialized");
    if (passed) {
      u_saved_ = u_;
      v_saved_ = v_;
      a_saved_ = a;
    } else {
      u_ = u_saved_;
      v_ = v_saved_;
      a = a_saved_;
      params_.rate *= params_.rate_decay;
    }
  }

  const AdamParams& params() const { return params_; }
  double rate() const { return params_.rate; }
  void set_rate(double r) { params_.rate = r; }
  bool initialized() const { return initialized_; }

  const Var& first_moment() const { return u_; }
  const Var& second_moment() const { return v_; }
  const Var& saved_first_moment() const { return u_saved_; }
  const Var& saved_second_moment() const { return v_saved_; }
  const Var& saved_solution() const { return a_saved_; }

  /// Restores a full state, e.g. from a checkpoint.
  void restore(Var u, Var v, Var u_saved, Var v_saved, Var a_saved,
               double rate) {
    u_ = std::move(u);
    v_ = std::move(v);
    u_saved_ = std::move(u_saved);
    v_saved_ = std::move(v_saved);
    a_saved_ = std::move(a_saved);
    params_.rate = rate;
    initialized_ = true;
  }

 private:
  AdamParams params_;
  Var u_, v_, u_saved_, v_saved_, a_saved_;
  bool initialized_ = false;
};

}  // namespace ogcp
