#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sdamarl::diffusion {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class ScheduleError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Per-step noise tables indexed 1..T. Index 0 holds the clean-data
/// convention alpha_bar(0) = 1.
class NoiseSchedule {
 public:
  NoiseSchedule() = default;

  std::size_t steps() const { return beta_.size() - 1; }
  double beta_min() const { return beta_min_; }
  double beta_max() const { return beta_max_; }

  double beta(std::size_t t) const { return beta_.at(check(t)); }
  double alpha(std::size_t t) const { return 1.0 - beta(t); }
  double alpha_bar(std::size_t t) const {
    if (t > steps()) throw ScheduleError("alpha_bar: t out of range");
    return alpha_bar_[t];
  }

  /// Posterior standard deviation of the reverse step t -> t-1; zero at t = 1.
  double sigma(std::size_t t) const {
    check(t);
    return std::sqrt(beta_[t] * (1.0 - alpha_bar_[t - 1]) / (1.0 - alpha_bar_[t]));
  }

  std::size_t check(std::size_t t) const {
    if (t < 1 || t > steps())
      throw ScheduleError("timestep " + std::to_string(t) + " outside [1, " + std::to_string(steps()) + "]");
    return t;
  }

 private:
  friend NoiseSchedule make_schedule(std::size_t, double, double);
  std::vector<double> beta_{0.0};
  std::vector<double> alpha_bar_{1.0};
  double beta_min_ = 0.0;
  double beta_max_ = 0.0;
};

/// Linearly spaced betas from beta_min (t = 1) to beta_max (t = T).
/// A single-step schedule uses beta_min.
inline NoiseSchedule make_schedule(std::size_t T, double beta_min, double beta_max) {
  if (T < 1) throw ScheduleError("schedule needs T >= 1");
  if (!(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0))
    throw ScheduleError("schedule needs 0 < beta_min <= beta_max < 1");
  NoiseSchedule s;
  s.beta_min_ = beta_min;
  s.beta_max_ = beta_max;
  s.beta_.resize(T + 1);
  s.alpha_bar_.resize(T + 1);
  s.beta_[0] = 0.0;
  s.alpha_bar_[0] = 1.0;
  for (std::size_t t = 1; t <= T; ++t) {
    const double frac = T == 1 ? 0.0 : static_cast<double>(t - 1) / static_cast<double>(T - 1);
    s.beta_[t] = beta_min + frac * (beta_max - beta_min);
    s.alpha_bar_[t] = s.alpha_bar_[t - 1] * (1.0 - s.beta_[t]);
  }
  return s;
}

/// Endpoints taken from the discretized variance-preserving process with
/// continuous rates 0.1 .. 10, so every T in 1..1000 stays valid and ends
/// near alpha_bar(T) = exp(-5.05).
inline NoiseSchedule default_schedule(std::size_t T) {
  if (T < 1) throw ScheduleError("schedule needs T >= 1");
  constexpr double lo = 0.1, hi = 10.0;
  const double n = static_cast<double>(T);
  const double beta_min = -std::expm1(-lo / n - 0.5 * (hi - lo) / (n * n));
  const double beta_max = -std::expm1(-lo / n - 0.5 * (hi - lo) * (2.0 * n - 1.0) / (n * n));
  return make_schedule(T, beta_min, beta_max);
}

/// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps, row-wise for a batch.
inline Matrix forward_noise(const NoiseSchedule& s, const Matrix& x0, std::size_t t, const Matrix& eps) {
  if (x0.rows() != eps.rows() || x0.cols() != eps.cols()) throw ScheduleError("forward_noise: shape mismatch");
  const double ab = s.alpha_bar(s.check(t));
  return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps;
}

inline Matrix predict_x0(const NoiseSchedule& s, const Matrix& xt, std::size_t t, const Matrix& eps_hat) {
  if (xt.rows() != eps_hat.rows() || xt.cols() != eps_hat.cols()) throw ScheduleError("predict_x0: shape mismatch");
  const double ab = s.alpha_bar(s.check(t));
  return (xt - std::sqrt(1.0 - ab) * eps_hat) / std::sqrt(ab);
}

/// Mean of the reverse step without the stochastic term.
inline Matrix reverse_mean(const NoiseSchedule& s, const Matrix& xt, std::size_t t, const Matrix& eps_hat) {
  const double a = s.alpha(t);
  const double coef = s.beta(t) / std::sqrt(1.0 - s.alpha_bar(t));
  return (xt - coef * eps_hat) / std::sqrt(a);
}

}  // namespace sdamarl::diffusion
