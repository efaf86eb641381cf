#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace micropart {

// The predictive kernels repeatedly need, for a trajectory with clusters
// (theta_j, coef_j = m_j - sigma) and advancing arrival time tau,
//
//   delta_log_sum(a, b) = sum_j coef_j [log(zeta+b-theta_j) - log(zeta+a-theta_j)]
//   hazard_sum(t)       = sum_j coef_j / (zeta + t - theta_j)
//
// ClusterPotentialRef evaluates both exactly in O(K) with one log/div per
// cluster; it is the reference used by tests and small problems.
class ClusterPotentialRef {
public:
  ClusterPotentialRef(double zeta, double sigma) : zeta_(zeta), sigma_(sigma) {}

  std::size_t num_clusters() const { return theta_.size(); }
  double theta(std::size_t j) const { return theta_[j]; }
  double coef(std::size_t j) const { return coef_[j]; }

  void add_cluster(double theta) {
    theta_.push_back(theta);
    coef_.push_back(1.0 - sigma_);
  }

  void bump(std::size_t j) { coef_[j] += 1.0; }

  // no-op; present so the fast kernel can be swapped in
  void advance(double /*tau*/) {}

  double delta_log_sum(double tau_a, double tau_b) const {
    double acc = 0.0;
    for (std::size_t j = 0; j < theta_.size(); ++j) {
      const double d = zeta_ + tau_a - theta_[j];
      acc += coef_[j] * std::log1p((tau_b - tau_a) / d);
    }
    return acc;
  }

  double hazard_sum(double tau) const {
    double acc = 0.0;
    for (std::size_t j = 0; j < theta_.size(); ++j) acc += coef_[j] / (zeta_ + tau - theta_[j]);
    return acc;
  }

  // unnormalized allocation masses coef_j / (zeta + tau - theta_j)
  void masses(double tau, std::vector<double>& out) const {
    out.resize(theta_.size());
    for (std::size_t j = 0; j < theta_.size(); ++j) out[j] = coef_[j] / (zeta_ + tau - theta_[j]);
  }

private:
  double zeta_, sigma_;
  std::vector<double> theta_, coef_;
};

// Same contract, but amortized O(1) per step instead of O(K): clusters far
// behind the current time enter power sums S_k = sum coef_j u_j^k around a
// reference point tau_ref (u_j = 1/(zeta + tau_ref - theta_j)), so that over
// a window (tau - tau_ref) * u_j <= q0 both quantities are truncated series
// in (tau - tau_ref):
//   sum coef log(1 + x u)   = sum_k (-1)^(k+1) S_k x^k / k
//   sum coef u / (1 + x u)  = sum_k (-1)^(k-1) S_k x^(k-1)
// Recent clusters stay on an exact list (per-cluster series or log1p) until
// the next window rebuild. Truncation at P = 18 terms with q0 = 0.3 keeps
// each call within ~2e-11 relative.
class ClusterPotentialFast {
public:
  ClusterPotentialFast(double zeta, double sigma) : zeta_(zeta), sigma_(sigma) {}

  std::size_t num_clusters() const { return theta_.size(); }
  double theta(std::size_t j) const { return theta_[j]; }
  double coef(std::size_t j) const { return coef_[j]; }

  void add_cluster(double theta) {
    theta_.push_back(theta);
    coef_.push_back(1.0 - sigma_);
    in_far_.push_back(0);
    exact_.push_back(theta_.size() - 1);
  }

  void bump(std::size_t j) {
    coef_[j] += 1.0;
    if (in_far_[j]) {
      const double u = 1.0 / (zeta_ + tau_ref_ - theta_[j]);
      double uk = u;
      for (int k = 0; k < kTerms; ++k, uk *= u) sums_[k] += uk;
    }
  }

  // Call with each accepted arrival time: updates the gap estimate and
  // rebuilds the window when the series bound or the exact list overflows.
  void advance(double tau) {
    if (last_tau_ > 0.0) {
      const double gap = tau - last_tau_;
      gap_ewma_ = gap_ewma_ > 0.0 ? 0.9 * gap_ewma_ + 0.1 * gap : gap;
    }
    last_tau_ = tau;
    if (tau - tau_ref_ > window_ || exact_.size() > kExactCap) rebuild(tau);
  }

  double delta_log_sum(double tau_a, double tau_b) const {
    if (tau_b - tau_ref_ > window_ || tau_a < tau_ref_) return exact_delta(tau_a, tau_b);
    double acc = series_log(tau_b - tau_ref_) - series_log(tau_a - tau_ref_);
    for (const auto j : exact_) {
      const double x = (tau_b - tau_a) / (zeta_ + tau_a - theta_[j]);
      acc += coef_[j] * log1p_small(x);
    }
    return acc;
  }

  double hazard_sum(double tau) const {
    if (tau - tau_ref_ > window_ || tau < tau_ref_) return exact_hazard(tau);
    double acc = series_hazard(tau - tau_ref_);
    for (const auto j : exact_) acc += coef_[j] / (zeta_ + tau - theta_[j]);
    return acc;
  }

  void masses(double tau, std::vector<double>& out) const {
    out.resize(theta_.size());
    for (std::size_t j = 0; j < theta_.size(); ++j) out[j] = coef_[j] / (zeta_ + tau - theta_[j]);
  }

private:
  static constexpr int kTerms = 18;
  static constexpr double kQ0 = 0.3;
  static constexpr std::size_t kExactCap = 48;
  static constexpr int kWindowSteps = 24;

  void rebuild(double tau) {
    tau_ref_ = tau;
    const double gap = gap_ewma_ > 0.0 ? gap_ewma_ : (tau > 0.0 ? tau : 1.0);
    window_ = kWindowSteps * gap;
    const double enroll_floor = window_ / kQ0;
    for (double& s : sums_) s = 0.0;
    exact_.clear();
    for (std::size_t j = 0; j < theta_.size(); ++j) {
      const double d = zeta_ + tau - theta_[j];
      if (d >= enroll_floor) {
        in_far_[j] = 1;
        const double u = 1.0 / d;
        const double c = coef_[j];
        double uk = u;
        for (int k = 0; k < kTerms; ++k, uk *= u) sums_[k] += c * uk;
      } else {
        in_far_[j] = 0;
        exact_.push_back(j);
      }
    }
  }

  double series_log(double x) const {
    // sum_k (-1)^(k+1) S_k x^k / k
    double acc = 0.0;
    double xk = x;
    for (int k = 0; k < kTerms; ++k, xk *= -x) acc += sums_[k] * xk / (k + 1);
    return acc;
  }

  double series_hazard(double x) const {
    double acc = 0.0;
    double xk = 1.0;
    for (int k = 0; k < kTerms; ++k, xk *= -x) acc += sums_[k] * xk;
    return acc;
  }

  static double log1p_small(double x) {
    if (std::abs(x) > 0.15) return std::log1p(x);
    // |x| <= 0.15: 14 terms give ~3e-14 relative
    double acc = 0.0;
    double xk = x;
    for (int k = 1; k <= 14; ++k, xk *= -x) acc += xk / k;
    return acc;
  }

  double exact_delta(double tau_a, double tau_b) const {
    double acc = 0.0;
    for (std::size_t j = 0; j < theta_.size(); ++j)
      acc += coef_[j] * std::log1p((tau_b - tau_a) / (zeta_ + tau_a - theta_[j]));
    return acc;
  }

  double exact_hazard(double tau) const {
    double acc = 0.0;
    for (std::size_t j = 0; j < theta_.size(); ++j) acc += coef_[j] / (zeta_ + tau - theta_[j]);
    return acc;
  }

  double zeta_, sigma_;
  std::vector<double> theta_, coef_;
  std::vector<std::uint8_t> in_far_;
  std::vector<std::uint32_t> exact_;
  double sums_[kTerms] = {};
  double tau_ref_ = 0.0;
  double window_ = 0.0;
  double gap_ewma_ = 0.0;
  double last_tau_ = 0.0;
};

enum class Kernel { reference, fast };

}  // namespace micropart
