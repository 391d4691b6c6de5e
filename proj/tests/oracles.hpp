#pragma once

// Slow, direct reference implementations the library is checked against.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "hsolo/geometry.hpp"
#include "hsolo/refine.hpp"

namespace hsolo::oracle {

// Full sort by (error, index), truncated to n_f.
inline std::vector<std::size_t> full_sort_filter(const Homography& h, std::span<const Correspondence> pool,
                                                 std::size_t n_f) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t i = 0; i < pool.size(); ++i) all.emplace_back(reprojection_error_or_inf(h, pool[i]), i);
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < std::min(n_f, all.size()); ++i) out.push_back(all[i].second);
  return out;
}

// Percentile by explicit rank interpolation.
inline double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double rank = q * static_cast<double>(v.size() - 1);
  const double below = std::floor(rank);
  const double above = std::ceil(rank);
  const double lo = v[static_cast<std::size_t>(below)];
  const double hi = v[static_cast<std::size_t>(above)];
  return below == above ? lo : lo * (above - rank) + hi * (rank - below);
}

inline double epsilon_r(const std::vector<double>& v) {
  const double q1 = percentile(v, 0.25), q3 = percentile(v, 0.75);
  return q3 + 3.0 * (q3 - q1);
}

// Pairwise density clustering: quadratic, no sorting tricks. Border points
// take the nearest core (the lower-valued one on a tie); clusters are
// numbered by their smallest member.
inline std::vector<int> dbscan(const std::vector<double>& x, double eps, std::size_t min_pts) {
  const std::size_t n = x.size();
  std::vector<bool> core(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t count = 0;
    for (std::size_t j = 0; j < n; ++j) count += std::abs(x[i] - x[j]) <= eps ? 1 : 0;
    core[i] = count >= min_pts;
  }
  std::vector<int> component(n, -1);
  int components = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i] || component[i] >= 0) continue;
    std::vector<std::size_t> stack{i};
    component[i] = components;
    while (!stack.empty()) {
      const std::size_t a = stack.back();
      stack.pop_back();
      for (std::size_t b = 0; b < n; ++b) {
        if (core[b] && component[b] < 0 && std::abs(x[a] - x[b]) <= eps) {
          component[b] = components;
          stack.push_back(b);
        }
      }
    }
    ++components;
  }
  std::vector<int> labels = component;
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) continue;
    double best = eps;
    double best_value = 0.0;
    int label = -1;
    for (std::size_t j = 0; j < n; ++j) {
      if (!core[j]) continue;
      const double d = std::abs(x[i] - x[j]);
      if (d < best || (d == best && (label < 0 || x[j] < best_value))) {
        best = d;
        best_value = x[j];
        label = component[j];
      }
    }
    labels[i] = label;
  }
  std::map<int, double> lowest;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0) continue;
    auto [it, inserted] = lowest.emplace(labels[i], x[i]);
    if (!inserted) it->second = std::min(it->second, x[i]);
  }
  std::vector<std::pair<double, int>> by_value;
  for (const auto& [label, value] : lowest) by_value.emplace_back(value, label);
  std::sort(by_value.begin(), by_value.end());
  std::map<int, int> renumber;
  for (std::size_t k = 0; k < by_value.size(); ++k) renumber[by_value[k].second] = static_cast<int>(k);
  for (int& l : labels) {
    if (l >= 0) l = renumber[l];
  }
  return labels;
}

// Central differences on the residual vector.
inline Eigen::MatrixXd residual_jacobian(const HomographyParams& x, std::span<const Correspondence> cs) {
  Eigen::MatrixXd j(static_cast<Eigen::Index>(2 * cs.size()), 8);
  for (int k = 0; k < 8; ++k) {
    const double step = 1e-6 * std::max(std::abs(x(k)), 1e-4);
    HomographyParams plus = x, minus = x;
    plus(k) += step;
    minus(k) -= step;
    Eigen::VectorXd rp, rm;
    reprojection_residuals(plus, cs, rp);
    reprojection_residuals(minus, cs, rm);
    j.col(k) = (rp - rm) / (2.0 * step);
  }
  return j;
}

// Worst column-wise relative difference between two Jacobians.
inline double jacobian_mismatch(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& numeric) {
  double worst = 0.0;
  for (Eigen::Index k = 0; k < analytic.cols(); ++k) {
    worst = std::max(worst, (analytic.col(k) - numeric.col(k)).norm() / analytic.col(k).norm());
  }
  return worst;
}

}  // namespace hsolo::oracle
