/*
 * Copyright 2026 The Secure FTL Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Random small federated instances and independent reference evaluations
// shared by the unit and acceptance suites.

#ifndef FTL_TESTS_TEST_UTIL_H_
#define FTL_TESTS_TEST_UTIL_H_

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "ftl/neural.h"
#include "ftl/objective.h"

namespace ftl::testing {

using nn::Matrix;
using nn::Vector;

inline Matrix RandomMatrix(int rows, int cols, std::mt19937_64& rng,
                           double scale) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = dist(rng);
  }
  return m;
}

struct RandomProblem {
  Matrix x_a, x_b;
  nn::Network net_a, net_b;
  objective::Instance inst;
};

// n_a rows at A, n_b rows at B, `n_c` labeled B rows, `n_ab` overlap pairs,
// hidden width d and `layers` (1 or 2) layers per party.
inline RandomProblem MakeRandomProblem(std::mt19937_64& rng, int d, int layers,
                                       int n_a, int n_b, int n_c, int n_ab,
                                       int feat_a = 5, int feat_b = 4) {
  RandomProblem p;
  std::vector<int> dims_a = {feat_a}, dims_b = {feat_b};
  if (layers == 2) {
    dims_a.push_back(d + 2);
    dims_b.push_back(d + 1);
  }
  dims_a.push_back(d);
  dims_b.push_back(d);
  p.net_a = nn::Init(dims_a, rng);
  p.net_b = nn::Init(dims_b, rng);
  for (auto* net : {&p.net_a, &p.net_b}) {
    for (nn::Layer& l : net->layers) {
      l.bias = RandomMatrix(static_cast<int>(l.bias.size()), 1, rng, 0.5);
    }
  }
  p.x_a = RandomMatrix(n_a, feat_a, rng, 1.5);
  p.x_b = RandomMatrix(n_b, feat_b, rng, 1.5);
  std::bernoulli_distribution coin(0.5);
  p.inst.y_a.resize(n_a);
  for (int& y : p.inst.y_a) y = coin(rng) ? 1 : -1;
  std::vector<int> b_rows(n_b), a_rows(n_a);
  std::iota(b_rows.begin(), b_rows.end(), 0);
  std::iota(a_rows.begin(), a_rows.end(), 0);
  std::shuffle(b_rows.begin(), b_rows.end(), rng);
  for (int i = 0; i < n_c; ++i) {
    p.inst.labeled.push_back({b_rows[i % n_b], coin(rng) ? 1 : -1});
  }
  std::shuffle(a_rows.begin(), a_rows.end(), rng);
  std::shuffle(b_rows.begin(), b_rows.end(), rng);
  for (int i = 0; i < n_ab; ++i) {
    p.inst.overlap.push_back({a_rows[i % n_a], b_rows[i % n_b]});
  }
  return p;
}

// Straight-line evaluation of the objective written from its definition:
// sigmoid layers by explicit loops, translator by explicit sums.
inline double ReferenceLoss(const RandomProblem& p, double gamma,
                            double lambda, bool squared_distance,
                            bool exact_logistic = false) {
  auto forward = [](const nn::Network& net, const Matrix& x, int row) {
    std::vector<double> act(x.cols());
    for (int c = 0; c < x.cols(); ++c) act[c] = x(row, c);
    for (const nn::Layer& l : net.layers) {
      std::vector<double> next(l.weights.rows());
      for (int r = 0; r < l.weights.rows(); ++r) {
        double z = l.bias(r);
        for (int c = 0; c < l.weights.cols(); ++c) z += l.weights(r, c) * act[c];
        next[r] = 1.0 / (1.0 + std::exp(-z));
      }
      act = next;
    }
    return act;
  };
  const int d = p.net_a.hidden_dim();
  std::vector<double> phi(d, 0.0);
  int n_a = 0;
  for (int j = 0; j < p.x_a.rows(); ++j) {
    if (p.inst.y_a[j] == 0) continue;
    auto u = forward(p.net_a, p.x_a, j);
    for (int k = 0; k < d; ++k) phi[k] += p.inst.y_a[j] * u[k];
    ++n_a;
  }
  if (n_a > 0) {
    for (double& v : phi) v /= n_a;
  }
  double l1 = 0;
  for (const auto& l : p.inst.labeled) {
    auto u = forward(p.net_b, p.x_b, l.b_row);
    double f = 0;
    for (int k = 0; k < d; ++k) f += phi[k] * u[k];
    if (exact_logistic) {
      l1 += std::log(1 + std::exp(-l.y * f));
    } else {
      l1 += std::log(2.0) - 0.5 * l.y * f + 0.125 * f * f;
    }
  }
  double l2 = 0;
  for (const auto& pr : p.inst.overlap) {
    auto ua = forward(p.net_a, p.x_a, pr.a_row);
    auto ub = forward(p.net_b, p.x_b, pr.b_row);
    for (int k = 0; k < d; ++k) {
      l2 += squared_distance ? (ua[k] - ub[k]) * (ua[k] - ub[k])
                             : -ua[k] * ub[k];
    }
  }
  double l3 = 0;
  for (const auto* net : {&p.net_a, &p.net_b}) {
    for (const nn::Layer& l : net->layers) {
      l3 += l.weights.squaredNorm() + l.bias.squaredNorm();
    }
  }
  return l1 + gamma * l2 + 0.5 * lambda * l3;
}

// Central finite differences of the objective with respect to every
// parameter of both networks; returns {grad_a, grad_b} flattened.
inline std::pair<Vector, Vector> FiniteDifferenceGradients(
    const RandomProblem& p, const objective::ObjectiveConfig& cfg,
    const objective::AlignmentSpec& align, double h = 1e-5) {
  auto loss = [&](const nn::Network& a, const nn::Network& b) {
    return objective::FullLoss(p.x_a, p.x_b, p.inst, a, b, cfg, align);
  };
  auto fd = [&](bool side_a) {
    const nn::Network& base = side_a ? p.net_a : p.net_b;
    Vector theta = nn::Flatten(base.layers);
    Vector grad(theta.size());
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      Vector plus = theta, minus = theta;
      plus(i) += h;
      minus(i) -= h;
      nn::Network np{nn::Unflatten(plus, base)}, nm{nn::Unflatten(minus, base)};
      double fp = side_a ? loss(np, p.net_b) : loss(p.net_a, np);
      double fm = side_a ? loss(nm, p.net_b) : loss(p.net_a, nm);
      grad(i) = (fp - fm) / (2 * h);
    }
    return grad;
  };
  return {fd(true), fd(false)};
}

// Max over entries of |a - b| / max(|a|, |b|, floor).
inline double MaxRelativeError(const Vector& a, const Vector& b,
                               double floor = 1e-3) {
  double worst = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    double scale = std::max({std::abs(a(i)), std::abs(b(i)), floor});
    worst = std::max(worst, std::abs(a(i) - b(i)) / scale);
  }
  return worst;
}

}  // namespace ftl::testing

#endif  // FTL_TESTS_TEST_UTIL_H_
