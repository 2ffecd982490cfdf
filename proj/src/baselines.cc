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

#include "ftl/baselines.h"

#include <algorithm>
#include <cmath>

#include "ftl/errors.h"

namespace ftl::baselines {
namespace {

void CheckLabels(const Matrix& x, const std::vector<int>& y) {
  if (y.empty() || static_cast<Eigen::Index>(y.size()) != x.rows()) {
    throw DataError("baseline needs one label per non-empty row");
  }
  for (int v : y) {
    if (v != 1 && v != -1) throw DataError("labels must be +-1");
  }
}

// Majority label when every label agrees, 0 otherwise.
int SingleClass(const std::vector<int>& y) {
  return std::all_of(y.begin(), y.end(), [&](int v) { return v == y[0]; })
             ? y[0]
             : 0;
}

}  // namespace

Vector LinearModel::Scores(const Matrix& x) const {
  if (constant_label != 0) return Vector::Constant(x.rows(), constant_label);
  if (x.cols() != w.size()) throw ShapeError("linear model width mismatch");
  return (x * w).array() + b;
}

std::vector<int> LinearModel::Predict(const Matrix& x) const {
  Vector s = Scores(x);
  std::vector<int> out(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) out[i] = s(i) >= 0 ? 1 : -1;
  return out;
}

LinearModel FitLogistic(const Matrix& x, const std::vector<int>& y, double l2,
                        int max_iter) {
  CheckLabels(x, y);
  LinearModel m;
  m.w = Vector::Zero(x.cols());
  if ((m.constant_label = SingleClass(y)) != 0) return m;
  const Eigen::Index n = x.rows(), p = x.cols() + 1;
  Matrix xb(n, p);
  xb << x, Vector::Ones(n);
  Vector yv(n);
  for (Eigen::Index i = 0; i < n; ++i) yv(i) = y[i];
  Vector beta = Vector::Zero(p);
  Vector reg = Vector::Constant(p, l2 * n);
  reg(p - 1) = 1e-8 * n;  // bias is not shrunk
  for (int it = 0; it < max_iter; ++it) {
    Vector margin = (xb * beta).cwiseProduct(yv);
    Vector s(n), wts(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      s(i) = nn::Sigmoid(-margin(i));  // d/dmargin of log(1 + e^-margin)
      wts(i) = s(i) * (1 - s(i));
    }
    Vector grad = -xb.transpose() * s.cwiseProduct(yv) + reg.cwiseProduct(beta);
    Matrix hess = xb.transpose() * wts.asDiagonal() * xb;
    hess.diagonal() += reg;
    Vector step = hess.ldlt().solve(grad);
    beta -= step;
    if (step.norm() < 1e-10 * (1 + beta.norm())) break;
  }
  m.w = beta.head(p - 1);
  m.b = beta(p - 1);
  return m;
}

LinearModel FitHingeSvm(const Matrix& x, const std::vector<int>& y, double l2,
                        int iterations) {
  CheckLabels(x, y);
  LinearModel m;
  m.w = Vector::Zero(x.cols());
  if ((m.constant_label = SingleClass(y)) != 0) return m;
  const double n = static_cast<double>(x.rows());
  Vector avg_w = m.w;
  double avg_b = 0;
  for (int t = 1; t <= iterations; ++t) {
    Vector gw = l2 * m.w;
    double gb = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      if (y[i] * (x.row(i).dot(m.w) + m.b) < 1) {
        gw -= y[i] * x.row(i).transpose() / n;
        gb -= y[i] / n;
      }
    }
    const double step = 1.0 / (l2 * t);
    m.w -= step * gw;
    m.b -= step * gb;
    // Averaged iterate over the second half smooths the subgradient noise.
    if (t > iterations / 2) {
      const double k = t - iterations / 2;
      avg_w += (m.w - avg_w) / k;
      avg_b += (m.b - avg_b) / k;
    }
  }
  m.w = avg_w;
  m.b = avg_b;
  return m;
}

std::vector<int> SaeModel::Predict(const Matrix& x) const {
  return head.Predict(nn::Forward(encoder, x));
}

SaeModel FitSae(const nn::Network& init, const Matrix& x_unlabeled,
                const Matrix& x, const std::vector<int>& y, int epochs,
                double lr) {
  CheckLabels(x, y);
  SaeModel m;
  m.encoder = nn::AutoencoderPretrain(init, x_unlabeled, epochs, lr);
  m.head = FitLogistic(nn::Forward(m.encoder, x), y);
  return m;
}

}  // namespace ftl::baselines
