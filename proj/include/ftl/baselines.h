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

// Self-learning baselines trained on B's labeled rows only.

#ifndef FTL_BASELINES_H_
#define FTL_BASELINES_H_

#include <cstdint>
#include <vector>

#include "ftl/neural.h"

namespace ftl::baselines {

using nn::Matrix;
using nn::Vector;

// sign(w'x + b) with ties to +1. When the training labels were all one class
// the model predicts that class.
struct LinearModel {
  Vector w;
  double b = 0;
  int constant_label = 0;  // nonzero for a degenerate fit

  Vector Scores(const Matrix& x) const;
  std::vector<int> Predict(const Matrix& x) const;
};

// L2-regularized logistic regression fit by Newton's method.
LinearModel FitLogistic(const Matrix& x, const std::vector<int>& y,
                        double l2 = 1e-3, int max_iter = 50);

// Linear soft-margin classifier: hinge loss plus l2/2 |w|^2, full-batch
// subgradient descent with a 1/(l2 t) step.
LinearModel FitHingeSvm(const Matrix& x, const std::vector<int>& y,
                        double l2 = 1e-2, int iterations = 2000);

// Stacked autoencoder features followed by a logistic layer.
struct SaeModel {
  nn::Network encoder;
  LinearModel head;

  std::vector<int> Predict(const Matrix& x) const;
};

// Pretrains `init` on `x_unlabeled` (all of B's rows) and fits the logistic
// layer on the labeled rows' representations.
SaeModel FitSae(const nn::Network& init, const Matrix& x_unlabeled,
                const Matrix& x, const std::vector<int>& y, int epochs,
                double lr);

}  // namespace ftl::baselines

#endif  // FTL_BASELINES_H_
