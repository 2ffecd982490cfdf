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

#include <gtest/gtest.h>

#include "ftl/datasets.h"

namespace ftl::baselines {
namespace {

// Two well separated clusters along the first coordinate.
void Separable(int n, std::mt19937_64& rng, Matrix& x, std::vector<int>& y) {
  std::normal_distribution<double> normal(0, 0.3);
  x.resize(n, 3);
  y.resize(n);
  for (int i = 0; i < n; ++i) {
    y[i] = i % 2 ? 1 : -1;
    x(i, 0) = 2.0 * y[i] + normal(rng);
    x(i, 1) = normal(rng);
    x(i, 2) = normal(rng);
  }
}

TEST(BaselinesTest, SeparableDataIsFitPerfectly) {
  std::mt19937_64 rng(1);
  Matrix x, xt;
  std::vector<int> y, yt;
  Separable(40, rng, x, y);
  Separable(200, rng, xt, yt);
  EXPECT_EQ(data::WeightedF1(FitLogistic(x, y).Predict(xt), yt).weighted_f1,
            1.0);
  EXPECT_EQ(data::WeightedF1(FitHingeSvm(x, y).Predict(xt), yt).weighted_f1,
            1.0);
}

TEST(BaselinesTest, LogisticGradientVanishesAtOptimum) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal(0, 1);
  Matrix x(60, 4);
  std::vector<int> y(60);
  for (int i = 0; i < 60; ++i) {
    for (int c = 0; c < 4; ++c) x(i, c) = normal(rng);
    y[i] = x(i, 0) + normal(rng) > 0 ? 1 : -1;
  }
  const double l2 = 0.01;
  LinearModel m = FitLogistic(x, y, l2);
  Vector gw = l2 * 60 * m.w;
  double gb = 0;
  for (int i = 0; i < 60; ++i) {
    const double s = nn::Sigmoid(-y[i] * (x.row(i).dot(m.w) + m.b));
    gw -= s * y[i] * x.row(i).transpose();
    gb -= s * y[i];
  }
  EXPECT_LT(gw.norm(), 1e-8);
  EXPECT_LT(std::abs(gb), 1e-6);
}

TEST(BaselinesTest, SingleClassPredictsThatClass) {
  Matrix x = Matrix::Random(5, 2);
  std::vector<int> y(5, -1);
  EXPECT_EQ(FitLogistic(x, y).Predict(Matrix::Random(3, 2)),
            std::vector<int>(3, -1));
  EXPECT_EQ(FitHingeSvm(x, y).Predict(Matrix::Random(3, 2)),
            std::vector<int>(3, -1));
  EXPECT_THROW(FitLogistic(x, {1, 1}), DataError);
}

TEST(BaselinesTest, SaeKeepsTheEncoderShape) {
  std::mt19937_64 rng(4);
  Matrix x, xt;
  std::vector<int> y, yt;
  Separable(60, rng, x, y);
  Separable(100, rng, xt, yt);
  nn::Network init = nn::Init({3, 6, 4}, rng);
  SaeModel m = FitSae(init, x, x, y, 50, 0.1);
  ASSERT_EQ(m.encoder.layers.size(), init.layers.size());
  for (size_t l = 0; l < init.layers.size(); ++l) {
    EXPECT_EQ(m.encoder.layers[l].weights.rows(), init.layers[l].weights.rows());
    EXPECT_EQ(m.encoder.layers[l].weights.cols(), init.layers[l].weights.cols());
  }
  EXPECT_GT(data::WeightedF1(m.Predict(xt), yt).weighted_f1, 0.9);
}

TEST(BaselinesTest, ShuffledLabelsScoreNearChance) {
  double lr = 0, svm = 0;
  const int seeds = 10;
  for (int seed = 1; seed <= seeds; ++seed) {
    data::SynthOptions o;
    o.n = 600;
    o.seed = seed;
    data::TwoView t = data::SynthTwoView(o);
    data::Dataset d = data::ShuffleLabels(t.data, seed + 100);
    Matrix xb = d.x.rightCols(o.d_b);
    Matrix tr = xb.topRows(100), te = xb.bottomRows(500);
    std::vector<int> ytr(d.y.begin(), d.y.begin() + 100);
    std::vector<int> yte(d.y.begin() + 100, d.y.end());
    lr += data::WeightedF1(FitLogistic(tr, ytr).Predict(te), yte).weighted_f1;
    svm += data::WeightedF1(FitHingeSvm(tr, ytr).Predict(te), yte).weighted_f1;
  }
  EXPECT_NEAR(lr / seeds, 0.5, 0.1);
  EXPECT_NEAR(svm / seeds, 0.5, 0.1);
}

}  // namespace
}  // namespace ftl::baselines
