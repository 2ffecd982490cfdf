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

#include "ftl/datasets.h"

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "ftl/baselines.h"

namespace ftl::data {
namespace {

TEST(CsvTest, TwoByTwo) {
  std::istringstream in("f1,f2,label\n1.5,2,1\n-3,4e-1,0\n");
  Dataset d = ParseCsv(in, {.label_column = "label"});
  ASSERT_EQ(d.x.rows(), 2);
  ASSERT_EQ(d.x.cols(), 2);
  EXPECT_DOUBLE_EQ(d.x(0, 0), 1.5);
  EXPECT_DOUBLE_EQ(d.x(1, 1), 0.4);
  EXPECT_EQ(d.y, (std::vector<int>{1, -1}));
  EXPECT_EQ(d.ids, (std::vector<int64_t>{0, 1}));
}

TEST(CsvTest, ThreeLevelCategoricalGivesThreeIndicators) {
  std::istringstream in("c,v,y\n2,0.5,1\n7,0.1,1\n3,0.2,0\n2,0.9,0\n");
  Dataset d = ParseCsv(in, {.label_column = "y", .categorical = {"c"}});
  ASSERT_EQ(d.x.cols(), 4);
  EXPECT_EQ(d.feature_names,
            (std::vector<std::string>{"c=2", "c=3", "c=7", "v"}));
  for (int r = 0; r < 4; ++r) EXPECT_DOUBLE_EQ(d.x.row(r).head(3).sum(), 1.0);
  EXPECT_DOUBLE_EQ(d.x(1, 2), 1.0);
}

// Default-Credit layout: ID, 23 raw attributes, default flag. SEX, EDUCATION
// and MARRIAGE expand to 2 + 7 + 4 indicators, giving 33 feature columns.
TEST(CsvTest, CreditShapedFileExpandsTo33Columns) {
  std::ostringstream csv;
  csv << "ID,LIMIT_BAL,SEX,EDUCATION,MARRIAGE,AGE";
  for (int i = 0; i < 6; ++i) csv << ",PAY_" << i;
  for (int i = 1; i <= 6; ++i) csv << ",BILL_AMT" << i;
  for (int i = 1; i <= 6; ++i) csv << ",PAY_AMT" << i;
  csv << ",default\n";
  std::mt19937_64 rng(3);
  for (int r = 0; r < 70; ++r) {
    csv << r + 1 << "," << 10000 * (r % 9 + 1) << "," << r % 2 + 1 << ","
        << r % 7 << "," << r % 4 << "," << 20 + r % 40;
    for (int i = 0; i < 18; ++i) csv << "," << (rng() % 2000) - 500;
    csv << "," << r % 3 % 2 << "\n";
  }
  std::istringstream in(csv.str());
  Dataset d = ParseCsv(in, {.label_column = "default",
                            .id_column = "ID",
                            .categorical = {"SEX", "EDUCATION", "MARRIAGE"}});
  EXPECT_EQ(d.x.cols(), 33);
  EXPECT_EQ(d.x.rows(), 70);
  EXPECT_EQ(d.ids.front(), 1);
  EXPECT_EQ(d.ids.back(), 70);
}

TEST(CsvTest, BadCellNamesRowAndColumn) {
  std::istringstream in("a,b,y\n1,2,1\n3,oops,0\n");
  try {
    ParseCsv(in, {.label_column = "y"});
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("column b"), std::string::npos);
  }
  std::istringstream missing("a,b\n1,2\n");
  EXPECT_THROW(ParseCsv(missing, {.label_column = "y"}), DataError);
  std::istringstream empty_cell("a,y\n,1\n");
  EXPECT_THROW(ParseCsv(empty_cell, {.label_column = "y"}), DataError);
  std::istringstream ragged("a,y\n1\n");
  EXPECT_THROW(ParseCsv(ragged, {.label_column = "y"}), DataError);
}

TEST(CsvTest, ReserializeIsLossless) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal(0, 1e3);
  std::ostringstream src;
  src << std::setprecision(17) << "p,q,r,label\n";
  std::vector<double> values;
  for (int r = 0; r < 25; ++r) {
    for (int c = 0; c < 3; ++c) {
      values.push_back(normal(rng));
      src << values.back() << ",";
    }
    src << (r % 2 ? 1 : -1) << "\n";
  }
  std::istringstream in(src.str());
  Dataset d = ParseCsv(in, {.label_column = "label"});
  std::ostringstream out;
  WriteCsv(d, out);
  std::istringstream back(out.str());
  Dataset e = ParseCsv(back, {.label_column = "label"});
  for (int r = 0; r < 25; ++r) {
    for (int c = 0; c < 3; ++c) {
      EXPECT_EQ(d.x(r, c), values[3 * r + c]);
      EXPECT_EQ(e.x(r, c), values[3 * r + c]);
    }
  }
  EXPECT_EQ(d.y, e.y);
}

Dataset Numbered(int n, int cols) {
  Dataset d;
  d.x.resize(n, cols);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < cols; ++c) d.x(r, c) = 100 * r + c;
    d.y.push_back(r % 3 == 0 ? 1 : -1);
    d.ids.push_back(1000 + r);
  }
  return d;
}

TEST(SplitTest, InvariantsHoldAcrossSeedsAndFractions) {
  Dataset d = Numbered(60, 6);
  FeatureAssignment fa = HalfSplit(6);
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    SplitOptions o;
    o.seed = seed;
    o.a_share = 0.3 + 0.02 * seed;
    o.b_share = 0.4;
    o.overlap_fraction = 0.05 * seed;
    o.label_fraction = 0.04 * seed;
    FederationSplit s = VerticalSplit(d, fa, o);
    EXPECT_NO_THROW(CheckSplit(s));
    std::set<int64_t> a(s.ids_a.begin(), s.ids_a.end());
    std::set<int64_t> b(s.ids_b.begin(), s.ids_b.end());
    int shared = 0;
    for (int64_t id : a) shared += b.count(id);
    EXPECT_EQ(shared, static_cast<int>(s.overlap.size()));
    EXPECT_EQ(static_cast<int>(s.overlap.size()),
              std::lround(o.overlap_fraction * std::min(s.n_a(), s.n_b())));
    for (int r = 0; r < s.n_a(); ++r) {
      // Row contents follow the id: A holds columns 0..2 of that sample.
      EXPECT_EQ(s.x_a(r, 0), 100 * (s.ids_a[r] - 1000));
      EXPECT_EQ(s.y_a[r], d.y[s.ids_a[r] - 1000]);
    }
    for (int r = 0; r < s.n_b(); ++r) {
      EXPECT_EQ(s.x_b(r, 0), 100 * (s.ids_b[r] - 1000) + 3);
    }
  }
}

TEST(SplitTest, FullOverlapAndNoLabels) {
  Dataset d = Numbered(40, 4);
  SplitOptions o;
  o.a_share = 0.5;
  o.b_share = 0.3;
  o.overlap_fraction = 1.0;
  o.label_fraction = 0.0;
  FederationSplit s = VerticalSplit(d, HalfSplit(4), o);
  EXPECT_EQ(static_cast<int>(s.overlap.size()), std::min(s.n_a(), s.n_b()));
  EXPECT_TRUE(s.labeled_b.empty());
  EXPECT_EQ(static_cast<int>(s.UnlabeledB().size()), s.n_b());
}

TEST(SplitTest, Deterministic) {
  Dataset d = Numbered(50, 5);
  SplitOptions o;
  o.seed = 9;
  FederationSplit s = VerticalSplit(d, HalfSplit(5), o);
  FederationSplit t = VerticalSplit(d, HalfSplit(5), o);
  EXPECT_EQ(s.x_a, t.x_a);
  EXPECT_EQ(s.x_b, t.x_b);
  EXPECT_EQ(s.ids_a, t.ids_a);
  EXPECT_EQ(s.ids_b, t.ids_b);
  EXPECT_EQ(s.labeled_b, t.labeled_b);
  std::ostringstream m1, m2;
  WriteManifest(s, m1);
  WriteManifest(t, m2);
  EXPECT_EQ(m1.str(), m2.str());
  o.seed = 10;
  EXPECT_NE(VerticalSplit(d, HalfSplit(5), o).ids_a, s.ids_a);
}

TEST(SplitTest, Errors) {
  Dataset d = Numbered(20, 4);
  SplitOptions o;
  EXPECT_THROW(VerticalSplit(d, {{0, 1, 2, 3}, {}}, o), DataError);
  EXPECT_THROW(VerticalSplit(d, {{0, 1}, {1, 2}}, o), DataError);
  EXPECT_THROW(VerticalSplit(d, {{0, 9}, {1}}, o), DataError);
  o.a_share = 0.8;
  o.b_share = 0.8;
  o.overlap_fraction = 0.1;
  EXPECT_THROW(VerticalSplit(d, HalfSplit(4), o), DataError);
  o.a_share = 0.0;
  EXPECT_THROW(VerticalSplit(d, HalfSplit(4), o), DataError);
  o = SplitOptions{};
  o.label_fraction = 1.5;
  EXPECT_THROW(VerticalSplit(d, HalfSplit(4), o), DataError);
}

TEST(ManifestTest, Roundtrip) {
  SplitOptions o;
  o.label_fraction = 0.3;
  FederationSplit s = VerticalSplit(Numbered(30, 4), HalfSplit(4), o);
  std::ostringstream out;
  WriteManifest(s, out);
  std::istringstream in(out.str());
  Manifest m = ReadManifest(in);
  EXPECT_EQ(m.a, s.ids_a);
  EXPECT_EQ(m.b, s.ids_b);
  ASSERT_EQ(m.ab.size(), s.overlap.size());
  ASSERT_EQ(m.c.size(), s.labeled_b.size());
  for (size_t i = 0; i < m.c.size(); ++i) {
    EXPECT_EQ(m.c[i], s.ids_b[s.labeled_b[i]]);
  }
}

TEST(SynthTest, LabelsRoughlyBalanced) {
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    SynthOptions o;
    o.n = 1000;
    o.seed = seed;
    TwoView t = SynthTwoView(o);
    int pos = 0;
    for (int y : t.data.y) pos += y == 1;
    EXPECT_NEAR(pos / 1000.0, 0.5, 0.1) << "seed " << seed;
  }
}

TEST(SynthTest, NoiselessIdentityViewsAreEqual) {
  SynthOptions o;
  o.n = 50;
  o.d_a = o.d_b = o.latent = 3;
  o.noise = 0;
  o.identity_maps = true;
  TwoView t = SynthTwoView(o);
  EXPECT_EQ(t.data.x.leftCols(3), t.data.x.rightCols(3));
  EXPECT_EQ(t.data.x.leftCols(3), t.z);
  // Identical representations leave nothing for the squared distance to pay.
  auto align = objective::AlignmentSpec::SquaredDistance();
  for (int r = 0; r < 50; ++r) {
    Vector v = t.data.x.row(r).head(3).transpose();
    EXPECT_EQ(align.Direct(v, v), 0.0);
  }
  o.d_a = 4;
  EXPECT_THROW(SynthTwoView(o), DataError);
}

TEST(SynthTest, ConcatenatedViewsBeatSingleView) {
  double joint = 0, single = 0;
  for (uint64_t seed = 1; seed <= 3; ++seed) {
    SynthOptions o;
    o.n = 1200;
    o.noise = 1.0;
    o.seed = seed;
    TwoView t = SynthTwoView(o);
    std::vector<int> train(800), test(400);
    std::iota(train.begin(), train.end(), 0);
    std::iota(test.begin(), test.end(), 800);
    Dataset tr = Subset(t.data, train), te = Subset(t.data, test);
    joint += WeightedF1(baselines::FitLogistic(tr.x, tr.y).Predict(te.x), te.y)
                 .weighted_f1;
    Matrix tr_b = tr.x.rightCols(o.d_b), te_b = te.x.rightCols(o.d_b);
    single += WeightedF1(baselines::FitLogistic(tr_b, tr.y).Predict(te_b), te.y)
                  .weighted_f1;
  }
  EXPECT_GT(joint, single);
}

TEST(SynthTest, ShuffledLabelsKeepCounts) {
  TwoView t = SynthTwoView({});
  Dataset s = ShuffleLabels(t.data, 4);
  EXPECT_NE(s.y, t.data.y);
  EXPECT_EQ(std::count(s.y.begin(), s.y.end(), 1),
            std::count(t.data.y.begin(), t.data.y.end(), 1));
}

TEST(F1Test, PerfectAndAllPositive) {
  std::vector<int> truth = {1, -1, 1, -1, 1, -1};
  EXPECT_DOUBLE_EQ(WeightedF1(truth, truth).weighted_f1, 1.0);
  std::vector<int> ones(6, 1);
  MetricReport m = WeightedF1(ones, truth);
  EXPECT_NEAR(m.weighted_f1, 1.0 / 3.0, 1e-15);
  EXPECT_EQ(m.tp, 3);
  EXPECT_EQ(m.fp, 3);
  EXPECT_EQ(m.per_class[1].f1, 0.0);
}

TEST(F1Test, PropertiesOnRandomVectors) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 1 + rng() % 40;
    std::vector<int> p(n), t(n);
    for (int i = 0; i < n; ++i) {
      p[i] = rng() % 2 ? 1 : -1;
      t[i] = rng() % 2 ? 1 : -1;
    }
    MetricReport m = WeightedF1(p, t);
    EXPECT_GE(m.weighted_f1, 0.0);
    EXPECT_LE(m.weighted_f1, 1.0);
    EXPECT_EQ(m.weighted_f1 == 1.0, p == t);
    double manual = 0;
    for (const ClassStats& c : m.per_class) manual += c.support * c.f1 / n;
    EXPECT_NEAR(m.weighted_f1, manual, 1e-15);
    // Renaming the classes in both arguments leaves the score unchanged.
    std::vector<int> pn(n), tn(n);
    for (int i = 0; i < n; ++i) {
      pn[i] = -p[i];
      tn[i] = -t[i];
    }
    EXPECT_NEAR(WeightedF1(pn, tn).weighted_f1, m.weighted_f1, 1e-12);
    // Reordering samples too.
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> pp(n), tp(n);
    for (int i = 0; i < n; ++i) {
      pp[i] = p[perm[i]];
      tp[i] = t[perm[i]];
    }
    EXPECT_NEAR(WeightedF1(pp, tp).weighted_f1, m.weighted_f1, 1e-12);
  }
  EXPECT_THROW(WeightedF1({}, {}), DataError);
  EXPECT_THROW(WeightedF1({1}, {1, -1}), DataError);
  EXPECT_THROW(WeightedF1({0}, {1}), DataError);
}

TEST(ResampleTest, Balanced) {
  Dataset d = Numbered(90, 2);  // 30 positive
  Dataset b = BalancedResample(d, 3);
  EXPECT_EQ(b.x.rows(), 60);
  EXPECT_EQ(std::count(b.y.begin(), b.y.end(), 1), 30);
  for (int r = 0; r < 60; ++r) EXPECT_EQ(b.x(r, 0), 100 * (b.ids[r] - 1000));
  EXPECT_EQ(BalancedResample(d, 3).ids, b.ids);
}

TEST(StandardizeTest, PerPartyStatistics) {
  Matrix x(4, 3);
  x << 1, 5, 7, 2, 5, 9, 3, 5, 11, 4, 5, 13;
  Standardizer s = Standardizer::Fit(x);
  Matrix z = s.Apply(x);
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(z.col(c).mean(), 0, 1e-12);
  EXPECT_NEAR(z.col(0).squaredNorm() / 4, 1, 1e-12);
  EXPECT_EQ(z.col(1), Vector::Zero(4));
  EXPECT_THROW(s.Apply(Matrix::Zero(2, 2)), ShapeError);

  SplitOptions o;
  FederationSplit split = VerticalSplit(Numbered(40, 4), HalfSplit(4), o);
  Matrix b_before = split.x_b;
  StandardizeParties(split);
  EXPECT_EQ(split.x_b, Standardizer::Fit(b_before).Apply(b_before));
}

}  // namespace
}  // namespace ftl::data
