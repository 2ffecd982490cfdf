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

// Data ingestion and two-party federation simulation.

#ifndef FTL_DATASETS_H_
#define FTL_DATASETS_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ftl/errors.h"
#include "ftl/neural.h"
#include "ftl/objective.h"

namespace ftl::data {

using nn::Matrix;
using nn::Vector;

struct Dataset {
  Matrix x;
  std::vector<int> y;  // +-1
  std::vector<int64_t> ids;
  std::vector<std::string> feature_names;
};

struct CsvSchema {
  std::string label_column;
  // Label cells equal to this value map to +1, everything else to -1.
  double positive_label = 1.0;
  // Optional column of integer sample ids; row numbers are used otherwise.
  std::string id_column;
  // Expanded into one indicator column per observed level, levels sorted.
  std::vector<std::string> categorical;
  std::vector<std::string> drop;
};

// Numeric CSV with a header row. Throws DataError naming the row and column
// of the first bad cell.
Dataset ParseCsv(std::istream& in, const CsvSchema& schema);
Dataset LoadCsv(const std::string& path, const CsvSchema& schema);
// Writes features and label (as +-1) with full double precision.
void WriteCsv(const Dataset& d, std::ostream& out,
              const std::string& label_column = "label");

struct FeatureAssignment {
  std::vector<int> a_cols;
  std::vector<int> b_cols;
};
// First ceil(n/2) columns to A, the rest to B.
FeatureAssignment HalfSplit(int num_cols);

struct SplitOptions {
  double a_share = 0.5;  // N_A = round(a_share * N)
  double b_share = 0.5;  // N_B = round(b_share * N)
  // N_AB = round(overlap_fraction * min(N_A, N_B)) unless overlap_count >= 0.
  double overlap_fraction = 0.5;
  int overlap_count = -1;
  // N_c = round(label_fraction * N_B) unless label_count >= 0.
  double label_fraction = 0.1;
  int label_count = -1;
  uint64_t seed = 1;
};

// A holds features a_cols and every label of its rows; B holds features
// b_cols. D_AB pairs rows carrying the same sample id; D_c lists B rows whose
// labels A holds. y_b keeps B's true labels for evaluation only.
struct FederationSplit {
  Matrix x_a;
  std::vector<int> y_a;
  std::vector<int64_t> ids_a;
  Matrix x_b;
  std::vector<int> y_b;
  std::vector<int64_t> ids_b;
  std::vector<objective::OverlapPair> overlap;
  std::vector<int> labeled_b;  // D_c rows of B
  FeatureAssignment features;

  int n_a() const { return static_cast<int>(x_a.rows()); }
  int n_b() const { return static_cast<int>(x_b.rows()); }
  // B rows outside D_c.
  std::vector<int> UnlabeledB() const;
  // Training instance with every A label feeding Phi.
  objective::Instance ToInstance() const;
};

// Deterministic under options.seed. Throws DataError on an empty side, bad
// fractions, or when N_A + N_B - N_AB exceeds the sample count.
FederationSplit VerticalSplit(const Dataset& data, const FeatureAssignment& fa,
                              const SplitOptions& options);

// Throws DataError if any FederationSplit invariant fails.
void CheckSplit(const FederationSplit& s);

struct SynthOptions {
  int n = 1000;
  int d_a = 10;
  int d_b = 10;
  int latent = 4;
  double noise = 0.5;
  // Noise of view B when >= 0; otherwise `noise` applies to both views.
  double noise_b = -1.0;
  // Use identity maps (requires d_a == d_b == latent).
  bool identity_maps = false;
  // Each z is moved this far from the boundary w'z = 0 along w, leaving a
  // gap of 2 * margin between the classes in latent space.
  double margin = 0.0;
  // Probability of flipping each label.
  double label_noise = 0.0;
  uint64_t seed = 1;
};

struct TwoView {
  Dataset data;  // columns: view A then view B
  FeatureAssignment features;
  Matrix z;      // n x latent
  Matrix w_a;    // d_a x latent
  Matrix w_b;
  Vector w;      // label direction
};

// z ~ N(0, I), x_A = W_A z + e, x_B = W_B z + e, y = sign(w'z) with ties to
// +1. Ids are 0..n-1.
TwoView SynthTwoView(const SynthOptions& options);

// Returns a copy with labels permuted at random (breaks feature/label link).
Dataset ShuffleLabels(const Dataset& d, uint64_t seed);

struct ClassStats {
  int label = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  int support = 0;
};

struct MetricReport {
  double weighted_f1 = 0;
  std::vector<ClassStats> per_class;  // label +1 first, then -1
  int tp = 0, fp = 0, tn = 0, fn = 0;  // +1 as the positive class
};

// Support-weighted F1 over the two classes; a class that is never predicted
// has precision 0. Throws DataError on empty or mismatched input.
MetricReport WeightedF1(const std::vector<int>& predictions,
                        const std::vector<int>& truth);

// Undersamples the majority class to the minority count.
Dataset BalancedResample(const Dataset& d, uint64_t seed);

// Per-column zero mean / unit variance; constant columns are only centred.
struct Standardizer {
  Vector mean;
  Vector scale;

  static Standardizer Fit(const Matrix& x);
  Matrix Apply(const Matrix& x) const;
};

// Standardizes each party's features using statistics of that party's rows
// only.
void StandardizeParties(FederationSplit& s);

Dataset Subset(const Dataset& d, const std::vector<int>& rows);

// Text manifest listing sample ids per set:
//   A <ids>\nB <ids>\nAB <ids>\nC <ids>\n
void WriteManifest(const FederationSplit& s, std::ostream& out);
struct Manifest {
  std::vector<int64_t> a, b, ab, c;
};
Manifest ReadManifest(std::istream& in);

}  // namespace ftl::data

#endif  // FTL_DATASETS_H_
