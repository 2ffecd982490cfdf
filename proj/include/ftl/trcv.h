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

// Transfer cross-validation: K-fold validation of the federated model scored
// on held-out source labels through role-swapped secure prediction, model
// selection by mean fold score, and the self-learning fallback.

#ifndef FTL_TRCV_H_
#define FTL_TRCV_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ftl/datasets.h"
#include "ftl/pipeline.h"

namespace ftl::trcv {

using nn::Matrix;
using nn::Vector;

struct FoldPlan {
  int k = 0;
  std::vector<std::vector<int>> folds;
};

// Seeded shuffle of `indices`, then K contiguous folds whose sizes differ by
// at most one. Throws ConfigError unless 2 <= k <= indices.size().
FoldPlan MakeFolds(const std::vector<int>& indices, int k, uint64_t seed);
// Throws DataError unless the folds partition `indices` with balanced sizes.
void CheckFoldPlan(const FoldPlan& plan, const std::vector<int>& indices);

struct Candidate {
  std::string id;
  objective::TrainingConfig cfg;
};

struct CandidateScores {
  std::string id;
  std::vector<double> fold_scores;
  double mean = 0;
};

struct FoldReport {
  int k = 0;
  std::vector<CandidateScores> candidates;
  int selected = -1;

  const CandidateScores& best() const { return candidates.at(selected); }
};

double MeanScore(const std::vector<double>& scores);
// Index of the largest value; the first one wins ties.
int SelectBest(const std::vector<double>& values);

// fold_index,score,config_id rows per candidate and fold, then one
// "mean" row per candidate and a "selected" row.
void WriteFoldReportCsv(const FoldReport& report, std::ostream& out);

struct TrcvOptions {
  int k = 5;
  uint64_t seed = 1;
  pipeline::ModelSpec spec;
};

// One fold: trains without the held-out A rows (dropped from Phi^A, and from
// D_c when the same sample sits there), pseudo-labels B's unlabeled rows,
// retrains on the enlarged labeled set, then scores the held-out A rows with
// B's translator Phi^B through cross prediction.
double ScoreFold(const data::FederationSplit& split,
                 const std::vector<int>& held_out_a,
                 const pipeline::InitialNets& init,
                 const objective::TrainingConfig& cfg, pipeline::Engine& engine);

FoldReport RunTrcv(const std::vector<Candidate>& space,
                   const data::FederationSplit& split,
                   const TrcvOptions& options, pipeline::Engine& engine);

enum class Decision { kTransfer, kNoTransfer };

// Transfer unless the FTL score is strictly below the baseline's.
Decision Safeguard(double ftl_score, double baseline_score);

// K-fold cross-validated weighted F1 of logistic regression on D_c (B's
// features, A's labels). k is capped at |D_c|; a single-class fold trains a
// majority predictor.
double SelfLearningScore(const data::FederationSplit& split, int k,
                         uint64_t seed);

struct SafeguardResult {
  Decision decision = Decision::kTransfer;
  double ftl_score = 0;
  double baseline_score = 0;
};
SafeguardResult SelfLearningSafeguard(const data::FederationSplit& split,
                                      double ftl_score, int k, uint64_t seed);

}  // namespace ftl::trcv

#endif  // FTL_TRCV_H_
