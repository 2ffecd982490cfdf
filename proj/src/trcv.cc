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

#include "ftl/trcv.h"

#include <algorithm>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>
#include <set>

#include "ftl/baselines.h"

namespace ftl::trcv {

FoldPlan MakeFolds(const std::vector<int>& indices, int k, uint64_t seed) {
  if (k < 2) throw ConfigError("K must be at least 2");
  if (static_cast<size_t>(k) > indices.size()) {
    throw ConfigError("fewer labeled samples than folds");
  }
  std::vector<int> order = indices;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  FoldPlan plan;
  plan.k = k;
  const size_t base = order.size() / k, extra = order.size() % k;
  size_t pos = 0;
  for (int f = 0; f < k; ++f) {
    const size_t len = base + (static_cast<size_t>(f) < extra ? 1 : 0);
    plan.folds.emplace_back(order.begin() + pos, order.begin() + pos + len);
    pos += len;
  }
  return plan;
}

void CheckFoldPlan(const FoldPlan& plan, const std::vector<int>& indices) {
  if (plan.k != static_cast<int>(plan.folds.size())) {
    throw DataError("fold count mismatch");
  }
  std::multiset<int> seen;
  size_t lo = SIZE_MAX, hi = 0;
  for (const auto& f : plan.folds) {
    if (f.empty()) throw DataError("empty fold");
    seen.insert(f.begin(), f.end());
    lo = std::min(lo, f.size());
    hi = std::max(hi, f.size());
  }
  if (hi - lo > 1) throw DataError("fold sizes differ by more than one");
  if (seen != std::multiset<int>(indices.begin(), indices.end())) {
    throw DataError("folds do not partition the labeled indices");
  }
}

double MeanScore(const std::vector<double>& scores) {
  if (scores.empty()) throw DataError("no fold scores");
  return std::accumulate(scores.begin(), scores.end(), 0.0) / scores.size();
}

int SelectBest(const std::vector<double>& values) {
  if (values.empty()) throw DataError("empty model space");
  return static_cast<int>(std::max_element(values.begin(), values.end()) -
                          values.begin());
}

void WriteFoldReportCsv(const FoldReport& report, std::ostream& out) {
  out << "fold_index,score,config_id\n" << std::setprecision(17);
  for (const CandidateScores& c : report.candidates) {
    for (size_t f = 0; f < c.fold_scores.size(); ++f) {
      out << f << "," << c.fold_scores[f] << "," << c.id << "\n";
    }
  }
  for (const CandidateScores& c : report.candidates) {
    out << "mean," << c.mean << "," << c.id << "\n";
  }
  if (report.selected >= 0) {
    out << "selected," << report.best().mean << "," << report.best().id << "\n";
  }
}

double ScoreFold(const data::FederationSplit& split,
                 const std::vector<int>& held_out_a,
                 const pipeline::InitialNets& init,
                 const objective::TrainingConfig& cfg,
                 pipeline::Engine& engine) {
  if (held_out_a.empty()) throw DataError("empty fold");
  objective::Instance inst = split.ToInstance();
  std::set<int64_t> held_ids;
  for (int j : held_out_a) {
    inst.y_a.at(j) = 0;
    held_ids.insert(split.ids_a[j]);
  }
  std::erase_if(inst.labeled, [&](const objective::LabeledRow& l) {
    return held_ids.count(split.ids_b[l.b_row]) > 0;
  });

  objective::LocalAutoencoders local = init.local;
  pipeline::TrainOutput first = engine.Train(split.x_a, split.x_b, inst,
                                             init.a, init.b, cfg, &local);

  // Pseudo-label every B row outside the labeled pool.
  std::vector<bool> labeled(split.n_b(), false);
  for (const auto& l : inst.labeled) labeled[l.b_row] = true;
  std::vector<int> unlabeled;
  for (int r = 0; r < split.n_b(); ++r) {
    if (!labeled[r]) unlabeled.push_back(r);
  }
  if (!unlabeled.empty()) {
    std::vector<int> pseudo =
        engine.Predict(first.net_a, split.x_a, inst.y_a, first.net_b,
                       pipeline::Rows(split.x_b, unlabeled));
    for (size_t i = 0; i < unlabeled.size(); ++i) {
      inst.labeled.push_back({unlabeled[i], pseudo[i]});
    }
  }

  local = init.local;
  pipeline::TrainOutput second = engine.Train(split.x_a, split.x_b, inst,
                                              init.a, init.b, cfg, &local);

  // B's translator mirrors A's: label-weighted mean over its labeled rows.
  std::vector<int> y_b(split.n_b(), 0);
  for (const auto& l : inst.labeled) y_b[l.b_row] = l.y;
  const Vector phi_b =
      objective::ComputePhi(nn::Forward(second.net_b, split.x_b), y_b);
  const Matrix u_held =
      nn::Forward(second.net_a, pipeline::Rows(split.x_a, held_out_a));
  return data::WeightedF1(engine.CrossPredict(phi_b, u_held),
                          pipeline::Pick(split.y_a, held_out_a))
      .weighted_f1;
}

FoldReport RunTrcv(const std::vector<Candidate>& space,
                   const data::FederationSplit& split,
                   const TrcvOptions& options, pipeline::Engine& engine) {
  if (space.empty()) throw ConfigError("empty model space");
  std::vector<int> labeled_a;
  for (int j = 0; j < split.n_a(); ++j) {
    if (split.y_a[j] != 0) labeled_a.push_back(j);
  }
  const FoldPlan plan = MakeFolds(labeled_a, options.k, options.seed);
  CheckFoldPlan(plan, labeled_a);
  // Pretraining ignores labels, so every fold and candidate starts from it.
  const pipeline::InitialNets init = pipeline::Initialize(split, options.spec);

  FoldReport report;
  report.k = plan.k;
  std::vector<double> means;
  for (const Candidate& c : space) {
    CandidateScores s;
    s.id = c.id;
    for (const auto& fold : plan.folds) {
      s.fold_scores.push_back(ScoreFold(split, fold, init, c.cfg, engine));
    }
    s.mean = MeanScore(s.fold_scores);
    means.push_back(s.mean);
    report.candidates.push_back(std::move(s));
  }
  report.selected = SelectBest(means);
  return report;
}

Decision Safeguard(double ftl_score, double baseline_score) {
  return ftl_score < baseline_score ? Decision::kNoTransfer
                                    : Decision::kTransfer;
}

double SelfLearningScore(const data::FederationSplit& split, int k,
                         uint64_t seed) {
  const int n_c = static_cast<int>(split.labeled_b.size());
  if (n_c == 0) throw DataError("self-learning needs a non-empty D_c");
  if (n_c == 1) return 1.0;  // the lone label is its own majority
  std::vector<int> idx(n_c);
  std::iota(idx.begin(), idx.end(), 0);
  const FoldPlan plan = MakeFolds(idx, std::min(k, n_c), seed);
  std::vector<int> rows_c = split.labeled_b;
  std::vector<int> y_c = pipeline::Pick(split.y_b, rows_c);
  std::vector<double> scores;
  for (const auto& fold : plan.folds) {
    std::vector<bool> held(n_c, false);
    for (int i : fold) held[i] = true;
    std::vector<int> train;
    for (int i = 0; i < n_c; ++i) {
      if (!held[i]) train.push_back(i);
    }
    baselines::LinearModel m = baselines::FitLogistic(
        pipeline::Rows(split.x_b, pipeline::Pick(rows_c, train)),
        pipeline::Pick(y_c, train));
    scores.push_back(
        data::WeightedF1(
            m.Predict(pipeline::Rows(split.x_b, pipeline::Pick(rows_c, fold))),
            pipeline::Pick(y_c, fold))
            .weighted_f1);
  }
  return MeanScore(scores);
}

SafeguardResult SelfLearningSafeguard(const data::FederationSplit& split,
                                      double ftl_score, int k, uint64_t seed) {
  SafeguardResult r;
  r.ftl_score = ftl_score;
  r.baseline_score = SelfLearningScore(split, k, seed);
  r.decision = Safeguard(ftl_score, r.baseline_score);
  return r;
}

}  // namespace ftl::trcv
