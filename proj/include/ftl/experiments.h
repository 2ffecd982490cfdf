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

// Experiment runner: builds federations, trains FTL and the self-learning
// baselines, and collects scores, loss curves, transcripts and timings.

#ifndef FTL_EXPERIMENTS_H_
#define FTL_EXPERIMENTS_H_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "ftl/datasets.h"
#include "ftl/pipeline.h"
#include "ftl/protocol.h"

namespace ftl::experiments {

enum class Kind { kTaylorVsExact, kFtlVsSelf, kOverlapSweep, kTrcvVsCv, kScalingSweep };

Kind ParseKind(const std::string& s);
std::string KindName(Kind k);

struct ExperimentConfig {
  Kind kind = Kind::kFtlVsSelf;

  // Data: "synthetic" or "csv".
  std::string dataset = "synthetic";
  std::string csv_path;
  data::CsvSchema csv;
  std::vector<int> a_cols;  // empty: first half of the columns
  data::SynthOptions synth{.n = 2000, .d_a = 10, .d_b = 100, .latent = 4,
                           .noise = 0.2, .noise_b = 2.0};
  bool shuffle_labels = false;
  data::SplitOptions split{.overlap_count = 250, .label_count = 100};

  pipeline::ModelSpec model;
  objective::TrainingConfig training{.learning_rate = 0.02, .max_iterations = 500};

  // "plain" evaluates the objective directly; "secure" runs both parties.
  std::string engine = "plain";
  protocol::ProtocolOptions protocol{.alignment =
                                         objective::AlignmentKind::kSquaredDistance};
  protocol::TransportKind transport = protocol::TransportKind::kLoopback;

  uint64_t seed = 1;
  int seeds = 5;  // repetitions with seed, seed + 1, ...

  std::vector<int> label_values = {100, 200};
  std::vector<int> overlap_values = {25, 100, 250};
  std::vector<int> k_values = {2, 3, 5};
  std::vector<double> gamma_values = {0.005, 0.05};
  std::vector<double> lambda_values = {0.005};
  std::vector<int> d_values = {2, 4, 8, 16};
  std::vector<int> feature_values = {10, 20, 40, 80};
  std::vector<int> nab_values = {8, 16, 32, 64};
  int scaling_d = 4;
  int scaling_features = 10;
  int scaling_nab = 16;
  int scaling_n_c = 4;
  int scaling_iterations = 3;

  // Throws ConfigError on inconsistent settings or missing files.
  void Validate() const;
};

// key = value lines; '#' starts a comment, [section] lines are ignored and
// keys may be written section.key. Unknown keys are a ConfigError.
ExperimentConfig ParseConfig(std::istream& in);
ExperimentConfig LoadConfig(const std::string& path);
void ApplySetting(ExperimentConfig& cfg, const std::string& key,
                  const std::string& value);

struct ResultRow {
  std::string method;
  std::string param;
  double param_value = 0;
  uint64_t seed = 0;
  std::string metric;
  double value = 0;
};

struct LossRow {
  std::string run;
  uint64_t seed = 0;
  int iteration = 0;
  double loss = 0;
};

struct TranscriptRow {
  std::string run;
  std::string party;
  std::string direction;
  std::string msg_type;
  uint64_t frames = 0;
  uint64_t wire_bytes = 0;
  uint64_t payload_bytes = 0;
  uint64_t hash = 0;  // of the party's whole transcript
};

struct TimingRow {
  std::string run;
  std::string param;
  double param_value = 0;
  int iteration = 0;
  double seconds = 0;
};

struct RunResult {
  Kind kind = Kind::kFtlVsSelf;
  std::vector<ResultRow> results;
  std::vector<LossRow> losses;
  std::vector<TranscriptRow> transcripts;
  std::vector<TimingRow> timings;

  // Mean over seeds of the matching rows; NaN when there are none.
  double Mean(const std::string& method, const std::string& metric,
              const std::string& param = "",
              double param_value = 0) const;
};

RunResult RunExperiment(const ExperimentConfig& cfg);

// results.csv, loss_history.csv and transcript_summary.csv are byte-identical
// for identical configs; wall-clock timings go to timing.csv.
void WriteOutputs(const RunResult& r, const std::string& dir);

// Federation for one repetition, standardized per party.
data::FederationSplit BuildSplit(const ExperimentConfig& cfg, uint64_t seed);

}  // namespace ftl::experiments

#endif  // FTL_EXPERIMENTS_H_
