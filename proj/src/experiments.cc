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

#include "ftl/experiments.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>

#include "ftl/baselines.h"
#include "ftl/transport.h"
#include "ftl/trcv.h"

namespace ftl::experiments {
namespace {

using nn::Matrix;
using objective::LossMode;

const std::map<std::string, Kind>& KindTable() {
  static const std::map<std::string, Kind> table = {
      {"taylor-vs-exact", Kind::kTaylorVsExact},
      {"ftl-vs-self", Kind::kFtlVsSelf},
      {"overlap-sweep", Kind::kOverlapSweep},
      {"trcv-vs-cv", Kind::kTrcvVsCv},
      {"scaling-sweep", Kind::kScalingSweep},
  };
  return table;
}

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  std::string out = s.substr(b, e - b + 1);
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') {
    out = out.substr(1, out.size() - 2);
  }
  return out;
}

template <typename T>
T ParseNumber(const std::string& key, const std::string& v) {
  std::istringstream in(v);
  T out{};
  in >> out;
  if (in.fail() || !in.eof()) {
    throw ConfigError("bad value '" + v + "' for " + key);
  }
  return out;
}

template <typename T>
std::vector<T> ParseList(const std::string& key, const std::string& v) {
  std::vector<T> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) {
    item = Trim(item);
    if (!item.empty()) out.push_back(ParseNumber<T>(key, item));
  }
  return out;
}

std::vector<std::string> ParseNames(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) {
    item = Trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

bool ParseBool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("bad boolean '" + v + "' for " + key);
}

using Setter = std::function<void(ExperimentConfig&, const std::string&,
                                  const std::string&)>;

#define FTL_NUM(name, field)                                               \
  {name, [](ExperimentConfig& c, const std::string& k, const std::string& v) { \
     c.field = ParseNumber<decltype(c.field)>(k, v);                       \
   }}
#define FTL_LIST(name, field, type)                                        \
  {name, [](ExperimentConfig& c, const std::string& k, const std::string& v) { \
     c.field = ParseList<type>(k, v);                                      \
   }}

const std::map<std::string, Setter>& Setters() {
  static const std::map<std::string, Setter> table = {
      {"kind", [](ExperimentConfig& c, const std::string&,
                  const std::string& v) { c.kind = ParseKind(v); }},
      {"dataset", [](ExperimentConfig& c, const std::string&,
                     const std::string& v) { c.dataset = v; }},
      {"csv_path", [](ExperimentConfig& c, const std::string&,
                      const std::string& v) { c.csv_path = v; }},
      {"label_column", [](ExperimentConfig& c, const std::string&,
                          const std::string& v) { c.csv.label_column = v; }},
      FTL_NUM("positive_label", csv.positive_label),
      {"id_column", [](ExperimentConfig& c, const std::string&,
                       const std::string& v) { c.csv.id_column = v; }},
      {"categorical", [](ExperimentConfig& c, const std::string&,
                         const std::string& v) { c.csv.categorical = ParseNames(v); }},
      {"drop", [](ExperimentConfig& c, const std::string&,
                  const std::string& v) { c.csv.drop = ParseNames(v); }},
      FTL_LIST("a_cols", a_cols, int),
      FTL_NUM("n", synth.n),
      FTL_NUM("d_a", synth.d_a),
      FTL_NUM("d_b", synth.d_b),
      FTL_NUM("latent", synth.latent),
      FTL_NUM("noise", synth.noise),
      FTL_NUM("noise_b", synth.noise_b),
      FTL_NUM("margin", synth.margin),
      FTL_NUM("label_noise", synth.label_noise),
      {"shuffle_labels", [](ExperimentConfig& c, const std::string& k,
                            const std::string& v) { c.shuffle_labels = ParseBool(k, v); }},
      FTL_NUM("a_share", split.a_share),
      FTL_NUM("b_share", split.b_share),
      FTL_NUM("overlap_fraction", split.overlap_fraction),
      FTL_NUM("overlap_count", split.overlap_count),
      FTL_NUM("label_fraction", split.label_fraction),
      FTL_NUM("label_count", split.label_count),
      FTL_LIST("hidden_a", model.hidden_a, int),
      FTL_LIST("hidden_b", model.hidden_b, int),
      FTL_NUM("d", model.d),
      FTL_NUM("pretrain_epochs", model.pretrain_epochs),
      FTL_NUM("pretrain_lr", model.pretrain_lr),
      FTL_NUM("eta", training.learning_rate),
      FTL_NUM("gamma", training.gamma),
      FTL_NUM("lambda", training.lambda),
      FTL_NUM("m", training.max_iterations),
      FTL_NUM("t", training.tolerance),
      FTL_NUM("reconstruction_weight", training.reconstruction_weight),
      {"engine", [](ExperimentConfig& c, const std::string& k,
                    const std::string& v) {
         if (v != "plain" && v != "secure") {
           throw ConfigError("bad value '" + v + "' for " + k);
         }
         c.engine = v;
       }},
      FTL_NUM("key_bits", protocol.key_bits),
      FTL_NUM("f", protocol.frac_bits),
      FTL_NUM("mask_bits", protocol.mask_bits),
      {"alignment", [](ExperimentConfig& c, const std::string& k,
                       const std::string& v) {
         if (v == "squared") {
           c.protocol.alignment = objective::AlignmentKind::kSquaredDistance;
         } else if (v == "inner") {
           c.protocol.alignment = objective::AlignmentKind::kInnerProduct;
         } else {
           throw ConfigError("bad value '" + v + "' for " + k);
         }
       }},
      {"transport", [](ExperimentConfig& c, const std::string& k,
                       const std::string& v) {
         if (v == "loopback") {
           c.transport = protocol::TransportKind::kLoopback;
         } else if (v == "tcp") {
           c.transport = protocol::TransportKind::kTcp;
         } else {
           throw ConfigError("bad value '" + v + "' for " + k);
         }
       }},
      FTL_NUM("port", protocol.port),
      FTL_NUM("seed", seed),
      FTL_NUM("seeds", seeds),
      FTL_LIST("label_values", label_values, int),
      FTL_LIST("overlap_values", overlap_values, int),
      FTL_LIST("k_values", k_values, int),
      FTL_LIST("gamma_values", gamma_values, double),
      FTL_LIST("lambda_values", lambda_values, double),
      FTL_LIST("d_values", d_values, int),
      FTL_LIST("feature_values", feature_values, int),
      FTL_LIST("nab_values", nab_values, int),
      FTL_NUM("scaling_d", scaling_d),
      FTL_NUM("scaling_features", scaling_features),
      FTL_NUM("scaling_nab", scaling_nab),
      FTL_NUM("scaling_n_c", scaling_n_c),
      FTL_NUM("scaling_iterations", scaling_iterations),
  };
  return table;
}

#undef FTL_NUM
#undef FTL_LIST

// ---------------------------------------------------------------------------
// Shared pieces of the experiment kinds.

struct Context {
  const ExperimentConfig& cfg;
  RunResult& out;
  std::shared_ptr<const protocol::PartyKeys> keys;

  void Result(const std::string& method, const std::string& param,
              double param_value, uint64_t seed, const std::string& metric,
              double value) {
    out.results.push_back({method, param, param_value, seed, metric, value});
  }
};

std::string RunName(const std::string& method, const std::string& param,
                    double value, uint64_t seed) {
  std::ostringstream os;
  os << method;
  if (!param.empty()) os << "_" << param << "=" << value;
  os << "_seed=" << seed;
  return os.str();
}

std::unique_ptr<pipeline::Engine> MakeEngine(Context& ctx, LossMode mode) {
  const ExperimentConfig& cfg = ctx.cfg;
  // The logistic loss has no additively homomorphic form; it always runs on
  // the plaintext oracle.
  if (cfg.engine == "secure" && mode == LossMode::kTaylor) {
    if (!ctx.keys) {
      ctx.keys = std::make_shared<protocol::PartyKeys>(
          protocol::GenerateKeys(cfg.protocol.key_bits, cfg.seed));
    }
    protocol::ProtocolOptions opt = cfg.protocol;
    opt.keep_payloads = false;
    return std::make_unique<pipeline::SecureEngine>(opt, cfg.transport,
                                                    ctx.keys);
  }
  return std::make_unique<pipeline::PlainEngine>(
      mode, cfg.protocol.Alignment());
}

void RecordTranscripts(Context& ctx, const std::string& run,
                       const pipeline::TrainOutput& t) {
  for (const auto& [party, tr] :
       {std::pair<std::string, const transport::Transcript*>{"A", &t.transcript_a},
        {"B", &t.transcript_b}}) {
    for (auto dir : {transport::Direction::kSent, transport::Direction::kReceived}) {
      for (uint8_t ty = 0; ty < 255; ++ty) {
        if (!transport::IsValidType(ty)) continue;
        const auto type = static_cast<transport::MsgType>(ty);
        const uint64_t frames = tr->FrameCount(dir, type);
        if (frames == 0) continue;
        ctx.out.transcripts.push_back(
            {run, party, dir == transport::Direction::kSent ? "sent" : "received",
             transport::TypeName(type), frames, tr->WireBytes(dir, type),
             tr->PayloadBytes(dir, type), tr->Hash()});
      }
    }
  }
}

void RecordTraining(Context& ctx, const std::string& run, uint64_t seed,
                    const std::string& param, double param_value,
                    const pipeline::TrainOutput& t) {
  for (size_t i = 0; i < t.loss_history.size(); ++i) {
    ctx.out.losses.push_back({run, seed, static_cast<int>(i), t.loss_history[i]});
  }
  for (size_t i = 0; i < t.iteration_seconds.size(); ++i) {
    ctx.out.timings.push_back(
        {run, param, param_value, static_cast<int>(i), t.iteration_seconds[i]});
  }
  RecordTranscripts(ctx, run, t);
}

// Evaluation rows: B's rows outside D_c, scored against B's true labels.
struct Evaluation {
  std::vector<int> rows;
  std::vector<int> truth;
};

Evaluation HeldOut(const data::FederationSplit& s) {
  Evaluation e;
  e.rows = s.UnlabeledB();
  e.truth = pipeline::Pick(s.y_b, e.rows);
  if (e.rows.empty()) throw ConfigError("no unlabeled B rows to evaluate on");
  return e;
}

struct FtlScore {
  double f1 = 0;
  pipeline::FtlModel model;
};

FtlScore ScoreFtl(Context& ctx, const data::FederationSplit& s,
                  const objective::TrainingConfig& training, LossMode mode,
                  uint64_t seed) {
  auto engine = MakeEngine(ctx, mode);
  pipeline::ModelSpec spec = ctx.cfg.model;
  spec.seed = seed;
  FtlScore r;
  r.model = pipeline::FitFtl(s, spec, training, *engine);
  const Evaluation e = HeldOut(s);
  r.f1 = data::WeightedF1(pipeline::PredictB(r.model, s, e.rows, *engine), e.truth)
             .weighted_f1;
  return r;
}

struct LabeledSet {
  Matrix x;
  std::vector<int> y;
};

LabeledSet Dc(const data::FederationSplit& s) {
  return {pipeline::Rows(s.x_b, s.labeled_b), pipeline::Pick(s.y_b, s.labeled_b)};
}

void Baselines(Context& ctx, const data::FederationSplit& s,
               const std::string& param, double param_value, uint64_t seed) {
  const Evaluation e = HeldOut(s);
  const LabeledSet dc = Dc(s);
  if (dc.y.empty()) throw ConfigError("baselines need a non-empty D_c");
  const Matrix x_eval = pipeline::Rows(s.x_b, e.rows);
  auto f1 = [&](const std::vector<int>& pred) {
    return data::WeightedF1(pred, e.truth).weighted_f1;
  };
  ctx.Result("LR", param, param_value, seed, "f1",
             f1(baselines::FitLogistic(dc.x, dc.y).Predict(x_eval)));
  ctx.Result("SVM", param, param_value, seed, "f1",
             f1(baselines::FitHingeSvm(dc.x, dc.y).Predict(x_eval)));
  std::mt19937_64 rng(seed);
  const nn::Network init =
      nn::Init(ctx.cfg.model.DimsB(static_cast<int>(s.x_b.cols())), rng);
  ctx.Result("SAE", param, param_value, seed, "f1",
             f1(baselines::FitSae(init, s.x_b, dc.x, dc.y,
                                  ctx.cfg.model.pretrain_epochs,
                                  ctx.cfg.model.pretrain_lr)
                    .Predict(x_eval)));
}

void RunFtl(Context& ctx, const data::FederationSplit& s, LossMode mode,
            const std::string& method, const std::string& param,
            double param_value, uint64_t seed) {
  FtlScore r = ScoreFtl(ctx, s, ctx.cfg.training, mode, seed);
  const auto& h = r.model.train.loss_history;
  ctx.Result(method, param, param_value, seed, "f1", r.f1);
  ctx.Result(method, param, param_value, seed, "initial_loss", h.front());
  ctx.Result(method, param, param_value, seed, "final_loss", h.back());
  ctx.Result(method, param, param_value, seed, "iterations",
             static_cast<double>(h.size()));
  RecordTraining(ctx, RunName(method, param, param_value, seed), seed, param,
                 param_value, r.model.train);
}

// ---------------------------------------------------------------------------
// Experiment kinds.

void TaylorVsExact(Context& ctx) {
  for (int i = 0; i < ctx.cfg.seeds; ++i) {
    const uint64_t seed = ctx.cfg.seed + i;
    const data::FederationSplit s = BuildSplit(ctx.cfg, seed);
    RunFtl(ctx, s, LossMode::kTaylor, "TLT", "", 0, seed);
    RunFtl(ctx, s, LossMode::kExactLogistic, "TLL", "", 0, seed);
  }
}

void FtlVsSelf(Context& ctx) {
  for (int n_c : ctx.cfg.label_values) {
    ExperimentConfig c = ctx.cfg;
    c.split.label_count = n_c;
    for (int i = 0; i < c.seeds; ++i) {
      const uint64_t seed = c.seed + i;
      const data::FederationSplit s = BuildSplit(c, seed);
      RunFtl(ctx, s, LossMode::kTaylor, "TLT", "n_c", n_c, seed);
      RunFtl(ctx, s, LossMode::kExactLogistic, "TLL", "n_c", n_c, seed);
      Baselines(ctx, s, "n_c", n_c, seed);
    }
  }
}

void OverlapSweep(Context& ctx) {
  for (int n_ab : ctx.cfg.overlap_values) {
    ExperimentConfig c = ctx.cfg;
    c.split.overlap_count = n_ab;
    for (int i = 0; i < c.seeds; ++i) {
      const uint64_t seed = c.seed + i;
      const data::FederationSplit s = BuildSplit(c, seed);
      RunFtl(ctx, s, LossMode::kTaylor, "TLT", "n_ab", n_ab, seed);
      const LabeledSet dc = Dc(s);
      const Evaluation e = HeldOut(s);
      ctx.Result("LR", "n_ab", n_ab, seed, "f1",
                 data::WeightedF1(baselines::FitLogistic(dc.x, dc.y).Predict(
                                      pipeline::Rows(s.x_b, e.rows)),
                                  e.truth)
                     .weighted_f1);
    }
  }
}

std::vector<trcv::Candidate> CandidateGrid(const ExperimentConfig& cfg) {
  std::vector<trcv::Candidate> out;
  for (double g : cfg.gamma_values) {
    for (double l : cfg.lambda_values) {
      trcv::Candidate c;
      c.cfg = cfg.training;
      c.cfg.gamma = g;
      c.cfg.lambda = l;
      std::ostringstream id;
      id << "gamma=" << g << ";lambda=" << l;
      c.id = id.str();
      out.push_back(c);
    }
  }
  return out;
}

// Plain K-fold CV on D_c: train without the fold's labels, score its B rows.
double PlainCvScore(Context& ctx, const data::FederationSplit& s,
                    const pipeline::InitialNets& init,
                    const objective::TrainingConfig& training, int k,
                    uint64_t seed) {
  const int n_c = static_cast<int>(s.labeled_b.size());
  std::vector<int> idx(n_c);
  std::iota(idx.begin(), idx.end(), 0);
  const trcv::FoldPlan plan = trcv::MakeFolds(idx, std::min(k, n_c), seed);
  auto engine = MakeEngine(ctx, LossMode::kTaylor);
  std::vector<double> scores;
  for (const auto& fold : plan.folds) {
    std::vector<bool> held(n_c, false);
    for (int i : fold) held[i] = true;
    objective::Instance inst = s.ToInstance();
    inst.labeled.clear();
    for (int i = 0; i < n_c; ++i) {
      if (!held[i]) inst.labeled.push_back({s.labeled_b[i], s.y_b[s.labeled_b[i]]});
    }
    objective::LocalAutoencoders local = init.local;
    pipeline::TrainOutput t =
        engine->Train(s.x_a, s.x_b, inst, init.a, init.b, training, &local);
    std::vector<int> rows = pipeline::Pick(s.labeled_b, fold);
    std::vector<int> pred = engine->Predict(t.net_a, s.x_a, s.y_a, t.net_b,
                                            pipeline::Rows(s.x_b, rows));
    scores.push_back(
        data::WeightedF1(pred, pipeline::Pick(s.y_b, rows)).weighted_f1);
  }
  return trcv::MeanScore(scores);
}

void TrcvVsCv(Context& ctx) {
  const std::vector<trcv::Candidate> grid = CandidateGrid(ctx.cfg);
  for (int k : ctx.cfg.k_values) {
    for (int i = 0; i < ctx.cfg.seeds; ++i) {
      const uint64_t seed = ctx.cfg.seed + i;
      const data::FederationSplit s = BuildSplit(ctx.cfg, seed);
      pipeline::ModelSpec spec = ctx.cfg.model;
      spec.seed = seed;

      auto engine = MakeEngine(ctx, LossMode::kTaylor);
      trcv::TrcvOptions topt{k, seed, spec};
      const trcv::FoldReport tr = trcv::RunTrcv(grid, s, topt, *engine);

      const pipeline::InitialNets init = pipeline::Initialize(s, spec);
      std::vector<double> cv_means;
      for (const trcv::Candidate& c : grid) {
        cv_means.push_back(PlainCvScore(ctx, s, init, c.cfg, k, seed));
      }
      const int cv_sel = trcv::SelectBest(cv_means);

      auto test_f1 = [&](int idx) {
        return ScoreFtl(ctx, s, grid[idx].cfg, LossMode::kTaylor, seed).f1;
      };
      const double trcv_f1 = test_f1(tr.selected);
      ctx.Result("TrCV", "k", k, seed, "validation", tr.best().mean);
      ctx.Result("TrCV", "k", k, seed, "selected", tr.selected);
      ctx.Result("TrCV", "k", k, seed, "f1", trcv_f1);
      ctx.Result("CV", "k", k, seed, "validation", cv_means[cv_sel]);
      ctx.Result("CV", "k", k, seed, "selected", cv_sel);
      ctx.Result("CV", "k", k, seed, "f1",
                 cv_sel == tr.selected ? trcv_f1 : test_f1(cv_sel));

      const LabeledSet dc = Dc(s);
      const Evaluation e = HeldOut(s);
      ctx.Result("LR", "k", k, seed, "f1",
                 data::WeightedF1(baselines::FitLogistic(dc.x, dc.y).Predict(
                                      pipeline::Rows(s.x_b, e.rows)),
                                  e.truth)
                     .weighted_f1);
      const trcv::SafeguardResult sg =
          trcv::SelfLearningSafeguard(s, tr.best().mean, k, seed);
      ctx.Result("safeguard", "k", k, seed, "baseline_validation",
                 sg.baseline_score);
      ctx.Result("safeguard", "k", k, seed, "transfer",
                 sg.decision == trcv::Decision::kTransfer ? 1 : 0);
    }
  }
}

// One timed secure run at a scaling point.
void ScalingPoint(Context& ctx, const std::string& param, double value, int d,
                  int features, int n_ab, uint64_t seed) {
  const ExperimentConfig& cfg = ctx.cfg;
  ExperimentConfig c = cfg;
  c.dataset = "synthetic";
  c.synth.d_a = features;
  c.synth.d_b = features;
  c.synth.latent = std::min(4, features);
  c.synth.n = 2 * (n_ab + cfg.scaling_n_c) + 8;
  c.split.a_share = c.split.b_share = 0.5;
  c.split.overlap_count = n_ab;
  c.split.label_count = cfg.scaling_n_c;
  const data::FederationSplit s = BuildSplit(c, seed);

  pipeline::ModelSpec spec = cfg.model;
  spec.d = d;
  spec.pretrain_epochs = 0;
  spec.seed = seed;
  const pipeline::InitialNets init = pipeline::Initialize(s, spec);
  objective::TrainingConfig training = cfg.training;
  training.max_iterations = cfg.scaling_iterations;
  training.tolerance = 0;

  if (!ctx.keys) {
    ctx.keys = std::make_shared<protocol::PartyKeys>(
        protocol::GenerateKeys(cfg.protocol.key_bits, cfg.seed));
  }
  protocol::ProtocolOptions opt = cfg.protocol;
  opt.keep_payloads = true;
  pipeline::SecureEngine engine(opt, cfg.transport, ctx.keys);
  objective::LocalAutoencoders local = init.local;
  pipeline::TrainOutput t = engine.Train(s.x_a, s.x_b, s.ToInstance(), init.a,
                                         init.b, training, &local);

  const std::string run = RunName("scaling", param, value, seed);
  RecordTraining(ctx, run, seed, param, value, t);
  const auto cost = transport::MeasureCost(t.transcript_b,
                                           transport::Direction::kSent,
                                           transport::MsgType::kComponentsB);
  const double iters = static_cast<double>(t.loss_history.size());
  ctx.Result("scaling", param, value, seed, "iterations", iters);
  ctx.Result("scaling", param, value, seed, "components_bytes",
             cost.per_sample_bytes / iters);
  ctx.Result("scaling", param, value, seed, "formula_bytes",
             static_cast<double>(transport::CostFormula(
                 s.labeled_b.size(), d, t.ciphertext_bytes)));
  ctx.Result("scaling", param, value, seed, "ciphertext_bytes",
             static_cast<double>(t.ciphertext_bytes));
  ctx.Result("scaling", param, value, seed, "payload_bytes",
             cost.payload_bytes() / iters);
}

void ScalingSweep(Context& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  for (int i = 0; i < cfg.seeds; ++i) {
    const uint64_t seed = cfg.seed + i;
    for (int d : cfg.d_values) {
      ScalingPoint(ctx, "d", d, d, cfg.scaling_features, cfg.scaling_nab, seed);
    }
    for (int f : cfg.feature_values) {
      ScalingPoint(ctx, "features", f, cfg.scaling_d, f, cfg.scaling_nab, seed);
    }
    for (int n_ab : cfg.nab_values) {
      ScalingPoint(ctx, "n_ab", n_ab, cfg.scaling_d, cfg.scaling_features, n_ab,
                   seed);
    }
  }
}

std::string Num(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

void WriteFile(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + p.string());
  out << content;
}

}  // namespace

Kind ParseKind(const std::string& s) {
  auto it = KindTable().find(s);
  if (it == KindTable().end()) throw ConfigError("unknown experiment kind " + s);
  return it->second;
}

std::string KindName(Kind k) {
  for (const auto& [name, kind] : KindTable()) {
    if (kind == k) return name;
  }
  return "?";
}

void ExperimentConfig::Validate() const {
  training.Validate();
  if (dataset == "csv") {
    if (csv_path.empty() || !std::filesystem::exists(csv_path)) {
      throw ConfigError("csv_path does not name an existing file");
    }
    if (csv.label_column.empty()) throw ConfigError("label_column is required");
  } else if (dataset != "synthetic") {
    throw ConfigError("dataset must be synthetic or csv");
  }
  if (model.d < 1) throw ConfigError("d must be >= 1");
  if (seeds < 1) throw ConfigError("seeds must be >= 1");
  if (engine == "secure") protocol.Validate();
  for (int k : k_values) {
    if (k < 2) throw ConfigError("k_values must be >= 2");
  }
  if (scaling_iterations < 1) throw ConfigError("scaling_iterations must be >= 1");
}

void ApplySetting(ExperimentConfig& cfg, const std::string& key,
                  const std::string& value) {
  std::string k = key;
  auto it = Setters().find(k);
  if (it == Setters().end()) {
    // section.key spelling
    const auto dot = k.rfind('.');
    if (dot != std::string::npos) it = Setters().find(k.substr(dot + 1));
  }
  if (it == Setters().end()) throw ConfigError("unknown config key " + key);
  it->second(cfg, key, value);
}

ExperimentConfig ParseConfig(std::istream& in) {
  ExperimentConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = Trim(line);
    if (line.empty() || line.front() == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    }
    ApplySetting(cfg, Trim(line.substr(0, eq)), Trim(line.substr(eq + 1)));
  }
  return cfg;
}

ExperimentConfig LoadConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  return ParseConfig(in);
}

double RunResult::Mean(const std::string& method, const std::string& metric,
                       const std::string& param, double param_value) const {
  double sum = 0;
  int n = 0;
  for (const ResultRow& r : results) {
    if (r.method != method || r.metric != metric) continue;
    if (!param.empty() && (r.param != param || r.param_value != param_value)) {
      continue;
    }
    sum += r.value;
    ++n;
  }
  return n ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

data::FederationSplit BuildSplit(const ExperimentConfig& cfg, uint64_t seed) {
  data::Dataset d;
  data::FeatureAssignment fa;
  if (cfg.dataset == "csv") {
    d = data::LoadCsv(cfg.csv_path, cfg.csv);
    if (cfg.a_cols.empty()) {
      fa = data::HalfSplit(static_cast<int>(d.x.cols()));
    } else {
      fa.a_cols = cfg.a_cols;
      for (int c = 0; c < d.x.cols(); ++c) {
        if (std::find(fa.a_cols.begin(), fa.a_cols.end(), c) == fa.a_cols.end()) {
          fa.b_cols.push_back(c);
        }
      }
    }
  } else {
    data::SynthOptions so = cfg.synth;
    so.seed = seed;
    data::TwoView tv = data::SynthTwoView(so);
    d = std::move(tv.data);
    fa = tv.features;
  }
  if (cfg.shuffle_labels) d = data::ShuffleLabels(d, seed ^ 0x5eedULL);
  data::SplitOptions so = cfg.split;
  so.seed = seed;
  data::FederationSplit s = data::VerticalSplit(d, fa, so);
  data::StandardizeParties(s);
  return s;
}

RunResult RunExperiment(const ExperimentConfig& cfg) {
  cfg.Validate();
  RunResult out;
  out.kind = cfg.kind;
  Context ctx{cfg, out, nullptr};
  switch (cfg.kind) {
    case Kind::kTaylorVsExact: TaylorVsExact(ctx); break;
    case Kind::kFtlVsSelf: FtlVsSelf(ctx); break;
    case Kind::kOverlapSweep: OverlapSweep(ctx); break;
    case Kind::kTrcvVsCv: TrcvVsCv(ctx); break;
    case Kind::kScalingSweep: ScalingSweep(ctx); break;
  }
  return out;
}

void WriteOutputs(const RunResult& r, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  const std::string kind = KindName(r.kind);

  std::ostringstream res;
  res << "kind,method,param,param_value,seed,metric,value\n";
  for (const ResultRow& x : r.results) {
    res << kind << "," << x.method << "," << x.param << "," << Num(x.param_value)
        << "," << x.seed << "," << x.metric << "," << Num(x.value) << "\n";
  }
  WriteFile(base / "results.csv", res.str());

  std::ostringstream loss;
  loss << "run,seed,iteration,loss\n";
  for (const LossRow& x : r.losses) {
    loss << x.run << "," << x.seed << "," << x.iteration << "," << Num(x.loss)
         << "\n";
  }
  WriteFile(base / "loss_history.csv", loss.str());

  std::ostringstream tr;
  tr << "run,party,direction,msg_type,frames,wire_bytes,payload_bytes,"
        "transcript_hash\n";
  for (const TranscriptRow& x : r.transcripts) {
    tr << x.run << "," << x.party << "," << x.direction << "," << x.msg_type
       << "," << x.frames << "," << x.wire_bytes << "," << x.payload_bytes
       << "," << std::hex << std::setw(16) << std::setfill('0') << x.hash
       << std::dec << std::setfill(' ') << "\n";
  }
  WriteFile(base / "transcript_summary.csv", tr.str());

  std::ostringstream tm;
  tm << "run,param,param_value,iteration,seconds\n";
  for (const TimingRow& x : r.timings) {
    tm << x.run << "," << x.param << "," << Num(x.param_value) << ","
       << x.iteration << "," << Num(x.seconds) << "\n";
  }
  WriteFile(base / "timing.csv", tm.str());
}

}  // namespace ftl::experiments
