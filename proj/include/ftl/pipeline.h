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

// Training and prediction on a FederationSplit through an interchangeable
// engine: the plaintext oracle or the two-party encrypted protocol.

#ifndef FTL_PIPELINE_H_
#define FTL_PIPELINE_H_

#include <cstdint>
#include <memory>
#include <vector>

#include "ftl/datasets.h"
#include "ftl/objective.h"
#include "ftl/protocol.h"

namespace ftl::pipeline {

using nn::Matrix;
using nn::Vector;

struct TrainOutput {
  nn::Network net_a;
  nn::Network net_b;
  std::vector<double> loss_history;
  std::vector<double> iteration_seconds;
  // Empty for the plaintext engine.
  transport::Transcript transcript_a{false};
  transport::Transcript transcript_b{false};
  size_t ciphertext_bytes = 0;  // serialized ciphertext size, 0 if plaintext
};

class Engine {
 public:
  virtual ~Engine() = default;

  virtual TrainOutput Train(const Matrix& x_a, const Matrix& x_b,
                            const objective::Instance& inst,
                            const nn::Network& net_a, const nn::Network& net_b,
                            const objective::TrainingConfig& cfg,
                            objective::LocalAutoencoders* local_ae) = 0;
  // Labels of B's rows from Phi^A over the A rows with nonzero y_phi.
  virtual std::vector<int> Predict(const nn::Network& net_a, const Matrix& x_a,
                                   const std::vector<int>& y_phi,
                                   const nn::Network& net_b,
                                   const Matrix& x_b) = 0;
  // Labels of A's representation rows u_a from B's translator Phi^B.
  virtual std::vector<int> CrossPredict(const Vector& phi_b,
                                        const Matrix& u_a) = 0;
  virtual bool secure() const = 0;
};

class PlainEngine : public Engine {
 public:
  explicit PlainEngine(
      objective::LossMode mode = objective::LossMode::kTaylor,
      objective::AlignmentSpec align = objective::AlignmentSpec::SquaredDistance())
      : mode_(mode), align_(align) {}

  TrainOutput Train(const Matrix& x_a, const Matrix& x_b,
                    const objective::Instance& inst, const nn::Network& net_a,
                    const nn::Network& net_b,
                    const objective::TrainingConfig& cfg,
                    objective::LocalAutoencoders* local_ae) override;
  std::vector<int> Predict(const nn::Network& net_a, const Matrix& x_a,
                           const std::vector<int>& y_phi,
                           const nn::Network& net_b,
                           const Matrix& x_b) override;
  std::vector<int> CrossPredict(const Vector& phi_b,
                                const Matrix& u_a) override;
  bool secure() const override { return false; }

 private:
  objective::LossMode mode_;
  objective::AlignmentSpec align_;
};

// Each call runs both parties over a fresh channel pair with the given keys.
class SecureEngine : public Engine {
 public:
  SecureEngine(protocol::ProtocolOptions opt, protocol::TransportKind transport,
               std::shared_ptr<const protocol::PartyKeys> keys);

  TrainOutput Train(const Matrix& x_a, const Matrix& x_b,
                    const objective::Instance& inst, const nn::Network& net_a,
                    const nn::Network& net_b,
                    const objective::TrainingConfig& cfg,
                    objective::LocalAutoencoders* local_ae) override;
  std::vector<int> Predict(const nn::Network& net_a, const Matrix& x_a,
                           const std::vector<int>& y_phi,
                           const nn::Network& net_b,
                           const Matrix& x_b) override;
  std::vector<int> CrossPredict(const Vector& phi_b,
                                const Matrix& u_a) override;
  bool secure() const override { return true; }

 private:
  protocol::ProtocolOptions opt_;
  protocol::TransportKind transport_;
  std::shared_ptr<const protocol::PartyKeys> keys_;
};

// Network shapes and local pretraining shared by FTL and the SAE baseline.
struct ModelSpec {
  std::vector<int> hidden_a;  // widths between input and d
  std::vector<int> hidden_b;
  int d = 8;
  int pretrain_epochs = 200;
  double pretrain_lr = 0.1;
  uint64_t seed = 1;

  std::vector<int> DimsA(int input) const;
  std::vector<int> DimsB(int input) const;
};

// Initial networks for both parties, pretrained as autoencoders on each
// party's own rows.
struct InitialNets {
  nn::Network a;
  nn::Network b;
  objective::LocalAutoencoders local;
};
InitialNets Initialize(const data::FederationSplit& split, const ModelSpec& spec);

struct FtlModel {
  TrainOutput train;
  Vector phi_a;  // translator over every labeled A row
};

FtlModel FitFtl(const data::FederationSplit& split, const ModelSpec& spec,
                const objective::TrainingConfig& cfg, Engine& engine);

// Labels for the given B rows.
std::vector<int> PredictB(const FtlModel& model,
                          const data::FederationSplit& split,
                          const std::vector<int>& b_rows, Engine& engine);

// Rows of x restricted to `rows`, in that order.
Matrix Rows(const Matrix& x, const std::vector<int>& rows);
std::vector<int> Pick(const std::vector<int>& v, const std::vector<int>& idx);

}  // namespace ftl::pipeline

#endif  // FTL_PIPELINE_H_
