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

#include "ftl/pipeline.h"

#include <chrono>
#include <random>

namespace ftl::pipeline {

namespace {

std::vector<int> Classify(const Vector& phi, const Matrix& u) {
  if (phi.size() != u.cols()) {
    throw ShapeError("translator and representation dimensions differ");
  }
  std::vector<int> out(u.rows());
  for (Eigen::Index i = 0; i < u.rows(); ++i) {
    out[i] = objective::LabelOf(phi.dot(u.row(i).transpose()));
  }
  return out;
}

}  // namespace

TrainOutput PlainEngine::Train(const Matrix& x_a, const Matrix& x_b,
                               const objective::Instance& inst,
                               const nn::Network& net_a,
                               const nn::Network& net_b,
                               const objective::TrainingConfig& cfg,
                               objective::LocalAutoencoders* local_ae) {
  const auto start = std::chrono::steady_clock::now();
  objective::TrainResult r = objective::TrainPlain(
      x_a, x_b, inst, net_a, net_b, cfg, mode_, align_, local_ae);
  const double total =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  TrainOutput out;
  out.net_a = std::move(r.net_a);
  out.net_b = std::move(r.net_b);
  out.loss_history = std::move(r.loss_history);
  out.iteration_seconds.assign(out.loss_history.size(),
                               total / out.loss_history.size());
  return out;
}

std::vector<int> PlainEngine::Predict(const nn::Network& net_a,
                                      const Matrix& x_a,
                                      const std::vector<int>& y_phi,
                                      const nn::Network& net_b,
                                      const Matrix& x_b) {
  return Classify(objective::ComputePhi(nn::Forward(net_a, x_a), y_phi),
                  nn::Forward(net_b, x_b));
}

std::vector<int> PlainEngine::CrossPredict(const Vector& phi_b,
                                           const Matrix& u_a) {
  return Classify(phi_b, u_a);
}

SecureEngine::SecureEngine(protocol::ProtocolOptions opt,
                           protocol::TransportKind transport,
                           std::shared_ptr<const protocol::PartyKeys> keys)
    : opt_(opt), transport_(transport), keys_(std::move(keys)) {
  opt_.Validate();
  if (!keys_) {
    keys_ = std::make_shared<protocol::PartyKeys>(
        protocol::GenerateKeys(opt_.key_bits, opt_.seed_a ^ opt_.seed_b));
  }
}

TrainOutput SecureEngine::Train(const Matrix& x_a, const Matrix& x_b,
                                const objective::Instance& inst,
                                const nn::Network& net_a,
                                const nn::Network& net_b,
                                const objective::TrainingConfig& cfg,
                                objective::LocalAutoencoders* local_ae) {
  protocol::SecureTrainResult r =
      protocol::TrainSecure(x_a, x_b, inst, net_a, net_b, cfg, opt_,
                            transport_, keys_.get(), local_ae);
  TrainOutput out;
  out.net_a = std::move(r.net_a);
  out.net_b = std::move(r.net_b);
  out.loss_history = std::move(r.loss_history);
  out.iteration_seconds = std::move(r.iteration_seconds);
  out.transcript_a = std::move(r.transcript_a);
  out.transcript_b = std::move(r.transcript_b);
  out.ciphertext_bytes = he::SerializedCiphertextSize(*r.pk_a);
  return out;
}

std::vector<int> SecureEngine::Predict(const nn::Network& net_a,
                                       const Matrix& x_a,
                                       const std::vector<int>& y_phi,
                                       const nn::Network& net_b,
                                       const Matrix& x_b) {
  return protocol::PredictSecure(net_a, x_a, y_phi, net_b, x_b, *keys_, opt_,
                                 transport_)
      .labels;
}

std::vector<int> SecureEngine::CrossPredict(const Vector& phi_b,
                                            const Matrix& u_a) {
  return protocol::CrossPredictSecure(phi_b, u_a, *keys_, opt_, transport_)
      .labels;
}

std::vector<int> ModelSpec::DimsA(int input) const {
  std::vector<int> dims = {input};
  dims.insert(dims.end(), hidden_a.begin(), hidden_a.end());
  dims.push_back(d);
  return dims;
}

std::vector<int> ModelSpec::DimsB(int input) const {
  std::vector<int> dims = {input};
  dims.insert(dims.end(), hidden_b.begin(), hidden_b.end());
  dims.push_back(d);
  return dims;
}

InitialNets Initialize(const data::FederationSplit& split,
                       const ModelSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  InitialNets out;
  out.a = nn::Init(spec.DimsA(static_cast<int>(split.x_a.cols())), rng);
  out.b = nn::Init(spec.DimsB(static_cast<int>(split.x_b.cols())), rng);
  out.local.x_a_all = split.x_a;
  out.local.x_b_all = split.x_b;
  out.local.ae_a = nn::MakeAutoencoder(out.a);
  out.local.ae_b = nn::MakeAutoencoder(out.b);
  out.a = nn::AutoencoderPretrain(out.a, split.x_a, spec.pretrain_epochs,
                                  spec.pretrain_lr, &out.local.ae_a);
  out.b = nn::AutoencoderPretrain(out.b, split.x_b, spec.pretrain_epochs,
                                  spec.pretrain_lr, &out.local.ae_b);
  return out;
}

FtlModel FitFtl(const data::FederationSplit& split, const ModelSpec& spec,
                const objective::TrainingConfig& cfg, Engine& engine) {
  InitialNets init = Initialize(split, spec);
  FtlModel m;
  m.train = engine.Train(split.x_a, split.x_b, split.ToInstance(), init.a,
                         init.b, cfg, &init.local);
  m.phi_a = objective::ComputePhi(nn::Forward(m.train.net_a, split.x_a),
                                  split.y_a);
  return m;
}

std::vector<int> PredictB(const FtlModel& model,
                          const data::FederationSplit& split,
                          const std::vector<int>& b_rows, Engine& engine) {
  return engine.Predict(model.train.net_a, split.x_a, split.y_a,
                        model.train.net_b, Rows(split.x_b, b_rows));
}

Matrix Rows(const Matrix& x, const std::vector<int>& rows) {
  Matrix out(rows.size(), x.cols());
  for (size_t i = 0; i < rows.size(); ++i) out.row(i) = x.row(rows[i]);
  return out;
}

std::vector<int> Pick(const std::vector<int>& v, const std::vector<int>& idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(v[i]);
  return out;
}

}  // namespace ftl::pipeline
