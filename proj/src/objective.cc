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

#include "ftl/objective.h"

#include <cmath>
#include <numbers>
#include <string>

namespace ftl::objective {

double AlignmentSpec::kappa() const {
  return kind_ == AlignmentKind::kInnerProduct ? -1.0 : -2.0;
}

double AlignmentSpec::PartA(const Vector& ua) const {
  return kind_ == AlignmentKind::kInnerProduct ? 0.0 : ua.squaredNorm();
}

double AlignmentSpec::PartB(const Vector& ub) const {
  return kind_ == AlignmentKind::kInnerProduct ? 0.0 : ub.squaredNorm();
}

Vector AlignmentSpec::GradPartA(const Vector& ua) const {
  return kind_ == AlignmentKind::kInnerProduct ? Vector::Zero(ua.size())
                                               : Vector(2.0 * ua);
}

Vector AlignmentSpec::GradPartB(const Vector& ub) const {
  return kind_ == AlignmentKind::kInnerProduct ? Vector::Zero(ub.size())
                                               : Vector(2.0 * ub);
}

double AlignmentSpec::Direct(const Vector& ua, const Vector& ub) const {
  if (kind_ == AlignmentKind::kInnerProduct) return -ua.dot(ub);
  return (ua - ub).squaredNorm();
}

void TrainingConfig::Validate() const {
  if (!(learning_rate > 0)) throw ConfigError("learning rate must be > 0");
  if (max_iterations < 1) throw ConfigError("max iterations must be >= 1");
  if (!(tolerance >= 0)) throw ConfigError("tolerance must be >= 0");
  if (!(gamma >= 0) || !(lambda >= 0)) {
    throw ConfigError("gamma and lambda must be >= 0");
  }
  if (!(reconstruction_weight >= 0)) {
    throw ConfigError("reconstruction weight must be >= 0");
  }
}

int Instance::NumSourceLabels() const {
  int n = 0;
  for (int y : y_a) n += (y != 0);
  return n;
}

Vector ComputePhi(const Matrix& u_a, const std::vector<int>& y_a) {
  if (static_cast<Eigen::Index>(y_a.size()) != u_a.rows()) {
    throw ShapeError("label vector does not match u^A rows");
  }
  Vector phi = Vector::Zero(u_a.cols());
  int count = 0;
  for (size_t j = 0; j < y_a.size(); ++j) {
    if (y_a[j] == 0) continue;
    phi += y_a[j] * u_a.row(j).transpose();
    ++count;
  }
  if (count > 0) phi /= count;
  return phi;
}

double PredictPhi(const Vector& phi_a, const Vector& u_b_row) {
  if (phi_a.size() != u_b_row.size()) {
    throw ShapeError("translator and representation dimensions differ");
  }
  return phi_a.dot(u_b_row);
}

int LabelOf(double phi) { return phi >= 0 ? 1 : -1; }

double TaylorLoss1(int y, double phi) {
  return std::numbers::ln2 - 0.5 * y * phi + 0.125 * y * y * phi * phi;
}

double TaylorDLossDPhi(int y, double phi) {
  return -0.5 * y + 0.25 * y * y * phi;
}

double LogisticLoss1(int y, double phi) {
  const double z = -y * phi;
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double LogisticDLossDPhi(int y, double phi) {
  return -y * nn::Sigmoid(-y * phi);
}

double Loss1(LossMode mode, int y, double phi) {
  return mode == LossMode::kTaylor ? TaylorLoss1(y, phi)
                                   : LogisticLoss1(y, phi);
}

double DLoss1(LossMode mode, int y, double phi) {
  return mode == LossMode::kTaylor ? TaylorDLossDPhi(y, phi)
                                   : LogisticDLossDPhi(y, phi);
}

void ValidateInstance(const Matrix& u_a, const Matrix& u_b,
                      const Instance& inst) {
  if (u_a.cols() != u_b.cols()) {
    throw ShapeError("hidden dimensions of the two parties differ");
  }
  if (static_cast<Eigen::Index>(inst.y_a.size()) != u_a.rows()) {
    throw ShapeError("label vector does not match u^A rows");
  }
  for (int y : inst.y_a) {
    if (y != 0 && y != 1 && y != -1) throw RangeError("labels must be +-1");
  }
  for (const LabeledRow& l : inst.labeled) {
    if (l.b_row < 0 || l.b_row >= u_b.rows()) {
      throw RangeError("labeled row " + std::to_string(l.b_row) +
                       " out of range");
    }
    if (l.y != 1 && l.y != -1) throw RangeError("labels must be +-1");
  }
  for (const OverlapPair& p : inst.overlap) {
    if (p.a_row < 0 || p.a_row >= u_a.rows() || p.b_row < 0 ||
        p.b_row >= u_b.rows()) {
      throw RangeError("overlap pair out of range");
    }
  }
}

LossBreakdown FullLossFromReps(const Matrix& u_a, const Matrix& u_b,
                               const Instance& inst, const nn::Params& theta_a,
                               const nn::Params& theta_b,
                               const ObjectiveConfig& cfg,
                               const AlignmentSpec& align) {
  ValidateInstance(u_a, u_b, inst);
  const Vector phi = ComputePhi(u_a, inst.y_a);
  LossBreakdown out;
  for (const LabeledRow& l : inst.labeled) {
    out.l1 += Loss1(cfg.loss_mode, l.y,
                    PredictPhi(phi, u_b.row(l.b_row).transpose()));
  }
  for (const OverlapPair& p : inst.overlap) {
    Vector ua = u_a.row(p.a_row).transpose(), ub = u_b.row(p.b_row).transpose();
    out.l2 += align.PartA(ua) + align.PartB(ub) + align.kappa() * ua.dot(ub);
  }
  out.l3_a = nn::SquaredNorm(theta_a);
  out.l3_b = nn::SquaredNorm(theta_b);
  out.total = out.l1 + cfg.gamma * out.l2 +
              0.5 * cfg.lambda * (out.l3_a + out.l3_b);
  return out;
}

double FullLoss(const Matrix& x_a, const Matrix& x_b, const Instance& inst,
                const nn::Network& net_a, const nn::Network& net_b,
                const ObjectiveConfig& cfg, const AlignmentSpec& align) {
  return FullLossFromReps(nn::Forward(net_a, x_a), nn::Forward(net_b, x_b),
                          inst, net_a.layers, net_b.layers, cfg, align)
      .total;
}

RepGradients RepresentationGradients(const Matrix& u_a, const Matrix& u_b,
                                     const Instance& inst,
                                     const ObjectiveConfig& cfg,
                                     const AlignmentSpec& align) {
  ValidateInstance(u_a, u_b, inst);
  const Vector phi = ComputePhi(u_a, inst.y_a);
  RepGradients g{Matrix::Zero(u_a.rows(), u_a.cols()),
                 Matrix::Zero(u_b.rows(), u_b.cols())};

  // L1: through phi_i = Phi . u_i^B for both u^B and Phi(u^A).
  Vector dphi_sum = Vector::Zero(u_a.cols());
  for (const LabeledRow& l : inst.labeled) {
    Vector ub = u_b.row(l.b_row).transpose();
    const double dl = DLoss1(cfg.loss_mode, l.y, PredictPhi(phi, ub));
    g.du_b.row(l.b_row) += dl * phi.transpose();
    dphi_sum += dl * ub;
  }
  const int n_a = inst.NumSourceLabels();
  if (n_a > 0) {
    for (size_t j = 0; j < inst.y_a.size(); ++j) {
      if (inst.y_a[j] == 0) continue;
      g.du_a.row(j) += (static_cast<double>(inst.y_a[j]) / n_a) *
                       dphi_sum.transpose();
    }
  }

  for (const OverlapPair& p : inst.overlap) {
    Vector ua = u_a.row(p.a_row).transpose(), ub = u_b.row(p.b_row).transpose();
    g.du_a.row(p.a_row) +=
        cfg.gamma * (align.GradPartA(ua) + align.kappa() * ub).transpose();
    g.du_b.row(p.b_row) +=
        cfg.gamma * (align.GradPartB(ub) + align.kappa() * ua).transpose();
  }
  return g;
}

Gradients PlaintextGradients(const Matrix& x_a, const Matrix& x_b,
                             const Instance& inst, const nn::Network& net_a,
                             const nn::Network& net_b,
                             const ObjectiveConfig& cfg,
                             const AlignmentSpec& align) {
  const Matrix u_a = nn::Forward(net_a, x_a);
  const Matrix u_b = nn::Forward(net_b, x_b);
  RepGradients rg = RepresentationGradients(u_a, u_b, inst, cfg, align);
  Gradients out{nn::BackwardU(net_a, x_a, rg.du_a),
                nn::BackwardU(net_b, x_b, rg.du_b)};
  nn::Axpy(cfg.lambda, net_a.layers, out.a);
  nn::Axpy(cfg.lambda, net_b.layers, out.b);
  return out;
}

TrainResult TrainPlain(const Matrix& x_a, const Matrix& x_b,
                       const Instance& inst, nn::Network net_a,
                       nn::Network net_b, const TrainingConfig& cfg,
                       LossMode mode, const AlignmentSpec& align,
                       LocalAutoencoders* local_ae) {
  cfg.Validate();
  const ObjectiveConfig obj = cfg.Objective(mode);
  TrainResult out;
  double prev = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    const double loss = FullLoss(x_a, x_b, inst, net_a, net_b, obj, align);
    Gradients g = PlaintextGradients(x_a, x_b, inst, net_a, net_b, obj, align);
    if (local_ae && cfg.reconstruction_weight > 0) {
      nn::Reconstruction ra =
          nn::ReconstructionLossAndGrad(net_a, local_ae->x_a_all, local_ae->ae_a);
      nn::Reconstruction rb =
          nn::ReconstructionLossAndGrad(net_b, local_ae->x_b_all, local_ae->ae_b);
      nn::Axpy(cfg.reconstruction_weight, ra.grads, g.a);
      nn::Axpy(cfg.reconstruction_weight, rb.grads, g.b);
      for (size_t l = 0; l < ra.bias_grads.size(); ++l) {
        local_ae->ae_a.decoder_bias[l] -=
            cfg.learning_rate * cfg.reconstruction_weight * ra.bias_grads[l];
      }
      for (size_t l = 0; l < rb.bias_grads.size(); ++l) {
        local_ae->ae_b.decoder_bias[l] -=
            cfg.learning_rate * cfg.reconstruction_weight * rb.bias_grads[l];
      }
    }
    nn::Axpy(-cfg.learning_rate, g.a, net_a.layers);
    nn::Axpy(-cfg.learning_rate, g.b, net_b.layers);
    out.loss_history.push_back(loss);
    out.trajectory_a.push_back(nn::Flatten(net_a.layers));
    out.trajectory_b.push_back(nn::Flatten(net_b.layers));
    if (prev - loss <= cfg.tolerance) break;
    prev = loss;
  }
  out.net_a = std::move(net_a);
  out.net_b = std::move(net_b);
  return out;
}

}  // namespace ftl::objective
