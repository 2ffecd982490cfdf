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

// Plaintext transfer objective.
//
//   Phi   = (1/N_A) sum_j y_j u_j^A           (translator, over labeled A rows)
//   phi_i = Phi . u_i^B
//   L     = sum_{i in D_c} l1(y_i, phi_i)
//         + gamma * sum_{(a,b) in D_AB} l2(u_a^A, u_b^B)
//         + lambda/2 * (|Theta^A|^2 + |Theta^B|^2)
//
// In Taylor mode l1(y, phi) = log 2 - y phi / 2 + y^2 phi^2 / 8. The encrypted
// protocol evaluates exactly this objective, so these functions double as its
// reference implementation.

#ifndef FTL_OBJECTIVE_H_
#define FTL_OBJECTIVE_H_

#include <limits>
#include <optional>
#include <vector>

#include "ftl/neural.h"

namespace ftl::objective {

using nn::Matrix;
using nn::Vector;

enum class LossMode { kTaylor, kExactLogistic };
enum class AlignmentKind { kInnerProduct, kSquaredDistance };

// l2(uA, uB) = l2A(uA) + l2B(uB) + kappa * uA . uB
class AlignmentSpec {
 public:
  static AlignmentSpec InnerProduct() {
    return AlignmentSpec(AlignmentKind::kInnerProduct);
  }
  static AlignmentSpec SquaredDistance() {
    return AlignmentSpec(AlignmentKind::kSquaredDistance);
  }

  AlignmentKind kind() const { return kind_; }
  double kappa() const;
  double PartA(const Vector& ua) const;
  double PartB(const Vector& ub) const;
  Vector GradPartA(const Vector& ua) const;
  Vector GradPartB(const Vector& ub) const;
  // l2 evaluated from its definition rather than the decomposition.
  double Direct(const Vector& ua, const Vector& ub) const;

 private:
  explicit AlignmentSpec(AlignmentKind kind) : kind_(kind) {}
  AlignmentKind kind_;
};

struct ObjectiveConfig {
  double gamma = 0.05;
  double lambda = 0.005;
  LossMode loss_mode = LossMode::kTaylor;
};

// Algorithm inputs for training.
struct TrainingConfig {
  double learning_rate = 0.05;
  double gamma = 0.05;
  double lambda = 0.005;
  int max_iterations = 100;
  double tolerance = 0.0;
  // Weight of the local autoencoder reconstruction loss kept during joint
  // training; 0 means pretraining only.
  double reconstruction_weight = 0.0;

  ObjectiveConfig Objective(LossMode mode = LossMode::kTaylor) const {
    return ObjectiveConfig{gamma, lambda, mode};
  }
  // Throws ConfigError unless eta > 0, m >= 1, t >= 0, gamma, lambda >= 0.
  void Validate() const;
};

struct LabeledRow {
  int b_row;
  int y;
};

struct OverlapPair {
  int a_row;
  int b_row;
};

// Index sets tying the two parties' rows together.
struct Instance {
  // Per row of u^A: +1 / -1 when the row contributes to Phi, 0 otherwise.
  std::vector<int> y_a;
  // D_c: rows of u^B whose labels party A holds.
  std::vector<LabeledRow> labeled;
  // D_AB.
  std::vector<OverlapPair> overlap;

  int NumSourceLabels() const;
};

Vector ComputePhi(const Matrix& u_a, const std::vector<int>& y_a);

double PredictPhi(const Vector& phi_a, const Vector& u_b_row);
// sign(phi) with ties at zero classified +1.
int LabelOf(double phi);

double TaylorLoss1(int y, double phi);
double TaylorDLossDPhi(int y, double phi);
double LogisticLoss1(int y, double phi);
double LogisticDLossDPhi(int y, double phi);
double Loss1(LossMode mode, int y, double phi);
double DLoss1(LossMode mode, int y, double phi);

struct LossBreakdown {
  double l1 = 0;
  double l2 = 0;
  double l3_a = 0;
  double l3_b = 0;
  double total = 0;
};

LossBreakdown FullLossFromReps(const Matrix& u_a, const Matrix& u_b,
                               const Instance& inst, const nn::Params& theta_a,
                               const nn::Params& theta_b,
                               const ObjectiveConfig& cfg,
                               const AlignmentSpec& align);

double FullLoss(const Matrix& x_a, const Matrix& x_b, const Instance& inst,
                const nn::Network& net_a, const nn::Network& net_b,
                const ObjectiveConfig& cfg, const AlignmentSpec& align);

// dL/du^A and dL/du^B, excluding the regularizer.
struct RepGradients {
  Matrix du_a;
  Matrix du_b;
};
RepGradients RepresentationGradients(const Matrix& u_a, const Matrix& u_b,
                                     const Instance& inst,
                                     const ObjectiveConfig& cfg,
                                     const AlignmentSpec& align);

struct Gradients {
  nn::Params a;
  nn::Params b;
};
Gradients PlaintextGradients(const Matrix& x_a, const Matrix& x_b,
                             const Instance& inst, const nn::Network& net_a,
                             const nn::Network& net_b,
                             const ObjectiveConfig& cfg,
                             const AlignmentSpec& align);

// Throws ShapeError/RangeError when the index sets do not fit the matrices.
void ValidateInstance(const Matrix& u_a, const Matrix& u_b,
                      const Instance& inst);

struct TrainResult {
  nn::Network net_a;
  nn::Network net_b;
  std::vector<double> loss_history;
  // Flattened parameters after each update.
  std::vector<Vector> trajectory_a;
  std::vector<Vector> trajectory_b;
};

// Optional local reconstruction terms kept during joint training.
struct LocalAutoencoders {
  nn::Matrix x_a_all;  // rows used for A's reconstruction loss
  nn::Matrix x_b_all;
  nn::Autoencoder ae_a;
  nn::Autoencoder ae_b;
};

// Full-batch gradient descent on the plaintext objective with the same
// iteration and termination rule as the two-party protocol: each iteration
// records L at the current parameters, updates both networks, then stops if
// L_prev - L <= tolerance or max_iterations updates have been made.
TrainResult TrainPlain(const Matrix& x_a, const Matrix& x_b,
                       const Instance& inst, nn::Network net_a,
                       nn::Network net_b, const TrainingConfig& cfg,
                       LossMode mode, const AlignmentSpec& align,
                       LocalAutoencoders* local_ae = nullptr);

}  // namespace ftl::objective

#endif  // FTL_OBJECTIVE_H_
