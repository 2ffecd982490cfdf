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

// Local party networks: stacked sigmoid encoder layers
//   x_l = sigmoid(W_l x_{l-1} + b_l),  u = x_L
// with exact backpropagation and greedy tied-weight autoencoder pretraining.

#ifndef FTL_NEURAL_H_
#define FTL_NEURAL_H_

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

#include "ftl/errors.h"

namespace ftl::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Layer {
  Matrix weights;  // out x in
  Vector bias;     // out
};

// Parameters (or gradients) of every layer, first layer first.
using Params = std::vector<Layer>;

struct Network {
  Params layers;

  int input_dim() const;
  // Width of the last layer: the hidden representation dimension d.
  int hidden_dim() const;
  // Total number of scalars across weights and biases.
  int num_params() const;
};

// Output of a local network together with the ids of the rows it encodes.
struct HiddenRep {
  Matrix values;  // N x d
  std::vector<int64_t> sample_ids;
};

double Sigmoid(double z);

// Glorot-uniform weights, zero biases. `dims` = {input, h_1, ..., d}.
Network Init(const std::vector<int>& dims, std::mt19937_64& rng);

// Rows of `x` are samples. Throws ShapeError on a width mismatch.
Matrix Forward(const Network& net, const Matrix& x);
HiddenRep Represent(const Network& net, const Matrix& x,
                    std::vector<int64_t> ids);

// dL/dtheta for every layer given dL/du for every row of Forward(net, x).
Params BackwardU(const Network& net, const Matrix& x, const Matrix& upstream);

// d x P Jacobian of u(x_row) with respect to the flattened parameters.
Matrix RowJacobian(const Network& net, const Vector& x_row);

// Flattening order: layer by layer, weights row-major, then bias.
Vector Flatten(const Params& params);
Params Unflatten(const Vector& flat, const Network& shape);
Params ZerosLike(const Network& net);

// Sum of squared Frobenius norms of all weights and biases.
double SquaredNorm(const Params& params);
// params += scale * delta
void Axpy(double scale, const Params& delta, Params& params);

// Decoder state for tied-weight autoencoders, one bias per encoder layer.
struct Autoencoder {
  std::vector<Vector> decoder_bias;
};

Autoencoder MakeAutoencoder(const Network& net);

// Reconstruction of layer l's input is W_l' x_l + c_l (linear decoder).
// Loss is the sum over layers of mean half squared error, with each layer's
// input treated as a constant.
struct Reconstruction {
  double loss = 0;
  Params grads;
  std::vector<Vector> bias_grads;
};
Reconstruction ReconstructionLossAndGrad(const Network& net, const Matrix& x,
                                         const Autoencoder& ae);

// Greedy layer-wise pretraining with full-batch gradient descent. Returns the
// updated network; `epochs` = 0 is a no-op.
Network AutoencoderPretrain(const Network& net, const Matrix& x, int epochs,
                            double lr, Autoencoder* ae = nullptr);

// Per-layer mean half squared reconstruction error, summed over layers.
double ReconstructionLoss(const Network& net, const Matrix& x,
                          const Autoencoder& ae);

// Checkpoint: uint32 layer count, then per layer uint32 out, uint32 in,
// out*in weights row-major and out biases, all little-endian float64.
void SaveCheckpoint(const Network& net, std::ostream& out);
Network LoadCheckpoint(std::istream& in);

}  // namespace ftl::nn

#endif  // FTL_NEURAL_H_
