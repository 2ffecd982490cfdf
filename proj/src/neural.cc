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

#include "ftl/neural.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <utility>

namespace ftl::nn {

namespace {

constexpr double kMaxActivation = 1.0 - 0x1.0p-53;
constexpr double kMinActivation = std::numeric_limits<double>::min();

// Activations of every layer; acts[0] is the input.
std::vector<Matrix> ForwardAll(const Network& net, const Matrix& x) {
  if (net.layers.empty()) throw ShapeError("network has no layers");
  if (x.cols() != net.input_dim()) {
    throw ShapeError("input has " + std::to_string(x.cols()) +
                     " columns, network expects " +
                     std::to_string(net.input_dim()));
  }
  std::vector<Matrix> acts;
  acts.reserve(net.layers.size() + 1);
  acts.push_back(x);
  for (const Layer& layer : net.layers) {
    Matrix z = acts.back() * layer.weights.transpose();
    z.rowwise() += layer.bias.transpose();
    acts.push_back(z.unaryExpr([](double v) { return Sigmoid(v); }));
  }
  return acts;
}

Matrix SigmoidPrime(const Matrix& a) {
  return a.array() * (1.0 - a.array());
}

template <typename T>
void WriteLe(std::ostream& out, T v) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(buf, buf + sizeof(T));
  }
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T ReadLe(std::istream& in) {
  unsigned char buf[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) {
    throw DataError("truncated checkpoint");
  }
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(buf, buf + sizeof(T));
  }
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

}  // namespace

int Network::input_dim() const {
  return layers.empty() ? 0 : static_cast<int>(layers.front().weights.cols());
}

int Network::hidden_dim() const {
  return layers.empty() ? 0 : static_cast<int>(layers.back().weights.rows());
}

int Network::num_params() const {
  int total = 0;
  for (const Layer& l : layers) {
    total += static_cast<int>(l.weights.size() + l.bias.size());
  }
  return total;
}

double Sigmoid(double z) {
  double s = z >= 0 ? 1.0 / (1.0 + std::exp(-z))
                    : std::exp(z) / (1.0 + std::exp(z));
  return std::clamp(s, kMinActivation, kMaxActivation);
}

Network Init(const std::vector<int>& dims, std::mt19937_64& rng) {
  if (dims.size() < 2) throw ShapeError("network needs at least one layer");
  for (int d : dims) {
    if (d <= 0) throw ShapeError("zero-width layer");
  }
  Network net;
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    const int in = dims[l], out = dims[l + 1];
    const double s = std::sqrt(6.0 / (in + out));
    std::uniform_real_distribution<double> dist(-s, s);
    Layer layer;
    layer.weights.resize(out, in);
    for (int r = 0; r < out; ++r) {
      for (int c = 0; c < in; ++c) layer.weights(r, c) = dist(rng);
    }
    layer.bias = Vector::Zero(out);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

Matrix Forward(const Network& net, const Matrix& x) {
  return std::move(ForwardAll(net, x).back());
}

HiddenRep Represent(const Network& net, const Matrix& x,
                    std::vector<int64_t> ids) {
  if (static_cast<Eigen::Index>(ids.size()) != x.rows()) {
    throw ShapeError("id count does not match row count");
  }
  return HiddenRep{Forward(net, x), std::move(ids)};
}

Params BackwardU(const Network& net, const Matrix& x, const Matrix& upstream) {
  std::vector<Matrix> acts = ForwardAll(net, x);
  if (upstream.rows() != acts.back().rows() ||
      upstream.cols() != acts.back().cols()) {
    throw ShapeError("upstream gradient shape does not match network output");
  }
  Params grads(net.layers.size());
  Matrix delta = upstream.cwiseProduct(SigmoidPrime(acts.back()));
  for (size_t l = net.layers.size(); l-- > 0;) {
    grads[l].weights = delta.transpose() * acts[l];
    grads[l].bias = delta.colwise().sum().transpose();
    if (l > 0) {
      delta = (delta * net.layers[l].weights).cwiseProduct(SigmoidPrime(acts[l]));
    }
  }
  return grads;
}

Matrix RowJacobian(const Network& net, const Vector& x_row) {
  const int d = net.hidden_dim();
  Matrix x = x_row.transpose();
  Matrix jac(d, net.num_params());
  for (int k = 0; k < d; ++k) {
    Matrix e = Matrix::Zero(1, d);
    e(0, k) = 1.0;
    jac.row(k) = Flatten(BackwardU(net, x, e)).transpose();
  }
  return jac;
}

Vector Flatten(const Params& params) {
  Eigen::Index total = 0;
  for (const Layer& l : params) total += l.weights.size() + l.bias.size();
  Vector flat(total);
  Eigen::Index pos = 0;
  for (const Layer& l : params) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) {
        flat(pos++) = l.weights(r, c);
      }
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) flat(pos++) = l.bias(r);
  }
  return flat;
}

Params Unflatten(const Vector& flat, const Network& shape) {
  if (flat.size() != shape.num_params()) {
    throw ShapeError("flat parameter vector has wrong length");
  }
  Params out;
  Eigen::Index pos = 0;
  for (const Layer& s : shape.layers) {
    Layer l;
    l.weights.resize(s.weights.rows(), s.weights.cols());
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) {
        l.weights(r, c) = flat(pos++);
      }
    }
    l.bias.resize(s.bias.size());
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = flat(pos++);
    out.push_back(std::move(l));
  }
  return out;
}

Params ZerosLike(const Network& net) {
  Params out;
  for (const Layer& l : net.layers) {
    out.push_back(Layer{Matrix::Zero(l.weights.rows(), l.weights.cols()),
                        Vector::Zero(l.bias.size())});
  }
  return out;
}

double SquaredNorm(const Params& params) {
  double total = 0;
  for (const Layer& l : params) {
    total += l.weights.squaredNorm() + l.bias.squaredNorm();
  }
  return total;
}

void Axpy(double scale, const Params& delta, Params& params) {
  if (delta.size() != params.size()) throw ShapeError("layer count mismatch");
  for (size_t l = 0; l < params.size(); ++l) {
    params[l].weights += scale * delta[l].weights;
    params[l].bias += scale * delta[l].bias;
  }
}

Autoencoder MakeAutoencoder(const Network& net) {
  Autoencoder ae;
  for (const Layer& l : net.layers) {
    ae.decoder_bias.push_back(Vector::Zero(l.weights.cols()));
  }
  return ae;
}

namespace {

struct LayerReconstruction {
  double loss;
  Layer grad;
  Vector bias_grad;
};

LayerReconstruction ReconstructLayer(const Layer& layer, const Vector& c,
                                     const Matrix& input) {
  const double n = static_cast<double>(input.rows());
  Matrix z = input * layer.weights.transpose();
  z.rowwise() += layer.bias.transpose();
  Matrix h = z.unaryExpr([](double v) { return Sigmoid(v); });
  Matrix recon = h * layer.weights;
  recon.rowwise() += c.transpose();
  Matrix resid = recon - input;
  LayerReconstruction out;
  out.loss = 0.5 * resid.squaredNorm() / n;
  Matrix r = resid / n;
  out.bias_grad = r.colwise().sum().transpose();
  Matrix dz = (r * layer.weights.transpose()).cwiseProduct(SigmoidPrime(h));
  out.grad.weights = h.transpose() * r + dz.transpose() * input;
  out.grad.bias = dz.colwise().sum().transpose();
  return out;
}

}  // namespace

Reconstruction ReconstructionLossAndGrad(const Network& net, const Matrix& x,
                                         const Autoencoder& ae) {
  if (ae.decoder_bias.size() != net.layers.size()) {
    throw ShapeError("autoencoder does not match network depth");
  }
  std::vector<Matrix> acts = ForwardAll(net, x);
  Reconstruction out;
  for (size_t l = 0; l < net.layers.size(); ++l) {
    LayerReconstruction lr =
        ReconstructLayer(net.layers[l], ae.decoder_bias[l], acts[l]);
    out.loss += lr.loss;
    out.grads.push_back(std::move(lr.grad));
    out.bias_grads.push_back(std::move(lr.bias_grad));
  }
  return out;
}

double ReconstructionLoss(const Network& net, const Matrix& x,
                          const Autoencoder& ae) {
  return ReconstructionLossAndGrad(net, x, ae).loss;
}

Network AutoencoderPretrain(const Network& net, const Matrix& x, int epochs,
                            double lr, Autoencoder* ae) {
  Network out = net;
  Autoencoder local = ae ? *ae : MakeAutoencoder(net);
  if (local.decoder_bias.size() != net.layers.size()) {
    throw ShapeError("autoencoder does not match network depth");
  }
  Matrix input = x;
  for (size_t l = 0; l < out.layers.size(); ++l) {
    Layer& layer = out.layers[l];
    for (int e = 0; e < epochs; ++e) {
      LayerReconstruction g =
          ReconstructLayer(layer, local.decoder_bias[l], input);
      layer.weights -= lr * g.grad.weights;
      layer.bias -= lr * g.grad.bias;
      local.decoder_bias[l] -= lr * g.bias_grad;
    }
    Matrix z = input * layer.weights.transpose();
    z.rowwise() += layer.bias.transpose();
    input = z.unaryExpr([](double v) { return Sigmoid(v); });
  }
  if (ae) *ae = std::move(local);
  return out;
}

void SaveCheckpoint(const Network& net, std::ostream& out) {
  WriteLe<uint32_t>(out, static_cast<uint32_t>(net.layers.size()));
  for (const Layer& l : net.layers) {
    WriteLe<uint32_t>(out, static_cast<uint32_t>(l.weights.rows()));
    WriteLe<uint32_t>(out, static_cast<uint32_t>(l.weights.cols()));
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) {
        WriteLe<double>(out, l.weights(r, c));
      }
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) {
      WriteLe<double>(out, l.bias(r));
    }
  }
}

Network LoadCheckpoint(std::istream& in) {
  const uint32_t count = ReadLe<uint32_t>(in);
  Network net;
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t rows = ReadLe<uint32_t>(in);
    const uint32_t cols = ReadLe<uint32_t>(in);
    if (rows == 0 || cols == 0) throw DataError("zero-width layer in checkpoint");
    if (!net.layers.empty() &&
        net.layers.back().weights.rows() != static_cast<Eigen::Index>(cols)) {
      throw ShapeError("checkpoint layers do not chain");
    }
    Layer l;
    l.weights.resize(rows, cols);
    for (uint32_t r = 0; r < rows; ++r) {
      for (uint32_t c = 0; c < cols; ++c) l.weights(r, c) = ReadLe<double>(in);
    }
    l.bias.resize(rows);
    for (uint32_t r = 0; r < rows; ++r) l.bias(r) = ReadLe<double>(in);
    net.layers.push_back(std::move(l));
  }
  return net;
}

}  // namespace ftl::nn
