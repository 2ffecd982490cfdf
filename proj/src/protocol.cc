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

#include <cmath>
#include <map>
#include <numbers>
#include <string>

#include "ftl/protocol.h"

namespace ftl::protocol {
namespace {

using he::FixedPoint;
using transport::BlockHeader;
using transport::Bytes;

EncVector EncryptVector(const he::PublicKeyPtr& pk, const Vector& v, int frac,
                        he::RandomSource& rng) {
  EncVector out;
  out.reserve(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out.push_back(he::EncryptReal(pk, v(i), frac, rng));
  }
  return out;
}

std::vector<FixedPoint> EncodeVector(const Vector& v, int frac,
                                     const he::PublicKey& pk) {
  std::vector<FixedPoint> out;
  out.reserve(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out.push_back(he::Encode(v(i), frac, pk));
  }
  return out;
}

Vector RowOf(const Matrix& m, int r) { return m.row(r).transpose(); }

// Flattened row-major d x d matrix.
Vector FlattenSquare(const Matrix& m) {
  Vector out(m.size());
  for (Eigen::Index a = 0; a < m.rows(); ++a) {
    for (Eigen::Index b = 0; b < m.cols(); ++b) out(a * m.cols() + b) = m(a, b);
  }
  return out;
}

void CheckRows(const std::vector<int>& rows, const Matrix& x,
               const char* what) {
  for (int r : rows) {
    if (r < 0 || r >= x.rows()) {
      throw RangeError(std::string(what) + " row " + std::to_string(r) +
                       " out of range");
    }
  }
}

// Plaintext part of a party's gradient: alignment terms that depend only on
// its own representations, the regularizer and an optional extra term.
Vector LocalGradient(const nn::Network& net, const Matrix& x, const Matrix& u,
                     const std::vector<int>& overlap_rows, double gamma,
                     double lambda, bool is_a, const AlignmentSpec& align,
                     const nn::Params* extra) {
  Matrix du = Matrix::Zero(u.rows(), u.cols());
  if (align.kind() != AlignmentKind::kInnerProduct && gamma != 0) {
    for (int r : overlap_rows) {
      Vector ur = RowOf(u, r);
      du.row(r) += gamma * (is_a ? align.GradPartA(ur) : align.GradPartB(ur))
                               .transpose();
    }
  }
  nn::Params g = nn::BackwardU(net, x, du);
  nn::Axpy(lambda, net.layers, g);
  if (extra) nn::Axpy(1.0, *extra, g);
  return nn::Flatten(g);
}

// out[p] += Enc(local[p] + mask[p]) at the mask's level.
void AddLocalAndMask(EncVector& acc, const Vector& local, const Mask& mask,
                     const he::PublicKeyPtr& pk, he::RandomSource& rng) {
  if (static_cast<Eigen::Index>(mask.raw.size()) != local.size() ||
      acc.size() != mask.raw.size()) {
    throw ShapeError("mask size does not match gradient size");
  }
  for (size_t p = 0; p < acc.size(); ++p) {
    FixedPoint v = he::Encode(local(p), mask.frac_bits, *pk);
    v.raw += mask.raw[p];
    acc[p] = he::Add(acc[p], he::Encrypt(pk, v, rng));
  }
}

void CheckFamily(const std::vector<EncVector>& fam, size_t items,
                 size_t per_item, const char* name) {
  if (fam.size() != items) {
    throw ProtocolError(std::string("component family ") + name + " has " +
                        std::to_string(fam.size()) + " items, expected " +
                        std::to_string(items));
  }
  for (const EncVector& v : fam) {
    if (v.size() != per_item) {
      throw ProtocolError(std::string("component family ") + name +
                          " has a malformed item");
    }
  }
}

void AppendFamily(uint8_t tag, const std::vector<EncVector>& fam,
                  size_t per_item, const he::PublicKey* pk, Bytes& out) {
  const size_t ct = pk ? he::SerializedCiphertextSize(*pk) : 0;
  BlockHeader h{tag, static_cast<uint32_t>(fam.size()),
                static_cast<uint32_t>(per_item), fam.size() * per_item * ct};
  transport::AppendBlockHeader(h, out);
  for (const EncVector& v : fam) {
    for (const Ciphertext& c : v) he::AppendCiphertext(c, out);
  }
}

std::vector<EncVector> ReadFamily(std::span<const uint8_t> in, size_t& off,
                                  uint8_t tag, size_t items, size_t per_item,
                                  const he::PublicKeyPtr& pk) {
  BlockHeader h = transport::ReadBlockHeader(in, off);
  if (h.family != tag || h.items != items || h.per_item != per_item) {
    throw ProtocolError("unexpected component block (family " +
                        std::to_string(h.family) + ")");
  }
  const size_t end = off + h.byte_len;
  std::vector<EncVector> fam(items);
  for (EncVector& v : fam) {
    v.reserve(per_item);
    for (size_t k = 0; k < per_item; ++k) {
      v.push_back(he::ReadCiphertext(in, off, pk));
    }
  }
  if (off != end) throw FramingError("component block length mismatch");
  return fam;
}

const he::PublicKey* AnyKey(const std::vector<EncVector>& fam) {
  for (const EncVector& v : fam) {
    if (!v.empty()) return v[0].key().get();
  }
  return nullptr;
}

}  // namespace

AlignmentSpec ProtocolOptions::Alignment() const {
  return alignment == AlignmentKind::kInnerProduct
             ? AlignmentSpec::InnerProduct()
             : AlignmentSpec::SquaredDistance();
}

void ProtocolOptions::Validate() const {
  if (frac_bits < 1) throw ConfigError("fractional bits must be >= 1");
  if (mask_bits < 1) throw ConfigError("mask bits must be >= 1");
  // Gradients sit at 3f; leave 64 bits of headroom for their magnitude and
  // the accumulated sums.
  if (3 * frac_bits + mask_bits + 64 > key_bits - 2) {
    throw ConfigError("key of " + std::to_string(key_bits) +
                      " bits too small for f=" + std::to_string(frac_bits));
  }
}

PartyKeys GenerateKeys(int bits, uint64_t seed) {
  he::RandomSource rng = he::RandomSource::Seeded(seed);
  he::KeyPair a = he::KeyGen(bits, rng);
  he::KeyPair b = he::KeyGen(bits, rng);
  return PartyKeys{std::move(a), std::move(b)};
}

std::pair<PartyAData, PartyBData> SplitInstance(
    const Matrix& x_a, const Matrix& x_b, const objective::Instance& inst) {
  PartyAData a{x_a, inst.y_a, {}, {}};
  PartyBData b{x_b, {}, {}};
  for (const auto& l : inst.labeled) {
    a.labels_c.push_back(l.y);
    b.labeled_rows.push_back(l.b_row);
  }
  for (const auto& p : inst.overlap) {
    a.overlap_rows.push_back(p.a_row);
    b.overlap_rows.push_back(p.b_row);
  }
  return {std::move(a), std::move(b)};
}

objective::Instance JoinInstance(const PartyAData& a, const PartyBData& b) {
  if (a.labels_c.size() != b.labeled_rows.size() ||
      a.overlap_rows.size() != b.overlap_rows.size()) {
    throw ShapeError("party index sets disagree in size");
  }
  objective::Instance inst;
  inst.y_a = a.y_phi;
  for (size_t i = 0; i < a.labels_c.size(); ++i) {
    inst.labeled.push_back({b.labeled_rows[i], a.labels_c[i]});
  }
  for (size_t k = 0; k < a.overlap_rows.size(); ++k) {
    inst.overlap.push_back({a.overlap_rows[k], b.overlap_rows[k]});
  }
  return inst;
}

ComponentsA ComputeComponentsA(const Matrix& u_a, const PartyAData& data,
                               const Vector& phi, const ObjectiveConfig& cfg,
                               const AlignmentSpec& align, int frac_bits,
                               const he::PublicKeyPtr& pk_a,
                               he::RandomSource& rng) {
  CheckRows(data.overlap_rows, u_a, "overlap");
  const int d = static_cast<int>(u_a.cols());
  if (phi.size() != d) throw ShapeError("translator dimension mismatch");
  ComponentsA c;
  c.d = d;
  const Vector outer = FlattenSquare(phi * phi.transpose());
  for (int y : data.labels_c) {
    if (y != 1 && y != -1) throw RangeError("labels must be +-1");
    const double dy = y * y, cy = -y;
    c.h1.push_back(EncryptVector(pk_a, 0.125 * dy * outer, frac_bits, rng));
    c.h2.push_back(EncryptVector(pk_a, 0.5 * cy * phi, frac_bits, rng));
  }
  for (int r : data.overlap_rows) {
    c.h3.push_back(EncryptVector(pk_a, cfg.gamma * align.kappa() * RowOf(u_a, r),
                                 frac_bits, rng));
  }
  return c;
}

ComponentsB ComputeComponentsB(const Matrix& u_b, const PartyBData& data,
                               const nn::Params& theta_b,
                               const ObjectiveConfig& cfg,
                               const AlignmentSpec& align, int frac_bits,
                               const he::PublicKeyPtr& pk_b,
                               he::RandomSource& rng) {
  CheckRows(data.labeled_rows, u_b, "labeled");
  CheckRows(data.overlap_rows, u_b, "overlap");
  ComponentsB c;
  c.d = static_cast<int>(u_b.cols());
  for (int r : data.labeled_rows) {
    Vector u = RowOf(u_b, r);
    c.h1.push_back(
        EncryptVector(pk_b, FlattenSquare(u * u.transpose()), frac_bits, rng));
    c.h2.push_back(EncryptVector(pk_b, u, frac_bits, rng));
  }
  double part_b = 0;
  for (int r : data.overlap_rows) {
    Vector u = RowOf(u_b, r);
    c.h3.push_back(EncryptVector(pk_b, align.kappa() * u, frac_bits, rng));
    part_b += align.PartB(u);
  }
  c.h4 = he::EncryptReal(
      pk_b, 0.5 * cfg.lambda * nn::SquaredNorm(theta_b) + cfg.gamma * part_b,
      frac_bits, rng);
  return c;
}

Bytes SerializeComponents(const ComponentsA& c) {
  const he::PublicKey* pk = AnyKey(c.h1);
  if (!pk) pk = AnyKey(c.h3);
  const size_t d = c.d;
  Bytes out;
  AppendFamily(1, c.h1, d * d, pk, out);
  AppendFamily(2, c.h2, d, pk, out);
  AppendFamily(3, c.h3, d, pk, out);
  return out;
}

Bytes SerializeComponents(const ComponentsB& c) {
  const he::PublicKey* pk = c.h4.key().get();
  const size_t d = c.d;
  Bytes out;
  AppendFamily(1, c.h1, d * d, pk, out);
  AppendFamily(2, c.h2, d, pk, out);
  AppendFamily(3, c.h3, d, pk, out);
  AppendFamily(4, {EncVector{c.h4}}, 1, pk, out);
  return out;
}

ComponentsA ParseComponentsA(std::span<const uint8_t> payload,
                             const he::PublicKeyPtr& pk, int d, size_t n_c,
                             size_t n_ab) {
  ComponentsA c;
  c.d = d;
  size_t off = 0;
  const size_t dd = static_cast<size_t>(d);
  c.h1 = ReadFamily(payload, off, 1, n_c, dd * dd, pk);
  c.h2 = ReadFamily(payload, off, 2, n_c, dd, pk);
  c.h3 = ReadFamily(payload, off, 3, n_ab, dd, pk);
  if (off != payload.size()) throw FramingError("trailing component bytes");
  return c;
}

ComponentsB ParseComponentsB(std::span<const uint8_t> payload,
                             const he::PublicKeyPtr& pk, int d, size_t n_c,
                             size_t n_ab) {
  ComponentsB c;
  c.d = d;
  size_t off = 0;
  const size_t dd = static_cast<size_t>(d);
  c.h1 = ReadFamily(payload, off, 1, n_c, dd * dd, pk);
  c.h2 = ReadFamily(payload, off, 2, n_c, dd, pk);
  c.h3 = ReadFamily(payload, off, 3, n_ab, dd, pk);
  c.h4 = ReadFamily(payload, off, 4, 1, 1, pk)[0][0];
  if (off != payload.size()) throw FramingError("trailing component bytes");
  return c;
}

Mask DrawMask(size_t count, int frac_bits, int mask_bits, uint32_t iteration,
              std::string purpose, he::RandomSource& rng) {
  Mask m{iteration, std::move(purpose), frac_bits, {}};
  BigInt half = 1;
  half <<= (mask_bits + frac_bits);
  const BigInt span = 2 * half + 1;
  m.raw.reserve(count);
  for (size_t i = 0; i < count; ++i) m.raw.push_back(rng.Below(span) - half);
  return m;
}

Mask ZeroMask(size_t count, int frac_bits) {
  return Mask{0, "zero", frac_bits, std::vector<BigInt>(count, BigInt(0))};
}

EncVector AssembleMaskedGradB(const ComponentsA& comps, const nn::Network& net_b,
                              const PartyBData& data, const ObjectiveConfig& cfg,
                              const AlignmentSpec& align, const Mask& mask,
                              int frac_bits, const he::PublicKeyPtr& pk_a,
                              he::RandomSource& rng, const nn::Params* extra) {
  const int f = frac_bits;
  const Matrix u_b = nn::Forward(net_b, data.x);
  const int d = static_cast<int>(u_b.cols());
  CheckRows(data.labeled_rows, u_b, "labeled");
  CheckRows(data.overlap_rows, u_b, "overlap");
  if (comps.d != d) throw ShapeError("component dimension mismatch");
  CheckFamily(comps.h1, data.labeled_rows.size(), size_t(d) * d, "h1");
  CheckFamily(comps.h2, data.labeled_rows.size(), d, "h2");
  CheckFamily(comps.h3, data.overlap_rows.size(), d, "h3");
  const he::PublicKey& pk = *pk_a;

  // Encrypted dL/du_r at 2f for every row that appears in D_c or D_AB.
  std::map<int, EncVector> du;
  auto slot = [&](int r) -> EncVector& {
    auto it = du.find(r);
    if (it == du.end()) {
      it = du.emplace(r, EncVector(d, he::TrivialZero(pk_a, 2 * f))).first;
    }
    return it->second;
  };
  for (size_t i = 0; i < data.labeled_rows.size(); ++i) {
    const int r = data.labeled_rows[i];
    const std::vector<FixedPoint> two_u =
        EncodeVector(2.0 * RowOf(u_b, r), f, pk);
    EncVector& g = slot(r);
    for (int a = 0; a < d; ++a) {
      std::span<const Ciphertext> h1_row(comps.h1[i].data() + a * d, d);
      Ciphertext t = he::Add(he::EncDot(two_u, h1_row),
                             he::Rescale(comps.h2[i][a], f));
      g[a] = he::Add(g[a], t);
    }
  }
  for (size_t k = 0; k < data.overlap_rows.size(); ++k) {
    EncVector& g = slot(data.overlap_rows[k]);
    for (int a = 0; a < d; ++a) {
      g[a] = he::Add(g[a], he::Rescale(comps.h3[k][a], f));
    }
  }

  const int num_params = net_b.num_params();
  EncVector out(num_params, he::TrivialZero(pk_a, 3 * f));
  for (const auto& [r, g] : du) {
    const Matrix jac = nn::RowJacobian(net_b, RowOf(data.x, r));
    for (int p = 0; p < num_params; ++p) {
      std::vector<FixedPoint> col = EncodeVector(jac.col(p), f, pk);
      bool any = false;
      for (const FixedPoint& c : col) any |= (c.raw != 0);
      if (!any) continue;
      out[p] = he::Add(out[p], he::EncDot(col, g));
    }
  }
  const Vector local = LocalGradient(net_b, data.x, u_b, data.overlap_rows,
                                     cfg.gamma, cfg.lambda, false, align, extra);
  AddLocalAndMask(out, local, mask, pk_a, rng);
  return out;
}

EncVector AssembleMaskedGradA(const ComponentsB& comps, const nn::Network& net_a,
                              const PartyAData& data, const ObjectiveConfig& cfg,
                              const AlignmentSpec& align, const Mask& mask,
                              int frac_bits, const he::PublicKeyPtr& pk_b,
                              he::RandomSource& rng, const nn::Params* extra) {
  const int f = frac_bits;
  const Matrix u_a = nn::Forward(net_a, data.x);
  const int d = static_cast<int>(u_a.cols());
  CheckRows(data.overlap_rows, u_a, "overlap");
  if (comps.d != d) throw ShapeError("component dimension mismatch");
  CheckFamily(comps.h1, data.labels_c.size(), size_t(d) * d, "h1");
  CheckFamily(comps.h2, data.labels_c.size(), d, "h2");
  CheckFamily(comps.h3, data.overlap_rows.size(), d, "h3");
  const he::PublicKey& pk = *pk_b;
  const Vector phi = objective::ComputePhi(u_a, data.y_phi);
  const int num_params = net_a.num_params();
  EncVector out(num_params, he::TrivialZero(pk_b, 3 * f));

  // S = sum_i dl_i/dphi_i u_i^B
  //   = sum_i 1/4 D(y_i) [[u_i u_i']] Phi + 1/2 C(y_i) [[u_i]]   (2f)
  const int n_a = [&] {
    int n = 0;
    for (int y : data.y_phi) n += (y != 0);
    return n;
  }();
  if (!data.labels_c.empty() && n_a > 0) {
    EncVector s(d, he::TrivialZero(pk_b, 2 * f));
    for (size_t i = 0; i < data.labels_c.size(); ++i) {
      const int y = data.labels_c[i];
      std::vector<FixedPoint> plain = EncodeVector(0.25 * y * y * phi, f, pk);
      plain.push_back(he::Encode(0.5 * -y, f, pk));
      for (int a = 0; a < d; ++a) {
        EncVector enc(comps.h1[i].begin() + a * d,
                      comps.h1[i].begin() + (a + 1) * d);
        enc.push_back(comps.h2[i][a]);
        s[a] = he::Add(s[a], he::EncDot(plain, enc));
      }
    }
    // dPhi/du_j = y_j / N_A, so the L1 gradient is M' S with
    // M = sum_j (y_j / N_A) J_j.
    Matrix m = Matrix::Zero(d, num_params);
    for (size_t j = 0; j < data.y_phi.size(); ++j) {
      if (data.y_phi[j] == 0) continue;
      m += (static_cast<double>(data.y_phi[j]) / n_a) *
           nn::RowJacobian(net_a, RowOf(data.x, j));
    }
    for (int p = 0; p < num_params; ++p) {
      std::vector<FixedPoint> col = EncodeVector(m.col(p), f, pk);
      bool any = false;
      for (const FixedPoint& c : col) any |= (c.raw != 0);
      if (any) out[p] = he::Add(out[p], he::EncDot(col, s));
    }
  }

  // Alignment cross term: gamma J_k' [[kappa u_k^B]], accumulated at 2f.
  if (!data.overlap_rows.empty() && cfg.gamma != 0) {
    EncVector cross(num_params, he::TrivialZero(pk_b, 2 * f));
    for (size_t k = 0; k < data.overlap_rows.size(); ++k) {
      const Matrix jac =
          cfg.gamma * nn::RowJacobian(net_a, RowOf(data.x, data.overlap_rows[k]));
      for (int p = 0; p < num_params; ++p) {
        std::vector<FixedPoint> col = EncodeVector(jac.col(p), f, pk);
        bool any = false;
        for (const FixedPoint& c : col) any |= (c.raw != 0);
        if (any) cross[p] = he::Add(cross[p], he::EncDot(col, comps.h3[k]));
      }
    }
    for (int p = 0; p < num_params; ++p) {
      out[p] = he::Add(out[p], he::Rescale(cross[p], f));
    }
  }

  const Vector local = LocalGradient(net_a, data.x, u_a, data.overlap_rows,
                                     cfg.gamma, cfg.lambda, true, align, extra);
  AddLocalAndMask(out, local, mask, pk_b, rng);
  return out;
}

Ciphertext AssembleEncLoss(const ComponentsB& comps, const nn::Network& net_a,
                           const PartyAData& data, const ObjectiveConfig& cfg,
                           const AlignmentSpec& align, int frac_bits,
                           const he::PublicKeyPtr& pk_b, he::RandomSource& rng) {
  const int f = frac_bits;
  const Matrix u_a = nn::Forward(net_a, data.x);
  const int d = static_cast<int>(u_a.cols());
  CheckRows(data.overlap_rows, u_a, "overlap");
  if (comps.d != d) throw ShapeError("component dimension mismatch");
  CheckFamily(comps.h1, data.labels_c.size(), size_t(d) * d, "h1");
  CheckFamily(comps.h2, data.labels_c.size(), d, "h2");
  CheckFamily(comps.h3, data.overlap_rows.size(), d, "h3");
  const he::PublicKey& pk = *pk_b;
  const Vector phi = objective::ComputePhi(u_a, data.y_phi);
  const Vector outer = FlattenSquare(phi * phi.transpose());

  Ciphertext acc = he::TrivialZero(pk_b, 2 * f);
  for (size_t i = 0; i < data.labels_c.size(); ++i) {
    const int y = data.labels_c[i];
    std::vector<FixedPoint> quad = EncodeVector(0.125 * y * y * outer, f, pk);
    std::vector<FixedPoint> lin = EncodeVector(0.5 * -y * phi, f, pk);
    acc = he::Add(acc, he::EncDot(quad, comps.h1[i]));
    acc = he::Add(acc, he::EncDot(lin, comps.h2[i]));
  }
  double part_a = 0;
  for (size_t k = 0; k < data.overlap_rows.size(); ++k) {
    Vector ua = RowOf(u_a, data.overlap_rows[k]);
    part_a += align.PartA(ua);
    if (cfg.gamma == 0) continue;
    acc = he::Add(acc,
                  he::EncDot(EncodeVector(cfg.gamma * ua, f, pk), comps.h3[k]));
  }
  // Terms only A can evaluate, encrypted by A under B's key.
  const double own = data.labels_c.size() * std::numbers::ln2 +
                     cfg.gamma * part_a +
                     0.5 * cfg.lambda * nn::SquaredNorm(net_a.layers);
  acc = he::Add(acc, he::EncryptReal(pk_b, own, 2 * f, rng));
  return he::Add(acc, he::Rescale(comps.h4, f));
}

EncVector ApplyMask(const EncVector& values, const Mask& mask,
                    he::RandomSource& rng) {
  if (values.size() != mask.raw.size()) {
    throw ShapeError("mask size does not match");
  }
  EncVector out;
  out.reserve(values.size());
  for (size_t i = 0; i < values.size(); ++i) {
    if (values[i].frac_bits() != mask.frac_bits) {
      throw ScaleError("mask level differs from value level");
    }
    out.push_back(he::Add(
        values[i], he::Encrypt(values[i].key(),
                               FixedPoint{mask.raw[i], mask.frac_bits}, rng)));
  }
  return out;
}

std::vector<BigInt> DecryptAll(const he::KeyPair& kp, const EncVector& values) {
  std::vector<BigInt> out;
  out.reserve(values.size());
  for (const Ciphertext& c : values) out.push_back(he::DecryptRaw(kp, c));
  return out;
}

Vector Unmask(const std::vector<BigInt>& plaintexts, const Mask& mask,
              const he::PublicKey& pk) {
  if (plaintexts.size() != mask.raw.size()) {
    throw ShapeError("unmask size mismatch");
  }
  Vector out(plaintexts.size());
  for (size_t i = 0; i < plaintexts.size(); ++i) {
    BigInt v = (plaintexts[i] - he::ToPlaintext(mask.raw[i], pk)) % pk.n;
    if (v < 0) v += pk.n;
    out(i) = he::Decode(FixedPoint{he::FromPlaintext(v, pk), mask.frac_bits});
  }
  return out;
}

Bytes SerializeEncVector(const EncVector& v) {
  Bytes out(4);
  const uint32_t n = static_cast<uint32_t>(v.size());
  for (int i = 0; i < 4; ++i) out[i] = static_cast<uint8_t>(n >> (24 - 8 * i));
  for (const Ciphertext& c : v) he::AppendCiphertext(c, out);
  return out;
}

EncVector ParseEncVector(std::span<const uint8_t> payload,
                         const he::PublicKeyPtr& pk) {
  if (payload.size() < 4) throw FramingError("truncated ciphertext vector");
  uint32_t n = 0;
  for (int i = 0; i < 4; ++i) n = (n << 8) | payload[i];
  size_t off = 4;
  if ((payload.size() - off) != n * he::SerializedCiphertextSize(*pk)) {
    throw FramingError("ciphertext vector length mismatch");
  }
  EncVector out;
  out.reserve(n);
  for (uint32_t i = 0; i < n; ++i) out.push_back(he::ReadCiphertext(payload, off, pk));
  return out;
}

Bytes SerializeBlob(const std::vector<BigInt>& values, const he::PublicKey& pk) {
  const size_t width = (mpz_sizeinbase(pk.n.get_mpz_t(), 2) + 7) / 8;
  Bytes out(4);
  const uint32_t n = static_cast<uint32_t>(values.size());
  for (int i = 0; i < 4; ++i) out[i] = static_cast<uint8_t>(n >> (24 - 8 * i));
  for (const BigInt& v : values) {
    if (v < 0 || v >= pk.n) throw RangeError("blob value outside [0, n)");
    Bytes b = he::ToBytes(v, width);
    out.insert(out.end(), b.begin(), b.end());
  }
  return out;
}

std::vector<BigInt> ParseBlob(std::span<const uint8_t> payload,
                              const he::PublicKey& pk) {
  const size_t width = (mpz_sizeinbase(pk.n.get_mpz_t(), 2) + 7) / 8;
  if (payload.size() < 4) throw FramingError("truncated blob");
  uint32_t n = 0;
  for (int i = 0; i < 4; ++i) n = (n << 8) | payload[i];
  if (payload.size() - 4 != n * width) throw FramingError("blob length mismatch");
  std::vector<BigInt> out;
  out.reserve(n);
  for (uint32_t i = 0; i < n; ++i) {
    BigInt v = he::FromBytes(payload.subspan(4 + i * width, width));
    if (v >= pk.n) throw RangeError("blob value outside [0, n)");
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace ftl::protocol
