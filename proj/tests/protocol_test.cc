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

#include "ftl/protocol.h"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <thread>

#include "test_util.h"

namespace ftl::protocol {
namespace {

using ::ftl::testing::MakeRandomProblem;
using ::ftl::testing::RandomProblem;
using objective::FullLoss;
using objective::LossMode;
using objective::PlaintextGradients;

constexpr int kF = he::kDefaultFracBits;

const PartyKeys& Keys() {
  static const PartyKeys* keys = new PartyKeys(GenerateKeys(512, 77));
  return *keys;
}

ProtocolOptions SmallOptions() {
  ProtocolOptions opt;
  opt.key_bits = 512;
  return opt;
}

Vector DecryptReal(const he::KeyPair& kp, const EncVector& v, int frac) {
  return Unmask(DecryptAll(kp, v), ZeroMask(v.size(), frac), *kp.pub);
}

double MaxAbs(const Vector& a, const Vector& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

struct Fixture {
  RandomProblem p;
  PartyAData a;
  PartyBData b;
};

Fixture MakeFixture(uint64_t seed, int d, int n_c, int n_ab, int layers = 1) {
  std::mt19937_64 rng(seed);
  Fixture fx{MakeRandomProblem(rng, d, layers, 6, 6, n_c, n_ab), {}, {}};
  std::tie(fx.a, fx.b) = SplitInstance(fx.p.x_a, fx.p.x_b, fx.p.inst);
  return fx;
}

TEST(SplitTest, JoinInvertsSplit) {
  Fixture fx = MakeFixture(1, 3, 4, 3);
  objective::Instance back = JoinInstance(fx.a, fx.b);
  ASSERT_EQ(back.labeled.size(), fx.p.inst.labeled.size());
  for (size_t i = 0; i < back.labeled.size(); ++i) {
    EXPECT_EQ(back.labeled[i].b_row, fx.p.inst.labeled[i].b_row);
    EXPECT_EQ(back.labeled[i].y, fx.p.inst.labeled[i].y);
  }
  EXPECT_EQ(back.y_a, fx.p.inst.y_a);
}

TEST(OptionsTest, SmallKeysRejectedForLargeFractions) {
  ProtocolOptions opt = SmallOptions();
  EXPECT_NO_THROW(opt.Validate());
  opt.frac_bits = 150;
  EXPECT_THROW(opt.Validate(), ConfigError);
}

TEST(ComponentsATest, CountsAndZeroTranslator) {
  Fixture fx = MakeFixture(2, 3, 4, 5);
  he::RandomSource rng = he::RandomSource::Seeded(1);
  const Matrix u_a = nn::Forward(fx.p.net_a, fx.p.x_a);
  ComponentsA c = ComputeComponentsA(u_a, fx.a, Vector::Zero(3),
                                     ObjectiveConfig{}, AlignmentSpec::InnerProduct(),
                                     kF, Keys().a.pub, rng);
  EXPECT_EQ(c.h1.size(), 4u);
  EXPECT_EQ(c.h2.size(), 4u);
  EXPECT_EQ(c.h3.size(), 5u);
  for (size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(DecryptReal(Keys().a, c.h1[i], kF), Vector::Zero(9));
    EXPECT_EQ(DecryptReal(Keys().a, c.h2[i], kF), Vector::Zero(3));
  }
}

TEST(ComponentsATest, DecryptsToDefinedQuantities) {
  Fixture fx = MakeFixture(3, 3, 2, 3);
  he::RandomSource rng = he::RandomSource::Seeded(2);
  const Matrix u_a = nn::Forward(fx.p.net_a, fx.p.x_a);
  const Vector phi = objective::ComputePhi(u_a, fx.a.y_phi);
  ObjectiveConfig cfg{0.05, 0.005, LossMode::kTaylor};
  auto align = AlignmentSpec::SquaredDistance();
  ComponentsA c =
      ComputeComponentsA(u_a, fx.a, phi, cfg, align, kF, Keys().a.pub, rng);
  const double tol = std::ldexp(1.0, -kF);
  for (size_t k = 0; k < c.h3.size(); ++k) {
    Vector expected = cfg.gamma * align.kappa() *
                      u_a.row(fx.a.overlap_rows[k]).transpose();
    EXPECT_LE(MaxAbs(DecryptReal(Keys().a, c.h3[k], kF), expected), tol);
  }
  for (size_t i = 0; i < c.h1.size(); ++i) {
    const int y = fx.a.labels_c[i];
    Vector h1 = DecryptReal(Keys().a, c.h1[i], kF);
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        EXPECT_NEAR(h1(a * 3 + b), 0.125 * phi(a) * phi(b), tol);
      }
    }
    EXPECT_LE(MaxAbs(DecryptReal(Keys().a, c.h2[i], kF), -0.5 * y * phi), tol);
  }
}

TEST(ComponentsBTest, OuterProductsAndRegularizer) {
  Fixture fx = MakeFixture(4, 3, 3, 2, 2);
  he::RandomSource rng = he::RandomSource::Seeded(3);
  const Matrix u_b = nn::Forward(fx.p.net_b, fx.p.x_b);
  ObjectiveConfig cfg{0.05, 0.005, LossMode::kTaylor};
  ComponentsB c = ComputeComponentsB(u_b, fx.b, fx.p.net_b.layers, cfg,
                                     AlignmentSpec::InnerProduct(), kF,
                                     Keys().b.pub, rng);
  const double tol = std::ldexp(1.0, -kF);
  for (size_t i = 0; i < c.h1.size(); ++i) {
    Vector u = u_b.row(fx.b.labeled_rows[i]).transpose();
    Vector h1 = DecryptReal(Keys().b, c.h1[i], kF);
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) EXPECT_NEAR(h1(a * 3 + b), u(a) * u(b), tol);
    }
    EXPECT_LE(MaxAbs(DecryptReal(Keys().b, c.h2[i], kF), u), tol);
  }
  for (size_t k = 0; k < c.h3.size(); ++k) {
    EXPECT_LE(MaxAbs(DecryptReal(Keys().b, c.h3[k], kF),
                     -u_b.row(fx.b.overlap_rows[k]).transpose()),
              tol);
  }
  EXPECT_NEAR(DecryptReal(Keys().b, {c.h4}, kF)(0),
              0.5 * cfg.lambda * nn::SquaredNorm(fx.p.net_b.layers), tol);
}

TEST(ComponentsBTest, ZeroRowGivesZeroComponents) {
  Fixture fx = MakeFixture(5, 2, 1, 1);
  Matrix u_b = Matrix::Zero(6, 2);
  he::RandomSource rng = he::RandomSource::Seeded(4);
  ComponentsB c = ComputeComponentsB(u_b, fx.b, fx.p.net_b.layers,
                                     ObjectiveConfig{}, AlignmentSpec::InnerProduct(),
                                     kF, Keys().b.pub, rng);
  EXPECT_EQ(DecryptReal(Keys().b, c.h1[0], kF), Vector::Zero(4));
  EXPECT_EQ(DecryptReal(Keys().b, c.h2[0], kF), Vector::Zero(2));
  EXPECT_EQ(DecryptReal(Keys().b, c.h3[0], kF), Vector::Zero(2));
}

TEST(ComponentsTest, SerializationRoundTripAndShapeChecks) {
  Fixture fx = MakeFixture(6, 2, 3, 2);
  he::RandomSource rng = he::RandomSource::Seeded(5);
  const Matrix u_b = nn::Forward(fx.p.net_b, fx.p.x_b);
  ComponentsB c = ComputeComponentsB(u_b, fx.b, fx.p.net_b.layers,
                                     ObjectiveConfig{}, AlignmentSpec::InnerProduct(),
                                     kF, Keys().b.pub, rng);
  transport::Bytes wire = SerializeComponents(c);
  ComponentsB back = ParseComponentsB(wire, Keys().b.pub, 2, 3, 2);
  for (size_t i = 0; i < 3; ++i) {
    for (size_t k = 0; k < 4; ++k) {
      EXPECT_EQ(back.h1[i][k].value(), c.h1[i][k].value());
    }
  }
  EXPECT_EQ(back.h4.value(), c.h4.value());
  EXPECT_THROW(ParseComponentsB(wire, Keys().b.pub, 2, 4, 2), ProtocolError);
  EXPECT_THROW(ParseComponentsB(wire, Keys().a.pub, 2, 3, 2), KeyError);
}

class AssemblyTest : public ::testing::TestWithParam<AlignmentKind> {
 protected:
  AlignmentSpec Align() const {
    return GetParam() == AlignmentKind::kInnerProduct
               ? AlignmentSpec::InnerProduct()
               : AlignmentSpec::SquaredDistance();
  }
};

TEST_P(AssemblyTest, GradientsAndLossMatchPlaintextOracle) {
  for (uint64_t seed : {10, 11, 12}) {
    Fixture fx = MakeFixture(seed, 3, 2, 2, seed == 12 ? 2 : 1);
    ObjectiveConfig cfg{0.3, 0.02, LossMode::kTaylor};
    auto align = Align();
    he::RandomSource rng_a = he::RandomSource::Seeded(seed);
    he::RandomSource rng_b = he::RandomSource::Seeded(seed + 100);
    const Matrix u_a = nn::Forward(fx.p.net_a, fx.p.x_a);
    const Matrix u_b = nn::Forward(fx.p.net_b, fx.p.x_b);
    const Vector phi = objective::ComputePhi(u_a, fx.a.y_phi);
    ComponentsA ca =
        ComputeComponentsA(u_a, fx.a, phi, cfg, align, kF, Keys().a.pub, rng_a);
    ComponentsB cb = ComputeComponentsB(u_b, fx.b, fx.p.net_b.layers, cfg,
                                        align, kF, Keys().b.pub, rng_b);
    const int pa = fx.p.net_a.num_params(), pb = fx.p.net_b.num_params();

    auto oracle = PlaintextGradients(fx.p.x_a, fx.p.x_b, fx.p.inst, fx.p.net_a,
                                     fx.p.net_b, cfg, align);
    EncVector gb = AssembleMaskedGradB(ca, fx.p.net_b, fx.b, cfg, align,
                                       ZeroMask(pb, 3 * kF), kF, Keys().a.pub,
                                       rng_b);
    EXPECT_LE(MaxAbs(DecryptReal(Keys().a, gb, 3 * kF), nn::Flatten(oracle.b)),
              1e-6);
    EncVector ga = AssembleMaskedGradA(cb, fx.p.net_a, fx.a, cfg, align,
                                       ZeroMask(pa, 3 * kF), kF, Keys().b.pub,
                                       rng_a);
    EXPECT_LE(MaxAbs(DecryptReal(Keys().b, ga, 3 * kF), nn::Flatten(oracle.a)),
              1e-6);
    Ciphertext loss = AssembleEncLoss(cb, fx.p.net_a, fx.a, cfg, align, kF,
                                      Keys().b.pub, rng_a);
    EXPECT_NEAR(DecryptReal(Keys().b, {loss}, 2 * kF)(0),
                FullLoss(fx.p.x_a, fx.p.x_b, fx.p.inst, fx.p.net_a, fx.p.net_b,
                         cfg, align),
                1e-6);
  }
}

INSTANTIATE_TEST_SUITE_P(Alignments, AssemblyTest,
                         ::testing::Values(AlignmentKind::kInnerProduct,
                                           AlignmentKind::kSquaredDistance),
                         [](const auto& info) {
                           return info.param == AlignmentKind::kInnerProduct
                                      ? std::string("InnerProduct")
                                      : std::string("SquaredDistance");
                         });

// The quadratic term enters the loss with 1/8 and the gradient with 1/4; a
// finite difference of the decrypted loss must reproduce the gradient.
TEST(AssemblyConsistencyTest, LossFiniteDifferenceMatchesGradient) {
  Fixture fx = MakeFixture(20, 2, 3, 2);
  ObjectiveConfig cfg{0.1, 0.01, LossMode::kTaylor};
  auto align = AlignmentSpec::InnerProduct();
  he::RandomSource rng = he::RandomSource::Seeded(9);
  const Matrix u_b = nn::Forward(fx.p.net_b, fx.p.x_b);
  ComponentsB cb = ComputeComponentsB(u_b, fx.b, fx.p.net_b.layers, cfg, align,
                                      kF, Keys().b.pub, rng);
  const int pa = fx.p.net_a.num_params();
  Vector grad = DecryptReal(
      Keys().b,
      AssembleMaskedGradA(cb, fx.p.net_a, fx.a, cfg, align,
                          ZeroMask(pa, 3 * kF), kF, Keys().b.pub, rng),
      3 * kF);
  const Vector theta = nn::Flatten(fx.p.net_a.layers);
  const double h = 1e-4;
  for (int i = 0; i < pa; ++i) {
    Vector plus = theta, minus = theta;
    plus(i) += h;
    minus(i) -= h;
    nn::Network np{nn::Unflatten(plus, fx.p.net_a)};
    nn::Network nm{nn::Unflatten(minus, fx.p.net_a)};
    double lp = DecryptReal(Keys().b,
                            {AssembleEncLoss(cb, np, fx.a, cfg, align, kF,
                                             Keys().b.pub, rng)},
                            2 * kF)(0);
    double lm = DecryptReal(Keys().b,
                            {AssembleEncLoss(cb, nm, fx.a, cfg, align, kF,
                                             Keys().b.pub, rng)},
                            2 * kF)(0);
    EXPECT_NEAR((lp - lm) / (2 * h), grad(i), 1e-6) << "param " << i;
  }
}

TEST(AssemblyEdgeTest, TrivialInstancesDecryptToZero) {
  Fixture fx = MakeFixture(21, 2, 0, 0);
  ObjectiveConfig cfg{0.0, 0.0, LossMode::kTaylor};
  auto align = AlignmentSpec::InnerProduct();
  he::RandomSource rng = he::RandomSource::Seeded(10);
  const Matrix u_b = nn::Forward(fx.p.net_b, fx.p.x_b);
  ComponentsB cb = ComputeComponentsB(u_b, fx.b, fx.p.net_b.layers, cfg, align,
                                      kF, Keys().b.pub, rng);
  const int pa = fx.p.net_a.num_params();
  EXPECT_EQ(DecryptReal(Keys().b,
                        AssembleMaskedGradA(cb, fx.p.net_a, fx.a, cfg, align,
                                            ZeroMask(pa, 3 * kF), kF,
                                            Keys().b.pub, rng),
                        3 * kF),
            Vector::Zero(pa));
  EXPECT_EQ(DecryptReal(Keys().b,
                        {AssembleEncLoss(cb, fx.p.net_a, fx.a, cfg, align, kF,
                                         Keys().b.pub, rng)},
                        2 * kF)(0),
            0.0);
}

TEST(AssemblyEdgeTest, ZeroTranslatorLossIsBaseTerm) {
  Fixture fx = MakeFixture(22, 2, 3, 0);
  fx.a.y_phi.assign(fx.a.y_phi.size(), 0);  // Phi = 0
  ObjectiveConfig cfg{0.0, 0.0, LossMode::kTaylor};
  he::RandomSource rng = he::RandomSource::Seeded(11);
  const Matrix u_b = nn::Forward(fx.p.net_b, fx.p.x_b);
  ComponentsB cb =
      ComputeComponentsB(u_b, fx.b, fx.p.net_b.layers, cfg,
                         AlignmentSpec::InnerProduct(), kF, Keys().b.pub, rng);
  EXPECT_NEAR(DecryptReal(Keys().b,
                          {AssembleEncLoss(cb, fx.p.net_a, fx.a, cfg,
                                           AlignmentSpec::InnerProduct(), kF,
                                           Keys().b.pub, rng)},
                          2 * kF)(0),
              3 * std::numbers::ln2, 1e-6);
}

TEST(AssemblyEdgeTest, ZeroInstanceGradientBIsZero) {
  Fixture fx = MakeFixture(23, 2, 2, 2);
  for (nn::Layer& l : fx.p.net_b.layers) {
    l.weights.setZero();
    l.bias.setConstant(-800);  // sigmoid underflows: u = 0
  }
  for (nn::Layer& l : fx.p.net_a.layers) {
    l.weights.setZero();
    l.bias.setConstant(-800);
  }
  ObjectiveConfig cfg{0.05, 0.0, LossMode::kTaylor};
  auto align = AlignmentSpec::InnerProduct();
  he::RandomSource rng = he::RandomSource::Seeded(12);
  const Matrix u_a = nn::Forward(fx.p.net_a, fx.p.x_a);
  ComponentsA ca = ComputeComponentsA(
      u_a, fx.a, objective::ComputePhi(u_a, fx.a.y_phi), cfg, align, kF,
      Keys().a.pub, rng);
  const int pb = fx.p.net_b.num_params();
  Vector g = DecryptReal(Keys().a,
                         AssembleMaskedGradB(ca, fx.p.net_b, fx.b, cfg, align,
                                             ZeroMask(pb, 3 * kF), kF,
                                             Keys().a.pub, rng),
                         3 * kF);
  EXPECT_LE(g.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(MaskTest, MaskShiftsPlaintextByExactlyItsValue) {
  Fixture fx = MakeFixture(24, 2, 2, 2);
  ObjectiveConfig cfg{0.05, 0.005, LossMode::kTaylor};
  auto align = AlignmentSpec::InnerProduct();
  he::RandomSource rng = he::RandomSource::Seeded(13);
  const Matrix u_a = nn::Forward(fx.p.net_a, fx.p.x_a);
  ComponentsA ca = ComputeComponentsA(
      u_a, fx.a, objective::ComputePhi(u_a, fx.a.y_phi), cfg, align, kF,
      Keys().a.pub, rng);
  const int pb = fx.p.net_b.num_params();
  Mask zero = ZeroMask(pb, 3 * kF);
  Mask m = DrawMask(pb, 3 * kF, 20, 1, "grad_b", rng);
  auto plain = DecryptAll(Keys().a, AssembleMaskedGradB(ca, fx.p.net_b, fx.b,
                                                        cfg, align, zero, kF,
                                                        Keys().a.pub, rng));
  auto masked = DecryptAll(Keys().a, AssembleMaskedGradB(ca, fx.p.net_b, fx.b,
                                                         cfg, align, m, kF,
                                                         Keys().a.pub, rng));
  const he::PublicKey& pk = *Keys().a.pub;
  for (int p = 0; p < pb; ++p) {
    BigInt delta = (masked[p] - plain[p]) % pk.n;
    if (delta < 0) delta += pk.n;
    EXPECT_EQ(he::FromPlaintext(delta, pk), m.raw[p]);
  }
  EXPECT_LE(MaxAbs(Unmask(masked, m, pk), Unmask(plain, zero, pk)), 0.0);
}

TEST(MaskTest, RangeAndFreshness) {
  he::RandomSource rng = he::RandomSource::Seeded(14);
  BigInt bound = 1;
  bound <<= (20 + 3 * kF);
  Mask a = DrawMask(1000, 3 * kF, 20, 1, "g", rng);
  Mask b = DrawMask(1000, 3 * kF, 20, 2, "g", rng);
  for (size_t i = 0; i < a.raw.size(); ++i) {
    EXPECT_LE(abs(a.raw[i]), bound);
    EXPECT_NE(a.raw[i], b.raw[i]);
  }
}

TEST(WireTest, BlobAndVectorRoundTrip) {
  he::RandomSource rng = he::RandomSource::Seeded(15);
  EncVector v;
  for (int i = 0; i < 5; ++i) {
    v.push_back(he::EncryptReal(Keys().a.pub, i - 2.5, kF, rng));
  }
  EncVector back = ParseEncVector(SerializeEncVector(v), Keys().a.pub);
  ASSERT_EQ(back.size(), v.size());
  EXPECT_EQ(back[3].value(), v[3].value());
  EXPECT_THROW(ParseEncVector(SerializeEncVector(v), Keys().b.pub), KeyError);
  auto plain = DecryptAll(Keys().a, v);
  EXPECT_EQ(ParseBlob(SerializeBlob(plain, *Keys().a.pub), *Keys().a.pub), plain);
  EXPECT_THROW(DecryptAll(Keys().b, v), KeyError);
}

struct SmallRun {
  RandomProblem p;
  TrainingConfig cfg;
};

SmallRun MakeRun(uint64_t seed, int iterations) {
  std::mt19937_64 rng(seed);
  SmallRun r{MakeRandomProblem(rng, 3, 1, 6, 6, 4, 4), {}};
  r.cfg.max_iterations = iterations;
  return r;
}

TEST(TrainSecureTest, SingleIteration) {
  SmallRun run = MakeRun(30, 1);
  SecureTrainResult r = TrainSecure(run.p.x_a, run.p.x_b, run.p.inst,
                                    run.p.net_a, run.p.net_b, run.cfg,
                                    SmallOptions(), TransportKind::kLoopback,
                                    &Keys());
  EXPECT_EQ(r.loss_history.size(), 1u);
  EXPECT_EQ(r.trajectory_b.size(), 1u);
}

TEST(TrainSecureTest, InfiniteToleranceStopsAfterFirstIteration) {
  SmallRun run = MakeRun(31, 20);
  run.cfg.tolerance = std::numeric_limits<double>::infinity();
  SecureTrainResult r = TrainSecure(run.p.x_a, run.p.x_b, run.p.inst,
                                    run.p.net_a, run.p.net_b, run.cfg,
                                    SmallOptions(), TransportKind::kLoopback,
                                    &Keys());
  EXPECT_EQ(r.loss_history.size(), 1u);
}

TEST(TrainSecureTest, MatchesPlaintextTrajectoryAndPassesAudit) {
  SmallRun run = MakeRun(32, 4);
  ProtocolOptions opt = SmallOptions();
  opt.alignment = AlignmentKind::kSquaredDistance;
  SecureTrainResult r = TrainSecure(run.p.x_a, run.p.x_b, run.p.inst,
                                    run.p.net_a, run.p.net_b, run.cfg, opt,
                                    TransportKind::kLoopback, &Keys());
  objective::TrainResult plain =
      objective::TrainPlain(run.p.x_a, run.p.x_b, run.p.inst, run.p.net_a,
                            run.p.net_b, run.cfg, LossMode::kTaylor,
                            opt.Alignment());
  ASSERT_EQ(r.loss_history.size(), plain.loss_history.size());
  for (size_t i = 0; i < r.loss_history.size(); ++i) {
    EXPECT_NEAR(r.loss_history[i], plain.loss_history[i], 1e-5);
    EXPECT_LE(MaxAbs(r.trajectory_a[i], plain.trajectory_a[i]), 1e-5);
    EXPECT_LE(MaxAbs(r.trajectory_b[i], plain.trajectory_b[i]), 1e-5);
  }
  AuditReport audit = AuditTraining(r);
  EXPECT_TRUE(audit.ok) << (audit.violations.empty() ? "" : audit.violations[0]);
  EXPECT_GT(audit.frames_checked, 0u);
  EXPECT_EQ(audit.masks_checked, 3u * 4u);  // grad_a, loss, grad_b per iteration
}

TEST(TrainSecureTest, AuditCatchesZeroAndRepeatedMasks) {
  SmallRun run = MakeRun(33, 2);
  SecureTrainResult r = TrainSecure(run.p.x_a, run.p.x_b, run.p.inst,
                                    run.p.net_a, run.p.net_b, run.cfg,
                                    SmallOptions(), TransportKind::kLoopback,
                                    &Keys());
  ASSERT_TRUE(AuditTraining(r).ok);
  SecureTrainResult repeated = r;
  repeated.record_b.masks[1].raw = repeated.record_b.masks[0].raw;
  EXPECT_FALSE(AuditTraining(repeated).ok);
  SecureTrainResult zeroed = r;
  for (auto& v : zeroed.record_a.masks[0].raw) v = 0;
  EXPECT_FALSE(AuditTraining(zeroed).ok);
}

TEST(TrainSecureTest, LoopbackAndTcpTranscriptsAreIdentical) {
  SmallRun run = MakeRun(34, 2);
  auto go = [&](TransportKind kind) {
    return TrainSecure(run.p.x_a, run.p.x_b, run.p.inst, run.p.net_a,
                       run.p.net_b, run.cfg, SmallOptions(), kind, &Keys());
  };
  SecureTrainResult lo = go(TransportKind::kLoopback);
  SecureTrainResult tcp = go(TransportKind::kTcp);
  EXPECT_EQ(lo.transcript_a.Hash(), tcp.transcript_a.Hash());
  EXPECT_EQ(lo.transcript_b.Hash(), tcp.transcript_b.Hash());
  EXPECT_EQ(lo.loss_history, tcp.loss_history);
}

TEST(TrainSecureTest, ComponentBytesMatchCostFormulaExactly) {
  SmallRun run = MakeRun(35, 1);
  SecureTrainResult r = TrainSecure(run.p.x_a, run.p.x_b, run.p.inst,
                                    run.p.net_a, run.p.net_b, run.cfg,
                                    SmallOptions(), TransportKind::kLoopback,
                                    &Keys());
  const uint64_t ct = he::SerializedCiphertextSize(*Keys().b.pub);
  auto cost = transport::MeasureCost(r.transcript_b, transport::Direction::kSent,
                                     transport::MsgType::kComponentsB);
  EXPECT_EQ(cost.per_sample_bytes, transport::CostFormula(4, 3, ct));
  EXPECT_EQ(cost.other_bytes, (4 * 3 + 1) * ct);
}

// Forwards to a real channel but fails on the n-th send.
class FailingChannel : public Channel {
 public:
  FailingChannel(Channel& inner, int fail_at) : inner_(inner), left_(fail_at) {}
  void Send(const transport::Frame& f) override {
    if (--left_ == 0) {
      inner_.Close();
      throw TransportError("injected failure");
    }
    inner_.Send(f);
  }
  std::optional<transport::Frame> Recv() override { return inner_.Recv(); }
  void Close() override { inner_.Close(); }

 private:
  Channel& inner_;
  int left_;
};

TEST(TrainSecureTest, TransportFailureAbortsWithStateIntact) {
  SmallRun run = MakeRun(36, 5);
  auto [data_a, data_b] = SplitInstance(run.p.x_a, run.p.x_b, run.p.inst);
  PartyA a(data_a, run.p.net_a, run.cfg, SmallOptions(), Keys().a);
  PartyB b(data_b, run.p.net_b, run.cfg, SmallOptions(), Keys().b);
  auto [ch_a, ch_b] = transport::LoopbackPair();
  // A sends PUBKEY, then 5 frames per iteration; fail inside iteration 3.
  FailingChannel failing(*ch_a, 1 + 5 * 2 + 2);
  std::thread tb([&] { EXPECT_THROW(b.Train(*ch_b), ProtocolError); });
  EXPECT_THROW(a.Train(failing), TransportError);
  tb.join();
  EXPECT_EQ(a.loss_history().size(), 2u);
  EXPECT_EQ(b.iterations(), 2);
  EXPECT_EQ(nn::Flatten(a.net().layers), a.trajectory().back());
}

TEST(PredictTest, ZeroTranslatorLabelsEverythingPositive) {
  std::mt19937_64 rng(40);
  Matrix u = ::ftl::testing::RandomMatrix(5, 3, rng, 1.0);
  SecurePredictResult r =
      SecureLinearPredict(Vector::Zero(3), u, Keys().b, SmallOptions(),
                          TransportKind::kLoopback, 1, 2);
  EXPECT_EQ(r.labels, std::vector<int>(5, 1));
  EXPECT_EQ(r.phi, std::vector<double>(5, 0.0));
}

TEST(PredictTest, MatchesPlaintextAndPassesAudit) {
  SmallRun run = MakeRun(41, 1);
  SecurePredictResult r =
      PredictSecure(run.p.net_a, run.p.x_a, run.p.inst.y_a, run.p.net_b,
                    run.p.x_b, Keys(), SmallOptions(), TransportKind::kLoopback);
  const Vector phi = objective::ComputePhi(nn::Forward(run.p.net_a, run.p.x_a),
                                           run.p.inst.y_a);
  const Matrix u_b = nn::Forward(run.p.net_b, run.p.x_b);
  ASSERT_EQ(r.labels.size(), static_cast<size_t>(u_b.rows()));
  for (Eigen::Index j = 0; j < u_b.rows(); ++j) {
    double expected = phi.dot(u_b.row(j).transpose());
    EXPECT_NEAR(r.phi[j], expected, 1e-9);
    EXPECT_EQ(r.labels[j], objective::LabelOf(r.phi[j]));
  }
  AuditReport audit = AuditPrediction(r);
  EXPECT_TRUE(audit.ok) << (audit.violations.empty() ? "" : audit.violations[0]);
  // The feature side only ever sees masked values and labels.
  for (const auto& e : r.feature_transcript.Entries()) {
    if (e.direction == transport::Direction::kReceived) {
      EXPECT_TRUE(e.frame.type == transport::MsgType::kPredictMasked ||
                  e.frame.type == transport::MsgType::kPredictLabels);
    }
  }
}

TEST(PredictTest, CrossPredictMirrorsPredict) {
  std::mt19937_64 rng(42);
  Vector phi = ::ftl::testing::RandomMatrix(3, 1, rng, 1.0);
  Matrix u = ::ftl::testing::RandomMatrix(7, 3, rng, 1.0);
  SecurePredictResult fwd =
      SecureLinearPredict(phi, u, Keys().b, SmallOptions(),
                          TransportKind::kLoopback, 1, 2);
  SecurePredictResult mirrored =
      CrossPredictSecure(phi, u, Keys(), SmallOptions(), TransportKind::kTcp);
  EXPECT_EQ(fwd.phi, mirrored.phi);
  EXPECT_EQ(fwd.labels, mirrored.labels);
}

TEST(PredictTest, DimensionMismatchRejected) {
  EXPECT_THROW(SecureLinearPredict(Vector::Zero(2), Matrix::Zero(3, 3), Keys().b,
                                   SmallOptions(), TransportKind::kLoopback, 1,
                                   2),
               ShapeError);
}

}  // namespace
}  // namespace ftl::protocol
