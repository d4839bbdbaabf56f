#include <gtest/gtest.h>

#include <random>

#include "rndecomp/invariants.hpp"

namespace {

using namespace rndecomp;

const std::vector<Mechanism> kAll{Mechanism::pinv,         Mechanism::residual,
                                  Mechanism::nullspace,    Mechanism::npgd,
                                  Mechanism::ddn_independent, Mechanism::ddn_cascade,
                                  Mechanism::ddn_range};

LinearOperator small_block() {
  return build_operator({.kind = OperatorKind::block_downsample, .domain = {8, 8}, .factor = 2});
}

LinearOperator identity_op(std::size_t n) {
  std::vector<std::size_t> all(n * n);
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return build_operator({.kind = OperatorKind::inpainting, .domain = {n, n}, .mask = all});
}

void zero_networks(Estimator& est) {
  if (est.f) est.f->set_params(Tensor(est.f->params().shape()));
  if (est.g) est.g->set_params(Tensor(est.g->params().shape()));
}

Tensor net_apply(const Network& net, const Tensor& x) {
  const Shape& s = x.shape();
  return net.forward(x.reshaped({1, 1, s[0], s[1]})).reshaped(s);
}

TEST(Mechanism, NamesRoundTrip) {
  for (Mechanism m : kAll) EXPECT_EQ(parse_mechanism(mechanism_name(m)), m);
  EXPECT_THROW(parse_mechanism("unet"), Error);
}

TEST(Reconstruct, MechanismFormulas) {
  std::mt19937_64 rng(1);
  const LinearOperator op = small_block();
  const Tensor y = detail::random_tensor({op.codomain_size()}, rng);
  const Tensor z = op.pinv_apply(y);
  for (Mechanism m : kAll) {
    const Estimator est = random_estimator(m, op, rng, 0.8);
    Tensor expect;
    switch (m) {
      case Mechanism::pinv: expect = z; break;
      case Mechanism::residual: expect = z + net_apply(*est.g, net_apply(*est.f, z)); break;
      case Mechanism::nullspace: expect = z + op.project_null(net_apply(*est.g, net_apply(*est.f, z))); break;
      case Mechanism::npgd: {
        Tensor zk = z;
        for (int k = 0; k < est.npgd_steps; ++k) {
          const Tensor step = zk - est.npgd_step * op.adjoint_apply(op.apply(zk) - y);
          zk = net_apply(*est.g, net_apply(*est.f, step));
        }
        expect = zk;
        break;
      }
      case Mechanism::ddn_independent:
        expect = z + op.project_range(net_apply(*est.f, z)) + op.project_null(net_apply(*est.g, z));
        break;
      case Mechanism::ddn_cascade: {
        const Tensor u = z + op.project_range(net_apply(*est.f, z));
        expect = u + op.project_null(net_apply(*est.g, u));
        break;
      }
      case Mechanism::ddn_range: expect = z + op.project_range(net_apply(*est.f, z)); break;
    }
    EXPECT_LT(max_abs_diff(reconstruct(est, y).values(), expect.values()), 1e-12) << mechanism_name(m);
  }
}

TEST(Reconstruct, BatchMatchesSingleSamples) {
  std::mt19937_64 rng(2);
  const LinearOperator op = small_block();
  const Estimator est = random_estimator(Mechanism::ddn_cascade, op, rng);
  const Tensor a = detail::random_tensor({16}, rng), b = detail::random_tensor({16}, rng);
  const auto both = reconstruct_batch(est, {&a, &b});
  EXPECT_LT(max_abs_diff(both[0].values(), reconstruct(est, a).values()), 1e-13);
  EXPECT_LT(max_abs_diff(both[1].values(), reconstruct(est, b).values()), 1e-13);
}

TEST(Reconstruct, ZeroNetworksAgree) {
  std::mt19937_64 rng(3);
  const LinearOperator op = small_block();
  const Tensor y = detail::random_tensor({op.codomain_size()}, rng);
  const Tensor z = op.pinv_apply(y);
  for (Mechanism m : kAll) {
    if (m == Mechanism::npgd) continue;
    Estimator est = make_estimator(m, op, 4);
    zero_networks(est);
    EXPECT_EQ(reconstruct(est, y), z) << mechanism_name(m);
  }
  EXPECT_TRUE(check_zero_networks(op).passed);
}

TEST(Reconstruct, ErrorsOnMissingNetworkOrBadShape) {
  const LinearOperator op = small_block();
  Estimator est = make_estimator(Mechanism::ddn_cascade, op, 0);
  EXPECT_THROW(reconstruct(est, Tensor(Shape{15})), Error);
  est.g.reset();
  EXPECT_THROW(reconstruct(est, Tensor(Shape{16})), Error);
  Estimator npgd = make_estimator(Mechanism::npgd, op, 0);
  npgd.npgd_steps = 0;
  EXPECT_THROW(reconstruct(npgd, Tensor(Shape{16})), Error);
}

TEST(Reconstruct, NpgdStepIsInverseNormalNorm) {
  // ||H^T H|| = 1/4 for 2x2 block averaging.
  EXPECT_NEAR(make_estimator(Mechanism::npgd, small_block(), 0).npgd_step, 4.0, 1e-8);
}

TEST(Reconstruct, IdentityOperatorDegenerates) {
  EXPECT_TRUE(check_degeneration(8, 8, 2).passed);
  std::mt19937_64 rng(5);
  const LinearOperator op = identity_op(8);
  const Estimator est = random_estimator(Mechanism::ddn_independent, op, rng);
  const Tensor y = detail::random_tensor({64}, rng);
  const Tensor fy = net_apply(*est.f, y.reshaped({8, 8}));
  EXPECT_LT(max_abs_diff(gated_reconstruct(est, y).values(), (y + fy.reshaped({64})).values()), 1e-12);
}

class PerOperator : public ::testing::TestWithParam<std::size_t> {};

TEST_P(PerOperator, NullspaceMechanismIsDataConsistent) {
  EXPECT_TRUE(check_nullspace_consistency(reference_operators(8, 8, 2)[GetParam()], 3).passed);
}

TEST_P(PerOperator, RelaxedConsistencyIdentity) {
  const CheckResult r = check_relaxed_consistency(reference_operators(8, 8, 2)[GetParam()], 4);
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST_P(PerOperator, GatedEqualsIndependent) {
  const CheckResult r = check_gated_equivalence(reference_operators(8, 8, 2)[GetParam()], 5);
  EXPECT_TRUE(r.passed) << r.detail;
}

INSTANTIATE_TEST_SUITE_P(AllKinds, PerOperator, ::testing::Values(0, 1, 2, 3));

TEST(GatedReconstruct, ZeroNetworksGiveZ) {
  const LinearOperator op = small_block();
  Estimator est = make_estimator(Mechanism::ddn_independent, op, 1);
  zero_networks(est);
  std::mt19937_64 rng(6);
  const Tensor y = detail::random_tensor({16}, rng);
  EXPECT_LT(max_abs_diff(gated_reconstruct(est, y).values(), op.pinv_apply(y).values()), 1e-15);
  EXPECT_THROW(gated_reconstruct(make_estimator(Mechanism::ddn_cascade, op, 1), y), Error);
}

TEST(DataConsistencyGap, VanishesWithoutRangeCorrection) {
  std::mt19937_64 rng(7);
  const LinearOperator op = small_block();
  const Tensor y = detail::random_tensor({16}, rng);
  EXPECT_LT(data_consistency_gap(make_estimator(Mechanism::pinv, op, 0), y), 1e-8);
  Estimator est = random_estimator(Mechanism::ddn_cascade, op, rng);
  est.f->set_params(Tensor(est.f->params().shape()));
  EXPECT_LT(data_consistency_gap(est, y), 1e-12);
}

TEST(DdnLoss, ZeroNetworksClosedForm) {
  std::mt19937_64 rng(8);
  const LinearOperator op = small_block();
  Estimator est = make_estimator(Mechanism::ddn_cascade, op, 0);
  zero_networks(est);
  const Tensor x = detail::random_tensor({8, 8}, rng);
  const Tensor eps = detail::random_tensor({16}, rng);
  const Sample s{x, op.apply(x) + eps, eps};
  const LossResult loss = ddn_loss(est, {&s}, {.range = 1.0, .weight_decay = 0.0});
  const Tensor z = op.pinv_apply(s.y);
  const double expect = squared_norm((z - x).values()) / 64.0 + squared_norm(eps.values()) / 16.0;
  EXPECT_NEAR(loss.loss, expect, 1e-12);
}

TEST(DdnLoss, WithoutPenaltiesIsEmpiricalMse) {
  std::mt19937_64 rng(9);
  const LinearOperator op = small_block();
  const Estimator est = random_estimator(Mechanism::ddn_independent, op, rng);
  const Tensor x = detail::random_tensor({8, 8}, rng);
  const Tensor eps = detail::random_tensor({16}, rng, 0.1);
  const Sample s{x, op.apply(x) + eps, eps};
  const LossResult loss = ddn_loss(est, {&s}, {.range = 0.0, .weight_decay = 0.0});
  EXPECT_NEAR(loss.loss, squared_norm((reconstruct(est, s.y) - x).values()) / 64.0, 1e-12);
  EXPECT_DOUBLE_EQ(loss.loss, loss.empirical);
}

TEST(DdnLoss, VanishesForPerfectCorrection) {
  // F(z) = -H^+ eps reaches x exactly; H F(z) = -eps zeroes the range penalty.
  const LinearOperator op =
      build_operator({.kind = OperatorKind::inpainting, .domain = {8, 8}, .mask = {0}});
  Estimator est = make_estimator(Mechanism::ddn_range, op, 0);
  zero_networks(est);
  const Tensor x(Shape{8, 8});
  const Tensor eps = Tensor::vector({0.3});
  const Sample s{x, eps, eps};
  // Last conv: weight 0, bias -0.3 gives F(z) = -0.3 everywhere; only pixel 0 is observed.
  Tensor p = est.f->params();
  p[p.size() - 1] = -0.3;
  est.f->set_params(p);
  const LossResult loss = ddn_loss(est, {&s}, {.range = 1.0, .weight_decay = 0.0});
  EXPECT_NEAR(loss.loss, 0.0, 1e-24);
}

TEST(DdnLoss, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(10);
  const LinearOperator op = small_block();
  Estimator est = random_estimator(Mechanism::ddn_cascade, op, rng, 0.5);
  const Tensor x = detail::random_tensor({8, 8}, rng);
  const Tensor eps = detail::random_tensor({16}, rng, 0.1);
  const Sample s{x, op.apply(x) + eps, eps};
  const LossWeights w{.range = 0.7, .weight_decay = 0.0};
  const LossResult base = ddn_loss(est, {&s}, w);
  for (bool use_f : {true, false}) {
    Network& net = use_f ? *est.f : *est.g;
    const Tensor& grad = use_f ? base.grad_f : base.grad_g;
    const Tensor orig = net.params();
    for (int k = 0; k < 6; ++k) {
      const std::size_t i = rng() % orig.size();
      const double h = 1e-5;
      Tensor p = orig;
      p[i] += h;
      net.set_params(p);
      const double up = ddn_loss(est, {&s}, w).loss;
      p[i] -= 2 * h;
      net.set_params(p);
      const double down = ddn_loss(est, {&s}, w).loss;
      net.set_params(orig);
      const double fd = (up - down) / (2 * h);
      EXPECT_NEAR(grad[i], fd, 1e-6 + 1e-4 * std::abs(fd));
    }
  }
}

TEST(DdnLoss, EmptyBatchRejected) {
  EXPECT_THROW(ddn_loss(make_estimator(Mechanism::ddn_cascade, small_block(), 0), {}, {}), Error);
}

}  // namespace
