// Network math checked against scalar-loop forwards, central finite
// differences (including the two-encoder + trunk wiring used by the agent),
// closed-form Adam steps, and constructed dormant-unit cases.
#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "stempick/nn.hpp"

namespace stempick {
namespace {

VecX scalar_loop_forward(const Network& net, VecX x) {
  for (const auto& l : net.layers) {
    VecX z(l.w.rows());
    for (Eigen::Index i = 0; i < l.w.rows(); ++i) {
      double acc = l.b[i];
      for (Eigen::Index j = 0; j < l.w.cols(); ++j) acc += l.w(i, j) * x[j];
      z[i] = apply_act(l.act, acc);
    }
    x = std::move(z);
  }
  return x;
}

Network random_net(Rng& rng, int in, std::vector<int> hidden, int out,
                   Activation hidden_act, Activation out_act) {
  return make_mlp(in, hidden, out, hidden_act, out_act, rng);
}

TEST(Forward, MatchesScalarLoop) {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const int in = 1 + trial % 6;
    const Network net =
        random_net(rng, in, {7, 5}, 3,
                   trial % 2 == 0 ? Activation::relu : Activation::tanh,
                   Activation::identity);
    MatX x(in, 4);
    for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = rng.normal();
    const MatX batch_out = forward(net, x);
    ASSERT_EQ(batch_out.rows(), 3);
    ASSERT_EQ(batch_out.cols(), 4);
    for (int c = 0; c < 4; ++c) {
      const VecX want = scalar_loop_forward(net, x.col(c));
      ASSERT_LT((batch_out.col(c) - want).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(Forward, RejectsWrongInputDimension) {
  Rng rng(2);
  const Network net = random_net(rng, 4, {5}, 2, Activation::relu,
                                 Activation::identity);
  EXPECT_THROW(forward(net, MatX::Zero(3, 1)), ContractViolation);
  EXPECT_THROW(make_mlp(0, {4}, 2, Activation::relu, Activation::identity, rng), ContractViolation);
  EXPECT_EQ(net.input_dim(), 4);
  EXPECT_EQ(net.output_dim(), 2);
  EXPECT_EQ(net.parameter_count(), size_t(4 * 5 + 5 + 5 * 2 + 2));
}

TEST(MakeLayer, InitWithinFanInBound) {
  Rng rng(3);
  const Layer l = make_layer(16, 8, Activation::relu, rng);
  const double bound = std::sqrt(1.0 / 16.0);
  EXPECT_LE(l.w.cwiseAbs().maxCoeff(), bound);
  EXPECT_LE(l.b.cwiseAbs().maxCoeff(), bound);
  EXPECT_GT(l.w.cwiseAbs().maxCoeff(), 0.0);
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checks.

double weighted_output_sum(const Network& net, const MatX& x, const MatX& w) {
  return forward(net, x).cwiseProduct(w).sum();
}

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({1e-6, std::abs(a), std::abs(b)});
}

// Walks every parameter of the network with central differences.
void check_gradients(Network& net, const MatX& x, const MatX& w, double h,
                     double tol) {
  ForwardTrace trace;
  forward(net, x, &trace);
  Gradients grads = Gradients::zeros_like(net);
  backward(net, trace, w, &grads);

  for (size_t li = 0; li < net.layers.size(); ++li) {
    Layer& l = net.layers[li];
    for (Eigen::Index k = 0; k < l.w.size(); ++k) {
      const double keep = l.w.data()[k];
      l.w.data()[k] = keep + h;
      const double up = weighted_output_sum(net, x, w);
      l.w.data()[k] = keep - h;
      const double dn = weighted_output_sum(net, x, w);
      l.w.data()[k] = keep;
      const double fd = (up - dn) / (2.0 * h);
      ASSERT_LT(relative_error(grads.dw[li].data()[k], fd), tol)
          << "layer " << li << " w[" << k << "]";
    }
    for (Eigen::Index k = 0; k < l.b.size(); ++k) {
      const double keep = l.b[k];
      l.b[k] = keep + h;
      const double up = weighted_output_sum(net, x, w);
      l.b[k] = keep - h;
      const double dn = weighted_output_sum(net, x, w);
      l.b[k] = keep;
      const double fd = (up - dn) / (2.0 * h);
      ASSERT_LT(relative_error(grads.db[li][k], fd), tol)
          << "layer " << li << " b[" << k << "]";
    }
  }
}

TEST(Backward, MatchesFiniteDifferencesAcrossTwentyNetworks) {
  Rng rng(4);
  const Activation hidden_acts[] = {Activation::relu, Activation::tanh};
  const Activation out_acts[] = {Activation::identity, Activation::tanh};
  for (int trial = 0; trial < 20; ++trial) {
    const int in = 2 + trial % 5;
    const int out = 1 + trial % 3;
    std::vector<int> hidden =
        (trial % 3 == 0) ? std::vector<int>{9} : std::vector<int>{8, 6};
    Network net = random_net(rng, in, hidden, out, hidden_acts[trial % 2],
                             out_acts[(trial / 2) % 2]);
    MatX x(in, 3), w(out, 3);
    for (Eigen::Index k = 0; k < x.size(); ++k)
      x.data()[k] = rng.normal() + 0.1;  // keep relu kinks at bay
    for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = rng.normal();
    check_gradients(net, x, w, 1e-6, 1e-4);
  }
}

TEST(Backward, InputGradientMatchesFiniteDifferences) {
  Rng rng(5);
  Network net = random_net(rng, 5, {8, 6}, 2, Activation::tanh,
                           Activation::identity);
  MatX x(5, 2), w(2, 2);
  for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = rng.normal();
  for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = rng.normal();

  ForwardTrace trace;
  forward(net, x, &trace);
  const MatX dx = backward(net, trace, w, nullptr);
  const double h = 1e-6;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    MatX xp = x, xm = x;
    xp.data()[k] += h;
    xm.data()[k] -= h;
    const double fd = (weighted_output_sum(net, xp, w) -
                       weighted_output_sum(net, xm, w)) /
                      (2.0 * h);
    ASSERT_LT(relative_error(dx.data()[k], fd), 1e-4);
  }
}

// Two view encoders feeding a shared trunk through concatenation: gradients
// must flow through the row slices exactly as finite differences say.
TEST(Backward, EncoderTrunkCompositeMatchesFiniteDifferences) {
  Rng rng(6);
  const int view = 6, latent = 3, state = 4, act = 2;
  for (int trial = 0; trial < 4; ++trial) {
    Network enc0 = random_net(rng, view, {7}, latent, Activation::relu,
                              Activation::tanh);
    Network enc1 = random_net(rng, view, {7}, latent, Activation::relu,
                              Activation::tanh);
    Network trunk = random_net(rng, 2 * latent + state + act, {8}, 1,
                               Activation::relu, Activation::identity);
    const int batch = 3;
    MatX v0(view, batch), v1(view, batch), s(state, batch), a(act, batch);
    for (Eigen::Index k = 0; k < v0.size(); ++k) v0.data()[k] = rng.normal();
    for (Eigen::Index k = 0; k < v1.size(); ++k) v1.data()[k] = rng.normal();
    for (Eigen::Index k = 0; k < s.size(); ++k) s.data()[k] = rng.normal();
    for (Eigen::Index k = 0; k < a.size(); ++k) a.data()[k] = rng.normal();

    auto loss = [&]() {
      MatX z(2 * latent + state + act, batch);
      z.topRows(latent) = forward(enc0, v0);
      z.middleRows(latent, latent) = forward(enc1, v1);
      z.middleRows(2 * latent, state) = s;
      z.bottomRows(act) = a;
      return forward(trunk, z).sum();
    };

    // analytic gradients through the concatenation
    ForwardTrace t0, t1, tt;
    MatX z(2 * latent + state + act, batch);
    z.topRows(latent) = forward(enc0, v0, &t0);
    z.middleRows(latent, latent) = forward(enc1, v1, &t1);
    z.middleRows(2 * latent, state) = s;
    z.bottomRows(act) = a;
    forward(trunk, z, &tt);
    Gradients g0 = Gradients::zeros_like(enc0);
    Gradients g1 = Gradients::zeros_like(enc1);
    Gradients gt = Gradients::zeros_like(trunk);
    const MatX dz = backward(trunk, tt, MatX::Ones(1, batch), &gt);
    backward(enc0, t0, dz.topRows(latent), &g0);
    backward(enc1, t1, dz.middleRows(latent, latent), &g1);

    const double h = 1e-6;
    auto check_net = [&](Network& net, const Gradients& g) {
      for (size_t li = 0; li < net.layers.size(); ++li) {
        for (Eigen::Index k = 0; k < net.layers[li].w.size(); ++k) {
          const double keep = net.layers[li].w.data()[k];
          net.layers[li].w.data()[k] = keep + h;
          const double up = loss();
          net.layers[li].w.data()[k] = keep - h;
          const double dn = loss();
          net.layers[li].w.data()[k] = keep;
          ASSERT_LT(
              relative_error(g.dw[li].data()[k], (up - dn) / (2.0 * h)),
              1e-4);
        }
      }
    };
    check_net(enc0, g0);
    check_net(enc1, g1);
    check_net(trunk, gt);
  }
}

// ---------------------------------------------------------------------------

TEST(AdamStep, FirstStepClosedForm) {
  Rng rng(7);
  Network net = random_net(rng, 3, {4}, 2, Activation::relu,
                           Activation::identity);
  const Network before = net;
  Gradients g = Gradients::zeros_like(net);
  for (size_t i = 0; i < g.dw.size(); ++i) {
    for (Eigen::Index k = 0; k < g.dw[i].size(); ++k)
      g.dw[i].data()[k] = rng.normal();
    for (Eigen::Index k = 0; k < g.db[i].size(); ++k) g.db[i][k] = rng.normal();
  }
  AdamState s = AdamState::zeros_like(net);
  const double lr = 1e-3, eps = 1e-8;
  adam_step(net, g, s, lr);
  // at t = 1 the bias corrections cancel: delta = lr * g / (|g| + eps)
  for (size_t i = 0; i < net.layers.size(); ++i) {
    for (Eigen::Index k = 0; k < net.layers[i].w.size(); ++k) {
      const double gk = g.dw[i].data()[k];
      const double want =
          before.layers[i].w.data()[k] - lr * gk / (std::abs(gk) + eps);
      ASSERT_NEAR(net.layers[i].w.data()[k], want, 1e-12);
    }
    for (Eigen::Index k = 0; k < net.layers[i].b.size(); ++k) {
      const double gk = g.db[i][k];
      const double want = before.layers[i].b[k] - lr * gk / (std::abs(gk) + eps);
      ASSERT_NEAR(net.layers[i].b[k], want, 1e-12);
    }
  }
  EXPECT_EQ(s.t, 1);
}

TEST(AdamStep, ConvergesOnQuadraticBowl) {
  // minimize ||W x - y||^2 for a 1-layer identity net: Adam should walk the
  // residual to ~0
  Rng rng(8);
  Network net = make_mlp(2, {}, 2, Activation::relu, Activation::identity, rng);
  AdamState s = AdamState::zeros_like(net);
  const MatX x = (MatX(2, 2) << 1.0, 0.3, -0.2, 1.0).finished();
  const MatX y = (MatX(2, 2) << 0.7, -0.4, 0.1, 0.9).finished();
  double loss = 0.0;
  for (int it = 0; it < 4000; ++it) {
    ForwardTrace tr;
    const MatX out = forward(net, x, &tr);
    const MatX resid = out - y;
    loss = resid.squaredNorm();
    Gradients g = Gradients::zeros_like(net);
    backward(net, tr, 2.0 * resid, &g);
    adam_step(net, g, s, 3e-3);
  }
  EXPECT_LT(loss, 1e-6);
}

TEST(AdamState, ResetClearsMomentsAndStepCount) {
  Rng rng(9);
  Network net = random_net(rng, 3, {4}, 1, Activation::relu,
                           Activation::identity);
  AdamState s = AdamState::zeros_like(net);
  Gradients g = Gradients::zeros_like(net);
  g.dw[0](0, 0) = 1.0;
  adam_step(net, g, s, 1e-3);
  ASSERT_EQ(s.t, 1);
  ASSERT_GT(s.mw[0].cwiseAbs().maxCoeff(), 0.0);
  s.reset();
  EXPECT_EQ(s.t, 0);
  for (size_t i = 0; i < s.mw.size(); ++i) {
    EXPECT_EQ(s.mw[i].cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(s.vw[i].cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(SoftUpdate, ConvexBlendOfParameters) {
  Rng rng(10);
  Network target = random_net(rng, 3, {5}, 2, Activation::relu,
                              Activation::tanh);
  const Network target_before = target;
  const Network online = random_net(rng, 3, {5}, 2, Activation::relu,
                                    Activation::tanh);
  const double tau = 0.01;
  soft_update(target, online, tau);
  for (size_t i = 0; i < target.layers.size(); ++i) {
    const MatX want = tau * online.layers[i].w +
                      (1.0 - tau) * target_before.layers[i].w;
    ASSERT_LT((target.layers[i].w - want).cwiseAbs().maxCoeff(), 1e-15);
  }
  Network clone = target_before;
  soft_update(clone, online, 1.0);
  for (size_t i = 0; i < clone.layers.size(); ++i)
    ASSERT_EQ(clone.layers[i].w, online.layers[i].w);
}

TEST(ShrinkPerturb, EndpointsAndMidpoint) {
  Rng rng(11);
  const Network net = random_net(rng, 4, {6}, 3, Activation::relu,
                                 Activation::tanh);
  {
    Network a = net;
    Rng r1(500);
    shrink_perturb(a, 1.0, r1);  // keep everything
    for (size_t i = 0; i < a.layers.size(); ++i)
      ASSERT_EQ(a.layers[i].w, net.layers[i].w);
  }
  {
    Network a = net;
    Rng r1(500), r2(500);
    shrink_perturb(a, 0.0, r1);  // full reinit
    const Network fresh = fresh_like(net, r2);
    for (size_t i = 0; i < a.layers.size(); ++i) {
      ASSERT_EQ(a.layers[i].w, fresh.layers[i].w);
      ASSERT_EQ(a.layers[i].b, fresh.layers[i].b);
    }
  }
  {
    Network a = net;
    Rng r1(500), r2(500);
    shrink_perturb(a, 0.5, r1);
    const Network fresh = fresh_like(net, r2);
    for (size_t i = 0; i < a.layers.size(); ++i) {
      const MatX want = 0.5 * net.layers[i].w + 0.5 * fresh.layers[i].w;
      ASSERT_LT((a.layers[i].w - want).cwiseAbs().maxCoeff(), 1e-15);
    }
  }
  {
    Network a = net;
    Rng r(500);
    EXPECT_THROW(shrink_perturb(a, 1.5, r), ContractViolation);
    EXPECT_THROW(shrink_perturb(a, -0.1, r), ContractViolation);
  }
}

TEST(ShrinkPerturb, SmallerAlphaMovesFurtherFromOriginal) {
  Rng rng(12);
  const Network net = random_net(rng, 4, {6}, 3, Activation::relu,
                                 Activation::tanh);
  auto distance_at = [&](double alpha) {
    Network a = net;
    Rng r(777);
    shrink_perturb(a, alpha, r);
    double d = 0.0;
    for (size_t i = 0; i < a.layers.size(); ++i)
      d += (a.layers[i].w - net.layers[i].w).squaredNorm();
    return d;
  };
  EXPECT_GT(distance_at(0.4), distance_at(0.7));
  EXPECT_GT(distance_at(0.7), distance_at(0.9));
}

// ---------------------------------------------------------------------------

TEST(DormantStats, DeadNetworkFullyDormant) {
  Rng rng(13);
  Network net = random_net(rng, 4, {8, 8}, 2, Activation::relu,
                           Activation::identity);
  for (auto& l : net.layers) {
    l.w.setZero();
    l.b.setZero();
  }
  MatX batch(4, 16);
  for (Eigen::Index k = 0; k < batch.size(); ++k) batch.data()[k] = rng.normal();
  const DormantStats stats = dormant_stats(net, batch, 0.025);
  EXPECT_EQ(stats.total, 16);  // output layer excluded
  EXPECT_EQ(stats.dormant, 16);
  EXPECT_EQ(stats.ratio(), 1.0);
}

TEST(DormantStats, UniformActivationsNotDormant) {
  // every hidden unit computes the same positive value: scores all equal the
  // layer mean, nobody is dormant at a small threshold
  Network net;
  Layer hidden;
  hidden.w = MatX::Ones(6, 2);
  hidden.b = VecX::Ones(6);
  hidden.act = Activation::relu;
  Layer out;
  out.w = MatX::Ones(1, 6);
  out.b = VecX::Zero(1);
  out.act = Activation::identity;
  net.layers = {hidden, out};
  const MatX batch = MatX::Ones(2, 5);
  const DormantStats stats = dormant_stats(net, batch, 0.025);
  EXPECT_EQ(stats.total, 6);
  EXPECT_EQ(stats.dormant, 0);
  EXPECT_EQ(stats.ratio(), 0.0);
}

TEST(DormantStats, OneSilentUnitOfTenGivesTenPercent) {
  Network net;
  Layer hidden;
  hidden.w = MatX::Zero(10, 1);
  for (int i = 1; i < 10; ++i) hidden.w(i, 0) = 1.0;  // unit 0 stays silent
  hidden.b = VecX::Zero(10);
  hidden.act = Activation::identity;
  Layer out;
  out.w = MatX::Ones(1, 10);
  out.b = VecX::Zero(1);
  out.act = Activation::identity;
  net.layers = {hidden, out};
  const MatX batch = MatX::Ones(1, 3);
  const DormantStats stats = dormant_stats(net, batch, 0.025);
  EXPECT_EQ(stats.total, 10);
  EXPECT_EQ(stats.dormant, 1);
  EXPECT_NEAR(stats.ratio(), 0.1, 1e-15);
  ASSERT_EQ(stats.per_layer.size(), 1u);
  EXPECT_EQ(stats.per_layer[0], 1);
}

TEST(DormantStats, MonotoneInThreshold) {
  Rng rng(14);
  const Network net = random_net(rng, 6, {32, 32}, 3, Activation::relu,
                                 Activation::identity);
  MatX batch(6, 64);
  for (Eigen::Index k = 0; k < batch.size(); ++k) batch.data()[k] = rng.normal();
  double prev = -1.0;
  for (double th : {0.0, 0.01, 0.025, 0.1, 0.5, 1.0}) {
    const double r = dormant_stats(net, batch, th).ratio();
    ASSERT_GE(r, prev);
    prev = r;
  }
  EXPECT_THROW(dormant_stats(net, MatX::Zero(6, 0), 0.025),
               ContractViolation);
}

}  // namespace
}  // namespace stempick
