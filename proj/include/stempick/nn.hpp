#pragma once

#include <cmath>
#include <vector>

#include "stempick/core.hpp"
#include "stempick/rng.hpp"

namespace stempick {

enum class Activation { relu, tanh, identity };

inline double apply_act(Activation a, double z) {
  switch (a) {
    case Activation::relu: return z > 0.0 ? z : 0.0;
    case Activation::tanh: return std::tanh(z);
    case Activation::identity: return z;
  }
  throw ContractViolation("unknown activation");
}

// derivative expressed through the post-activation value
inline double act_grad(Activation a, double post) {
  switch (a) {
    case Activation::relu: return post > 0.0 ? 1.0 : 0.0;
    case Activation::tanh: return 1.0 - post * post;
    case Activation::identity: return 1.0;
  }
  throw ContractViolation("unknown activation");
}

struct Layer {
  MatX w;  // out x in
  VecX b;
  Activation act = Activation::relu;
};

struct Network {
  std::vector<Layer> layers;

  int input_dim() const {
    if (layers.empty()) throw ContractViolation("empty network");
    return static_cast<int>(layers.front().w.cols());
  }
  int output_dim() const {
    if (layers.empty()) throw ContractViolation("empty network");
    return static_cast<int>(layers.back().w.rows());
  }
  size_t parameter_count() const {
    size_t n = 0;
    for (const auto& l : layers) n += static_cast<size_t>(l.w.size() + l.b.size());
    return n;
  }
};

// fan-in uniform init, U(-sqrt(1/fan_in), sqrt(1/fan_in)) for weights and bias
inline Layer make_layer(int in, int out, Activation act, Rng& rng) {
  Layer l;
  l.w.resize(out, in);
  l.b.resize(out);
  l.act = act;
  const double bound = std::sqrt(1.0 / in);
  for (int j = 0; j < in; ++j)
    for (int i = 0; i < out; ++i) l.w(i, j) = rng.uniform(-bound, bound);
  for (int i = 0; i < out; ++i) l.b[i] = rng.uniform(-bound, bound);
  return l;
}

inline Network make_mlp(int in, const std::vector<int>& hidden, int out,
                        Activation hidden_act, Activation out_act, Rng& rng) {
  if (in <= 0 || out <= 0) throw ContractViolation("network dims must be positive");
  Network net;
  int prev = in;
  for (int h : hidden) {
    if (h <= 0) throw ContractViolation("hidden width must be positive");
    net.layers.push_back(make_layer(prev, h, hidden_act, rng));
    prev = h;
  }
  net.layers.push_back(make_layer(prev, out, out_act, rng));
  return net;
}

inline Network fresh_like(const Network& net, Rng& rng) {
  Network out;
  out.layers.reserve(net.layers.size());
  int prev = net.input_dim();
  for (const auto& l : net.layers) {
    out.layers.push_back(make_layer(prev, static_cast<int>(l.w.rows()), l.act, rng));
    prev = static_cast<int>(l.w.rows());
  }
  return out;
}

// Columns are samples. `post` keeps every activation so the backward pass and
// the dormant-unit statistics can reuse one forward evaluation.
struct ForwardTrace {
  MatX input;
  std::vector<MatX> post;
};

inline MatX forward(const Network& net, const MatX& x, ForwardTrace* trace = nullptr) {
  if (x.rows() != net.input_dim())
    throw ContractViolation("input dimension mismatch");
  if (trace) {
    trace->input = x;
    trace->post.clear();
    trace->post.reserve(net.layers.size());
  }
  MatX a = x;
  for (const auto& l : net.layers) {
    MatX z = (l.w * a).colwise() + l.b;
    for (Eigen::Index k = 0; k < z.size(); ++k)
      z.data()[k] = apply_act(l.act, z.data()[k]);
    a = std::move(z);
    if (trace) trace->post.push_back(a);
  }
  return a;
}

struct Gradients {
  std::vector<MatX> dw;
  std::vector<VecX> db;

  static Gradients zeros_like(const Network& net) {
    Gradients g;
    g.dw.reserve(net.layers.size());
    g.db.reserve(net.layers.size());
    for (const auto& l : net.layers) {
      g.dw.push_back(MatX::Zero(l.w.rows(), l.w.cols()));
      g.db.push_back(VecX::Zero(l.b.size()));
    }
    return g;
  }
  void add(const Gradients& other) {
    for (size_t i = 0; i < dw.size(); ++i) {
      dw[i] += other.dw[i];
      db[i] += other.db[i];
    }
  }
  void scale(double s) {
    for (size_t i = 0; i < dw.size(); ++i) {
      dw[i] *= s;
      db[i] *= s;
    }
  }
  double max_abs() const {
    double m = 0.0;
    for (size_t i = 0; i < dw.size(); ++i)
      m = std::max({m, dw[i].cwiseAbs().maxCoeff(), db[i].cwiseAbs().maxCoeff()});
    return m;
  }
};

// dout = dL/d(output), columns matching the traced batch; returns dL/d(input)
// and accumulates parameter gradients if grads is non-null.
inline MatX backward(const Network& net, const ForwardTrace& trace, const MatX& dout,
                     Gradients* grads = nullptr) {
  if (trace.post.size() != net.layers.size())
    throw ContractViolation("trace does not match network");
  MatX delta = dout;
  for (int li = static_cast<int>(net.layers.size()) - 1; li >= 0; --li) {
    const Layer& l = net.layers[static_cast<size_t>(li)];
    const MatX& a = trace.post[static_cast<size_t>(li)];
    for (Eigen::Index k = 0; k < delta.size(); ++k)
      delta.data()[k] *= act_grad(l.act, a.data()[k]);
    if (grads) {
      const MatX& prev = li == 0 ? trace.input : trace.post[static_cast<size_t>(li - 1)];
      grads->dw[static_cast<size_t>(li)] += delta * prev.transpose();
      grads->db[static_cast<size_t>(li)] += delta.rowwise().sum();
    }
    delta = (l.w.transpose() * delta).eval();
  }
  return delta;
}

struct AdamState {
  std::vector<MatX> mw, vw;
  std::vector<VecX> mb, vb;
  long t = 0;

  static AdamState zeros_like(const Network& net) {
    AdamState s;
    for (const auto& l : net.layers) {
      s.mw.push_back(MatX::Zero(l.w.rows(), l.w.cols()));
      s.vw.push_back(MatX::Zero(l.w.rows(), l.w.cols()));
      s.mb.push_back(VecX::Zero(l.b.size()));
      s.vb.push_back(VecX::Zero(l.b.size()));
    }
    return s;
  }
  void reset() {
    for (auto& m : mw) m.setZero();
    for (auto& v : vw) v.setZero();
    for (auto& m : mb) m.setZero();
    for (auto& v : vb) v.setZero();
    t = 0;
  }
};

inline void adam_step(Network& net, const Gradients& g, AdamState& s, double lr,
                      double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
  if (s.mw.size() != net.layers.size())
    throw ContractViolation("optimizer state does not match network");
  s.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(s.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(s.t));
  for (size_t i = 0; i < net.layers.size(); ++i) {
    Layer& l = net.layers[i];
    s.mw[i] = beta1 * s.mw[i] + (1.0 - beta1) * g.dw[i];
    s.vw[i] = beta2 * s.vw[i] + (1.0 - beta2) * g.dw[i].cwiseProduct(g.dw[i]);
    s.mb[i] = beta1 * s.mb[i] + (1.0 - beta1) * g.db[i];
    s.vb[i] = beta2 * s.vb[i] + (1.0 - beta2) * g.db[i].cwiseProduct(g.db[i]);
    l.w -= (lr * (s.mw[i] / bc1).array() /
            ((s.vw[i] / bc2).array().sqrt() + eps))
               .matrix();
    l.b -= (lr * (s.mb[i] / bc1).array() /
            ((s.vb[i] / bc2).array().sqrt() + eps))
               .matrix();
  }
}

inline void soft_update(Network& target, const Network& online, double tau) {
  if (target.layers.size() != online.layers.size())
    throw ContractViolation("network shapes differ");
  for (size_t i = 0; i < target.layers.size(); ++i) {
    target.layers[i].w = tau * online.layers[i].w + (1.0 - tau) * target.layers[i].w;
    target.layers[i].b = tau * online.layers[i].b + (1.0 - tau) * target.layers[i].b;
  }
}

// Interpolate toward a fresh random init ("shrink and perturb"); alpha = 1
// keeps the network unchanged, alpha = 0 reinitializes it.
inline void shrink_perturb(Network& net, double alpha, Rng& rng) {
  if (alpha < 0.0 || alpha > 1.0) throw ContractViolation("alpha must lie in [0,1]");
  const Network fresh = fresh_like(net, rng);
  for (size_t i = 0; i < net.layers.size(); ++i) {
    net.layers[i].w = alpha * net.layers[i].w + (1.0 - alpha) * fresh.layers[i].w;
    net.layers[i].b = alpha * net.layers[i].b + (1.0 - alpha) * fresh.layers[i].b;
  }
}

// ---------------------------------------------------------------------------
// Dormant-unit statistics. A hidden unit's score is its batch-mean absolute
// activation divided by the layer-mean of those scores; it is dormant when
// the normalized score falls at or below the threshold. A silent layer counts
// as fully dormant. The output layer is excluded.

struct DormantStats {
  int dormant = 0;
  int total = 0;
  std::vector<int> per_layer;

  double ratio() const { return total == 0 ? 0.0 : static_cast<double>(dormant) / total; }
};

inline DormantStats dormant_stats(const Network& net, const MatX& batch,
                                  double threshold) {
  if (batch.cols() == 0) throw ContractViolation("dormant statistics need a batch");
  ForwardTrace trace;
  forward(net, batch, &trace);
  DormantStats stats;
  const size_t hidden_layers = net.layers.size() - 1;
  for (size_t li = 0; li < hidden_layers; ++li) {
    const MatX& a = trace.post[li];
    const VecX scores = a.cwiseAbs().rowwise().mean();
    const double layer_mean = scores.mean();
    int dormant_here = 0;
    if (layer_mean <= 0.0) {
      dormant_here = static_cast<int>(scores.size());
    } else {
      for (Eigen::Index i = 0; i < scores.size(); ++i)
        if (scores[i] / layer_mean <= threshold) ++dormant_here;
    }
    stats.per_layer.push_back(dormant_here);
    stats.dormant += dormant_here;
    stats.total += static_cast<int>(scores.size());
  }
  return stats;
}

}  // namespace stempick
