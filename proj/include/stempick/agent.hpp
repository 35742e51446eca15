#pragma once

#include <array>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "stempick/checkpoint.hpp"
#include "stempick/core.hpp"
#include "stempick/env.hpp"
#include "stempick/nn.hpp"
#include "stempick/rng.hpp"

namespace stempick {

enum class Algo { drm, drqv2 };

inline std::string algo_name(Algo a) { return a == Algo::drm ? "drm" : "drqv2"; }
inline Algo algo_from_name(const std::string& s) {
  if (s == "drm") return Algo::drm;
  if (s == "drqv2") return Algo::drqv2;
  throw ContractViolation("unknown algorithm: " + s);
}

struct AgentConfig {
  Algo algo = Algo::drm;
  double discount = 0.99;
  int n_step = 3;
  int batch_size = 256;
  size_t replay_capacity = 200000;
  double lr = 1e-4;
  double tau = 0.01;
  double dormant_threshold = 0.025;
  int dormant_check_interval = 2000;
  double perturb_alpha_min = 0.4;
  double perturb_alpha_max = 1.0;
  double sigma_min = 0.05;
  double sigma_max = 0.5;
  double exploit_lambda_max = 0.5;
  int frame_stack = 2;
  int shift_pad = 2;
  double huber_delta = 1.0;
  double target_noise_clip = 0.3;
  // baseline exploration: linear decay instead of the dormant-ratio coupling
  double baseline_sigma_start = 0.5;
  double baseline_sigma_final = 0.05;
  int baseline_decay_steps = 100000;
  // architecture
  std::vector<int> encoder_hidden = {128};
  int latent_dim = 50;
  std::vector<int> actor_hidden = {256, 256};
  std::vector<int> critic_hidden = {256, 256};
  int view_width = 24;
  int view_height = 24;

  int view_flat_dim() const { return frame_stack * Image::channels * view_width * view_height; }
  int latent_full_dim() const { return 2 * latent_dim + kStateDim; }

  void validate() const {
    if (discount <= 0.0 || discount >= 1.0)
      throw ContractViolation("discount must lie in (0,1)");
    if (sigma_min > sigma_max) throw ContractViolation("sigma range inverted");
    if (frame_stack != 2) throw ContractViolation("frame stack is fixed at 2");
    if (n_step < 1 || batch_size < 1 || replay_capacity < 1)
      throw ContractViolation("n_step, batch size and capacity must be positive");
    if (perturb_alpha_min > perturb_alpha_max || perturb_alpha_min < 0.0 ||
        perturb_alpha_max > 1.0)
      throw ContractViolation("alpha range must satisfy 0 <= min <= max <= 1");
    if (exploit_lambda_max < 0.0 || exploit_lambda_max > 1.0)
      throw ContractViolation("exploit lambda must lie in [0,1]");
    if (latent_dim < 1 || view_width < 1 || view_height < 1)
      throw ContractViolation("architecture dims must be positive");
  }
};

// exploration scale rises with dormancy
inline double awaken_noise(double beta, const AgentConfig& cfg) {
  if (beta < 0.0 || beta > 1.0) throw ContractViolation("beta must lie in [0,1]");
  const double s = cfg.sigma_min + beta * (cfg.sigma_max - cfg.sigma_min);
  return clamp(s, cfg.sigma_min, cfg.sigma_max);
}

// perturbation strength rises with dormancy (alpha = 1 keeps weights)
inline double perturb_alpha(double beta, const AgentConfig& cfg) {
  if (beta < 0.0 || beta > 1.0) throw ContractViolation("beta must lie in [0,1]");
  return cfg.perturb_alpha_max - beta * (cfg.perturb_alpha_max - cfg.perturb_alpha_min);
}

// ---------------------------------------------------------------------------
// Observation stacking and augmentation

struct StackedObs {
  VecX state;                   // current proprioceptive vector
  std::array<VecX, 2> views;    // per view: frame_stack flattened frames
};

inline VecX flatten_image(const Image& img) {
  return Eigen::Map<const VecX>(img.data.data(), static_cast<Eigen::Index>(img.data.size()));
}

class FrameStacker {
 public:
  void reset(const Observation& obs) {
    check(obs);
    for (int v = 0; v < 2; ++v) {
      frames_[v][0] = flatten_image(obs.views[static_cast<size_t>(v)]);
      frames_[v][1] = frames_[v][0];
    }
    state_ = obs.state;
  }
  void push(const Observation& obs) {
    check(obs);
    for (int v = 0; v < 2; ++v) {
      frames_[v][0] = std::move(frames_[v][1]);
      frames_[v][1] = flatten_image(obs.views[static_cast<size_t>(v)]);
    }
    state_ = obs.state;
  }
  StackedObs stacked() const {
    StackedObs out;
    out.state = state_;
    for (int v = 0; v < 2; ++v) {
      VecX s(frames_[v][0].size() + frames_[v][1].size());
      s << frames_[v][0], frames_[v][1];
      out.views[static_cast<size_t>(v)] = std::move(s);
    }
    return out;
  }

 private:
  static void check(const Observation& obs) {
    if (obs.views.size() != 2) throw ContractViolation("observation needs two views");
  }
  std::array<VecX, 2> frames_[2];
  VecX state_;
};

// Random-shift augmentation: replicate-pad then crop, expressed directly as a
// clamped index shift. Same shift for every channel/frame of one view sample.
inline VecX shift_raster(const VecX& flat, int channels, int h, int w, int dx, int dy) {
  if (flat.size() != static_cast<Eigen::Index>(channels) * h * w)
    throw ContractViolation("raster size mismatch");
  VecX out(flat.size());
  for (int c = 0; c < channels; ++c)
    for (int r = 0; r < h; ++r)
      for (int col = 0; col < w; ++col) {
        const int sr = clamp(r + dy, 0, h - 1);
        const int sc = clamp(col + dx, 0, w - 1);
        out[(static_cast<Eigen::Index>(c) * h + r) * w + col] =
            flat[(static_cast<Eigen::Index>(c) * h + sr) * w + sc];
      }
  return out;
}

// ---------------------------------------------------------------------------
// Replay: whole episodes are staged and committed on completion so n-step
// chains and return-to-go values never cross an episode boundary.

class ReplayBuffer {
 public:
  struct Chain {
    StackedObs obs;
    VecX action;
    double reward_sum = 0.0;   // discounted over the chain
    double discount = 0.0;     // gamma^n, zero at a terminal bootstrap
    StackedObs next_obs;
    double rtg = 0.0;          // discounted return-to-go from the chain start
  };

  ReplayBuffer(size_t capacity, int n_step, double discount)
      : capacity_(capacity), n_step_(n_step), discount_(discount) {
    if (capacity < 1 || n_step < 1) throw ContractViolation("capacity and n_step must be positive");
  }

  void begin_episode(const Observation& first_obs) {
    staging_ = StoredEpisode{};
    staging_last_state_ = first_obs.state;
    staging_last_views_ = compact_views(first_obs);
  }

  void push_step(const VecX& action, double reward, const Observation& next_obs,
                 bool terminated, bool episode_end) {
    Step s;
    s.state = staging_last_state_;
    s.views = staging_last_views_;
    s.action = action;
    s.reward = reward;
    staging_.steps.push_back(std::move(s));
    staging_last_state_ = next_obs.state;
    staging_last_views_ = compact_views(next_obs);
    if (terminated || episode_end) commit(terminated);
  }

  // drop the staged (incomplete) episode, e.g. after a simulation fault
  void abort_episode() { staging_ = StoredEpisode{}; }

  size_t size() const { return total_steps_; }
  size_t episode_count() const { return episodes_.size(); }

  Chain sample_chain(Rng& rng) const {
    if (total_steps_ == 0) throw ContractViolation("replay buffer is empty");
    size_t remaining =
        static_cast<size_t>(rng.uniform_int(0, static_cast<int>(total_steps_) - 1));
    size_t ep_idx = 0;
    // episodes are short (<= a few hundred steps); linear scan over episode
    // counts is fine next to the cost of assembling the chain itself
    while (remaining >= episodes_[ep_idx].steps.size()) {
      remaining -= episodes_[ep_idx].steps.size();
      ++ep_idx;
    }
    return assemble(episodes_[ep_idx], remaining);
  }

  std::vector<Chain> sample_batch(int batch, Rng& rng) const {
    if (total_steps_ < static_cast<size_t>(batch))
      throw ContractViolation("replay holds fewer steps than the batch size");
    std::vector<Chain> out;
    out.reserve(static_cast<size_t>(batch));
    for (int i = 0; i < batch; ++i) out.push_back(sample_chain(rng));
    return out;
  }

 private:
  struct Step {
    VecX state;
    std::array<std::vector<float>, 2> views;
    VecX action;
    double reward = 0.0;
    double rtg = 0.0;
  };
  struct StoredEpisode {
    std::vector<Step> steps;
    VecX final_state;
    std::array<std::vector<float>, 2> final_views;
    bool terminated = false;
  };

  static std::array<std::vector<float>, 2> compact_views(const Observation& obs) {
    if (obs.views.size() != 2) throw ContractViolation("observation needs two views");
    std::array<std::vector<float>, 2> out;
    for (size_t v = 0; v < 2; ++v) {
      const auto& d = obs.views[v].data;
      out[v].assign(d.begin(), d.end());
    }
    return out;
  }

  void commit(bool terminated) {
    staging_.terminated = terminated;
    staging_.final_state = staging_last_state_;
    staging_.final_views = staging_last_views_;
    double g = 0.0;
    for (auto it = staging_.steps.rbegin(); it != staging_.steps.rend(); ++it) {
      g = it->reward + discount_ * g;
      it->rtg = g;
    }
    total_steps_ += staging_.steps.size();
    episodes_.push_back(std::move(staging_));
    staging_ = StoredEpisode{};
    while (episodes_.size() > 1 && total_steps_ > capacity_) {
      total_steps_ -= episodes_.front().steps.size();
      episodes_.pop_front();
    }
  }

  static VecX to_vecx(const std::vector<float>& v) {
    VecX out(static_cast<Eigen::Index>(v.size()));
    for (size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
    return out;
  }

  StackedObs stack_at(const StoredEpisode& ep, size_t i) const {
    const auto frame = [&](size_t k) -> const std::array<std::vector<float>, 2>& {
      return k < ep.steps.size() ? ep.steps[k].views : ep.final_views;
    };
    const auto state = [&](size_t k) -> const VecX& {
      return k < ep.steps.size() ? ep.steps[k].state : ep.final_state;
    };
    StackedObs out;
    out.state = state(i);
    const size_t prev = i == 0 ? 0 : i - 1;
    for (size_t v = 0; v < 2; ++v) {
      const VecX a = to_vecx(frame(prev)[v]);
      const VecX b = to_vecx(frame(i)[v]);
      VecX s(a.size() + b.size());
      s << a, b;
      out.views[v] = std::move(s);
    }
    return out;
  }

  Chain assemble(const StoredEpisode& ep, size_t t) const {
    const size_t len = ep.steps.size();
    const size_t n_eff = std::min(static_cast<size_t>(n_step_), len - t);
    Chain c;
    c.obs = stack_at(ep, t);
    c.action = ep.steps[t].action;
    c.rtg = ep.steps[t].rtg;
    double gk = 1.0;
    for (size_t k = 0; k < n_eff; ++k) {
      c.reward_sum += gk * ep.steps[t + k].reward;
      gk *= discount_;
    }
    const bool boot_at_terminal = (t + n_eff == len) && ep.terminated;
    c.discount = boot_at_terminal ? 0.0 : gk;
    c.next_obs = stack_at(ep, t + n_eff);
    return c;
  }

  size_t capacity_;
  int n_step_;
  double discount_;
  std::deque<StoredEpisode> episodes_;
  StoredEpisode staging_;
  VecX staging_last_state_;
  std::array<std::vector<float>, 2> staging_last_views_;
  size_t total_steps_ = 0;
};

// ---------------------------------------------------------------------------

struct UpdateMetrics {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double q_mean = 0.0;
  double beta = 1.0;
  double sigma = 0.0;
  double lambda = 0.0;
};

class DrmAgent {
 public:
  DrmAgent(AgentConfig cfg, std::uint64_t seed) : cfg_(cfg), rng_(seed) {
    cfg_.validate();
    enc_[0] = make_encoder();
    enc_[1] = make_encoder();
    actor_ = make_actor();
    critic1_ = make_critic();
    critic2_ = make_critic();
    target1_ = critic1_;
    target2_ = critic2_;
    adam_enc_[0] = AdamState::zeros_like(enc_[0]);
    adam_enc_[1] = AdamState::zeros_like(enc_[1]);
    adam_actor_ = AdamState::zeros_like(actor_);
    adam_c1_ = AdamState::zeros_like(critic1_);
    adam_c2_ = AdamState::zeros_like(critic2_);
  }

  const AgentConfig& config() const { return cfg_; }
  double beta() const { return beta_override_ ? *beta_override_ : beta_; }
  long update_count() const { return update_count_; }
  const std::vector<double>& beta_history() const { return beta_history_; }
  long perturb_count() const { return perturb_count_; }

  // test hooks
  void set_beta_override(std::optional<double> b) { beta_override_ = b; }
  void set_perturb_enabled(bool on) { perturb_enabled_ = on; }
  Rng& rng() { return rng_; }

  double current_sigma() const {
    if (cfg_.algo == Algo::drm) return awaken_noise(beta(), cfg_);
    const double frac =
        clamp(static_cast<double>(update_count_) / std::max(1, cfg_.baseline_decay_steps),
              0.0, 1.0);
    return cfg_.baseline_sigma_start +
           frac * (cfg_.baseline_sigma_final - cfg_.baseline_sigma_start);
  }

  VecX act(const StackedObs& obs, bool train_mode) {
    const MatX z = encode(obs.views[0], obs.views[1], obs.state);
    VecX a = forward(actor_, z).col(0);
    if (train_mode) {
      const double sigma = current_sigma();
      for (int i = 0; i < a.size(); ++i) a[i] += rng_.normal(0.0, sigma);
    }
    for (int i = 0; i < a.size(); ++i) a[i] = clamp(a[i], -1.0, 1.0);
    return a;
  }

  // n-step TD targets from the clipped double target critics, blended with
  // the realized return-to-go through the optimistic mix
  // y = (1 - lambda) * td + lambda * max(td, rtg)
  VecX critic_targets(const MatX& nv0, const MatX& nv1, const MatX& ns,
                      const VecX& rsum, const VecX& disc, const VecX& rtg,
                      double sigma, double lambda) {
    const Eigen::Index b = rsum.size();
    const MatX zn = encode(nv0, nv1, ns);
    MatX an = forward(actor_, zn);
    for (Eigen::Index k = 0; k < an.size(); ++k) {
      const double noise =
          clamp(rng_.normal(0.0, sigma), -cfg_.target_noise_clip, cfg_.target_noise_clip);
      an.data()[k] = clamp(an.data()[k] + noise, -1.0, 1.0);
    }
    MatX xn(zn.rows() + kActionDim, b);
    xn << zn, an;
    const VecX q1t = forward(target1_, xn).row(0).transpose();
    const VecX q2t = forward(target2_, xn).row(0).transpose();
    VecX y(b);
    for (Eigen::Index i = 0; i < b; ++i) {
      const double td = rsum[i] + disc[i] * std::min(q1t[i], q2t[i]);
      y[i] = (1.0 - lambda) * td + lambda * std::max(td, rtg[i]);
    }
    return y;
  }

  // one critic step + one actor step + target update, DrQv2-style, with the
  // dormant-ratio mechanisms layered on top for the drm algorithm
  UpdateMetrics update(ReplayBuffer& replay) {
    const auto batch = replay.sample_batch(cfg_.batch_size, rng_);
    ++update_count_;

    const int b = cfg_.batch_size;
    const int vdim = cfg_.view_flat_dim();
    MatX v0(vdim, b), v1(vdim, b), nv0(vdim, b), nv1(vdim, b);
    MatX s(kStateDim, b), ns(kStateDim, b);
    MatX actions(kActionDim, b);
    VecX rsum(b), disc(b), rtg(b);
    for (int i = 0; i < b; ++i) {
      const auto& c = batch[static_cast<size_t>(i)];
      v0.col(i) = augment(c.obs.views[0]);
      v1.col(i) = augment(c.obs.views[1]);
      nv0.col(i) = augment(c.next_obs.views[0]);
      nv1.col(i) = augment(c.next_obs.views[1]);
      s.col(i) = c.obs.state;
      ns.col(i) = c.next_obs.state;
      actions.col(i) = c.action;
      rsum[i] = c.reward_sum;
      disc[i] = c.discount;
      rtg[i] = c.rtg;
    }

    if (update_count_ % cfg_.dormant_check_interval == 0) {
      beta_ = measure_beta(v0, v1, s, actions);
      beta_history_.push_back(beta_);
      if (cfg_.algo == Algo::drm && perturb_enabled_) perturb(beta());
    }

    UpdateMetrics m;
    m.beta = beta();
    m.sigma = current_sigma();
    m.lambda = cfg_.algo == Algo::drm ? cfg_.exploit_lambda_max * (1.0 - m.beta) : 0.0;

    const VecX y = critic_targets(nv0, nv1, ns, rsum, disc, rtg, m.sigma, m.lambda);

    // --- critic + encoder step
    ForwardTrace te0, te1;
    const MatX z = encode_traced(v0, v1, s, te0, te1);
    MatX x(z.rows() + kActionDim, b);
    x << z, actions;
    ForwardTrace tc1, tc2;
    const VecX q1 = forward(critic1_, x, &tc1).row(0).transpose();
    const VecX q2 = forward(critic2_, x, &tc2).row(0).transpose();

    MatX d1(1, b), d2(1, b);
    double loss = 0.0;
    for (int i = 0; i < b; ++i) {
      loss += huber(q1[i] - y[i]) + huber(q2[i] - y[i]);
      d1(0, i) = huber_grad(q1[i] - y[i]) / b;
      d2(0, i) = huber_grad(q2[i] - y[i]) / b;
    }
    m.critic_loss = loss / b;
    m.q_mean = q1.mean();

    Gradients g1 = Gradients::zeros_like(critic1_);
    Gradients g2 = Gradients::zeros_like(critic2_);
    const MatX dx1 = backward(critic1_, tc1, d1, &g1);
    const MatX dx2 = backward(critic2_, tc2, d2, &g2);
    const MatX dz = dx1.topRows(z.rows()) + dx2.topRows(z.rows());
    Gradients ge0 = Gradients::zeros_like(enc_[0]);
    Gradients ge1 = Gradients::zeros_like(enc_[1]);
    backward(enc_[0], te0, dz.topRows(cfg_.latent_dim), &ge0);
    backward(enc_[1], te1, dz.middleRows(cfg_.latent_dim, cfg_.latent_dim), &ge1);

    adam_step(critic1_, g1, adam_c1_, cfg_.lr);
    adam_step(critic2_, g2, adam_c2_, cfg_.lr);
    adam_step(enc_[0], ge0, adam_enc_[0], cfg_.lr);
    adam_step(enc_[1], ge1, adam_enc_[1], cfg_.lr);

    // --- actor step (encoders frozen; maximize critic 1)
    ForwardTrace ta;
    const MatX api = forward(actor_, z, &ta);
    MatX xpi(z.rows() + kActionDim, b);
    xpi << z, api;
    ForwardTrace tq;
    const MatX qpi = forward(critic1_, xpi, &tq);
    m.actor_loss = -qpi.row(0).mean();
    MatX dq = MatX::Constant(1, b, -1.0 / b);
    const MatX dxpi = backward(critic1_, tq, dq, nullptr);
    Gradients ga = Gradients::zeros_like(actor_);
    backward(actor_, ta, dxpi.bottomRows(kActionDim), &ga);
    adam_step(actor_, ga, adam_actor_, cfg_.lr);

    soft_update(target1_, critic1_, cfg_.tau);
    soft_update(target2_, critic2_, cfg_.tau);
    return m;
  }

  // dormancy measured jointly over both encoders, the actor, and both critics
  DormantStats aggregate_dormant(const MatX& v0, const MatX& v1, const MatX& s,
                                 const MatX& actions) const {
    const MatX z = encode(v0, v1, s);
    MatX x(z.rows() + actions.rows(), z.cols());
    x << z, actions;
    DormantStats total;
    const std::vector<std::pair<const Network*, const MatX*>> nets = {
        {&enc_[0], &v0}, {&enc_[1], &v1}, {&actor_, &z},
        {&critic1_, &x}, {&critic2_, &x}};
    for (const auto& [net, input] : nets) {
      const DormantStats part = dormant_stats(*net, *input, cfg_.dormant_threshold);
      total.dormant += part.dormant;
      total.total += part.total;
      total.per_layer.insert(total.per_layer.end(), part.per_layer.begin(),
                             part.per_layer.end());
    }
    return total;
  }

  void save(const std::string& path, const YAML::Node& extra_meta = {}) const {
    CheckpointWriter w;
    save_network(w, "encoder0", enc_[0]);
    save_network(w, "encoder1", enc_[1]);
    save_network(w, "actor", actor_);
    save_network(w, "critic1", critic1_);
    save_network(w, "critic2", critic2_);
    save_network(w, "target1", target1_);
    save_network(w, "target2", target2_);
    save_adam(w, "encoder0", adam_enc_[0]);
    save_adam(w, "encoder1", adam_enc_[1]);
    save_adam(w, "actor", adam_actor_);
    save_adam(w, "critic1", adam_c1_);
    save_adam(w, "critic2", adam_c2_);
    w.add("beta_history", beta_history_);
    w.meta()["agent"] = agent_config_yaml(cfg_);
    w.meta()["update_count"] = static_cast<long long>(update_count_);
    w.meta()["perturb_count"] = static_cast<long long>(perturb_count_);
    w.meta()["beta"] = beta_;
    w.meta()["rng"] = rng_.save_state();
    if (extra_meta && extra_meta.IsDefined() && !extra_meta.IsNull())
      w.meta()["run"] = extra_meta;
    w.write(path);
  }

  static DrmAgent load(const std::string& path) {
    CheckpointReader r(path);
    return load(r);
  }

  static DrmAgent load(const CheckpointReader& r) {
    const AgentConfig cfg = agent_config_from_yaml(r.meta()["agent"], AgentConfig{});
    DrmAgent a(cfg, 0);
    a.enc_[0] = load_network(r, "encoder0");
    a.enc_[1] = load_network(r, "encoder1");
    a.actor_ = load_network(r, "actor");
    a.critic1_ = load_network(r, "critic1");
    a.critic2_ = load_network(r, "critic2");
    a.target1_ = load_network(r, "target1");
    a.target2_ = load_network(r, "target2");
    a.adam_enc_[0] = load_adam(r, "encoder0", a.enc_[0]);
    a.adam_enc_[1] = load_adam(r, "encoder1", a.enc_[1]);
    a.adam_actor_ = load_adam(r, "actor", a.actor_);
    a.adam_c1_ = load_adam(r, "critic1", a.critic1_);
    a.adam_c2_ = load_adam(r, "critic2", a.critic2_);
    const VecX bh = r.vector("beta_history");
    a.beta_history_.assign(bh.data(), bh.data() + bh.size());
    a.update_count_ = r.meta()["update_count"].as<long long>();
    a.perturb_count_ = r.meta()["perturb_count"].as<long long>();
    a.beta_ = r.meta()["beta"].as<double>();
    a.rng_.load_state(r.meta()["rng"].as<std::string>());
    return a;
  }

  static YAML::Node agent_config_yaml(const AgentConfig& c) {
    YAML::Node n;
    n["algo"] = algo_name(c.algo);
    n["discount"] = c.discount;
    n["n_step"] = c.n_step;
    n["batch_size"] = c.batch_size;
    n["replay_capacity"] = static_cast<long long>(c.replay_capacity);
    n["lr"] = c.lr;
    n["tau"] = c.tau;
    n["dormant_threshold"] = c.dormant_threshold;
    n["dormant_check_interval"] = c.dormant_check_interval;
    n["perturb_alpha_min"] = c.perturb_alpha_min;
    n["perturb_alpha_max"] = c.perturb_alpha_max;
    n["sigma_min"] = c.sigma_min;
    n["sigma_max"] = c.sigma_max;
    n["exploit_lambda_max"] = c.exploit_lambda_max;
    n["frame_stack"] = c.frame_stack;
    n["shift_pad"] = c.shift_pad;
    n["huber_delta"] = c.huber_delta;
    n["target_noise_clip"] = c.target_noise_clip;
    n["baseline_sigma_start"] = c.baseline_sigma_start;
    n["baseline_sigma_final"] = c.baseline_sigma_final;
    n["baseline_decay_steps"] = c.baseline_decay_steps;
    n["encoder_hidden"] = c.encoder_hidden;
    n["latent_dim"] = c.latent_dim;
    n["actor_hidden"] = c.actor_hidden;
    n["critic_hidden"] = c.critic_hidden;
    n["view_width"] = c.view_width;
    n["view_height"] = c.view_height;
    return n;
  }

  static AgentConfig agent_config_from_yaml(const YAML::Node& n, AgentConfig base) {
    if (!n || !n.IsDefined() || n.IsNull()) return base;
    AgentConfig c = base;
    if (n["algo"]) c.algo = algo_from_name(n["algo"].as<std::string>());
    if (n["discount"]) c.discount = n["discount"].as<double>();
    if (n["n_step"]) c.n_step = n["n_step"].as<int>();
    if (n["batch_size"]) c.batch_size = n["batch_size"].as<int>();
    if (n["replay_capacity"]) c.replay_capacity = n["replay_capacity"].as<long long>();
    if (n["lr"]) c.lr = n["lr"].as<double>();
    if (n["tau"]) c.tau = n["tau"].as<double>();
    if (n["dormant_threshold"]) c.dormant_threshold = n["dormant_threshold"].as<double>();
    if (n["dormant_check_interval"])
      c.dormant_check_interval = n["dormant_check_interval"].as<int>();
    if (n["perturb_alpha_min"]) c.perturb_alpha_min = n["perturb_alpha_min"].as<double>();
    if (n["perturb_alpha_max"]) c.perturb_alpha_max = n["perturb_alpha_max"].as<double>();
    if (n["sigma_min"]) c.sigma_min = n["sigma_min"].as<double>();
    if (n["sigma_max"]) c.sigma_max = n["sigma_max"].as<double>();
    if (n["exploit_lambda_max"]) c.exploit_lambda_max = n["exploit_lambda_max"].as<double>();
    if (n["frame_stack"]) c.frame_stack = n["frame_stack"].as<int>();
    if (n["shift_pad"]) c.shift_pad = n["shift_pad"].as<int>();
    if (n["huber_delta"]) c.huber_delta = n["huber_delta"].as<double>();
    if (n["target_noise_clip"]) c.target_noise_clip = n["target_noise_clip"].as<double>();
    if (n["baseline_sigma_start"])
      c.baseline_sigma_start = n["baseline_sigma_start"].as<double>();
    if (n["baseline_sigma_final"])
      c.baseline_sigma_final = n["baseline_sigma_final"].as<double>();
    if (n["baseline_decay_steps"])
      c.baseline_decay_steps = n["baseline_decay_steps"].as<int>();
    if (n["encoder_hidden"]) c.encoder_hidden = n["encoder_hidden"].as<std::vector<int>>();
    if (n["latent_dim"]) c.latent_dim = n["latent_dim"].as<int>();
    if (n["actor_hidden"]) c.actor_hidden = n["actor_hidden"].as<std::vector<int>>();
    if (n["critic_hidden"]) c.critic_hidden = n["critic_hidden"].as<std::vector<int>>();
    if (n["view_width"]) c.view_width = n["view_width"].as<int>();
    if (n["view_height"]) c.view_height = n["view_height"].as<int>();
    return c;
  }

  // exposed for white-box tests
  const Network& actor() const { return actor_; }
  const Network& critic1() const { return critic1_; }
  const Network& critic2() const { return critic2_; }
  const Network& encoder(int i) const { return enc_[i]; }
  const Network& target1() const { return target1_; }
  const Network& target2() const { return target2_; }
  Network& mutable_actor() { return actor_; }
  Network& mutable_critic1() { return critic1_; }
  Network& mutable_critic2() { return critic2_; }
  Network& mutable_encoder(int i) { return enc_[i]; }
  Network& mutable_target1() { return target1_; }
  Network& mutable_target2() { return target2_; }

  // applies the shrink-and-perturb reset exactly as a dormancy check at the
  // given ratio would
  void force_perturb(double beta_value) { perturb(beta_value); }

  MatX encode(const MatX& v0, const MatX& v1, const MatX& s) const {
    ForwardTrace t0, t1;
    return encode_traced(v0, v1, s, t0, t1);
  }

 private:
  Network make_encoder() {
    return make_mlp(cfg_.view_flat_dim(), cfg_.encoder_hidden, cfg_.latent_dim,
                    Activation::relu, Activation::tanh, rng_);
  }
  Network make_actor() {
    Network net = make_mlp(cfg_.latent_full_dim(), cfg_.actor_hidden, kActionDim,
                           Activation::relu, Activation::tanh, rng_);
    net.layers.back().w *= 1e-2;  // near-zero initial actions
    net.layers.back().b *= 1e-2;
    return net;
  }
  Network make_critic() {
    return make_mlp(cfg_.latent_full_dim() + kActionDim, cfg_.critic_hidden, 1,
                    Activation::relu, Activation::identity, rng_);
  }

  MatX encode_traced(const MatX& v0, const MatX& v1, const MatX& s, ForwardTrace& t0,
                     ForwardTrace& t1) const {
    const MatX e0 = forward(enc_[0], v0, &t0);
    const MatX e1 = forward(enc_[1], v1, &t1);
    if (s.rows() != kStateDim) throw ContractViolation("state dimension mismatch");
    MatX z(e0.rows() + e1.rows() + s.rows(), v0.cols());
    z << e0, e1, s;
    return z;
  }

  VecX augment(const VecX& view) {
    const int dx = static_cast<int>(rng_.uniform_int(-cfg_.shift_pad, cfg_.shift_pad));
    const int dy = static_cast<int>(rng_.uniform_int(-cfg_.shift_pad, cfg_.shift_pad));
    return shift_raster(view, cfg_.frame_stack * Image::channels, cfg_.view_height,
                        cfg_.view_width, dx, dy);
  }

  double huber(double e) const {
    const double d = cfg_.huber_delta;
    const double a = std::abs(e);
    return a <= d ? 0.5 * e * e : d * (a - 0.5 * d);
  }
  double huber_grad(double e) const { return clamp(e, -cfg_.huber_delta, cfg_.huber_delta); }

  double measure_beta(const MatX& v0, const MatX& v1, const MatX& s, const MatX& a) const {
    return aggregate_dormant(v0, v1, s, a).ratio();
  }

  void perturb(double beta) {
    const double alpha = perturb_alpha(beta, cfg_);
    if (alpha >= 1.0) return;
    ++perturb_count_;
    shrink_perturb(enc_[0], alpha, rng_);
    shrink_perturb(enc_[1], alpha, rng_);
    shrink_perturb(critic1_, alpha, rng_);
    shrink_perturb(critic2_, alpha, rng_);
    {  // actor interpolates toward its own (scaled-head) init distribution
      Network fresh = make_actor();
      for (size_t i = 0; i < actor_.layers.size(); ++i) {
        actor_.layers[i].w = alpha * actor_.layers[i].w + (1 - alpha) * fresh.layers[i].w;
        actor_.layers[i].b = alpha * actor_.layers[i].b + (1 - alpha) * fresh.layers[i].b;
      }
    }
    adam_enc_[0].reset();
    adam_enc_[1].reset();
    adam_actor_.reset();
    adam_c1_.reset();
    adam_c2_.reset();
  }

  AgentConfig cfg_;
  Rng rng_;
  Network enc_[2], actor_, critic1_, critic2_, target1_, target2_;
  AdamState adam_enc_[2], adam_actor_, adam_c1_, adam_c2_;
  double beta_ = 1.0;
  std::vector<double> beta_history_;
  long update_count_ = 0;
  long perturb_count_ = 0;
  bool perturb_enabled_ = true;
  std::optional<double> beta_override_;
};

}  // namespace stempick
