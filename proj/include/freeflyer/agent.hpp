#pragma once

#include <chrono>
#include <functional>
#include <numeric>
#include <ostream>
#include <vector>

#include "freeflyer/net.hpp"
#include "freeflyer/vecenv.hpp"

namespace ff::agent {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct PpoParams {
  int epochs = 2000;
  int n_envs = 256;
  int rollout_steps = 32;
  int minibatches = 4;
  int update_epochs = 4;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip = 0.2;
  double value_coef = 0.5;
  double entropy_coef = 0.005;
  double learning_rate = 3e-4;
  double max_grad_norm = 1.0;
  int hidden = 0;  // 0: 128 for planar tasks, 256 for spatial
  int layers = 0;  // 0: 2 for planar tasks, 3 for spatial
  int checkpoint_every = 100;
  // Linear decay of learning rate and entropy bonus to zero by the final
  // epoch. Keeps early exploration while letting the late policy sharpen
  // enough that argmax decoding matches the stochastic behavior.
  bool anneal = true;

  void validate() const {
    if (epochs < 0) throw ConfigInvalid("ppo: epochs must be >= 0");
    if (n_envs < 1 || rollout_steps < 1 || minibatches < 1 || update_epochs < 1)
      throw ConfigInvalid("ppo: batch shape fields must be >= 1");
    if (!(gamma > 0.0 && gamma <= 1.0))
      throw ConfigInvalid("ppo: gamma must be in (0, 1]");
    if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0))
      throw ConfigInvalid("ppo: lambda must be in [0, 1]");
    if (!(clip > 0.0)) throw ConfigInvalid("ppo: clip must be > 0");
    if (!(learning_rate > 0.0)) throw ConfigInvalid("ppo: learning_rate must be > 0");
    if (!(max_grad_norm > 0.0)) throw ConfigInvalid("ppo: max_grad_norm must be > 0");
    if (hidden < 0 || layers < 0)
      throw ConfigInvalid("ppo: hidden/layers must be >= 0 (0 = default)");
  }

  net::MlpSpec resolved_spec(tasks::TaskKind task, int obs_dim,
                             int n_heads) const {
    net::MlpSpec s;
    s.obs_dim = obs_dim;
    s.n_heads = n_heads;
    bool planar = tasks::is_planar(task);
    s.hidden = hidden > 0 ? hidden : (planar ? 128 : 256);
    s.layers = layers > 0 ? layers : (planar ? 2 : 3);
    return s;
  }
};

// obs column-per-sample view over a vecenv row-major observation block
inline Eigen::Map<const MatrixXd> obs_as_columns(const std::vector<double>& obs,
                                                 int obs_dim) {
  return Eigen::Map<const MatrixXd>(
      obs.data(), obs_dim, static_cast<Eigen::Index>(obs.size()) / obs_dim);
}

// One independent binary categorical per thruster. Bits land env-major
// (sample s's bits are contiguous), matching the vecenv action layout.
inline void sample_actions(const MatrixXd& logits, Rng& rng,
                           std::span<std::uint8_t> actions, VectorXd& logp,
                           VectorXd& entropy) {
  const Eigen::Index n2 = logits.rows();
  const Eigen::Index batch = logits.cols();
  const Eigen::Index heads = n2 / 2;
  if (!logits.allFinite())
    throw NonFiniteLoss("sample_actions: non-finite logits");
  logp.resize(batch);
  entropy.resize(batch);
  for (Eigen::Index j = 0; j < batch; ++j) {
    double lp = 0.0, ent = 0.0;
    for (Eigen::Index i = 0; i < heads; ++i) {
      double l0 = logits(2 * i, j), l1 = logits(2 * i + 1, j);
      double m = std::max(l0, l1);
      double z = m + std::log(std::exp(l0 - m) + std::exp(l1 - m));
      double lp0 = l0 - z, lp1 = l1 - z;
      double p1 = std::exp(lp1);
      std::uint8_t bit = rng.uniform() < p1 ? 1 : 0;
      actions[static_cast<std::size_t>(j * heads + i)] = bit;
      lp += bit ? lp1 : lp0;
      ent -= std::exp(lp0) * lp0 + p1 * lp1;
    }
    logp[j] = lp;
    entropy[j] = ent;
  }
}

inline void greedy_actions(const MatrixXd& logits,
                           std::span<std::uint8_t> actions) {
  const Eigen::Index heads = logits.rows() / 2;
  for (Eigen::Index j = 0; j < logits.cols(); ++j)
    for (Eigen::Index i = 0; i < heads; ++i)
      actions[static_cast<std::size_t>(j * heads + i)] =
          logits(2 * i + 1, j) > logits(2 * i, j) ? 1 : 0;
}

// Joint log-prob and per-sample entropy of stored bits under the given
// logits; gradient helpers fill per-class probabilities when requested.
inline void logprob_entropy(const MatrixXd& logits,
                            std::span<const std::uint8_t> actions,
                            VectorXd& logp, VectorXd& entropy,
                            MatrixXd* probs = nullptr) {
  const Eigen::Index heads = logits.rows() / 2;
  const Eigen::Index batch = logits.cols();
  logp.resize(batch);
  entropy.resize(batch);
  if (probs) probs->resize(logits.rows(), batch);
  for (Eigen::Index j = 0; j < batch; ++j) {
    double lp = 0.0, ent = 0.0;
    for (Eigen::Index i = 0; i < heads; ++i) {
      double l0 = logits(2 * i, j), l1 = logits(2 * i + 1, j);
      double m = std::max(l0, l1);
      double z = m + std::log(std::exp(l0 - m) + std::exp(l1 - m));
      double lp0 = l0 - z, lp1 = l1 - z;
      double p0 = std::exp(lp0), p1 = std::exp(lp1);
      std::uint8_t bit = actions[static_cast<std::size_t>(j * heads + i)];
      lp += bit ? lp1 : lp0;
      ent -= p0 * lp0 + p1 * lp1;
      if (probs) {
        (*probs)(2 * i, j) = p0;
        (*probs)(2 * i + 1, j) = p1;
      }
    }
    logp[j] = lp;
    entropy[j] = ent;
  }
}

// delta_t = r_t + gamma * next_value_t - v_t with next_value already resolved
// per transition (v_{t+1}, a stored terminal bootstrap, or 0 at a hard
// terminal); the advantage chain breaks at every done.
inline void gae(const MatrixXd& rewards, const MatrixXd& values,
                const Eigen::Matrix<std::uint8_t, Eigen::Dynamic,
                                    Eigen::Dynamic>& dones,
                const MatrixXd& next_values, double gamma, double lambda,
                MatrixXd& advantages, MatrixXd& returns) {
  const Eigen::Index horizon = rewards.rows();
  const Eigen::Index n = rewards.cols();
  advantages.resize(horizon, n);
  returns.resize(horizon, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double acc = 0.0;
    for (Eigen::Index t = horizon - 1; t >= 0; --t) {
      double not_done = dones(t, i) ? 0.0 : 1.0;
      double delta =
          rewards(t, i) + gamma * next_values(t, i) - values(t, i);
      acc = delta + gamma * lambda * not_done * acc;
      advantages(t, i) = acc;
    }
  }
  returns = advantages + values;
}

struct Minibatch {
  MatrixXd obs;                       // obs_dim x M
  std::vector<std::uint8_t> actions;  // M * n_heads, env-major
  VectorXd logp_old;
  VectorXd advantages;  // already normalized
  VectorXd returns;
};

struct LossReport {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double total = 0.0;
};

// Clipped-surrogate loss over one minibatch; returns the loss pieces and the
// analytic parameter gradients of
//   policy + value_coef * value - entropy_coef * entropy.
inline LossReport ppo_loss(const net::PolicyNet& net, const Minibatch& mb,
                           const PpoParams& hp,
                           net::PolicyNet::Gradients* grads_out) {
  const Eigen::Index m = mb.obs.cols();
  net::PolicyNet::Cache cache;
  MatrixXd logits;
  VectorXd values;
  net.forward(mb.obs, logits, values, grads_out ? &cache : nullptr);

  VectorXd logp_new, entropy;
  MatrixXd probs;
  logprob_entropy(logits, mb.actions, logp_new, entropy,
                  grads_out ? &probs : nullptr);

  LossReport rep;
  const double inv_m = 1.0 / static_cast<double>(m);
  MatrixXd dlogits;
  VectorXd dvalues;
  if (grads_out) {
    dlogits = MatrixXd::Zero(logits.rows(), m);
    dvalues.resize(m);
  }
  const Eigen::Index heads = logits.rows() / 2;
  for (Eigen::Index j = 0; j < m; ++j) {
    double ratio = std::exp(logp_new[j] - mb.logp_old[j]);
    double a = mb.advantages[j];
    double unclipped = ratio * a;
    double clipped = std::clamp(ratio, 1.0 - hp.clip, 1.0 + hp.clip) * a;
    bool take_unclipped = unclipped <= clipped;
    rep.policy_loss += -std::min(unclipped, clipped) * inv_m;
    rep.clip_fraction += (std::abs(ratio - 1.0) > hp.clip) ? inv_m : 0.0;
    double verr = values[j] - mb.returns[j];
    rep.value_loss += verr * verr * inv_m;
    rep.entropy += entropy[j] * inv_m;
    if (grads_out) {
      // d(policy)/d(logp_new); the clipped branch is locally constant
      double dpg_dlp = take_unclipped ? -a * ratio * inv_m : 0.0;
      dvalues[j] = hp.value_coef * 2.0 * verr * inv_m;
      for (Eigen::Index i = 0; i < heads; ++i) {
        std::uint8_t bit = mb.actions[static_cast<std::size_t>(j * heads + i)];
        double p0 = probs(2 * i, j), p1 = probs(2 * i + 1, j);
        double lp0 = std::log(std::max(p0, 1e-300));
        double lp1 = std::log(std::max(p1, 1e-300));
        double h_i = -(p0 * lp0 + p1 * lp1);
        // d(logp)/dl_k = [k == bit] - p_k
        dlogits(2 * i, j) += dpg_dlp * ((bit == 0 ? 1.0 : 0.0) - p0);
        dlogits(2 * i + 1, j) += dpg_dlp * ((bit == 1 ? 1.0 : 0.0) - p1);
        // d(-c_e * mean entropy)/dl_k = c_e/m * p_k (log p_k + H_i)
        dlogits(2 * i, j) += hp.entropy_coef * inv_m * p0 * (lp0 + h_i);
        dlogits(2 * i + 1, j) += hp.entropy_coef * inv_m * p1 * (lp1 + h_i);
      }
    }
  }
  rep.total = rep.policy_loss + hp.value_coef * rep.value_loss -
              hp.entropy_coef * rep.entropy;
  if (!std::isfinite(rep.total))
    throw NonFiniteLoss("ppo_loss: non-finite loss");
  if (grads_out) *grads_out = net.backward(cache, dlogits, dvalues);
  return rep;
}

struct RolloutBuffer {
  int horizon = 0;
  int n_envs = 0;
  int obs_dim = 0;
  int n_heads = 0;
  // sample s = t * n_envs + i
  MatrixXd obs;                       // obs_dim x (horizon * n_envs)
  std::vector<std::uint8_t> actions;  // (horizon * n_envs) * n_heads
  VectorXd logp;
  MatrixXd values;       // horizon x n_envs
  MatrixXd rewards;      // horizon x n_envs
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> dones;
  MatrixXd next_values;  // resolved bootstrap per transition
  MatrixXd advantages;   // filled by finish()
  MatrixXd returns;

  void reset(int horizon_, int n_envs_, int obs_dim_, int n_heads_) {
    horizon = horizon_;
    n_envs = n_envs_;
    obs_dim = obs_dim_;
    n_heads = n_heads_;
    const Eigen::Index total =
        static_cast<Eigen::Index>(horizon) * n_envs;
    obs.resize(obs_dim, total);
    actions.assign(static_cast<std::size_t>(total) * n_heads, 0);
    logp.resize(total);
    values.resize(horizon, n_envs);
    rewards.resize(horizon, n_envs);
    dones.resize(horizon, n_envs);
    next_values.resize(horizon, n_envs);
  }

  void finish(double gamma, double lambda) {
    gae(rewards, values, dones, next_values, gamma, lambda, advantages,
        returns);
  }
};

// Mean 0, sample std 1 (when count > 1), epsilon-guarded.
inline void normalize_advantages(VectorXd& adv) {
  if (adv.size() <= 1) return;
  double mean = adv.mean();
  double var = (adv.array() - mean).square().sum() /
               static_cast<double>(adv.size() - 1);
  adv = (adv.array() - mean) / (std::sqrt(var) + 1e-8);
}

// One pass of minibatched clipped-surrogate updates over a full buffer.
// Advantages are normalized once across the whole update.
inline LossReport ppo_update(net::PolicyNet& net, RolloutBuffer& buf,
                             const PpoParams& hp, net::Adam& adam,
                             Rng& shuffle_rng) {
  const Eigen::Index total = static_cast<Eigen::Index>(buf.horizon) * buf.n_envs;
  VectorXd adv_flat(total), ret_flat(total);
  for (int t = 0; t < buf.horizon; ++t)
    for (int i = 0; i < buf.n_envs; ++i) {
      adv_flat[static_cast<Eigen::Index>(t) * buf.n_envs + i] =
          buf.advantages(t, i);
      ret_flat[static_cast<Eigen::Index>(t) * buf.n_envs + i] =
          buf.returns(t, i);
    }
  normalize_advantages(adv_flat);

  std::vector<Eigen::Index> idx(static_cast<std::size_t>(total));
  std::iota(idx.begin(), idx.end(), 0);
  const Eigen::Index mb_size =
      std::max<Eigen::Index>(1, total / hp.minibatches);

  LossReport avg;
  int n_batches = 0;
  VectorXd params = net.flatten();
  for (int ue = 0; ue < hp.update_epochs; ++ue) {
    for (Eigen::Index k = total - 1; k > 0; --k) {
      Eigen::Index r = static_cast<Eigen::Index>(
          shuffle_rng.next_u64() % static_cast<std::uint64_t>(k + 1));
      std::swap(idx[static_cast<std::size_t>(k)],
                idx[static_cast<std::size_t>(r)]);
    }
    for (Eigen::Index start = 0; start < total; start += mb_size) {
      Eigen::Index count = std::min(mb_size, total - start);
      if (total - (start + count) < mb_size) count = total - start;  // tail
      Minibatch mb;
      mb.obs.resize(buf.obs_dim, count);
      mb.actions.resize(static_cast<std::size_t>(count) * buf.n_heads);
      mb.logp_old.resize(count);
      mb.advantages.resize(count);
      mb.returns.resize(count);
      for (Eigen::Index c = 0; c < count; ++c) {
        Eigen::Index s = idx[static_cast<std::size_t>(start + c)];
        mb.obs.col(c) = buf.obs.col(s);
        for (int h = 0; h < buf.n_heads; ++h)
          mb.actions[static_cast<std::size_t>(c * buf.n_heads + h)] =
              buf.actions[static_cast<std::size_t>(s * buf.n_heads + h)];
        mb.logp_old[c] = buf.logp[s];
        mb.advantages[c] = adv_flat[s];
        mb.returns[c] = ret_flat[s];
      }
      net::PolicyNet::Gradients grads;
      LossReport rep = ppo_loss(net, mb, hp, &grads);
      VectorXd g = net::PolicyNet::flatten_grads(grads, net.spec);
      double norm = g.norm();
      if (!std::isfinite(norm))
        throw NonFiniteLoss("ppo_update: non-finite gradient");
      if (norm > hp.max_grad_norm) g *= hp.max_grad_norm / norm;
      adam.step(params, g);
      net.unflatten(params);
      avg.policy_loss += rep.policy_loss;
      avg.value_loss += rep.value_loss;
      avg.entropy += rep.entropy;
      avg.clip_fraction += rep.clip_fraction;
      avg.total += rep.total;
      ++n_batches;
      if (start + count >= total) break;
    }
  }
  if (!params.allFinite())
    throw NonFiniteLoss("ppo_update: non-finite parameters after update");
  avg.policy_loss /= n_batches;
  avg.value_loss /= n_batches;
  avg.entropy /= n_batches;
  avg.clip_fraction /= n_batches;
  avg.total /= n_batches;
  return avg;
}

struct EpochRow {
  int epoch = 0;
  double mean_return = 0.0;
  double mean_final_distance = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double steps_per_second = 0.0;
};

struct TrainResult {
  net::PolicyNet net;
  std::vector<EpochRow> curve;
};

// Epoch = collect hp.rollout_steps across hp.n_envs, then one ppo_update.
// mean_return averages episodes completed during the epoch (running returns
// when none completed); mean_final_distance is the goal-distance average over
// envs at the epoch's last step.
inline TrainResult train(
    const vec::EnvConfig& env_cfg, const PpoParams& hp, std::uint64_t seed,
    int workers = 1,
    const std::function<void(int, const net::PolicyNet&)>& checkpoint_cb = {},
    std::ostream* progress = nullptr) {
  hp.validate();
  vec::VecEnv env(env_cfg, hp.n_envs, child_seed(seed, 0), workers);
  const int obs_dim = env.obs_dim();
  const int n_heads = env.action_dim();
  net::MlpSpec spec = hp.resolved_spec(env_cfg.task, obs_dim, n_heads);
  TrainResult result{net::PolicyNet::init(spec, child_seed(seed, 1)), {}};
  net::PolicyNet& net = result.net;
  auto scale = tasks::observation_scale(env_cfg.task);
  net.in_scale = Eigen::Map<const VectorXd>(
      scale.data(), static_cast<Eigen::Index>(scale.size()));
  net::Adam adam;
  adam.lr = hp.learning_rate;
  Rng action_rng(child_seed(seed, 2));
  Rng shuffle_rng(child_seed(seed, 3));

  MatrixXd current_obs = obs_as_columns(env.observations(), obs_dim);
  RolloutBuffer buf;
  std::vector<std::uint8_t> actions(
      static_cast<std::size_t>(hp.n_envs) * n_heads);
  MatrixXd logits;
  VectorXd values, logp, entropy;

  for (int epoch = 1; epoch <= hp.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    buf.reset(hp.rollout_steps, hp.n_envs, obs_dim, n_heads);
    double completed_return_sum = 0.0;
    long completed_count = 0;

    for (int t = 0; t < hp.rollout_steps; ++t) {
      net.forward(current_obs, logits, values);
      sample_actions(logits, action_rng, actions, logp, entropy);
      const Eigen::Index base = static_cast<Eigen::Index>(t) * hp.n_envs;
      buf.obs.middleCols(base, hp.n_envs) = current_obs;
      std::copy(actions.begin(), actions.end(),
                buf.actions.begin() +
                    static_cast<std::size_t>(base) * n_heads);
      buf.logp.segment(base, hp.n_envs) = logp;
      buf.values.row(t) = values.transpose();

      const auto& out = env.step_batch(actions);
      for (int i = 0; i < hp.n_envs; ++i) {
        buf.rewards(t, i) = out.rewards[i];
        buf.dones(t, i) = out.dones[i];
        if (out.dones[i]) {
          completed_return_sum += out.episode_returns[i];
          ++completed_count;
        }
      }
      // bootstrap values for truncated episodes (horizon); hard terminals
      // bootstrap zero
      std::vector<int> trunc;
      for (int i = 0; i < hp.n_envs; ++i) {
        if (out.dones[i]) {
          buf.next_values(t, i) = 0.0;
          if (out.done_reasons[i] ==
              static_cast<std::uint8_t>(tasks::DoneReason::horizon))
            trunc.push_back(i);
        }
      }
      if (!trunc.empty()) {
        MatrixXd term_obs(obs_dim, static_cast<Eigen::Index>(trunc.size()));
        for (std::size_t k = 0; k < trunc.size(); ++k)
          term_obs.col(static_cast<Eigen::Index>(k)) =
              Eigen::Map<const VectorXd>(
                  out.terminal_observations.data() +
                      static_cast<std::size_t>(trunc[k]) * obs_dim,
                  obs_dim);
        MatrixXd tl;
        VectorXd tv;
        net.forward(term_obs, tl, tv);
        for (std::size_t k = 0; k < trunc.size(); ++k)
          buf.next_values(t, trunc[k]) = tv[static_cast<Eigen::Index>(k)];
      }
      current_obs = obs_as_columns(out.observations, obs_dim);
    }

    // v_{t+1} for live transitions; the final step bootstraps on the current
    // observations
    net.forward(current_obs, logits, values);
    for (int t = 0; t < hp.rollout_steps; ++t)
      for (int i = 0; i < hp.n_envs; ++i)
        if (!buf.dones(t, i))
          buf.next_values(t, i) = (t + 1 < hp.rollout_steps)
                                      ? buf.values(t + 1, i)
                                      : values[i];

    buf.finish(hp.gamma, hp.gae_lambda);
    LossReport rep = ppo_update(net, buf, hp, adam, shuffle_rng);

    double dist_sum = 0.0;
    for (int i = 0; i < hp.n_envs; ++i)
      dist_sum += tasks::goal_distance(env_cfg.task, env.state(i), env.goal(i));
    double running_return_sum = 0.0;
    for (int i = 0; i < hp.n_envs; ++i)
      running_return_sum += env.episode_return(i);
    auto t1 = std::chrono::steady_clock::now();
    double wall = std::chrono::duration<double>(t1 - t0).count();

    EpochRow row;
    row.epoch = epoch;
    row.mean_return = completed_count > 0
                          ? completed_return_sum / completed_count
                          : running_return_sum / hp.n_envs;
    row.mean_final_distance = dist_sum / hp.n_envs;
    row.policy_loss = rep.policy_loss;
    row.value_loss = rep.value_loss;
    row.entropy = rep.entropy;
    row.clip_fraction = rep.clip_fraction;
    row.steps_per_second =
        wall > 0.0 ? hp.n_envs * hp.rollout_steps / wall : 0.0;
    result.curve.push_back(row);

    if (checkpoint_cb &&
        (epoch % hp.checkpoint_every == 0 || epoch == hp.epochs))
      checkpoint_cb(epoch, net);
    if (progress && (epoch % 50 == 0 || epoch == 1 || epoch == hp.epochs)) {
      (*progress) << "epoch " << epoch << "/" << hp.epochs
                  << " return=" << row.mean_return
                  << " dist=" << row.mean_final_distance
                  << " entropy=" << row.entropy << "\n";
      progress->flush();
    }
  }
  return result;
}

}  // namespace ff::agent
