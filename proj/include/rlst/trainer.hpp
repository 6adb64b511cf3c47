#pragma once
// Q-value targets from rollouts, the two training losses, the running loss
// normalizers with the rising estimation-loss weight, and the minibatch
// optimization step.

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "rlst/episode.hpp"
#include "rlst/optim.hpp"
#include "rlst/parallel.hpp"

namespace rlst {

struct QTargets {
  struct Row {
    double value_target = 0.0;    // for the taken action's head
    bool is_write = false;
    int32_t token_target = -1;    // y_j on WRITE steps
  };
  std::vector<Row> rows;
};

// Backward recursion over the recorded trajectory. Bootstrap values are the
// recorded next-step head outputs (same network, same trajectory, plain
// numbers). The discount applies exactly where a reward was emitted; the
// rewardless READ branch passes the bootstrap through undiscounted.
template <typename T>
QTargets build_q_targets(const Rollout<T>& r, double gamma, double m_penalty) {
  if (!r.terminal) throw std::invalid_argument("build_q_targets: rollout is not terminal");
  const size_t n = r.steps.size();
  QTargets out;
  out.rows.resize(n);
  double boot = 0.0;  // max of the next step's heads; unused at the final step
  for (size_t idx = n; idx-- > 0;) {
    const auto& s = r.steps[idx];
    auto& row = out.rows[idx];
    row.is_write = s.action == Action::kWrite;
    if (row.is_write) row.token_target = r.episode->y[size_t(s.j_before)];
    if (idx == n - 1) {
      // final step: the |y|-th WRITE, no bootstrap
      row.value_target = *s.reward;
    } else if (s.reward.has_value()) {
      row.value_target = *s.reward + gamma * boot;
    } else {
      row.value_target = boot;
    }
    if (s.action == Action::kRead && s.reward.has_value() &&
        std::abs(*s.reward + m_penalty) > 1e-9)
      throw std::logic_error("build_q_targets: over-read reward does not match the penalty");
    boot = std::max(s.q_read_v, s.q_write_v);
  }
  return out;
}

// L^M: mean cross-entropy over WRITE steps (the nodes recorded with the
// rewards). L^E: mean squared error of the taken action's head against its
// target over all steps. Targets enter as constants.
template <typename T>
std::pair<ad::Tensor<T>, ad::Tensor<T>> episode_losses(ad::Tape<T>& tape, const Rollout<T>& r,
                                                       const QTargets& targets) {
  if (r.steps.size() != targets.rows.size())
    throw std::invalid_argument("episode_losses: targets misaligned with rollout");
  ad::Tensor<T> ce_sum, er_sum;
  int64_t writes = 0;
  for (size_t t = 0; t < r.steps.size(); ++t) {
    const auto& s = r.steps[t];
    const auto& row = targets.rows[t];
    if (row.is_write) {
      ce_sum = writes == 0 ? s.ce : tape.add(ce_sum, s.ce);
      ++writes;
    }
    auto head = s.action == Action::kRead ? s.q_read : s.q_write;
    auto err = tape.mse(head, row.value_target);
    er_sum = t == 0 ? err : tape.add(er_sum, err);
  }
  if (writes == 0) throw std::logic_error("episode_losses: rollout has no WRITE steps");
  auto lm = tape.scale(ce_sum, T(1.0 / double(writes)));
  auto le = tape.scale(er_sum, T(1.0 / double(r.steps.size())));
  return {lm, le};
}

struct LossNormalizerState {
  int64_t n = 0;
  double bar_m = 0.0;
  double bar_e = 0.0;
  double rho = 0.99;
};

// bar_L <- w_n bar_L + (1 - w_n) L with w_n = rho (1 - rho^(n-1)) / (1 - rho^n):
// an arithmetic mean for small n turning into an exponential moving average.
inline void normalizer_update(LossNormalizerState& s, double loss_m, double loss_e) {
  s.n += 1;
  const double w = s.rho * (1.0 - std::pow(s.rho, double(s.n - 1))) /
                   (1.0 - std::pow(s.rho, double(s.n)));
  s.bar_m = w * s.bar_m + (1.0 - w) * loss_m;
  s.bar_e = w * s.bar_e + (1.0 - w) * loss_e;
}

inline double eta(int64_t n, int64_t total, double eta_min, double eta_max) {
  if (total <= 0) throw std::invalid_argument("eta: total minibatch count must be positive");
  return eta_max - (eta_max - eta_min) * std::exp(-3.0 * double(n) / double(total));
}

inline constexpr double kNormalizerFloor = 1e-8;

inline double aggregate_loss(double loss_m, double loss_e, const LossNormalizerState& s,
                             double eta_val) {
  if (s.n < 1) throw std::logic_error("aggregate_loss: normalizers not yet initialized");
  return loss_m / std::max(s.bar_m, kNormalizerFloor) +
         eta_val * loss_e / std::max(s.bar_e, kNormalizerFloor);
}

// Tape form of the same expression; gradient flows only through the losses.
template <typename T>
ad::Tensor<T> aggregate_loss(ad::Tape<T>& tape, ad::Tensor<T> lm, ad::Tensor<T> le,
                             const LossNormalizerState& s, double eta_val) {
  if (s.n < 1) throw std::logic_error("aggregate_loss: normalizers not yet initialized");
  return tape.add(tape.scale(lm, T(1.0 / std::max(s.bar_m, kNormalizerFloor))),
                  tape.scale(le, T(eta_val / std::max(s.bar_e, kNormalizerFloor))));
}

struct MetricsRow {
  int64_t epoch = 0;
  int64_t n = 0;
  double loss_m = 0.0;
  double loss_e = 0.0;
  double bar_m = 0.0;
  double bar_e = 0.0;
  double eta = 0.0;
  double loss = 0.0;
  double mean_reward = 0.0;
  double mean_read_lead = 0.0;
  double grad_norm = 0.0;  // pre-clip; diagnostic only, not a CSV column
  std::optional<double> val_bleu;
};

struct TrainHyper {
  double gamma = 0.9;
  double m_penalty = 3.0;
  double eps = 0.3;
  double teacher_forcing = 1.0;
  double clip_norm = 10.0;
};

// Owns the per-minibatch pipeline: parallel rollouts and backward passes on
// per-episode tapes, batch-ordered gradient reduction, then one optimizer
// step. All randomness is derived from (seed, epoch, episode slot), so
// results do not depend on thread scheduling.
template <typename T>
class Trainer {
 public:
  Trainer(RLSTNet<T>& net, const AdamConfig& adam_cfg, const TrainHyper& hyper, double rho,
          int64_t total_minibatches, double eta_min, double eta_max, uint64_t seed,
          int threads = 1)
      : net_(net),
        adam_cfg_(adam_cfg),
        hyper_(hyper),
        total_minibatches_(total_minibatches),
        eta_min_(eta_min),
        eta_max_(eta_max),
        seed_(seed),
        threads_(threads),
        adam_(AdamState<T>::init(net.params)),
        grads_(make_grad_buffer(net.params)) {
    norm_.rho = rho;
  }

  MetricsRow train_minibatch(const std::vector<Episode>& episodes,
                             const std::vector<int32_t>& batch, int64_t epoch,
                             int64_t slot_base) {
    const int64_t b = int64_t(batch.size());
    if (b == 0) throw std::invalid_argument("train_minibatch: empty batch");
    if (slots_.size() < size_t(b)) slots_.resize(size_t(b));
    if (thread_grads_.size() < size_t(threads_)) {
      thread_grads_.resize(size_t(threads_));
      for (auto& g : thread_grads_) g = make_grad_buffer(net_.params);
    }

    // rollouts, targets and loss nodes; tapes stay alive for the backward
    parallel_chunks(b, threads_, [&](int64_t, int64_t begin, int64_t end) {
      for (int64_t e = begin; e < end; ++e) {
        Slot& slot = slots_[size_t(e)];
        slot.tape.reset();
        auto bind = bind_net(net_, slot.tape);
        Rng rng = derive_rng(seed_, uint64_t(epoch), uint64_t(slot_base + e));
        const Episode& ep = episodes[size_t(batch[size_t(e)])];
        slot.rollout = rollout_train(net_, bind, ep,
                                     {hyper_.eps, hyper_.teacher_forcing, hyper_.m_penalty}, rng);
        auto targets = build_q_targets(slot.rollout, hyper_.gamma, hyper_.m_penalty);
        std::tie(slot.lm, slot.le) = episode_losses(slot.tape, slot.rollout, targets);
        slot.lm_v = double(slot.lm.scalar());
        slot.le_v = double(slot.le.scalar());
      }
    });

    // batch means in episode order, then the normalizer step
    MetricsRow row;
    double sum_m = 0.0, sum_e = 0.0, sum_reward = 0.0, sum_lead = 0.0;
    int64_t n_rewards = 0, n_steps = 0;
    for (int64_t e = 0; e < b; ++e) {
      const Slot& slot = slots_[size_t(e)];
      sum_m += slot.lm_v;
      sum_e += slot.le_v;
      for (const auto& s : slot.rollout.steps) {
        if (s.reward) {
          sum_reward += *s.reward;
          ++n_rewards;
        }
        sum_lead += double(s.i_before - s.j_before);
        ++n_steps;
      }
    }
    const double loss_m = sum_m / double(b);
    const double loss_e = sum_e / double(b);
    if (!std::isfinite(loss_m) || !std::isfinite(loss_e))
      throw std::runtime_error("train: non-finite loss at minibatch " +
                               std::to_string(norm_.n + 1));
    normalizer_update(norm_, loss_m, loss_e);
    const double eta_val = eta(norm_.n, total_minibatches_, eta_min_, eta_max_);

    // backward: each episode contributes lm/(B bar_m) + eta le/(B bar_e)
    const double cm = 1.0 / (double(b) * std::max(norm_.bar_m, kNormalizerFloor));
    const double ce = eta_val / (double(b) * std::max(norm_.bar_e, kNormalizerFloor));
    parallel_chunks(b, threads_, [&](int64_t k, int64_t begin, int64_t end) {
      for (int64_t e = begin; e < end; ++e) {
        Slot& slot = slots_[size_t(e)];
        auto agg = slot.tape.add(slot.tape.scale(slot.lm, T(cm)), slot.tape.scale(slot.le, T(ce)));
        slot.tape.backward(agg);
        slot.tape.export_param_grads(thread_grads_[size_t(k)]);
      }
    });
    zero_grads(grads_);
    for (int k = 0; k < threads_; ++k) {
      auto& tg = thread_grads_[size_t(k)];
      for (size_t p = 0; p < grads_.size(); ++p) {
        for (size_t v = 0; v < grads_[p].size(); ++v) grads_[p][v] += tg[p][v];
        for (auto& g : tg[p]) g = T(0);
      }
    }

    row.grad_norm = clip_global_norm(grads_, hyper_.clip_norm);
    adam_step(net_.params, grads_, adam_, adam_cfg_);

    row.n = norm_.n;
    row.loss_m = loss_m;
    row.loss_e = loss_e;
    row.bar_m = norm_.bar_m;
    row.bar_e = norm_.bar_e;
    row.eta = eta_val;
    row.loss = aggregate_loss(loss_m, loss_e, norm_, eta_val);
    row.mean_reward = n_rewards > 0 ? sum_reward / double(n_rewards) : 0.0;
    row.mean_read_lead = n_steps > 0 ? sum_lead / double(n_steps) : 0.0;
    return row;
  }

  const LossNormalizerState& normalizer() const { return norm_; }
  LossNormalizerState& normalizer() { return norm_; }
  AdamState<T>& adam() { return adam_; }
  int64_t total_minibatches() const { return total_minibatches_; }

 private:
  struct Slot {
    ad::Tape<T> tape;
    Rollout<T> rollout;
    ad::Tensor<T> lm, le;
    double lm_v = 0.0, le_v = 0.0;
  };

  RLSTNet<T>& net_;
  AdamConfig adam_cfg_;
  TrainHyper hyper_;
  int64_t total_minibatches_;
  double eta_min_, eta_max_;
  uint64_t seed_;
  int threads_;
  AdamState<T> adam_;
  LossNormalizerState norm_;
  GradBuffer<T> grads_;
  std::vector<GradBuffer<T>> thread_grads_;
  std::vector<Slot> slots_;
};

}  // namespace rlst
