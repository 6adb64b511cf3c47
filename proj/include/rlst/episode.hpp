#pragma once
// The decision process: per-step input composition, READ/WRITE selection
// with feasibility forcing, index tracking, reward emission, and teacher
// forcing. Produces rollouts for training and token streams for inference.
//
// Index convention: i counts source tokens fed to the network so far; the
// initial feed of x[0] sets i = 1 before the first action. A READ taken at a
// step with i >= |x| reads padding and is penalized.

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "rlst/metrics.hpp"
#include "rlst/network.hpp"
#include "rlst/rng.hpp"
#include "rlst/vocab.hpp"

namespace rlst {

enum class Action : uint8_t { kRead = 0, kWrite = 1 };

struct Episode {
  std::vector<int32_t> x;  // ends with EOS
  std::vector<int32_t> y;  // ends with EOS; empty at inference

  void validate() const {
    if (x.empty() || x.back() != kEosId)
      throw std::invalid_argument("episode: source must end with EOS");
    if (y.empty() || y.back() != kEosId)
      throw std::invalid_argument("episode: target must end with EOS");
    for (size_t k = 0; k + 1 < x.size(); ++k)
      if (x[k] == kPadId) throw std::invalid_argument("episode: PAD inside source");
    for (size_t k = 0; k + 1 < y.size(); ++k)
      if (y[k] == kPadId) throw std::invalid_argument("episode: PAD inside target");
  }
};

enum class PrevAction { kStart, kRead, kWrite };

struct StepInput {
  int32_t src_tok;
  int32_t trg_tok;
};

// i counts tokens already read; reads past the end yield PAD.
inline StepInput compose_input(PrevAction prev, const std::vector<int32_t>& x, int32_t i,
                               int32_t z_prev) {
  switch (prev) {
    case PrevAction::kStart:
      return {x[0], kNullId};
    case PrevAction::kRead:
      return {i < int32_t(x.size()) ? x[size_t(i)] : kPadId, kNullId};
    case PrevAction::kWrite:
      return {kNullId, z_prev};
  }
  return {kNullId, kNullId};
}

struct ActionFeasibility {
  int64_t steps_remaining = 0;
  int64_t writes_remaining = 0;
  bool read_masked = false;
};

struct ActionChoice {
  Action action;
  bool forced = false;
  bool explored = false;
};

// Greedy in the two value outputs with ties broken toward READ; with
// probability eps the other action is taken. Forcing (horizon or mask)
// overrides exploration.
inline ActionChoice select_action(double q_read, double q_write, const ActionFeasibility& f,
                                  double eps, Rng& rng) {
  if (f.writes_remaining > f.steps_remaining)
    throw std::logic_error("select_action: writes_remaining exceeds steps_remaining");
  if (f.steps_remaining == f.writes_remaining) return {Action::kWrite, true, false};
  if (f.read_masked) return {Action::kWrite, true, false};
  Action greedy = q_read >= q_write ? Action::kRead : Action::kWrite;
  if (eps > 0.0 && rng.bernoulli(eps)) {
    Action other = greedy == Action::kRead ? Action::kWrite : Action::kRead;
    return {other, false, true};
  }
  return {greedy, false, false};
}

template <typename T>
struct StepRecord {
  int32_t t = 0;
  Action action = Action::kRead;
  int32_t i_before = 0;
  int32_t j_before = 0;
  bool forced = false;
  bool explored = false;
  int32_t src_fed = kNullId;  // the input pair shown at this step
  int32_t trg_fed = kNullId;

  ad::Tensor<T> logits;   // live tape handles for the loss pass
  ad::Tensor<T> q_read;
  ad::Tensor<T> q_write;
  ad::Tensor<T> ce;       // cross-entropy vs y_j, WRITE steps only

  double q_read_v = 0.0;  // recorded plain values feeding the targets
  double q_write_v = 0.0;
  std::optional<double> reward;
  std::optional<int32_t> reward_index;
  int32_t emitted = -1;   // argmax token at WRITE steps
};

template <typename T>
struct Rollout {
  const Episode* episode = nullptr;  // null for inference rollouts
  int64_t src_len = 0;               // |x| including EOS
  std::vector<StepRecord<T>> steps;
  std::vector<int32_t> z;
  bool terminal = false;
};

struct RolloutHyper {
  double eps = 0.3;
  double teacher_forcing = 1.0;
  double m_penalty = 3.0;
};

namespace detail {

template <typename T>
int32_t argmax_token(std::span<const T> logits) {
  int32_t best = 0;
  for (int32_t k = 1; k < int32_t(logits.size()); ++k)
    if (logits[size_t(k)] > logits[size_t(best)]) best = k;
  return best;
}

}  // namespace detail

// Runs the training decision process until exactly |y| WRITEs occur, within
// the |x| + |y| step horizon. The tape behind `bind` accumulates the whole
// unrolled episode.
template <typename T>
Rollout<T> rollout_train(const RLSTNet<T>& net, const NetBinding<T>& bind, const Episode& episode,
                         const RolloutHyper& hyper, Rng& rng) {
  episode.validate();
  ad::Tape<T>& tape = *bind.tape;
  const int64_t nx = int64_t(episode.x.size());
  const int64_t ny = int64_t(episode.y.size());
  const int64_t horizon = nx + ny;

  Rollout<T> out;
  out.episode = &episode;
  out.src_len = nx;
  out.steps.reserve(size_t(horizon));

  const bool teacher = rng.bernoulli(hyper.teacher_forcing);
  auto h = initial_hidden(net, bind);
  StepInput fed = compose_input(PrevAction::kStart, episode.x, 0, kNullId);
  int32_t i = 1;  // x[0] was just fed
  int32_t j = 0;
  int32_t reward_count = 0;

  for (int32_t t = 0; j < ny; ++t) {
    auto net_out = forward_step(net, bind, fed.src_tok, fed.trg_tok, h, Mode::kTrain, rng);
    h = net_out.hidden;

    StepRecord<T> rec;
    rec.t = t;
    rec.i_before = i;
    rec.j_before = j;
    rec.src_fed = fed.src_tok;
    rec.trg_fed = fed.trg_tok;
    rec.logits = net_out.logits;
    rec.q_read = net_out.q_read;
    rec.q_write = net_out.q_write;
    rec.q_read_v = double(net_out.q_read.scalar());
    rec.q_write_v = double(net_out.q_write.scalar());

    ActionFeasibility feas{horizon - t, ny - j, false};
    auto choice = select_action(rec.q_read_v, rec.q_write_v, feas, hyper.eps, rng);
    rec.action = choice.action;
    rec.forced = choice.forced;
    rec.explored = choice.explored;

    if (choice.action == Action::kRead) {
      if (i >= nx) {
        rec.reward = -hyper.m_penalty;
        rec.reward_index = reward_count++;
      }
      fed = compose_input(PrevAction::kRead, episode.x, i, kNullId);
      i += 1;
    } else {
      const int32_t target = episode.y[size_t(j)];
      rec.ce = tape.softmax_cross_entropy(net_out.logits, target);
      rec.reward = -double(rec.ce.scalar());
      rec.reward_index = reward_count++;
      rec.emitted = detail::argmax_token(tape.value(net_out.logits));
      out.z.push_back(rec.emitted);
      const int32_t fed_back = teacher ? target : rec.emitted;
      fed = compose_input(PrevAction::kWrite, episode.x, i, fed_back);
      j += 1;
    }
    out.steps.push_back(rec);
  }

  out.terminal = true;
  return out;
}

struct InferCaps {
  int64_t max_out = 0;     // 0: defaults to 2|x| + 16
  bool mask_read = true;   // off: reads allowed up to |x| + 8 before masking
};

// Greedy on-line decoding: READ is masked once the whole source is fed, the
// stream ends when EOS is written or the cap is hit (EOS then appended).
template <typename T>
Rollout<T> rollout_infer(const RLSTNet<T>& net, const NetBinding<T>& bind,
                         const std::vector<int32_t>& x, InferCaps caps = {}) {
  if (x.empty() || x.back() != kEosId)
    throw std::invalid_argument("rollout_infer: source must end with EOS");
  const int64_t nx = int64_t(x.size());
  const int64_t max_out = caps.max_out > 0 ? caps.max_out : 2 * nx + 16;
  const int64_t read_cap = caps.mask_read ? nx : nx + 8;

  Rollout<T> out;
  out.src_len = nx;
  Rng rng(0);  // eval mode draws nothing

  auto h = initial_hidden(net, bind);
  StepInput fed = compose_input(PrevAction::kStart, x, 0, kNullId);
  int32_t i = 1;
  int32_t j = 0;

  for (int32_t t = 0;; ++t) {
    auto net_out = forward_step(net, bind, fed.src_tok, fed.trg_tok, h, Mode::kEval, rng);
    h = net_out.hidden;

    StepRecord<T> rec;
    rec.t = t;
    rec.i_before = i;
    rec.j_before = j;
    rec.src_fed = fed.src_tok;
    rec.trg_fed = fed.trg_tok;
    rec.logits = net_out.logits;
    rec.q_read = net_out.q_read;
    rec.q_write = net_out.q_write;
    rec.q_read_v = double(net_out.q_read.scalar());
    rec.q_write_v = double(net_out.q_write.scalar());

    ActionFeasibility feas{std::numeric_limits<int64_t>::max(), 0, i >= read_cap};
    auto choice = select_action(rec.q_read_v, rec.q_write_v, feas, 0.0, rng);
    rec.action = choice.action;
    rec.forced = choice.forced;

    if (choice.action == Action::kRead) {
      fed = compose_input(PrevAction::kRead, x, i, kNullId);
      i += 1;
      out.steps.push_back(rec);
    } else {
      const int32_t tok = detail::argmax_token(bind.tape->value(net_out.logits));
      rec.emitted = tok;
      out.z.push_back(tok);
      out.steps.push_back(rec);
      j += 1;
      if (tok == kEosId) break;
      if (j >= max_out) {
        out.z.push_back(kEosId);
        break;
      }
      fed = compose_input(PrevAction::kWrite, x, i, tok);
    }
  }

  out.terminal = true;
  return out;
}

template <typename T>
ActionTrace to_action_trace(const Rollout<T>& r) {
  ActionTrace t;
  t.src_len = int32_t(r.src_len - 1);  // exclude EOS
  t.actions.reserve(r.steps.size());
  for (const auto& s : r.steps) t.actions.push_back(uint8_t(s.action));
  return t;
}

}  // namespace rlst
