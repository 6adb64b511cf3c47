#pragma once
// The approximator: source/target embeddings, input dense layer, a stack of
// GRU layers with residual connections, output dense layer, and a linear
// head emitting token logits plus the two action-value outputs.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "rlst/optim.hpp"
#include "rlst/rng.hpp"
#include "rlst/tensor.hpp"

namespace rlst {

struct RLSTNetConfig {
  int32_t src_vocab_size = 0;
  int32_t trg_vocab_size = 0;
  int32_t emb_dim = 256;
  int32_t hidden_dim = 512;
  int32_t num_gru_layers = 4;
  double leaky_slope = 0.01;
  double dropout_in = 0.2;
  double dropout_out = 0.5;

  void validate() const {
    if (src_vocab_size < 4 || trg_vocab_size < 4)
      throw std::invalid_argument("network: vocab sizes must be >= 4 to host reserved tokens");
    if (emb_dim < 1 || hidden_dim < 1 || num_gru_layers < 1)
      throw std::invalid_argument("network: dimensions must be >= 1");
    if (dropout_in < 0.0 || dropout_in >= 1.0 || dropout_out < 0.0 || dropout_out >= 1.0)
      throw std::invalid_argument("network: dropout probabilities must be in [0, 1)");
  }
};

enum class Mode { kTrain, kEval };

// Parameter slot indices for one GRU layer. The cell follows the
// reset-gate-inside-candidate convention:
//   u  = sigmoid(Wu x + Uu h + bu)
//   r  = sigmoid(Wr x + Ur h + br)
//   n  = tanh(Wn x + r .* (Un h + bn) + bxn)
//   h' = (1 - u) .* h + u .* n
struct GruSlots {
  int wu, wr, wn, uu, ur, un, bu, br, bn, bxn;
};

template <typename T>
struct RLSTNet {
  RLSTNetConfig cfg;
  std::vector<Param<T>> params;
  int src_emb = -1, trg_emb = -1;
  int in_w = -1, in_b = -1;
  std::vector<GruSlots> gru;
  int out_w = -1, out_b = -1;
  int head_w = -1, head_b = -1;

  size_t num_scalars() const {
    size_t n = 0;
    for (const auto& p : params) n += p.data.size();
    return n;
  }
};

namespace detail {

template <typename T>
int add_param(RLSTNet<T>& net, const std::string& name, ad::Shape shape) {
  net.params.push_back({name, shape, std::vector<T>(size_t(shape.size()), T(0))});
  return int(net.params.size()) - 1;
}

}  // namespace detail

// Embeddings are standard normal; dense/GRU/head weights are uniform in
// +-1/sqrt(fan_in); biases start at zero. Fully reproducible from the seed.
template <typename T>
RLSTNet<T> init_network(const RLSTNetConfig& cfg, uint64_t seed) {
  cfg.validate();
  RLSTNet<T> net;
  net.cfg = cfg;
  const int32_t e = cfg.emb_dim, h = cfg.hidden_dim;

  net.src_emb = detail::add_param(net, "src_emb", ad::mat_shape(cfg.src_vocab_size, e));
  net.trg_emb = detail::add_param(net, "trg_emb", ad::mat_shape(cfg.trg_vocab_size, e));
  net.in_w = detail::add_param(net, "in.w", ad::mat_shape(h, 2 * e));
  net.in_b = detail::add_param(net, "in.b", ad::vec_shape(h));
  for (int l = 0; l < cfg.num_gru_layers; ++l) {
    const std::string p = "gru" + std::to_string(l) + ".";
    GruSlots s;
    s.wu = detail::add_param(net, p + "wu", ad::mat_shape(h, h));
    s.wr = detail::add_param(net, p + "wr", ad::mat_shape(h, h));
    s.wn = detail::add_param(net, p + "wn", ad::mat_shape(h, h));
    s.uu = detail::add_param(net, p + "uu", ad::mat_shape(h, h));
    s.ur = detail::add_param(net, p + "ur", ad::mat_shape(h, h));
    s.un = detail::add_param(net, p + "un", ad::mat_shape(h, h));
    s.bu = detail::add_param(net, p + "bu", ad::vec_shape(h));
    s.br = detail::add_param(net, p + "br", ad::vec_shape(h));
    s.bn = detail::add_param(net, p + "bn", ad::vec_shape(h));
    s.bxn = detail::add_param(net, p + "bxn", ad::vec_shape(h));
    net.gru.push_back(s);
  }
  net.out_w = detail::add_param(net, "out.w", ad::mat_shape(h, h));
  net.out_b = detail::add_param(net, "out.b", ad::vec_shape(h));
  net.head_w = detail::add_param(net, "head.w", ad::mat_shape(cfg.trg_vocab_size + 2, h));
  net.head_b = detail::add_param(net, "head.b", ad::vec_shape(cfg.trg_vocab_size + 2));

  Rng rng = derive_rng(seed, 0x1217);
  for (auto& v : net.params[size_t(net.src_emb)].data) v = T(rng.normal());
  for (auto& v : net.params[size_t(net.trg_emb)].data) v = T(rng.normal());
  auto uniform_init = [&](int slot, int fan_in) {
    const double bound = 1.0 / std::sqrt(double(fan_in));
    for (auto& v : net.params[size_t(slot)].data) v = T(rng.uniform(-bound, bound));
  };
  uniform_init(net.in_w, 2 * e);
  for (const auto& s : net.gru) {
    uniform_init(s.wu, h);
    uniform_init(s.wr, h);
    uniform_init(s.wn, h);
    uniform_init(s.uu, h);
    uniform_init(s.ur, h);
    uniform_init(s.un, h);
  }
  uniform_init(net.out_w, h);
  uniform_init(net.head_w, h);
  return net;
}

// Parameters registered as leaves on one tape, one tensor per slot.
template <typename T>
struct NetBinding {
  ad::Tape<T>* tape = nullptr;
  std::vector<ad::Tensor<T>> leaf;
};

template <typename T>
NetBinding<T> bind_net(const RLSTNet<T>& net, ad::Tape<T>& tape) {
  NetBinding<T> b;
  b.tape = &tape;
  b.leaf.reserve(net.params.size());
  for (size_t i = 0; i < net.params.size(); ++i) {
    const auto& p = net.params[i];
    b.leaf.push_back(tape.leaf(std::span<const T>(p.data), p.shape, int32_t(i)));
  }
  return b;
}

// One hidden vector per GRU layer, carried across decision steps.
template <typename T>
using HiddenState = std::vector<ad::Tensor<T>>;

template <typename T>
HiddenState<T> initial_hidden(const RLSTNet<T>& net, const NetBinding<T>& bind) {
  HiddenState<T> h;
  for (int l = 0; l < net.cfg.num_gru_layers; ++l)
    h.push_back(bind.tape->constant_fill(T(0), ad::vec_shape(net.cfg.hidden_dim)));
  return h;
}

template <typename T>
struct StepOut {
  ad::Tensor<T> logits;
  ad::Tensor<T> q_read;
  ad::Tensor<T> q_write;
  HiddenState<T> hidden;
};

template <typename T>
StepOut<T> forward_step(const RLSTNet<T>& net, const NetBinding<T>& bind, int32_t src_tok,
                        int32_t trg_tok, const HiddenState<T>& h, Mode mode, Rng& rng) {
  if (int(h.size()) != net.cfg.num_gru_layers)
    throw std::invalid_argument("forward_step: hidden state has " + std::to_string(h.size()) +
                                " layers, network has " + std::to_string(net.cfg.num_gru_layers));
  ad::Tape<T>& tape = *bind.tape;
  const auto& L = bind.leaf;
  const bool train = mode == Mode::kTrain;

  auto dense = [&](int w, int b, ad::Tensor<T> x) {
    return tape.add(tape.matmul(L[size_t(w)], x), L[size_t(b)]);
  };

  auto x = tape.concat(tape.embedding_row(L[size_t(net.src_emb)], src_tok),
                       tape.embedding_row(L[size_t(net.trg_emb)], trg_tok));
  x = tape.leaky_relu(dense(net.in_w, net.in_b, x), net.cfg.leaky_slope);
  if (train && net.cfg.dropout_in > 0.0) x = tape.dropout(x, 1.0 - net.cfg.dropout_in, rng);

  StepOut<T> out;
  out.hidden.reserve(net.gru.size());
  for (size_t l = 0; l < net.gru.size(); ++l) {
    const GruSlots& s = net.gru[l];
    auto hp = h[l];
    auto u = tape.sigmoid(tape.add(dense(s.wu, s.bu, x), tape.matmul(L[size_t(s.uu)], hp)));
    auto r = tape.sigmoid(tape.add(dense(s.wr, s.br, x), tape.matmul(L[size_t(s.ur)], hp)));
    auto rec = tape.hadamard(r, tape.add(tape.matmul(L[size_t(s.un)], hp), L[size_t(s.bn)]));
    auto n = tape.tanh(tape.add(tape.add(tape.matmul(L[size_t(s.wn)], x), rec), L[size_t(s.bxn)]));
    // h' = (1-u).*h + u.*n written as h + u.*(n - h)
    auto hn = tape.add(hp, tape.hadamard(u, tape.sub(n, hp)));
    out.hidden.push_back(hn);
    x = tape.add(x, hn);  // residual stream
  }

  x = tape.leaky_relu(dense(net.out_w, net.out_b, x), net.cfg.leaky_slope);
  if (train && net.cfg.dropout_out > 0.0) x = tape.dropout(x, 1.0 - net.cfg.dropout_out, rng);

  auto head = dense(net.head_w, net.head_b, x);
  const int32_t v = net.cfg.trg_vocab_size;
  out.logits = tape.slice(head, 0, v);
  out.q_read = tape.slice(head, v, 1);
  out.q_write = tape.slice(head, v + 1, 1);
  return out;
}

}  // namespace rlst
