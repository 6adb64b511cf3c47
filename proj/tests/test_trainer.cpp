#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "rlst/checkpoint.hpp"
#include "rlst/run.hpp"
#include "rlst/trainer.hpp"

using namespace rlst;
namespace ad = rlst::ad;

namespace {

RLSTNetConfig tiny_cfg(int32_t vocab = 6, int32_t hidden = 4, int32_t layers = 2) {
  RLSTNetConfig cfg;
  cfg.src_vocab_size = vocab;
  cfg.trg_vocab_size = vocab;
  cfg.emb_dim = 3;
  cfg.hidden_dim = hidden;
  cfg.num_gru_layers = layers;
  cfg.dropout_in = 0.0;
  cfg.dropout_out = 0.0;
  return cfg;
}

// Synthetic rollout builder for target tests: no network involved, only the
// recorded plain numbers matter to build_q_targets.
struct FakeRollout {
  Episode episode;
  Rollout<double> rollout;

  // actions: 0 = READ, 1 = WRITE; q values and write losses supplied
  FakeRollout(int nx, const std::vector<int>& actions, const std::vector<double>& q_read,
              const std::vector<double>& q_write, const std::vector<double>& write_loss) {
    int ny = 0;
    for (int a : actions) ny += a;
    for (int k = 0; k + 1 < nx; ++k) episode.x.push_back(4);
    episode.x.push_back(kEosId);
    for (int k = 0; k + 1 < ny; ++k) episode.y.push_back(5);
    episode.y.push_back(kEosId);

    rollout.episode = &episode;
    rollout.src_len = nx;
    rollout.terminal = true;
    int i = 1, j = 0, rk = 0;
    size_t w = 0;
    for (size_t t = 0; t < actions.size(); ++t) {
      StepRecord<double> s;
      s.t = int32_t(t);
      s.i_before = i;
      s.j_before = j;
      s.q_read_v = q_read[t];
      s.q_write_v = q_write[t];
      if (actions[t] == 0) {
        s.action = Action::kRead;
        if (i >= nx) {
          s.reward = -3.0;
          s.reward_index = rk++;
        }
        ++i;
      } else {
        s.action = Action::kWrite;
        s.reward = -write_loss[w++];
        s.reward_index = rk++;
        s.emitted = 5;
        rollout.z.push_back(5);
        ++j;
      }
      rollout.steps.push_back(s);
    }
  }
};

// Literal branch-by-branch evaluation of the recursive target definition,
// written forward as in the equations rather than as a reverse sweep.
std::vector<double> target_oracle(const Rollout<double>& r, int nx, int ny, double gamma,
                                  double m_penalty) {
  const size_t n = r.steps.size();
  std::vector<double> out(n);
  for (size_t t = 0; t < n; ++t) {
    const auto& s = r.steps[t];
    const double boot =
        t + 1 < n ? std::max(r.steps[t + 1].q_read_v, r.steps[t + 1].q_write_v) : 0.0;
    if (s.action == Action::kRead) {
      if (s.i_before >= nx)
        out[t] = -m_penalty + gamma * boot;
      else
        out[t] = boot;
    } else {
      const double loss = -*s.reward;
      if (s.j_before < ny - 1)
        out[t] = -loss + gamma * boot;
      else
        out[t] = -loss;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("q targets: final write and penalized read substitutions") {
  // single WRITE with a perfectly predicted token: target 0
  FakeRollout perfect(1, {1}, {0.0}, {0.0}, {0.0});
  auto t1 = build_q_targets(perfect.rollout, 0.9, 3.0);
  REQUIRE(t1.rows.size() == 1);
  CHECK(t1.rows[0].value_target == 0.0);
  CHECK(t1.rows[0].is_write);
  CHECK(t1.rows[0].token_target == kEosId);

  // READ past the end with the next step's heads at zero: -M + gamma*0 = -3
  FakeRollout overread(1, {0, 1}, {0.5, 0.0}, {0.1, 0.0}, {0.7});
  auto t2 = build_q_targets(overread.rollout, 0.9, 3.0);
  REQUIRE(t2.rows.size() == 2);
  CHECK(t2.rows[0].value_target == doctest::Approx(-3.0));
  CHECK_FALSE(t2.rows[0].is_write);
  CHECK(t2.rows[1].value_target == doctest::Approx(-0.7));
}

TEST_CASE("q targets match the branch-by-branch oracle exactly") {
  Rng rng(31);
  for (int rep = 0; rep < 200; ++rep) {
    // random consistent 6-step action pattern: last action is WRITE
    int steps = 2 + int(rng.index(5));
    std::vector<int> actions(size_t(steps), 0);
    actions.back() = 1;
    int ny = 1;
    for (int t = 0; t + 1 < steps; ++t) {
      actions[size_t(t)] = rng.bernoulli(0.5) ? 1 : 0;
      ny += actions[size_t(t)];
    }
    int nx = steps - ny;
    if (nx < 1) {
      nx = 1;  // keep |x| >= 1; extra writes just mean a shorter read prefix
    }
    std::vector<double> qr(static_cast<size_t>(steps)), qw(static_cast<size_t>(steps)), wl;
    for (auto& v : qr) v = rng.uniform(-2.0, 2.0);
    for (auto& v : qw) v = rng.uniform(-2.0, 2.0);
    for (int t = 0; t < steps; ++t)
      if (actions[size_t(t)]) wl.push_back(rng.uniform(0.0, 3.0));

    FakeRollout fake(nx, actions, qr, qw, wl);
    auto got = build_q_targets(fake.rollout, 0.9, 3.0);
    auto want = target_oracle(fake.rollout, nx, ny, 0.9, 3.0);
    REQUIRE(got.rows.size() == want.size());
    for (size_t t = 0; t < want.size(); ++t)
      CHECK(std::abs(got.rows[t].value_target - want[t]) <= 1e-12);
  }

  FakeRollout unfinished(2, {0, 1}, {0.0, 0.0}, {0.0, 0.0}, {0.5});
  unfinished.rollout.terminal = false;
  CHECK_THROWS_AS(build_q_targets(unfinished.rollout, 0.9, 3.0), std::invalid_argument);
}

TEST_CASE("episode losses: perfect, single-step, and recomputation oracle") {
  // build a rollout through a real network so the tape handles are live
  auto net = init_network<double>(tiny_cfg(), 3);
  ad::Tape<double> tape;
  auto bind = bind_net(net, tape);
  Episode ep;
  ep.x = {4, 5, kEosId};
  ep.y = {5, 4, kEosId};
  Rng rng(7);
  auto r = rollout_train(net, bind, ep, {0.3, 1.0, 3.0}, rng);
  auto targets = build_q_targets(r, 0.9, 3.0);
  auto [lm, le] = episode_losses(tape, r, targets);

  // direct per-step recomputation from the recorded values
  double ce_sum = 0.0;
  int64_t writes = 0;
  double er_sum = 0.0;
  for (size_t t = 0; t < r.steps.size(); ++t) {
    const auto& s = r.steps[t];
    if (s.action == Action::kWrite) {
      ce_sum += -*s.reward;
      ++writes;
    }
    double chosen = s.action == Action::kRead ? s.q_read_v : s.q_write_v;
    double d = chosen - targets.rows[t].value_target;
    er_sum += d * d;
  }
  CHECK(std::abs(lm.scalar() - ce_sum / double(writes)) < 1e-12);
  CHECK(std::abs(le.scalar() - er_sum / double(r.steps.size())) < 1e-12);

  // single synthetic step: q_write 1 vs target -1 -> L_E = 4
  ad::Tape<double> t2;
  FakeRollout one(1, {1}, {0.0}, {1.0}, {0.3});
  std::vector<double> logits = {0.0, 0.0, 10.0, 0.0, 0.0, 0.0};  // argmax = EOS
  auto lt = t2.constant(std::span<const double>(logits), ad::vec_shape(6));
  one.rollout.steps[0].ce = t2.softmax_cross_entropy(lt, kEosId);
  std::vector<double> qv = {1.0};
  one.rollout.steps[0].q_write = t2.constant(std::span<const double>(qv), ad::vec_shape(1));
  QTargets tg;
  tg.rows.push_back({-1.0, true, kEosId});
  auto [lm1, le1] = episode_losses(t2, one.rollout, tg);
  CHECK(le1.scalar() == doctest::Approx(4.0));
  CHECK(lm1.scalar() == doctest::Approx(-std::log(std::exp(10.0) / (std::exp(10.0) + 5.0))));
}

TEST_CASE("normalizer: first updates, fixed point, closed form") {
  LossNormalizerState s;
  s.rho = 0.99;
  normalizer_update(s, 2.5, 4.0);
  CHECK(s.n == 1);
  CHECK(s.bar_m == doctest::Approx(2.5).epsilon(1e-12));  // w_1 = 0
  CHECK(s.bar_e == doctest::Approx(4.0).epsilon(1e-12));

  // w_2 = 0.99 / 1.99
  LossNormalizerState s2;
  s2.rho = 0.99;
  normalizer_update(s2, 1.0, 1.0);
  normalizer_update(s2, 2.0, 2.0);
  const double w2 = 0.99 / 1.99;
  CHECK(w2 == doctest::Approx(0.4974874).epsilon(1e-6));
  CHECK(s2.bar_m == doctest::Approx(w2 * 1.0 + (1 - w2) * 2.0).epsilon(1e-12));

  // constant stream is a fixed point
  LossNormalizerState s3;
  s3.rho = 0.99;
  for (int k = 0; k < 50; ++k) normalizer_update(s3, 0.37, 1.2);
  CHECK(std::abs(s3.bar_m - 0.37) < 1e-12);
  CHECK(std::abs(s3.bar_e - 1.2) < 1e-12);

  // closed form: bar_n = (1-rho) sum rho^(n-k) L_k / (1-rho^n)
  Rng rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    double rho = 0.9 + 0.099 * rng.uniform();
    LossNormalizerState st;
    st.rho = rho;
    std::vector<double> ls;
    int len = 1 + int(rng.index(200));
    for (int k = 0; k < len; ++k) {
      double l = rng.uniform(0.0, 5.0);
      ls.push_back(l);
      normalizer_update(st, l, l);
    }
    double num = 0.0;
    for (int k = 1; k <= len; ++k) num += std::pow(rho, double(len - k)) * ls[size_t(k - 1)];
    double want = (1.0 - rho) * num / (1.0 - std::pow(rho, double(len)));
    CHECK(std::abs(st.bar_m - want) < 1e-10);
  }
}

TEST_CASE("eta schedule endpoints and monotonicity") {
  CHECK(eta(0, 1000, 0.02, 0.2) == doctest::Approx(0.02).epsilon(1e-12));
  CHECK(eta(1000, 1000, 0.02, 0.2) == doctest::Approx(0.2 - 0.18 * std::exp(-3.0)).epsilon(1e-9));
  CHECK(std::abs(eta(1000, 1000, 0.02, 0.2) - 0.1910383) < 1e-6);
  CHECK(std::abs(eta(10000, 1000, 0.02, 0.2) - 0.2) < 1e-9);
  double prev = -1.0;
  for (int n = 0; n < 300; ++n) {
    double v = eta(n, 100, 0.02, 0.2);
    CHECK(v > prev);
    prev = v;
  }
  CHECK_THROWS_AS(eta(1, 0, 0.02, 0.2), std::invalid_argument);
}

TEST_CASE("aggregate loss values and the epsilon floor") {
  LossNormalizerState s;
  s.n = 5;
  s.bar_m = 0.8;
  s.bar_e = 2.0;
  CHECK(aggregate_loss(0.8, 2.0, s, 0.1) == doctest::Approx(1.1).epsilon(1e-12));
  CHECK(aggregate_loss(0.8, 123.0, s, 0.0) == doctest::Approx(1.0).epsilon(1e-12));

  Rng rng(2);
  for (int rep = 0; rep < 20; ++rep) {
    double lm = rng.uniform(0.0, 3.0), le = rng.uniform(0.0, 3.0);
    double ev = rng.uniform(0.0, 0.3);
    double want = lm / s.bar_m + ev * le / s.bar_e;
    CHECK(std::abs(aggregate_loss(lm, le, s, ev) - want) < 1e-12);
  }

  LossNormalizerState zero;
  zero.n = 1;
  CHECK(std::isfinite(aggregate_loss(1.0, 1.0, zero, 0.1)));

  LossNormalizerState fresh;
  CHECK_THROWS_AS(aggregate_loss(1.0, 1.0, fresh, 0.1), std::logic_error);

  // tape form agrees with the plain form and keeps gradients flowing
  ad::Tape<double> tape;
  std::vector<double> a = {0.7}, b = {1.9};
  auto la = tape.leaf(std::span<const double>(a), ad::vec_shape(1), 0);
  auto lb = tape.leaf(std::span<const double>(b), ad::vec_shape(1), 1);
  auto agg = aggregate_loss(tape, la, lb, s, 0.1);
  CHECK(agg.scalar() == doctest::Approx(0.7 / 0.8 + 0.1 * 1.9 / 2.0).epsilon(1e-12));
  tape.backward(agg);
  CHECK(tape.grad(la)[0] == doctest::Approx(1.0 / 0.8));
  CHECK(tape.grad(lb)[0] == doctest::Approx(0.1 / 2.0));
}

TEST_CASE("no gradient flows through bootstrap targets") {
  auto net = init_network<double>(tiny_cfg(), 17);
  ad::Tape<double> tape;
  auto bind = bind_net(net, tape);
  Episode ep;
  ep.x = {4, 5, kEosId};
  ep.y = {5, kEosId};
  Rng rng(11);
  auto r = rollout_train(net, bind, ep, {0.5, 1.0, 3.0}, rng);
  auto targets = build_q_targets(r, 0.9, 3.0);
  auto [lm, le] = episode_losses(tape, r, targets);
  tape.backward(le);

  const double n = double(r.steps.size());
  for (size_t t = 0; t < r.steps.size(); ++t) {
    const auto& s = r.steps[t];
    // the taken head carries exactly its local mse derivative; the other
    // head gets nothing even where it fed the previous step's max
    double chosen = s.action == Action::kRead ? s.q_read_v : s.q_write_v;
    double local = 2.0 * (chosen - targets.rows[t].value_target) / n;
    auto g_read = tape.grad(s.q_read)[0];
    auto g_write = tape.grad(s.q_write)[0];
    if (s.action == Action::kRead) {
      CHECK(g_read == doctest::Approx(local).epsilon(1e-9));
      CHECK(g_write == 0.0);
    } else {
      CHECK(g_write == doctest::Approx(local).epsilon(1e-9));
      CHECK(g_read == 0.0);
    }
  }
}

TEST_CASE("full episode gradient matches finite differences through the aggregate") {
  // 2 GRU layers, hidden 8, fp64, dropout off
  auto cfg = tiny_cfg(6, 8, 2);
  auto net = init_network<double>(cfg, 23);
  Episode ep;
  ep.x = {4, 5, 4, kEosId};
  ep.y = {5, 5, kEosId};
  LossNormalizerState norm;
  norm.n = 3;
  norm.bar_m = 1.7;
  norm.bar_e = 0.9;
  const double eta_val = 0.1;

  // one recorded trajectory; actions and targets are then frozen
  ad::Tape<double> tape;
  auto bind = bind_net(net, tape);
  Rng rng(29);
  auto rollout = rollout_train(net, bind, ep, {0.3, 1.0, 3.0}, rng);
  auto targets = build_q_targets(rollout, 0.9, 3.0);
  auto [lm, le] = episode_losses(tape, rollout, targets);
  auto agg = aggregate_loss(tape, lm, le, norm, eta_val);
  tape.backward(agg);
  auto grads = make_grad_buffer(net.params);
  tape.export_param_grads(grads);

  // independent replay: same fed tokens, same actions, same constant targets
  auto replay_loss = [&]() {
    ad::Tape<double> rt;
    auto rb = bind_net(net, rt);
    auto h = initial_hidden(net, rb);
    Rng dummy(0);
    double ce_sum = 0.0, er_sum = 0.0;
    int64_t writes = 0;
    for (size_t t = 0; t < rollout.steps.size(); ++t) {
      const auto& s = rollout.steps[t];
      auto out = forward_step(net, rb, s.src_fed, s.trg_fed, h, Mode::kEval, dummy);
      h = out.hidden;
      if (s.action == Action::kWrite) {
        auto ce = rt.softmax_cross_entropy(out.logits, targets.rows[t].token_target);
        ce_sum += ce.scalar();
        ++writes;
      }
      double chosen = s.action == Action::kRead ? out.q_read.scalar() : out.q_write.scalar();
      double d = chosen - targets.rows[t].value_target;
      er_sum += d * d;
    }
    double lm_v = ce_sum / double(writes);
    double le_v = er_sum / double(rollout.steps.size());
    return lm_v / norm.bar_m + eta_val * le_v / norm.bar_e;
  };

  const double h_step = 1e-5;
  Rng pick(101);
  int checked = 0;
  for (size_t p = 0; p < net.params.size(); ++p) {
    // probe a few coordinates per parameter to keep the runtime low; the
    // acceptance suite sweeps every coordinate
    size_t len = net.params[p].data.size();
    for (int probe = 0; probe < 3; ++probe) {
      size_t idx = size_t(pick.index(len));
      double keep = net.params[p].data[idx];
      net.params[p].data[idx] = keep + h_step;
      double fp = replay_loss();
      net.params[p].data[idx] = keep - h_step;
      double fm = replay_loss();
      net.params[p].data[idx] = keep;
      double fd = (fp - fm) / (2.0 * h_step);
      double an = grads[p][idx];
      double err = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-6});
      INFO(net.params[p].name << "[" << idx << "] analytic " << an << " fd " << fd);
      CHECK(err < 1e-4);
      ++checked;
    }
  }
  CHECK(checked >= 60);
}

TEST_CASE("train_minibatch: determinism, bookkeeping, learning signal") {
  RunConfig rc;
  rc.task = "copy";
  rc.alphabet = 6;
  rc.len_min = 1;
  rc.len_max = 4;
  rc.samples = 400;
  rc.seed = 3;
  rc.min_freq = 1;
  rc.batch_size = 32;
  rc.emb_dim = 8;
  rc.hidden_dim = 16;
  rc.gru_layers = 1;
  rc.dropout_in = 0.0;
  rc.dropout_out = 0.0;
  rc.threads = 2;
  auto ds = prepare_dataset(rc);

  auto make_trainer = [&](RLSTNet<double>& net) {
    AdamConfig ac;
    ac.lr = 0.005;
    ac.weight_decay = 1e-5;
    return Trainer<double>(net, ac, {0.9, 3.0, 0.3, 1.0, 10.0}, 0.99, 300, 0.02, 0.2, rc.seed,
                           rc.threads);
  };

  RLSTNetConfig ncfg;
  ncfg.src_vocab_size = ds.src_vocab.size();
  ncfg.trg_vocab_size = ds.trg_vocab.size();
  ncfg.emb_dim = rc.emb_dim;
  ncfg.hidden_dim = rc.hidden_dim;
  ncfg.num_gru_layers = rc.gru_layers;
  ncfg.dropout_in = 0.0;
  ncfg.dropout_out = 0.0;

  // identical state and seeds twice -> bitwise identical rows and params
  std::vector<int32_t> batch;
  for (int32_t k = 0; k < 32; ++k) batch.push_back(k);
  auto net1 = init_network<double>(ncfg, 7);
  auto net2 = init_network<double>(ncfg, 7);
  auto tr1 = make_trainer(net1);
  auto tr2 = make_trainer(net2);
  auto row1 = tr1.train_minibatch(ds.train, batch, 1, 0);
  auto row2 = tr2.train_minibatch(ds.train, batch, 1, 0);
  CHECK(row1.loss_m == row2.loss_m);
  CHECK(row1.loss_e == row2.loss_e);
  CHECK(row1.loss == row2.loss);
  CHECK(row1.mean_reward == row2.mean_reward);
  for (size_t p = 0; p < net1.params.size(); ++p)
    CHECK(net1.params[p].data == net2.params[p].data);

  // eta bookkeeping follows the minibatch counter
  CHECK(row1.n == 1);
  CHECK(row1.eta == doctest::Approx(eta(1, 300, 0.02, 0.2)).epsilon(1e-12));
  auto row3 = tr1.train_minibatch(ds.train, batch, 1, 32);
  CHECK(row3.n == 2);
  CHECK(row3.eta == doctest::Approx(eta(2, 300, 0.02, 0.2)).epsilon(1e-12));

  // 500 minibatches on the tiny copy task: mistranslation loss falls to half
  // of its first-10-minibatch mean
  auto net3 = init_network<double>(ncfg, 7);
  auto tr3 = make_trainer(net3);
  Rng order(1);
  double first10 = 0.0;
  double last10 = 0.0;
  const int total = 500;
  int64_t slot = 0;
  for (int m = 0; m < total; ++m) {
    auto batches = make_batches(ds.train_pairs, rc.batch_size, order);
    auto row = tr3.train_minibatch(ds.train, batches[size_t(m) % batches.size()],
                                   1 + m / int(batches.size()), slot);
    slot += rc.batch_size;
    if (m < 10) first10 += row.loss_m;
    if (m >= total - 10) last10 += row.loss_m;
  }
  CHECK(last10 / first10 < 0.5);
}

TEST_CASE("checkpoint round trip and validation") {
  namespace fs = std::filesystem;
  auto dir = fs::temp_directory_path() / "rlst_ckpt_test";
  fs::create_directories(dir);
  auto path = (dir / "test.rlst").string();

  auto cfg = tiny_cfg();
  auto net = init_network<float>(cfg, 5);
  auto adam = AdamState<float>::init(net.params);
  adam.step = 12;
  for (auto& m : adam.m)
    for (auto& v : m) v = 0.25f;

  CheckpointMeta meta;
  meta.config.task = "copy";
  meta.config.seed = 5;
  meta.config.emb_dim = cfg.emb_dim;
  meta.config.hidden_dim = cfg.hidden_dim;
  meta.config.gru_layers = cfg.num_gru_layers;
  meta.config.dropout_in = cfg.dropout_in;
  meta.config.dropout_out = cfg.dropout_out;
  meta.n = 42;
  meta.epoch = 3;
  meta.seed = 5;
  meta.adam_step = 12;
  meta.bar_m = 1.5;
  meta.bar_e = 0.25;
  meta.src_tokens = {"<pad>", "<null>", "<eos>", "<unk>", "a", "b"};
  meta.trg_tokens = meta.src_tokens;
  save_checkpoint(path, net, adam, meta);

  auto loaded = load_checkpoint<float>(path);
  CHECK(loaded.meta.n == 42);
  CHECK(loaded.meta.epoch == 3);
  CHECK(loaded.meta.adam_step == 12);
  CHECK(loaded.meta.bar_m == 1.5);
  CHECK(loaded.meta.src_tokens == meta.src_tokens);
  CHECK(loaded.adam.step == 12);
  REQUIRE(loaded.net.params.size() == net.params.size());
  for (size_t p = 0; p < net.params.size(); ++p) {
    CHECK(loaded.net.params[p].name == net.params[p].name);
    CHECK(loaded.net.params[p].data == net.params[p].data);
  }
  CHECK(loaded.adam.m[0][0] == 0.25f);

  // corrupt magic
  {
    std::ofstream f(path, std::ios::binary);
    f << "NOPE1\n{}\n";
  }
  CHECK_THROWS_AS(load_checkpoint<float>(path), std::runtime_error);

  // truncated blob fails the manifest length check
  save_checkpoint(path, net, adam, meta);
  {
    auto size = fs::file_size(path);
    fs::resize_file(path, size - 8);
  }
  CHECK_THROWS_AS(load_checkpoint<float>(path), std::runtime_error);
  fs::remove_all(dir);
}

TEST_CASE("metrics row formatting is stable") {
  MetricsRow row;
  row.epoch = 2;
  row.n = 17;
  row.loss_m = 1.25;
  row.loss_e = 0.5;
  row.bar_m = 1.0;
  row.bar_e = 0.75;
  row.eta = 0.02;
  row.loss = 1.2633;
  row.mean_reward = -1.5;
  row.mean_read_lead = 2.25;
  CHECK(metrics_row_csv(row) == "2,17,1.25,0.5,1,0.75,0.02,1.2633,-1.5,2.25,");
  row.val_bleu = 0.875;
  CHECK(metrics_row_csv(row) == "2,17,1.25,0.5,1,0.75,0.02,1.2633,-1.5,2.25,0.875");
}
