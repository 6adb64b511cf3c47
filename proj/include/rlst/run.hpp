#pragma once
// The end-to-end training driver: epoch loop over shuffled length-bucketed
// batches, per-epoch greedy validation, checkpointing with best-model
// selection, and a deterministic metrics CSV.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "rlst/checkpoint.hpp"
#include "rlst/dataset.hpp"
#include "rlst/evaluate.hpp"
#include "rlst/trainer.hpp"

namespace rlst {

// shortest round-trip decimal form; reruns print identical bytes
inline std::string fmt_double(double v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

inline std::string metrics_row_csv(const MetricsRow& row) {
  std::string s;
  s += std::to_string(row.epoch);
  s += ',';
  s += std::to_string(row.n);
  for (double v : {row.loss_m, row.loss_e, row.bar_m, row.bar_e, row.eta, row.loss,
                   row.mean_reward, row.mean_read_lead}) {
    s += ',';
    s += fmt_double(v);
  }
  s += ',';
  if (row.val_bleu) s += fmt_double(*row.val_bleu);
  return s;
}

inline constexpr const char* kMetricsHeader =
    "epoch,minibatch_n,loss_m,loss_e,bar_loss_m,bar_loss_e,eta,aggregated_loss,mean_reward,"
    "mean_read_lead,val_bleu";

struct TrainSummary {
  std::string best_checkpoint;
  std::string metrics_path;
  double best_val_bleu = -1.0;
  int64_t best_epoch = -1;
  int64_t epochs_run = 0;
  double test_bleu = -1.0;
  double test_token_acc = -1.0;
  double test_read_lead = 0.0;
};

template <typename T>
TrainSummary train_run(const RunConfig& cfg, bool quiet = false) {
  cfg.validate();
  Dataset ds = prepare_dataset(cfg);

  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);

  const int64_t batches_per_epoch =
      (int64_t(ds.train.size()) + cfg.batch_size - 1) / cfg.batch_size;
  const int64_t total_n = cfg.total_minibatches > 0 ? cfg.total_minibatches
                                                    : int64_t(cfg.epochs) * batches_per_epoch;

  RLSTNetConfig ncfg;
  ncfg.src_vocab_size = ds.src_vocab.size();
  ncfg.trg_vocab_size = ds.trg_vocab.size();
  ncfg.emb_dim = cfg.emb_dim;
  ncfg.hidden_dim = cfg.hidden_dim;
  ncfg.num_gru_layers = cfg.gru_layers;
  ncfg.leaky_slope = cfg.leaky_slope;
  ncfg.dropout_in = cfg.dropout_in;
  ncfg.dropout_out = cfg.dropout_out;
  RLSTNet<T> net = init_network<T>(ncfg, cfg.seed);

  AdamConfig adam_cfg;
  adam_cfg.lr = cfg.lr;
  adam_cfg.weight_decay = cfg.weight_decay;
  TrainHyper hyper{cfg.gamma, cfg.m_penalty, cfg.epsilon, cfg.teacher_forcing, cfg.clip_norm};
  Trainer<T> trainer(net, adam_cfg, hyper, cfg.rho, total_n, cfg.eta_min, cfg.eta_max, cfg.seed,
                     cfg.threads);

  const BleuSmoothing smoothing =
      cfg.bleu_smoothing == "add-one" ? BleuSmoothing::kAddOne : BleuSmoothing::kOff;

  TrainSummary summary;
  summary.metrics_path = (fs::path(cfg.out_dir) / "metrics.csv").string();
  std::ofstream csv(summary.metrics_path, std::ios::binary);
  if (!csv) throw std::runtime_error("train: cannot write " + summary.metrics_path);
  {
    const nlohmann::json echo = cfg.to_json();
    for (const auto& [k, v] : echo.items()) csv << "# " << k << " = " << v.dump() << '\n';
  }
  csv << kMetricsHeader << '\n';

  CheckpointMeta meta;
  meta.config = cfg;
  meta.seed = cfg.seed;
  meta.src_tokens = ds.src_vocab.tokens();
  meta.trg_tokens = ds.trg_vocab.tokens();

  char namebuf[32];
  for (int64_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng epoch_rng = derive_rng(cfg.seed, 0xBA7C4E5ULL, uint64_t(epoch));
    auto batches = make_batches(ds.train_pairs, cfg.batch_size, epoch_rng);

    MetricsRow last_row;
    int64_t slot = 0;
    for (size_t b = 0; b < batches.size(); ++b) {
      MetricsRow row = trainer.train_minibatch(ds.train, batches[b], epoch, slot);
      row.epoch = epoch;
      slot += int64_t(batches[b].size());
      if (b + 1 < batches.size())
        csv << metrics_row_csv(row) << '\n';
      else
        last_row = row;
    }

    EvalReport val = evaluate(net, ds.valid, {}, smoothing, cfg.threads);
    last_row.val_bleu = val.bleu;
    csv << metrics_row_csv(last_row) << '\n';
    csv.flush();
    summary.epochs_run = epoch;

    meta.epoch = epoch;
    meta.n = trainer.normalizer().n;
    meta.bar_m = trainer.normalizer().bar_m;
    meta.bar_e = trainer.normalizer().bar_e;
    meta.adam_step = trainer.adam().step;
    meta.val_bleu = val.bleu;
    std::snprintf(namebuf, sizeof(namebuf), "epoch_%04d.rlst", int(epoch));
    save_checkpoint((fs::path(cfg.out_dir) / namebuf).string(), net, trainer.adam(), meta);
    if (val.bleu > summary.best_val_bleu) {
      summary.best_val_bleu = val.bleu;
      summary.best_epoch = epoch;
      summary.best_checkpoint = (fs::path(cfg.out_dir) / "best.rlst").string();
      save_checkpoint(summary.best_checkpoint, net, trainer.adam(), meta);
    }

    if (!quiet)
      std::cout << "epoch " << epoch << "/" << cfg.epochs << "  loss_m " << fmt_double(last_row.loss_m)
                << "  loss_e " << fmt_double(last_row.loss_e) << "  val_bleu "
                << fmt_double(val.bleu) << "  val_acc " << fmt_double(val.token_acc) << std::endl;

    if (val.bleu >= cfg.early_stop_bleu) break;
  }

  if (!ds.test.empty() && !summary.best_checkpoint.empty()) {
    auto best = load_checkpoint<T>(summary.best_checkpoint);
    EvalReport test = evaluate(best.net, ds.test, {}, smoothing, cfg.threads);
    summary.test_bleu = test.bleu;
    summary.test_token_acc = test.token_acc;
    summary.test_read_lead = test.mean_read_lead;
    if (!quiet)
      std::cout << "test_bleu " << fmt_double(test.bleu) << "  test_acc "
                << fmt_double(test.token_acc) << "  read_lead "
                << fmt_double(test.mean_read_lead) << std::endl;
  }
  return summary;
}

}  // namespace rlst
