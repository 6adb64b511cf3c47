// Command-line driver: build-vocab | train | evaluate | translate | trace.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rlst/checkpoint.hpp"
#include "rlst/config.hpp"
#include "rlst/dataset.hpp"
#include "rlst/evaluate.hpp"
#include "rlst/metrics.hpp"
#include "rlst/run.hpp"

namespace {

using namespace rlst;

const std::vector<std::string> kConfigKeys = {
    "gamma",        "epsilon",     "m_penalty",   "rho",         "eta_min",
    "eta_max",      "teacher_forcing", "lr",      "weight_decay", "clip_norm",
    "batch_size",   "total_minibatches", "epochs", "seed",        "emb_dim",
    "hidden_dim",   "gru_layers",  "dropout_in",  "dropout_out",  "leaky_slope",
    "precision",    "task",        "alphabet",    "len_min",      "len_max",
    "samples",      "train_file",  "valid_file",  "test_file",    "src_vocab_file",
    "trg_vocab_file", "min_freq",  "out_dir",     "threads",      "early_stop_bleu",
    "bleu_smoothing"};

void add_config_flags(CLI::App* cmd, std::string& config_path, ConfigOverrides& overrides) {
  cmd->add_option("--config", config_path, "flat key = value configuration file");
  for (const auto& key : kConfigKeys) {
    cmd->add_option_function<std::string>(
        "--" + key, [&overrides, key](const std::string& v) { overrides.emplace_back(key, v); },
        "override config key " + key);
  }
}

int cmd_build_vocab(const std::string& corpus_path, const std::string& src_out,
                    const std::string& trg_out, int min_freq) {
  auto corpus = load_parallel_corpus(corpus_path);
  if (corpus.skipped_lines > 0)
    std::cerr << "warning: skipped " << corpus.skipped_lines << " malformed lines\n";
  std::vector<std::string> src, trg;
  for (const auto& p : corpus.pairs) {
    src.push_back(p.source);
    trg.push_back(p.target);
  }
  build_vocab(src, min_freq).save(src_out);
  build_vocab(trg, min_freq).save(trg_out);
  std::cout << "wrote " << src_out << " and " << trg_out << "\n";
  return 0;
}

template <typename T>
int run_train(const RunConfig& cfg) {
  auto summary = train_run<T>(cfg);
  std::cout << "best epoch " << summary.best_epoch << "  val_bleu "
            << fmt_double(summary.best_val_bleu) << "  checkpoint " << summary.best_checkpoint
            << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, const ConfigOverrides& overrides) {
  RunConfig cfg = parse_config(config_path, overrides);
  std::cout << "resolved configuration:\n" << cfg.describe();
  if (cfg.precision == "fp32") return run_train<float>(cfg);
  return run_train<double>(cfg);
}

// Episodes for a checkpoint: data selected by its echoed config (or an
// explicit override config), encoded with the checkpoint's own vocabularies.
std::vector<Episode> episodes_for(const CheckpointMeta& meta, const std::string& split,
                                  const RunConfig& data_cfg, std::optional<int> len_filter) {
  auto splits = load_splits(data_cfg);
  const ParallelCorpus* corpus = &splits.test;
  if (split == "train") corpus = &splits.train;
  else if (split == "valid") corpus = &splits.valid;
  else if (split != "test") throw std::invalid_argument("unknown split '" + split + "'");

  Vocabulary src = Vocabulary::from_tokens(meta.src_tokens);
  Vocabulary trg = Vocabulary::from_tokens(meta.trg_tokens);
  std::vector<SentencePair> pairs = corpus->pairs;
  if (len_filter) {
    std::vector<SentencePair> kept;
    for (const auto& p : pairs)
      if (int(split_ws(p.source).size()) == *len_filter) kept.push_back(p);
    pairs = kept;
  }
  return encode_pairs(pairs, src, trg);
}

template <typename T>
int run_evaluate(const std::string& ckpt_path, const std::string& split, const RunConfig& data_cfg) {
  auto loaded = load_checkpoint<T>(ckpt_path);
  auto episodes = episodes_for(loaded.meta, split, data_cfg, std::nullopt);
  if (episodes.empty()) {
    std::cerr << "error: empty " << split << " split\n";
    return 1;
  }
  const BleuSmoothing smoothing = data_cfg.bleu_smoothing == "add-one" ? BleuSmoothing::kAddOne
                                                                       : BleuSmoothing::kOff;
  auto rep = evaluate(loaded.net, episodes, {}, smoothing, data_cfg.threads);
  std::cout << "bleu,bleu_x100,token_accuracy,mean_read_lead,len_ratio,sentences,smoothing\n";
  std::cout << fmt_double(rep.bleu) << ',' << fmt_double(rep.bleu * 100.0) << ','
            << fmt_double(rep.token_acc) << ',' << fmt_double(rep.mean_read_lead) << ','
            << fmt_double(rep.len_ratio) << ',' << rep.sentences << ','
            << data_cfg.bleu_smoothing << "\n";
  return 0;
}

template <typename T>
int run_translate(const std::string& ckpt_path) {
  auto loaded = load_checkpoint<T>(ckpt_path);
  Vocabulary src = Vocabulary::from_tokens(loaded.meta.src_tokens);
  Vocabulary trg = Vocabulary::from_tokens(loaded.meta.trg_tokens);
  ad::Tape<T> tape;
  std::string line;
  while (std::getline(std::cin, line)) {
    tape.reset();
    auto bind = bind_net(loaded.net, tape);
    auto r = rollout_infer(loaded.net, bind, src.encode(line));
    std::cout << trg.decode(r.z) << "\n";
  }
  return 0;
}

template <typename T>
int run_trace(const std::string& ckpt_path, int len, const std::string& split,
              const RunConfig& data_cfg, const std::string& out_path) {
  auto loaded = load_checkpoint<T>(ckpt_path);
  auto episodes = episodes_for(loaded.meta, split, data_cfg, len);
  std::vector<ActionTrace> traces;
  ad::Tape<T> tape;
  for (const auto& ep : episodes) {
    tape.reset();
    auto bind = bind_net(loaded.net, tape);
    traces.push_back(to_action_trace(rollout_infer(loaded.net, bind, ep.x)));
  }
  auto rows = trace_actions(traces, len);
  if (rows.empty())
    std::cerr << "warning: no " << split << " sentences of length " << len << "\n";

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path, std::ios::binary);
    if (!file) throw std::runtime_error("trace: cannot write " + out_path);
    out = &file;
  }
  *out << "t,reads,writes,active\n";
  for (const auto& row : rows)
    *out << row.t << ',' << row.reads << ',' << row.writes << ',' << row.active << "\n";
  return 0;
}

std::string checkpoint_precision(const std::string& path) {
  auto meta = read_checkpoint_meta(path);
  return meta.at("config").value("precision", std::string("fp64"));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"on-line sequence transduction agent"};
  app.require_subcommand(1);

  // build-vocab
  auto* sv = app.add_subcommand("build-vocab", "build vocabulary files from a parallel corpus");
  std::string corpus_path, src_out = "vocab.src", trg_out = "vocab.trg";
  int min_freq = 3;
  sv->add_option("--corpus", corpus_path, "tab-separated parallel corpus")->required();
  sv->add_option("--src-out", src_out, "source vocabulary output path");
  sv->add_option("--trg-out", trg_out, "target vocabulary output path");
  sv->add_option("--min_freq", min_freq, "tokens rarer than this become <unk>");

  // train
  auto* st = app.add_subcommand("train", "train a model");
  std::string train_config;
  ConfigOverrides train_overrides;
  add_config_flags(st, train_config, train_overrides);

  // evaluate
  auto* se = app.add_subcommand("evaluate", "score a checkpoint on a data split");
  std::string eval_ckpt, eval_split = "test", eval_config;
  ConfigOverrides eval_overrides;
  se->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  se->add_option("--split", eval_split, "train | valid | test");
  add_config_flags(se, eval_config, eval_overrides);

  // translate
  auto* sx = app.add_subcommand("translate", "read sentences from stdin, write translations");
  std::string tr_ckpt;
  sx->add_option("--checkpoint", tr_ckpt, "checkpoint file")->required();

  // trace
  auto* sr = app.add_subcommand("trace", "action-timing trace for sources of a given length");
  std::string trace_ckpt, trace_split = "test", trace_config, trace_out;
  int trace_len = 15;
  ConfigOverrides trace_overrides;
  sr->add_option("--checkpoint", trace_ckpt, "checkpoint file")->required();
  sr->add_option("--len", trace_len, "source length in tokens, excluding the terminator");
  sr->add_option("--split", trace_split, "train | valid | test");
  sr->add_option("--out", trace_out, "write CSV here instead of stdout");
  add_config_flags(sr, trace_config, trace_overrides);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sv->parsed()) return cmd_build_vocab(corpus_path, src_out, trg_out, min_freq);
    if (st->parsed()) return cmd_train(train_config, train_overrides);
    if (se->parsed()) {
      auto loaded_cfg = [&] {
        if (!eval_config.empty() || !eval_overrides.empty())
          return parse_config(eval_config, eval_overrides);
        auto meta = read_checkpoint_meta(eval_ckpt);
        return RunConfig::from_json(meta.at("config"));
      }();
      if (checkpoint_precision(eval_ckpt) == "fp32")
        return run_evaluate<float>(eval_ckpt, eval_split, loaded_cfg);
      return run_evaluate<double>(eval_ckpt, eval_split, loaded_cfg);
    }
    if (sx->parsed()) {
      if (checkpoint_precision(tr_ckpt) == "fp32") return run_translate<float>(tr_ckpt);
      return run_translate<double>(tr_ckpt);
    }
    if (sr->parsed()) {
      auto loaded_cfg = [&] {
        if (!trace_config.empty() || !trace_overrides.empty())
          return parse_config(trace_config, trace_overrides);
        auto meta = read_checkpoint_meta(trace_ckpt);
        return RunConfig::from_json(meta.at("config"));
      }();
      if (checkpoint_precision(trace_ckpt) == "fp32")
        return run_trace<float>(trace_ckpt, trace_len, trace_split, loaded_cfg, trace_out);
      return run_trace<double>(trace_ckpt, trace_len, trace_split, loaded_cfg, trace_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
