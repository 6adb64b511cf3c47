#include "rlst/dataset.hpp"

#include <stdexcept>

namespace rlst {

std::vector<Episode> encode_pairs(const std::vector<SentencePair>& pairs, const Vocabulary& src,
                                  const Vocabulary& trg) {
  std::vector<Episode> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    Episode ep;
    ep.x = src.encode(p.source);
    ep.y = trg.encode(p.target);
    ep.validate();
    out.push_back(std::move(ep));
  }
  return out;
}

CorpusSplit load_splits(const RunConfig& cfg) {
  CorpusSplit split;
  if (!cfg.task.empty()) {
    SyntheticTaskSpec spec;
    spec.task = synth_task_from_name(cfg.task);
    spec.alphabet = cfg.alphabet;
    spec.len_min = cfg.len_min;
    spec.len_max = cfg.len_max;
    spec.samples = cfg.samples;
    spec.seed = cfg.seed;
    split = split_corpus(synth_generate(spec));
  } else {
    if (cfg.train_file.empty())
      throw std::invalid_argument("config: either task or train_file must be set");
    ParallelCorpus train = load_parallel_corpus(cfg.train_file);
    if (train.pairs.empty()) throw std::runtime_error("dataset: empty training corpus");
    if (!cfg.valid_file.empty() && !cfg.test_file.empty()) {
      split.train = std::move(train);
      split.valid = load_parallel_corpus(cfg.valid_file);
      split.test = load_parallel_corpus(cfg.test_file);
    } else {
      split = split_corpus(train);
      if (!cfg.valid_file.empty()) split.valid = load_parallel_corpus(cfg.valid_file);
      if (!cfg.test_file.empty()) split.test = load_parallel_corpus(cfg.test_file);
    }
  }
  if (split.train.pairs.empty()) throw std::runtime_error("dataset: empty training split");
  return split;
}

Dataset prepare_dataset(const RunConfig& cfg) {
  CorpusSplit split = load_splits(cfg);
  Dataset ds;
  if (!cfg.src_vocab_file.empty()) {
    ds.src_vocab = Vocabulary::load(cfg.src_vocab_file);
  } else {
    std::vector<std::string> sides;
    for (const auto& p : split.train.pairs) sides.push_back(p.source);
    ds.src_vocab = build_vocab(sides, cfg.min_freq);
  }
  if (!cfg.trg_vocab_file.empty()) {
    ds.trg_vocab = Vocabulary::load(cfg.trg_vocab_file);
  } else {
    std::vector<std::string> sides;
    for (const auto& p : split.train.pairs) sides.push_back(p.target);
    ds.trg_vocab = build_vocab(sides, cfg.min_freq);
  }

  ds.train_pairs = split.train.pairs;
  ds.train = encode_pairs(split.train.pairs, ds.src_vocab, ds.trg_vocab);
  ds.valid = encode_pairs(split.valid.pairs, ds.src_vocab, ds.trg_vocab);
  ds.test = encode_pairs(split.test.pairs, ds.src_vocab, ds.trg_vocab);
  return ds;
}

}  // namespace rlst
