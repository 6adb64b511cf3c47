#pragma once
// Config-driven dataset assembly: synthetic tasks or corpus files, vocabulary
// construction, and encoding into episodes.

#include <vector>

#include "rlst/config.hpp"
#include "rlst/corpus.hpp"
#include "rlst/episode.hpp"
#include "rlst/vocab.hpp"

namespace rlst {

struct Dataset {
  Vocabulary src_vocab;
  Vocabulary trg_vocab;
  std::vector<SentencePair> train_pairs;  // batching buckets by source length
  std::vector<Episode> train;
  std::vector<Episode> valid;
  std::vector<Episode> test;
};

// Synthetic task when cfg.task is set, otherwise corpus files. A missing
// valid/test file falls back to an 80/10/10 split of the training corpus.
CorpusSplit load_splits(const RunConfig& cfg);

Dataset prepare_dataset(const RunConfig& cfg);

std::vector<Episode> encode_pairs(const std::vector<SentencePair>& pairs, const Vocabulary& src,
                                  const Vocabulary& trg);

}  // namespace rlst
