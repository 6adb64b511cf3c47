#pragma once
// Parallel corpora: file ingestion with source dedup, length-bucketed
// batching, and seeded synthetic transduction tasks.

#include <cstdint>
#include <string>
#include <vector>

#include "rlst/rng.hpp"
#include "rlst/vocab.hpp"

namespace rlst {

struct SentencePair {
  std::string source;
  std::string target;
};

struct ParallelCorpus {
  std::vector<SentencePair> pairs;
  int64_t skipped_lines = 0;  // malformed lines dropped during loading

  size_t size() const { return pairs.size(); }
};

// One "<source>\t<target>" pair per line; malformed lines are skipped and
// counted; the first occurrence of each source sentence wins.
ParallelCorpus load_parallel_corpus(const std::string& path);

// Indices into `pairs`, shuffled then bucketed by source token count so each
// batch's length spread stays small; every pair appears exactly once.
std::vector<std::vector<int32_t>> make_batches(const std::vector<SentencePair>& pairs,
                                               int batch_size, Rng& rng);

enum class SynthTask { kCopy, kReverse, kDouble, kDedupRuns };

SynthTask synth_task_from_name(const std::string& name);
const char* synth_task_name(SynthTask task);

struct SyntheticTaskSpec {
  SynthTask task = SynthTask::kCopy;
  int alphabet = 16;
  int len_min = 2;
  int len_max = 12;
  int samples = 1000;
  uint64_t seed = 0;
};

// Deterministic in the spec; target side is the task function of the source.
ParallelCorpus synth_generate(const SyntheticTaskSpec& spec);

struct CorpusSplit {
  ParallelCorpus train, valid, test;
};

// 80/10/10 by original order.
CorpusSplit split_corpus(const ParallelCorpus& corpus);

}  // namespace rlst
