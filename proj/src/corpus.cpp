#include "rlst/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

namespace rlst {

ParallelCorpus load_parallel_corpus(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("corpus: cannot read " + path);
  ParallelCorpus out;
  std::unordered_set<std::string> seen;
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto tab = line.find('\t');
    if (tab == std::string::npos) {
      ++out.skipped_lines;
      continue;
    }
    std::string src = line.substr(0, tab);
    std::string trg = line.substr(tab + 1);
    if (src.empty() || trg.empty()) {
      ++out.skipped_lines;
      continue;
    }
    if (!seen.insert(src).second) continue;  // keep first occurrence
    out.pairs.push_back({std::move(src), std::move(trg)});
  }
  return out;
}

std::vector<std::vector<int32_t>> make_batches(const std::vector<SentencePair>& pairs,
                                               int batch_size, Rng& rng) {
  if (batch_size < 1) throw std::invalid_argument("make_batches: batch_size must be >= 1");
  std::vector<int32_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  shuffle_in_place(order, rng);

  // Stable sort of the shuffled order by source length: slicing consecutive
  // batches then gives minimal per-batch spread while the shuffle still
  // randomizes composition within equal lengths.
  std::vector<int32_t> lens(pairs.size());
  for (size_t i = 0; i < pairs.size(); ++i)
    lens[i] = int32_t(split_ws(pairs[i].source).size());
  std::stable_sort(order.begin(), order.end(),
                   [&](int32_t a, int32_t b) { return lens[size_t(a)] < lens[size_t(b)]; });

  std::vector<std::vector<int32_t>> batches;
  for (size_t at = 0; at < order.size(); at += size_t(batch_size)) {
    size_t end = std::min(order.size(), at + size_t(batch_size));
    batches.emplace_back(order.begin() + long(at), order.begin() + long(end));
  }
  shuffle_in_place(batches, rng);
  return batches;
}

SynthTask synth_task_from_name(const std::string& name) {
  if (name == "copy") return SynthTask::kCopy;
  if (name == "reverse") return SynthTask::kReverse;
  if (name == "double") return SynthTask::kDouble;
  if (name == "dedup-runs") return SynthTask::kDedupRuns;
  throw std::invalid_argument("unknown synthetic task '" + name + "'");
}

const char* synth_task_name(SynthTask task) {
  switch (task) {
    case SynthTask::kCopy: return "copy";
    case SynthTask::kReverse: return "reverse";
    case SynthTask::kDouble: return "double";
    case SynthTask::kDedupRuns: return "dedup-runs";
  }
  return "?";
}

namespace {

std::string join(const std::vector<std::string>& toks) {
  std::string out;
  for (const auto& t : toks) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

std::vector<std::string> apply_task(SynthTask task, const std::vector<std::string>& src) {
  std::vector<std::string> out;
  switch (task) {
    case SynthTask::kCopy:
      out = src;
      break;
    case SynthTask::kReverse:
      out.assign(src.rbegin(), src.rend());
      break;
    case SynthTask::kDouble:
      for (const auto& t : src) {
        out.push_back(t);
        out.push_back(t);
      }
      break;
    case SynthTask::kDedupRuns:
      for (const auto& t : src)
        if (out.empty() || out.back() != t) out.push_back(t);
      break;
  }
  return out;
}

}  // namespace

ParallelCorpus synth_generate(const SyntheticTaskSpec& spec) {
  if (spec.alphabet < 2) throw std::invalid_argument("synth_generate: alphabet size must be >= 2");
  if (spec.len_min < 1 || spec.len_max < spec.len_min)
    throw std::invalid_argument("synth_generate: bad length range");
  if (spec.samples < 1) throw std::invalid_argument("synth_generate: samples must be >= 1");

  std::vector<std::string> alphabet;
  for (int i = 0; i < spec.alphabet; ++i) alphabet.push_back("t" + std::to_string(i));

  // dedup-runs sources are drawn with a repeat bias so runs actually occur
  const double repeat_prob = spec.task == SynthTask::kDedupRuns ? 0.35 : 0.0;

  Rng rng = derive_rng(spec.seed, 0xC0DEDULL, uint64_t(spec.task));
  ParallelCorpus out;
  out.pairs.reserve(size_t(spec.samples));
  for (int s = 0; s < spec.samples; ++s) {
    int len = spec.len_min + int(rng.index(uint64_t(spec.len_max - spec.len_min + 1)));
    std::vector<std::string> src(static_cast<size_t>(len));
    for (int i = 0; i < len; ++i) {
      if (i > 0 && repeat_prob > 0.0 && rng.bernoulli(repeat_prob))
        src[size_t(i)] = src[size_t(i) - 1];
      else
        src[size_t(i)] = alphabet[rng.index(uint64_t(spec.alphabet))];
    }
    out.pairs.push_back({join(src), join(apply_task(spec.task, src))});
  }
  return out;
}

CorpusSplit split_corpus(const ParallelCorpus& corpus) {
  CorpusSplit out;
  const size_t n = corpus.pairs.size();
  const size_t n_train = n * 8 / 10;
  const size_t n_valid = n / 10;
  for (size_t i = 0; i < n; ++i) {
    if (i < n_train)
      out.train.pairs.push_back(corpus.pairs[i]);
    else if (i < n_train + n_valid)
      out.valid.pairs.push_back(corpus.pairs[i]);
    else
      out.test.pairs.push_back(corpus.pairs[i]);
  }
  return out;
}

}  // namespace rlst
