#pragma once
// Corpus BLEU, token accuracy, and action-timing traces.

#include <cstdint>
#include <optional>
#include <vector>

namespace rlst {

using TokenSeq = std::vector<int32_t>;

enum class BleuSmoothing { kOff, kAddOne };

// Geometric mean of modified n-gram precisions (uniform 1/max_n weights)
// times the brevity penalty min(1, exp(1 - r/c)). Candidates and references
// must already be stripped of EOS/PAD. Scores live in [0, 1].
double corpus_bleu(const std::vector<TokenSeq>& candidates, const std::vector<TokenSeq>& references,
                   int max_n = 4, BleuSmoothing smoothing = BleuSmoothing::kOff);

// Positionwise matches up to the shorter length, over total reference tokens.
double token_accuracy(const std::vector<TokenSeq>& candidates,
                      const std::vector<TokenSeq>& references);

struct TraceRow {
  int32_t t = 0;
  int64_t reads = 0;
  int64_t writes = 0;
  int64_t active = 0;
};

// Per-rollout action sequence plus the source length it was produced from.
struct ActionTrace {
  int32_t src_len = 0;               // token count excluding EOS
  std::vector<uint8_t> actions;      // 0 = READ, 1 = WRITE, step order
};

// Aggregates action counts per step over rollouts whose src_len matches the
// filter (all rollouts when the filter is empty). Empty selection gives an
// empty trace.
std::vector<TraceRow> trace_actions(const std::vector<ActionTrace>& rollouts,
                                    std::optional<int32_t> fixed_len);

}  // namespace rlst
