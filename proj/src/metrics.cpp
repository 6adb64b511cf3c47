#include "rlst/metrics.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace rlst {

namespace {

// n-gram -> count within one sentence
using NgramCounts = std::map<std::vector<int32_t>, int64_t>;

NgramCounts count_ngrams(const TokenSeq& s, int n) {
  NgramCounts out;
  if (int(s.size()) < n) return out;
  for (size_t i = 0; i + size_t(n) <= s.size(); ++i)
    ++out[std::vector<int32_t>(s.begin() + long(i), s.begin() + long(i) + n)];
  return out;
}

}  // namespace

double corpus_bleu(const std::vector<TokenSeq>& candidates, const std::vector<TokenSeq>& references,
                   int max_n, BleuSmoothing smoothing) {
  if (candidates.size() != references.size())
    throw std::invalid_argument("corpus_bleu: candidate/reference count mismatch");
  if (max_n < 1) throw std::invalid_argument("corpus_bleu: max_n must be >= 1");

  std::vector<int64_t> matched(size_t(max_n), 0), total(size_t(max_n), 0);
  int64_t cand_len = 0, ref_len = 0;

  for (size_t s = 0; s < candidates.size(); ++s) {
    const TokenSeq& cand = candidates[s];
    const TokenSeq& ref = references[s];
    if (ref.empty()) throw std::invalid_argument("corpus_bleu: empty reference sentence");
    cand_len += int64_t(cand.size());
    ref_len += int64_t(ref.size());
    for (int n = 1; n <= max_n; ++n) {
      auto cn = count_ngrams(cand, n);
      if (cn.empty()) continue;
      auto rn = count_ngrams(ref, n);
      for (const auto& [gram, c] : cn) {
        total[size_t(n - 1)] += c;
        auto it = rn.find(gram);
        if (it != rn.end()) matched[size_t(n - 1)] += std::min(c, it->second);  // clipping
      }
    }
  }

  if (cand_len == 0) return 0.0;

  double log_prec = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    int64_t num = matched[size_t(n - 1)];
    int64_t den = total[size_t(n - 1)];
    if (smoothing == BleuSmoothing::kAddOne && n >= 2) {
      num += 1;
      den += 1;
    }
    if (num == 0 || den == 0) return 0.0;
    log_prec += std::log(double(num) / double(den));
  }
  log_prec /= double(max_n);

  const double bp = cand_len >= ref_len ? 1.0 : std::exp(1.0 - double(ref_len) / double(cand_len));
  return bp * std::exp(log_prec);
}

double token_accuracy(const std::vector<TokenSeq>& candidates,
                      const std::vector<TokenSeq>& references) {
  if (candidates.size() != references.size())
    throw std::invalid_argument("token_accuracy: candidate/reference count mismatch");
  int64_t hits = 0, ref_tokens = 0;
  for (size_t s = 0; s < candidates.size(); ++s) {
    const auto& cand = candidates[s];
    const auto& ref = references[s];
    ref_tokens += int64_t(ref.size());
    const size_t upto = std::min(cand.size(), ref.size());
    for (size_t i = 0; i < upto; ++i)
      if (cand[i] == ref[i]) ++hits;
  }
  return ref_tokens == 0 ? 0.0 : double(hits) / double(ref_tokens);
}

std::vector<TraceRow> trace_actions(const std::vector<ActionTrace>& rollouts,
                                    std::optional<int32_t> fixed_len) {
  size_t max_steps = 0;
  for (const auto& r : rollouts) {
    if (fixed_len && r.src_len != *fixed_len) continue;
    max_steps = std::max(max_steps, r.actions.size());
  }
  std::vector<TraceRow> rows(max_steps);
  for (size_t t = 0; t < max_steps; ++t) rows[t].t = int32_t(t);
  for (const auto& r : rollouts) {
    if (fixed_len && r.src_len != *fixed_len) continue;
    for (size_t t = 0; t < r.actions.size(); ++t) {
      rows[t].active += 1;
      if (r.actions[t] == 0)
        rows[t].reads += 1;
      else
        rows[t].writes += 1;
    }
  }
  return rows;
}

}  // namespace rlst
