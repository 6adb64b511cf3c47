#pragma once
// Greedy-decoding evaluation over a dataset: corpus BLEU, token accuracy,
// read-lead and length-ratio statistics.

#include <vector>

#include "rlst/episode.hpp"
#include "rlst/metrics.hpp"
#include "rlst/parallel.hpp"

namespace rlst {

struct EvalReport {
  double bleu = 0.0;
  double token_acc = 0.0;
  double mean_read_lead = 0.0;
  double len_ratio = 0.0;  // mean |z| / |y|, EOS included
  int64_t sentences = 0;
};

template <typename T>
EvalReport evaluate(const RLSTNet<T>& net, const std::vector<Episode>& data, InferCaps caps = {},
                    BleuSmoothing smoothing = BleuSmoothing::kOff, int threads = 1) {
  EvalReport rep;
  rep.sentences = int64_t(data.size());
  if (data.empty()) return rep;

  struct PerSentence {
    TokenSeq z;
    double lead_sum = 0.0;
    int64_t steps = 0;
  };
  std::vector<PerSentence> results(data.size());

  parallel_chunks(int64_t(data.size()), threads, [&](int64_t, int64_t begin, int64_t end) {
    ad::Tape<T> tape;
    for (int64_t s = begin; s < end; ++s) {
      tape.reset();
      auto bind = bind_net(net, tape);
      auto r = rollout_infer(net, bind, data[size_t(s)].x, caps);
      auto& out = results[size_t(s)];
      out.z = r.z;
      for (const auto& step : r.steps) {
        out.lead_sum += double(step.i_before - step.j_before);
        ++out.steps;
      }
    }
  });

  auto strip = [](const TokenSeq& seq) {
    TokenSeq out;
    for (int32_t t : seq)
      if (t != kEosId && t != kPadId) out.push_back(t);
    return out;
  };

  std::vector<TokenSeq> cand, cand_raw, ref, ref_raw;
  double lead_sum = 0.0, len_ratio_sum = 0.0;
  int64_t steps = 0;
  for (size_t s = 0; s < data.size(); ++s) {
    cand.push_back(strip(results[s].z));
    ref.push_back(strip(data[s].y));
    cand_raw.push_back(results[s].z);
    ref_raw.push_back(data[s].y);
    lead_sum += results[s].lead_sum;
    steps += results[s].steps;
    len_ratio_sum += double(results[s].z.size()) / double(data[s].y.size());
  }
  rep.bleu = corpus_bleu(cand, ref, 4, smoothing);
  rep.token_acc = token_accuracy(cand_raw, ref_raw);
  rep.mean_read_lead = steps > 0 ? lead_sum / double(steps) : 0.0;
  rep.len_ratio = len_ratio_sum / double(data.size());
  return rep;
}

}  // namespace rlst
