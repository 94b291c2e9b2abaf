#pragma once

#include <algorithm>
#include <vector>

#include "protoseq/model.hpp"

namespace protoseq {

struct BeamConfig {
  int beam_size = 5;
  double length_penalty = 1.0;  // hypotheses scored by sum_logp / len^alpha
  int max_len = 32;             // generated tokens, eos included

  void validate() const {
    require(beam_size >= 1, "beam size must be >= 1");
    require(max_len >= 2, "max length must be >= 2");
  }
};

// Encoder pass shared by every hypothesis of one input.
struct EncodedInput {
  std::vector<int> src_ids;
  Tensor states;
};

inline EncodedInput run_encoder(const ModelParams& params, const ModelConfig& cfg,
                                const std::vector<int>& input_ids) {
  Tape tape;
  TapeBinder binder(tape, false);
  EncodeResult enc = encode(binder, params, cfg, input_ids);
  return {input_ids, tape.value(enc.states)};
}

// Log-probabilities of the next token after `prefix` (which starts with bos).
inline std::vector<double> next_token_log_probs(const ModelParams& params, const ModelConfig& cfg,
                                                const EncodedInput& enc,
                                                const std::vector<int>& prefix) {
  Tape tape;
  TapeBinder binder(tape, false);
  Val states = tape.constant(enc.states);
  DecodeResult dec = decode_prefix(binder, params, cfg, states, enc.src_ids, prefix);
  const Tensor& logits = tape.value(dec.logits);
  const int V = logits.cols;
  const int last = logits.rows - 1;
  double m = logits.at(last, 0);
  for (int c = 1; c < V; ++c) m = std::max(m, static_cast<double>(logits.at(last, c)));
  double s = 0.0;
  for (int c = 0; c < V; ++c) s += std::exp(logits.at(last, c) - m);
  double lse = m + std::log(s);
  std::vector<double> out(static_cast<size_t>(V));
  for (int c = 0; c < V; ++c) out[static_cast<size_t>(c)] = logits.at(last, c) - lse;
  return out;
}

namespace detail {

struct Hypothesis {
  std::vector<int> tokens;  // generated ids, bos excluded, eos included when finished
  double sum_logp = 0.0;
};

inline double normalized_score(const Hypothesis& h, double alpha) {
  return h.sum_logp / std::pow(static_cast<double>(h.tokens.size()), alpha);
}

// deterministic ordering: higher score first, then lexicographically smaller
// token sequence
inline bool beam_less(double score_a, const std::vector<int>& a, double score_b,
                      const std::vector<int>& b) {
  if (score_a != score_b) return score_a > score_b;
  return a < b;
}

}  // namespace detail

// Length-normalized beam search. Every expansion competes for the beam slots;
// hypotheses that emit eos retire to the finished pool. Returns the best
// finished hypothesis, or the best open one once max_len is reached. pad and
// bos are never generated.
inline std::vector<int> beam_search(const ModelParams& params, const ModelConfig& cfg,
                                    const std::vector<int>& input_ids, const BeamConfig& bcfg) {
  bcfg.validate();
  EncodedInput enc = run_encoder(params, cfg, input_ids);

  std::vector<detail::Hypothesis> open = {{{}, 0.0}};
  std::vector<detail::Hypothesis> finished;
  // the decoder prefix holds bos + generated tokens, so it must fit max_len
  const int max_gen = std::min(bcfg.max_len, cfg.max_len - 1);

  for (int step = 0; step < max_gen && !open.empty(); ++step) {
    std::vector<detail::Hypothesis> pool;
    for (const detail::Hypothesis& h : open) {
      std::vector<int> prefix = {Vocabulary::kBos};
      prefix.insert(prefix.end(), h.tokens.begin(), h.tokens.end());
      std::vector<double> lp = next_token_log_probs(params, cfg, enc, prefix);
      for (int tok = 0; tok < static_cast<int>(lp.size()); ++tok) {
        if (tok == Vocabulary::kPad || tok == Vocabulary::kBos) continue;
        detail::Hypothesis next = h;
        next.tokens.push_back(tok);
        next.sum_logp += lp[static_cast<size_t>(tok)];
        pool.push_back(std::move(next));
      }
    }
    std::sort(pool.begin(), pool.end(), [](const detail::Hypothesis& a, const detail::Hypothesis& b) {
      return detail::beam_less(a.sum_logp, a.tokens, b.sum_logp, b.tokens);
    });
    if (static_cast<int>(pool.size()) > bcfg.beam_size) pool.resize(static_cast<size_t>(bcfg.beam_size));
    open.clear();
    for (detail::Hypothesis& h : pool) {
      if (h.tokens.back() == Vocabulary::kEos) {
        finished.push_back(std::move(h));
      } else {
        open.push_back(std::move(h));
      }
    }
  }

  auto best_of = [&](const std::vector<detail::Hypothesis>& pool) {
    const detail::Hypothesis* best = nullptr;
    double best_score = 0.0;
    for (const detail::Hypothesis& h : pool) {
      double score = detail::normalized_score(h, bcfg.length_penalty);
      if (!best || detail::beam_less(score, h.tokens, best_score, best->tokens)) {
        best = &h;
        best_score = score;
      }
    }
    return best;
  };

  const detail::Hypothesis* best = best_of(finished);
  if (!best) best = best_of(open);
  require(best != nullptr, "beam search produced no hypothesis");
  return best->tokens;
}

// Greedy rollout: argmax token each step (ties to the smaller id), stopping
// at eos or max length.
inline std::vector<int> greedy_decode(const ModelParams& params, const ModelConfig& cfg,
                                      const std::vector<int>& input_ids, int max_len) {
  EncodedInput enc = run_encoder(params, cfg, input_ids);
  std::vector<int> tokens;
  const int max_gen = std::min(max_len, cfg.max_len - 1);
  for (int step = 0; step < max_gen; ++step) {
    std::vector<int> prefix = {Vocabulary::kBos};
    prefix.insert(prefix.end(), tokens.begin(), tokens.end());
    std::vector<double> lp = next_token_log_probs(params, cfg, enc, prefix);
    int best = -1;
    for (int tok = 0; tok < static_cast<int>(lp.size()); ++tok) {
      if (tok == Vocabulary::kPad || tok == Vocabulary::kBos) continue;
      if (best < 0 || lp[static_cast<size_t>(tok)] > lp[static_cast<size_t>(best)]) best = tok;
    }
    tokens.push_back(best);
    if (best == Vocabulary::kEos) break;
  }
  return tokens;
}

}  // namespace protoseq
