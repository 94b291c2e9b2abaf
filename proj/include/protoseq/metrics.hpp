#pragma once

#include <map>
#include <string>
#include <vector>

#include "protoseq/common.hpp"

namespace protoseq {

struct EvalPair {
  std::vector<std::string> hypothesis;
  std::vector<std::vector<std::string>> references;  // nonempty
};

namespace detail {

inline std::map<std::string, int> ngram_counts(const std::vector<std::string>& tokens, int n) {
  std::map<std::string, int> counts;
  if (static_cast<int>(tokens.size()) < n) return counts;
  for (size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key;
    for (int j = 0; j < n; ++j) {
      if (j) key += '\x1f';
      key += tokens[i + j];
    }
    ++counts[key];
  }
  return counts;
}

inline int lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::vector<int>> dp(a.size() + 1, std::vector<int>(b.size() + 1, 0));
  for (size_t i = 1; i <= a.size(); ++i) {
    for (size_t j = 1; j <= b.size(); ++j) {
      dp[i][j] = a[i - 1] == b[j - 1] ? dp[i - 1][j - 1] + 1 : std::max(dp[i - 1][j], dp[i][j - 1]);
    }
  }
  return dp[a.size()][b.size()];
}

}  // namespace detail

// Corpus-level BLEU with per-reference clipping, geometric mean of orders
// 1..n and brevity penalty against the closest reference length (ties go to
// the shorter reference). No smoothing: a zero precision at any order zeroes
// the score.
inline double corpus_bleu(const std::vector<EvalPair>& pairs, int n) {
  require(!pairs.empty(), "corpus_bleu: no pairs");
  require(n == 3 || n == 4, "corpus_bleu: order must be 3 or 4");
  std::vector<long long> clipped(static_cast<size_t>(n), 0), total(static_cast<size_t>(n), 0);
  long long hyp_len = 0, ref_len = 0;
  for (const EvalPair& p : pairs) {
    require(!p.references.empty(), "corpus_bleu: pair without references");
    hyp_len += static_cast<long long>(p.hypothesis.size());
    long long best_ref = static_cast<long long>(p.references.front().size());
    for (const auto& r : p.references) {
      long long len = static_cast<long long>(r.size());
      long long d_new = std::llabs(len - static_cast<long long>(p.hypothesis.size()));
      long long d_old = std::llabs(best_ref - static_cast<long long>(p.hypothesis.size()));
      if (d_new < d_old || (d_new == d_old && len < best_ref)) best_ref = len;
    }
    ref_len += best_ref;
    for (int order = 1; order <= n; ++order) {
      auto hyp_counts = detail::ngram_counts(p.hypothesis, order);
      std::map<std::string, int> max_ref;
      for (const auto& r : p.references) {
        for (const auto& [g, c] : detail::ngram_counts(r, order)) {
          max_ref[g] = std::max(max_ref[g], c);
        }
      }
      for (const auto& [g, c] : hyp_counts) {
        auto it = max_ref.find(g);
        clipped[static_cast<size_t>(order - 1)] += std::min(c, it == max_ref.end() ? 0 : it->second);
      }
      total[static_cast<size_t>(order - 1)] +=
          std::max<long long>(0, static_cast<long long>(p.hypothesis.size()) - order + 1);
    }
  }
  double log_sum = 0.0;
  for (int order = 0; order < n; ++order) {
    if (clipped[static_cast<size_t>(order)] == 0 || total[static_cast<size_t>(order)] == 0) {
      return 0.0;
    }
    log_sum += std::log(static_cast<double>(clipped[static_cast<size_t>(order)]) /
                        static_cast<double>(total[static_cast<size_t>(order)]));
  }
  if (hyp_len == 0) return 0.0;
  double bp = hyp_len >= ref_len
                  ? 1.0
                  : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
  return 100.0 * bp * std::exp(log_sum / n);
}

enum class RougeVariant { two, l };

// ROUGE-1.5.5 style F-measure with beta = 1.2 (recall-weighted):
// F = (1 + b^2) P R / (R + b^2 P). Per pair the best reference is taken and
// the pair scores are averaged.
inline double rouge(const std::vector<EvalPair>& pairs, RougeVariant variant) {
  require(!pairs.empty(), "rouge: no pairs");
  const double beta2 = 1.2 * 1.2;
  double sum_f = 0.0;
  for (const EvalPair& p : pairs) {
    require(!p.references.empty(), "rouge: pair without references");
    double best_f = 0.0;
    for (const auto& ref : p.references) {
      double precision = 0.0, recall = 0.0;
      if (variant == RougeVariant::two) {
        auto hyp_counts = detail::ngram_counts(p.hypothesis, 2);
        auto ref_counts = detail::ngram_counts(ref, 2);
        long long match = 0, hyp_total = 0, ref_total = 0;
        for (const auto& [g, c] : hyp_counts) {
          hyp_total += c;
          auto it = ref_counts.find(g);
          if (it != ref_counts.end()) match += std::min(c, it->second);
        }
        for (const auto& [g, c] : ref_counts) ref_total += c;
        precision = hyp_total > 0 ? static_cast<double>(match) / hyp_total : 0.0;
        recall = ref_total > 0 ? static_cast<double>(match) / ref_total : 0.0;
      } else {
        int lcs = detail::lcs_length(p.hypothesis, ref);
        precision = !p.hypothesis.empty() ? static_cast<double>(lcs) / p.hypothesis.size() : 0.0;
        recall = !ref.empty() ? static_cast<double>(lcs) / ref.size() : 0.0;
      }
      double f = 0.0;
      if (precision > 0 || recall > 0) {
        f = (1.0 + beta2) * precision * recall / (recall + beta2 * precision);
      }
      best_f = std::max(best_f, f);
    }
    sum_f += best_f;
  }
  return 100.0 * sum_f / static_cast<double>(pairs.size());
}

}  // namespace protoseq
