#pragma once

// Literal brute-force InfoNCE oracle: per-positive softmax ratios computed
// directly with exp/sum (no log-sum-exp), averaged outside or inside the log.
// Written against the loss definition independently of the tape
// implementation.

#include <cmath>
#include <vector>

#include "protoseq/contrastive.hpp"

namespace oracle {

inline double raw_similarity(const std::vector<double>& a, const std::vector<double>& b,
                             protoseq::Similarity kind) {
  double d = 0, na = 0, nb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    d += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (kind == protoseq::Similarity::dot) return d;
  return d / (std::sqrt(na) * std::sqrt(nb));
}

inline double info_nce(const std::vector<double>& z_q,
                       const std::vector<std::vector<double>>& keys,
                       const std::vector<int>& positives, double temperature,
                       protoseq::Similarity kind, protoseq::SumMode mode) {
  double denom = 0.0;
  for (const auto& k : keys) denom += std::exp(raw_similarity(z_q, k, kind) / temperature);
  std::vector<double> ratios;
  for (int p : positives) {
    double num = std::exp(raw_similarity(z_q, keys[static_cast<size_t>(p)], kind) / temperature);
    ratios.push_back(num / denom);
  }
  if (mode == protoseq::SumMode::out) {
    double loss = 0.0;
    for (double r : ratios) loss += -std::log(r) / static_cast<double>(ratios.size());
    return loss;
  }
  double mean = 0.0;
  for (double r : ratios) mean += r / static_cast<double>(ratios.size());
  return -std::log(mean);
}

}  // namespace oracle
