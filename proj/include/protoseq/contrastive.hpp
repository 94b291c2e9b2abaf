#pragma once

#include <deque>
#include <string>
#include <vector>

#include "protoseq/model.hpp"
#include "protoseq/tape.hpp"

namespace protoseq {

// Two bank entries are mutually positive iff they share a source id or a
// target id: independent sample pairs built from 1-to-N / N-to-1 mappings
// count as positives wherever they sit in the queue.
struct GroupIdentity {
  int source_id = -1;
  int target_id = -1;

  bool mutually_positive(const GroupIdentity& o) const {
    return source_id == o.source_id || target_id == o.target_id;
  }
};

enum class Similarity { dot, cosine };
enum class SumMode { out, in };

inline Similarity similarity_from_string(const std::string& s) {
  if (s == "dot") return Similarity::dot;
  if (s == "cos" || s == "cosine") return Similarity::cosine;
  fail("unknown similarity kind: " + s);
}

inline SumMode sum_mode_from_string(const std::string& s) {
  if (s == "out") return SumMode::out;
  if (s == "in") return SumMode::in;
  fail("unknown summation mode: " + s);
}

struct ContrastiveConfig {
  double temperature = 0.1;
  Similarity similarity = Similarity::dot;
  SumMode sum_mode = SumMode::out;

  void validate() const { require(temperature > 0, "temperature must be positive"); }
};

// Fixed-capacity FIFO of projected key vectors with an identity queue updated
// in lockstep. Owned exclusively by one training loop.
class MemoryBank {
 public:
  explicit MemoryBank(size_t capacity = 4096) : capacity_(capacity) {
    require(capacity > 0, "bank capacity must be positive");
  }

  void enqueue(const std::vector<Tensor>& keys, const std::vector<GroupIdentity>& ids) {
    require(keys.size() == ids.size(), "enqueue: keys/identities length mismatch");
    require(keys.size() <= capacity_, "enqueue: batch exceeds bank capacity");
    for (size_t i = 0; i < keys.size(); ++i) {
      keys_.push_back(keys[i]);
      ids_.push_back(ids[i]);
    }
    while (keys_.size() > capacity_) {
      keys_.pop_front();
      ids_.pop_front();
    }
  }

  size_t size() const { return keys_.size(); }
  size_t capacity() const { return capacity_; }
  bool empty() const { return keys_.empty(); }

  const Tensor& key(size_t i) const { return keys_[i]; }
  const GroupIdentity& identity(size_t i) const { return ids_[i]; }

 private:
  size_t capacity_;
  std::deque<Tensor> keys_;
  std::deque<GroupIdentity> ids_;
};

inline std::vector<int> positive_indices(const GroupIdentity& query_id, const MemoryBank& bank) {
  std::vector<int> out;
  for (size_t i = 0; i < bank.size(); ++i) {
    if (bank.identity(i).mutually_positive(query_id)) out.push_back(static_cast<int>(i));
  }
  return out;
}

// key <- m*key + (1-m)*query, elementwise over the whole tree
inline void momentum_update(ModelParams& key_params, const ModelParams& query_params, double m) {
  require(m >= 0.0 && m < 1.0, "momentum coefficient must lie in [0,1)");
  require(same_shapes(key_params, query_params), "momentum_update: parameter shape mismatch");
  std::vector<const Tensor*> query;
  query_params.visit([&](const std::string&, const Tensor& t) { query.push_back(&t); });
  size_t i = 0;
  key_params.visit([&](const std::string&, Tensor& t) {
    const Tensor& q = *query[i++];
    for (size_t k = 0; k < t.data.size(); ++k) {
      t.data[k] = static_cast<real_t>(m * t.data[k] + (1.0 - m) * q.data[k]);
    }
  });
}

inline double similarity(const Tensor& a, const Tensor& b, Similarity kind) {
  require(a.numel() == b.numel(), "similarity: dimension mismatch");
  double d = dot(a, b);
  if (kind == Similarity::dot) return d;
  double na = l2_norm(a), nb = l2_norm(b);
  require(na > 0 && nb > 0, "cosine similarity undefined for zero vectors");
  return d / (na * nb);
}

// InfoNCE over a key matrix. Rows of `keys` are the contrast set M (bank
// snapshot, possibly with the in-batch matching key appended); `positives`
// indexes the rows belonging to P. With a single positive both summation
// modes reduce to the plain softmax log-loss. Computed via log-sum-exp:
//   out: lse(sims) - mean_p sims_p
//   in:  lse(sims) - lse(sims_P) + log |P|
// Keys enter as constants, so no gradient reaches the bank.
inline Val info_nce_loss(Tape& tape, Val z_q, const Tensor& keys, const std::vector<int>& positives,
                         const ContrastiveConfig& cfg) {
  cfg.validate();
  require(!positives.empty(), "info_nce: empty positive set");
  require(keys.rows > 0, "info_nce: empty key matrix");
  for (int p : positives) require(p >= 0 && p < keys.rows, "info_nce: positive index out of range");
  const Tensor& zv = tape.value(z_q);
  require(zv.rows == 1 && zv.cols == keys.cols, "info_nce: query/key dimension mismatch");

  Val query = z_q;
  Tensor key_matrix = keys;
  if (cfg.similarity == Similarity::cosine) {
    double zn = l2_norm(zv);
    require(zn > 0, "cosine similarity undefined for zero query");
    for (int r = 0; r < key_matrix.rows; ++r) {
      double n = 0;
      for (int c = 0; c < key_matrix.cols; ++c) {
        n += static_cast<double>(key_matrix.at(r, c)) * key_matrix.at(r, c);
      }
      n = std::sqrt(n);
      require(n > 0, "cosine similarity undefined for zero key");
      for (int c = 0; c < key_matrix.cols; ++c) {
        key_matrix.at(r, c) = static_cast<real_t>(key_matrix.at(r, c) / n);
      }
    }
    Val norm = tape.sqrt_op(tape.sum(tape.mul(z_q, z_q)));
    Val inv = tape.div(tape.constant(Tensor::scalar(1)), norm);
    query = tape.scale_by(z_q, inv);
  }

  Val sims = tape.matmul(tape.constant(key_matrix), tape.transpose(query));  // (n_keys, 1)
  Val scaled = tape.scale(sims, static_cast<real_t>(1.0 / cfg.temperature));
  Val lse_all = tape.logsumexp(scaled);
  Val pos = tape.gather_rows(scaled, positives);
  if (cfg.sum_mode == SumMode::out) {
    return tape.sub(lse_all, tape.mean(pos));
  }
  Val lse_pos = tape.logsumexp(pos);
  return tape.add_const(tape.sub(lse_all, lse_pos),
                        static_cast<real_t>(std::log(static_cast<double>(positives.size()))));
}

// Convenience overload contrasting against the current bank contents.
inline Val info_nce_loss(Tape& tape, Val z_q, const std::vector<int>& positives,
                         const MemoryBank& bank, const ContrastiveConfig& cfg) {
  require(!bank.empty(), "info_nce: empty bank");
  Tensor keys(static_cast<int>(bank.size()), bank.key(0).cols);
  for (size_t i = 0; i < bank.size(); ++i) {
    const Tensor& k = bank.key(i);
    require(k.rows == 1 && k.cols == keys.cols, "info_nce: inconsistent key shapes in bank");
    for (int c = 0; c < keys.cols; ++c) keys.at(static_cast<int>(i), c) = k.at(0, c);
  }
  return info_nce_loss(tape, z_q, keys, positives, cfg);
}

}  // namespace protoseq
