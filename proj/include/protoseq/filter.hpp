#pragma once

#include <map>
#include <string>
#include <vector>

#include "protoseq/model.hpp"
#include "protoseq/optimizer.hpp"
#include "protoseq/retrieval.hpp"
#include "protoseq/serialize.hpp"

namespace protoseq {

struct TargetSentence {
  int tid = -1;  // globally unique target id (shared across concept sets on N-to-1)
  std::string text;
  std::vector<std::string> tokens;
};

// begin-marker + concept tokens + separator + sentence tokens + separator
struct FilterSample {
  std::vector<int> ids;
  int label = 0;  // training only
  int concept_set_id = -1;
  int sentence_id = -1;  // corpus id for candidates, -1 for gold targets
};

inline FilterSample make_filter_sample(const Vocabulary& vocab,
                                       const std::vector<std::string>& concepts,
                                       const std::vector<std::string>& sentence_tokens, int label,
                                       int max_len = 64) {
  FilterSample s;
  s.label = label;
  s.ids.push_back(Vocabulary::kBos);
  for (const auto& c : concepts) s.ids.push_back(vocab.id(c));
  s.ids.push_back(Vocabulary::kSep);
  // leave room for the closing separator
  for (const auto& t : sentence_tokens) {
    if (static_cast<int>(s.ids.size()) >= max_len - 1) break;
    s.ids.push_back(vocab.id(t));
  }
  s.ids.push_back(Vocabulary::kSep);
  return s;
}

enum class FilterPooling { attention, mean };

struct FilterConfig {
  int vocab_size = 0;
  int d_embed = 32;
  int hidden = 32;
  int n_heads = 2;
  int max_len = 64;
  FilterPooling pooling = FilterPooling::attention;

  json to_json() const {
    return json{{"vocab_size", vocab_size}, {"d_embed", d_embed},   {"hidden", hidden},
                {"n_heads", n_heads},       {"max_len", max_len},
                {"pooling", pooling == FilterPooling::attention ? "attention" : "mean"}};
  }

  static FilterConfig from_json(const json& j) {
    FilterConfig c;
    c.vocab_size = j.at("vocab_size").get<int>();
    c.d_embed = j.at("d_embed").get<int>();
    c.hidden = j.at("hidden").get<int>();
    c.n_heads = j.at("n_heads").get<int>();
    c.max_len = j.at("max_len").get<int>();
    c.pooling = j.at("pooling").get<std::string>() == "mean" ? FilterPooling::mean
                                                             : FilterPooling::attention;
    return c;
  }
};

// Trainable binary scorer: embeddings, one self-attention (or mean pooling),
// begin-marker pooling, one hidden layer and a logistic scalar head.
struct FilterScorer {
  FilterConfig config;
  Tensor embed;
  LayerNormParams ln;
  AttentionParams attn;
  Tensor w1, b1, w2, b2;

  static FilterScorer init(const FilterConfig& cfg, RandomSource& rng) {
    require(cfg.vocab_size > 5, "filter: vocab too small");
    require(cfg.d_embed % cfg.n_heads == 0, "filter: d_embed must divide by heads");
    FilterScorer s;
    s.config = cfg;
    s.embed = Tensor::randn(cfg.vocab_size, cfg.d_embed, rng, 0.05);
    s.ln = {Tensor::full(1, cfg.d_embed, 1.0), Tensor(1, cfg.d_embed)};
    s.attn = {Tensor::xavier(cfg.d_embed, cfg.d_embed, rng), Tensor(1, cfg.d_embed),
              Tensor::xavier(cfg.d_embed, cfg.d_embed, rng), Tensor(1, cfg.d_embed),
              Tensor::xavier(cfg.d_embed, cfg.d_embed, rng), Tensor(1, cfg.d_embed),
              Tensor::xavier(cfg.d_embed, cfg.d_embed, rng), Tensor(1, cfg.d_embed)};
    s.w1 = Tensor::xavier(cfg.d_embed, cfg.hidden, rng);
    s.b1 = Tensor(1, cfg.hidden);
    s.w2 = Tensor::xavier(cfg.hidden, 1, rng);
    s.b2 = Tensor(1, 1);
    return s;
  }

  template <typename F>
  void visit(F&& f) {
    visit_impl(*this, f);
  }
  template <typename F>
  void visit(F&& f) const {
    visit_impl(*this, f);
  }

 private:
  template <typename Self, typename F>
  static void visit_impl(Self& self, F& f) {
    f("embed", self.embed);
    f("ln.gain", self.ln.gain);
    f("ln.bias", self.ln.bias);
    f("attn.wq", self.attn.wq);
    f("attn.bq", self.attn.bq);
    f("attn.wk", self.attn.wk);
    f("attn.bk", self.attn.bk);
    f("attn.wv", self.attn.wv);
    f("attn.bv", self.attn.bv);
    f("attn.wo", self.attn.wo);
    f("attn.bo", self.attn.bo);
    f("w1", self.w1);
    f("b1", self.b1);
    f("w2", self.w2);
    f("b2", self.b2);
  }
};

struct FilterOovCounter {
  size_t count = 0;
};

// Logit of the sample under the scorer (graph-building form).
inline Val filter_logit(TapeBinder& B, const FilterScorer& scorer, const FilterSample& sample,
                        FilterOovCounter* oov = nullptr) {
  Tape& t = B.tape();
  const FilterConfig& cfg = scorer.config;
  std::vector<int> ids = sample.ids;
  for (int& id : ids) {
    if (id < 0 || id >= cfg.vocab_size) {
      id = Vocabulary::kUnk;
      if (oov) ++oov->count;
    }
  }
  require(static_cast<int>(ids.size()) <= cfg.max_len, "filter sample exceeds max_len");
  Val x = t.embedding_rows(B(scorer.embed), ids);
  x = t.add(x, t.constant(detail::sinusoidal_positions(static_cast<int>(ids.size()), cfg.d_embed)));
  Val pooled;
  if (cfg.pooling == FilterPooling::attention) {
    Val normed = detail::layer_norm(B, scorer.ln, x);
    Tensor mask(static_cast<int>(ids.size()), static_cast<int>(ids.size()));
    x = t.add(x, detail::multi_head_attention(B, scorer.attn, normed, normed, mask, cfg.n_heads));
    pooled = t.slice_rows(x, 0, 1);  // begin-marker position
  } else {
    pooled = t.mean_rows(x);
  }
  Val h = t.relu(t.add_bias(t.matmul(pooled, B(scorer.w1)), B(scorer.b1)));
  return t.add_bias(t.matmul(h, B(scorer.w2)), B(scorer.b2));
}

// Score in [0,1]; pure function of (sample, scorer).
inline double score(const FilterSample& sample, const FilterScorer& scorer,
                    FilterOovCounter* oov = nullptr) {
  Tape tape;
  TapeBinder binder(tape, false);
  Val logit = filter_logit(binder, scorer, sample, oov);
  return static_cast<double>(tape.value(tape.logistic(logit)).data[0]);
}

struct FilterDataset {
  std::vector<FilterSample> samples;
  int zero_candidate_warnings = 0;
};

// One positive per (concept set, target); per positive one non-target
// Stage-1 candidate negative and one uniformly random corpus negative.
// Deterministic for a fixed seed.
inline FilterDataset build_filter_dataset(
    const std::vector<std::pair<ConceptSet, TargetSentence>>& train_pairs,
    const std::map<int, CandidateList>& candidates, const CorpusStore& store,
    const Vocabulary& vocab, uint64_t seed, int max_len = 64) {
  require(store.size() > 0, "build_filter_dataset: empty corpus");
  FilterDataset out;
  RandomSource rng(seed);
  for (const auto& [concept_set, target] : train_pairs) {
    FilterSample pos = make_filter_sample(vocab, concept_set.concepts, target.tokens, 1, max_len);
    pos.concept_set_id = concept_set.id;
    out.samples.push_back(std::move(pos));

    std::vector<int> negative_pool;
    auto it = candidates.find(concept_set.id);
    if (it != candidates.end()) {
      for (const Candidate& c : it->second.entries) {
        if (store.by_id(c.id).text != target.text) negative_pool.push_back(c.id);
      }
    }
    if (negative_pool.empty()) {
      ++out.zero_candidate_warnings;
    } else {
      int cand_id = negative_pool[rng.uniform_index(negative_pool.size())];
      FilterSample neg =
          make_filter_sample(vocab, concept_set.concepts, store.by_id(cand_id).tokens, 0, max_len);
      neg.concept_set_id = concept_set.id;
      neg.sentence_id = cand_id;
      out.samples.push_back(std::move(neg));
    }
    int rand_id = static_cast<int>(rng.uniform_index(store.size()));
    FilterSample rand_neg =
        make_filter_sample(vocab, concept_set.concepts, store.by_id(rand_id).tokens, 0, max_len);
    rand_neg.concept_set_id = concept_set.id;
    rand_neg.sentence_id = rand_id;
    out.samples.push_back(std::move(rand_neg));
  }
  return out;
}

struct FilterTrainConfig {
  int epochs = 30;
  int batch_size = 16;
  double lr = 1e-2;
  AdamConfig adam{0.9, 0.999, 1e-6, 0.0};
  uint64_t seed = 1;
};

struct FilterTrainResult {
  FilterScorer scorer;
  std::vector<double> epoch_losses;  // mean binary cross-entropy per epoch
};

// Binary cross-entropy training via the shared autodiff core.
inline FilterTrainResult train_filter(const std::vector<FilterSample>& samples,
                                      const FilterConfig& model_cfg, const FilterTrainConfig& cfg) {
  bool has_pos = false, has_neg = false;
  for (const auto& s : samples) (s.label ? has_pos : has_neg) = true;
  require(has_pos && has_neg, "train_filter: need both classes in the training set");

  RandomSource rng(cfg.seed);
  FilterTrainResult result{FilterScorer::init(model_cfg, rng), {}};
  FilterScorer& scorer = result.scorer;

  std::vector<Tensor*> params;
  scorer.visit([&](const std::string&, Tensor& t) { params.push_back(&t); });
  Adam opt(params, cfg.adam);

  std::vector<size_t> order(samples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    size_t batches = 0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
      size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      Tape tape;
      TapeBinder binder(tape, true);
      Val total;
      for (size_t i = start; i < end; ++i) {
        const FilterSample& s = samples[order[i]];
        Val logit = filter_logit(binder, scorer, s);
        Val loss = tape.bce_with_logits(logit, {static_cast<real_t>(s.label)});
        total = total.valid() ? tape.add(total, loss) : loss;
      }
      total = tape.scale(total, static_cast<real_t>(1.0 / static_cast<double>(end - start)));
      tape.backward(total);
      std::vector<Tensor> grads;
      grads.reserve(params.size());
      for (Tensor* p : params) grads.push_back(binder.grad_of(*p));
      opt.step(grads, cfg.lr);
      epoch_loss += static_cast<double>(tape.value(total).data[0]);
      ++batches;
    }
    result.epoch_losses.push_back(batches ? epoch_loss / static_cast<double>(batches) : 0.0);
  }
  return result;
}

struct Prototype {
  int sentence_id = -1;
  double score = 0.0;
};

// Re-rank Stage-1 candidates by scorer output (ties keep Stage-1 order) and
// take the top k.
inline std::vector<Prototype> select_prototypes(const CandidateList& candidates,
                                                const FilterScorer& scorer, const CorpusStore& store,
                                                const Vocabulary& vocab,
                                                const std::vector<std::string>& concepts, int k = 2) {
  require(!candidates.entries.empty(), "select_prototypes: no candidates");
  std::vector<Prototype> scored;
  scored.reserve(candidates.entries.size());
  for (const Candidate& c : candidates.entries) {
    FilterSample s = make_filter_sample(vocab, concepts, store.by_id(c.id).tokens, 0,
                                        scorer.config.max_len);
    scored.push_back({c.id, score(s, scorer)});
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const Prototype& a, const Prototype& b) { return a.score > b.score; });
  if (static_cast<int>(scored.size()) > k) scored.resize(static_cast<size_t>(k));
  return scored;
}

inline void save_filter(const std::string& path, const FilterScorer& scorer) {
  std::vector<std::pair<std::string, const Tensor*>> tensors;
  scorer.visit([&](const std::string& name, const Tensor& t) { tensors.emplace_back(name, &t); });
  save_named_tensors(path, tensors, json{{"filter_config", scorer.config.to_json()}});
}

inline FilterScorer load_filter(const std::string& path) {
  LoadedTensors raw = load_named_tensors(path);
  FilterConfig cfg = FilterConfig::from_json(raw.meta.at("filter_config"));
  RandomSource rng(0);
  FilterScorer s = FilterScorer::init(cfg, rng);
  s.visit([&](const std::string& name, Tensor& t) {
    auto it = raw.tensors.find(name);
    require(it != raw.tensors.end(), "filter checkpoint missing tensor: " + name);
    require(it->second.same_shape(t), "filter checkpoint shape mismatch for " + name);
    t = it->second;
  });
  return s;
}

}  // namespace protoseq
