#pragma once

#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "protoseq/io.hpp"
#include "protoseq/tape.hpp"

namespace protoseq {

// Token <-> id maps with fixed reserved ids. eos doubles as the global
// sentence slot; sep separates concepts from prototype/target segments.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr int kSep = 4;

  Vocabulary() {
    for (const char* t : {"<pad>", "<unk>", "<bos>", "<eos>", "<sep>"}) add_token(t);
  }

  // tokens are deduplicated and id-assigned in sorted order for determinism
  static Vocabulary build(const std::vector<std::vector<std::string>>& token_lists) {
    std::set<std::string> uniq;
    for (const auto& list : token_lists) uniq.insert(list.begin(), list.end());
    Vocabulary v;
    for (const auto& t : uniq) v.add_token(t);
    return v;
  }

  int size() const { return static_cast<int>(id_to_token_.size()); }

  int id(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnk : it->second;
  }

  const std::string& token(int id) const {
    require(id >= 0 && id < size(), "token id out of range");
    return id_to_token_[static_cast<size_t>(id)];
  }

  std::vector<int> ids(const std::vector<std::string>& tokens) const {
    std::vector<int> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(id(t));
    return out;
  }

  // concepts + sep + segment + eos: the shared input layout for the encoder
  std::vector<int> encode_source(const std::vector<std::string>& concepts,
                                 const std::vector<std::string>& segment) const {
    std::vector<int> out = ids(concepts);
    out.push_back(kSep);
    for (const auto& t : segment) out.push_back(id(t));
    out.push_back(kEos);
    return out;
  }

  // bos + tokens + eos: the teacher-forced decoder layout
  std::vector<int> encode_target(const std::vector<std::string>& tokens) const {
    std::vector<int> out = {kBos};
    for (const auto& t : tokens) out.push_back(id(t));
    out.push_back(kEos);
    return out;
  }

  std::vector<std::string> decode(const std::vector<int>& ids_in) const {
    std::vector<std::string> out;
    for (int i : ids_in) {
      if (i == kBos || i == kEos || i == kPad) continue;
      out.push_back(token(i));
    }
    return out;
  }

  void save(const std::string& path) const {
    atomic_write(path, [&](std::ostream& os) {
      for (int i = 0; i < size(); ++i) {
        os << json{{"token", id_to_token_[static_cast<size_t>(i)]}, {"id", i}}.dump() << "\n";
      }
    });
  }

  static Vocabulary load(const std::string& path) {
    Vocabulary v;
    for (const json& rec : read_jsonl(path)) {
      int id = rec.at("id").get<int>();
      std::string tok = rec.at("token").get<std::string>();
      if (id < 5) {
        require(v.id_to_token_[static_cast<size_t>(id)] == tok, "vocabulary: reserved id mismatch");
        continue;
      }
      require(id == v.size(), "vocabulary: ids must be dense");
      v.add_token(tok);
    }
    return v;
  }

 private:
  void add_token(const std::string& t) {
    require(!token_to_id_.count(t), "duplicate vocabulary token: " + t);
    token_to_id_[t] = size();
    id_to_token_.push_back(t);
  }

  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int> token_to_id_;
};

struct ModelConfig {
  int vocab_size = 0;
  int d_model = 64;
  int n_heads = 2;
  int n_enc_layers = 2;
  int n_dec_layers = 2;
  int ffn_dim = 128;
  int max_len = 64;
  int proj_hidden = 64;
  int proj_out = 32;
  bool use_positional = true;  // fixed sinusoidal encodings

  void validate() const {
    require(vocab_size > 5, "vocab_size must exceed the reserved ids");
    require(d_model % n_heads == 0, "d_model must be divisible by n_heads");
    require(proj_out <= proj_hidden, "proj_out must not exceed proj_hidden");
    require(max_len >= 2 && n_enc_layers >= 1 && n_dec_layers >= 1, "bad model config");
  }

  json to_json() const {
    return json{{"vocab_size", vocab_size}, {"d_model", d_model},       {"n_heads", n_heads},
                {"n_enc_layers", n_enc_layers}, {"n_dec_layers", n_dec_layers}, {"ffn_dim", ffn_dim},
                {"max_len", max_len},       {"proj_hidden", proj_hidden}, {"proj_out", proj_out},
                {"use_positional", use_positional}};
  }

  static ModelConfig from_json(const json& j) {
    ModelConfig c;
    c.vocab_size = j.at("vocab_size").get<int>();
    c.d_model = j.at("d_model").get<int>();
    c.n_heads = j.at("n_heads").get<int>();
    c.n_enc_layers = j.at("n_enc_layers").get<int>();
    c.n_dec_layers = j.at("n_dec_layers").get<int>();
    c.ffn_dim = j.at("ffn_dim").get<int>();
    c.max_len = j.at("max_len").get<int>();
    c.proj_hidden = j.at("proj_hidden").get<int>();
    c.proj_out = j.at("proj_out").get<int>();
    c.use_positional = j.value("use_positional", true);
    return c;
  }
};

struct LayerNormParams {
  Tensor gain, bias;
};

struct AttentionParams {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
};

struct FfnParams {
  Tensor w1, b1, w2, b2;
};

struct EncoderLayerParams {
  LayerNormParams ln1;
  AttentionParams attn;
  LayerNormParams ln2;
  FfnParams ffn;
};

struct DecoderLayerParams {
  LayerNormParams ln1;
  AttentionParams self_attn;
  LayerNormParams ln2;
  AttentionParams cross_attn;
  LayerNormParams ln3;
  FfnParams ffn;
};

struct ProjectionParams {
  Tensor w1, b1, w2, b2;
};

// Full parameter tree. Training keeps two instances with identical shapes:
// the gradient-trained query copy and the momentum-updated key copy.
struct ModelParams {
  Tensor tok_emb;
  std::vector<EncoderLayerParams> enc_layers;
  LayerNormParams enc_ln;
  std::vector<DecoderLayerParams> dec_layers;
  LayerNormParams dec_ln;
  Tensor out_w, out_b;
  ProjectionParams enc_proj, dec_proj;

  static ModelParams init(const ModelConfig& cfg, RandomSource& rng) {
    cfg.validate();
    const int d = cfg.d_model;
    ModelParams p;
    p.tok_emb = Tensor::randn(cfg.vocab_size, d, rng, 0.02);
    auto ln = [&] { return LayerNormParams{Tensor::full(1, d, 1.0), Tensor(1, d)}; };
    auto attn = [&] {
      return AttentionParams{Tensor::xavier(d, d, rng), Tensor(1, d), Tensor::xavier(d, d, rng),
                             Tensor(1, d),              Tensor::xavier(d, d, rng), Tensor(1, d),
                             Tensor::xavier(d, d, rng), Tensor(1, d)};
    };
    auto ffn = [&] {
      return FfnParams{Tensor::xavier(d, cfg.ffn_dim, rng), Tensor(1, cfg.ffn_dim),
                       Tensor::xavier(cfg.ffn_dim, d, rng), Tensor(1, d)};
    };
    for (int i = 0; i < cfg.n_enc_layers; ++i) p.enc_layers.push_back({ln(), attn(), ln(), ffn()});
    p.enc_ln = ln();
    for (int i = 0; i < cfg.n_dec_layers; ++i)
      p.dec_layers.push_back({ln(), attn(), ln(), attn(), ln(), ffn()});
    p.dec_ln = ln();
    p.out_w = Tensor::xavier(d, cfg.vocab_size, rng);
    p.out_b = Tensor(1, cfg.vocab_size);
    auto proj = [&] {
      return ProjectionParams{Tensor::xavier(d, cfg.proj_hidden, rng), Tensor(1, cfg.proj_hidden),
                              Tensor::xavier(cfg.proj_hidden, cfg.proj_out, rng),
                              Tensor(1, cfg.proj_out)};
    };
    p.enc_proj = proj();
    p.dec_proj = proj();
    return p;
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
    auto ln = [&](const std::string& prefix, auto& l) {
      f(prefix + ".gain", l.gain);
      f(prefix + ".bias", l.bias);
    };
    auto attn = [&](const std::string& prefix, auto& a) {
      f(prefix + ".wq", a.wq);
      f(prefix + ".bq", a.bq);
      f(prefix + ".wk", a.wk);
      f(prefix + ".bk", a.bk);
      f(prefix + ".wv", a.wv);
      f(prefix + ".bv", a.bv);
      f(prefix + ".wo", a.wo);
      f(prefix + ".bo", a.bo);
    };
    auto ffn = [&](const std::string& prefix, auto& x) {
      f(prefix + ".w1", x.w1);
      f(prefix + ".b1", x.b1);
      f(prefix + ".w2", x.w2);
      f(prefix + ".b2", x.b2);
    };
    auto proj = [&](const std::string& prefix, auto& x) {
      f(prefix + ".w1", x.w1);
      f(prefix + ".b1", x.b1);
      f(prefix + ".w2", x.w2);
      f(prefix + ".b2", x.b2);
    };
    f("tok_emb", self.tok_emb);
    for (size_t i = 0; i < self.enc_layers.size(); ++i) {
      std::string base = "enc." + std::to_string(i);
      auto& l = self.enc_layers[i];
      ln(base + ".ln1", l.ln1);
      attn(base + ".attn", l.attn);
      ln(base + ".ln2", l.ln2);
      ffn(base + ".ffn", l.ffn);
    }
    ln("enc.ln_out", self.enc_ln);
    for (size_t i = 0; i < self.dec_layers.size(); ++i) {
      std::string base = "dec." + std::to_string(i);
      auto& l = self.dec_layers[i];
      ln(base + ".ln1", l.ln1);
      attn(base + ".self", l.self_attn);
      ln(base + ".ln2", l.ln2);
      attn(base + ".cross", l.cross_attn);
      ln(base + ".ln3", l.ln3);
      ffn(base + ".ffn", l.ffn);
    }
    ln("dec.ln_out", self.dec_ln);
    f("out.w", self.out_w);
    f("out.b", self.out_b);
    proj("enc_proj", self.enc_proj);
    proj("dec_proj", self.dec_proj);
  }
};

inline bool same_shapes(const ModelParams& a, const ModelParams& b) {
  std::vector<std::pair<int, int>> sa, sb;
  a.visit([&](const std::string&, const Tensor& t) { sa.emplace_back(t.rows, t.cols); });
  b.visit([&](const std::string&, const Tensor& t) { sb.emplace_back(t.rows, t.cols); });
  return sa == sb;
}

// Binds parameter tensors to tape leaves, caching by address so a tensor
// reused across layers maps to one node. Key branches bind as constants and
// therefore record no gradients.
class TapeBinder {
 public:
  TapeBinder(Tape& tape, bool trainable) : tape_(tape), trainable_(trainable) {}

  Val operator()(const Tensor& t) {
    auto it = cache_.find(&t);
    if (it != cache_.end()) return it->second;
    Val v = trainable_ ? tape_.param(t) : tape_.constant(t);
    cache_.emplace(&t, v);
    return v;
  }

  Tensor grad_of(const Tensor& t) const {
    auto it = cache_.find(&t);
    if (it == cache_.end()) return Tensor(t.rows, t.cols);
    return tape_.grad(it->second);
  }

  bool bound(const Tensor& t) const { return cache_.count(&t) > 0; }
  Tape& tape() { return tape_; }

 private:
  Tape& tape_;
  bool trainable_;
  std::unordered_map<const Tensor*, Val> cache_;
};

namespace detail {

inline Tensor sinusoidal_positions(int len, int d_model) {
  Tensor pe(len, d_model);
  for (int pos = 0; pos < len; ++pos) {
    for (int i = 0; i < d_model; i += 2) {
      double angle = pos / std::pow(10000.0, static_cast<double>(i) / d_model);
      pe.at(pos, i) = static_cast<real_t>(std::sin(angle));
      if (i + 1 < d_model) pe.at(pos, i + 1) = static_cast<real_t>(std::cos(angle));
    }
  }
  return pe;
}

constexpr real_t kMaskValue = real_t(-1e30);

// additive (len_q, len_k) mask: pad key columns blocked, optionally causal
inline Tensor attention_mask(int len_q, const std::vector<int>& key_ids, bool causal) {
  Tensor mask(len_q, static_cast<int>(key_ids.size()));
  for (int q = 0; q < len_q; ++q) {
    for (size_t k = 0; k < key_ids.size(); ++k) {
      bool blocked = key_ids[k] == Vocabulary::kPad || (causal && static_cast<int>(k) > q);
      if (blocked) mask.at(q, static_cast<int>(k)) = kMaskValue;
    }
  }
  return mask;
}

inline Val multi_head_attention(TapeBinder& B, const AttentionParams& p, Val q_in, Val kv_in,
                                const Tensor& mask, int n_heads) {
  Tape& t = B.tape();
  Val Q = t.add_bias(t.matmul(q_in, B(p.wq)), B(p.bq));
  Val K = t.add_bias(t.matmul(kv_in, B(p.wk)), B(p.bk));
  Val V = t.add_bias(t.matmul(kv_in, B(p.wv)), B(p.bv));
  const int d = t.value(Q).cols;
  const int dh = d / n_heads;
  Val ctx;
  for (int h = 0; h < n_heads; ++h) {
    Val Qh = t.slice_cols(Q, h * dh, (h + 1) * dh);
    Val Kh = t.slice_cols(K, h * dh, (h + 1) * dh);
    Val Vh = t.slice_cols(V, h * dh, (h + 1) * dh);
    Val scores = t.scale(t.matmul(Qh, t.transpose(Kh)), static_cast<real_t>(1.0 / std::sqrt(dh)));
    Val attn = t.row_softmax(t.add(scores, t.constant(mask)));
    Val ctx_h = t.matmul(attn, Vh);
    ctx = h == 0 ? ctx_h : t.concat_cols(ctx, ctx_h);
  }
  return t.add_bias(t.matmul(ctx, B(p.wo)), B(p.bo));
}

inline Val ffn_block(TapeBinder& B, const FfnParams& p, Val x) {
  Tape& t = B.tape();
  Val h = t.relu(t.add_bias(t.matmul(x, B(p.w1)), B(p.b1)));
  return t.add_bias(t.matmul(h, B(p.w2)), B(p.b2));
}

inline Val layer_norm(TapeBinder& B, const LayerNormParams& p, Val x) {
  return B.tape().layer_norm(x, B(p.gain), B(p.bias));
}

inline int checked_eos_position(const std::vector<int>& ids, int max_len) {
  require(static_cast<int>(ids.size()) <= max_len,
          "sequence length " + std::to_string(ids.size()) + " exceeds max_len " + std::to_string(max_len));
  int eos_pos = -1;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == Vocabulary::kEos) {
      require(eos_pos < 0, "sequence contains more than one eos");
      eos_pos = static_cast<int>(i);
    } else if (eos_pos >= 0) {
      require(ids[i] == Vocabulary::kPad, "only pad may follow eos");
    }
  }
  require(eos_pos >= 0, "sequence missing eos");
  return eos_pos;
}

}  // namespace detail

struct EncodeResult {
  Val states;  // (len, d_model), one state per token
  Val global;  // (1, d_model), state at the final eos slot
  int eos_pos = -1;
};

// Pre-LN transformer encoder. Pads after eos are masked out of attention, so
// the eos state is unaffected by padding.
inline EncodeResult encode(TapeBinder& B, const ModelParams& params, const ModelConfig& cfg,
                           const std::vector<int>& ids) {
  Tape& t = B.tape();
  int eos_pos = detail::checked_eos_position(ids, cfg.max_len);
  const int len = static_cast<int>(ids.size());
  Val x = t.embedding_rows(B(params.tok_emb), ids);
  if (cfg.use_positional) x = t.add(x, t.constant(detail::sinusoidal_positions(len, cfg.d_model)));
  Tensor mask = detail::attention_mask(len, ids, /*causal=*/false);
  for (const auto& layer : params.enc_layers) {
    Val normed = detail::layer_norm(B, layer.ln1, x);
    x = t.add(x, detail::multi_head_attention(B, layer.attn, normed, normed, mask, cfg.n_heads));
    x = t.add(x, detail::ffn_block(B, layer.ffn, detail::layer_norm(B, layer.ln2, x)));
  }
  Val H = detail::layer_norm(B, params.enc_ln, x);
  return {H, t.slice_rows(H, eos_pos, eos_pos + 1), eos_pos};
}

struct DecodeResult {
  Val logits;  // (len_target, vocab)
  Val states;  // (len_target, d_model)
  Val global;  // (1, d_model), decoder state at the final eos
};

// Decoder stack over an arbitrary prefix (bos ...): causal self-attention
// plus cross-attention over every encoder state including the global eos
// slot. Used teacher-forced during training and stepwise during search.
inline DecodeResult decode_prefix(TapeBinder& B, const ModelParams& params, const ModelConfig& cfg,
                                  Val enc_states, const std::vector<int>& src_ids,
                                  const std::vector<int>& target_ids) {
  Tape& t = B.tape();
  require(!target_ids.empty() && target_ids.front() == Vocabulary::kBos,
          "target must begin with bos");
  require(static_cast<int>(target_ids.size()) <= cfg.max_len, "target exceeds max_len");
  const int len = static_cast<int>(target_ids.size());
  Val x = t.embedding_rows(B(params.tok_emb), target_ids);
  if (cfg.use_positional) x = t.add(x, t.constant(detail::sinusoidal_positions(len, cfg.d_model)));
  Tensor self_mask = detail::attention_mask(len, target_ids, /*causal=*/true);
  Tensor cross_mask = detail::attention_mask(len, src_ids, /*causal=*/false);
  for (const auto& layer : params.dec_layers) {
    Val q = detail::layer_norm(B, layer.ln1, x);
    x = t.add(x, detail::multi_head_attention(B, layer.self_attn, q, q, self_mask, cfg.n_heads));
    x = t.add(x, detail::multi_head_attention(B, layer.cross_attn,
                                              detail::layer_norm(B, layer.ln2, x), enc_states,
                                              cross_mask, cfg.n_heads));
    x = t.add(x, detail::ffn_block(B, layer.ffn, detail::layer_norm(B, layer.ln3, x)));
  }
  Val D = detail::layer_norm(B, params.dec_ln, x);
  Val logits = t.add_bias(t.matmul(D, B(params.out_w)), B(params.out_b));
  return {logits, D, t.slice_rows(D, len - 1, len)};
}

// Teacher-forced decoding of a complete target (bos ... eos); the global
// state sits at the final eos position.
inline DecodeResult decode_teacher_forced(TapeBinder& B, const ModelParams& params,
                                          const ModelConfig& cfg, Val enc_states,
                                          const std::vector<int>& src_ids,
                                          const std::vector<int>& target_ids) {
  require(!target_ids.empty() && target_ids.back() == Vocabulary::kEos, "target must end with eos");
  return decode_prefix(B, params, cfg, enc_states, src_ids, target_ids);
}

// Projection head: hidden layer + relu + linear output, no normalization.
inline Val project(TapeBinder& B, const ProjectionParams& head, Val rep) {
  Tape& t = B.tape();
  Val h = t.relu(t.add_bias(t.matmul(rep, B(head.w1)), B(head.b1)));
  return t.add_bias(t.matmul(h, B(head.w2)), B(head.b2));
}

}  // namespace protoseq
