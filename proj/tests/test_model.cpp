#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "protoseq/model.hpp"
#include "protoseq/serialize.hpp"

using namespace protoseq;

namespace {

ModelConfig tiny_config(int vocab_size) {
  ModelConfig cfg;
  cfg.vocab_size = vocab_size;
  cfg.d_model = 16;
  cfg.n_heads = 2;
  cfg.n_enc_layers = 1;
  cfg.n_dec_layers = 1;
  cfg.ffn_dim = 32;
  cfg.max_len = 32;
  cfg.proj_hidden = 16;
  cfg.proj_out = 8;
  return cfg;
}

Vocabulary tiny_vocab() {
  return Vocabulary::build({{"cat", "dog", "runs", "sits", "the", "park", "a", "in"}});
}

}  // namespace

TEST_CASE("vocabulary reserves special ids and round-trips", "[model]") {
  Vocabulary v = tiny_vocab();
  REQUIRE(v.id("<pad>") == Vocabulary::kPad);
  REQUIRE(v.id("<eos>") == Vocabulary::kEos);
  REQUIRE(v.id("cat") >= 5);
  REQUIRE(v.id("zebra") == Vocabulary::kUnk);

  auto src = v.encode_source({"cat"}, {"the", "cat", "runs"});
  REQUIRE(src.front() == v.id("cat"));
  REQUIRE(src[1] == Vocabulary::kSep);
  REQUIRE(src.back() == Vocabulary::kEos);

  auto tgt = v.encode_target({"the", "dog", "sits"});
  REQUIRE(tgt.front() == Vocabulary::kBos);
  REQUIRE(tgt.back() == Vocabulary::kEos);

  std::string path = std::filesystem::temp_directory_path() / "protoseq_vocab_test.jsonl";
  v.save(path);
  Vocabulary loaded = Vocabulary::load(path);
  REQUIRE(loaded.size() == v.size());
  REQUIRE(loaded.id("park") == v.id("park"));
  std::filesystem::remove(path);
}

TEST_CASE("encode produces one state per token and is deterministic", "[model]") {
  Vocabulary v = tiny_vocab();
  ModelConfig cfg = tiny_config(v.size());
  RandomSource rng(7);
  ModelParams params = ModelParams::init(cfg, rng);
  auto ids = v.encode_source({"cat"}, {"the", "cat", "runs"});

  Tape t1;
  TapeBinder b1(t1, false);
  EncodeResult r1 = encode(b1, params, cfg, ids);
  REQUIRE(t1.value(r1.states).rows == static_cast<int>(ids.size()));
  REQUIRE(t1.value(r1.states).cols == cfg.d_model);
  REQUIRE(t1.value(r1.global).rows == 1);

  Tape t2;
  TapeBinder b2(t2, false);
  EncodeResult r2 = encode(b2, params, cfg, ids);
  REQUIRE(t1.value(r1.states).data == t2.value(r2.states).data);
}

TEST_CASE("padding after eos does not change the global state", "[model]") {
  Vocabulary v = tiny_vocab();
  ModelConfig cfg = tiny_config(v.size());
  RandomSource rng(8);
  ModelParams params = ModelParams::init(cfg, rng);
  auto ids = v.encode_source({"dog"}, {"a", "dog", "sits"});

  Tape t1;
  TapeBinder b1(t1, false);
  Tensor base = t1.value(encode(b1, params, cfg, ids).global);

  auto padded = ids;
  for (int i = 0; i < 4; ++i) padded.push_back(Vocabulary::kPad);
  Tape t2;
  TapeBinder b2(t2, false);
  Tensor with_pads = t2.value(encode(b2, params, cfg, padded).global);

  REQUIRE(base.cols == with_pads.cols);
  for (int c = 0; c < base.cols; ++c) {
    REQUIRE(with_pads.at(0, c) == Catch::Approx(base.at(0, c)).margin(1e-9));
  }
}

TEST_CASE("encode validates its input sequence", "[model]") {
  Vocabulary v = tiny_vocab();
  ModelConfig cfg = tiny_config(v.size());
  RandomSource rng(9);
  ModelParams params = ModelParams::init(cfg, rng);
  Tape t;
  TapeBinder b(t, false);
  // missing eos
  REQUIRE_THROWS(encode(b, params, cfg, {v.id("cat"), v.id("runs")}));
  // two eos
  REQUIRE_THROWS(encode(b, params, cfg, {v.id("cat"), Vocabulary::kEos, Vocabulary::kEos}));
  // non-pad after eos
  REQUIRE_THROWS(encode(b, params, cfg, {Vocabulary::kEos, v.id("cat")}));
  // overlength
  std::vector<int> long_ids(static_cast<size_t>(cfg.max_len) + 1, v.id("cat"));
  long_ids.back() = Vocabulary::kEos;
  REQUIRE_THROWS(encode(b, params, cfg, long_ids));
}

TEST_CASE("teacher-forced decoding respects the causal mask", "[model]") {
  Vocabulary v = tiny_vocab();
  ModelConfig cfg = tiny_config(v.size());
  RandomSource rng(10);
  ModelParams params = ModelParams::init(cfg, rng);
  auto src = v.encode_source({"cat"}, {"the", "cat", "runs"});

  auto logits_for = [&](const std::vector<int>& tgt) {
    Tape t;
    TapeBinder b(t, false);
    EncodeResult enc = encode(b, params, cfg, src);
    DecodeResult dec = decode_teacher_forced(b, params, cfg, enc.states, src, tgt);
    return t.value(dec.logits);
  };

  auto tgt1 = v.encode_target({"the", "dog", "sits"});
  auto tgt2 = v.encode_target({"the", "dog", "runs"});  // differs at position 3
  Tensor l1 = logits_for(tgt1), l2 = logits_for(tgt2);
  REQUIRE(l1.rows == static_cast<int>(tgt1.size()));
  REQUIRE(l1.cols == v.size());
  // positions 0..2 see identical prefixes, so their logits must match exactly
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < l1.cols; ++c) REQUIRE(l1.at(r, c) == l2.at(r, c));
  }
  // the perturbed position must differ somewhere at or after it
  bool differs = false;
  for (int c = 0; c < l1.cols; ++c) differs |= l1.at(3, c) != l2.at(3, c);
  REQUIRE(differs);
}

TEST_CASE("gradient flows through cross-attention into encoder states", "[model]") {
  Vocabulary v = tiny_vocab();
  ModelConfig cfg = tiny_config(v.size());
  RandomSource rng(11);
  ModelParams params = ModelParams::init(cfg, rng);
  auto src = v.encode_source({"dog"}, {"a", "dog", "sits"});
  auto tgt = v.encode_target({"the", "dog", "sits"});

  Tape t;
  TapeBinder b(t, true);
  EncodeResult enc = encode(b, params, cfg, src);
  DecodeResult dec = decode_teacher_forced(b, params, cfg, enc.states, src, tgt);
  std::vector<int> next(tgt.begin() + 1, tgt.end());
  Val loss = t.softmax_cross_entropy(
      t.slice_rows(dec.logits, 0, static_cast<int>(tgt.size()) - 1), next, real_t(0.1));
  t.backward(loss);

  double cross_norm = 0.0, enc_norm = 0.0;
  for (const auto& layer : params.dec_layers) cross_norm += l2_norm(b.grad_of(layer.cross_attn.wq));
  for (const auto& layer : params.enc_layers) enc_norm += l2_norm(b.grad_of(layer.attn.wq));
  REQUIRE(cross_norm > 0.0);
  // encoder parameters receive gradient only because cross-attention links them
  REQUIRE(enc_norm > 0.0);
}

TEST_CASE("without positional encodings the encoder is permutation-equivariant", "[model]") {
  Vocabulary v = tiny_vocab();
  ModelConfig cfg = tiny_config(v.size());
  cfg.use_positional = false;
  RandomSource rng(12);
  ModelParams params = ModelParams::init(cfg, rng);

  std::vector<int> ids = {v.id("cat"), v.id("dog"), v.id("runs"), Vocabulary::kEos};
  std::vector<int> perm = {v.id("runs"), v.id("cat"), v.id("dog"), Vocabulary::kEos};
  // perm maps original row 0->1, 1->2, 2->0

  Tape t1;
  TapeBinder b1(t1, false);
  Tensor h = t1.value(encode(b1, params, cfg, ids).states);
  Tape t2;
  TapeBinder b2(t2, false);
  Tensor hp = t2.value(encode(b2, params, cfg, perm).states);

  int map[3] = {1, 2, 0};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < cfg.d_model; ++c) {
      REQUIRE(hp.at(map[r], c) == Catch::Approx(h.at(r, c)).margin(1e-9));
    }
  }
}

TEST_CASE("projection head maps to proj_out and zero params give zero", "[model]") {
  Vocabulary v = tiny_vocab();
  ModelConfig cfg = tiny_config(v.size());
  RandomSource rng(13);
  ModelParams params = ModelParams::init(cfg, rng);

  Tape t;
  TapeBinder b(t, false);
  Val rep = t.constant(Tensor::randn(1, cfg.d_model, rng));
  Val z = project(b, params.enc_proj, rep);
  REQUIRE(t.value(z).rows == 1);
  REQUIRE(t.value(z).cols == cfg.proj_out);

  ProjectionParams zero{Tensor(cfg.d_model, cfg.proj_hidden), Tensor(1, cfg.proj_hidden),
                        Tensor(cfg.proj_hidden, cfg.proj_out), Tensor(1, cfg.proj_out)};
  Tape t2;
  TapeBinder b2(t2, false);
  Val z0 = project(b2, zero, t2.constant(Tensor::randn(1, cfg.d_model, rng)));
  for (real_t x : t2.value(z0).data) REQUIRE(x == 0.0);
}

TEST_CASE("query and key parameter trees share shapes", "[model]") {
  Vocabulary v = tiny_vocab();
  ModelConfig cfg = tiny_config(v.size());
  RandomSource rng(14);
  ModelParams query = ModelParams::init(cfg, rng);
  ModelParams key = query;  // key copy starts as an exact clone
  REQUIRE(same_shapes(query, key));
  size_t count = 0;
  query.visit([&](const std::string&, const Tensor&) { ++count; });
  REQUIRE(count > 20);
}

TEST_CASE("model checkpoint round-trips bit-exactly", "[model]") {
  Vocabulary v = tiny_vocab();
  ModelConfig cfg = tiny_config(v.size());
  RandomSource rng(15);
  ModelParams params = ModelParams::init(cfg, rng);
  std::string path = std::filesystem::temp_directory_path() / "protoseq_model_test.ckpt";
  save_model(path, params, cfg, {{"note", "test"}});
  LoadedModel loaded = load_model(path);
  REQUIRE(loaded.config.d_model == cfg.d_model);
  REQUIRE(loaded.meta.at("note") == "test");
  bool equal = true;
  std::vector<const Tensor*> a, b;
  params.visit([&](const std::string&, const Tensor& t) { a.push_back(&t); });
  loaded.params.visit([&](const std::string&, const Tensor& t) { b.push_back(&t); });
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) equal &= a[i]->data == b[i]->data;
  REQUIRE(equal);
  std::filesystem::remove(path);
}
