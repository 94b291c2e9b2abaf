#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "protoseq/contrastive.hpp"
#include "protoseq/data.hpp"
#include "protoseq/model.hpp"
#include "protoseq/optimizer.hpp"

namespace protoseq {

// One (concept set, target) pair with its k selected prototypes. Identity is
// shared across examples with the same source or the same target so queue
// entries recognise each other as positives.
struct TrainingExample {
  ConceptSet concept_set;
  TargetSentence target;
  std::vector<std::vector<std::string>> prototypes;
  GroupIdentity identity;
};

struct TrainingConfig {
  double lr = 3e-5;
  AdamConfig adam{0.9, 0.999, 1e-6, 0.1};
  int warmup_steps = 500;
  int max_updates = 15000;
  double label_smoothing = 0.1;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  bool enc_contrast = true;
  bool dec_contrast = true;
  ContrastiveConfig contrastive;
  double momentum = 0.999;
  size_t bank_capacity = 256;  // desk-scale default; 4096 in the reference setup
  int batch_size = 8;
  uint64_t seed = 1;
  int eval_every = 0;  // 0 disables periodic dev evaluation

  void validate() const {
    require(lambda1 >= 0 && lambda2 >= 0, "lambda weights must be nonnegative");
    require(warmup_steps <= max_updates, "warmup must not exceed max updates");
    require(batch_size > 0 && max_updates >= 0, "bad training config");
    contrastive.validate();
  }
};

// Linear ramp to lr over the warmup steps, then polynomial (power 1) decay to
// zero at max_updates. Update numbering starts at 1 for the first step.
inline double lr_schedule(int step, const TrainingConfig& cfg) {
  require(step >= 0, "lr_schedule: negative step");
  if (cfg.warmup_steps > 0 && step <= cfg.warmup_steps) {
    return cfg.lr * static_cast<double>(step) / cfg.warmup_steps;
  }
  if (step >= cfg.max_updates) return 0.0;
  double span = static_cast<double>(cfg.max_updates - cfg.warmup_steps);
  return cfg.lr * (1.0 - static_cast<double>(step - cfg.warmup_steps) / span);
}

struct BranchInputs {
  std::vector<int> main_input;     // S + sep + p_i + eos
  std::vector<int> enc_key_input;  // S + sep + T + eos
  std::vector<int> dec_key_input;  // S + sep + p_j + eos, j != i
  std::vector<int> target;         // bos + T + eos
};

// Assembles the three branch inputs for prototype index i. The decoder key
// branch uses the next prototype (j != i); a contrastive branch input is
// omitted when its module is disabled.
inline BranchInputs build_branches(const TrainingExample& ex, int proto_index,
                                   const Vocabulary& vocab, bool enc_contrast, bool dec_contrast) {
  const int k = static_cast<int>(ex.prototypes.size());
  require(k >= 1, "training example has no prototypes");
  require(proto_index >= 0 && proto_index < k, "prototype index out of range");
  require(!dec_contrast || k >= 2, "decoder contrast requires at least two prototypes");
  BranchInputs out;
  out.main_input = vocab.encode_source(ex.concept_set.concepts, ex.prototypes[static_cast<size_t>(proto_index)]);
  out.target = vocab.encode_target(ex.target.tokens);
  if (enc_contrast) {
    out.enc_key_input = vocab.encode_source(ex.concept_set.concepts, ex.target.tokens);
  }
  if (dec_contrast) {
    int j = (proto_index + 1) % k;
    out.dec_key_input = vocab.encode_source(ex.concept_set.concepts, ex.prototypes[static_cast<size_t>(j)]);
  }
  return out;
}

struct LossReport {
  int step = 0;
  double l_ce = 0.0;
  double l_e = 0.0;
  double l_d = 0.0;
  double total = 0.0;
  double lr = 0.0;
};

// Owns the query/key parameter copies, both memory banks and the optimizer
// state. One trainer instance drives one training loop.
class Trainer {
 public:
  Trainer(const ModelConfig& mcfg, const TrainingConfig& tcfg, const Vocabulary& vocab)
      : model_cfg_(mcfg),
        cfg_(tcfg),
        vocab_(vocab),
        init_rng_(stage_seed(tcfg.seed, "model-init")),
        query_(ModelParams::init(mcfg, init_rng_)),
        key_(query_),  // key copies start as exact clones of the query params
        enc_bank_(tcfg.bank_capacity),
        dec_bank_(tcfg.bank_capacity),
        opt_(collect_params(), tcfg.adam) {
    cfg_.validate();
  }

  const ModelParams& query_params() const { return query_; }
  const ModelParams& key_params() const { return key_; }
  const MemoryBank& encoder_bank() const { return enc_bank_; }
  const MemoryBank& decoder_bank() const { return dec_bank_; }
  int step() const { return step_; }
  const ModelConfig& model_config() const { return model_cfg_; }
  const TrainingConfig& config() const { return cfg_; }

  // One optimizer update over a batch: main branch on query params, key
  // branches on the gradient-free key params, combined loss
  // total = L_CE + lambda1*L_E + lambda2*L_D, then momentum update and
  // enqueue of the fresh keys with their identities.
  LossReport train_step(const std::vector<TrainingExample>& batch, int proto_index) {
    require(!batch.empty(), "train_step: empty batch");

    // key-branch forwards (no gradient recording)
    std::vector<Tensor> enc_keys, dec_keys;
    std::vector<GroupIdentity> identities;
    for (const TrainingExample& ex : batch) {
      int i = proto_index % static_cast<int>(ex.prototypes.size());
      BranchInputs b = build_branches(ex, i, vocab_, cfg_.enc_contrast, cfg_.dec_contrast);
      identities.push_back(ex.identity);
      if (cfg_.enc_contrast) {
        Tape t;
        TapeBinder binder(t, false);
        EncodeResult enc = encode(binder, key_, model_cfg_, b.enc_key_input);
        enc_keys.push_back(t.value(project(binder, key_.enc_proj, enc.global)));
      }
      if (cfg_.dec_contrast) {
        Tape t;
        TapeBinder binder(t, false);
        EncodeResult enc = encode(binder, key_, model_cfg_, b.dec_key_input);
        DecodeResult dec =
            decode_teacher_forced(binder, key_, model_cfg_, enc.states, b.dec_key_input, b.target);
        dec_keys.push_back(t.value(project(binder, key_.dec_proj, dec.global)));
      }
    }

    // main branch with gradients
    Tape tape;
    TapeBinder binder(tape, true);
    Val ce_sum, le_sum, ld_sum;
    for (size_t e = 0; e < batch.size(); ++e) {
      const TrainingExample& ex = batch[e];
      int i = proto_index % static_cast<int>(ex.prototypes.size());
      BranchInputs b = build_branches(ex, i, vocab_, cfg_.enc_contrast, cfg_.dec_contrast);

      EncodeResult enc = encode(binder, query_, model_cfg_, b.main_input);
      DecodeResult dec =
          decode_teacher_forced(binder, query_, model_cfg_, enc.states, b.main_input, b.target);
      const int tgt_len = static_cast<int>(b.target.size());
      std::vector<int> next(b.target.begin() + 1, b.target.end());
      Val ce = tape.softmax_cross_entropy(tape.slice_rows(dec.logits, 0, tgt_len - 1), next,
                                          static_cast<real_t>(cfg_.label_smoothing));
      ce_sum = ce_sum.valid() ? tape.add(ce_sum, ce) : ce;

      if (cfg_.enc_contrast) {
        Val z_q = project(binder, query_.enc_proj, enc.global);
        Val le = contrast_loss(tape, z_q, enc_bank_, enc_keys[e], ex.identity);
        le_sum = le_sum.valid() ? tape.add(le_sum, le) : le;
      }
      if (cfg_.dec_contrast) {
        Val z_q = project(binder, query_.dec_proj, dec.global);
        Val ld = contrast_loss(tape, z_q, dec_bank_, dec_keys[e], ex.identity);
        ld_sum = ld_sum.valid() ? tape.add(ld_sum, ld) : ld;
      }
    }
    const real_t inv_n = static_cast<real_t>(1.0 / static_cast<double>(batch.size()));
    Val l_ce = tape.scale(ce_sum, inv_n);
    Val total = l_ce;
    std::optional<Val> l_e, l_d;
    if (le_sum.valid()) {
      l_e = tape.scale(le_sum, inv_n);
      total = tape.add(total, tape.scale(*l_e, static_cast<real_t>(cfg_.lambda1)));
    }
    if (ld_sum.valid()) {
      l_d = tape.scale(ld_sum, inv_n);
      total = tape.add(total, tape.scale(*l_d, static_cast<real_t>(cfg_.lambda2)));
    }

    LossReport report;
    report.l_ce = tape.value(l_ce).data[0];
    report.l_e = l_e ? tape.value(*l_e).data[0] : 0.0;
    report.l_d = l_d ? tape.value(*l_d).data[0] : 0.0;
    report.total = tape.value(total).data[0];
    if (!std::isfinite(report.total) || !std::isfinite(report.l_ce) ||
        !std::isfinite(report.l_e) || !std::isfinite(report.l_d)) {
      fail("non-finite loss at step " + std::to_string(step_ + 1) + ": ce=" +
           std::to_string(report.l_ce) + " e=" + std::to_string(report.l_e) + " d=" +
           std::to_string(report.l_d));
    }

    tape.backward(total);
    std::vector<Tensor> grads;
    grads.reserve(param_ptrs_.size());
    for (Tensor* p : param_ptrs_) grads.push_back(binder.grad_of(*p));

    ++step_;
    report.step = step_;
    report.lr = lr_schedule(step_, cfg_);
    opt_.step(grads, report.lr);

    momentum_update(key_, query_, cfg_.momentum);
    require(same_shapes(key_, query_), "key/query shapes diverged");
    if (cfg_.enc_contrast) enc_bank_.enqueue(enc_keys, identities);
    if (cfg_.dec_contrast) dec_bank_.enqueue(dec_keys, identities);
    return report;
  }

  // Mean teacher-forced cross-entropy of the main branch; no contrastive
  // terms, no parameter updates. Used for dev-set model selection. With
  // smoothing < 0 the training config's label smoothing applies; pass 0 for
  // plain cross-entropy.
  double cross_entropy(const std::vector<TrainingExample>& examples, int proto_index = 0,
                       double smoothing = -1.0) const {
    require(!examples.empty(), "cross_entropy: no examples");
    if (smoothing < 0) smoothing = cfg_.label_smoothing;
    double total = 0.0;
    for (const TrainingExample& ex : examples) {
      int i = proto_index % static_cast<int>(ex.prototypes.size());
      BranchInputs b = build_branches(ex, i, vocab_, false, false);
      Tape tape;
      TapeBinder binder(tape, false);
      EncodeResult enc = encode(binder, query_, model_cfg_, b.main_input);
      DecodeResult dec =
          decode_teacher_forced(binder, query_, model_cfg_, enc.states, b.main_input, b.target);
      std::vector<int> next(b.target.begin() + 1, b.target.end());
      Val ce = tape.softmax_cross_entropy(
          tape.slice_rows(dec.logits, 0, static_cast<int>(b.target.size()) - 1), next,
          static_cast<real_t>(smoothing));
      total += tape.value(ce).data[0];
    }
    return total / static_cast<double>(examples.size());
  }

 private:
  Val contrast_loss(Tape& tape, Val z_q, const MemoryBank& bank, const Tensor& own_key,
                    const GroupIdentity& identity) {
    // contrast set = bank snapshot + the in-batch matching key, appended last
    const int d = own_key.cols;
    Tensor keys(static_cast<int>(bank.size()) + 1, d);
    for (size_t i = 0; i < bank.size(); ++i) {
      for (int c = 0; c < d; ++c) keys.at(static_cast<int>(i), c) = bank.key(i).at(0, c);
    }
    for (int c = 0; c < d; ++c) keys.at(static_cast<int>(bank.size()), c) = own_key.at(0, c);
    std::vector<int> positives = positive_indices(identity, bank);
    positives.push_back(static_cast<int>(bank.size()));
    return info_nce_loss(tape, z_q, keys, positives, cfg_.contrastive);
  }

  std::vector<Tensor*> collect_params() {
    param_ptrs_.clear();
    query_.visit([&](const std::string&, Tensor& t) { param_ptrs_.push_back(&t); });
    return param_ptrs_;
  }

  ModelConfig model_cfg_;
  TrainingConfig cfg_;
  Vocabulary vocab_;
  RandomSource init_rng_;
  ModelParams query_, key_;
  MemoryBank enc_bank_, dec_bank_;
  std::vector<Tensor*> param_ptrs_;
  Adam opt_;
  int step_ = 0;
};

struct TrainLoopResult {
  ModelParams final_params;
  ModelParams best_params;
  double best_dev_ce = std::numeric_limits<double>::infinity();
  int best_step = -1;
  std::vector<LossReport> trace;
};

// Epoch loop with per-epoch shuffling; the prototype index cycles with the
// epoch so each prototype serves both as main input and as decoder key.
// Dev-set selection keeps the lowest cross-entropy checkpoint.
inline TrainLoopResult train_loop(const std::vector<TrainingExample>& train,
                                  const std::vector<TrainingExample>& dev, Trainer& trainer,
                                  const std::function<void(const LossReport&)>& on_step = {}) {
  const TrainingConfig& cfg = trainer.config();
  require(!train.empty(), "train_loop: empty training set");
  for (const TrainingExample& ex : train) {
    require(!ex.prototypes.empty(), "train_loop: example without prototypes");
    require(!cfg.dec_contrast || ex.prototypes.size() >= 2,
            "decoder contrast requires k >= 2 prototypes per example");
  }
  TrainLoopResult result;
  RandomSource shuffle_rng(stage_seed(cfg.seed, "batch-order"));
  std::vector<size_t> order(train.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  int epoch = 0;
  while (trainer.step() < cfg.max_updates) {
    shuffle_rng.shuffle(order);
    for (size_t start = 0; start < order.size() && trainer.step() < cfg.max_updates;
         start += static_cast<size_t>(cfg.batch_size)) {
      size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      std::vector<TrainingExample> batch;
      batch.reserve(end - start);
      for (size_t i = start; i < end; ++i) batch.push_back(train[order[i]]);
      LossReport report = trainer.train_step(batch, epoch);
      result.trace.push_back(report);
      if (on_step) on_step(report);
      if (cfg.eval_every > 0 && !dev.empty() && trainer.step() % cfg.eval_every == 0) {
        double ce = trainer.cross_entropy(dev);
        if (ce < result.best_dev_ce) {
          result.best_dev_ce = ce;
          result.best_step = trainer.step();
          result.best_params = trainer.query_params();
        }
      }
    }
    ++epoch;
  }
  result.final_params = trainer.query_params();
  if (result.best_step < 0) {
    result.best_params = result.final_params;
    if (!dev.empty()) result.best_dev_ce = trainer.cross_entropy(dev);
  }
  return result;
}

// Assemble training examples from dataset records and their selected
// prototypes; records with fewer than min_k prototypes are skipped and
// counted.
struct ExampleBuildReport {
  std::vector<TrainingExample> examples;
  int skipped = 0;
};

inline ExampleBuildReport build_training_examples(const std::vector<DatasetRecord>& records,
                                                  const std::vector<PrototypeRecord>& protos,
                                                  const Normalizer& norm, int min_k) {
  std::map<int, const PrototypeRecord*> by_id;
  for (const auto& p : protos) by_id[p.concept_set_id] = &p;
  ExampleBuildReport out;
  for (const DatasetRecord& rec : records) {
    auto it = by_id.find(rec.id);
    if (it == by_id.end() || static_cast<int>(it->second->texts.size()) < min_k) {
      ++out.skipped;
      continue;
    }
    std::vector<std::vector<std::string>> proto_tokens;
    for (const std::string& text : it->second->texts) proto_tokens.push_back(tokenize(text));
    for (const TargetSentence& target : rec.targets) {
      TrainingExample ex;
      ex.concept_set = make_concept_set(rec.id, rec.concepts, norm);
      ex.target = target;
      ex.prototypes = proto_tokens;
      ex.identity = {rec.id, target.tid};
      out.examples.push_back(std::move(ex));
    }
  }
  return out;
}

}  // namespace protoseq
