// protoseq: prototype retrieval + contrastive seq2seq pipeline.
//
// Stages communicate only through files; every stage writes atomically and
// derives its randomness from --seed mixed with the stage name, so reruns
// and stage reordering reproduce bit-identical artifacts.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "protoseq/data.hpp"
#include "protoseq/generation.hpp"
#include "protoseq/metrics.hpp"
#include "protoseq/serialize.hpp"
#include "protoseq/synth.hpp"
#include "protoseq/trainer.hpp"

namespace ps = protoseq;
using ps::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitUsage = 2;
constexpr int kExitMissingInput = 3;

void machine_error(const std::string& kind, const std::string& detail) {
  std::cerr << json{{"error", kind}, {"detail", detail}}.dump() << "\n";
}

ps::Normalizer make_normalizer(const std::string& lemma_table) {
  if (lemma_table.empty()) return ps::Normalizer();
  return ps::Normalizer(lemma_table);
}

// deterministic vocabulary over the corpus, concepts and targets
ps::Vocabulary build_vocabulary(const ps::CorpusStore& store,
                                const std::vector<ps::DatasetRecord>& records) {
  std::vector<std::vector<std::string>> lists;
  for (const ps::Sentence& s : store.sentences()) lists.push_back(s.tokens);
  for (const ps::DatasetRecord& r : records) {
    lists.push_back(r.concepts);
    for (const ps::TargetSentence& t : r.targets) lists.push_back(t.tokens);
  }
  return ps::Vocabulary::build(lists);
}

std::vector<std::string> vocab_tokens(const ps::Vocabulary& v) {
  std::vector<std::string> out;
  for (int i = 0; i < v.size(); ++i) out.push_back(v.token(i));
  return out;
}

ps::Vocabulary vocab_from_tokens(const std::vector<std::string>& tokens) {
  std::vector<std::vector<std::string>> lists;
  for (size_t i = 5; i < tokens.size(); ++i) lists.push_back({tokens[i]});
  return ps::Vocabulary::build(lists);
}

int cmd_synth_data(uint64_t seed, const std::string& out_dir, int train_sets, int dev_sets,
                   int test_sets, int fillers) {
  ps::SynthConfig cfg;
  cfg.seed = seed;
  cfg.train_sets = train_sets;
  cfg.dev_sets = dev_sets;
  cfg.test_sets = test_sets;
  cfg.fillers = fillers;
  ps::SynthOutput world = ps::generate_synthetic_world(cfg);
  std::filesystem::create_directories(out_dir);
  ps::save_synthetic_world(world, out_dir);
  std::cout << json{{"corpus_lines", world.corpus_lines.size()},
                    {"train_sets", world.train.size()},
                    {"dev_sets", world.dev.size()},
                    {"test_sets", world.test.size()}}
                   .dump()
            << "\n";
  return kExitOk;
}

int cmd_ingest(const std::string& input, const std::string& output, int min_len, int max_len,
               const std::string& lemma_table) {
  ps::require_input(input);
  ps::Normalizer norm = make_normalizer(lemma_table);
  std::ifstream in(input);
  ps::IngestReport report;
  ps::CorpusStore store = ps::ingest(in, norm, &report, min_len, max_len);
  ps::save_store(store, output);
  std::cout << json{{"kept", report.kept},
                    {"dropped_length", report.dropped_length},
                    {"dropped_invalid_utf8", report.dropped_invalid_utf8},
                    {"avg_tokens", store.avg_token_length()}}
                   .dump()
            << "\n";
  return kExitOk;
}

int cmd_index(const std::string& store_path, const std::string& output,
              const std::string& lemma_table) {
  ps::CorpusStore store = ps::load_store(store_path);
  ps::Normalizer norm = make_normalizer(lemma_table);
  ps::CoverageIndex index = ps::CoverageIndex::build(store, norm);
  index.save(output);
  std::cout << json{{"n_docs", index.n_docs()}, {"avgdl", index.avgdl()}}.dump() << "\n";
  return kExitOk;
}

int cmd_retrieve(const std::string& store_path, const std::string& index_path,
                 const std::string& dataset_path, const std::string& output, int n,
                 const std::string& lemma_table) {
  ps::CorpusStore store = ps::load_store(store_path);
  ps::CoverageIndex index = ps::CoverageIndex::load(index_path);
  std::vector<ps::DatasetRecord> records = ps::load_dataset(dataset_path);
  ps::Normalizer norm = make_normalizer(lemma_table);
  ps::atomic_write(output, [&](std::ostream& os) {
    for (const ps::DatasetRecord& rec : records) {
      ps::ConceptSet cs = ps::make_concept_set(rec.id, rec.concepts, norm);
      ps::CandidateList list = ps::stage1_retrieve(cs, index, store, n);
      os << ps::candidate_list_to_json(list).dump() << "\n";
    }
  });
  std::cout << json{{"concept_sets", records.size()}, {"n", n}}.dump() << "\n";
  return kExitOk;
}

int cmd_filter_train(const std::string& store_path, const std::string& dataset_path,
                     const std::string& candidates_path, const std::string& output, uint64_t seed,
                     int epochs, int batch_size, double lr, int d_embed, int hidden,
                     const std::string& pooling, const std::string& lemma_table) {
  ps::CorpusStore store = ps::load_store(store_path);
  std::vector<ps::DatasetRecord> records = ps::load_dataset(dataset_path);
  ps::Normalizer norm = make_normalizer(lemma_table);
  ps::Vocabulary vocab = build_vocabulary(store, records);

  std::map<int, ps::CandidateList> candidates;
  for (const json& rec : ps::read_jsonl(candidates_path)) {
    ps::CandidateList list = ps::candidate_list_from_json(rec);
    candidates[list.concept_set_id] = std::move(list);
  }
  std::vector<std::pair<ps::ConceptSet, ps::TargetSentence>> pairs;
  for (const ps::DatasetRecord& rec : records) {
    ps::ConceptSet cs = ps::make_concept_set(rec.id, rec.concepts, norm);
    for (const ps::TargetSentence& t : rec.targets) pairs.emplace_back(cs, t);
  }
  ps::FilterDataset dataset =
      ps::build_filter_dataset(pairs, candidates, store, vocab, ps::stage_seed(seed, "filter-data"));

  ps::FilterConfig mcfg;
  mcfg.vocab_size = vocab.size();
  mcfg.d_embed = d_embed;
  mcfg.hidden = hidden;
  mcfg.pooling = pooling == "mean" ? ps::FilterPooling::mean : ps::FilterPooling::attention;
  ps::FilterTrainConfig tcfg;
  tcfg.epochs = epochs;
  tcfg.batch_size = batch_size;
  tcfg.lr = lr;
  tcfg.seed = ps::stage_seed(seed, "filter-train");
  ps::FilterTrainResult result = ps::train_filter(dataset.samples, mcfg, tcfg);

  std::vector<std::pair<std::string, const ps::Tensor*>> tensors;
  result.scorer.visit(
      [&](const std::string& name, const ps::Tensor& t) { tensors.emplace_back(name, &t); });
  ps::save_named_tensors(output, tensors,
                         json{{"filter_config", result.scorer.config.to_json()},
                              {"vocab", vocab_tokens(vocab)}});
  std::cout << json{{"samples", dataset.samples.size()},
                    {"zero_candidate_warnings", dataset.zero_candidate_warnings},
                    {"final_loss", result.epoch_losses.empty() ? 0.0 : result.epoch_losses.back()}}
                   .dump()
            << "\n";
  return kExitOk;
}

ps::FilterScorer load_filter_with_vocab(const std::string& path, ps::Vocabulary* vocab_out) {
  ps::LoadedTensors raw = ps::load_named_tensors(path);
  ps::FilterConfig cfg = ps::FilterConfig::from_json(raw.meta.at("filter_config"));
  ps::RandomSource rng(0);
  ps::FilterScorer scorer = ps::FilterScorer::init(cfg, rng);
  scorer.visit([&](const std::string& name, ps::Tensor& t) {
    auto it = raw.tensors.find(name);
    ps::require(it != raw.tensors.end(), "filter checkpoint missing tensor: " + name);
    t = it->second;
  });
  if (vocab_out) {
    *vocab_out = vocab_from_tokens(raw.meta.at("vocab").get<std::vector<std::string>>());
  }
  return scorer;
}

int cmd_filter_score(const std::string& store_path, const std::string& filter_path,
                     const std::string& candidates_path, const std::string& dataset_path,
                     const std::string& output, int k) {
  ps::CorpusStore store = ps::load_store(store_path);
  ps::Vocabulary vocab;
  ps::FilterScorer scorer = load_filter_with_vocab(filter_path, &vocab);
  std::vector<ps::DatasetRecord> records = ps::load_dataset(dataset_path);
  std::map<int, const ps::DatasetRecord*> by_id;
  for (const auto& r : records) by_id[r.id] = &r;

  std::vector<ps::PrototypeRecord> out;
  for (const json& rec : ps::read_jsonl(candidates_path)) {
    ps::CandidateList list = ps::candidate_list_from_json(rec);
    auto it = by_id.find(list.concept_set_id);
    ps::require(it != by_id.end(),
                "candidates refer to unknown concept set " + std::to_string(list.concept_set_id));
    if (list.entries.empty()) continue;
    ps::PrototypeRecord pr;
    pr.concept_set_id = list.concept_set_id;
    pr.concepts = it->second->concepts;
    for (const ps::Prototype& p :
         ps::select_prototypes(list, scorer, store, vocab, it->second->concepts, k)) {
      pr.prototypes.push_back(p);
      pr.texts.push_back(store.by_id(p.sentence_id).text);
    }
    out.push_back(std::move(pr));
  }
  ps::save_prototypes(output, out);
  std::cout << json{{"concept_sets", out.size()}, {"k", k}}.dump() << "\n";
  return kExitOk;
}

struct TrainCliArgs {
  std::string store_path, train_path, dev_path, protos_path, dev_protos_path;
  std::string output, vocab_out, trace_path, lemma_table;
  uint64_t seed = 0;
  ps::TrainingConfig tcfg;
  ps::ModelConfig mcfg;
  std::string similarity = "dot";
  std::string sum_mode = "out";
  int save_every = 0;
};

int cmd_train(TrainCliArgs& args) {
  ps::CorpusStore store = ps::load_store(args.store_path);
  std::vector<ps::DatasetRecord> train_records = ps::load_dataset(args.train_path);
  std::vector<ps::DatasetRecord> dev_records;
  if (!args.dev_path.empty()) dev_records = ps::load_dataset(args.dev_path);
  ps::Normalizer norm = make_normalizer(args.lemma_table);

  std::vector<ps::DatasetRecord> all_records = train_records;
  all_records.insert(all_records.end(), dev_records.begin(), dev_records.end());
  ps::Vocabulary vocab = build_vocabulary(store, all_records);

  args.tcfg.seed = args.seed;
  args.tcfg.contrastive.similarity = ps::similarity_from_string(args.similarity);
  args.tcfg.contrastive.sum_mode = ps::sum_mode_from_string(args.sum_mode);
  int min_k = args.tcfg.dec_contrast ? 2 : 1;

  std::vector<ps::PrototypeRecord> protos = ps::load_prototypes(args.protos_path);
  ps::ExampleBuildReport train_rep = ps::build_training_examples(train_records, protos, norm, min_k);
  ps::require(!train_rep.examples.empty(), "no usable training examples");
  std::vector<ps::TrainingExample> dev_examples;
  if (!dev_records.empty() && !args.dev_protos_path.empty()) {
    std::vector<ps::PrototypeRecord> dev_protos = ps::load_prototypes(args.dev_protos_path);
    dev_examples = ps::build_training_examples(dev_records, dev_protos, norm, min_k).examples;
  }

  args.mcfg.vocab_size = vocab.size();
  ps::Trainer trainer(args.mcfg, args.tcfg, vocab);

  std::ofstream trace;
  if (!args.trace_path.empty()) trace.open(args.trace_path, std::ios::trunc);
  auto on_step = [&](const ps::LossReport& rep) {
    if (trace.is_open()) {
      trace << json{{"step", rep.step}, {"l_ce", rep.l_ce},   {"l_e", rep.l_e},
                    {"l_d", rep.l_d},   {"total", rep.total}, {"lr", rep.lr}}
                   .dump()
            << "\n";
    }
    if (args.save_every > 0 && rep.step % args.save_every == 0) {
      ps::save_model(args.output + ".step" + std::to_string(rep.step), trainer.query_params(),
                     args.mcfg, json{{"vocab", vocab_tokens(vocab)}, {"step", rep.step}});
    }
  };
  ps::TrainLoopResult result = ps::train_loop(train_rep.examples, dev_examples, trainer, on_step);

  json meta{{"vocab", vocab_tokens(vocab)},
            {"steps", trainer.step()},
            {"best_dev_ce", result.best_dev_ce},
            {"best_step", result.best_step}};
  ps::save_model(args.output, result.best_params, args.mcfg, meta);
  if (!args.vocab_out.empty()) vocab.save(args.vocab_out);
  std::cout << json{{"steps", trainer.step()},
                    {"train_examples", train_rep.examples.size()},
                    {"skipped", train_rep.skipped},
                    {"best_dev_ce", result.best_dev_ce}}
                   .dump()
            << "\n";
  return kExitOk;
}

int cmd_generate(const std::string& model_path, const std::string& vocab_path,
                 const std::string& input_path, const std::string& output, int beam,
                 double length_penalty, int max_len) {
  ps::LoadedModel model = ps::load_model(model_path);
  ps::Vocabulary vocab;
  if (!vocab_path.empty()) {
    vocab = ps::Vocabulary::load(vocab_path);
  } else {
    ps::require(model.meta.contains("vocab"), "no vocabulary file given and none in checkpoint");
    vocab = vocab_from_tokens(model.meta.at("vocab").get<std::vector<std::string>>());
  }
  ps::BeamConfig bcfg;
  bcfg.beam_size = beam;
  bcfg.length_penalty = length_penalty;
  bcfg.max_len = max_len;

  std::vector<json> inputs = ps::read_jsonl(input_path);
  ps::atomic_write(output, [&](std::ostream& os) {
    int line_no = 0;
    for (const json& rec : inputs) {
      std::vector<std::string> concepts = rec.at("concept_set").get<std::vector<std::string>>();
      std::string prototype;
      if (rec.contains("prototype")) {
        prototype = rec.at("prototype").get<std::string>();
      } else if (rec.contains("prototypes") && !rec.at("prototypes").empty()) {
        prototype = rec.at("prototypes").front().at("text").get<std::string>();
      } else {
        ps::fail("generate: record has neither prototype nor prototypes");
      }
      int id = rec.contains("concept_set_id") ? rec.at("concept_set_id").get<int>() : line_no;
      std::vector<int> input_ids = vocab.encode_source(concepts, ps::tokenize(prototype));
      std::vector<int> out_ids = ps::beam_search(model.params, model.config, input_ids, bcfg);
      std::vector<std::string> tokens = vocab.decode(out_ids);
      std::string text;
      for (size_t i = 0; i < tokens.size(); ++i) {
        if (i) text += ' ';
        text += tokens[i];
      }
      os << json{{"concept_set_id", id}, {"text", text}}.dump() << "\n";
      ++line_no;
    }
  });
  std::cout << json{{"generated", inputs.size()}, {"beam", beam}}.dump() << "\n";
  return kExitOk;
}

int cmd_evaluate(const std::string& hyps_path, const std::string& refs_path,
                 const std::string& output) {
  std::map<int, std::vector<std::string>> hyps;
  for (const json& rec : ps::read_jsonl(hyps_path)) {
    hyps[rec.at("concept_set_id").get<int>()] = ps::tokenize(rec.at("text").get<std::string>());
  }
  std::map<int, std::vector<std::vector<std::string>>> refs;
  for (const json& rec : ps::read_jsonl(refs_path)) {
    if (rec.contains("targets")) {
      auto& list = refs[rec.at("id").get<int>()];
      for (const auto& t : rec.at("targets")) {
        list.push_back(ps::tokenize(t.at("text").get<std::string>()));
      }
    } else if (rec.contains("refs")) {
      auto& list = refs[rec.at("concept_set_id").get<int>()];
      for (const auto& r : rec.at("refs")) list.push_back(ps::tokenize(r.get<std::string>()));
    } else {
      ps::fail("evaluate: reference record needs targets or refs");
    }
  }
  std::vector<ps::EvalPair> pairs;
  for (const auto& [id, hyp] : hyps) {
    auto it = refs.find(id);
    ps::require(it != refs.end(), "no references for concept set " + std::to_string(id));
    pairs.push_back({hyp, it->second});
  }
  ps::require(!pairs.empty(), "evaluate: no aligned hypothesis/reference pairs");
  json report{{"pairs", pairs.size()},
              {"bleu3", ps::corpus_bleu(pairs, 3)},
              {"bleu4", ps::corpus_bleu(pairs, 4)},
              {"rouge2", ps::rouge(pairs, ps::RougeVariant::two)},
              {"rougeL", ps::rouge(pairs, ps::RougeVariant::l)}};
  std::string text = report.dump();
  if (!output.empty()) ps::atomic_write_text(output, text + "\n");
  std::cout << text << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prototype retrieval + contrastive seq2seq pipeline"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth-data", "generate a synthetic corpus and datasets");
  uint64_t synth_seed = 0;
  std::string synth_out = "data";
  int synth_train = 120, synth_dev = 30, synth_test = 30, synth_fillers = 400;
  synth->add_option("--seed", synth_seed, "root seed")->required();
  synth->add_option("--out", synth_out, "output directory");
  synth->add_option("--train-sets", synth_train);
  synth->add_option("--dev-sets", synth_dev);
  synth->add_option("--test-sets", synth_test);
  synth->add_option("--fillers", synth_fillers);

  auto* ing = app.add_subcommand("ingest", "ingest a sentence-per-line corpus");
  std::string ing_input, ing_output = "store.jsonl", ing_lemmas;
  int ing_min = 5, ing_max = 100;
  ing->add_option("--input", ing_input)->required();
  ing->add_option("--output", ing_output);
  ing->add_option("--min-len", ing_min);
  ing->add_option("--max-len", ing_max);
  ing->add_option("--lemma-table", ing_lemmas, "override the built-in irregular-form table");

  auto* idx = app.add_subcommand("index", "build the coverage/bm25 index");
  std::string idx_store, idx_output = "index.jsonl", idx_lemmas;
  idx->add_option("--store", idx_store)->required();
  idx->add_option("--output", idx_output);
  idx->add_option("--lemma-table", idx_lemmas);

  auto* ret = app.add_subcommand("retrieve", "stage-1 candidate retrieval");
  std::string ret_store, ret_index, ret_dataset, ret_output = "candidates.jsonl", ret_lemmas;
  int ret_n = 8;
  ret->add_option("--store", ret_store)->required();
  ret->add_option("--index", ret_index)->required();
  ret->add_option("--dataset", ret_dataset)->required();
  ret->add_option("--output", ret_output);
  ret->add_option("--n", ret_n, "candidates per concept set");
  ret->add_option("--lemma-table", ret_lemmas);

  auto* ftr = app.add_subcommand("filter-train", "train the stage-2 prototype scorer");
  std::string ftr_store, ftr_dataset, ftr_cands, ftr_output = "filter.ckpt";
  std::string ftr_pooling = "attention", ftr_lemmas;
  uint64_t ftr_seed = 1;
  int ftr_epochs = 30, ftr_batch = 16, ftr_dembed = 32, ftr_hidden = 32;
  double ftr_lr = 1e-2;
  ftr->add_option("--store", ftr_store)->required();
  ftr->add_option("--dataset", ftr_dataset)->required();
  ftr->add_option("--candidates", ftr_cands)->required();
  ftr->add_option("--output", ftr_output);
  ftr->add_option("--seed", ftr_seed);
  ftr->add_option("--epochs", ftr_epochs);
  ftr->add_option("--batch-size", ftr_batch);
  ftr->add_option("--lr", ftr_lr);
  ftr->add_option("--d-embed", ftr_dembed);
  ftr->add_option("--hidden", ftr_hidden);
  ftr->add_option("--pooling", ftr_pooling)->check(CLI::IsMember({"attention", "mean"}));
  ftr->add_option("--lemma-table", ftr_lemmas);

  auto* fsc = app.add_subcommand("filter-score", "select top-k prototypes per concept set");
  std::string fsc_store, fsc_filter, fsc_cands, fsc_dataset, fsc_output = "prototypes.jsonl";
  int fsc_k = 2;
  fsc->add_option("--store", fsc_store)->required();
  fsc->add_option("--filter", fsc_filter)->required();
  fsc->add_option("--candidates", fsc_cands)->required();
  fsc->add_option("--dataset", fsc_dataset)->required();
  fsc->add_option("--output", fsc_output);
  fsc->add_option("--k", fsc_k, "prototypes to keep");

  auto* trn = app.add_subcommand("train", "train the generator with contrastive modules");
  TrainCliArgs targs;
  trn->add_option("--store", targs.store_path)->required();
  trn->add_option("--train", targs.train_path)->required();
  trn->add_option("--dev", targs.dev_path);
  trn->add_option("--protos", targs.protos_path)->required();
  trn->add_option("--dev-protos", targs.dev_protos_path);
  trn->add_option("--output", targs.output)->required();
  trn->add_option("--vocab-out", targs.vocab_out);
  trn->add_option("--trace", targs.trace_path);
  trn->add_option("--seed", targs.seed, "root seed")->required();
  trn->add_option("--lr", targs.tcfg.lr);
  trn->add_option("--warmup", targs.tcfg.warmup_steps);
  trn->add_option("--max-updates", targs.tcfg.max_updates);
  trn->add_option("--batch-size", targs.tcfg.batch_size);
  trn->add_option("--label-smoothing", targs.tcfg.label_smoothing);
  trn->add_option("--weight-decay", targs.tcfg.adam.weight_decay);
  trn->add_option("--lambda1", targs.tcfg.lambda1);
  trn->add_option("--lambda2", targs.tcfg.lambda2);
  trn->add_option("--temperature", targs.tcfg.contrastive.temperature);
  trn->add_option("--similarity", targs.similarity)->check(CLI::IsMember({"dot", "cos"}));
  trn->add_option("--sum-mode", targs.sum_mode)->check(CLI::IsMember({"out", "in"}));
  trn->add_option("--bank-capacity", targs.tcfg.bank_capacity);
  trn->add_option("--momentum", targs.tcfg.momentum);
  trn->add_option("--eval-every", targs.tcfg.eval_every);
  trn->add_option("--save-every", targs.save_every);
  trn->add_flag_callback("--no-enc-contrast", [&targs]() { targs.tcfg.enc_contrast = false; });
  trn->add_flag_callback("--no-dec-contrast", [&targs]() { targs.tcfg.dec_contrast = false; });
  trn->add_option("--d-model", targs.mcfg.d_model);
  trn->add_option("--heads", targs.mcfg.n_heads);
  trn->add_option("--enc-layers", targs.mcfg.n_enc_layers);
  trn->add_option("--dec-layers", targs.mcfg.n_dec_layers);
  trn->add_option("--ffn", targs.mcfg.ffn_dim);
  trn->add_option("--max-seq-len", targs.mcfg.max_len);
  trn->add_option("--proj-hidden", targs.mcfg.proj_hidden);
  trn->add_option("--proj-out", targs.mcfg.proj_out);
  trn->add_option("--lemma-table", targs.lemma_table);

  auto* gen = app.add_subcommand("generate", "beam-search generation");
  std::string gen_model, gen_vocab, gen_input, gen_output = "hypotheses.jsonl";
  int gen_beam = 5, gen_maxlen = 24;
  double gen_alpha = 1.0;
  gen->add_option("--model", gen_model)->required();
  gen->add_option("--vocab", gen_vocab);
  gen->add_option("--input", gen_input)->required();
  gen->add_option("--output", gen_output);
  gen->add_option("--beam", gen_beam);
  gen->add_option("--length-penalty", gen_alpha);
  gen->add_option("--max-len", gen_maxlen);

  auto* ev = app.add_subcommand("evaluate", "corpus bleu/rouge report");
  std::string ev_hyps, ev_refs, ev_output;
  ev->add_option("--hyps", ev_hyps)->required();
  ev->add_option("--refs", ev_refs)->required();
  ev->add_option("--output", ev_output);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cout << app.help() << std::endl;
    machine_error("usage", e.what());
    return kExitUsage;
  }

  try {
    if (*synth) {
      return cmd_synth_data(synth_seed, synth_out, synth_train, synth_dev, synth_test, synth_fillers);
    }
    if (*ing) return cmd_ingest(ing_input, ing_output, ing_min, ing_max, ing_lemmas);
    if (*idx) return cmd_index(idx_store, idx_output, idx_lemmas);
    if (*ret) return cmd_retrieve(ret_store, ret_index, ret_dataset, ret_output, ret_n, ret_lemmas);
    if (*ftr) {
      return cmd_filter_train(ftr_store, ftr_dataset, ftr_cands, ftr_output, ftr_seed, ftr_epochs,
                              ftr_batch, ftr_lr, ftr_dembed, ftr_hidden, ftr_pooling, ftr_lemmas);
    }
    if (*fsc) return cmd_filter_score(fsc_store, fsc_filter, fsc_cands, fsc_dataset, fsc_output, fsc_k);
    if (*trn) return cmd_train(targs);
    if (*gen) return cmd_generate(gen_model, gen_vocab, gen_input, gen_output, gen_beam, gen_alpha, gen_maxlen);
    if (*ev) return cmd_evaluate(ev_hyps, ev_refs, ev_output);
  } catch (const ps::MissingInputError& e) {
    machine_error("missing_input", e.path);
    return kExitMissingInput;
  } catch (const std::exception& e) {
    machine_error("failure", e.what());
    return kExitError;
  }
  return kExitUsage;
}
