// In-process walkthrough of the library: builds a tiny synthetic world, runs
// two-stage retrieval, trains the generator briefly with both contrastive
// modules, and prints retrieved prototypes plus a few generated sentences.
// The protoseq CLI runs the same pipeline through files; see README.md.

#include <iostream>
#include <sstream>

#include "protoseq/generation.hpp"
#include "protoseq/metrics.hpp"
#include "protoseq/synth.hpp"
#include "protoseq/trainer.hpp"

using namespace protoseq;

int main() {
  SynthConfig scfg;
  scfg.seed = 2024;
  scfg.train_sets = 40;
  scfg.dev_sets = 8;
  scfg.test_sets = 8;
  scfg.fillers = 80;
  SynthOutput world = generate_synthetic_world(scfg);

  Normalizer norm;
  std::stringstream corpus;
  for (const auto& line : world.corpus_lines) corpus << line << "\n";
  CorpusStore store = ingest(corpus, norm);
  CoverageIndex index = CoverageIndex::build(store, norm);
  std::cout << "corpus: " << store.size() << " sentences, avg length "
            << store.avg_token_length() << "\n";

  std::vector<std::vector<std::string>> token_lists;
  for (const Sentence& s : store.sentences()) token_lists.push_back(s.tokens);
  for (const DatasetRecord& rec : world.train) {
    token_lists.push_back(rec.concepts);
    for (const TargetSentence& t : rec.targets) token_lists.push_back(t.tokens);
  }
  Vocabulary vocab = Vocabulary::build(token_lists);

  // stage 1 + stage 2 for the first training concept set
  const DatasetRecord& first = world.train.front();
  ConceptSet cs = make_concept_set(first.id, first.concepts, norm);
  CandidateList candidates = stage1_retrieve(cs, index, store, 8);
  std::cout << "\nconcepts:";
  for (const auto& c : first.concepts) std::cout << ' ' << c;
  std::cout << "\nstage-1 candidates (coverage, bm25):\n";
  for (const Candidate& c : candidates.entries) {
    std::cout << "  [" << c.coverage << ", " << c.bm25 << "] " << store.by_id(c.id).text << "\n";
  }

  std::map<int, CandidateList> cand_map;
  std::vector<std::pair<ConceptSet, TargetSentence>> pairs;
  for (const DatasetRecord& rec : world.train) {
    ConceptSet rcs = make_concept_set(rec.id, rec.concepts, norm);
    cand_map[rec.id] = stage1_retrieve(rcs, index, store, 8);
    for (const TargetSentence& t : rec.targets) pairs.emplace_back(rcs, t);
  }
  FilterDataset fds = build_filter_dataset(pairs, cand_map, store, vocab, 99);
  FilterConfig fcfg;
  fcfg.vocab_size = vocab.size();
  FilterTrainConfig ftcfg;
  ftcfg.epochs = 20;
  FilterTrainResult filter = train_filter(fds.samples, fcfg, ftcfg);
  auto protos = select_prototypes(candidates, filter.scorer, store, vocab, first.concepts, 2);
  std::cout << "stage-2 prototypes:\n";
  for (const Prototype& p : protos) {
    std::cout << "  [" << p.score << "] " << store.by_id(p.sentence_id).text << "\n";
  }

  // short contrastive training run
  std::vector<TrainingExample> train;
  for (const DatasetRecord& rec : world.train) {
    std::vector<std::vector<std::string>> ptoks;
    for (const Prototype& p :
         select_prototypes(cand_map[rec.id], filter.scorer, store, vocab, rec.concepts, 2)) {
      ptoks.push_back(store.by_id(p.sentence_id).tokens);
    }
    if (ptoks.size() < 2) continue;
    for (const TargetSentence& t : rec.targets) {
      train.push_back({make_concept_set(rec.id, rec.concepts, norm), t, ptoks, {rec.id, t.tid}});
    }
  }
  ModelConfig mcfg;
  mcfg.vocab_size = vocab.size();
  mcfg.d_model = 32;
  mcfg.n_heads = 2;
  mcfg.n_enc_layers = 1;
  mcfg.n_dec_layers = 1;
  mcfg.ffn_dim = 64;
  mcfg.proj_hidden = 32;
  mcfg.proj_out = 16;
  TrainingConfig tcfg;
  tcfg.lr = 2e-3;
  tcfg.warmup_steps = 30;
  tcfg.max_updates = 200;
  tcfg.batch_size = 8;
  tcfg.bank_capacity = 64;
  tcfg.seed = 7;
  Trainer trainer(mcfg, tcfg, vocab);
  std::cout << "\ntraining " << train.size() << " examples for " << tcfg.max_updates << " steps\n";
  TrainLoopResult result = train_loop(train, {}, trainer);
  std::cout << "first step total " << result.trace.front().total << ", last "
            << result.trace.back().total << "\n";

  BeamConfig bc;
  bc.max_len = 20;
  std::cout << "\ngenerations:\n";
  for (size_t i = 0; i < 3 && i < train.size(); ++i) {
    BranchInputs b = build_branches(train[i], 0, vocab, false, false);
    std::vector<int> out = beam_search(trainer.query_params(), mcfg, b.main_input, bc);
    std::cout << "  target: " << train[i].target.text << "\n  output:";
    for (const std::string& t : vocab.decode(out)) std::cout << ' ' << t;
    std::cout << "\n";
  }
  return 0;
}
