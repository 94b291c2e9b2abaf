#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "protoseq/data.hpp"

namespace protoseq {

// Synthetic world generator. Each concept set gets fluent-template targets
// and good prototypes plus junk-template distractors that contain the same
// concept stems: distractors are shorter with repeated terms so plain BM25
// tends to rank them above the good prototypes, while the junk filler tokens
// make the two families trivially separable for a trained scorer.
struct SynthConfig {
  uint64_t seed = 1;
  int train_sets = 120;
  int dev_sets = 30;
  int test_sets = 30;
  int fillers = 400;
  double two_target_frac = 0.3;     // fraction of sets with a second gold target
  double shared_target_frac = 0.1;  // fraction of sets that clone another set's target
  int good_per_set = 2;
  int distractors_per_set = 3;
};

struct SynthOutput {
  std::vector<std::string> corpus_lines;
  std::vector<DatasetRecord> train, dev, test;
};

namespace synth_detail {

inline const std::vector<std::string>& nouns() {
  static const std::vector<std::string> v = {
      "dog",    "cat",     "bird",   "horse",  "rabbit", "farmer", "chef",
      "teacher", "student", "artist", "child",  "man",    "woman",  "friend",
      "painter", "dancer",  "singer", "runner", "worker", "neighbor"};
  return v;
}

inline const std::vector<std::string>& verbs() {
  // regular verbs only, so surface inflection is mechanical
  static const std::vector<std::string> v = {
      "walk",  "jump",  "cook",  "paint", "climb", "dance", "play",
      "watch", "clean", "wash",  "visit", "follow", "help", "call",
      "push",  "pull",  "kick",  "lift",  "open",  "close"};
  return v;
}

inline const std::vector<std::string>& places() {
  static const std::vector<std::string> v = {"park",   "garden", "kitchen", "forest",
                                             "river",  "beach",  "market",  "street",
                                             "yard",   "field",  "meadow",  "harbor"};
  return v;
}

inline const std::vector<std::string>& adjectives() {
  static const std::vector<std::string> v = {"happy", "young", "old",   "little",
                                             "big",   "quiet", "clever", "gentle"};
  return v;
}

inline const std::vector<std::string>& junk_tokens() {
  static const std::vector<std::string> v = {"zorp", "blix", "qux", "womp", "glorp", "fizzle"};
  return v;
}

inline const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> v = {
      "often",  "people", "see",  "things", "water",   "always", "someone", "goes",
      "away",   "looks",  "around", "very", "nice",    "day",    "morning", "evening",
      "light",  "sound",  "place",  "time", "together", "weather", "slowly", "again"};
  return v;
}

inline std::string plural(const std::string& noun) {
  if (noun == "child") return "children";
  if (noun == "man") return "men";
  if (noun == "woman") return "women";
  return noun + "s";
}

enum class VerbForm { base, third, ing, past };

inline std::string inflect(const std::string& verb, VerbForm form) {
  bool e_final = !verb.empty() && verb.back() == 'e';
  switch (form) {
    case VerbForm::base:
      return verb;
    case VerbForm::third:
      return verb + "s";
    case VerbForm::ing:
      return e_final ? verb.substr(0, verb.size() - 1) + "ing" : verb + "ing";
    case VerbForm::past:
      return e_final ? verb + "d" : verb + "ed";
  }
  return verb;
}

struct ConceptPick {
  std::string noun, verb, place;
  std::string adjective;  // optional
  std::string noun2;      // optional

  std::vector<std::string> concepts() const {
    std::vector<std::string> out = {noun, verb, place};
    if (!adjective.empty()) out.push_back(adjective);
    if (!noun2.empty()) out.push_back(noun2);
    return out;
  }
};

// fluent family: used for gold targets and good prototypes
inline std::string fluent_sentence(const ConceptPick& c, int variant, RandomSource& rng) {
  std::string adj = c.adjective.empty() ? "" : c.adjective + " ";
  std::string tail = c.noun2.empty() ? "" : " with a " + c.noun2;
  switch (variant % 4) {
    case 0:
      return "the " + adj + c.noun + " " + inflect(c.verb, VerbForm::third) + " in the " + c.place +
             tail;
    case 1:
      return "a " + adj + c.noun + " is " + inflect(c.verb, VerbForm::ing) + " near the " + c.place +
             tail;
    case 2:
      return "the " + adj + plural(c.noun) + " " + inflect(c.verb, VerbForm::base) + " at the " +
             c.place + tail + " every day";
    default: {
      const char* opener = rng.uniform() < 0.5 ? "yesterday the " : "today the ";
      return std::string(opener) + adj + c.noun + " " + inflect(c.verb, VerbForm::past) +
             " happily in the " + c.place + tail;
    }
  }
}

// junk family: full concept coverage, short, repeated terms, junk filler
inline std::string junk_sentence(const ConceptPick& c, int variant, RandomSource& rng) {
  const auto& junk = junk_tokens();
  std::string j1 = junk[rng.uniform_index(junk.size())];
  std::string j2 = junk[rng.uniform_index(junk.size())];
  std::string extra;
  if (!c.adjective.empty()) extra += " " + c.adjective;
  if (!c.noun2.empty()) extra += " " + c.noun2;
  switch (variant % 3) {
    case 0:
      return j1 + " " + plural(c.noun) + " " + inflect(c.verb, VerbForm::ing) + " " + j2 + " " +
             c.place + extra;
    case 1:
      return c.noun + " " + j1 + " " + c.verb + " " + c.verb + " " + j2 + " " + c.place + extra;
    default:
      return j1 + " " + c.noun + " " + j2 + " " + inflect(c.verb, VerbForm::past) + " " + c.place +
             " " + c.place + extra;
  }
}

inline std::string filler_sentence(RandomSource& rng) {
  const auto& pool = filler_words();
  int len = 6 + static_cast<int>(rng.uniform_index(5));
  std::string out;
  for (int i = 0; i < len; ++i) {
    if (i) out += ' ';
    out += pool[rng.uniform_index(pool.size())];
  }
  return out;
}

}  // namespace synth_detail

inline SynthOutput generate_synthetic_world(const SynthConfig& cfg) {
  using namespace synth_detail;
  SynthOutput out;
  RandomSource rng(stage_seed(cfg.seed, "synth-data"));

  const int total_sets = cfg.train_sets + cfg.dev_sets + cfg.test_sets;
  std::set<std::tuple<std::string, std::string, std::string>> used_combos;

  struct PendingSet {
    DatasetRecord record;
    std::vector<std::string> good_texts;
    std::vector<std::string> distractor_texts;
  };
  std::vector<PendingSet> sets;
  int next_tid = 0;

  for (int i = 0; i < total_sets; ++i) {
    ConceptPick pick;
    do {
      pick.noun = nouns()[rng.uniform_index(nouns().size())];
      pick.verb = verbs()[rng.uniform_index(verbs().size())];
      pick.place = places()[rng.uniform_index(places().size())];
    } while (!used_combos.insert({pick.noun, pick.verb, pick.place}).second);
    if (rng.uniform() < 0.3) pick.adjective = adjectives()[rng.uniform_index(adjectives().size())];
    if (rng.uniform() < 0.15) {
      pick.noun2 = nouns()[rng.uniform_index(nouns().size())];
      if (pick.noun2 == pick.noun) pick.noun2.clear();
    }

    PendingSet ps;
    ps.record.id = i;
    ps.record.concepts = pick.concepts();

    int target_variant = static_cast<int>(rng.uniform_index(4));
    TargetSentence target;
    target.tid = next_tid++;
    target.text = fluent_sentence(pick, target_variant, rng);
    target.tokens = tokenize(target.text);
    ps.record.targets.push_back(target);
    if (rng.uniform() < cfg.two_target_frac) {
      TargetSentence second;
      second.tid = next_tid++;
      second.text = fluent_sentence(pick, target_variant + 1, rng);
      second.tokens = tokenize(second.text);
      if (second.text != target.text) ps.record.targets.push_back(second);
    }
    // N-to-1 mapping: clone a previous set's first target (same tid)
    if (!sets.empty() && rng.uniform() < cfg.shared_target_frac) {
      const PendingSet& donor = sets[rng.uniform_index(sets.size())];
      ps.record.targets.push_back(donor.record.targets.front());
    }

    for (int g = 0; g < cfg.good_per_set; ++g) {
      // good prototypes use the fluent variants the target did not take
      ps.good_texts.push_back(fluent_sentence(pick, target_variant + 2 + g, rng));
    }
    for (int d = 0; d < cfg.distractors_per_set; ++d) {
      ps.distractor_texts.push_back(junk_sentence(pick, d, rng));
    }
    sets.push_back(std::move(ps));
  }

  // assemble and shuffle the corpus so line order carries no signal
  std::vector<std::pair<std::string, int>> tagged;  // (line, owning set for good protos)
  for (int i = 0; i < total_sets; ++i) {
    for (const std::string& text : sets[static_cast<size_t>(i)].distractor_texts) {
      tagged.emplace_back(text, -1);
    }
    for (const std::string& text : sets[static_cast<size_t>(i)].good_texts) {
      tagged.emplace_back(text, i);
    }
  }
  for (int f = 0; f < cfg.fillers; ++f) tagged.emplace_back(filler_sentence(rng), -1);
  rng.shuffle(tagged);

  for (size_t line = 0; line < tagged.size(); ++line) {
    out.corpus_lines.push_back(tagged[line].first);
    int set_idx = tagged[line].second;
    if (set_idx >= 0) {
      sets[static_cast<size_t>(set_idx)].record.gold_proto_ids.push_back(static_cast<int>(line));
    }
  }

  for (int i = 0; i < total_sets; ++i) {
    DatasetRecord& rec = sets[static_cast<size_t>(i)].record;
    if (i < cfg.train_sets) {
      out.train.push_back(std::move(rec));
    } else if (i < cfg.train_sets + cfg.dev_sets) {
      out.dev.push_back(std::move(rec));
    } else {
      out.test.push_back(std::move(rec));
    }
  }
  return out;
}

inline void save_synthetic_world(const SynthOutput& world, const std::string& dir) {
  atomic_write(dir + "/corpus.txt", [&](std::ostream& os) {
    for (const std::string& line : world.corpus_lines) os << line << "\n";
  });
  save_dataset(dir + "/train.jsonl", world.train);
  save_dataset(dir + "/dev.jsonl", world.dev);
  save_dataset(dir + "/test.jsonl", world.test);
}

}  // namespace protoseq
