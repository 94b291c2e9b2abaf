#pragma once

#include <string>
#include <vector>

#include "protoseq/filter.hpp"
#include "protoseq/io.hpp"
#include "protoseq/retrieval.hpp"

namespace protoseq {

// One concept set with its gold targets. gold_proto_ids are generator
// metadata (corpus line ids of the planted high-quality prototypes) used by
// evaluation tooling, not by training.
struct DatasetRecord {
  int id = 0;
  std::vector<std::string> concepts;
  std::vector<TargetSentence> targets;
  std::vector<int> gold_proto_ids;
};

inline std::vector<DatasetRecord> load_dataset(const std::string& path) {
  std::vector<DatasetRecord> out;
  for (const json& rec : read_jsonl(path)) {
    DatasetRecord r;
    r.id = rec.at("id").get<int>();
    r.concepts = rec.at("concepts").get<std::vector<std::string>>();
    for (const auto& t : rec.at("targets")) {
      TargetSentence ts;
      ts.tid = t.at("tid").get<int>();
      ts.text = t.at("text").get<std::string>();
      ts.tokens = tokenize(ts.text);
      r.targets.push_back(std::move(ts));
    }
    if (rec.contains("gold_proto_ids")) {
      r.gold_proto_ids = rec.at("gold_proto_ids").get<std::vector<int>>();
    }
    require(!r.targets.empty(), "dataset record " + std::to_string(r.id) + " has no targets");
    out.push_back(std::move(r));
  }
  return out;
}

inline void save_dataset(const std::string& path, const std::vector<DatasetRecord>& records) {
  atomic_write(path, [&](std::ostream& os) {
    for (const DatasetRecord& r : records) {
      json rec;
      rec["id"] = r.id;
      rec["concepts"] = r.concepts;
      json targets = json::array();
      for (const TargetSentence& t : r.targets) {
        targets.push_back({{"tid", t.tid}, {"text", t.text}});
      }
      rec["targets"] = std::move(targets);
      if (!r.gold_proto_ids.empty()) rec["gold_proto_ids"] = r.gold_proto_ids;
      os << rec.dump() << "\n";
    }
  });
}

// Selected prototypes per concept set, as written by filter-score: the id,
// score and text of each kept candidate plus the concept tokens so the file
// is self-contained for generation.
struct PrototypeRecord {
  int concept_set_id = 0;
  std::vector<std::string> concepts;
  std::vector<Prototype> prototypes;
  std::vector<std::string> texts;  // parallel to prototypes
};

inline void save_prototypes(const std::string& path, const std::vector<PrototypeRecord>& records) {
  atomic_write(path, [&](std::ostream& os) {
    for (const PrototypeRecord& r : records) {
      json rec;
      rec["concept_set_id"] = r.concept_set_id;
      rec["concept_set"] = r.concepts;
      json protos = json::array();
      for (size_t i = 0; i < r.prototypes.size(); ++i) {
        protos.push_back({{"id", r.prototypes[i].sentence_id},
                          {"score", r.prototypes[i].score},
                          {"text", r.texts[i]}});
      }
      rec["prototypes"] = std::move(protos);
      os << rec.dump() << "\n";
    }
  });
}

inline std::vector<PrototypeRecord> load_prototypes(const std::string& path) {
  std::vector<PrototypeRecord> out;
  for (const json& rec : read_jsonl(path)) {
    PrototypeRecord r;
    r.concept_set_id = rec.at("concept_set_id").get<int>();
    if (rec.contains("concept_set")) {
      r.concepts = rec.at("concept_set").get<std::vector<std::string>>();
    }
    for (const auto& p : rec.at("prototypes")) {
      r.prototypes.push_back({p.at("id").get<int>(), p.at("score").get<double>()});
      r.texts.push_back(p.at("text").get<std::string>());
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace protoseq
