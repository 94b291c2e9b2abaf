#pragma once

#include <istream>
#include <set>
#include <string>
#include <vector>

#include "protoseq/io.hpp"
#include "protoseq/text.hpp"

namespace protoseq {

struct Sentence {
  int id = 0;
  std::string text;
  std::vector<std::string> tokens;
  std::set<std::string> norm_tokens;

  int length() const { return static_cast<int>(tokens.size()); }
};

// Immutable once ingestion finishes; readers may share it freely.
class CorpusStore {
 public:
  void add(Sentence s) { sentences_.push_back(std::move(s)); }

  const Sentence& by_id(int id) const {
    require(id >= 0 && static_cast<size_t>(id) < sentences_.size(), "unknown sentence id: " + std::to_string(id));
    return sentences_[static_cast<size_t>(id)];
  }

  const std::vector<Sentence>& sentences() const { return sentences_; }
  size_t size() const { return sentences_.size(); }

  double avg_token_length() const {
    if (sentences_.empty()) return 0.0;
    double total = 0.0;
    for (const auto& s : sentences_) total += s.length();
    return total / static_cast<double>(sentences_.size());
  }

 private:
  std::vector<Sentence> sentences_;
};

struct IngestReport {
  size_t kept = 0;
  size_t dropped_length = 0;
  size_t dropped_invalid_utf8 = 0;
};

// One sentence per line; sentences outside [min_len, max_len] tokens are
// dropped, invalid UTF-8 lines are skipped and counted. Duplicate texts are
// kept under distinct ids.
inline CorpusStore ingest(std::istream& lines, const Normalizer& norm, IngestReport* report = nullptr,
                          int min_len = 5, int max_len = 100) {
  CorpusStore store;
  IngestReport local;
  std::string line;
  int next_id = 0;
  while (std::getline(lines, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!utf8_valid(line)) {
      ++local.dropped_invalid_utf8;
      continue;
    }
    Sentence s;
    s.text = line;
    s.tokens = tokenize(line);
    if (s.length() < min_len || s.length() > max_len) {
      ++local.dropped_length;
      continue;
    }
    for (const auto& t : s.tokens) s.norm_tokens.insert(norm.normalize(t));
    s.id = next_id++;
    store.add(std::move(s));
    ++local.kept;
  }
  if (report) *report = local;
  return store;
}

inline void save_store(const CorpusStore& store, const std::string& path) {
  atomic_write(path, [&](std::ostream& os) {
    for (const Sentence& s : store.sentences()) {
      json rec;
      rec["id"] = s.id;
      rec["text"] = s.text;
      rec["tokens"] = s.tokens;
      rec["norm"] = s.norm_tokens;
      os << rec.dump() << "\n";
    }
  });
}

inline CorpusStore load_store(const std::string& path) {
  CorpusStore store;
  int expect = 0;
  for (const json& rec : read_jsonl(path)) {
    Sentence s;
    s.id = rec.at("id").get<int>();
    require(s.id == expect++, "corpus store: ids must be dense and increasing");
    s.text = rec.at("text").get<std::string>();
    s.tokens = rec.at("tokens").get<std::vector<std::string>>();
    for (const auto& n : rec.at("norm")) s.norm_tokens.insert(n.get<std::string>());
    store.add(std::move(s));
  }
  return store;
}

}  // namespace protoseq
