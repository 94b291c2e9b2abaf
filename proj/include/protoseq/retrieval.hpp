#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "protoseq/corpus.hpp"

namespace protoseq {

struct ConceptSet {
  int id = 0;
  std::vector<std::string> concepts;        // surface forms, order preserved
  std::vector<std::string> norm_concepts;   // pairwise distinct keys
  int collapsed_duplicates = 0;
};

inline ConceptSet make_concept_set(int id, const std::vector<std::string>& concepts, const Normalizer& norm) {
  require(!concepts.empty(), "concept set must contain at least one concept");
  ConceptSet s;
  s.id = id;
  s.concepts = concepts;
  for (const auto& c : concepts) {
    std::string key = norm.normalize(c);
    if (std::find(s.norm_concepts.begin(), s.norm_concepts.end(), key) != s.norm_concepts.end()) {
      ++s.collapsed_duplicates;
      continue;
    }
    s.norm_concepts.push_back(std::move(key));
  }
  return s;
}

struct BM25Params {
  double k1 = 1.2;
  double b = 0.75;
};

struct Posting {
  int id;
  int tf;
};

// Inverted index over normalized token keys with the document statistics
// BM25 needs. Term frequencies count token occurrences that normalize to the
// key; document length is the surface token count.
class CoverageIndex {
 public:
  static CoverageIndex build(const CorpusStore& store, const Normalizer& norm) {
    CoverageIndex idx;
    idx.doc_len_.reserve(store.size());
    for (const Sentence& s : store.sentences()) {
      std::map<std::string, int> tf;
      for (const auto& tok : s.tokens) ++tf[norm.normalize(tok)];
      for (const auto& [key, count] : tf) idx.postings_[key].push_back({s.id, count});
      idx.doc_len_.push_back(s.length());
      idx.total_len_ += s.length();
    }
    return idx;
  }

  int n_docs() const { return static_cast<int>(doc_len_.size()); }
  double avgdl() const { return doc_len_.empty() ? 0.0 : static_cast<double>(total_len_) / doc_len_.size(); }

  int df(const std::string& key) const {
    auto it = postings_.find(key);
    return it == postings_.end() ? 0 : static_cast<int>(it->second.size());
  }

  const std::vector<Posting>* postings(const std::string& key) const {
    auto it = postings_.find(key);
    return it == postings_.end() ? nullptr : &it->second;
  }

  int doc_len(int id) const {
    require(id >= 0 && static_cast<size_t>(id) < doc_len_.size(),
            "sentence id not in index: " + std::to_string(id));
    return doc_len_[static_cast<size_t>(id)];
  }

  // +1 inside the log keeps idf nonnegative for very common terms
  double idf(const std::string& key) const {
    int d = df(key);
    if (d == 0) return 0.0;
    return std::log((n_docs() - d + 0.5) / (d + 0.5) + 1.0);
  }

  void save(const std::string& path) const {
    atomic_write(path, [&](std::ostream& os) {
      json header;
      header["format"] = "protoseq-index";
      header["version"] = 1;
      header["n_docs"] = n_docs();
      header["doc_len"] = doc_len_;
      os << header.dump() << "\n";
      for (const auto& [key, plist] : postings_) {
        json rec;
        rec["t"] = key;
        json arr = json::array();
        for (const Posting& p : plist) arr.push_back({p.id, p.tf});
        rec["p"] = std::move(arr);
        os << rec.dump() << "\n";
      }
    });
  }

  static CoverageIndex load(const std::string& path) {
    auto records = read_jsonl(path);
    require(!records.empty(), "empty index file: " + path);
    const json& header = records.front();
    require(header.value("format", "") == "protoseq-index", "not an index file: " + path);
    require(header.value("version", 0) == 1, "unsupported index version in " + path);
    CoverageIndex idx;
    idx.doc_len_ = header.at("doc_len").get<std::vector<int>>();
    for (int l : idx.doc_len_) idx.total_len_ += l;
    for (size_t i = 1; i < records.size(); ++i) {
      const json& rec = records[i];
      auto& plist = idx.postings_[rec.at("t").get<std::string>()];
      for (const auto& pair : rec.at("p")) plist.push_back({pair.at(0).get<int>(), pair.at(1).get<int>()});
    }
    return idx;
  }

 private:
  std::map<std::string, std::vector<Posting>> postings_;
  std::vector<int> doc_len_;
  long long total_len_ = 0;
};

// Number of distinct concept keys present in the sentence, in [0, m].
inline int coverage_count(const Sentence& sentence, const ConceptSet& s) {
  int n = 0;
  for (const auto& key : s.norm_concepts) n += sentence.norm_tokens.count(key) > 0;
  return n;
}

// Okapi BM25 over the concept keys; terms absent from the corpus contribute 0.
inline double bm25_score(const ConceptSet& s, int sentence_id, const CoverageIndex& index,
                         const BM25Params& params = {}) {
  int dl = index.doc_len(sentence_id);
  double score = 0.0;
  for (const auto& key : s.norm_concepts) {
    const auto* plist = index.postings(key);
    if (!plist) continue;
    auto it = std::lower_bound(plist->begin(), plist->end(), sentence_id,
                               [](const Posting& p, int id) { return p.id < id; });
    if (it == plist->end() || it->id != sentence_id) continue;
    double tf = it->tf;
    double denom = tf + params.k1 * (1.0 - params.b + params.b * dl / index.avgdl());
    score += index.idf(key) * tf * (params.k1 + 1.0) / denom;
  }
  return score;
}

struct Candidate {
  int id;
  int coverage;
  double bm25;
};

struct CandidateList {
  int concept_set_id = 0;
  std::vector<Candidate> entries;
};

// Stage-1 retrieval: conceptually partitions the corpus by coverage count and
// fills the result from full coverage downward, ordering within a partition
// by BM25 and breaking ties by sentence id. Zero-coverage sentences are never
// returned; the list may be shorter than n.
inline CandidateList stage1_retrieve(const ConceptSet& s, const CoverageIndex& index,
                                     const CorpusStore& store, int n = 8,
                                     const BM25Params& params = {}) {
  require(!s.norm_concepts.empty(), "stage1_retrieve: empty concept set");
  require(index.n_docs() == static_cast<int>(store.size()), "index/store size mismatch");
  std::unordered_map<int, int> coverage;
  for (const auto& key : s.norm_concepts) {
    const auto* plist = index.postings(key);
    if (!plist) continue;
    for (const Posting& p : *plist) ++coverage[p.id];
  }
  CandidateList result;
  result.concept_set_id = s.id;
  result.entries.reserve(coverage.size());
  for (const auto& [id, cov] : coverage) {
    result.entries.push_back({id, cov, bm25_score(s, id, index, params)});
  }
  std::sort(result.entries.begin(), result.entries.end(), [](const Candidate& a, const Candidate& b) {
    if (a.coverage != b.coverage) return a.coverage > b.coverage;
    if (a.bm25 != b.bm25) return a.bm25 > b.bm25;
    return a.id < b.id;
  });
  if (static_cast<int>(result.entries.size()) > n) result.entries.resize(static_cast<size_t>(n));
  return result;
}

inline json candidate_list_to_json(const CandidateList& list) {
  json rec;
  rec["concept_set_id"] = list.concept_set_id;
  json arr = json::array();
  for (const Candidate& c : list.entries) {
    arr.push_back({{"id", c.id}, {"coverage", c.coverage}, {"bm25", c.bm25}});
  }
  rec["candidates"] = std::move(arr);
  return rec;
}

inline CandidateList candidate_list_from_json(const json& rec) {
  CandidateList list;
  list.concept_set_id = rec.at("concept_set_id").get<int>();
  for (const auto& c : rec.at("candidates")) {
    list.entries.push_back({c.at("id").get<int>(), c.at("coverage").get<int>(), c.at("bm25").get<double>()});
  }
  return list;
}

}  // namespace protoseq
