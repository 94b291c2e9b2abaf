#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "protoseq/corpus.hpp"

using namespace protoseq;

namespace {
std::string repeat_tokens(const std::string& tok, int n) {
  std::string out;
  for (int i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += tok;
  }
  return out;
}
}  // namespace

TEST_CASE("ingest keeps only sentences within the length window", "[corpus]") {
  Normalizer norm;
  std::stringstream ss;
  ss << "one two three four\n";                 // 4 tokens: excluded
  ss << "one two three four five\n";            // 5 tokens: included
  ss << repeat_tokens("tok", 100) << "\n";      // 100 tokens: included
  ss << repeat_tokens("tok", 101) << "\n";      // 101 tokens: excluded
  IngestReport report;
  CorpusStore store = ingest(ss, norm, &report);
  REQUIRE(store.size() == 2);
  REQUIRE(report.kept == 2);
  REQUIRE(report.dropped_length == 2);
  REQUIRE(store.by_id(0).length() == 5);
  REQUIRE(store.by_id(1).length() == 100);
  for (const Sentence& s : store.sentences()) {
    REQUIRE(s.length() >= 5);
    REQUIRE(s.length() <= 100);
  }
}

TEST_CASE("ingest skips invalid utf-8 lines and counts them", "[corpus]") {
  Normalizer norm;
  std::stringstream ss;
  ss << "a perfectly fine little sentence\n";
  ss << "bad \xff\xfe line here today ok\n";
  IngestReport report;
  CorpusStore store = ingest(ss, norm, &report);
  REQUIRE(store.size() == 1);
  REQUIRE(report.dropped_invalid_utf8 == 1);
}

TEST_CASE("ingest of empty stream yields empty store", "[corpus]") {
  Normalizer norm;
  std::stringstream ss;
  CorpusStore store = ingest(ss, norm);
  REQUIRE(store.size() == 0);
  REQUIRE(store.avg_token_length() == 0.0);
}

TEST_CASE("duplicate texts are retained with distinct increasing ids", "[corpus]") {
  Normalizer norm;
  std::stringstream ss;
  ss << "the same sentence appears twice\n";
  ss << "the same sentence appears twice\n";
  CorpusStore store = ingest(ss, norm);
  REQUIRE(store.size() == 2);
  REQUIRE(store.by_id(0).text == store.by_id(1).text);
  REQUIRE(store.by_id(0).id < store.by_id(1).id);
}

TEST_CASE("ingest is deterministic across repeated runs", "[corpus]") {
  Normalizer norm;
  std::string data =
      "Dogs Ran in the park\n"
      "a man went to the market\n"
      "children were playing games outside\n";
  std::stringstream a(data), b(data);
  CorpusStore sa = ingest(a, norm), sb = ingest(b, norm);
  REQUIRE(sa.size() == sb.size());
  for (size_t i = 0; i < sa.size(); ++i) {
    const Sentence &x = sa.sentences()[i], &y = sb.sentences()[i];
    REQUIRE(x.text == y.text);
    REQUIRE(x.tokens == y.tokens);
    REQUIRE(x.norm_tokens == y.norm_tokens);
  }
}

TEST_CASE("norm token sets collapse inflected forms", "[corpus]") {
  Normalizer norm;
  std::stringstream ss;
  ss << "the dogs went running in circles\n";
  CorpusStore store = ingest(ss, norm);
  const Sentence& s = store.by_id(0);
  REQUIRE(s.norm_tokens.count("dog") == 1);
  REQUIRE(s.norm_tokens.count("go") == 1);
  REQUIRE(s.norm_tokens.count("run") == 1);
}

TEST_CASE("store json round trip preserves contents", "[corpus]") {
  Normalizer norm;
  std::stringstream ss;
  ss << "a man walked his dog yesterday\n";
  ss << "children ate apples under the tree\n";
  CorpusStore store = ingest(ss, norm);
  std::string path = std::filesystem::temp_directory_path() / "protoseq_store_test.jsonl";
  save_store(store, path);
  CorpusStore loaded = load_store(path);
  REQUIRE(loaded.size() == store.size());
  for (size_t i = 0; i < store.size(); ++i) {
    REQUIRE(loaded.sentences()[i].text == store.sentences()[i].text);
    REQUIRE(loaded.sentences()[i].tokens == store.sentences()[i].tokens);
    REQUIRE(loaded.sentences()[i].norm_tokens == store.sentences()[i].norm_tokens);
  }
  std::filesystem::remove(path);
  REQUIRE(store.avg_token_length() == 6.0);
}

TEST_CASE("lookup of unknown id fails", "[corpus]") {
  CorpusStore store;
  REQUIRE_THROWS(store.by_id(0));
}
