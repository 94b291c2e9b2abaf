#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "protoseq/common.hpp"
#include "protoseq/lemma_data.hpp"

namespace protoseq {

inline bool utf8_valid(std::string_view s) {
  size_t i = 0;
  while (i < s.size()) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    size_t extra;
    unsigned cp_min;
    if (c < 0x80) {
      i += 1;
      continue;
    } else if ((c & 0xe0) == 0xc0) {
      extra = 1;
      cp_min = 0x80;
    } else if ((c & 0xf0) == 0xe0) {
      extra = 2;
      cp_min = 0x800;
    } else if ((c & 0xf8) == 0xf0) {
      extra = 3;
      cp_min = 0x10000;
    } else {
      return false;
    }
    if (i + extra >= s.size()) return false;
    unsigned cp = c & (0x3f >> extra);
    for (size_t k = 1; k <= extra; ++k) {
      unsigned char cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xc0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3f);
    }
    if (cp < cp_min || cp > 0x10ffff || (cp >= 0xd800 && cp <= 0xdfff)) return false;
    i += extra + 1;
  }
  return true;
}

namespace detail {
inline bool ascii_punct(char c) {
  return std::ispunct(static_cast<unsigned char>(c)) != 0;
}
}  // namespace detail

// Whitespace split, ASCII lowercase, leading/trailing ASCII punctuation
// stripped. Internal hyphens and apostrophes survive ("well-known", "don't").
inline std::vector<std::string> tokenize(std::string_view line) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i == start) continue;
    size_t lo = start, hi = i;
    while (lo < hi && detail::ascii_punct(line[lo])) ++lo;
    while (hi > lo && detail::ascii_punct(line[hi - 1])) --hi;
    if (lo == hi) continue;
    std::string tok(line.substr(lo, hi - lo));
    for (char& c : tok) {
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    out.push_back(std::move(tok));
  }
  return out;
}

// Porter stemming algorithm (1980 rule tables, longest-match within each
// step). Operates on lowercase a-z words; words of length <= 2 are returned
// unchanged.
class PorterStemmer {
 public:
  static std::string stem(std::string w) {
    if (w.size() <= 2) return w;
    PorterStemmer p(std::move(w));
    p.step1a();
    p.step1b();
    p.step1c();
    p.step2();
    p.step3();
    p.step4();
    p.step5();
    p.b_.resize(p.k_ + 1);
    return std::move(p.b_);
  }

 private:
  explicit PorterStemmer(std::string w) : b_(std::move(w)), k_(static_cast<int>(b_.size()) - 1) {}

  std::string b_;
  int k_;       // index of last letter of current word
  int j_ = 0;   // index of last letter of candidate stem

  bool cons(int i) const {
    switch (b_[i]) {
      case 'a': case 'e': case 'i': case 'o': case 'u':
        return false;
      case 'y':
        return i == 0 ? true : !cons(i - 1);
      default:
        return true;
    }
  }

  // number of consonant-vowel-consonant sequences in b[0..j]
  int m() const {
    int n = 0, i = 0;
    while (true) {
      if (i > j_) return n;
      if (!cons(i)) break;
      ++i;
    }
    ++i;
    while (true) {
      while (true) {
        if (i > j_) return n;
        if (cons(i)) break;
        ++i;
      }
      ++i;
      ++n;
      while (true) {
        if (i > j_) return n;
        if (!cons(i)) break;
        ++i;
      }
      ++i;
    }
  }

  bool vowel_in_stem() const {
    for (int i = 0; i <= j_; ++i)
      if (!cons(i)) return true;
    return false;
  }

  bool double_cons(int i) const {
    if (i < 1) return false;
    return b_[i] == b_[i - 1] && cons(i);
  }

  // consonant-vowel-consonant ending at i, final consonant not w, x or y
  bool cvc(int i) const {
    if (i < 2 || !cons(i) || cons(i - 1) || !cons(i - 2)) return false;
    char c = b_[i];
    return c != 'w' && c != 'x' && c != 'y';
  }

  bool ends(std::string_view s) {
    int len = static_cast<int>(s.size());
    if (len > k_ + 1) return false;
    if (b_.compare(k_ - len + 1, len, s) != 0) return false;
    j_ = k_ - len;
    return true;
  }

  void set_to(std::string_view s) {
    b_.resize(j_ + 1);
    b_.append(s);
    k_ = static_cast<int>(b_.size()) - 1;
  }

  void replace_if_stem(std::string_view s) {
    if (m() > 0) set_to(s);
  }

  void step1a() {
    if (b_[k_] != 's') return;
    if (ends("sses")) {
      k_ -= 2;
    } else if (ends("ies")) {
      set_to("i");
    } else if (b_[k_ - 1] != 's') {
      --k_;
    }
  }

  void step1b() {
    if (ends("eed")) {
      if (m() > 0) --k_;
      return;
    }
    if ((ends("ed") || ends("ing")) && vowel_in_stem()) {
      k_ = j_;
      if (ends("at")) {
        set_to("ate");
      } else if (ends("bl")) {
        set_to("ble");
      } else if (ends("iz")) {
        set_to("ize");
      } else if (double_cons(k_)) {
        --k_;
        char c = b_[k_];
        if (c == 'l' || c == 's' || c == 'z') ++k_;
      } else if (m() == 1 && cvc(k_)) {
        set_to("e");
      }
    }
  }

  void step1c() {
    if (ends("y") && vowel_in_stem()) b_[k_] = 'i';
  }

  struct Rule {
    std::string_view from, to;
  };

  // rules pre-sorted by suffix length so the first hit is the longest match
  bool apply_longest(const Rule* rules, size_t n, int min_m) {
    for (size_t r = 0; r < n; ++r) {
      if (ends(rules[r].from)) {
        if (m() > min_m) set_to(rules[r].to);
        return true;
      }
    }
    return false;
  }

  void step2() {
    static const Rule rules[] = {
        {"ational", "ate"}, {"ization", "ize"}, {"iveness", "ive"}, {"fulness", "ful"},
        {"ousness", "ous"}, {"biliti", "ble"},  {"tional", "tion"}, {"entli", "ent"},
        {"ousli", "ous"},   {"ation", "ate"},   {"alism", "al"},    {"aliti", "al"},
        {"iviti", "ive"},   {"enci", "ence"},   {"anci", "ance"},   {"izer", "ize"},
        {"abli", "able"},   {"alli", "al"},     {"ator", "ate"},    {"eli", "e"},
    };
    apply_longest(rules, std::size(rules), 0);
  }

  void step3() {
    static const Rule rules[] = {
        {"icate", "ic"}, {"ative", ""}, {"alize", "al"}, {"iciti", "ic"},
        {"ical", "ic"},  {"ful", ""},   {"ness", ""},
    };
    apply_longest(rules, std::size(rules), 0);
  }

  void step4() {
    static const Rule rules[] = {
        {"ement", ""}, {"ance", ""}, {"ence", ""}, {"able", ""}, {"ible", ""},
        {"ment", ""},  {"ant", ""},  {"ent", ""},  {"ion", ""},  {"ism", ""},
        {"ate", ""},   {"iti", ""},  {"ous", ""},  {"ive", ""},  {"ize", ""},
        {"al", ""},    {"er", ""},   {"ic", ""},   {"ou", ""},
    };
    for (const Rule& r : rules) {
      if (ends(r.from)) {
        if (r.from == "ion" && !(j_ >= 0 && (b_[j_] == 's' || b_[j_] == 't'))) return;
        if (m() > 1) k_ = j_;
        return;
      }
    }
  }

  void step5() {
    // 5a
    if (b_[k_] == 'e') {
      j_ = k_ - 1;
      int a = m();
      if (a > 1 || (a == 1 && !cvc(k_ - 1))) --k_;
    }
    // 5b
    j_ = k_;
    if (b_[k_] == 'l' && double_cons(k_) && m() > 1) --k_;
  }
};

// Token-key normalizer: irregular-form lemma lookup, then Porter stemming.
// Tokens containing characters outside a-z bypass the stemmer.
class Normalizer {
 public:
  Normalizer() { load_table(kIrregularLemmaTable); }

  explicit Normalizer(const std::string& table_path) {
    std::ifstream in(table_path);
    require(in.good(), "cannot open lemma table: " + table_path);
    std::stringstream ss;
    ss << in.rdbuf();
    load_table(ss.str());
  }

  std::string normalize(std::string_view token) const {
    require(!token.empty(), "normalize: empty token");
    std::string t(token);
    for (char& c : t) {
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    auto it = table_.find(t);
    if (it != table_.end()) t = it->second;
    if (std::all_of(t.begin(), t.end(), [](char c) { return c >= 'a' && c <= 'z'; })) {
      return PorterStemmer::stem(std::move(t));
    }
    return t;
  }

  size_t table_size() const { return table_.size(); }

 private:
  void load_table(std::string_view data) {
    size_t pos = 0;
    while (pos < data.size()) {
      size_t eol = data.find('\n', pos);
      if (eol == std::string_view::npos) eol = data.size();
      std::string_view line = data.substr(pos, eol - pos);
      pos = eol + 1;
      if (line.empty()) continue;
      size_t tab = line.find('\t');
      require(tab != std::string_view::npos, "lemma table: missing tab separator");
      table_.emplace(std::string(line.substr(0, tab)), std::string(line.substr(tab + 1)));
    }
  }

  std::unordered_map<std::string, std::string> table_;
};

}  // namespace protoseq
