#include <catch2/catch_amalgamated.hpp>

#include "protoseq/metrics.hpp"
#include "protoseq/text.hpp"

using namespace protoseq;

namespace {

EvalPair pair_of(const std::string& hyp, const std::vector<std::string>& refs) {
  EvalPair p;
  p.hypothesis = tokenize(hyp);
  for (const auto& r : refs) p.references.push_back(tokenize(r));
  return p;
}

// Worked example A. Hand-tabulated clipped counts:
//   pair 1: hyp "the cat sat on the mat"
//           refs "the cat is on the mat" / "there is a cat on the mat"
//     1-grams: the(min(2,2)=2) cat(1) sat(0) on(1) mat(1)      -> 5 of 6
//     2-grams: "the cat"(1) "on the"(1) "the mat"(1)           -> 3 of 5
//     3-grams: "on the mat"(1)                                 -> 1 of 4
//   pair 2: hyp "a dog runs", ref "the dog runs fast"
//     1-grams: dog runs                                        -> 2 of 3
//     2-grams: "dog runs"                                      -> 1 of 2
//     3-grams: none                                            -> 0 of 1
//   p1 = 7/9, p2 = 4/7, p3 = 1/5
//   hyp_len = 9; closest refs 6 and 4 -> ref_len = 10; BP = exp(1 - 10/9)
//   BLEU-3 = 100 * BP * (p1*p2*p3)^(1/3) = 39.93566158030378
std::vector<EvalPair> worked_example_a() {
  return {pair_of("the cat sat on the mat",
                  {"the cat is on the mat", "there is a cat on the mat"}),
          pair_of("a dog runs", {"the dog runs fast"})};
}

// Worked example B replaces hypothesis 1 with reference 1 itself:
//   p1 = 8/9, p2 = 6/7, p3 = 4/5, p4 = 3/3, same BP
//   BLEU-4 = 100 * BP * (p1*p2*p3*p4)^(1/4) = 79.0665385567944
//   BLEU-3 = 100 * BP * (p1*p2*p3)^(1/3)    = 75.8709081638509
std::vector<EvalPair> worked_example_b() {
  return {pair_of("the cat is on the mat",
                  {"the cat is on the mat", "there is a cat on the mat"}),
          pair_of("a dog runs", {"the dog runs fast"})};
}

}  // namespace

TEST_CASE("corpus bleu reproduces the hand-tabulated worked examples", "[metrics]") {
  REQUIRE(corpus_bleu(worked_example_a(), 3) == Catch::Approx(39.93566158030378).margin(1e-6));
  // a zero 4-gram precision annihilates the geometric mean, no smoothing
  REQUIRE(corpus_bleu(worked_example_a(), 4) == 0.0);
  REQUIRE(corpus_bleu(worked_example_b(), 4) == Catch::Approx(79.0665385567944).margin(1e-6));
  REQUIRE(corpus_bleu(worked_example_b(), 3) == Catch::Approx(75.8709081638509).margin(1e-6));
}

TEST_CASE("identical hypotheses score 100, disjoint score 0", "[metrics]") {
  std::vector<EvalPair> perfect = {
      pair_of("a small bird sings in the tree", {"a small bird sings in the tree"}),
      pair_of("the dog runs across the field", {"the dog runs across the field", "a dog running"})};
  REQUIRE(corpus_bleu(perfect, 3) == Catch::Approx(100.0).margin(1e-9));
  REQUIRE(corpus_bleu(perfect, 4) == Catch::Approx(100.0).margin(1e-9));
  REQUIRE(rouge(perfect, RougeVariant::two) == Catch::Approx(100.0).margin(1e-9));
  REQUIRE(rouge(perfect, RougeVariant::l) == Catch::Approx(100.0).margin(1e-9));

  std::vector<EvalPair> disjoint = {pair_of("alpha beta gamma delta", {"one two three four"})};
  REQUIRE(corpus_bleu(disjoint, 3) == 0.0);
  REQUIRE(corpus_bleu(disjoint, 4) == 0.0);
  REQUIRE(rouge(disjoint, RougeVariant::two) == 0.0);
  REQUIRE(rouge(disjoint, RougeVariant::l) == 0.0);
}

TEST_CASE("rouge-l matches the hand lcs table", "[metrics]") {
  // LCS("a b c d", "a c b d") = 3, P = R = 3/4 -> F = 0.75 for any beta
  std::vector<EvalPair> pairs = {pair_of("a b c d", {"a c b d"})};
  REQUIRE(rouge(pairs, RougeVariant::l) == Catch::Approx(75.0).margin(1e-9));
  // bigram overlap {"the cat"} of 2 vs 2: P = R = 1/2 -> 50
  std::vector<EvalPair> r2 = {pair_of("the cat sat", {"the cat ran"})};
  REQUIRE(rouge(r2, RougeVariant::two) == Catch::Approx(50.0).margin(1e-9));
}

TEST_CASE("rouge f-measure weights recall with beta 1.2", "[metrics]") {
  // hyp "a b", ref "a b c d": bigrams match 1, P = 1/1, R = 1/3
  // F = (1+1.44)*P*R/(R + 1.44*P) = 2.44*(1/3)/(1/3 + 1.44) = 0.458646616...
  std::vector<EvalPair> pairs = {pair_of("a b", {"a b c d"})};
  double expect = 2.44 * (1.0 / 3.0) / (1.0 / 3.0 + 1.44) * 100.0;
  REQUIRE(rouge(pairs, RougeVariant::two) == Catch::Approx(expect).margin(1e-9));
}

TEST_CASE("metrics stay in range and ignore reference order", "[metrics]") {
  std::vector<EvalPair> pairs = {
      pair_of("the cat sat on the mat", {"the cat is on the mat", "there is a cat on the mat"}),
      pair_of("a dog runs", {"the dog runs fast", "dogs run"})};
  std::vector<EvalPair> reversed = pairs;
  for (auto& p : reversed) std::reverse(p.references.begin(), p.references.end());
  for (int n : {3, 4}) {
    double a = corpus_bleu(pairs, n), b = corpus_bleu(reversed, n);
    REQUIRE(a == b);
    REQUIRE(a >= 0.0);
    REQUIRE(a <= 100.0);
  }
  for (RougeVariant v : {RougeVariant::two, RougeVariant::l}) {
    double a = rouge(pairs, v), b = rouge(reversed, v);
    REQUIRE(a == b);
    REQUIRE(a >= 0.0);
    REQUIRE(a <= 100.0);
  }
}

TEST_CASE("adding a reference never lowers the scores", "[metrics]") {
  std::vector<EvalPair> base = {pair_of("the cat sat on the mat", {"a cat sat on a mat"})};
  std::vector<EvalPair> more = base;
  more[0].references.push_back(tokenize("the cat sat on the mat today"));
  REQUIRE(corpus_bleu(more, 3) >= corpus_bleu(base, 3));
  REQUIRE(rouge(more, RougeVariant::two) >= rouge(base, RougeVariant::two));
  REQUIRE(rouge(more, RougeVariant::l) >= rouge(base, RougeVariant::l));

  // self-identity for rouge-l on any reference
  std::vector<EvalPair> self = {pair_of("some random words here", {"some random words here"})};
  REQUIRE(rouge(self, RougeVariant::l) == Catch::Approx(100.0).margin(1e-12));
}

TEST_CASE("metric preconditions are enforced", "[metrics]") {
  REQUIRE_THROWS(corpus_bleu({}, 4));
  REQUIRE_THROWS(corpus_bleu(worked_example_a(), 2));
  REQUIRE_THROWS(rouge({}, RougeVariant::two));
  EvalPair no_refs;
  no_refs.hypothesis = tokenize("a b");
  REQUIRE_THROWS(corpus_bleu({no_refs}, 3));
}
