#include "cxrprior/corpus.hpp"
#include "cxrprior/error.hpp"
#include "cxrprior/metrics.hpp"

#include "doctest.h"
#include "oracle_values.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

using namespace cxrprior;

namespace {

constexpr double kTol = 1e-9;

Tokens random_tokens(std::mt19937_64& rng, std::size_t max_len, int alphabet = 6) {
  Tokens t(rng() % (max_len + 1));
  for (auto& s : t) s = std::string(1, static_cast<char>('a' + rng() % alphabet));
  return t;
}

// LCS by trying every subsequence of the shorter input.
std::size_t brute_lcs(const Tokens& a, const Tokens& b) {
  const Tokens& s = a.size() <= b.size() ? a : b;
  const Tokens& l = a.size() <= b.size() ? b : a;
  std::size_t best = 0;
  for (std::uint32_t mask = 0; mask < (1u << s.size()); ++mask) {
    std::size_t j = 0;
    std::size_t len = 0;
    bool ok = true;
    for (std::size_t i = 0; i < s.size() && ok; ++i) {
      if (!(mask >> i & 1u)) continue;
      while (j < l.size() && l[j] != s[i]) ++j;
      if (j == l.size()) ok = false;
      else { ++j; ++len; }
    }
    if (ok) best = std::max(best, len);
  }
  return best;
}

}  // namespace

TEST_CASE("frozen three-record fixture") {
  std::vector<Tokens> cands;
  std::vector<Tokens> refs;
  std::vector<std::string> ids;
  for (const auto& row : oracle::kPairs) {
    cands.push_back(tokenize_text(row.candidate));
    refs.push_back(tokenize_text(row.reference));
    ids.push_back(std::to_string(ids.size()));
  }
  const MetricReport report = evaluate_pairs(ids, cands, refs);
  for (std::size_t i = 0; i < 3; ++i) {
    for (int n = 0; n < 4; ++n) CHECK(std::abs(report.per_report[i].bleu[n] - oracle::kPairs[i].bleu[n]) < kTol);
    CHECK(std::abs(report.per_report[i].rouge_l - oracle::kPairs[i].rouge_l) < kTol);
    CHECK(std::abs(report.per_report[i].cider - oracle::kPairs[i].cider) < kTol);
  }
  for (int n = 0; n < 4; ++n) CHECK(std::abs(report.corpus.bleu[n] - oracle::kCorpusBleu[n]) < kTol);
  CHECK(std::abs(report.corpus.rouge_l - oracle::kCorpusRouge) < kTol);
  CHECK(std::abs(report.corpus.cider - oracle::kCorpusCider) < kTol);
}

TEST_CASE("clipped unigram precision") {
  const Tokens cand(7, "the");
  const Tokens ref = {"the", "cat", "is", "on", "the", "mat"};
  const Fraction p = modified_precision({cand}, {ref}, 1);
  CHECK(p.numerator == 2);
  CHECK(p.denominator == 7);
  CHECK(std::abs(bleu({cand}, {ref}, 1) - 2.0 / 7.0) < 1e-15);
}

TEST_CASE("brevity penalty") {
  const Tokens cand = {"a", "b", "c"};
  const Tokens ref = {"a", "b", "c", "d"};
  for (int n = 1; n <= 3; ++n) CHECK(std::abs(bleu({cand}, {ref}, n) - std::exp(-1.0 / 3.0)) < 1e-15);
  CHECK(bleu({cand}, {ref}, 4) == 0.0);
  CHECK(bleu({ref}, {cand}, 3) < 1.0);
}

TEST_CASE("bleu rejects bad input") {
  CHECK_THROWS_AS(bleu({}, {}, 1), std::invalid_argument);
  CHECK_THROWS_AS(bleu({{"a"}}, {}, 1), std::invalid_argument);
  CHECK_THROWS_AS(bleu({{"a"}}, {{"a"}}, 5), std::invalid_argument);
}

TEST_CASE("identity scores maximal") {
  const Tokens t = tokenize_text("the heart is normal in size and the lungs are clear");
  for (int n = 1; n <= 4; ++n) CHECK(bleu({t}, {t}, n) == 1.0);
  for (double b : sentence_bleu(t, t)) CHECK(b == 1.0);
  CHECK(rouge_l(t, t) == 1.0);
  // Shorter than the highest order on both sides.
  const Tokens short_pair = {"lungs", "clear"};
  for (double b : sentence_bleu(short_pair, short_pair)) CHECK(b == 1.0);
  for (int n = 1; n <= 4; ++n) CHECK(bleu({short_pair}, {short_pair}, n) == 1.0);
}

TEST_CASE("per-report bleu smoothing") {
  // "a b" vs "a c": one unigram match, no bigram match.
  const auto b = sentence_bleu({"a", "b"}, {"a", "c"});
  CHECK(std::abs(b[0] - 0.5) < 1e-15);
  CHECK(std::abs(b[1] - std::sqrt(0.5 * 0.25)) < 1e-15);
  for (double v : b) CHECK(std::isfinite(v));
}

TEST_CASE("rouge_l") {
  const Tokens c = {"a", "b", "c", "d"};
  const Tokens r = {"a", "c", "b", "d"};
  CHECK(lcs_length(c, r) == 3);
  CHECK(std::abs(rouge_l(c, r) - 0.75) < 1e-15);
  CHECK(std::abs(rouge_l(r, c) - 0.75) < 1e-15);
  CHECK(rouge_l({}, r) == 0.0);
  CHECK(rouge_l(c, {}) == 0.0);
  // Unequal lengths: the beta weighting makes the score direction dependent.
  const Tokens shorter = {"a", "b"};
  CHECK(std::abs(rouge_l(shorter, c) - 1.22 / 1.94) < 1e-12);
  CHECK(std::abs(rouge_l(c, shorter) - 1.22 / 1.72) < 1e-12);
}

TEST_CASE("cider") {
  const std::vector<Tokens> refs = {{"a", "b", "c", "d"}, {"e", "f", "g", "h", "i"}};
  const CiderResult same = cider(refs, refs);
  CHECK(std::abs(same.per_report[0] - 10.0) < 1e-12);
  CHECK(std::abs(same.per_report[1] - 10.0) < 1e-12);
  const CiderResult disjoint = cider({{"x", "y"}, {"z"}}, refs);
  CHECK(disjoint.per_report[0] == 0.0);
  CHECK(disjoint.per_report[1] == 0.0);
  const CiderResult single = cider({refs[0]}, {refs[0]});
  CHECK(single.per_report[0] == 0.0);
  CHECK(single.mean == 0.0);
  const CiderResult empty_side = cider({{}, {"d"}}, refs);
  for (double v : empty_side.per_report) CHECK(std::isfinite(v));
}

TEST_CASE("document frequency never exceeds the document count") {
  std::mt19937_64 rng(4);
  std::vector<Tokens> refs;
  for (int i = 0; i < 30; ++i) refs.push_back(random_tokens(rng, 10));
  const NGramIndex index(refs);
  CHECK(index.document_count() == 30);
  for (const auto& r : refs)
    for (int n = 1; n <= 4; ++n)
      for (const auto& [g, c] : count_ngrams(r, n)) CHECK(index.document_frequency(g, n) <= 30);
}

TEST_CASE("evaluate_corpus") {
  CorpusRecord same;
  same.report = make_report("s", "x");
  same.candidate = same.reference = "There are low lung volumes. The lungs are otherwise clear.";
  const MetricReport r = evaluate_corpus({same});
  for (double b : r.per_report[0].bleu) CHECK(b == 1.0);
  CHECK(r.per_report[0].rouge_l == 1.0);
  CHECK(r.per_report[0].cider == 0.0);

  CorpusRecord missing;
  missing.report = make_report("no-cand", "x");
  missing.reference = "y";
  CHECK_THROWS_WITH_AS(evaluate_corpus({same, missing}), doctest::Contains("no-cand"), DataError);
  CHECK_THROWS_AS(evaluate_corpus({}), DataError);
}

TEST_CASE("property: scores stay in range") {
  std::mt19937_64 rng(9);
  std::vector<Tokens> cands;
  std::vector<Tokens> refs;
  std::vector<std::string> ids;
  for (int i = 0; i < 200; ++i) {
    cands.push_back(random_tokens(rng, 12));
    refs.push_back(random_tokens(rng, 12));
    if (refs.back().empty()) refs.back().push_back("a");
    if (cands.back().empty()) cands.back().push_back("b");
    ids.push_back(std::to_string(i));
  }
  const MetricReport r = evaluate_pairs(ids, cands, refs);
  for (const auto& s : r.per_report) {
    for (double b : s.bleu) CHECK((b >= 0.0 && b <= 1.0));
    CHECK((s.rouge_l >= 0.0 && s.rouge_l <= 1.0));
    CHECK(s.cider >= 0.0);
  }
}

TEST_CASE("property: bleu is 1 exactly when every clipped precision is 1 and c >= r") {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 200; ++trial) {
    Tokens r = random_tokens(rng, 6, 3);
    Tokens c = trial % 2 ? r : random_tokens(rng, 6, 3);
    if (trial % 4 == 1) c.push_back(c.empty() ? "a" : c.front());
    if (r.empty() || c.empty()) continue;
    for (int n = 1; n <= 4; ++n) {
      bool expect = c.size() >= r.size();
      for (int k = 1; k <= n; ++k) {
        const Fraction p = modified_precision({c}, {r}, k);
        const bool vacuous = p.denominator == 0 && r.size() < static_cast<std::size_t>(k);
        expect = expect && (vacuous || (p.denominator > 0 && p.numerator == p.denominator));
      }
      CHECK((bleu({c}, {r}, n) == 1.0) == expect);
    }
  }
}

TEST_CASE("property: corpus metrics ignore record order") {
  std::mt19937_64 rng(27);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng() % 6;
    std::vector<Tokens> cands;
    std::vector<Tokens> refs;
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) {
      cands.push_back(random_tokens(rng, 8));
      refs.push_back(random_tokens(rng, 8));
      if (cands.back().empty()) cands.back().push_back("a");
      ids.push_back(std::to_string(i));
    }
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Tokens> pc;
    std::vector<Tokens> pr;
    std::vector<std::string> pid;
    for (std::size_t i : perm) {
      pc.push_back(cands[i]);
      pr.push_back(refs[i]);
      pid.push_back(ids[i]);
    }
    const MetricReport a = evaluate_pairs(ids, cands, refs);
    const MetricReport b = evaluate_pairs(pid, pc, pr);
    CHECK(a.corpus.bleu == b.corpus.bleu);
    CHECK(a.corpus.rouge_l == b.corpus.rouge_l);
    CHECK(a.corpus.cider == b.corpus.cider);
  }
}

TEST_CASE("property: lcs matches brute force and is monotone under appends") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    Tokens a = random_tokens(rng, 9, 4);
    Tokens b = random_tokens(rng, 9, 4);
    const std::size_t l = lcs_length(a, b);
    CHECK(l == brute_lcs(a, b));
    const std::string t(1, static_cast<char>('a' + rng() % 5));
    a.push_back(t);
    b.push_back(t);
    CHECK(lcs_length(a, b) >= l);
    CHECK(lcs_length(a, b) == l + 1);
  }
}

TEST_CASE("property: cosine ignores positive scaling") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> scale(1e-3, 1e3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Tokens> refs;
    for (int i = 0; i < 4; ++i) refs.push_back(random_tokens(rng, 8, 5));
    const Tokens cand = random_tokens(rng, 8, 5);
    const NGramIndex index(refs);
    for (int n = 1; n <= 4; ++n) {
      const TfIdfVector vc = tfidf_vector(cand, n, index);
      const TfIdfVector vr = tfidf_vector(refs[0], n, index);
      TfIdfVector sc = vc;
      TfIdfVector sr = vr;
      const double k1 = scale(rng);
      const double k2 = scale(rng);
      for (auto& [g, v] : sc) v *= k1;
      for (auto& [g, v] : sr) v *= k2;
      const double base = cosine(vc, vr);
      CHECK(std::abs(cosine(sc, sr) - base) <= 1e-12 * std::max(1.0, std::abs(base)));
      CHECK(std::isfinite(base));
    }
  }
}
