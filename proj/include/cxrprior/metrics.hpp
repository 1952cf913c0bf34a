#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "cxrprior/corpus.hpp"

namespace cxrprior {

using Tokens = std::vector<std::string>;

inline constexpr int kMaxNgram = 4;

// n-gram -> count, keys are the tokens joined by single spaces.
using NGramCounts = std::unordered_map<std::string, std::size_t>;

NGramCounts count_ngrams(const Tokens& tokens, int n);

struct Fraction {
  std::size_t numerator = 0;
  std::size_t denominator = 0;
};

// Clipped n-gram matches over total candidate n-grams, summed over the
// corpus (single reference per candidate).
Fraction modified_precision(const std::vector<Tokens>& candidates,
                            const std::vector<Tokens>& references, int n);

// Corpus BLEU-n from corpus-level counts: geometric mean of the modified
// precisions of orders 1..n times the brevity penalty. Any order with zero
// matches yields 0. Throws std::invalid_argument on an empty or misaligned
// input or n outside 1..4.
double bleu(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references, int n);

// BLEU-1..4 for a single pair. An order with no matches uses
// 1 / (2 * candidate length) in place of its precision.
std::array<double, kMaxNgram> sentence_bleu(const Tokens& candidate, const Tokens& reference);

std::size_t lcs_length(const Tokens& a, const Tokens& b);

inline constexpr double kRougeBeta = 1.2;

// ROUGE-L F-measure with recall weighted by beta = 1.2.
double rouge_l(const Tokens& candidate, const Tokens& reference);

// Document frequencies of n-grams (n = 1..4) over a reference corpus.
class NGramIndex {
 public:
  explicit NGramIndex(const std::vector<Tokens>& references);

  std::size_t document_count() const { return documents_; }
  std::size_t document_frequency(const std::string& ngram, int n) const;
  double idf(const std::string& ngram, int n) const;

 private:
  std::size_t documents_ = 0;
  std::array<std::unordered_map<std::string, std::size_t>, kMaxNgram> df_;
};

// TF-IDF weighted n-gram vector for one document.
using TfIdfVector = std::unordered_map<std::string, double>;
TfIdfVector tfidf_vector(const Tokens& tokens, int n, const NGramIndex& index);
double cosine(const TfIdfVector& a, const TfIdfVector& b);

struct CiderResult {
  std::vector<double> per_report;
  double mean = 0.0;
};

inline constexpr double kCiderScale = 10.0;

// CIDEr: 10 x mean over n = 1..4 of the cosine between candidate and
// reference TF-IDF vectors, IDF taken over the references. A zero vector
// on either side contributes 0 for that order.
CiderResult cider(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references);

struct ReportScores {
  std::string id;
  std::array<double, kMaxNgram> bleu{};
  double rouge_l = 0.0;
  double cider = 0.0;
  std::optional<int> label;
};

struct CorpusScores {
  std::array<double, kMaxNgram> bleu{};
  double rouge_l = 0.0;
  double cider = 0.0;
};

struct MetricReport {
  std::vector<ReportScores> per_report;
  CorpusScores corpus;
};

MetricReport evaluate_pairs(const std::vector<std::string>& ids,
                            const std::vector<Tokens>& candidates,
                            const std::vector<Tokens>& references);

// Throws DataError naming the first record without a candidate or reference.
MetricReport evaluate_corpus(const std::vector<CorpusRecord>& records);

}  // namespace cxrprior
