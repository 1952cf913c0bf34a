#include "cxrprior/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cxrprior/error.hpp"
#include "cxrprior/numeric.hpp"
#include "cxrprior/parallel.hpp"

namespace cxrprior {
namespace {

void check_order(int n) {
  if (n < 1 || n > kMaxNgram) throw std::invalid_argument("n-gram order must be in 1..4");
}

std::size_t clipped_matches(const NGramCounts& candidate, const NGramCounts& reference) {
  std::size_t matches = 0;
  for (const auto& [gram, count] : candidate) {
    auto it = reference.find(gram);
    if (it != reference.end()) matches += std::min(count, it->second);
  }
  return matches;
}

std::size_t ngram_total(std::size_t length, int n) {
  return length >= static_cast<std::size_t>(n) ? length - static_cast<std::size_t>(n) + 1 : 0;
}

std::size_t reference_total(const std::vector<Tokens>& references, int n) {
  std::size_t total = 0;
  for (const auto& r : references) total += ngram_total(r.size(), n);
  return total;
}

double brevity_penalty(double candidate_length, double reference_length) {
  if (candidate_length >= reference_length) return 1.0;
  if (candidate_length == 0.0) return 0.0;
  return std::exp(1.0 - reference_length / candidate_length);
}

}  // namespace

NGramCounts count_ngrams(const Tokens& tokens, int n) {
  check_order(n);
  NGramCounts counts;
  const std::size_t order = static_cast<std::size_t>(n);
  for (std::size_t i = 0; i + order <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (std::size_t k = 1; k < order; ++k) {
      key += ' ';
      key += tokens[i + k];
    }
    ++counts[key];
  }
  return counts;
}

Fraction modified_precision(const std::vector<Tokens>& candidates,
                            const std::vector<Tokens>& references, int n) {
  check_order(n);
  if (candidates.size() != references.size())
    throw std::invalid_argument("candidate and reference lists differ in length");
  Fraction f;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    f.numerator += clipped_matches(count_ngrams(candidates[i], n), count_ngrams(references[i], n));
    f.denominator += ngram_total(candidates[i].size(), n);
  }
  return f;
}

double bleu(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references, int n) {
  check_order(n);
  if (candidates.empty()) throw std::invalid_argument("BLEU needs at least one candidate");
  if (candidates.size() != references.size())
    throw std::invalid_argument("candidate and reference lists differ in length");

  double log_sum = 0.0;
  for (int k = 1; k <= n; ++k) {
    const Fraction p = modified_precision(candidates, references, k);
    if (p.denominator == 0 && reference_total(references, k) == 0) continue;  // 0/0 on both sides
    if (p.numerator == 0) return 0.0;
    log_sum += std::log(static_cast<double>(p.numerator) / static_cast<double>(p.denominator));
  }
  std::size_t c = 0, r = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    c += candidates[i].size();
    r += references[i].size();
  }
  return brevity_penalty(static_cast<double>(c), static_cast<double>(r)) *
         std::exp(log_sum / static_cast<double>(n));
}

std::array<double, kMaxNgram> sentence_bleu(const Tokens& candidate, const Tokens& reference) {
  std::array<double, kMaxNgram> scores{};
  if (candidate.empty()) return scores;
  const double c = static_cast<double>(candidate.size());
  const double bp = brevity_penalty(c, static_cast<double>(reference.size()));
  double log_sum = 0.0;
  for (int n = 1; n <= kMaxNgram; ++n) {
    const std::size_t matches =
        clipped_matches(count_ngrams(candidate, n), count_ngrams(reference, n));
    // Both sides too short for this order: nothing to mismatch.
    const bool vacuous = ngram_total(candidate.size(), n) == 0 && ngram_total(reference.size(), n) == 0;
    const double precision =
        vacuous ? 1.0
        : matches > 0 ? static_cast<double>(matches) /
                          static_cast<double>(ngram_total(candidate.size(), n))
                    : 1.0 / (2.0 * c);
    log_sum += std::log(precision);
    scores[static_cast<std::size_t>(n - 1)] = bp * std::exp(log_sum / n);
  }
  return scores;
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(const Tokens& candidate, const Tokens& reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  const double lcs = static_cast<double>(lcs_length(candidate, reference));
  if (lcs == 0.0) return 0.0;
  const double precision = lcs / static_cast<double>(candidate.size());
  const double recall = lcs / static_cast<double>(reference.size());
  const double beta2 = kRougeBeta * kRougeBeta;
  return ((1.0 + beta2) * precision * recall) / (recall + beta2 * precision);
}

NGramIndex::NGramIndex(const std::vector<Tokens>& references) : documents_(references.size()) {
  for (const auto& doc : references) {
    for (int n = 1; n <= kMaxNgram; ++n) {
      for (const auto& entry : count_ngrams(doc, n)) ++df_[static_cast<std::size_t>(n - 1)][entry.first];
    }
  }
}

std::size_t NGramIndex::document_frequency(const std::string& ngram, int n) const {
  check_order(n);
  const auto& table = df_[static_cast<std::size_t>(n - 1)];
  auto it = table.find(ngram);
  return it == table.end() ? 0 : it->second;
}

double NGramIndex::idf(const std::string& ngram, int n) const {
  const double df = static_cast<double>(std::max<std::size_t>(1, document_frequency(ngram, n)));
  return std::log(static_cast<double>(documents_) / df);
}

TfIdfVector tfidf_vector(const Tokens& tokens, int n, const NGramIndex& index) {
  TfIdfVector vec;
  for (const auto& [gram, count] : count_ngrams(tokens, n)) {
    vec.emplace(gram, static_cast<double>(count) * index.idf(gram, n));
  }
  return vec;
}

double cosine(const TfIdfVector& a, const TfIdfVector& b) {
  double norm_a = 0.0, norm_b = 0.0, dot = 0.0;
  for (const auto& [gram, w] : a) {
    norm_a += w * w;
    if (auto it = b.find(gram); it != b.end()) dot += w * it->second;
  }
  for (const auto& entry : b) norm_b += entry.second * entry.second;
  if (norm_a == 0.0 || norm_b == 0.0) return 0.0;
  return dot / (std::sqrt(norm_a) * std::sqrt(norm_b));
}

CiderResult cider(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references) {
  if (candidates.size() != references.size())
    throw std::invalid_argument("candidate and reference lists differ in length");
  if (candidates.empty()) throw std::invalid_argument("CIDEr needs at least one pair");

  const NGramIndex index(references);
  CiderResult result;
  result.per_report = parallel_map(candidates.size(), [&](std::size_t i) {
    double sum = 0.0;
    for (int n = 1; n <= kMaxNgram; ++n) {
      sum += cosine(tfidf_vector(candidates[i], n, index), tfidf_vector(references[i], n, index));
    }
    return kCiderScale * sum / kMaxNgram;
  });
  result.mean = order_invariant_mean(result.per_report);
  return result;
}

MetricReport evaluate_pairs(const std::vector<std::string>& ids,
                            const std::vector<Tokens>& candidates,
                            const std::vector<Tokens>& references) {
  if (ids.size() != candidates.size() || candidates.size() != references.size())
    throw std::invalid_argument("ids, candidates and references differ in length");

  MetricReport report;
  const CiderResult cider_scores = cider(candidates, references);
  report.per_report = parallel_map(candidates.size(), [&](std::size_t i) {
    ReportScores scores;
    scores.id = ids[i];
    scores.bleu = sentence_bleu(candidates[i], references[i]);
    scores.rouge_l = rouge_l(candidates[i], references[i]);
    scores.cider = cider_scores.per_report[i];
    return scores;
  });

  for (int n = 1; n <= kMaxNgram; ++n)
    report.corpus.bleu[static_cast<std::size_t>(n - 1)] = bleu(candidates, references, n);
  std::vector<double> rouge(report.per_report.size());
  for (std::size_t i = 0; i < rouge.size(); ++i) rouge[i] = report.per_report[i].rouge_l;
  report.corpus.rouge_l = order_invariant_mean(rouge);
  report.corpus.cider = cider_scores.mean;
  return report;
}

MetricReport evaluate_corpus(const std::vector<CorpusRecord>& records) {
  if (records.empty()) throw DataError("no records to evaluate");
  std::vector<std::string> ids;
  std::vector<Tokens> candidates, references;
  for (const auto& record : records) {
    if (!record.candidate) throw DataError("record " + record.report.id + " has no candidate");
    if (!record.reference) throw DataError("record " + record.report.id + " has no reference");
    ids.push_back(record.report.id);
    candidates.push_back(tokenize_text(*record.candidate));
    references.push_back(tokenize_text(*record.reference));
  }
  return evaluate_pairs(ids, candidates, references);
}

}  // namespace cxrprior
