#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "cxrprior/corpus.hpp"
#include "cxrprior/rules.hpp"

namespace cxrprior {

struct Mention {
  const KeywordEntry* keyword = nullptr;  // points into the RuleSet
  std::size_t sentence_index = 0;
  TokenSpan token_span;
  std::string surface;
};

enum class Verdict { PriorExpression, Negated, Irrelevant };

const char* to_string(Verdict verdict);

struct ClassifiedMention {
  Mention mention;
  Verdict verdict = Verdict::Irrelevant;
  std::string fired_rule;          // empty for Irrelevant
  std::optional<TokenSpan> match;  // window the fired template covered
};

struct PriorLabel {
  int value = 0;
  std::vector<ClassifiedMention> evidence;
};

struct LabelCounts {
  std::size_t negative = 0;
  std::size_t positive = 0;
  std::size_t total = 0;

  bool operator==(const LabelCounts&) const = default;
};

// Every keyword occurrence in (sentence, token) order. A token belongs to at
// most one keyword: the longest matching surface, ties going to file order.
std::vector<Mention> extract_mentions(const Report& report, const RuleSet& rules);

// Negation patterns are tried first, then confirming patterns; anything left
// is Irrelevant. Matching is confined to the mention's sentence.
std::vector<ClassifiedMention> classify_mentions(const Report& report,
                                                 const std::vector<Mention>& mentions,
                                                 const RuleSet& rules);

PriorLabel aggregate(const std::vector<ClassifiedMention>& classified);

PriorLabel label_report(const Report& report, const RuleSet& rules);

struct CorpusLabels {
  std::vector<PriorLabel> labels;
  LabelCounts counts;
};

// Which text of a record gets labeled.
enum class LabelTarget { text, reference, candidate };

// Labels the chosen text of every record, in parallel, preserving order.
// Throws DataError naming the id when a record lacks the chosen field.
CorpusLabels label_corpus(const std::vector<CorpusRecord>& records, const RuleSet& rules,
                          LabelTarget target = LabelTarget::text, unsigned threads = 0);

}  // namespace cxrprior
