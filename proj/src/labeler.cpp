#include "cxrprior/labeler.hpp"

#include "cxrprior/error.hpp"
#include "cxrprior/parallel.hpp"

namespace cxrprior {
namespace {

const std::string* target_text(const CorpusRecord& record, LabelTarget target) {
  switch (target) {
    case LabelTarget::text:
      return &record.report.raw_text;
    case LabelTarget::reference:
      return record.reference ? &*record.reference : nullptr;
    case LabelTarget::candidate:
      return record.candidate ? &*record.candidate : nullptr;
  }
  return nullptr;
}

const char* target_name(LabelTarget target) {
  switch (target) {
    case LabelTarget::text: return "text";
    case LabelTarget::reference: return "reference";
    case LabelTarget::candidate: return "candidate";
  }
  return "?";
}

// First template in `patterns` that matches around the mention.
const Template* first_match(const std::vector<Template>& patterns,
                            const std::vector<std::string>& tokens, TokenSpan span,
                            std::optional<TokenSpan>& window) {
  for (const auto& t : patterns) {
    if (auto m = t.match(tokens, span)) {
      window = m;
      return &t;
    }
  }
  return nullptr;
}

}  // namespace

const char* to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::PriorExpression: return "prior_expression";
    case Verdict::Negated: return "negated";
    case Verdict::Irrelevant: return "irrelevant";
  }
  return "?";
}

std::vector<Mention> extract_mentions(const Report& report, const RuleSet& rules) {
  std::vector<Mention> mentions;
  for (std::size_t s = 0; s < report.tokens.size(); ++s) {
    const auto& sentence = report.tokens[s];
    for (std::size_t i = 0; i < sentence.size(); ++i) {
      const KeywordEntry* best = nullptr;
      for (const auto& keyword : rules.keywords) {
        if (!keyword.matches(sentence[i])) continue;
        if (best == nullptr || keyword.surface.size() > best->surface.size()) best = &keyword;
      }
      if (best != nullptr) mentions.push_back({best, s, {i, i + 1}, sentence[i]});
    }
  }
  return mentions;
}

std::vector<ClassifiedMention> classify_mentions(const Report& report,
                                                 const std::vector<Mention>& mentions,
                                                 const RuleSet& rules) {
  std::vector<ClassifiedMention> out;
  out.reserve(mentions.size());
  for (const auto& mention : mentions) {
    ClassifiedMention cm{mention, Verdict::Irrelevant, {}, std::nullopt};
    const auto& tokens = report.tokens.at(mention.sentence_index);

    if (const Template* t = first_match(rules.negation_patterns, tokens, mention.token_span, cm.match)) {
      cm.verdict = Verdict::Negated;
      cm.fired_rule = t->id();
    } else {
      const bool change_verb = rules.is_change_verb(mention.keyword->surface);
      const auto& confirming = change_verb ? rules.comparative_patterns : rules.prior_patterns;
      if (const Template* t = first_match(confirming, tokens, mention.token_span, cm.match)) {
        cm.verdict = Verdict::PriorExpression;
        cm.fired_rule = t->id();
      }
    }
    out.push_back(std::move(cm));
  }
  return out;
}

PriorLabel aggregate(const std::vector<ClassifiedMention>& classified) {
  PriorLabel label;
  for (const auto& cm : classified) {
    if (cm.verdict == Verdict::PriorExpression) label.evidence.push_back(cm);
  }
  label.value = label.evidence.empty() ? 0 : 1;
  return label;
}

PriorLabel label_report(const Report& report, const RuleSet& rules) {
  return aggregate(classify_mentions(report, extract_mentions(report, rules), rules));
}

CorpusLabels label_corpus(const std::vector<CorpusRecord>& records, const RuleSet& rules,
                          LabelTarget target, unsigned threads) {
  for (const auto& record : records) {
    if (target_text(record, target) == nullptr)
      throw DataError("record " + record.report.id + " has no " + target_name(target) +
                      " field to label");
  }

  CorpusLabels result;
  result.labels = parallel_map(
      records.size(),
      [&](std::size_t i) {
        const CorpusRecord& record = records[i];
        if (target == LabelTarget::text) return label_report(record.report, rules);
        return label_report(make_report(record.report.id, *target_text(record, target)), rules);
      },
      threads);

  for (const auto& label : result.labels) {
    ++(label.value == 1 ? result.counts.positive : result.counts.negative);
  }
  result.counts.total = result.labels.size();
  return result;
}

}  // namespace cxrprior
