#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace cxrprior {

// Half-open token range [begin, end) within one sentence.
struct TokenSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool operator==(const TokenSpan&) const = default;
};

enum class MatchMode { exact, stem_prefix };

struct KeywordEntry {
  std::string surface;  // lowercase, single token
  MatchMode mode = MatchMode::exact;

  bool matches(std::string_view token) const;
};

// Template atoms: a literal with one or more alternatives, a bounded gap of
// 0..N arbitrary tokens, or the mention slot.
struct LiteralAtom {
  std::vector<std::string> alternatives;
};
struct GapAtom {
  std::size_t max_tokens = 3;
};
struct MentionAtom {};
using TemplateAtom = std::variant<LiteralAtom, GapAtom, MentionAtom>;

inline constexpr std::size_t kDefaultGap = 3;

class Template {
 public:
  // Throws RulesError when the source does not contain exactly one {m}.
  static Template parse(std::string id, std::string_view source, std::size_t line = 0);

  const std::string& id() const { return id_; }
  const std::string& source() const { return source_; }
  const std::vector<TemplateAtom>& atoms() const { return atoms_; }

  // Matches with {m} bound to `mention`. Gaps are consumed lazily, so the
  // returned span is the shortest window around the mention.
  std::optional<TokenSpan> match(const std::vector<std::string>& tokens, TokenSpan mention) const;

 private:
  std::string id_;
  std::string source_;
  std::vector<TemplateAtom> atoms_;
  std::size_t mention_index_ = 0;
};

struct RuleSet {
  std::vector<KeywordEntry> keywords;
  std::vector<Template> negation_patterns;
  std::vector<Template> prior_patterns;
  // Prior patterns that carry a comparative marker. Change verbs are
  // confirmed only by these; every other keyword only by prior_patterns.
  std::vector<Template> comparative_patterns;
  std::vector<std::string> change_verbs;
  std::string version;

  bool is_change_verb(std::string_view surface) const;
  const Template* find_rule(std::string_view id) const;
};

RuleSet parse_rules(std::string_view text);
RuleSet load_rules(const std::filesystem::path& path);

// The rules file shipped with the toolkit.
std::string_view default_rules_text();
const RuleSet& default_rules();

}  // namespace cxrprior
