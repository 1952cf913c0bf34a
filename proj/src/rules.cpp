#include "cxrprior/rules.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "cxrprior/error.hpp"

namespace cxrprior {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> parts;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) parts.push_back(s.substr(i, j - i));
    i = j;
  }
  return parts;
}

bool literal_matches(const LiteralAtom& atom, const std::string& token) {
  return std::find(atom.alternatives.begin(), atom.alternatives.end(), token) !=
         atom.alternatives.end();
}

// Forward match of atoms[k..last) starting at token `pos`; returns the end.
std::optional<std::size_t> match_forward(const std::vector<TemplateAtom>& atoms, std::size_t k,
                                         std::size_t last, const std::vector<std::string>& tokens,
                                         std::size_t pos) {
  if (k == last) return pos;
  if (const auto* lit = std::get_if<LiteralAtom>(&atoms[k])) {
    if (pos >= tokens.size() || !literal_matches(*lit, tokens[pos])) return std::nullopt;
    return match_forward(atoms, k + 1, last, tokens, pos + 1);
  }
  const auto& gap = std::get<GapAtom>(atoms[k]);
  for (std::size_t g = 0; g <= gap.max_tokens && pos + g <= tokens.size(); ++g) {
    if (auto end = match_forward(atoms, k + 1, last, tokens, pos + g)) return end;
  }
  return std::nullopt;
}

// Backward match of atoms[0..k) ending just before token `pos`; returns the
// start of the matched window.
std::optional<std::size_t> match_backward(const std::vector<TemplateAtom>& atoms, std::size_t k,
                                          const std::vector<std::string>& tokens,
                                          std::size_t pos) {
  if (k == 0) return pos;
  const TemplateAtom& atom = atoms[k - 1];
  if (const auto* lit = std::get_if<LiteralAtom>(&atom)) {
    if (pos == 0 || !literal_matches(*lit, tokens[pos - 1])) return std::nullopt;
    return match_backward(atoms, k - 1, tokens, pos - 1);
  }
  const auto& gap = std::get<GapAtom>(atom);
  for (std::size_t g = 0; g <= gap.max_tokens && g <= pos; ++g) {
    if (auto start = match_backward(atoms, k - 1, tokens, pos - g)) return start;
  }
  return std::nullopt;
}

enum class Section { none, keywords, negations, priors, comparatives, change_verbs };

std::optional<Section> section_from_name(std::string_view name) {
  if (name == "keywords") return Section::keywords;
  if (name == "negations") return Section::negations;
  if (name == "priors") return Section::priors;
  if (name == "comparatives") return Section::comparatives;
  if (name == "change_verbs") return Section::change_verbs;
  return std::nullopt;
}

}  // namespace

bool KeywordEntry::matches(std::string_view token) const {
  if (mode == MatchMode::exact) return token == surface;
  return token.size() >= surface.size() && token.substr(0, surface.size()) == surface;
}

Template Template::parse(std::string id, std::string_view source, std::size_t line) {
  Template t;
  t.id_ = std::move(id);
  t.source_ = std::string(trim(source));
  std::size_t mentions = 0;
  for (std::string_view part : split_ws(source)) {
    if (part == "{m}") {
      t.mention_index_ = t.atoms_.size();
      t.atoms_.emplace_back(MentionAtom{});
      ++mentions;
    } else if (part.substr(0, 2) == "..") {
      GapAtom gap;
      std::string_view digits = part.substr(2);
      if (!digits.empty()) {
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), gap.max_tokens);
        if (ec != std::errc() || ptr != digits.data() + digits.size())
          throw RulesError(line, "bad gap \"" + std::string(part) + "\" in template \"" +
                                     t.source_ + "\"");
      }
      t.atoms_.emplace_back(gap);
    } else {
      LiteralAtom lit;
      std::size_t start = 0;
      while (start <= part.size()) {
        std::size_t bar = part.find('|', start);
        if (bar == std::string_view::npos) bar = part.size();
        std::string_view alt = part.substr(start, bar - start);
        if (alt.empty() || alt.find('{') != std::string_view::npos)
          throw RulesError(line, "bad literal \"" + std::string(part) + "\" in template \"" +
                                     t.source_ + "\"");
        lit.alternatives.push_back(lowercase(alt));
        start = bar + 1;
      }
      t.atoms_.emplace_back(std::move(lit));
    }
  }
  if (mentions != 1)
    throw RulesError(line, "template \"" + t.source_ + "\" (rule " + t.id_ +
                               ") must contain exactly one {m} placeholder, found " +
                               std::to_string(mentions));
  return t;
}

std::optional<TokenSpan> Template::match(const std::vector<std::string>& tokens,
                                         TokenSpan mention) const {
  if (mention.end > tokens.size() || mention.begin >= mention.end) return std::nullopt;
  auto end = match_forward(atoms_, mention_index_ + 1, atoms_.size(), tokens, mention.end);
  if (!end) return std::nullopt;
  auto start = match_backward(atoms_, mention_index_, tokens, mention.begin);
  if (!start) return std::nullopt;
  return TokenSpan{*start, *end};
}

bool RuleSet::is_change_verb(std::string_view surface) const {
  return std::find(change_verbs.begin(), change_verbs.end(), surface) != change_verbs.end();
}

const Template* RuleSet::find_rule(std::string_view id) const {
  for (const auto* group : {&negation_patterns, &prior_patterns, &comparative_patterns}) {
    for (const auto& t : *group)
      if (t.id() == id) return &t;
  }
  return nullptr;
}

RuleSet parse_rules(std::string_view text) {
  RuleSet rules;
  Section section = Section::none;
  std::unordered_set<std::string> rule_ids;
  std::unordered_set<std::string> surfaces;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;

    if (std::size_t hash = line.find('#'); hash != std::string_view::npos) {
      std::string_view comment = trim(line.substr(hash + 1));
      if (trim(line.substr(0, hash)).empty() && comment.substr(0, 8) == "version:")
        rules.version = std::string(trim(comment.substr(8)));
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw RulesError(line_no, "unterminated section header");
      auto next = section_from_name(trim(line.substr(1, line.size() - 2)));
      if (!next) throw RulesError(line_no, "unknown section " + std::string(line));
      section = *next;
      continue;
    }

    switch (section) {
      case Section::none:
        throw RulesError(line_no, "entry outside of any section");
      case Section::keywords: {
        auto parts = split_ws(line);
        if (parts.size() > 2 || (parts.size() == 2 && parts[1] != "stem"))
          throw RulesError(line_no, "keyword lines are `surface [stem]`");
        KeywordEntry entry{lowercase(parts[0]),
                           parts.size() == 2 ? MatchMode::stem_prefix : MatchMode::exact};
        if (!surfaces.insert(entry.surface).second)
          throw RulesError(line_no, "duplicate keyword " + entry.surface);
        rules.keywords.push_back(std::move(entry));
        break;
      }
      case Section::change_verbs: {
        auto parts = split_ws(line);
        if (parts.size() != 1) throw RulesError(line_no, "change verb lines hold one surface");
        std::string surface = lowercase(parts[0]);
        if (surfaces.count(surface) == 0)
          throw RulesError(line_no, "change verb " + surface + " is not a keyword");
        rules.change_verbs.push_back(std::move(surface));
        break;
      }
      case Section::negations:
      case Section::priors:
      case Section::comparatives: {
        std::size_t colon = line.find(':');
        if (colon == std::string_view::npos)
          throw RulesError(line_no, "pattern lines are `rule-id: template`");
        std::string id(trim(line.substr(0, colon)));
        if (id.empty() || split_ws(id).size() != 1)
          throw RulesError(line_no, "bad rule id \"" + id + "\"");
        if (!rule_ids.insert(id).second) throw RulesError(line_no, "duplicate rule id " + id);
        Template t = Template::parse(id, line.substr(colon + 1), line_no);
        auto& target = section == Section::negations ? rules.negation_patterns
                       : section == Section::priors  ? rules.prior_patterns
                                                     : rules.comparative_patterns;
        target.push_back(std::move(t));
        break;
      }
    }
  }
  return rules;
}

RuleSet load_rules(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RulesError(0, "cannot open rules file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_rules(buffer.str());
}

const RuleSet& default_rules() {
  static const RuleSet rules = parse_rules(default_rules_text());
  return rules;
}

}  // namespace cxrprior
