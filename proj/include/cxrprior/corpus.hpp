#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cxrprior {

// One study's text, normalized into the sentence/token view every other
// module consumes.
struct Report {
  std::string id;
  std::string raw_text;
  std::string findings;
  std::vector<std::string> sentences;
  std::vector<std::vector<std::string>> tokens;  // one list per sentence

  std::size_t token_count() const;
};

struct CorpusRecord {
  Report report;
  std::optional<std::string> reference;
  std::optional<std::string> candidate;
  std::optional<int> gold_label;  // 0 or 1
};

enum class CorpusFormat { jsonl, csv };

// Picks the format from the file extension; ".csv" is CSV, anything else JSONL.
CorpusFormat format_from_path(const std::filesystem::path& path);

// Text following a case-insensitive "FINDINGS:" header, up to the next
// "IMPRESSION:" or "RECOMMENDATION:" header, trimmed. Without a Findings
// header the input is returned unchanged.
std::string extract_findings(std::string_view raw_text);

// Splits on '.', '!' and '?' followed by whitespace or end of text. A period
// after a single letter or a known abbreviation does not end a sentence.
// Sentences are trimmed with inner whitespace collapsed; empties are dropped.
std::vector<std::string> split_sentences(std::string_view text);

// Lowercase whitespace tokenization. Leading and trailing punctuation is
// stripped from each token; inner hyphens, slashes and dots survive.
std::vector<std::string> tokenize(std::string_view sentence);

// Tokens of a whole text, sentence boundaries ignored.
std::vector<std::string> tokenize_text(std::string_view text);

Report make_report(std::string id, std::string raw_text);

std::vector<CorpusRecord> parse_corpus(std::string_view content, CorpusFormat format);
std::vector<CorpusRecord> load_corpus(const std::filesystem::path& path, CorpusFormat format);
std::vector<CorpusRecord> load_corpus(const std::filesystem::path& path);

// RFC-4180 rows, header included, blank lines skipped.
std::vector<std::vector<std::string>> parse_csv_table(std::string_view content);

std::string serialize_corpus(const std::vector<CorpusRecord>& records, CorpusFormat format);

}  // namespace cxrprior
