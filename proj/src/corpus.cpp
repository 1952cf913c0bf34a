#include "cxrprior/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "cxrprior/error.hpp"

namespace cxrprior {
namespace {

using nlohmann::json;

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
char to_lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), to_lower);
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : trim(s)) {
    if (is_space(c)) {
      pending_space = true;
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

constexpr std::array<std::string_view, 12> kAbbreviations = {
    "dr", "vs", "a.m", "p.m", "e.g", "i.e", "approx", "mr", "mrs", "ms", "st", "fig"};

// True when the period at text[pos] closes an abbreviation rather than a sentence.
bool period_is_abbreviation(std::string_view text, std::size_t pos) {
  std::size_t start = pos;
  while (start > 0 && !is_space(text[start - 1])) --start;
  std::string_view word = text.substr(start, pos - start);
  while (!word.empty() && is_punct(word.front())) word.remove_prefix(1);
  if (word.size() == 1 && is_alpha(word.front())) return true;
  const std::string lower = lowercase(word);
  return std::find(kAbbreviations.begin(), kAbbreviations.end(), lower) != kAbbreviations.end();
}

// Case-insensitive search for `needle` (already uppercase) from `from`.
std::size_t find_header(std::string_view hay, std::string_view needle, std::size_t from = 0) {
  if (needle.size() > hay.size()) return std::string_view::npos;
  for (std::size_t i = from; i + needle.size() <= hay.size(); ++i) {
    bool match = true;
    for (std::size_t j = 0; j < needle.size(); ++j) {
      if (std::toupper(static_cast<unsigned char>(hay[i + j])) != needle[j]) {
        match = false;
        break;
      }
    }
    if (match) return i;
  }
  return std::string_view::npos;
}

// ---------------------------------------------------------------------------
// Record construction shared by the JSONL and CSV readers.

struct RawFields {
  std::optional<std::string> id, text, reference, candidate, label;
};

int parse_label(const std::string& value, std::size_t line, std::size_t offset) {
  if (value == "0") return 0;
  if (value == "1") return 1;
  throw CorpusError(line, offset, "field \"label\" must be 0 or 1, got \"" + value + "\"");
}

CorpusRecord build_record(RawFields fields, std::optional<int> label, std::size_t line,
                          std::size_t offset) {
  if (!fields.id) throw CorpusError(line, offset, "missing required field \"id\"");
  if (!fields.text) throw CorpusError(line, offset, "missing required field \"text\"");
  CorpusRecord record;
  record.report = make_report(std::move(*fields.id), std::move(*fields.text));
  record.reference = std::move(fields.reference);
  record.candidate = std::move(fields.candidate);
  record.gold_label = label;
  return record;
}

std::optional<std::string> json_string_field(const json& obj, const char* name, std::size_t line,
                                             std::size_t offset) {
  auto it = obj.find(name);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string())
    throw CorpusError(line, offset, std::string("field \"") + name + "\" must be a string");
  return it->get<std::string>();
}

std::vector<CorpusRecord> parse_jsonl(std::string_view content) {
  std::vector<CorpusRecord> records;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    const std::size_t line_start = pos;
    std::size_t eol = content.find('\n', pos);
    if (eol == std::string_view::npos) eol = content.size();
    std::string_view line = content.substr(line_start, eol - line_start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = eol + 1;
    ++line_no;
    if (trim(line).empty()) continue;

    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw CorpusError(line_no, line_start + (e.byte > 0 ? e.byte - 1 : 0),
                        std::string("malformed JSON: ") + e.what());
    }
    if (!obj.is_object()) throw CorpusError(line_no, line_start, "expected a JSON object");

    RawFields fields;
    fields.id = json_string_field(obj, "id", line_no, line_start);
    fields.text = json_string_field(obj, "text", line_no, line_start);
    fields.reference = json_string_field(obj, "reference", line_no, line_start);
    fields.candidate = json_string_field(obj, "candidate", line_no, line_start);

    std::optional<int> label;
    if (auto it = obj.find("label"); it != obj.end() && !it->is_null()) {
      if (!it->is_number_integer() || (it->get<long long>() != 0 && it->get<long long>() != 1))
        throw CorpusError(line_no, line_start, "field \"label\" must be 0 or 1");
      label = it->get<int>();
    }
    records.push_back(build_record(std::move(fields), label, line_no, line_start));
  }
  return records;
}

// RFC-4180 reader. Each row remembers the physical line and byte offset it
// started at so errors point at the right place.
struct CsvRow {
  std::vector<std::string> cells;
  std::size_t line = 0;
  std::size_t offset = 0;
};

std::vector<CsvRow> read_csv_rows(std::string_view content) {
  std::vector<CsvRow> rows;
  std::size_t pos = 0;
  std::size_t line = 1;
  while (pos < content.size()) {
    CsvRow row;
    row.line = line;
    row.offset = pos;
    std::string cell;
    bool row_done = false;
    while (!row_done) {
      cell.clear();
      if (pos < content.size() && content[pos] == '"') {
        const std::size_t quote_line = line;
        const std::size_t quote_offset = pos;
        ++pos;
        bool closed = false;
        while (pos < content.size()) {
          char c = content[pos];
          if (c == '"') {
            if (pos + 1 < content.size() && content[pos + 1] == '"') {
              cell.push_back('"');
              pos += 2;
              continue;
            }
            ++pos;
            closed = true;
            break;
          }
          if (c == '\n') ++line;
          cell.push_back(c);
          ++pos;
        }
        if (!closed) throw CorpusError(quote_line, quote_offset, "unterminated quoted field");
        if (pos < content.size() && content[pos] != ',' && content[pos] != '\n' &&
            content[pos] != '\r')
          throw CorpusError(line, pos, "unexpected character after closing quote");
      } else {
        while (pos < content.size() && content[pos] != ',' && content[pos] != '\n' &&
               content[pos] != '\r') {
          if (content[pos] == '"')
            throw CorpusError(line, pos, "quote inside unquoted field");
          cell.push_back(content[pos++]);
        }
      }
      row.cells.push_back(cell);
      if (pos >= content.size()) {
        row_done = true;
      } else if (content[pos] == ',') {
        ++pos;
      } else {
        if (content[pos] == '\r') ++pos;
        if (pos < content.size() && content[pos] == '\n') ++pos;
        ++line;
        row_done = true;
      }
    }
    if (row.cells.size() == 1 && row.cells.front().empty()) continue;  // blank line
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<CorpusRecord> parse_csv(std::string_view content) {
  std::vector<CsvRow> rows = read_csv_rows(content);
  std::vector<CorpusRecord> records;
  if (rows.empty()) return records;

  const CsvRow& header = rows.front();
  std::optional<std::size_t> col_id, col_text, col_reference, col_candidate, col_label;
  for (std::size_t i = 0; i < header.cells.size(); ++i) {
    const std::string name(trim(header.cells[i]));
    std::optional<std::size_t>* slot = nullptr;
    if (name == "id") slot = &col_id;
    else if (name == "text") slot = &col_text;
    else if (name == "reference") slot = &col_reference;
    else if (name == "candidate") slot = &col_candidate;
    else if (name == "label") slot = &col_label;
    if (slot == nullptr) continue;
    if (*slot) throw CorpusError(header.line, header.offset, "duplicate column \"" + name + "\"");
    *slot = i;
  }

  if (!col_id) throw CorpusError(header.line, header.offset, "header has no \"id\" column");
  if (!col_text) throw CorpusError(header.line, header.offset, "header has no \"text\" column");

  for (std::size_t r = 1; r < rows.size(); ++r) {
    const CsvRow& row = rows[r];
    if (row.cells.size() != header.cells.size())
      throw CorpusError(row.line, row.offset,
                        "expected " + std::to_string(header.cells.size()) + " fields, got " +
                            std::to_string(row.cells.size()));
    auto cell = [&](const std::optional<std::size_t>& col) -> std::optional<std::string> {
      if (!col || row.cells[*col].empty()) return std::nullopt;
      return row.cells[*col];
    };
    RawFields fields;
    fields.id = cell(col_id);
    fields.text = col_text ? std::optional<std::string>(row.cells[*col_text]) : std::nullopt;
    fields.reference = cell(col_reference);
    fields.candidate = cell(col_candidate);
    std::optional<int> label;
    if (auto value = cell(col_label)) label = parse_label(*value, row.line, row.offset);
    records.push_back(build_record(std::move(fields), label, row.line, row.offset));
  }
  return records;
}

void check_unique_ids(const std::vector<CorpusRecord>& records) {
  std::unordered_set<std::string> seen;
  std::vector<std::string> duplicates;
  for (const auto& record : records) {
    if (!seen.insert(record.report.id).second &&
        std::find(duplicates.begin(), duplicates.end(), record.report.id) == duplicates.end())
      duplicates.push_back(record.report.id);
  }
  if (duplicates.empty()) return;
  std::string message = "duplicate id";
  message += duplicates.size() > 1 ? "s: " : ": ";
  for (std::size_t i = 0; i < duplicates.size(); ++i) {
    if (i > 0) message += ", ";
    message += duplicates[i];
  }
  throw DataError(message);
}

std::string csv_quote(std::string_view value) {
  const bool needs_quotes = value.find_first_of(",\"\r\n") != std::string_view::npos;
  if (!needs_quotes) return std::string(value);
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

std::size_t Report::token_count() const {
  std::size_t n = 0;
  for (const auto& sentence : tokens) n += sentence.size();
  return n;
}

CorpusFormat format_from_path(const std::filesystem::path& path) {
  return lowercase(path.extension().string()) == ".csv" ? CorpusFormat::csv : CorpusFormat::jsonl;
}

std::string extract_findings(std::string_view raw_text) {
  constexpr std::string_view kFindings = "FINDINGS:";
  const std::size_t header = find_header(raw_text, kFindings);
  if (header == std::string_view::npos) return std::string(raw_text);

  const std::size_t body = header + kFindings.size();
  std::size_t end = raw_text.size();
  for (std::string_view next : {std::string_view("IMPRESSION:"), std::string_view("RECOMMENDATION:")}) {
    end = std::min(end, find_header(raw_text, next, body));
  }
  return std::string(trim(raw_text.substr(body, end - body)));
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> sentences;
  std::size_t start = 0;
  auto flush = [&](std::size_t end) {
    std::string sentence = collapse_whitespace(text.substr(start, end - start));
    if (!sentence.empty()) sentences.push_back(std::move(sentence));
    start = end;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    const bool at_boundary = i + 1 == text.size() || is_space(text[i + 1]);
    if (!at_boundary) continue;
    if (c == '.' && period_is_abbreviation(text, i)) continue;
    flush(i + 1);
  }
  flush(text.size());
  return sentences;
}

std::vector<std::string> tokenize(std::string_view sentence) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < sentence.size()) {
    while (i < sentence.size() && is_space(sentence[i])) ++i;
    std::size_t j = i;
    while (j < sentence.size() && !is_space(sentence[j])) ++j;
    std::string_view word = sentence.substr(i, j - i);
    while (!word.empty() && is_punct(word.front())) word.remove_prefix(1);
    while (!word.empty() && is_punct(word.back())) word.remove_suffix(1);
    if (!word.empty()) tokens.push_back(lowercase(word));
    i = j;
  }
  return tokens;
}

std::vector<std::string> tokenize_text(std::string_view text) { return tokenize(text); }

Report make_report(std::string id, std::string raw_text) {
  Report report;
  report.id = std::move(id);
  report.raw_text = std::move(raw_text);
  report.findings = extract_findings(report.raw_text);
  report.sentences = split_sentences(report.findings);
  report.tokens.reserve(report.sentences.size());
  for (const auto& sentence : report.sentences) report.tokens.push_back(tokenize(sentence));
  return report;
}

std::vector<CorpusRecord> parse_corpus(std::string_view content, CorpusFormat format) {
  std::vector<CorpusRecord> records =
      format == CorpusFormat::csv ? parse_csv(content) : parse_jsonl(content);
  check_unique_ids(records);
  return records;
}

std::vector<CorpusRecord> load_corpus(const std::filesystem::path& path, CorpusFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_corpus(buffer.str(), format);
}

std::vector<CorpusRecord> load_corpus(const std::filesystem::path& path) {
  return load_corpus(path, format_from_path(path));
}

std::vector<std::vector<std::string>> parse_csv_table(std::string_view content) {
  std::vector<std::vector<std::string>> table;
  for (auto& row : read_csv_rows(content)) table.push_back(std::move(row.cells));
  return table;
}

std::string serialize_corpus(const std::vector<CorpusRecord>& records, CorpusFormat format) {
  std::string out;
  if (format == CorpusFormat::jsonl) {
    for (const auto& record : records) {
      json obj;
      obj["id"] = record.report.id;
      obj["text"] = record.report.raw_text;
      if (record.reference) obj["reference"] = *record.reference;
      if (record.candidate) obj["candidate"] = *record.candidate;
      if (record.gold_label) obj["label"] = *record.gold_label;
      out += obj.dump();
      out += '\n';
    }
    return out;
  }
  out = "id,text,reference,candidate,label\n";
  for (const auto& record : records) {
    out += csv_quote(record.report.id) + ',' + csv_quote(record.report.raw_text) + ',' +
           csv_quote(record.reference.value_or("")) + ',' +
           csv_quote(record.candidate.value_or("")) + ',' +
           (record.gold_label ? std::to_string(*record.gold_label) : std::string()) + '\n';
  }
  return out;
}

}  // namespace cxrprior
