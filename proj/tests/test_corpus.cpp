#include "cxrprior/corpus.hpp"
#include "cxrprior/error.hpp"

#include "doctest.h"

#include <random>
#include <string>
#include <vector>

using namespace cxrprior;

namespace {

std::string random_word(std::mt19937_64& rng) {
  static const std::vector<std::string> words = {
      "heart", "Lungs", "clear", "XXXX", "ill-defined", "opacity", "left/right", "no",
      "Prior", "effusion,", "(stable)", "normal;", "size", "again", "0.5", "cm"};
  return words[rng() % words.size()];
}

}  // namespace

TEST_CASE("jsonl keeps line order") {
  const auto records = parse_corpus(
      "{\"id\":\"a\",\"text\":\"Heart normal.\"}\n{\"id\":\"b\",\"text\":\"Lungs clear.\"}\n",
      CorpusFormat::jsonl);
  REQUIRE(records.size() == 2);
  CHECK(records[0].report.id == "a");
  CHECK(records[1].report.id == "b");
  CHECK_FALSE(records[0].candidate.has_value());
}

TEST_CASE("empty input gives no records") {
  CHECK(parse_corpus("", CorpusFormat::jsonl).empty());
  CHECK(parse_corpus("", CorpusFormat::csv).empty());
}

TEST_CASE("missing id names line 1") {
  try {
    parse_corpus("{\"text\":\"Lungs clear.\"}\n", CorpusFormat::jsonl);
    FAIL("expected an error");
  } catch (const CorpusError& e) {
    CHECK(e.line() == 1);
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }
}

TEST_CASE("bad line reports its own number and offset") {
  const std::string content =
      "{\"id\":\"a\",\"text\":\"ok\"}\n{\"id\":\"b\",\"text\":\"ok\",\"label\":3}\n";
  try {
    parse_corpus(content, CorpusFormat::jsonl);
    FAIL("expected an error");
  } catch (const CorpusError& e) {
    CHECK(e.line() == 2);
    CHECK(e.byte_offset() >= 23);
  }
  CHECK_THROWS_AS(parse_corpus("{not json}\n", CorpusFormat::jsonl), CorpusError);
}

TEST_CASE("duplicate ids are rejected") {
  CHECK_THROWS_WITH_AS(
      parse_corpus("{\"id\":\"x\",\"text\":\"a\"}\n{\"id\":\"x\",\"text\":\"b\"}\n",
                   CorpusFormat::jsonl),
      doctest::Contains("x"), DataError);
}

TEST_CASE("csv with quoting") {
  const std::string csv =
      "id,text,candidate,label\n"
      "r1,\"Heart normal, lungs clear.\",\"He said \"\"ok\"\".\",1\n"
      "r2,\"Two\nlines.\",,\n";
  const auto records = parse_corpus(csv, CorpusFormat::csv);
  REQUIRE(records.size() == 2);
  CHECK(records[0].report.raw_text == "Heart normal, lungs clear.");
  CHECK(*records[0].candidate == "He said \"ok\".");
  CHECK(*records[0].gold_label == 1);
  CHECK(records[1].report.raw_text == "Two\nlines.");
  CHECK_FALSE(records[1].candidate.has_value());
  CHECK_FALSE(records[1].gold_label.has_value());
}

TEST_CASE("csv without id column fails on the header") {
  try {
    parse_corpus("text\nLungs clear.\n", CorpusFormat::csv);
    FAIL("expected an error");
  } catch (const CorpusError& e) {
    CHECK(e.line() == 1);
  }
}

TEST_CASE("extract_findings") {
  CHECK(extract_findings("FINDINGS: Lungs clear. IMPRESSION: Normal.") == "Lungs clear.");
  CHECK(extract_findings("Lungs clear.") == "Lungs clear.");
  CHECK(extract_findings("findings:\nHeart normal.") == "Heart normal.");
  CHECK(extract_findings("Findings: A. Recommendation: B.") == "A.");
}

TEST_CASE("split_sentences") {
  CHECK(split_sentences("Heart normal. Lungs clear.") ==
        std::vector<std::string>{"Heart normal.", "Lungs clear."});
  CHECK(split_sentences("").empty());
  CHECK(split_sentences("Stable vs. prior exam.") ==
        std::vector<std::string>{"Stable vs. prior exam."});
  CHECK(split_sentences("Seen by Dr. Smith at 3 p.m. today.").size() == 1);
  CHECK(split_sentences("Nodule measures 0.5 cm. Stable!  Really?") ==
        std::vector<std::string>{"Nodule measures 0.5 cm.", "Stable!", "Really?"});
}

TEST_CASE("tokenize") {
  CHECK(tokenize("Compared to prior examination.") ==
        std::vector<std::string>{"compared", "to", "prior", "examination"});
  CHECK(tokenize("XXXX") == std::vector<std::string>{"xxxx"});
  CHECK(tokenize("ill-defined opacity") == std::vector<std::string>{"ill-defined", "opacity"});
  CHECK(tokenize("(left/right), ... ") == std::vector<std::string>{"left/right"});
}

TEST_CASE("property: tokenize is idempotent") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::string s;
    const int n = static_cast<int>(rng() % 12);
    for (int i = 0; i < n; ++i) s += random_word(rng) + (rng() % 3 == 0 ? "  " : " ");
    const auto once = tokenize(s);
    std::string joined;
    for (const auto& t : once) joined += (joined.empty() ? "" : " ") + t;
    CHECK(tokenize(joined) == once);
  }
}

TEST_CASE("property: two sentences split back apart") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    auto sentence = [&] {
      std::string s = "Word";
      const int n = 1 + static_cast<int>(rng() % 6);
      for (int i = 0; i < n; ++i) s += " " + std::string(1, static_cast<char>('a' + rng() % 26)) + "xyz";
      return s + ".";
    };
    const std::string a = sentence();
    const std::string b = sentence();
    CHECK(split_sentences(a + " " + b) == std::vector<std::string>{a, b});
  }
}

TEST_CASE("property: serialize then parse is a fixed point") {
  std::mt19937_64 rng(11);
  for (const auto format : {CorpusFormat::jsonl, CorpusFormat::csv}) {
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<CorpusRecord> records;
      const int n = 1 + static_cast<int>(rng() % 5);
      for (int i = 0; i < n; ++i) {
        std::string text;
        for (int w = 0; w < 6; ++w) text += random_word(rng) + (w % 3 == 2 ? ".\n" : " ");
        CorpusRecord r;
        r.report = make_report("id" + std::to_string(i), text + "\"quoted\", comma");
        if (rng() % 2) r.reference = text;
        if (rng() % 2) r.candidate = "cand " + text;
        if (rng() % 2) r.gold_label = static_cast<int>(rng() % 2);
        records.push_back(r);
      }
      const std::string first = serialize_corpus(records, format);
      const auto reparsed = parse_corpus(first, format);
      REQUIRE(reparsed.size() == records.size());
      for (std::size_t i = 0; i < records.size(); ++i) {
        CHECK(reparsed[i].report.raw_text == records[i].report.raw_text);
        CHECK(reparsed[i].reference == records[i].reference);
        CHECK(reparsed[i].candidate == records[i].candidate);
        CHECK(reparsed[i].gold_label == records[i].gold_label);
      }
      CHECK(serialize_corpus(reparsed, format) == first);
    }
  }
}

TEST_CASE("bundled fixtures load") {
  const std::string dir = CXRPRIOR_SOURCE_DIR "/data/";
  CHECK(load_corpus(dir + "golden.jsonl").size() == 4);
  CHECK(load_corpus(dir + "synthetic50.jsonl").size() == 50);
  CHECK(load_corpus(dir + "pipeline6.jsonl").size() == 6);
  CHECK_THROWS_AS(load_corpus(dir + "does_not_exist.jsonl"), DataError);
}
