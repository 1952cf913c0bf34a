#include "cxrprior/cli.hpp"

#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <json.hpp>

#include "cxrprior/error.hpp"
#include "cxrprior/infusion.hpp"
#include "cxrprior/io.hpp"
#include "cxrprior/rules.hpp"

namespace cxrprior {
namespace {

using ojson = nlohmann::ordered_json;

const std::map<std::string, LabelTarget> kLabelTargets = {
    {"text", LabelTarget::text},
    {"reference", LabelTarget::reference},
    {"candidate", LabelTarget::candidate}};

const std::map<std::string, LabelCounts> kPublishedCounts = {
    {"iu-xray", {3426, 529, 3955}},
    {"mimic-cxr", {106628, 99935, 206563}}};

LabelCounts parse_counts_spec(const std::string& spec) {
  if (auto it = kPublishedCounts.find(spec); it != kPublishedCounts.end()) return it->second;
  LabelCounts counts;
  char tail = 0;
  if (std::sscanf(spec.c_str(), "%zu,%zu,%zu%c", &counts.negative, &counts.positive, &counts.total,
                  &tail) != 3)
    throw CLI::ValidationError("--compare-counts", "expected iu-xray, mimic-cxr or NEG,POS,TOTAL");
  return counts;
}

ojson counts_object(const LabelCounts& c) {
  return ojson{{"negative", c.negative}, {"positive", c.positive}, {"total", c.total}};
}

ojson stratum_object(const std::optional<Stratum>& s) {
  if (!s) return nullptr;
  ojson edges = ojson::array();
  for (double e : s->histogram.edges) edges.push_back(e);
  return ojson{{"count", s->count},
               {"mean", s->mean},
               {"std", s->stddev},
               {"min", s->min},
               {"max", s->max},
               {"mean_tokens", s->mean_tokens},
               {"histogram", {{"edges", edges}, {"counts", s->histogram.counts}}}};
}

void emit(const std::string& path, const std::string& content, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << content;
  } else {
    write_file_atomic(path, content);
  }
}

RuleSet rules_from(const std::string& path) {
  return path.empty() ? default_rules() : load_rules(path);
}

std::vector<CorpusRecord> corpus_from(const std::string& path, const std::string& format) {
  if (format == "jsonl") return load_corpus(path, CorpusFormat::jsonl);
  if (format == "csv") return load_corpus(path, CorpusFormat::csv);
  return load_corpus(path);
}

std::string version_text() {
  return std::string("cxrprior ") + kToolkitVersion + " (default rules " +
         (default_rules().version.empty() ? "unversioned" : default_rules().version) + ")";
}

std::string latents_json(const ForwardResult& result, std::uint64_t seed, double prior) {
  auto matrix = [](const Mat& m) {
    ojson rows = ojson::array();
    for (std::size_t r = 0; r < m.rows(); ++r) {
      ojson row = ojson::array();
      for (std::size_t c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
      rows.push_back(row);
    }
    return rows;
  };
  ojson doc{{"seed", seed},
            {"prior", prior},
            {"visual", matrix(result.visual.values)},
            {"latent_plain", matrix(result.latent_plain.values)},
            {"latent", matrix(result.latent.values)}};
  return doc.dump() + '\n';
}

std::vector<ScoredItem> read_scores_csv(const std::string& path, StratifyMetric metric) {
  const auto table = parse_csv_table(read_file(path));
  if (table.empty()) return {};
  const auto& header = table.front();
  auto column = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw DataError("scores file " + path + " has no column " + name);
  };
  const std::size_t id_col = column("id");
  const std::size_t score_col = column(to_string(metric));
  const std::size_t label_col = column("label");
  std::vector<ScoredItem> items;
  for (std::size_t r = 1; r < table.size(); ++r) {
    const auto& row = table[r];
    if (row.size() != header.size())
      throw DataError("scores file " + path + " row " + std::to_string(r + 1) + " has " +
                      std::to_string(row.size()) + " fields");
    ScoredItem item;
    item.id = row[id_col];
    try {
      item.score = std::stod(row[score_col]);
    } catch (const std::exception&) {
      throw DataError("row for " + item.id + " has a non-numeric score");
    }
    if (row[label_col] != "0" && row[label_col] != "1")
      throw DataError("row for " + item.id + " has label \"" + row[label_col] + "\"");
    item.label = row[label_col] == "1" ? 1 : 0;
    items.push_back(std::move(item));
  }
  return items;
}

}  // namespace

std::optional<StratifyMetric> parse_stratify_metric(std::string_view name) {
  for (auto m : {StratifyMetric::b1, StratifyMetric::b2, StratifyMetric::b3, StratifyMetric::b4,
                 StratifyMetric::rouge_l, StratifyMetric::cider})
    if (name == to_string(m)) return m;
  return std::nullopt;
}

const char* to_string(StratifyMetric metric) {
  switch (metric) {
    case StratifyMetric::b1: return "b1";
    case StratifyMetric::b2: return "b2";
    case StratifyMetric::b3: return "b3";
    case StratifyMetric::b4: return "b4";
    case StratifyMetric::rouge_l: return "rouge_l";
    case StratifyMetric::cider: return "cider";
  }
  return "?";
}

double metric_value(const ReportScores& scores, StratifyMetric metric) {
  switch (metric) {
    case StratifyMetric::b1: return scores.bleu[0];
    case StratifyMetric::b2: return scores.bleu[1];
    case StratifyMetric::b3: return scores.bleu[2];
    case StratifyMetric::b4: return scores.bleu[3];
    case StratifyMetric::rouge_l: return scores.rouge_l;
    case StratifyMetric::cider: return scores.cider;
  }
  return 0.0;
}

HistogramSpec default_histogram(StratifyMetric metric) {
  return metric == StratifyMetric::cider ? HistogramSpec{0.0, kCiderScale, 20} : HistogramSpec{};
}

PipelineResult pipeline_label_then_eval(const std::vector<CorpusRecord>& records,
                                        const RuleSet& rules, LabelTarget target,
                                        StratifyMetric metric, std::optional<HistogramSpec> spec) {
  PipelineResult result;
  result.metrics = evaluate_corpus(records);
  CorpusLabels labeled = label_corpus(records, rules, target);
  result.labels = std::move(labeled.labels);
  result.counts = labeled.counts;

  std::vector<ScoredItem> items;
  items.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    ReportScores& scores = result.metrics.per_report[i];
    scores.label = result.labels[i].value;
    const std::string& text = target == LabelTarget::candidate   ? *records[i].candidate
                              : target == LabelTarget::reference ? *records[i].reference
                                                                 : records[i].report.raw_text;
    items.push_back({scores.id, metric_value(scores, metric), scores.label.value(),
                     tokenize_text(text).size()});
  }
  result.summary = stratify(items, spec.value_or(default_histogram(metric)), to_string(metric));
  return result;
}

std::string labels_jsonl(const std::vector<CorpusRecord>& records,
                         const std::vector<PriorLabel>& labels) {
  std::string out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    ojson evidence = ojson::array();
    for (const auto& cm : labels[i].evidence) {
      const TokenSpan span = cm.match.value_or(cm.mention.token_span);
      evidence.push_back(ojson{{"sentence_index", cm.mention.sentence_index},
                               {"span", {span.begin, span.end}},
                               {"rule", cm.fired_rule}});
    }
    out += ojson{{"id", records[i].report.id}, {"label", labels[i].value}, {"evidence", evidence}}
               .dump();
    out += '\n';
  }
  return out;
}

std::string counts_json(const LabelCounts& counts, const std::optional<CountComparison>& comparison) {
  ojson doc = counts_object(counts);
  if (comparison) {
    doc["comparison"] = ojson{{"expected", counts_object(comparison->expected)},
                              {"total_matches", comparison->total_matches},
                              {"positive_relative_diff", comparison->positive_relative_diff},
                              {"positive_within_10_percent", comparison->positive_within_tolerance}};
  }
  return doc.dump(2) + '\n';
}

std::string metrics_csv(const MetricReport& report) {
  std::string out = "id,b1,b2,b3,b4,rouge_l,cider,label\n";
  for (const auto& r : report.per_report) {
    std::string id = r.id;
    if (id.find_first_of(",\"\r\n") != std::string::npos) {
      std::string quoted = "\"";
      for (char c : id) {
        if (c == '"') quoted += '"';
        quoted += c;
      }
      id = quoted + '"';
    }
    out += id;
    for (double b : r.bleu) out += ',' + format_double(b);
    out += ',' + format_double(r.rouge_l) + ',' + format_double(r.cider) + ',' +
           (r.label ? std::to_string(*r.label) : std::string()) + '\n';
  }
  return out;
}

std::string pipeline_json(const PipelineResult& result) {
  const auto& corpus = result.metrics.corpus;
  ojson per_report = ojson::array();
  for (const auto& r : result.metrics.per_report) {
    ojson row{{"id", r.id}, {"bleu", r.bleu}, {"rouge_l", r.rouge_l}, {"cider", r.cider}};
    row["label"] = r.label ? ojson(*r.label) : ojson(nullptr);
    per_report.push_back(row);
  }
  const auto& neg = result.summary.negative();
  const auto& pos = result.summary.positive();
  ojson check = nullptr;
  if (neg && pos) check = pos->mean < neg->mean;

  ojson doc{{"corpus",
             {{"bleu", corpus.bleu}, {"rouge_l", corpus.rouge_l}, {"cider", corpus.cider}}},
            {"per_report", per_report},
            {"label_counts", counts_object(result.counts)},
            {"stratified",
             {{"metric", result.summary.metric},
              {"std", "population"},
              {"negative", stratum_object(neg)},
              {"positive", stratum_object(pos)}}},
            {"checks", {{"positive_mean_below_negative", check}}}};
  return doc.dump(2) + '\n';
}

int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Comparison-prior toolkit for radiology report corpora"};
  app.set_version_flag("--version", version_text());
  app.require_subcommand(1);

  std::string in_path, out_path, rules_path, format = "auto", label_on, summary_path, csv_path,
                                             plot_path, compare_spec, metric_name = "b4",
                                             scores_path, latents_path;
  std::size_t bins = 20;
  unsigned threads = 0;
  std::uint64_t seed = kDefaultSeed;
  int prior = 0;
  std::size_t max_len = kDefaultMaxLen;
  bool do_grad_check = false;

  auto add_input = [&](CLI::App* sub) {
    sub->add_option("--in", in_path, "Corpus file (JSONL or CSV)")->required()->check(CLI::ExistingFile);
    sub->add_option("--format", format, "Corpus format")
        ->check(CLI::IsMember({"auto", "jsonl", "csv"}));
    sub->add_option("--rules", rules_path, "Rules file (default: bundled)")->check(CLI::ExistingFile);
  };
  auto metric_check = CLI::IsMember({"b1", "b2", "b3", "b4", "rouge_l", "cider"});

  CLI::App* label = app.add_subcommand("label", "Label reports for prior expressions");
  add_input(label);
  label_on = "text";
  label->add_option("--out", out_path, "Labels JSONL (default: stdout)");
  label->add_option("--summary", summary_path, "Summary counts JSON");
  label->add_option("--label-on", label_on, "Field to label")
      ->check(CLI::IsMember({"text", "reference", "candidate"}));
  label->add_option("--compare-counts", compare_spec,
                    "Compare counts with iu-xray, mimic-cxr or NEG,POS,TOTAL");
  label->add_option("--threads", threads, "Worker threads (0 = all cores)");

  CLI::App* eval = app.add_subcommand("eval", "Label candidates, score them, stratify by label");
  add_input(eval);
  std::string eval_label_on = "candidate";
  eval->add_option("--out", out_path, "Metric report JSON (default: stdout)");
  eval->add_option("--csv", csv_path, "Per-report CSV");
  eval->add_option("--plot", plot_path, "Histogram CSV; stats go next to it as .json");
  eval->add_option("--label-on", eval_label_on, "Field to label")
      ->check(CLI::IsMember({"candidate", "reference"}));
  eval->add_option("--metric", metric_name, "Metric to stratify")->check(metric_check);
  eval->add_option("--bins", bins, "Histogram bins")->check(CLI::PositiveNumber);

  CLI::App* analyze = app.add_subcommand("analyze", "Label counts, lengths, score strata");
  add_input(analyze);
  std::string analyze_label_on = "text";
  analyze->add_option("--out", out_path, "Analysis JSON (default: stdout)");
  analyze->add_option("--label-on", analyze_label_on, "Field to label")
      ->check(CLI::IsMember({"text", "reference", "candidate"}));
  analyze->add_option("--scores", scores_path, "Per-report CSV written by eval --csv")
      ->check(CLI::ExistingFile);
  analyze->add_option("--metric", metric_name, "Score column to stratify")->check(metric_check);
  analyze->add_option("--bins", bins, "Histogram bins")->check(CLI::PositiveNumber);
  analyze->add_option("--plot", plot_path, "Histogram CSV for --scores");
  analyze->add_option("--compare-counts", compare_spec,
                      "Compare counts with iu-xray, mimic-cxr or NEG,POS,TOTAL");

  CLI::App* demo = app.add_subcommand("infuse-demo", "Run the prior-infused toy encoder-decoder");
  demo->add_option("--seed", seed, "Model seed");
  demo->add_option("--prior", prior, "Comparison prior")->check(CLI::IsMember({0, 1}));
  demo->add_option("--max-len", max_len, "Maximum decoded tokens")->check(CLI::PositiveNumber);
  demo->add_option("--emit-latents", latents_path, "Write V and L matrices as JSON");
  demo->add_flag("--grad-check", do_grad_check, "Compare derivatives with finite differences");
  demo->add_option("--out", out_path, "Result JSON (default: stdout)");

  if (argv.size() <= 1) {
    err << app.help();
    return kExitUsage;
  }

  std::vector<const char*> cargs;
  for (const auto& a : argv) cargs.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    std::optional<LabelCounts> expected;
    if (!compare_spec.empty()) expected = parse_counts_spec(compare_spec);
    const StratifyMetric metric = *parse_stratify_metric(metric_name);

    if (label->parsed()) {
      const RuleSet rules = rules_from(rules_path);
      const auto records = corpus_from(in_path, format);
      const CorpusLabels labeled = label_corpus(records, rules, kLabelTargets.at(label_on), threads);
      std::optional<CountComparison> comparison;
      if (expected) comparison = compare_counts(labeled.counts, *expected);
      emit(out_path, labels_jsonl(records, labeled.labels), out);
      const std::string summary = counts_json(labeled.counts, comparison);
      if (!summary_path.empty()) {
        write_file_atomic(summary_path, summary);
      } else if (!out_path.empty() && out_path != "-") {
        out << summary;
      }
      return kExitOk;
    }

    if (eval->parsed()) {
      const RuleSet rules = rules_from(rules_path);
      const auto records = corpus_from(in_path, format);
      HistogramSpec spec = default_histogram(metric);
      spec.bins = bins;
      const PipelineResult result =
          pipeline_label_then_eval(records, rules, kLabelTargets.at(eval_label_on), metric, spec);
      if (!csv_path.empty()) write_file_atomic(csv_path, metrics_csv(result.metrics));
      if (!plot_path.empty()) emit_plot_data(result.summary, plot_path);
      emit(out_path, pipeline_json(result), out);
      return kExitOk;
    }

    if (analyze->parsed()) {
      const RuleSet rules = rules_from(rules_path);
      const auto records = corpus_from(in_path, format);
      const LabelTarget target = kLabelTargets.at(analyze_label_on);
      const CorpusLabels labeled = label_corpus(records, rules, target);

      std::vector<Report> reports;
      reports.reserve(records.size());
      for (const auto& r : records) {
        if (target == LabelTarget::text) reports.push_back(r.report);
        else if (target == LabelTarget::reference) reports.push_back(make_report(r.report.id, *r.reference));
        else reports.push_back(make_report(r.report.id, *r.candidate));
      }
      const auto lengths = length_stats(reports, labeled.labels);
      auto length_object = [](const std::optional<LengthStats>& s) -> ojson {
        if (!s) return nullptr;
        return ojson{{"count", s->count}, {"mean", s->mean}, {"median", s->median}};
      };

      ojson doc{{"label_on", analyze_label_on},
                {"counts", counts_object(labeled.counts)},
                {"length_tokens", {{"negative", length_object(lengths[0])},
                                   {"positive", length_object(lengths[1])}}}};
      if (expected) {
        const CountComparison c = compare_counts(labeled.counts, *expected);
        doc["comparison"] = ojson{{"expected", counts_object(c.expected)},
                                  {"total_matches", c.total_matches},
                                  {"positive_relative_diff", c.positive_relative_diff},
                                  {"positive_within_10_percent", c.positive_within_tolerance}};
      }
      if (!scores_path.empty()) {
        HistogramSpec spec = default_histogram(metric);
        spec.bins = bins;
        const StratifiedSummary summary = stratify(read_scores_csv(scores_path, metric), spec, to_string(metric));
        doc["stratified"] = ojson{{"metric", summary.metric},
                                  {"std", "population"},
                                  {"negative", stratum_object(summary.negative())},
                                  {"positive", stratum_object(summary.positive())}};
        if (!plot_path.empty()) emit_plot_data(summary, plot_path);
      }
      emit(out_path, doc.dump(2) + '\n', out);
      return kExitOk;
    }

    if (demo->parsed()) {
      const ToyModel model(seed);
      const ImagePair images = synthetic_images(seed);
      const PriorScalar p{static_cast<double>(prior)};
      const ForwardResult result = forward(images, p, model, max_len);
      ojson doc{{"seed", seed},
                {"prior", prior},
                {"max_len", max_len},
                {"parameter_count", model.parameter_count()},
                {"tokens", result.tokens}};
      if (do_grad_check) {
        const GradCheckReport report = grad_check(model, images, p, 4, max_len);
        ojson entries = ojson::array();
        for (const auto& e : report.entries) {
          ojson target = e.target.kind == GradTarget::Kind::prior
                             ? ojson("prior")
                             : ojson("weight " + std::to_string(e.target.weight_index));
          entries.push_back(ojson{{"target", target},
                                  {"analytic", e.analytic},
                                  {"numeric", e.numeric},
                                  {"relative_error", e.relative_error}});
        }
        doc["grad_check"] = ojson{{"step", kFiniteDifferenceStep},
                                  {"max_relative_error", report.max_relative_error},
                                  {"entries", entries}};
      }
      if (!latents_path.empty()) write_file_atomic(latents_path, latents_json(result, seed, p.value));
      emit(out_path, doc.dump(2) + '\n', out);
      return kExitOk;
    }
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace cxrprior
