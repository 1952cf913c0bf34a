#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cxrprior/analysis.hpp"
#include "cxrprior/labeler.hpp"
#include "cxrprior/metrics.hpp"

namespace cxrprior {

inline constexpr const char* kToolkitVersion = "0.3.0";

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2 };

// Entry point shared by the binary and the tests. argv[0] is the program name.
int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);

// Score that the stratified summary is built from.
enum class StratifyMetric { b1, b2, b3, b4, rouge_l, cider };

std::optional<StratifyMetric> parse_stratify_metric(std::string_view name);
const char* to_string(StratifyMetric metric);
double metric_value(const ReportScores& scores, StratifyMetric metric);
HistogramSpec default_histogram(StratifyMetric metric);

struct PipelineResult {
  MetricReport metrics;  // per_report[i].label is filled
  std::vector<PriorLabel> labels;
  LabelCounts counts;
  StratifiedSummary summary;
};

// Labels each record's candidate (or `target`), scores candidates against
// references, then stratifies the chosen metric by label.
PipelineResult pipeline_label_then_eval(const std::vector<CorpusRecord>& records,
                                        const RuleSet& rules,
                                        LabelTarget target = LabelTarget::candidate,
                                        StratifyMetric metric = StratifyMetric::b4,
                                        std::optional<HistogramSpec> spec = std::nullopt);

// Serialized outputs.
std::string labels_jsonl(const std::vector<CorpusRecord>& records,
                         const std::vector<PriorLabel>& labels);
std::string counts_json(const LabelCounts& counts,
                        const std::optional<CountComparison>& comparison = std::nullopt);
std::string metrics_csv(const MetricReport& report);
std::string pipeline_json(const PipelineResult& result);

}  // namespace cxrprior
