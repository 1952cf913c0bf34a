#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cxrprior/corpus.hpp"
#include "cxrprior/labeler.hpp"

namespace cxrprior {

struct ScoredItem {
  std::string id;
  double score = 0.0;
  int label = 0;
  std::size_t token_count = 0;
};

struct HistogramSpec {
  double lo = 0.0;
  double hi = 1.0;
  std::size_t bins = 20;
};

struct Histogram {
  std::vector<double> edges;  // bins + 1 edges
  std::vector<std::size_t> counts;
};

// Statistics of one label's scores. Standard deviation is the population one.
struct Stratum {
  std::size_t count = 0;
  double mean = 0.0;
  double stddev = 0.0;
  double min = 0.0;
  double max = 0.0;
  double mean_tokens = 0.0;
  Histogram histogram;
};

struct StratifiedSummary {
  std::string metric;
  HistogramSpec spec;
  std::array<std::optional<Stratum>, 2> strata;  // indexed by label; empty label -> nullopt

  const std::optional<Stratum>& negative() const { return strata[0]; }
  const std::optional<Stratum>& positive() const { return strata[1]; }
  std::size_t total() const;
};

// Groups scores by label. Scores outside [spec.lo, spec.hi] land in the edge
// bins so every stratum's histogram counts sum to its size. Throws
// std::invalid_argument for a label other than 0/1 or a bad spec.
StratifiedSummary stratify(const std::vector<ScoredItem>& items, HistogramSpec spec = {},
                           std::string metric = "bleu4");

// Fixed-order merge of the strata back into whole-corpus count and mean.
std::pair<std::size_t, double> merged_mean(const StratifiedSummary& summary);

LabelCounts count_labels(const std::vector<PriorLabel>& labels);

struct LengthStats {
  std::size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
};

// Token counts per label; empty label -> nullopt.
std::array<std::optional<LengthStats>, 2> length_stats(const std::vector<Report>& reports,
                                                       const std::vector<PriorLabel>& labels);

// Counts compared against a published corpus split.
struct CountComparison {
  LabelCounts expected;
  LabelCounts observed;
  bool total_matches = false;
  double positive_relative_diff = 0.0;  // (observed - expected) / expected
  bool positive_within_tolerance = false;
};

CountComparison compare_counts(const LabelCounts& observed, const LabelCounts& expected,
                               double positive_tolerance = 0.10);

// Writes the histogram CSV to `csv_path` and the stats block to the same
// path with a ".json" extension. Both writes are atomic.
void emit_plot_data(const StratifiedSummary& summary, const std::filesystem::path& csv_path);

std::string plot_csv(const StratifiedSummary& summary);
std::string plot_json(const StratifiedSummary& summary);

}  // namespace cxrprior
