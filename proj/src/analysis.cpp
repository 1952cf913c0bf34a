#include "cxrprior/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "cxrprior/io.hpp"
#include "cxrprior/numeric.hpp"

namespace cxrprior {
namespace {

using nlohmann::json;

Histogram make_histogram(const std::vector<double>& values, const HistogramSpec& spec) {
  Histogram h;
  const double width = (spec.hi - spec.lo) / static_cast<double>(spec.bins);
  h.edges.resize(spec.bins + 1);
  for (std::size_t i = 0; i <= spec.bins; ++i) h.edges[i] = spec.lo + width * static_cast<double>(i);
  h.edges.back() = spec.hi;
  h.counts.assign(spec.bins, 0);
  for (double v : values) {
    double pos = std::floor((v - spec.lo) / width);
    pos = std::clamp(pos, 0.0, static_cast<double>(spec.bins - 1));
    ++h.counts[static_cast<std::size_t>(pos)];
  }
  return h;
}

Stratum summarize(const std::vector<double>& values, const std::vector<double>& lengths,
                  const HistogramSpec& spec) {
  Stratum s;
  s.count = values.size();
  s.mean = compensated_sum(values) / static_cast<double>(s.count);
  CompensatedSum squares;
  for (double v : values) squares.add((v - s.mean) * (v - s.mean));
  s.stddev = std::sqrt(squares.value() / static_cast<double>(s.count));
  auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  s.min = *lo;
  s.max = *hi;
  s.mean_tokens = compensated_sum(lengths) / static_cast<double>(s.count);
  s.histogram = make_histogram(values, spec);
  return s;
}

json stratum_json(const std::optional<Stratum>& s) {
  if (!s) return nullptr;
  return json{{"count", s->count},     {"mean", s->mean}, {"std", s->stddev},
              {"min", s->min},         {"max", s->max},   {"mean_tokens", s->mean_tokens},
              {"histogram_counts", s->histogram.counts}};
}

}  // namespace

std::size_t StratifiedSummary::total() const {
  std::size_t n = 0;
  for (const auto& s : strata)
    if (s) n += s->count;
  return n;
}

StratifiedSummary stratify(const std::vector<ScoredItem>& items, HistogramSpec spec,
                           std::string metric) {
  if (spec.bins == 0 || !(spec.hi > spec.lo))
    throw std::invalid_argument("histogram needs at least one bin over a nonempty range");

  std::array<std::vector<double>, 2> scores, lengths;
  for (const auto& item : items) {
    if (item.label != 0 && item.label != 1)
      throw std::invalid_argument("label of " + item.id + " must be 0 or 1");
    const auto k = static_cast<std::size_t>(item.label);
    scores[k].push_back(item.score);
    lengths[k].push_back(static_cast<double>(item.token_count));
  }

  StratifiedSummary summary;
  summary.metric = std::move(metric);
  summary.spec = spec;
  for (std::size_t k = 0; k < 2; ++k) {
    if (!scores[k].empty()) summary.strata[k] = summarize(scores[k], lengths[k], spec);
  }
  return summary;
}

std::pair<std::size_t, double> merged_mean(const StratifiedSummary& summary) {
  std::size_t n = 0;
  CompensatedSum weighted;
  for (const auto& s : summary.strata) {
    if (!s) continue;
    n += s->count;
    weighted.add(static_cast<double>(s->count) * s->mean);
  }
  return {n, n == 0 ? 0.0 : weighted.value() / static_cast<double>(n)};
}

LabelCounts count_labels(const std::vector<PriorLabel>& labels) {
  LabelCounts counts;
  for (const auto& label : labels) ++(label.value == 1 ? counts.positive : counts.negative);
  counts.total = counts.negative + counts.positive;
  return counts;
}

std::array<std::optional<LengthStats>, 2> length_stats(const std::vector<Report>& reports,
                                                       const std::vector<PriorLabel>& labels) {
  if (reports.size() != labels.size())
    throw std::invalid_argument("reports and labels differ in length");
  std::array<std::vector<double>, 2> lengths;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    lengths[labels[i].value == 1 ? 1 : 0].push_back(static_cast<double>(reports[i].token_count()));
  }
  std::array<std::optional<LengthStats>, 2> out;
  for (std::size_t k = 0; k < 2; ++k) {
    auto& v = lengths[k];
    if (v.empty()) continue;
    LengthStats s;
    s.count = v.size();
    s.mean = compensated_sum(v) / static_cast<double>(v.size());
    std::sort(v.begin(), v.end());
    const std::size_t mid = v.size() / 2;
    s.median = v.size() % 2 == 1 ? v[mid] : (v[mid - 1] + v[mid]) / 2.0;
    out[k] = s;
  }
  return out;
}

CountComparison compare_counts(const LabelCounts& observed, const LabelCounts& expected,
                               double positive_tolerance) {
  CountComparison c;
  c.expected = expected;
  c.observed = observed;
  c.total_matches = observed.total == expected.total;
  if (expected.positive > 0) {
    c.positive_relative_diff =
        (static_cast<double>(observed.positive) - static_cast<double>(expected.positive)) /
        static_cast<double>(expected.positive);
  }
  c.positive_within_tolerance = std::abs(c.positive_relative_diff) <= positive_tolerance;
  return c;
}

std::string plot_csv(const StratifiedSummary& summary) {
  std::string out = "label,bin,bin_lo,bin_hi,count\n";
  for (std::size_t k = 0; k < 2; ++k) {
    const auto& s = summary.strata[k];
    if (!s) continue;
    for (std::size_t b = 0; b < s->histogram.counts.size(); ++b) {
      out += std::to_string(k) + ',' + std::to_string(b) + ',' +
             format_double(s->histogram.edges[b]) + ',' +
             format_double(s->histogram.edges[b + 1]) + ',' +
             std::to_string(s->histogram.counts[b]) + '\n';
    }
  }
  return out;
}

std::string plot_json(const StratifiedSummary& summary) {
  json out;
  out["metric"] = summary.metric;
  out["std"] = "population";
  out["histogram"] = {{"lo", summary.spec.lo}, {"hi", summary.spec.hi}, {"bins", summary.spec.bins}};
  out["negative"] = stratum_json(summary.negative());
  out["positive"] = stratum_json(summary.positive());
  return out.dump(2) + '\n';
}

void emit_plot_data(const StratifiedSummary& summary, const std::filesystem::path& csv_path) {
  std::filesystem::path json_path = csv_path;
  json_path.replace_extension(".json");
  if (json_path == csv_path)
    throw std::invalid_argument("plot data path must not end in .json: " + csv_path.string());
  write_file_atomic(csv_path, plot_csv(summary));
  write_file_atomic(json_path, plot_json(summary));
}

}  // namespace cxrprior
