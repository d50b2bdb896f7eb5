#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pod/generation.hpp"
#include "pod/grid.hpp"

namespace pod {

/// Mean and sample standard deviation of a per-run rate; a single run has
/// stddev 0.
struct RunRate {
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<std::pair<std::string, double>> per_run;  // in first-seen run order
  std::size_t count = 0;
};

RunRate rate_by_run(const Archive& archive, const std::function<bool(const ArchiveEntry&)>& predicate);
RunRate playability_rate(const Archive& archive);
RunRate four_wheel_rate(const Archive& archive);

struct DedupResult {
  std::vector<std::size_t> survivors;  // indices into the input, ascending
  double unique_fraction = 0.0;        // survivors / input size
};

inline constexpr double kDuplicateThreshold = 0.10;

/// Drops artifacts whose Hamming fraction to some goal is strictly below the
/// threshold.
DedupResult inter_diversity(std::span<const CellGrid> artifacts, std::span<const CellGrid> goals,
                            double threshold = kDuplicateThreshold);
/// Greedy keep-first scan in input order against previously kept artifacts.
DedupResult intra_diversity(std::span<const CellGrid> artifacts, double threshold = kDuplicateThreshold);
/// Inter then intra over the inter survivors; the fraction is relative to
/// the full input.
DedupResult total_diversity(std::span<const CellGrid> artifacts, std::span<const CellGrid> goals,
                            double threshold = kDuplicateThreshold);

/// Ranks starting at 1, ties share their average rank.
std::vector<double> average_ranks(std::span<const double> values);

struct Correlation {
  bool defined = false;
  double rho = 0.0;
  double p_value = 1.0;  // two-sided, Student t with n - 2 degrees of freedom
  std::size_t n = 0;
};

/// Spearman rank correlation. Undefined when x has one distinct value or
/// n < 3; rho is 0 when only y is constant.
Correlation spearman(std::span<const double> x, std::span<const double> y);

struct GroupStat {
  int target = 0;
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t n = 0;
};

struct ControlTable {
  std::string metric;
  std::vector<GroupStat> rows;  // ascending target
  Correlation correlation;
};

ControlTable controllability_table(const Archive& archive, const std::string& metric);
std::string control_table_csv(const ControlTable& table);

struct SimilarityRow {
  int target = 0;
  GroupStat agent;
  GroupStat random;
};

/// Per first-metric target, mean best similarity to the goal set for the
/// agent archive and (when given) a random-agent archive.
std::vector<SimilarityRow> repair_similarity_report(const Archive& agent, const Archive* random,
                                                    std::span<const CellGrid> goals);
std::string similarity_csv(std::span<const SimilarityRow> rows);
double mean_similarity(const Archive& archive, std::span<const CellGrid> goals);

/// One summary row per archive: playability (Zelda) or four-wheel and
/// success rates (Lego), plus diversity and per-metric correlations.
std::string evaluation_report_csv(const Archive& archive, std::span<const CellGrid> goals);
std::string evaluation_summary(const Archive& archive, std::span<const CellGrid> goals);

/// Per-figure CSVs: controllability curves for every metric and, for Lego
/// with a random archive, the similarity comparison. Returns file names.
std::vector<std::string> write_plot_data(const std::string& dir, const Archive& archive, const Archive* random,
                                         std::span<const CellGrid> goals);

}  // namespace pod
