#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "revbench/corpus.hpp"
#include "revbench/rubric.hpp"
#include "revbench/similarity.hpp"

namespace revbench {

/// Fully positive human items of one paper; duplicates across reviewers are
/// kept on purpose.
struct Rubric {
  std::string paper_id;
  std::vector<ItemId> entries;
};

enum class AnnotationPolicy {
  /// Every human item needs at least two annotation rows.
  RequireDual,
  /// Single-annotated items count fully positive on their one row.
  AllowSingle,
};

/// Rubric for one paper, or nullopt when no human item is fully positive
/// under every one of its annotation rows (the paper is excluded).
/// Throws MissingDualAnnotation (RequireDual, some human item has < 2 rows)
/// and EmptyInput (no human items at all).
std::optional<Rubric> build_rubric(const AnnotationDataset& annotations, const std::string& paper_id,
                                   AnnotationPolicy policy = AnnotationPolicy::RequireDual);

/// Fraction of rubric entries matched (ordinal >= 2) by some generated item.
/// A generated item may match several entries. Throws EmptyRubric and
/// MissingVerdict.
double score_recall(const Rubric& rubric, const std::vector<ItemId>& generated,
                    const VerdictTable& verdicts);

/// Fraction of generated items the meta labels call fully positive.
/// Throws EmptyGenerated and MissingMetaLabels.
double score_precision(const std::vector<ItemId>& generated, const MetaLabels& meta);

/// Harmonic mean; 0 when both are 0.
double f1(double precision, double recall);

struct BenchPaperResult {
  std::string paper_id;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t generated_count = 0;
  std::size_t rubric_size = 0;
};

/// One reviewer on one paper. Zero generated items score (0, 0, 0).
BenchPaperResult score_paper(const Rubric& rubric, const std::vector<ItemId>& generated,
                             const VerdictTable& verdicts, const MetaLabels& meta);

struct LeaderboardRow {
  std::string reviewer_id;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double mean_items = 0.0;
  std::size_t papers_scored = 0;
  /// Harmonic mean of the mean precision and mean recall; not the ranking
  /// metric, kept to make the difference from mean F1 visible.
  double f1_of_means = 0.0;
};

/// Paper-level macro means per reviewer, ordered by mean F1 (descending),
/// then reviewer id. Throws PaperSetMismatch when reviewers were scored on
/// different papers and EmptyInput when a reviewer has no papers.
std::vector<LeaderboardRow> aggregate_leaderboard(
    const std::map<std::string, std::vector<BenchPaperResult>>& results);

/// reviewer_id, precision, recall, f1, mean_items, papers_scored; tab
/// separated, 4 fractional digits, header line first.
std::string format_leaderboard_tsv(const std::vector<LeaderboardRow>& rows);

/// paper_id, reviewer_id, precision, recall, f1, generated, rubric_size.
std::string format_paper_results_tsv(const std::map<std::string, std::vector<BenchPaperResult>>& results);

}  // namespace revbench
