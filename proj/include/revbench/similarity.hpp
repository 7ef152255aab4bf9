#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include "revbench/corpus.hpp"
#include "revbench/stats.hpp"

namespace revbench {

/// Similarity ordinal scale:
///   0  different target
///   1  same target, different criticism
///   2  same target and criticism, different evidence
///   3  same target, criticism and evidence
inline constexpr int kSimilarThreshold = 2;

enum class VerdictSource { Judge, Reference };

std::string_view to_string(VerdictSource s);
VerdictSource parse_verdict_source(std::string_view s);

struct SimilarityVerdict {
  int ordinal = 0;
  VerdictSource source = VerdictSource::Judge;

  bool operator==(const SimilarityVerdict&) const = default;
};

inline bool is_similar(int ordinal) { return ordinal >= kSimilarThreshold; }
inline bool is_similar(const SimilarityVerdict& v) { return is_similar(v.ordinal); }

/// Directionless verdict store keyed by the unordered pair of item ids.
/// Safe for concurrent readers and writers. Re-inserting an identical
/// verdict is a no-op; inserting a different ordinal for a stored pair
/// throws ConflictingVerdict. Self-pairs are rejected (SchemaError).
class VerdictTable {
 public:
  using Key = std::pair<ItemId, ItemId>;

  VerdictTable() = default;
  VerdictTable(const VerdictTable& other);
  VerdictTable& operator=(const VerdictTable& other);

  static Key key(const ItemId& a, const ItemId& b);

  void insert(const ItemId& a, const ItemId& b, SimilarityVerdict v);
  std::optional<SimilarityVerdict> find(const ItemId& a, const ItemId& b) const;
  /// Throws MissingVerdict.
  int ordinal(const ItemId& a, const ItemId& b) const;
  std::size_t size() const;
  /// Sorted snapshot.
  std::vector<std::pair<Key, SimilarityVerdict>> entries() const;

 private:
  mutable std::shared_mutex mu_;
  std::map<Key, SimilarityVerdict> map_;
};

/// Line-delimited verdict records: paper_id, item_id_a, item_id_b
/// ("<reviewer>#<index>"), ordinal, source ("judge" | "reference").
VerdictTable parse_verdicts(std::string_view text);
VerdictTable load_verdicts(const std::filesystem::path& path);
std::string serialize_verdicts(const VerdictTable& table);

// ---------------------------------------------------------------------------
// Judge calibration and prevalence correction
// ---------------------------------------------------------------------------

struct JudgeCalibration {
  std::uint64_t tp = 0;
  std::uint64_t fn = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;

  std::uint64_t positives() const { return tp + fn; }
  std::uint64_t negatives() const { return fp + tn; }
};

/// Object with integer fields tp, fn, fp, tn. Throws SchemaError.
JudgeCalibration parse_calibration(std::string_view text);
JudgeCalibration load_calibration(const std::filesystem::path& path);

struct ErrorRates {
  double sensitivity = 1.0;
  double specificity = 1.0;
};

/// Throws EmptyPositiveClass / EmptyNegativeClass.
ErrorRates error_rates(const JudgeCalibration& c);

/// (apparent + spec - 1) / (sens + spec - 1), clipped to [0, 1].
/// Throws UninformativeJudge when sens + spec <= 1.
double rogan_gladen(double apparent, double sensitivity, double specificity);

/// Rogan-Gladen on the similar (ordinal >= 2) boundary, with each side's
/// corrected mass split over its two ordinals in the raw within-side ratio.
/// A side with no raw mass but positive corrected mass is split evenly.
/// Throws EmptyInput on zero total.
std::array<double, 4> corrected_distribution(const std::array<double, 4>& raw_counts,
                                             double sensitivity, double specificity);

/// Ordinal counts of the classified pairs of one paper.
struct PaperPairCounts {
  std::string paper_id;
  std::array<std::uint64_t, 4> counts{};

  std::uint64_t total() const { return counts[0] + counts[1] + counts[2] + counts[3]; }
  std::uint64_t similar() const { return counts[2] + counts[3]; }
};

struct CorrectedPrevalence {
  double raw = 0.0;
  double corrected = 0.0;
  double sensitivity = 1.0;
  double specificity = 1.0;
  IntervalEstimate ci;
};

/// Paper-level bootstrap of the corrected similar-pair prevalence. Each
/// replicate resamples papers, redraws sensitivity and specificity as
/// binomial proportions of the calibration class sizes, corrects, and
/// clips to [0, 1]. Throws EmptyClusters, UninformativeJudge (point only).
CorrectedPrevalence corrected_prevalence_ci(const std::vector<PaperPairCounts>& papers,
                                            const JudgeCalibration& calibration,
                                            const BootstrapConfig& cfg);

struct CorrectedDistribution {
  std::size_t papers = 0;
  std::uint64_t pairs = 0;
  std::array<double, 4> raw{};
  /// Point estimates with percentile intervals per ordinal category.
  std::array<IntervalEstimate, 4> corrected{};
  CorrectedPrevalence similar;
};

/// corrected_distribution with per-category intervals from the same
/// replicates as corrected_prevalence_ci.
CorrectedDistribution corrected_distribution_ci(const std::vector<PaperPairCounts>& papers,
                                                const JudgeCalibration& calibration,
                                                const BootstrapConfig& cfg);

// ---------------------------------------------------------------------------
// Coverage and pair types
// ---------------------------------------------------------------------------

struct CoverageResult {
  std::vector<ItemId> covered;
  double fraction = 0.0;
};

/// Item a is covered when some b has ordinal(a, b) >= threshold.
/// Throws EmptySideA and MissingVerdict.
CoverageResult coverage(const std::vector<ItemId>& items_a, const std::vector<ItemId>& items_b,
                        const VerdictTable& verdicts, int threshold = kSimilarThreshold);
CoverageResult coverage(const std::vector<ReviewItem>& items_a, const std::vector<ReviewItem>& items_b,
                        const VerdictTable& verdicts, int threshold = kSimilarThreshold);

enum class PairType { HumanHumanSame, HumanHumanDiff, AiAiSame, AiAiDiff, HumanAi };

inline constexpr std::array<PairType, 5> kAllPairTypes{PairType::HumanHumanSame, PairType::HumanHumanDiff,
                                                       PairType::AiAiSame, PairType::AiAiDiff,
                                                       PairType::HumanAi};

std::string_view to_string(PairType t);

PairType pair_type(const ItemId& a, ReviewerKind kind_a, const ItemId& b, ReviewerKind kind_b);

/// Groups verdicts into per-paper ordinal counts for each pair type. Kinds
/// come from `kind_of(paper_id, reviewer_id)`; an unknown reviewer throws
/// SchemaError. Papers with no pairs of a type are omitted from that type.
std::map<PairType, std::vector<PaperPairCounts>> pair_counts_by_type(
    const VerdictTable& verdicts,
    const std::function<std::optional<ReviewerKind>(const std::string&, const std::string&)>& kind_of);

}  // namespace revbench
