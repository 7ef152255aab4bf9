#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "revbench/corpus.hpp"
#include "revbench/rubric.hpp"
#include "revbench/similarity.hpp"
#include "revbench/stats.hpp"

namespace revbench {

inline constexpr int kPanelSize = 3;

struct PanelSpec {
  int humans = 3;
  int ais = 0;
  bool meta_filter = false;
};

/// Throws BadSpec unless 0 <= humans, ais and humans + ais == 3.
void validate(const PanelSpec& spec);

/// The four compositions (3H, 2H+1AI, 1H+2AI, 3AI), unfiltered rows first.
std::vector<PanelSpec> panel_compositions(bool unfiltered, bool filtered);

using Panel = std::vector<std::string>;

/// Every panel matching spec: C(3, humans) * C(3, ais) reviewer-id lists,
/// humans first, each side in input order. Throws BadSpec unless exactly
/// three candidates per side.
std::vector<Panel> enumerate_panels(const PanelSpec& spec, const std::vector<std::string>& human_ids,
                                    const std::vector<std::string>& ai_ids);

/// One paper with its three human and three AI reviewers.
struct PanelPaper {
  std::string paper_id;
  std::vector<std::string> humans;
  std::vector<std::string> ais;
  std::map<std::string, std::vector<ItemId>> items;
  /// Expert verdict per item: fully positive under every annotation row.
  std::map<ItemId, bool> fully_positive;
};

struct PanelCorpus {
  std::vector<PanelPaper> papers;  // sorted by paper_id
  std::vector<std::string> notices;
};

/// Papers without exactly three reviewers of each kind throw IncompletePaper,
/// or are skipped with a notice when allow_partial is set.
PanelCorpus assemble_panel_corpus(const AnnotationDataset& annotations, bool allow_partial);

/// Items with no similar (ordinal >= 2) counterpart from a different reviewer
/// in `items`. Pairs from one reviewer are ignored. Throws MissingVerdict.
std::vector<ItemId> unique_items(const std::vector<ItemId>& items, const VerdictTable& verdicts);

struct PanelCounts {
  double total = 0.0;
  double unique = 0.0;
  double not_fully_pos = 0.0;
  double fp_unique = 0.0;
};

/// Counts for one panel on one paper. With `meta`, items the meta labels do
/// not call fully positive are removed before anything is counted; a
/// missing label throws MissingMetaLabels.
PanelCounts panel_counts(const PanelPaper& paper, const Panel& panel, const VerdictTable& verdicts,
                         const MetaLabels* meta);

struct PanelMetrics {
  PanelSpec spec;
  std::size_t papers = 0;
  double total_items = 0.0;
  double unique_items = 0.0;
  double not_fully_pos = 0.0;
  double fp_unique = 0.0;
  /// Ratios of the averaged counts; empty when the denominator is 0.
  std::optional<double> pct_fp_unique_of_unique;
  std::optional<double> pct_fp_unique_of_total;
  std::optional<double> noise_per_gem;
  /// Diagnostic: mean of per-panel noise_per_gem over panels where it is
  /// defined, and the number of panels where it is not.
  std::optional<double> noise_per_gem_panel_mean;
  std::size_t undefined_noise_panels = 0;
  /// Paper-level bootstrap intervals of the four counts, when requested.
  std::optional<std::array<IntervalEstimate, 4>> count_ci;
};

/// Fills the three ratio columns from the four counts.
PanelMetrics derive_panel_metrics(const PanelSpec& spec, const PanelCounts& means);

/// Averages counts over the enumerated panels of each paper, then over
/// papers, and derives the ratios. `meta` is required when
/// spec.meta_filter (MissingMetaLabels otherwise). With `ci`, adds
/// bootstrap intervals over papers for the four counts.
PanelMetrics panel_metrics(const PanelCorpus& corpus, const PanelSpec& spec, const VerdictTable& verdicts,
                           const MetaLabels* meta, const std::optional<BootstrapConfig>& ci = std::nullopt);

/// Table columns: humans, ais, meta_filter, total_items, unique_items,
/// not_fully_pos, pct_fp_unique_of_unique, fp_unique, pct_fp_unique_of_total,
/// noise_per_gem. Counts and percents to 1 digit, noise to 2; NA when
/// undefined.
std::string format_panel_table_tsv(const std::vector<PanelMetrics>& rows);

}  // namespace revbench
