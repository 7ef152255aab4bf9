#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "revbench/error.hpp"

namespace revbench {

// ---------------------------------------------------------------------------
// Identifiers and labels
// ---------------------------------------------------------------------------

enum class ReviewerKind { Human, Ai };

/// Provenance of one review item: paper, reviewer, 1-based ordinal.
struct ItemId {
  std::string paper_id;
  std::string reviewer_id;
  int index = 0;

  auto operator<=>(const ItemId&) const = default;

  /// "<reviewer_id>#<index>", the form used in verdict dumps (paper_id is a
  /// separate field there).
  std::string local() const;
  /// "<paper_id>/<reviewer_id>#<index>"
  std::string str() const;
};

/// Parses the local form produced by ItemId::local(). Throws SchemaError.
ItemId parse_local_item_id(std::string_view paper_id, std::string_view local);

enum class Correctness { Correct, NotCorrect };
enum class Significance { Significant, MarginallySignificant, NotSignificant };
enum class EvidenceSufficiency { Sufficient, RequiresMore };

// Label strings are bit-exact with the meta-review wire format.
std::string_view to_string(ReviewerKind kind);
std::string_view to_string(Correctness c);
std::string_view to_string(Significance s);
std::string_view to_string(EvidenceSufficiency e);

// Parsers throw UnknownLabelString on anything that is not an exact match.
ReviewerKind parse_reviewer_kind(std::string_view s);
Correctness parse_correctness(std::string_view s);
Significance parse_significance(std::string_view s);
EvidenceSufficiency parse_evidence(std::string_view s);

/// The six manuscript evaluation criteria, in priority order.
enum class Criterion {
  Validity,
  Conclusions,
  OriginalityAndSignificance,
  DataAndMethodology,
  StatisticsAndUncertainties,
  ClarityAndContext,
};

std::string_view to_string(Criterion c);
/// Case-insensitive match against the canonical names and a few short forms.
std::optional<Criterion> normalize_criterion(std::string_view tag);

// ---------------------------------------------------------------------------
// Reviews
// ---------------------------------------------------------------------------

enum class EvidenceSource { MainText, Supplementary, Code, ExternalReference };

std::string_view to_string(EvidenceSource s);

struct EvidenceQuote {
  EvidenceSource source = EvidenceSource::MainText;
  std::string quote;
  std::string comment;
  std::optional<std::string> citation_link;  // set iff source == ExternalReference
  std::optional<int> citation_index;         // bracketed index into the citation list

  bool operator==(const EvidenceQuote&) const = default;
};

/// A criterion tag as written. `criterion` is empty for tags outside the
/// six-criterion vocabulary; the raw text is kept either way.
struct CriterionTag {
  std::string raw;
  std::optional<Criterion> criterion;

  bool operator==(const CriterionTag&) const = default;
};

struct ReviewItem {
  ItemId id;
  std::string title;
  std::string main_point;
  std::vector<CriterionTag> criteria;
  std::vector<EvidenceQuote> evidence;
};

struct Citation {
  int index = 0;
  std::string text;
  std::optional<std::string> url;
};

struct Review {
  std::string reviewer_id;
  ReviewerKind reviewer_kind = ReviewerKind::Ai;
  std::string paper_id;
  std::vector<ReviewItem> items;
  std::vector<Citation> citations;
  /// Non-fatal observations (unknown criterion tags, title conventions).
  std::vector<std::string> notices;
};

/// Parses a review written in the `## Item N: <title>` / `#### Claim` /
/// `#### Evidence` / `#### Citation List` markdown format.
///
/// Errors: InvalidEncoding, MalformedItem, NonContiguousIndices, DuplicateIndex.
Review parse_review_markdown(std::string_view text, std::string_view paper_id,
                             std::string_view reviewer_id, ReviewerKind kind);

/// Canonical markdown for a review. parse(serialize(r)) reproduces the
/// items, titles, quotes, comments and sources of r.
std::string serialize_review_markdown(const Review& review);

/// Throws ItemCapExceeded naming the review when it has more than max_items.
void enforce_item_cap(const Review& review, std::size_t max_items);

/// Reads `<dir>/<reviewer_id>.md` for every markdown file in `dir`, sorted by
/// reviewer id. `kind_of` resolves each reviewer's kind. Parse errors name
/// the file. Throws IoError when `dir` is not a directory.
template <class KindFn>
std::vector<Review> load_review_dir(const std::filesystem::path& dir, std::string_view paper_id,
                                    KindFn&& kind_of);

bool is_valid_utf8(std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Annotations
// ---------------------------------------------------------------------------

/// One expert's cascading judgment of one item. `significance` is present iff
/// Correct; `evidence` is present iff Correct and at least marginally
/// significant.
struct AnnotationRecord {
  ItemId item;
  ReviewerKind reviewer_kind = ReviewerKind::Human;
  std::string annotator_id;
  Correctness correctness = Correctness::NotCorrect;
  std::optional<Significance> significance;
  std::optional<EvidenceSufficiency> evidence;
};

/// True iff the optional fields follow the cascade.
bool cascade_legal(Correctness c, std::optional<Significance> s,
                   std::optional<EvidenceSufficiency> e);

/// Throws CascadeViolation describing which field broke the cascade.
void check_cascade(Correctness c, std::optional<Significance> s,
                   std::optional<EvidenceSufficiency> e);

/// Annotation rows grouped by paper, each group sorted by (item, annotator).
struct AnnotationDataset {
  std::map<std::string, std::vector<AnnotationRecord>> by_paper;

  std::size_t size() const;
  /// Rows for one item (empty if unknown).
  std::vector<const AnnotationRecord*> rows_for(const ItemId& id) const;
  /// Distinct reviewers of a paper with their kinds.
  std::map<std::string, ReviewerKind> reviewers(const std::string& paper_id) const;
  /// Distinct item ids of a paper, sorted.
  std::vector<ItemId> items(const std::string& paper_id) const;
  /// Reviewer kind lookup across the whole dataset.
  std::optional<ReviewerKind> kind_of(const std::string& paper_id,
                                      const std::string& reviewer_id) const;
};

/// Parses one line-delimited record. `line_no` only feeds error messages.
AnnotationRecord parse_annotation_line(std::string_view line, std::size_t line_no);

/// Loads a line-delimited annotation dataset. Blank lines are skipped. Every
/// error message names the offending 1-based line number.
///
/// Errors: IoError, SchemaError, UnknownLabelString, CascadeViolation,
/// DuplicateAnnotatorItem.
AnnotationDataset load_annotation_dataset(const std::filesystem::path& path);
AnnotationDataset parse_annotation_dataset(std::string_view text);

std::string serialize_annotation_line(const AnnotationRecord& r);

// ---------------------------------------------------------------------------
// Paper bundles
// ---------------------------------------------------------------------------

struct Figure {
  std::string filename;
  std::string caption;
};

struct PaperBundle {
  std::string paper_id;
  std::string preprint_text;
  std::vector<Figure> figures;
  std::vector<std::pair<std::string, std::string>> supplementary;  // (name, text)
  std::vector<std::pair<std::string, std::string>> code_files;     // (relative path, text)
};

struct BundleReport {
  std::vector<std::string> notices;
  std::vector<std::string> errors;

  bool ok() const { return errors.empty(); }
};

/// Reports missing optional parts as notices and broken invariants as errors.
/// Never throws.
BundleReport validate_bundle(const PaperBundle& bundle);

/// Loads `<dir>/preprint/{preprint.md,images_list.json,supplementary/,code/}`.
/// Throws IoError / SchemaError / InvalidEncoding.
PaperBundle load_bundle(const std::filesystem::path& dir, std::string paper_id);

// ---------------------------------------------------------------------------

template <class KindFn>
std::vector<Review> load_review_dir(const std::filesystem::path& dir, std::string_view paper_id,
                                    KindFn&& kind_of) {
  if (!std::filesystem::is_directory(dir)) fail(ErrorCode::IoError, "review directory " + dir.string() + " not found");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".md") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Review> out;
  out.reserve(files.size());
  for (const auto& f : files) {
    const std::string reviewer = f.stem().string();
    try {
      out.push_back(parse_review_markdown(read_text_file(f), paper_id, reviewer, kind_of(reviewer)));
    } catch (const Error& e) {
      fail(e.code(), f.string() + ": " + e.detail());
    }
  }
  return out;
}

}  // namespace revbench
