#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "revbench/corpus.hpp"
#include "test_util.hpp"

using namespace revbench;

namespace {

const char* kThreeQuoteItem = R"md(## Item 1: Reported gains rest on a single seed

#### Claim
* Main point of criticism: The improvement over the baseline is attributed to the method,
  but every run uses one random seed and the gap is within typical seed variance.
* Evaluation criteria: Validity; Appropriate use of statistics and treatment of uncertainties

#### Evidence
* Quote (main text): "Our method improves accuracy by 1.2 points over the baseline."
   * Comment: No variance or repeated runs are reported.
* Quote (code):
   ```
   torch.manual_seed(0)
   model = build(cfg)
   ```
   * Comment: The training script fixes one seed for all experiments.
* Quote (external reference): "Seed variance on this benchmark reaches 1.5 points." [1]
   * Comment: The reported gain is below known seed noise.

#### Citation List
[1] https://example.org/seed-variance
)md";

}  // namespace

TEST(ReviewMarkdown, ParsesThreeSourceItem) {
  const Review r = parse_review_markdown(kThreeQuoteItem, "p1", "ai_x", ReviewerKind::Ai);
  ASSERT_EQ(r.items.size(), 1u);
  const auto& item = r.items[0];
  EXPECT_EQ(item.id.str(), "p1/ai_x#1");
  EXPECT_EQ(item.title, "Reported gains rest on a single seed");
  EXPECT_NE(item.main_point.find("one random seed"), std::string::npos);
  ASSERT_EQ(item.criteria.size(), 2u);
  EXPECT_EQ(item.criteria[0].criterion, Criterion::Validity);
  EXPECT_EQ(item.criteria[1].criterion, Criterion::StatisticsAndUncertainties);
  ASSERT_EQ(item.evidence.size(), 3u);
  EXPECT_EQ(item.evidence[0].source, EvidenceSource::MainText);
  EXPECT_EQ(item.evidence[1].source, EvidenceSource::Code);
  EXPECT_EQ(item.evidence[1].quote, "torch.manual_seed(0)\nmodel = build(cfg)");
  EXPECT_EQ(item.evidence[2].source, EvidenceSource::ExternalReference);
  EXPECT_EQ(item.evidence[2].citation_index, 1);
  EXPECT_EQ(item.evidence[2].citation_link, "https://example.org/seed-variance");
  ASSERT_EQ(r.citations.size(), 1u);
}

TEST(ReviewMarkdown, RoundTrips) {
  const Review r = parse_review_markdown(kThreeQuoteItem, "p1", "ai_x", ReviewerKind::Ai);
  const std::string text = serialize_review_markdown(r);
  const Review back = parse_review_markdown(text, "p1", "ai_x", ReviewerKind::Ai);
  ASSERT_EQ(back.items.size(), 1u);
  EXPECT_EQ(back.items[0].title, r.items[0].title);
  EXPECT_EQ(back.items[0].main_point, r.items[0].main_point);
  EXPECT_EQ(back.items[0].criteria, r.items[0].criteria);
  EXPECT_EQ(back.items[0].evidence, r.items[0].evidence);
  EXPECT_EQ(serialize_review_markdown(back), text);
}

TEST(ReviewMarkdown, InfersSourcesWithoutTags) {
  const char* md = R"md(## Item 1: Untagged

#### Claim
* Main point of criticism: Something is off.
* Evaluation criteria: Validity

#### Evidence
* Quote: "plain sentence"
* Quote:
   ```
   x = 1
   ```
* Quote: "see [1]"

#### Citation List
[1] https://example.org/a
)md";
  const Review r = parse_review_markdown(md, "p", "ai", ReviewerKind::Ai);
  ASSERT_EQ(r.items[0].evidence.size(), 3u);
  EXPECT_EQ(r.items[0].evidence[0].source, EvidenceSource::MainText);
  EXPECT_EQ(r.items[0].evidence[1].source, EvidenceSource::Code);
  EXPECT_EQ(r.items[0].evidence[2].source, EvidenceSource::ExternalReference);
}

TEST(ReviewMarkdown, HumanItemsMayOmitCriteria) {
  const char* md = "## Item 1: t\n\n#### Claim\n* Main point of criticism: m\n";
  EXPECT_NO_THROW(parse_review_markdown(md, "p", "h1", ReviewerKind::Human));
  EXPECT_THROW_CODE(parse_review_markdown(md, "p", "ai", ReviewerKind::Ai), ErrorCode::MalformedItem);
}

TEST(ReviewMarkdown, RejectsMissingClaim) {
  const char* md = "## Item 1: t\n\n#### Evidence\n* Quote (main text): q\n";
  EXPECT_THROW_CODE(parse_review_markdown(md, "p", "h", ReviewerKind::Human), ErrorCode::MalformedItem);
}

TEST(ReviewMarkdown, RejectsIndexGapsAndRepeats) {
  const char* gap =
      "## Item 1: a\n\n#### Claim\n* Main point of criticism: m\n\n"
      "## Item 3: b\n\n#### Claim\n* Main point of criticism: m\n";
  const char* dup =
      "## Item 1: a\n\n#### Claim\n* Main point of criticism: m\n\n"
      "## Item 1: b\n\n#### Claim\n* Main point of criticism: m\n";
  EXPECT_THROW_CODE(parse_review_markdown(gap, "p", "h", ReviewerKind::Human), ErrorCode::NonContiguousIndices);
  EXPECT_THROW_CODE(parse_review_markdown(dup, "p", "h", ReviewerKind::Human), ErrorCode::DuplicateIndex);
}

TEST(ReviewMarkdown, RejectsInvalidUtf8) {
  const std::string md = "## Item 1: a\xff\n\n#### Claim\n* Main point of criticism: m\n";
  EXPECT_THROW_CODE(parse_review_markdown(md, "p", "h", ReviewerKind::Human), ErrorCode::InvalidEncoding);
}

TEST(ReviewMarkdown, ExternalQuoteNeedsALink) {
  const char* md =
      "## Item 1: a\n\n#### Claim\n* Main point of criticism: m\n* Evaluation criteria: Validity\n\n"
      "#### Evidence\n* Quote (external reference): \"no link\"\n";
  EXPECT_THROW_CODE(parse_review_markdown(md, "p", "ai", ReviewerKind::Ai), ErrorCode::MalformedItem);
}

TEST(ReviewMarkdown, HeadingsInsideFencesAreText) {
  const char* md = R"md(## Item 1: fenced

#### Claim
* Main point of criticism: m
* Evaluation criteria: Validity

#### Evidence
* Quote (code):
   ```
   ## Item 2: not a heading
   ```
)md";
  const Review r = parse_review_markdown(md, "p", "ai", ReviewerKind::Ai);
  ASSERT_EQ(r.items.size(), 1u);
  EXPECT_EQ(r.items[0].evidence[0].quote, "## Item 2: not a heading");
}

TEST(ReviewMarkdown, UnknownCriterionIsKeptWithNotice) {
  const char* md =
      "## Item 1: a\n\n#### Claim\n* Main point of criticism: m\n* Evaluation criteria: Validity; Vibes\n";
  const Review r = parse_review_markdown(md, "p", "ai", ReviewerKind::Ai);
  ASSERT_EQ(r.items[0].criteria.size(), 2u);
  EXPECT_FALSE(r.items[0].criteria[1].criterion.has_value());
  EXPECT_EQ(r.items[0].criteria[1].raw, "Vibes");
  EXPECT_FALSE(r.notices.empty());
}

TEST(ReviewMarkdown, ItemCapNamesTheReview) {
  std::string md;
  for (int i = 1; i <= 6; ++i) {
    md += "## Item " + std::to_string(i) + ": t\n\n#### Claim\n* Main point of criticism: m\n"
          "* Evaluation criteria: Validity\n\n";
  }
  const Review r = parse_review_markdown(md, "paperX", "ai_big", ReviewerKind::Ai);
  EXPECT_NO_THROW(enforce_item_cap(r, 6));
  try {
    enforce_item_cap(r, 5);
    FAIL() << "expected ItemCapExceeded";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ItemCapExceeded);
    EXPECT_NE(std::string(e.what()).find("ai_big"), std::string::npos);
  }
}

TEST(Criteria, NormalizesNamesAndShortForms) {
  EXPECT_EQ(normalize_criterion("validity"), Criterion::Validity);
  EXPECT_EQ(normalize_criterion("  Clarity and context "), Criterion::ClarityAndContext);
  EXPECT_FALSE(normalize_criterion("vibes").has_value());
}

TEST(Utf8, Validator) {
  EXPECT_TRUE(is_valid_utf8("plain ascii"));
  EXPECT_TRUE(is_valid_utf8("caf\xc3\xa9"));
  EXPECT_FALSE(is_valid_utf8("\xc3"));
  EXPECT_FALSE(is_valid_utf8("\xed\xa0\x80"));  // surrogate
  EXPECT_FALSE(is_valid_utf8("\xc0\x80"));      // overlong
}

// ---------------------------------------------------------------------------

namespace {

std::string row(const std::string& item, const std::string& annotator, const std::string& c,
                const std::string& s, const std::string& e, const std::string& reviewer = "h1") {
  auto q = [](const std::string& v) { return v == "null" ? v : "\"" + v + "\""; };
  return "{\"paper_id\":\"p\",\"reviewer_id\":\"" + reviewer + "\",\"reviewer_kind\":\"human\",\"item_index\":" +
         item + ",\"annotator_id\":\"" + annotator + "\",\"correctness\":" + q(c) + ",\"significance\":" + q(s) +
         ",\"evidence\":" + q(e) + "}\n";
}

}  // namespace

TEST(Annotations, ParsesAndGroups) {
  const std::string text = row("2", "e1", "Correct", "Significant", "Sufficient") +
                           row("1", "e2", "Not Correct", "null", "null") + "\n" +
                           row("1", "e1", "Correct", "Not Significant", "null");
  const AnnotationDataset ds = parse_annotation_dataset(text);
  EXPECT_EQ(ds.size(), 3u);
  const auto& rows = ds.by_paper.at("p");
  EXPECT_EQ(rows[0].item.index, 1);
  EXPECT_EQ(rows[0].annotator_id, "e1");
  EXPECT_EQ(rows[1].annotator_id, "e2");
  EXPECT_EQ(ds.rows_for(ItemId{"p", "h1", 1}).size(), 2u);
  EXPECT_EQ(ds.kind_of("p", "h1"), ReviewerKind::Human);
  EXPECT_FALSE(ds.kind_of("p", "zz").has_value());
  EXPECT_EQ(ds.items("p").size(), 2u);
}

TEST(Annotations, CascadeViolationNamesTheLine) {
  const std::string text = row("1", "e1", "Correct", "Significant", "Sufficient") +
                           row("2", "e1", "Not Correct", "Significant", "null");
  try {
    parse_annotation_dataset(text);
    FAIL() << "expected CascadeViolation";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::CascadeViolation);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(Annotations, EvidenceRequiresMarginalOrBetter) {
  EXPECT_THROW_CODE(parse_annotation_dataset(row("1", "e1", "Correct", "Not Significant", "Sufficient")),
                    ErrorCode::CascadeViolation);
  EXPECT_THROW_CODE(parse_annotation_dataset(row("1", "e1", "Correct", "Significant", "null")),
                    ErrorCode::CascadeViolation);
  EXPECT_THROW_CODE(parse_annotation_dataset(row("1", "e1", "Correct", "null", "null")),
                    ErrorCode::CascadeViolation);
}

TEST(Annotations, RejectsUnknownLabelsAndFields) {
  EXPECT_THROW_CODE(parse_annotation_dataset(row("1", "e1", "correct", "Significant", "Sufficient")),
                    ErrorCode::UnknownLabelString);
  EXPECT_THROW_CODE(parse_annotation_dataset("{\"paper_id\":\"p\"}\n"), ErrorCode::SchemaError);
  EXPECT_THROW_CODE(parse_annotation_dataset("not json\n"), ErrorCode::SchemaError);
  EXPECT_THROW_CODE(parse_annotation_dataset(row("0", "e1", "Not Correct", "null", "null")), ErrorCode::SchemaError);
}

TEST(Annotations, DuplicateAnnotatorItem) {
  const std::string text = row("1", "e1", "Not Correct", "null", "null") + row("1", "e1", "Not Correct", "null", "null");
  EXPECT_THROW_CODE(parse_annotation_dataset(text), ErrorCode::DuplicateAnnotatorItem);
}

TEST(Annotations, SerializeRoundTrips) {
  const std::string text = row("1", "e1", "Correct", "Marginally Significant", "Requires More");
  const AnnotationDataset ds = parse_annotation_dataset(text);
  const std::string again = serialize_annotation_line(ds.by_paper.at("p")[0]);
  const AnnotationDataset back = parse_annotation_dataset(again);
  EXPECT_EQ(back.by_paper.at("p")[0].evidence, EvidenceSufficiency::RequiresMore);
}

TEST(Bundle, LoadsFixtureAndReportsNotices) {
  const auto dir = std::filesystem::path(REVBENCH_FIXTURES) / "corpus" / "bundles";
  const PaperBundle b = load_bundle(dir / "p03", "p03");
  EXPECT_FALSE(b.preprint_text.empty());
  ASSERT_EQ(b.figures.size(), 1u);
  EXPECT_EQ(b.figures[0].caption, "Accuracy per epoch.");
  EXPECT_EQ(b.code_files.size(), 1u);
  const BundleReport rep = validate_bundle(b);
  EXPECT_TRUE(rep.ok());
  ASSERT_EQ(rep.notices.size(), 1u);
  EXPECT_NE(rep.notices[0].find("supplementary"), std::string::npos);
}

TEST(Bundle, MissingPreprintIsIoError) {
  TempDir tmp;
  EXPECT_THROW_CODE(load_bundle(tmp.path(), "x"), ErrorCode::IoError);
}

TEST(Bundle, DuplicateFigureIsAnError) {
  PaperBundle b;
  b.paper_id = "p";
  b.preprint_text = "text";
  b.figures = {{"a.png", ""}, {"a.png", ""}};
  EXPECT_FALSE(validate_bundle(b).ok());
}
