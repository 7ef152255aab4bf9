#include "revbench/bench.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "revbench/error.hpp"

namespace revbench {

std::optional<Rubric> build_rubric(const AnnotationDataset& annotations, const std::string& paper_id,
                                   AnnotationPolicy policy) {
  Rubric rubric;
  rubric.paper_id = paper_id;
  std::size_t human_items = 0;
  for (const auto& id : annotations.items(paper_id)) {
    const auto rows = annotations.rows_for(id);
    if (rows.empty() || rows.front()->reviewer_kind != ReviewerKind::Human) continue;
    ++human_items;
    if (policy == AnnotationPolicy::RequireDual && rows.size() < 2) {
      fail(ErrorCode::MissingDualAnnotation,
           "human item " + id.str() + " has " + std::to_string(rows.size()) + " annotation row(s)");
    }
    if (all_fully_positive(rows)) rubric.entries.push_back(id);
  }
  if (human_items == 0) fail(ErrorCode::EmptyInput, "paper " + paper_id + " has no annotated human items");
  if (rubric.entries.empty()) return std::nullopt;
  return rubric;
}

double score_recall(const Rubric& rubric, const std::vector<ItemId>& generated,
                    const VerdictTable& verdicts) {
  if (rubric.entries.empty()) fail(ErrorCode::EmptyRubric, "recall against an empty rubric for " + rubric.paper_id);
  std::size_t matched = 0;
  for (const auto& r : rubric.entries) {
    for (const auto& g : generated) {
      if (is_similar(verdicts.ordinal(g, r))) {
        ++matched;
        break;
      }
    }
  }
  return static_cast<double>(matched) / static_cast<double>(rubric.entries.size());
}

double score_precision(const std::vector<ItemId>& generated, const MetaLabels& meta) {
  if (generated.empty()) fail(ErrorCode::EmptyGenerated, "precision of an empty item set is undefined");
  std::size_t positive = 0;
  for (const auto& g : generated) {
    auto it = meta.find(g);
    if (it == meta.end()) fail(ErrorCode::MissingMetaLabels, "no meta-review labels for " + g.str());
    positive += is_fully_positive(it->second) ? 1 : 0;
  }
  return static_cast<double>(positive) / static_cast<double>(generated.size());
}

double f1(double precision, double recall) {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

BenchPaperResult score_paper(const Rubric& rubric, const std::vector<ItemId>& generated,
                             const VerdictTable& verdicts, const MetaLabels& meta) {
  BenchPaperResult r;
  r.paper_id = rubric.paper_id;
  r.generated_count = generated.size();
  r.rubric_size = rubric.entries.size();
  if (generated.empty()) return r;
  r.precision = score_precision(generated, meta);
  r.recall = score_recall(rubric, generated, verdicts);
  r.f1 = f1(r.precision, r.recall);
  return r;
}

std::vector<LeaderboardRow> aggregate_leaderboard(
    const std::map<std::string, std::vector<BenchPaperResult>>& results) {
  std::vector<LeaderboardRow> rows;
  std::optional<std::set<std::string>> reference;
  std::string reference_reviewer;
  for (const auto& [reviewer, papers] : results) {
    if (papers.empty()) fail(ErrorCode::EmptyInput, "reviewer " + reviewer + " has no scored papers");
    std::set<std::string> ids;
    for (const auto& p : papers) {
      if (!ids.insert(p.paper_id).second) {
        fail(ErrorCode::PaperSetMismatch, "reviewer " + reviewer + " scored paper " + p.paper_id + " twice");
      }
    }
    if (!reference) {
      reference = ids;
      reference_reviewer = reviewer;
    } else if (ids != *reference) {
      fail(ErrorCode::PaperSetMismatch,
           "reviewers " + reference_reviewer + " and " + reviewer + " were scored on different papers");
    }
    LeaderboardRow row;
    row.reviewer_id = reviewer;
    row.papers_scored = papers.size();
    for (const auto& p : papers) {
      row.precision += p.precision;
      row.recall += p.recall;
      row.f1 += p.f1;
      row.mean_items += static_cast<double>(p.generated_count);
    }
    const double n = static_cast<double>(papers.size());
    row.precision /= n;
    row.recall /= n;
    row.f1 /= n;
    row.mean_items /= n;
    row.f1_of_means = f1(row.precision, row.recall);
    rows.push_back(std::move(row));
  }
  std::sort(rows.begin(), rows.end(), [](const LeaderboardRow& a, const LeaderboardRow& b) {
    if (a.f1 != b.f1) return a.f1 > b.f1;
    return a.reviewer_id < b.reviewer_id;
  });
  return rows;
}

namespace {

std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

std::string format_leaderboard_tsv(const std::vector<LeaderboardRow>& rows) {
  std::string out = "reviewer_id\tprecision\trecall\tf1\tmean_items\tpapers_scored\n";
  for (const auto& r : rows) {
    out += r.reviewer_id + "\t" + fixed4(r.precision) + "\t" + fixed4(r.recall) + "\t" + fixed4(r.f1) + "\t" +
           fixed4(r.mean_items) + "\t" + std::to_string(r.papers_scored) + "\n";
  }
  return out;
}

std::string format_paper_results_tsv(const std::map<std::string, std::vector<BenchPaperResult>>& results) {
  std::string out = "paper_id\treviewer_id\tprecision\trecall\tf1\tgenerated\trubric_size\n";
  for (const auto& [reviewer, papers] : results) {
    for (const auto& p : papers) {
      out += p.paper_id + "\t" + reviewer + "\t" + fixed4(p.precision) + "\t" + fixed4(p.recall) + "\t" +
             fixed4(p.f1) + "\t" + std::to_string(p.generated_count) + "\t" + std::to_string(p.rubric_size) + "\n";
    }
  }
  return out;
}

}  // namespace revbench
