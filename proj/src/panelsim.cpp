#include "revbench/panelsim.hpp"

#include <cstdio>

#include "revbench/error.hpp"

namespace revbench {

void validate(const PanelSpec& spec) {
  if (spec.humans < 0 || spec.ais < 0 || spec.humans + spec.ais != kPanelSize) {
    fail(ErrorCode::BadSpec, "panel of " + std::to_string(spec.humans) + " humans and " +
                                 std::to_string(spec.ais) + " AIs; the panel size is 3");
  }
}

std::vector<PanelSpec> panel_compositions(bool unfiltered, bool filtered) {
  std::vector<PanelSpec> out;
  for (bool filter : {false, true}) {
    if ((filter && !filtered) || (!filter && !unfiltered)) continue;
    for (int h = kPanelSize; h >= 0; --h) out.push_back(PanelSpec{h, kPanelSize - h, filter});
  }
  return out;
}

namespace {

void combinations(const std::vector<std::string>& pool, int k, std::size_t start, Panel& current,
                  std::vector<Panel>& out) {
  if (static_cast<int>(current.size()) == k) {
    out.push_back(current);
    return;
  }
  for (std::size_t i = start; i < pool.size(); ++i) {
    current.push_back(pool[i]);
    combinations(pool, k, i + 1, current, out);
    current.pop_back();
  }
}

std::vector<Panel> choose(const std::vector<std::string>& pool, int k) {
  std::vector<Panel> out;
  Panel current;
  combinations(pool, k, 0, current, out);
  return out;
}

}  // namespace

std::vector<Panel> enumerate_panels(const PanelSpec& spec, const std::vector<std::string>& human_ids,
                                    const std::vector<std::string>& ai_ids) {
  validate(spec);
  if (human_ids.size() != kPanelSize || ai_ids.size() != kPanelSize) {
    fail(ErrorCode::BadSpec, "panel enumeration needs exactly three human and three AI reviewers");
  }
  std::vector<Panel> out;
  for (const auto& h : choose(human_ids, spec.humans)) {
    for (const auto& a : choose(ai_ids, spec.ais)) {
      Panel p = h;
      p.insert(p.end(), a.begin(), a.end());
      out.push_back(std::move(p));
    }
  }
  return out;
}

PanelCorpus assemble_panel_corpus(const AnnotationDataset& annotations, bool allow_partial) {
  PanelCorpus corpus;
  for (const auto& [paper_id, rows] : annotations.by_paper) {
    PanelPaper paper;
    paper.paper_id = paper_id;
    for (const auto& [reviewer, kind] : annotations.reviewers(paper_id)) {
      (kind == ReviewerKind::Human ? paper.humans : paper.ais).push_back(reviewer);
    }
    if (paper.humans.size() != kPanelSize || paper.ais.size() != kPanelSize) {
      const std::string what = "paper " + paper_id + " has " + std::to_string(paper.humans.size()) +
                               " human and " + std::to_string(paper.ais.size()) +
                               " AI reviews; panels need 3 of each";
      if (!allow_partial) fail(ErrorCode::IncompletePaper, what);
      corpus.notices.push_back(what + " (skipped)");
      continue;
    }
    for (const auto& id : annotations.items(paper_id)) {
      paper.items[id.reviewer_id].push_back(id);
      paper.fully_positive[id] = all_fully_positive(annotations.rows_for(id));
    }
    corpus.papers.push_back(std::move(paper));
  }
  return corpus;
}

std::vector<ItemId> unique_items(const std::vector<ItemId>& items, const VerdictTable& verdicts) {
  std::vector<ItemId> out;
  for (const auto& a : items) {
    bool unique = true;
    for (const auto& b : items) {
      if (a.reviewer_id == b.reviewer_id) continue;
      if (is_similar(verdicts.ordinal(a, b))) {
        unique = false;
        break;
      }
    }
    if (unique) out.push_back(a);
  }
  return out;
}

PanelCounts panel_counts(const PanelPaper& paper, const Panel& panel, const VerdictTable& verdicts,
                         const MetaLabels* meta) {
  std::vector<ItemId> items;
  for (const auto& reviewer : panel) {
    auto it = paper.items.find(reviewer);
    if (it == paper.items.end()) continue;
    for (const auto& id : it->second) {
      if (meta) {
        auto m = meta->find(id);
        if (m == meta->end()) fail(ErrorCode::MissingMetaLabels, "no meta-review labels for " + id.str());
        if (!is_fully_positive(m->second)) continue;
      }
      items.push_back(id);
    }
  }
  PanelCounts c;
  c.total = static_cast<double>(items.size());
  const auto unique = unique_items(items, verdicts);
  c.unique = static_cast<double>(unique.size());
  for (const auto& id : items) {
    if (!paper.fully_positive.at(id)) c.not_fully_pos += 1.0;
  }
  for (const auto& id : unique) {
    if (paper.fully_positive.at(id)) c.fp_unique += 1.0;
  }
  return c;
}

PanelMetrics derive_panel_metrics(const PanelSpec& spec, const PanelCounts& means) {
  PanelMetrics m;
  m.spec = spec;
  m.total_items = means.total;
  m.unique_items = means.unique;
  m.not_fully_pos = means.not_fully_pos;
  m.fp_unique = means.fp_unique;
  if (means.unique > 0.0) m.pct_fp_unique_of_unique = means.fp_unique / means.unique;
  if (means.total > 0.0) m.pct_fp_unique_of_total = means.fp_unique / means.total;
  if (means.fp_unique > 0.0) m.noise_per_gem = means.not_fully_pos / means.fp_unique;
  return m;
}

PanelMetrics panel_metrics(const PanelCorpus& corpus, const PanelSpec& spec, const VerdictTable& verdicts,
                           const MetaLabels* meta, const std::optional<BootstrapConfig>& ci) {
  validate(spec);
  if (corpus.papers.empty()) fail(ErrorCode::EmptyInput, "panel simulation over zero complete papers");
  if (spec.meta_filter && !meta) fail(ErrorCode::MissingMetaLabels, "meta filter requested without meta labels");
  const MetaLabels* filter = spec.meta_filter ? meta : nullptr;

  std::vector<PanelCounts> per_paper;
  double noise_sum = 0.0;
  std::size_t noise_defined = 0;
  std::size_t noise_undefined = 0;
  for (const auto& paper : corpus.papers) {
    const auto panels = enumerate_panels(spec, paper.humans, paper.ais);
    PanelCounts acc;
    for (const auto& panel : panels) {
      const PanelCounts c = panel_counts(paper, panel, verdicts, filter);
      acc.total += c.total;
      acc.unique += c.unique;
      acc.not_fully_pos += c.not_fully_pos;
      acc.fp_unique += c.fp_unique;
      if (c.fp_unique > 0.0) {
        noise_sum += c.not_fully_pos / c.fp_unique;
        ++noise_defined;
      } else {
        ++noise_undefined;
      }
    }
    const double n = static_cast<double>(panels.size());
    per_paper.push_back({acc.total / n, acc.unique / n, acc.not_fully_pos / n, acc.fp_unique / n});
  }

  PanelCounts means;
  for (const auto& c : per_paper) {
    means.total += c.total;
    means.unique += c.unique;
    means.not_fully_pos += c.not_fully_pos;
    means.fp_unique += c.fp_unique;
  }
  const double papers = static_cast<double>(per_paper.size());
  means.total /= papers;
  means.unique /= papers;
  means.not_fully_pos /= papers;
  means.fp_unique /= papers;

  PanelMetrics m = derive_panel_metrics(spec, means);
  m.papers = per_paper.size();
  if (noise_defined > 0) m.noise_per_gem_panel_mean = noise_sum / static_cast<double>(noise_defined);
  m.undefined_noise_panels = noise_undefined;

  if (ci) {
    std::array<IntervalEstimate, 4> out;
    double PanelCounts::*fields[4] = {&PanelCounts::total, &PanelCounts::unique, &PanelCounts::not_fully_pos,
                                      &PanelCounts::fp_unique};
    for (int k = 0; k < 4; ++k) {
      const auto field = fields[k];
      out[k] = cluster_bootstrap_ci(
          per_paper,
          [field](const std::vector<const PanelCounts*>& sample) {
            double s = 0.0;
            for (const auto* c : sample) s += c->*field;
            return s / static_cast<double>(sample.size());
          },
          *ci);
    }
    m.count_ci = out;
  }
  return m;
}

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string opt(const char* f, const std::optional<double>& v, double scale = 1.0) {
  return v ? fmt(f, *v * scale) : "NA";
}

}  // namespace

std::string format_panel_table_tsv(const std::vector<PanelMetrics>& rows) {
  std::string out =
      "humans\tais\tmeta_filter\ttotal_items\tunique_items\tnot_fully_pos\tpct_fp_unique_of_unique\t"
      "fp_unique\tpct_fp_unique_of_total\tnoise_per_gem\n";
  for (const auto& r : rows) {
    out += std::to_string(r.spec.humans) + "\t" + std::to_string(r.spec.ais) + "\t" +
           (r.spec.meta_filter ? "yes" : "no") + "\t" + fmt("%.1f", r.total_items) + "\t" +
           fmt("%.1f", r.unique_items) + "\t" + fmt("%.1f", r.not_fully_pos) + "\t" +
           opt("%.1f", r.pct_fp_unique_of_unique, 100.0) + "\t" + fmt("%.1f", r.fp_unique) + "\t" +
           opt("%.1f", r.pct_fp_unique_of_total, 100.0) + "\t" + opt("%.2f", r.noise_per_gem) + "\n";
  }
  return out;
}

}  // namespace revbench
