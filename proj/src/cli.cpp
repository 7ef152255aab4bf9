#include "revbench/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>

#include <unistd.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "revbench/bench.hpp"
#include "revbench/corpus.hpp"
#include "revbench/judge.hpp"
#include "revbench/panelsim.hpp"
#include "revbench/rubric.hpp"
#include "revbench/similarity.hpp"
#include "revbench/stats.hpp"
#include "text_util.hpp"

#ifndef REVBENCH_VERSION
#define REVBENCH_VERSION "dev"
#endif

namespace revbench::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

/// Error raised while talking to the judge; exits with kExitJudge unless the
/// code says otherwise.
class JudgePhaseError : public Error {
 public:
  explicit JudgePhaseError(const Error& e) : Error(e.code(), e.detail()) {}
};

}  // namespace

int exit_code(ErrorCode code, bool judge_phase) {
  switch (code) {
    case ErrorCode::InvariantViolation: return kExitInternal;
    case ErrorCode::ContextOverflow: return kExitInput;
    case ErrorCode::TransportFailure:
    case ErrorCode::UnparseableResponse: return kExitJudge;
    default: return judge_phase ? kExitJudge : kExitInput;
  }
}

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string fixed4(double v) { return fmt("%.4f", v); }

// ---------------------------------------------------------------------------
// Shared flags, manifest, output
// ---------------------------------------------------------------------------

struct Common {
  std::string out;
  std::uint64_t seed = 0;
  std::size_t iterations = 10000;
  unsigned threads = 0;
  std::string format = "tsv";
};

struct JudgeFlags {
  std::string bundle;
  std::string reviews;
  std::string judge = "mock";
  std::string template_dir;
  std::string cache_dir;
  std::string mock_verdicts;
  std::string mock_meta;
  std::size_t max_in_flight = 4;
  std::size_t context_budget = 60000;
  std::size_t max_attempts = 5;
  std::size_t backoff_ms = 500;
};

void add_common(CLI::App* app, Common& c, bool with_bootstrap) {
  app->add_option("--out", c.out, "Output directory");
  app->add_option("--format", c.format, "Report format on stdout")->check(CLI::IsMember({"tsv", "table"}));
  if (with_bootstrap) {
    app->add_option("--seed", c.seed, "Root seed");
    app->add_option("--iterations", c.iterations, "Bootstrap iterations")->check(CLI::PositiveNumber);
    app->add_option("--threads", c.threads, "Bootstrap worker threads (0 = all cores)");
  }
}

void add_judge_flags(CLI::App* app, JudgeFlags& j) {
  app->add_option("--bundle", j.bundle, "Directory of paper bundles, one subdirectory per paper");
  app->add_option("--judge", j.judge, "Judge backend")->check(CLI::IsMember({"mock", "remote"}));
  app->add_option("--template-dir", j.template_dir, "Directory overriding the built-in prompt templates");
  app->add_option("--cache-dir", j.cache_dir, "Judge response cache directory");
  app->add_option("--mock-verdicts", j.mock_verdicts, "Similarity verdicts replayed by the mock judge");
  app->add_option("--mock-meta", j.mock_meta, "Meta-review labels replayed by the mock judge");
  app->add_option("--max-in-flight", j.max_in_flight, "Concurrent judge requests")->check(CLI::PositiveNumber);
  app->add_option("--context-budget", j.context_budget, "Bytes of paper context per judge request");
  app->add_option("--max-attempts", j.max_attempts, "Attempts per judge request")->check(CLI::PositiveNumber);
  app->add_option("--retry-backoff-ms", j.backoff_ms, "Initial retry backoff, doubled per attempt");
}

std::string digest_path(const fs::path& p) {
  if (fs::is_regular_file(p)) return sha256_hex(read_text_file(p));
  if (!fs::is_directory(p)) fail(ErrorCode::IoError, p.string() + " not found");
  std::vector<std::pair<std::string, std::string>> files;
  for (const auto& e : fs::recursive_directory_iterator(p)) {
    if (e.is_regular_file()) files.emplace_back(fs::relative(e.path(), p).generic_string(), e.path().string());
  }
  std::sort(files.begin(), files.end());
  std::string listing;
  for (const auto& [rel, full] : files) listing += rel + '\0' + sha256_hex(read_text_file(full)) + '\n';
  return sha256_hex(listing);
}

class Run {
 public:
  Run(std::string command, const Common& common, std::ostream& out, std::ostream& err)
      : common_(common), out_(out), err_(err) {
    manifest_["command"] = std::move(command);
    manifest_["tool_version"] = REVBENCH_VERSION;
    manifest_["config"] = json::object();
    manifest_["inputs"] = json::object();
    manifest_["outputs"] = json::array();
  }

  json& config() { return manifest_["config"]; }
  std::ostream& out() { return out_; }

  void input(const std::string& flag, const std::string& path) {
    if (path.empty()) return;
    manifest_["inputs"][flag] = {{"path", path}, {"sha256", digest_path(path)}};
  }

  void notice(const std::string& msg) { err_ << "notice: " << msg << '\n'; }

  void write(const std::string& name, const std::string& content) {
    if (common_.out.empty()) return;
    write_atomic(fs::path(common_.out) / name, content);
    manifest_["outputs"].push_back(name);
  }

  /// Prints a TSV report in the requested format.
  void print(const std::string& tsv) { out_ << (common_.format == "table" ? render_table(tsv) : tsv); }

  void finish() {
    if (common_.out.empty()) return;
    write_atomic(fs::path(common_.out) / "manifest.json", manifest_.dump(2) + "\n");
  }

  static void write_atomic(const fs::path& path, const std::string& content) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) fail(ErrorCode::IoError, "cannot create " + path.parent_path().string() + ": " + ec.message());
    const fs::path tmp = path.parent_path() / ("." + path.filename().string() + "." + std::to_string(::getpid()) + ".tmp");
    {
      std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
      if (!f) fail(ErrorCode::IoError, "cannot write " + tmp.string());
      f << content;
      if (!f.flush()) fail(ErrorCode::IoError, "cannot write " + tmp.string());
    }
    fs::rename(tmp, path, ec);
    if (ec) fail(ErrorCode::IoError, "cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }

  static std::string render_table(const std::string& tsv) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> width;
    for (const auto& line : detail::split_lines(tsv)) {
      if (line.empty()) continue;
      std::vector<std::string> cells;
      std::size_t start = 0;
      while (true) {
        const auto tab = line.find('\t', start);
        cells.emplace_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
        if (tab == std::string::npos) break;
        start = tab + 1;
      }
      if (width.size() < cells.size()) width.resize(cells.size(), 0);
      for (std::size_t i = 0; i < cells.size(); ++i) width[i] = std::max(width[i], cells[i].size());
      rows.push_back(std::move(cells));
    }
    std::string out;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (std::size_t i = 0; i < rows[r].size(); ++i) {
        if (i) out += "  ";
        out += rows[r][i];
        if (i + 1 < rows[r].size()) out.append(width[i] - rows[r][i].size(), ' ');
      }
      out += '\n';
      if (r == 0) {
        std::size_t total = 0;
        for (std::size_t i = 0; i < width.size(); ++i) total += width[i] + (i ? 2 : 0);
        out += std::string(total, '-') + '\n';
      }
    }
    return out;
  }

 private:
  const Common& common_;
  std::ostream& out_;
  std::ostream& err_;
  json manifest_;
};

BootstrapConfig bootstrap_config(const Common& c, const std::string& label) {
  BootstrapConfig cfg;
  cfg.iterations = c.iterations;
  cfg.seed = derive_seed(c.seed, label);
  cfg.threads = c.threads;
  return cfg;
}

// ---------------------------------------------------------------------------
// Judge plumbing
// ---------------------------------------------------------------------------

struct JudgeContext {
  std::unique_ptr<Judge> judge;
  std::map<std::string, std::string> contexts;  // paper_id -> excerpt
};

JudgeContext make_judge(const JudgeFlags& f, const Common& c, Run& run) {
  if (f.bundle.empty()) fail(ErrorCode::SchemaError, "--bundle is required when items are judged");
  std::shared_ptr<JudgeBackend> backend;
  JudgeOptions opt;
  opt.max_in_flight = f.max_in_flight;
  opt.max_attempts = f.max_attempts;
  opt.backoff = std::chrono::milliseconds(f.backoff_ms);
  if (!f.cache_dir.empty()) opt.cache_dir = f.cache_dir;
  if (f.judge == "mock") {
    MockBackend::Options m;
    if (!f.mock_verdicts.empty()) m.similarity = load_verdicts(f.mock_verdicts);
    if (!f.mock_meta.empty()) m.meta = load_meta_labels(f.mock_meta);
    m.seed = derive_seed(c.seed, "judge/mock");
    backend = std::make_shared<MockBackend>(std::move(m));
    run.input("--mock-verdicts", f.mock_verdicts);
    run.input("--mock-meta", f.mock_meta);
  } else {
    try {
      backend = std::make_shared<RemoteBackend>(RemoteBackend::options_from_env());
    } catch (const Error& e) {
      throw JudgePhaseError(e);
    }
  }
  TemplateSet templates = f.template_dir.empty() ? TemplateSet::defaults() : TemplateSet::load(f.template_dir);
  auto& cfg = run.config();
  cfg["judge"] = {{"backend", f.judge},
                  {"cache_dir", f.cache_dir.empty() ? json(nullptr) : json(f.cache_dir)},
                  {"context_budget", f.context_budget},
                  {"templates", {{"similarity", templates.id("similarity")}, {"meta_review", templates.id("meta_review")}}}};
  run.input("--bundle", f.bundle);
  run.input("--template-dir", f.template_dir);
  JudgeContext ctx;
  ctx.judge = std::make_unique<Judge>(std::move(backend), std::move(templates), std::move(opt));
  return ctx;
}

const std::string& context_for(JudgeContext& ctx, const JudgeFlags& f, const std::string& paper_id, Run& run) {
  auto it = ctx.contexts.find(paper_id);
  if (it != ctx.contexts.end()) return it->second;
  const PaperBundle bundle = load_bundle(fs::path(f.bundle) / paper_id, paper_id);
  const BundleReport report = validate_bundle(bundle);
  if (!report.ok()) fail(ErrorCode::SchemaError, "bundle " + paper_id + ": " + detail::join(report.errors, "; "));
  for (const auto& n : report.notices) run.notice("bundle " + paper_id + ": " + n);
  return ctx.contexts.emplace(paper_id, paper_context(bundle, f.context_budget)).first->second;
}

std::vector<JudgeVerdict> run_judge(JudgeContext& ctx, const std::vector<JudgeRequest>& requests) {
  try {
    return ctx.judge->run_all(requests);
  } catch (const Error& e) {
    throw JudgePhaseError(e);
  }
}

using ItemIndex = std::map<ItemId, ReviewItem>;

/// Reviews of one paper; reviewers absent from the annotations are AI.
std::vector<Review> load_paper_reviews(const JudgeFlags& f, const AnnotationDataset* ds, const std::string& paper_id) {
  return load_review_dir(fs::path(f.reviews) / paper_id, paper_id, [&](const std::string& reviewer) {
    if (ds) {
      if (auto k = ds->kind_of(paper_id, reviewer)) return *k;
    }
    return ReviewerKind::Ai;
  });
}

ItemIndex index_items(const std::vector<Review>& reviews) {
  ItemIndex idx;
  for (const auto& r : reviews) {
    for (const auto& i : r.items) idx.emplace(i.id, i);
  }
  return idx;
}

const ReviewItem& lookup(const ItemIndex& idx, const ItemId& id) {
  auto it = idx.find(id);
  if (it == idx.end()) fail(ErrorCode::SchemaError, "item " + id.str() + " has no review text");
  return it->second;
}

std::vector<std::string> papers_in_dir(const std::string& dir) {
  if (!fs::is_directory(dir)) fail(ErrorCode::IoError, "review directory " + dir + " not found");
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory()) out.push_back(e.path().filename().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Judges every unordered pair of distinct items within each paper (pairs
/// from one reviewer only when `same_reviewer`) and, when `meta_out` is set,
/// every item's rubric labels.
VerdictTable judge_corpus(JudgeContext& ctx, const JudgeFlags& f, const AnnotationDataset* ds,
                          const std::vector<std::string>& papers, bool same_reviewer, MetaLabelSet* meta_out,
                          Run& run) {
  std::vector<JudgeRequest> requests;
  const std::string sim_id = ctx.judge->templates().id("similarity");
  const std::string meta_id = ctx.judge->templates().id("meta_review");
  for (const auto& paper : papers) {
    const auto reviews = load_paper_reviews(f, ds, paper);
    const auto& context = context_for(ctx, f, paper, run);
    std::vector<const ReviewItem*> items;
    for (const auto& r : reviews) {
      for (const auto& i : r.items) items.push_back(&i);
    }
    for (std::size_t a = 0; a < items.size(); ++a) {
      for (std::size_t b = a + 1; b < items.size(); ++b) {
        if (!same_reviewer && items[a]->id.reviewer_id == items[b]->id.reviewer_id) continue;
        requests.push_back(make_similarity_request(sim_id, paper, context, *items[a], *items[b]));
      }
      if (meta_out) requests.push_back(make_meta_review_request(meta_id, paper, context, *items[a]));
    }
  }
  const auto verdicts = run_judge(ctx, requests);
  VerdictTable table;
  for (std::size_t i = 0; i < requests.size(); ++i) {
    const auto& req = requests[i];
    if (req.kind == JudgeKind::Similarity) {
      table.insert(req.items[0].id, req.items[1].id, SimilarityVerdict{verdicts[i].ordinal, VerdictSource::Judge});
    } else {
      meta_out->labels[req.items[0].id] = *verdicts[i].labels;
      meta_out->predictions[req.items[0].id] = *verdicts[i].prediction;
    }
  }
  return table;
}

// ---------------------------------------------------------------------------
// calibrate
// ---------------------------------------------------------------------------

struct CalibrateArgs {
  Common common;
  std::string calibration;
  std::string reference;
  std::string verdicts;
};

int cmd_calibrate(const CalibrateArgs& a, std::ostream& out, std::ostream& err) {
  Run run("calibrate", a.common, out, err);
  JudgeCalibration c;
  if (!a.calibration.empty()) {
    if (!a.reference.empty() || !a.verdicts.empty()) {
      fail(ErrorCode::SchemaError, "--calibration excludes --reference and --verdicts");
    }
    c = load_calibration(a.calibration);
    run.input("--calibration", a.calibration);
  } else {
    if (a.reference.empty() || a.verdicts.empty()) {
      fail(ErrorCode::SchemaError, "give --calibration, or both --reference and --verdicts");
    }
    c = confusion(load_verdicts(a.reference), load_verdicts(a.verdicts));
    run.input("--reference", a.reference);
    run.input("--verdicts", a.verdicts);
  }
  const ErrorRates r = error_rates(c);
  const auto sens = wilson_ci(c.tp, c.positives());
  const auto spec = wilson_ci(c.tn, c.negatives());
  const auto acc = wilson_ci(c.tp + c.tn, c.positives() + c.negatives());
  std::string tsv = "metric\testimate\tci_lower\tci_upper\tsuccesses\ttrials\n";
  auto row = [&](const char* name, double point, const IntervalEstimate& ci, std::uint64_t k, std::uint64_t n) {
    tsv += std::string(name) + "\t" + fmt("%.3f", point) + "\t" + fmt("%.3f", ci.lower) + "\t" +
           fmt("%.3f", ci.upper) + "\t" + std::to_string(k) + "\t" + std::to_string(n) + "\n";
  };
  row("sensitivity", r.sensitivity, sens, c.tp, c.positives());
  row("specificity", r.specificity, spec, c.tn, c.negatives());
  row("accuracy", acc.point, acc, c.tp + c.tn, c.positives() + c.negatives());
  run.config()["confusion"] = {{"tp", c.tp}, {"fn", c.fn}, {"fp", c.fp}, {"tn", c.tn}};
  run.print(tsv);
  run.write("calibration.tsv", tsv);
  run.finish();
  return kExitOk;
}

// ---------------------------------------------------------------------------
// agreement
// ---------------------------------------------------------------------------

struct AgreementArgs {
  Common common;
  std::string annotations;
};

template <class Label>
std::string agreement_row(const char* axis, const std::vector<std::pair<Label, Label>>& pairs, std::size_t vocab) {
  std::string row = std::string(axis) + "\t" + std::to_string(pairs.size()) + "\t";
  if (pairs.empty()) return row + "NA\tNA\tNA\n";
  const auto t = tabulate(pairs);
  row += fixed4(percent_agreement(t)) + "\t";
  try {
    row += fixed4(cohen_kappa(t));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::DegenerateMarginals) throw;
    row += "NA";
  }
  return row + "\t" + fixed4(gwet_ac1(t, vocab)) + "\n";
}

int cmd_agreement(const AgreementArgs& a, std::ostream& out, std::ostream& err) {
  Run run("agreement", a.common, out, err);
  const AnnotationDataset ds = load_annotation_dataset(a.annotations);
  run.input("--annotations", a.annotations);

  std::vector<std::pair<Correctness, Correctness>> corr;
  std::vector<std::pair<Significance, Significance>> sig;
  std::vector<std::pair<EvidenceSufficiency, EvidenceSufficiency>> ev;
  std::size_t items_with_extra = 0;
  for (const auto& [paper, rows] : ds.by_paper) {
    for (std::size_t i = 0; i < rows.size();) {
      std::size_t j = i;
      while (j < rows.size() && rows[j].item == rows[i].item) ++j;
      if (j - i >= 2) {
        // Rows are sorted by annotator; the first two form the pair.
        const auto& r1 = rows[i];
        const auto& r2 = rows[i + 1];
        if (j - i > 2) ++items_with_extra;
        corr.emplace_back(r1.correctness, r2.correctness);
        if (r1.significance && r2.significance) sig.emplace_back(*r1.significance, *r2.significance);
        if (r1.evidence && r2.evidence) ev.emplace_back(*r1.evidence, *r2.evidence);
      }
      i = j;
    }
  }
  if (corr.empty()) fail(ErrorCode::MissingDualAnnotation, "no item carries two annotations");
  if (items_with_extra) {
    run.notice(std::to_string(items_with_extra) + " items have more than two annotations; the first two annotators are paired");
  }
  std::string tsv = "axis\tpairs\tpercent_agreement\tcohen_kappa\tgwet_ac1\n";
  tsv += agreement_row("correctness", corr, 2);
  tsv += agreement_row("significance", sig, 3);
  tsv += agreement_row("evidence", ev, 2);
  run.print(tsv);
  run.write("agreement.tsv", tsv);
  run.finish();
  return kExitOk;
}

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

struct ScoreArgs {
  Common common;
  JudgeFlags judge;
  std::string annotations;
  std::size_t max_items = 5;
  bool allow_single = false;
};

int cmd_score(const ScoreArgs& a, std::ostream& out, std::ostream& err) {
  Run run("score", a.common, out, err);
  if (a.judge.reviews.empty()) fail(ErrorCode::SchemaError, "--reviews is required");
  const AnnotationDataset ds = load_annotation_dataset(a.annotations);
  run.input("--annotations", a.annotations);
  run.input("--reviews", a.judge.reviews);
  const AnnotationPolicy policy = a.allow_single ? AnnotationPolicy::AllowSingle : AnnotationPolicy::RequireDual;
  run.config()["max_items"] = a.max_items;
  run.config()["annotation_policy"] = a.allow_single ? "allow_single" : "require_dual";
  run.config()["seed"] = a.common.seed;

  struct PaperJob {
    Rubric rubric;
    std::map<std::string, std::vector<ItemId>> generated;  // reviewer -> items
  };
  std::vector<PaperJob> jobs;
  std::string exclusions = "paper_id\treason\n";
  std::vector<std::string> excluded;

  JudgeContext ctx = make_judge(a.judge, a.common, run);
  std::vector<JudgeRequest> requests;
  const std::string sim_id = ctx.judge->templates().id("similarity");
  const std::string meta_id = ctx.judge->templates().id("meta_review");
  std::set<ItemId> meta_requested;

  for (const auto& [paper, rows] : ds.by_paper) {
    auto rubric = build_rubric(ds, paper, policy);
    if (!rubric) {
      excluded.push_back(paper);
      exclusions += paper + "\tempty rubric\n";
      run.notice("paper " + paper + " excluded: no human item is fully positive");
      continue;
    }
    const auto reviews = load_paper_reviews(a.judge, &ds, paper);
    const ItemIndex idx = index_items(reviews);
    const auto& context = context_for(ctx, a.judge, paper, run);
    PaperJob job{*rubric, {}};
    for (const auto& r : reviews) {
      if (r.reviewer_kind != ReviewerKind::Ai) continue;
      enforce_item_cap(r, a.max_items);
      auto& gen = job.generated[r.reviewer_id];
      for (const auto& item : r.items) {
        gen.push_back(item.id);
        for (const auto& entry : rubric->entries) {
          requests.push_back(make_similarity_request(sim_id, paper, context, lookup(idx, entry), item));
        }
        if (meta_requested.insert(item.id).second) {
          requests.push_back(make_meta_review_request(meta_id, paper, context, item));
        }
      }
    }
    jobs.push_back(std::move(job));
  }

  const auto verdicts = run_judge(ctx, requests);
  VerdictTable table;
  MetaLabelSet meta;
  for (std::size_t i = 0; i < requests.size(); ++i) {
    const auto& req = requests[i];
    if (req.kind == JudgeKind::Similarity) {
      table.insert(req.items[0].id, req.items[1].id, SimilarityVerdict{verdicts[i].ordinal, VerdictSource::Judge});
    } else {
      meta.labels[req.items[0].id] = *verdicts[i].labels;
      meta.predictions[req.items[0].id] = *verdicts[i].prediction;
    }
  }

  std::map<std::string, std::vector<BenchPaperResult>> results;
  for (const auto& job : jobs) {
    for (const auto& [reviewer, gen] : job.generated) {
      results[reviewer].push_back(score_paper(job.rubric, gen, table, meta.labels));
    }
  }
  if (results.empty()) fail(ErrorCode::EmptyInput, "no AI reviews to score");
  const auto board = aggregate_leaderboard(results);
  const std::string board_tsv = format_leaderboard_tsv(board);
  std::string macro = "reviewer_id\tmean_f1\tf1_of_mean_precision_recall\n";
  for (const auto& row : board) macro += row.reviewer_id + "\t" + fixed4(row.f1) + "\t" + fixed4(row.f1_of_means) + "\n";

  run.config()["excluded_papers"] = excluded;
  run.print(board_tsv);
  run.write("leaderboard.tsv", board_tsv);
  run.write("paper_results.tsv", format_paper_results_tsv(results));
  run.write("f1_aggregation.tsv", macro);
  run.write("exclusions.tsv", exclusions);
  run.write("verdicts.jsonl", serialize_verdicts(table));
  run.write("meta_labels.jsonl", serialize_meta_labels(meta));
  run.finish();
  return kExitOk;
}

// ---------------------------------------------------------------------------
// simulate-panels
// ---------------------------------------------------------------------------

struct PanelArgs {
  Common common;
  JudgeFlags judge;
  std::string annotations;
  std::string verdicts;
  std::string meta;
  bool filter_only = false;
  bool allow_partial = false;
  bool with_ci = false;
};

int cmd_simulate_panels(const PanelArgs& a, std::ostream& out, std::ostream& err) {
  Run run("simulate-panels", a.common, out, err);
  const AnnotationDataset ds = load_annotation_dataset(a.annotations);
  run.input("--annotations", a.annotations);
  const PanelCorpus corpus = assemble_panel_corpus(ds, a.allow_partial);
  for (const auto& n : corpus.notices) run.notice(n);
  if (corpus.papers.empty()) fail(ErrorCode::EmptyInput, "no complete paper to simulate panels on");
  run.config()["allow_partial"] = a.allow_partial;
  run.config()["filter_only"] = a.filter_only;

  VerdictTable verdicts;
  MetaLabelSet meta;
  bool have_meta = false;
  if (!a.meta.empty()) {
    meta = load_meta_labels(a.meta);
    have_meta = true;
    run.input("--meta", a.meta);
  }
  if (!a.verdicts.empty()) {
    if (!a.judge.reviews.empty()) fail(ErrorCode::SchemaError, "--verdicts excludes --reviews");
    verdicts = load_verdicts(a.verdicts);
    run.input("--verdicts", a.verdicts);
  } else {
    if (a.judge.reviews.empty()) fail(ErrorCode::SchemaError, "give --verdicts, or --reviews with a judge");
    run.input("--reviews", a.judge.reviews);
    run.config()["seed"] = a.common.seed;
    JudgeContext ctx = make_judge(a.judge, a.common, run);
    std::vector<std::string> papers;
    for (const auto& p : corpus.papers) papers.push_back(p.paper_id);
    MetaLabelSet judged;
    verdicts = judge_corpus(ctx, a.judge, &ds, papers, false, have_meta ? nullptr : &judged, run);
    if (!have_meta) {
      meta = std::move(judged);
      have_meta = true;
    }
    run.write("verdicts.jsonl", serialize_verdicts(verdicts));
    run.write("meta_labels.jsonl", serialize_meta_labels(meta));
  }

  std::optional<BootstrapConfig> ci;
  if (a.with_ci) {
    run.config()["bootstrap"] = {{"iterations", a.common.iterations}, {"seed", a.common.seed}};
  }
  std::vector<PanelMetrics> rows;
  for (const auto& spec : panel_compositions(!a.filter_only, true)) {
    if (a.with_ci) {
      ci = bootstrap_config(a.common, "panels/" + std::to_string(spec.humans) + "h" + std::to_string(spec.ais) +
                                          "a/" + (spec.meta_filter ? "filtered" : "unfiltered"));
    }
    rows.push_back(panel_metrics(corpus, spec, verdicts, have_meta ? &meta.labels : nullptr, ci));
  }
  const std::string tsv = format_panel_table_tsv(rows);
  run.print(tsv);
  run.write("panels.tsv", tsv);
  if (a.with_ci) {
    std::string ci_tsv =
        "humans\tais\tmeta_filter\tcount\tpoint\tci_lower\tci_upper\n";
    const char* names[] = {"total_items", "unique_items", "not_fully_pos", "fp_unique"};
    for (const auto& r : rows) {
      for (std::size_t k = 0; k < 4; ++k) {
        const auto& e = (*r.count_ci)[k];
        ci_tsv += std::to_string(r.spec.humans) + "\t" + std::to_string(r.spec.ais) + "\t" +
                  (r.spec.meta_filter ? "yes" : "no") + "\t" + names[k] + "\t" + fmt("%.2f", e.point) + "\t" +
                  fmt("%.2f", e.lower) + "\t" + fmt("%.2f", e.upper) + "\n";
      }
    }
    run.write("panels_ci.tsv", ci_tsv);
  }
  run.finish();
  return kExitOk;
}

// ---------------------------------------------------------------------------
// overlap
// ---------------------------------------------------------------------------

struct OverlapArgs {
  Common common;
  JudgeFlags judge;
  std::string annotations;
  std::string verdicts;
  std::string calibration;
};

int cmd_overlap(const OverlapArgs& a, std::ostream& out, std::ostream& err) {
  Run run("overlap", a.common, out, err);
  const AnnotationDataset ds = load_annotation_dataset(a.annotations);
  run.input("--annotations", a.annotations);
  const JudgeCalibration cal = load_calibration(a.calibration);
  run.input("--calibration", a.calibration);
  run.config()["bootstrap"] = {{"iterations", a.common.iterations}, {"seed", a.common.seed}};

  VerdictTable verdicts;
  if (!a.verdicts.empty()) {
    if (!a.judge.reviews.empty()) fail(ErrorCode::SchemaError, "--verdicts excludes --reviews");
    verdicts = load_verdicts(a.verdicts);
    run.input("--verdicts", a.verdicts);
  } else {
    if (a.judge.reviews.empty()) fail(ErrorCode::SchemaError, "give --verdicts, or --reviews with a judge");
    run.input("--reviews", a.judge.reviews);
    JudgeContext ctx = make_judge(a.judge, a.common, run);
    verdicts = judge_corpus(ctx, a.judge, &ds, papers_in_dir(a.judge.reviews), true, nullptr, run);
    run.write("verdicts.jsonl", serialize_verdicts(verdicts));
  }
  if (verdicts.size() == 0) fail(ErrorCode::EmptyInput, "no verdicts");

  const auto groups = pair_counts_by_type(
      verdicts, [&](const std::string& p, const std::string& r) { return ds.kind_of(p, r); });
  std::string tsv = "pair_type\tpapers\tpairs";
  for (int k = 0; k < 4; ++k) {
    const std::string s = std::to_string(k);
    tsv += "\traw_" + s + "\tcorrected_" + s + "\tlower_" + s + "\tupper_" + s;
  }
  tsv += "\traw_similar\tcorrected_similar\tlower_similar\tupper_similar\n";
  for (const PairType t : kAllPairTypes) {
    auto it = groups.find(t);
    if (it == groups.end()) continue;
    const auto d = corrected_distribution_ci(it->second, cal, bootstrap_config(a.common, "overlap/" + std::string(to_string(t))));
    tsv += std::string(to_string(t)) + "\t" + std::to_string(d.papers) + "\t" + std::to_string(d.pairs);
    for (int k = 0; k < 4; ++k) {
      const auto& c = d.corrected[static_cast<std::size_t>(k)];
      tsv += "\t" + fixed4(d.raw[static_cast<std::size_t>(k)]) + "\t" + fixed4(c.point) + "\t" + fixed4(c.lower) +
             "\t" + fixed4(c.upper);
    }
    tsv += "\t" + fixed4(d.similar.raw) + "\t" + fixed4(d.similar.corrected) + "\t" + fixed4(d.similar.ci.lower) +
           "\t" + fixed4(d.similar.ci.upper) + "\n";
  }
  run.print(tsv);
  run.write("overlap.tsv", tsv);
  run.finish();
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Criticism-level evaluation of peer reviews", "revbench"};
  app.set_version_flag("--version", std::string(REVBENCH_VERSION));
  app.require_subcommand(1);

  CalibrateArgs cal;
  auto* c_cal = app.add_subcommand("calibrate", "Judge error rates with Wilson intervals");
  add_common(c_cal, cal.common, false);
  c_cal->add_option("--calibration", cal.calibration, "Confusion counts (tp, fn, fp, tn)");
  c_cal->add_option("--reference", cal.reference, "Reference verdicts");
  c_cal->add_option("--verdicts", cal.verdicts, "Judge verdicts on the reference pairs");

  AgreementArgs agr;
  auto* c_agr = app.add_subcommand("agreement", "Inter-annotator agreement per rubric axis");
  add_common(c_agr, agr.common, false);
  c_agr->add_option("--annotations", agr.annotations, "Annotation records")->required();

  ScoreArgs sc;
  auto* c_sc = app.add_subcommand("score", "Score AI reviewers against expert rubrics");
  add_common(c_sc, sc.common, true);
  add_judge_flags(c_sc, sc.judge);
  c_sc->add_option("--reviews", sc.judge.reviews, "Reviews as <dir>/<paper>/<reviewer>.md")->required();
  c_sc->add_option("--annotations", sc.annotations, "Annotation records")->required();
  c_sc->add_option("--max-items", sc.max_items, "Item cap per AI review")->check(CLI::PositiveNumber);
  c_sc->add_flag("--allow-single-annotation", sc.allow_single, "Build rubrics from singly annotated items too");

  PanelArgs pa;
  auto* c_pa = app.add_subcommand("simulate-panels", "Mixed human/AI panel composition metrics");
  add_common(c_pa, pa.common, true);
  add_judge_flags(c_pa, pa.judge);
  c_pa->add_option("--reviews", pa.judge.reviews, "Reviews to judge pairwise");
  c_pa->add_option("--annotations", pa.annotations, "Annotation records")->required();
  c_pa->add_option("--verdicts", pa.verdicts, "Precomputed similarity verdicts");
  c_pa->add_option("--meta", pa.meta, "Precomputed meta-review labels");
  c_pa->add_flag("--filter-only", pa.filter_only, "Only the meta-filtered rows");
  c_pa->add_flag("--allow-partial", pa.allow_partial, "Skip incomplete papers instead of failing");
  c_pa->add_flag("--with-ci", pa.with_ci, "Paper-level bootstrap intervals for the counts");

  OverlapArgs ov;
  auto* c_ov = app.add_subcommand("overlap", "Corrected similarity distribution per pair type");
  add_common(c_ov, ov.common, true);
  add_judge_flags(c_ov, ov.judge);
  c_ov->add_option("--reviews", ov.judge.reviews, "Reviews to judge pairwise");
  c_ov->add_option("--annotations", ov.annotations, "Annotation records (reviewer kinds)")->required();
  c_ov->add_option("--verdicts", ov.verdicts, "Precomputed similarity verdicts");
  c_ov->add_option("--calibration", ov.calibration, "Judge confusion counts")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << REVBENCH_VERSION << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }

  try {
    if (*c_cal) return cmd_calibrate(cal, out, err);
    if (*c_agr) return cmd_agreement(agr, out, err);
    if (*c_sc) return cmd_score(sc, out, err);
    if (*c_pa) return cmd_simulate_panels(pa, out, err);
    if (*c_ov) return cmd_overlap(ov, out, err);
  } catch (const JudgePhaseError& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e.code(), true);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e.code(), false);
  } catch (const fs::filesystem_error& e) {
    err << "error: IoError: " << e.what() << '\n';
    return kExitInput;
  } catch (const nlohmann::json::exception& e) {
    err << "error: SchemaError: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: internal: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitInternal;
}

}  // namespace revbench::cli
