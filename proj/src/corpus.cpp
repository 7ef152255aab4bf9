#include "revbench/corpus.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "revbench/error.hpp"
#include "text_util.hpp"

namespace revbench {

using nlohmann::json;

std::string ItemId::local() const { return reviewer_id + "#" + std::to_string(index); }

std::string ItemId::str() const { return paper_id + "/" + local(); }

ItemId parse_local_item_id(std::string_view paper_id, std::string_view local) {
  const auto hash = local.rfind('#');
  if (hash == std::string_view::npos || hash == 0 || hash + 1 == local.size()) {
    fail(ErrorCode::SchemaError, "item id '" + std::string(local) + "' is not <reviewer>#<index>");
  }
  int index = 0;
  const char* first = local.data() + hash + 1;
  const char* last = local.data() + local.size();
  auto [ptr, ec] = std::from_chars(first, last, index);
  if (ec != std::errc{} || ptr != last || index < 1) {
    fail(ErrorCode::SchemaError, "item id '" + std::string(local) + "' has a bad index");
  }
  return ItemId{std::string(paper_id), std::string(local.substr(0, hash)), index};
}

std::string_view to_string(ReviewerKind kind) {
  return kind == ReviewerKind::Human ? "human" : "ai";
}

std::string_view to_string(Correctness c) {
  return c == Correctness::Correct ? "Correct" : "Not Correct";
}

std::string_view to_string(Significance s) {
  switch (s) {
    case Significance::Significant: return "Significant";
    case Significance::MarginallySignificant: return "Marginally Significant";
    case Significance::NotSignificant: return "Not Significant";
  }
  return "";
}

std::string_view to_string(EvidenceSufficiency e) {
  return e == EvidenceSufficiency::Sufficient ? "Sufficient" : "Requires More";
}

namespace {

[[noreturn]] void unknown_label(std::string_view axis, std::string_view s) {
  fail(ErrorCode::UnknownLabelString, "unknown " + std::string(axis) + " label '" + std::string(s) + "'");
}

}  // namespace

ReviewerKind parse_reviewer_kind(std::string_view s) {
  if (s == "human") return ReviewerKind::Human;
  if (s == "ai") return ReviewerKind::Ai;
  unknown_label("reviewer_kind", s);
}

Correctness parse_correctness(std::string_view s) {
  if (s == "Correct") return Correctness::Correct;
  if (s == "Not Correct") return Correctness::NotCorrect;
  unknown_label("correctness", s);
}

Significance parse_significance(std::string_view s) {
  if (s == "Significant") return Significance::Significant;
  if (s == "Marginally Significant") return Significance::MarginallySignificant;
  if (s == "Not Significant") return Significance::NotSignificant;
  unknown_label("significance", s);
}

EvidenceSufficiency parse_evidence(std::string_view s) {
  if (s == "Sufficient") return EvidenceSufficiency::Sufficient;
  if (s == "Requires More") return EvidenceSufficiency::RequiresMore;
  unknown_label("evidence", s);
}

std::string_view to_string(Criterion c) {
  switch (c) {
    case Criterion::Validity: return "Validity";
    case Criterion::Conclusions: return "Conclusions";
    case Criterion::OriginalityAndSignificance: return "Originality and significance";
    case Criterion::DataAndMethodology: return "Data and methodology";
    case Criterion::StatisticsAndUncertainties:
      return "Appropriate use of statistics and treatment of uncertainties";
    case Criterion::ClarityAndContext: return "Clarity and context";
  }
  return "";
}

std::optional<Criterion> normalize_criterion(std::string_view tag) {
  // Lower-case, drop list numbering and punctuation, collapse whitespace.
  std::string s;
  std::string_view t = detail::trim(tag);
  while (!t.empty() && (std::isdigit(static_cast<unsigned char>(t.front())) || t.front() == '.' ||
                        t.front() == ')')) {
    t.remove_prefix(1);
  }
  for (char c : t) {
    const char l = detail::lower(c);
    if (std::isalnum(static_cast<unsigned char>(l))) {
      s += l;
    } else if (l == '&') {
      s += " and ";
    } else if (!s.empty() && s.back() != ' ') {
      s += ' ';
    }
  }
  std::string norm;
  for (char c : s) {
    if (c == ' ' && (norm.empty() || norm.back() == ' ')) continue;
    norm += c;
  }
  while (!norm.empty() && norm.back() == ' ') norm.pop_back();

  if (norm == "validity") return Criterion::Validity;
  if (norm == "conclusions" || norm == "conclusion") return Criterion::Conclusions;
  if (norm == "originality and significance" || norm == "originality" ||
      norm == "significance" || norm == "novelty")
    return Criterion::OriginalityAndSignificance;
  if (norm == "data and methodology" || norm == "data and methods" || norm == "methodology" ||
      norm == "data")
    return Criterion::DataAndMethodology;
  if (norm.starts_with("appropriate use of statistics") || norm == "statistics" ||
      norm == "statistics and uncertainties" || norm == "treatment of uncertainties" ||
      norm == "statistics and treatment of uncertainties")
    return Criterion::StatisticsAndUncertainties;
  if (norm == "clarity and context" || norm == "clarity") return Criterion::ClarityAndContext;
  return std::nullopt;
}

std::string_view to_string(EvidenceSource s) {
  switch (s) {
    case EvidenceSource::MainText: return "main_text";
    case EvidenceSource::Supplementary: return "supplementary";
    case EvidenceSource::Code: return "code";
    case EvidenceSource::ExternalReference: return "external_reference";
  }
  return "";
}

bool is_valid_utf8(std::string_view text) {
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (c < 0x80) {
      ++i;
      continue;
    }
    int len = 0;
    std::uint32_t cp = 0;
    if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > n) return false;
    for (int k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(text[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // Overlong forms, surrogates, out of range.
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
        cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))
      return false;
    i += len;
  }
  return true;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) fail(ErrorCode::IoError, "read failed: " + path.string());
  return ss.str();
}

// ---------------------------------------------------------------------------

bool cascade_legal(Correctness c, std::optional<Significance> s,
                   std::optional<EvidenceSufficiency> e) {
  if (c == Correctness::NotCorrect) return !s && !e;
  if (!s) return false;
  if (*s == Significance::NotSignificant) return !e;
  return e.has_value();
}

void check_cascade(Correctness c, std::optional<Significance> s,
                   std::optional<EvidenceSufficiency> e) {
  if (cascade_legal(c, s, e)) return;
  if (c == Correctness::NotCorrect) {
    fail(ErrorCode::CascadeViolation,
         s ? "significance given for a Not Correct item" : "evidence given for a Not Correct item");
  }
  if (!s) fail(ErrorCode::CascadeViolation, "significance missing for a Correct item");
  if (*s == Significance::NotSignificant) {
    fail(ErrorCode::CascadeViolation, "evidence given for a Not Significant item");
  }
  fail(ErrorCode::CascadeViolation, "evidence missing for a " + std::string(to_string(*s)) + " item");
}

std::size_t AnnotationDataset::size() const {
  std::size_t n = 0;
  for (const auto& [paper, rows] : by_paper) n += rows.size();
  return n;
}

std::vector<const AnnotationRecord*> AnnotationDataset::rows_for(const ItemId& id) const {
  std::vector<const AnnotationRecord*> out;
  auto it = by_paper.find(id.paper_id);
  if (it == by_paper.end()) return out;
  const auto& rows = it->second;
  auto lo = std::lower_bound(rows.begin(), rows.end(), id,
                             [](const AnnotationRecord& r, const ItemId& k) { return r.item < k; });
  for (; lo != rows.end() && lo->item == id; ++lo) out.push_back(&*lo);
  return out;
}

std::map<std::string, ReviewerKind> AnnotationDataset::reviewers(const std::string& paper_id) const {
  std::map<std::string, ReviewerKind> out;
  auto it = by_paper.find(paper_id);
  if (it == by_paper.end()) return out;
  for (const auto& r : it->second) out.emplace(r.item.reviewer_id, r.reviewer_kind);
  return out;
}

std::vector<ItemId> AnnotationDataset::items(const std::string& paper_id) const {
  std::vector<ItemId> out;
  auto it = by_paper.find(paper_id);
  if (it == by_paper.end()) return out;
  for (const auto& r : it->second) {
    if (out.empty() || out.back() != r.item) out.push_back(r.item);
  }
  return out;
}

std::optional<ReviewerKind> AnnotationDataset::kind_of(const std::string& paper_id,
                                                       const std::string& reviewer_id) const {
  auto it = by_paper.find(paper_id);
  if (it == by_paper.end()) return std::nullopt;
  for (const auto& r : it->second) {
    if (r.item.reviewer_id == reviewer_id) return r.reviewer_kind;
  }
  return std::nullopt;
}

namespace {

const std::set<std::string>& annotation_fields() {
  static const std::set<std::string> fields{"paper_id",     "reviewer_id", "reviewer_kind",
                                            "item_index",   "annotator_id", "correctness",
                                            "significance", "evidence"};
  return fields;
}

std::string at_line(std::size_t line_no) { return "line " + std::to_string(line_no) + ": "; }

std::string required_string(const json& j, const char* key, std::size_t line_no) {
  const auto& v = j.at(key);
  if (!v.is_string() || v.get_ref<const std::string&>().empty()) {
    fail(ErrorCode::SchemaError, at_line(line_no) + "'" + key + "' must be a non-empty string");
  }
  return v.get<std::string>();
}

}  // namespace

AnnotationRecord parse_annotation_line(std::string_view line, std::size_t line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::SchemaError, at_line(line_no) + "not a JSON object (" + e.what() + ")");
  }
  if (!j.is_object()) fail(ErrorCode::SchemaError, at_line(line_no) + "not a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!annotation_fields().count(key)) {
      fail(ErrorCode::SchemaError, at_line(line_no) + "unexpected field '" + key + "'");
    }
  }
  for (const auto& key : annotation_fields()) {
    if (!j.contains(key)) fail(ErrorCode::SchemaError, at_line(line_no) + "missing field '" + key + "'");
  }

  AnnotationRecord r;
  r.item.paper_id = required_string(j, "paper_id", line_no);
  r.item.reviewer_id = required_string(j, "reviewer_id", line_no);
  r.annotator_id = required_string(j, "annotator_id", line_no);
  const auto& idx = j.at("item_index");
  if (!idx.is_number_integer() || idx.get<long long>() < 1 || idx.get<long long>() > 1'000'000) {
    fail(ErrorCode::SchemaError, at_line(line_no) + "'item_index' must be an integer >= 1");
  }
  r.item.index = static_cast<int>(idx.get<long long>());

  try {
    r.reviewer_kind = parse_reviewer_kind(required_string(j, "reviewer_kind", line_no));
    r.correctness = parse_correctness(required_string(j, "correctness", line_no));
    const auto& s = j.at("significance");
    if (!s.is_null()) {
      if (!s.is_string()) fail(ErrorCode::SchemaError, "'significance' must be a string or null");
      r.significance = parse_significance(s.get<std::string>());
    }
    const auto& e = j.at("evidence");
    if (!e.is_null()) {
      if (!e.is_string()) fail(ErrorCode::SchemaError, "'evidence' must be a string or null");
      r.evidence = parse_evidence(e.get<std::string>());
    }
    check_cascade(r.correctness, r.significance, r.evidence);
  } catch (const Error& err) {
    if (err.detail().starts_with("line ")) throw;
    fail(err.code(), at_line(line_no) + err.detail());
  }
  return r;
}

AnnotationDataset parse_annotation_dataset(std::string_view text) {
  if (!is_valid_utf8(text)) fail(ErrorCode::InvalidEncoding, "annotation dataset is not valid UTF-8");
  AnnotationDataset ds;
  std::map<std::pair<ItemId, std::string>, std::size_t> seen;
  const auto lines = detail::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (detail::trim(lines[i]).empty()) continue;
    AnnotationRecord r = parse_annotation_line(lines[i], i + 1);
    auto key = std::make_pair(r.item, r.annotator_id);
    if (auto it = seen.find(key); it != seen.end()) {
      fail(ErrorCode::DuplicateAnnotatorItem,
           at_line(i + 1) + "annotator " + r.annotator_id + " already labeled " + r.item.str() +
               " on line " + std::to_string(it->second));
    }
    seen.emplace(std::move(key), i + 1);
    // A reviewer has one kind throughout a paper.
    for (const auto& other : ds.by_paper[r.item.paper_id]) {
      if (other.item.reviewer_id == r.item.reviewer_id && other.reviewer_kind != r.reviewer_kind) {
        fail(ErrorCode::SchemaError, at_line(i + 1) + "reviewer " + r.item.reviewer_id +
                                         " has conflicting reviewer_kind values");
      }
    }
    ds.by_paper[r.item.paper_id].push_back(std::move(r));
  }
  for (auto& [paper, rows] : ds.by_paper) {
    std::sort(rows.begin(), rows.end(), [](const AnnotationRecord& a, const AnnotationRecord& b) {
      return std::tie(a.item, a.annotator_id) < std::tie(b.item, b.annotator_id);
    });
  }
  return ds;
}

AnnotationDataset load_annotation_dataset(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return parse_annotation_dataset(text);
  } catch (const Error& e) {
    fail(e.code(), path.string() + ": " + e.detail());
  }
}

std::string serialize_annotation_line(const AnnotationRecord& r) {
  // Fixed field order for stable output.
  std::string out = "{";
  auto field = [&](const char* key, const json& v, bool last = false) {
    out += json(key).dump() + ":" + v.dump();
    if (!last) out += ",";
  };
  field("paper_id", r.item.paper_id);
  field("reviewer_id", r.item.reviewer_id);
  field("reviewer_kind", std::string(to_string(r.reviewer_kind)));
  field("item_index", r.item.index);
  field("annotator_id", r.annotator_id);
  field("correctness", std::string(to_string(r.correctness)));
  field("significance", r.significance ? json(std::string(to_string(*r.significance))) : json(nullptr));
  field("evidence", r.evidence ? json(std::string(to_string(*r.evidence))) : json(nullptr), true);
  out += "}";
  return out;
}

// ---------------------------------------------------------------------------

BundleReport validate_bundle(const PaperBundle& bundle) {
  BundleReport report;
  if (bundle.paper_id.empty()) report.errors.emplace_back("empty paper_id");
  if (detail::trim(bundle.preprint_text).empty()) report.errors.emplace_back("empty preprint text");
  std::set<std::string> names;
  for (const auto& f : bundle.figures) {
    if (f.filename.empty()) report.errors.emplace_back("figure with empty filename");
    else if (!names.insert(f.filename).second)
      report.errors.push_back("duplicate figure filename '" + f.filename + "'");
  }
  std::set<std::string> supp;
  for (const auto& [name, text] : bundle.supplementary) {
    if (!supp.insert(name).second) report.errors.push_back("duplicate supplementary file '" + name + "'");
  }
  std::set<std::string> code;
  for (const auto& [name, text] : bundle.code_files) {
    if (!code.insert(name).second) report.errors.push_back("duplicate code file '" + name + "'");
  }
  if (bundle.figures.empty()) report.notices.emplace_back("no figures");
  if (bundle.supplementary.empty()) report.notices.emplace_back("no supplementary");
  if (bundle.code_files.empty()) report.notices.emplace_back("no code");
  return report;
}

namespace {

std::vector<std::pair<std::string, std::string>> read_tree(const std::filesystem::path& root) {
  std::vector<std::pair<std::string, std::string>> out;
  if (!std::filesystem::is_directory(root)) return out;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    std::string text = read_text_file(entry.path());
    const std::string rel = entry.path().lexically_relative(root).generic_string();
    if (!is_valid_utf8(text)) continue;  // binary assets are not judge context
    out.emplace_back(rel, std::move(text));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

PaperBundle load_bundle(const std::filesystem::path& dir, std::string paper_id) {
  PaperBundle b;
  b.paper_id = std::move(paper_id);
  const auto pre = dir / "preprint";
  b.preprint_text = read_text_file(pre / "preprint.md");
  if (!is_valid_utf8(b.preprint_text)) {
    fail(ErrorCode::InvalidEncoding, (pre / "preprint.md").string() + " is not valid UTF-8");
  }
  const auto images = pre / "images_list.json";
  if (std::filesystem::exists(images)) {
    json j;
    try {
      j = json::parse(read_text_file(images));
    } catch (const json::parse_error& e) {
      fail(ErrorCode::SchemaError, images.string() + ": " + e.what());
    }
    if (!j.is_array()) fail(ErrorCode::SchemaError, images.string() + ": expected an array");
    for (const auto& f : j) {
      if (!f.is_object() || !f.contains("filename") || !f["filename"].is_string()) {
        fail(ErrorCode::SchemaError, images.string() + ": entry without a filename");
      }
      Figure fig;
      fig.filename = f["filename"].get<std::string>();
      if (f.contains("caption") && f["caption"].is_string()) fig.caption = f["caption"].get<std::string>();
      b.figures.push_back(std::move(fig));
    }
  }
  b.supplementary = read_tree(pre / "supplementary");
  b.code_files = read_tree(pre / "code");
  return b;
}

}  // namespace revbench
