#include "revbench/judge.hpp"

#include <algorithm>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <set>
#include <thread>

#include <openssl/evp.h>
#include <unistd.h>

#include <httplib.h>
#include <json.hpp>

#include "revbench_templates.hpp"
#include "revbench/rng.hpp"
#include "text_util.hpp"

namespace revbench {

using nlohmann::json;

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    fail(ErrorCode::InvariantViolation, "SHA-256 computation failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xF];
  }
  return out;
}

std::string_view to_string(JudgeKind k) { return k == JudgeKind::Similarity ? "similarity" : "meta_review"; }

JudgeRequest make_similarity_request(std::string template_id, std::string paper_id, std::string context,
                                     ReviewItem a, ReviewItem b) {
  JudgeRequest r;
  r.kind = JudgeKind::Similarity;
  r.template_id = std::move(template_id);
  r.paper_id = std::move(paper_id);
  r.paper_context = std::move(context);
  r.items = {std::move(a), std::move(b)};
  return r;
}

JudgeRequest make_meta_review_request(std::string template_id, std::string paper_id, std::string context,
                                      ReviewItem item) {
  JudgeRequest r;
  r.kind = JudgeKind::MetaReview;
  r.template_id = std::move(template_id);
  r.paper_id = std::move(paper_id);
  r.paper_context = std::move(context);
  r.items = {std::move(item)};
  return r;
}

namespace {

json item_json(const ReviewItem& item) {
  json ev = json::array();
  for (const auto& e : item.evidence) {
    ev.push_back({{"source", std::string(to_string(e.source))},
                  {"quote", e.quote},
                  {"comment", e.comment},
                  {"citation_link", e.citation_link ? json(*e.citation_link) : json(nullptr)}});
  }
  json criteria = json::array();
  for (const auto& c : item.criteria) criteria.push_back(c.raw);
  return {{"id", item.id.str()},
          {"title", item.title},
          {"main_point", item.main_point},
          {"criteria", criteria},
          {"evidence", ev}};
}

void check_request(const JudgeRequest& req) {
  const std::size_t want = req.kind == JudgeKind::Similarity ? 2 : 1;
  if (req.items.size() != want) {
    fail(ErrorCode::InvariantViolation, std::string(to_string(req.kind)) + " request with " +
                                            std::to_string(req.items.size()) + " items");
  }
}

}  // namespace

std::string canonical_request(const JudgeRequest& req) {
  check_request(req);
  std::vector<const ReviewItem*> items;
  for (const auto& i : req.items) items.push_back(&i);
  if (req.kind == JudgeKind::Similarity && items[1]->id < items[0]->id) std::swap(items[0], items[1]);
  json payload = json::array();
  for (const auto* i : items) payload.push_back(item_json(*i));
  // nlohmann objects are key-sorted, so dump() is canonical.
  const json j = {{"kind", std::string(to_string(req.kind))},
                  {"template_id", req.template_id},
                  {"paper_id", req.paper_id},
                  {"payload", payload},
                  {"context_sha256", sha256_hex(req.paper_context)}};
  return j.dump();
}

std::string cache_key(const JudgeRequest& req) { return sha256_hex(canonical_request(req)); }

// ---------------------------------------------------------------------------

std::string extract_json(std::string_view text) {
  for (std::size_t start = 0; start < text.size(); ++start) {
    if (text[start] != '{' && text[start] != '[') continue;
    // Find the matching close bracket, skipping string literals.
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    std::size_t end = std::string_view::npos;
    for (std::size_t i = start; i < text.size(); ++i) {
      const char c = text[i];
      if (in_string) {
        if (escaped) escaped = false;
        else if (c == '\\') escaped = true;
        else if (c == '"') in_string = false;
        continue;
      }
      if (c == '"') in_string = true;
      else if (c == '{' || c == '[') ++depth;
      else if (c == '}' || c == ']') {
        if (--depth == 0) {
          end = i;
          break;
        }
      }
    }
    if (end == std::string_view::npos) continue;
    const std::string_view candidate = text.substr(start, end - start + 1);
    if (json::accept(candidate)) return std::string(candidate);
  }
  fail(ErrorCode::UnparseableResponse, "no JSON value in judge reply");
}

namespace {

constexpr std::array<std::string_view, 4> kCategories{
    "different_target",
    "same_target_different_criticism",
    "same_criticism_different_evidence",
    "same_criticism_same_evidence",
};

}  // namespace

int parse_similarity_response(std::string_view text, std::string* reasoning) {
  const json j = json::parse(extract_json(text));
  if (!j.is_object()) fail(ErrorCode::UnparseableResponse, "similarity reply is not an object");
  std::optional<int> ordinal;
  if (j.contains("ordinal")) {
    const auto& o = j["ordinal"];
    if (o.is_number_integer()) {
      ordinal = o.get<int>();
    } else if (o.is_string()) {
      const std::string s = o.get<std::string>();
      if (s.size() == 1 && s[0] >= '0' && s[0] <= '3') ordinal = s[0] - '0';
    }
    if (!ordinal || *ordinal < 0 || *ordinal > 3) {
      fail(ErrorCode::UnparseableResponse, "similarity ordinal outside 0..3: " + o.dump());
    }
  }
  if (j.contains("category") && j["category"].is_string()) {
    const std::string cat = detail::to_lower(detail::trim(j["category"].get<std::string>()));
    std::optional<int> from_cat;
    for (std::size_t k = 0; k < kCategories.size(); ++k) {
      if (cat == kCategories[k]) from_cat = static_cast<int>(k);
    }
    if (from_cat && ordinal && *from_cat != *ordinal) {
      fail(ErrorCode::UnparseableResponse, "similarity category and ordinal disagree");
    }
    if (!ordinal) ordinal = from_cat;
  }
  if (!ordinal) fail(ErrorCode::UnparseableResponse, "similarity reply has no ordinal");
  if (reasoning && j.contains("reasoning") && j["reasoning"].is_string()) {
    *reasoning = j["reasoning"].get<std::string>();
  }
  return *ordinal;
}

void check_prediction_consistency(const LabelState& labels, JointClass prediction) {
  if (prediction == JointClass::DisagreeOnCorrectness) return;
  const LabelState agreed = consensus_labels(prediction);
  auto inconsistent = [&](const std::string& why) {
    fail(ErrorCode::InconsistentPrediction,
         "prediction '" + std::string(to_string(prediction)) + "' contradicts " + why);
  };
  if (agreed.correctness != labels.correctness) {
    inconsistent("correctness '" + std::string(to_string(labels.correctness)) + "'");
  }
  if (agreed.significance && agreed.significance != labels.significance) {
    inconsistent("significance '" +
                 std::string(labels.significance ? to_string(*labels.significance) : "null") + "'");
  }
  if (agreed.evidence && agreed.evidence != labels.evidence) {
    inconsistent("evidence '" + std::string(labels.evidence ? to_string(*labels.evidence) : "null") + "'");
  }
}

namespace {

[[noreturn]] void schema(const std::string& what) { fail(ErrorCode::SchemaError, "meta-review: " + what); }

const json& member(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) schema(where + " lacks '" + key + "'");
  return obj[key];
}

std::optional<std::string> nullable_string(const json& v, const std::string& where) {
  if (v.is_null()) return std::nullopt;
  if (!v.is_string()) schema(where + " must be a string or null");
  return v.get<std::string>();
}

MetaReviewItem parse_item(const json& it, const std::string& reviewer_id, const std::string& where) {
  if (!it.is_object()) schema(where + " is not an object");
  MetaReviewItem m;
  m.reviewer_id = reviewer_id;
  const auto& num = member(it, "item_number", where);
  if (!num.is_number_integer() || num.get<long long>() < 1) schema(where + ".item_number must be an integer >= 1");
  m.item_number = num.get<int>();
  const auto& reasoning = member(it, "reasoning", where);
  if (!reasoning.is_string()) schema(where + ".reasoning must be a string");
  m.reasoning = reasoning.get<std::string>();
  const auto& corr = member(it, "correctness", where);
  if (!corr.is_string()) schema(where + ".correctness must be a string");
  m.labels.correctness = parse_correctness(corr.get<std::string>());
  if (auto s = nullable_string(member(it, "significance", where), where + ".significance")) {
    m.labels.significance = parse_significance(*s);
  }
  if (auto e = nullable_string(member(it, "evidence", where), where + ".evidence")) {
    m.labels.evidence = parse_evidence(*e);
  }
  const auto& pred = member(it, "prediction_of_expert_judgments", where);
  if (!pred.is_string()) schema(where + ".prediction_of_expert_judgments must be a string");
  m.prediction = parse_joint_class(pred.get<std::string>());
  check_cascade(m.labels.correctness, m.labels.significance, m.labels.evidence);
  check_prediction_consistency(m.labels, m.prediction);
  return m;
}

std::vector<MetaReviewItem> parse_document(const json& doc) {
  if (!doc.is_object()) schema("document is not an object");
  const auto& pid = member(doc, "paper_id", "document");
  if (!pid.is_string() && !pid.is_number()) schema("paper_id must be a string");
  const auto& reviewers = member(doc, "reviewers", "document");
  if (!reviewers.is_array()) schema("reviewers must be an array");
  std::vector<MetaReviewItem> out;
  for (std::size_t r = 0; r < reviewers.size(); ++r) {
    const std::string where = "reviewers[" + std::to_string(r) + "]";
    const auto& rev = reviewers[r];
    if (!rev.is_object()) schema(where + " is not an object");
    const auto& rid = member(rev, "reviewer_id", where);
    if (!rid.is_string()) schema(where + ".reviewer_id must be a string");
    const auto& items = member(rev, "items", where);
    if (!items.is_array()) schema(where + ".items must be an array");
    std::set<int> seen;
    for (std::size_t i = 0; i < items.size(); ++i) {
      auto m = parse_item(items[i], rid.get<std::string>(), where + ".items[" + std::to_string(i) + "]");
      if (!seen.insert(m.item_number).second) {
        schema(where + " repeats item_number " + std::to_string(m.item_number));
      }
      out.push_back(std::move(m));
    }
  }
  return out;
}

}  // namespace

std::vector<MetaReviewItem> validate_meta_review_document(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    schema(std::string("not valid JSON (") + e.what() + ")");
  }
  return parse_document(doc);
}

MetaReviewItem parse_meta_review_response(std::string_view text) {
  const json j = json::parse(extract_json(text));
  try {
    if (j.is_object() && j.contains("reviewers")) {
      auto items = parse_document(j);
      if (items.size() != 1) {
        fail(ErrorCode::SchemaError, "expected exactly one item, got " + std::to_string(items.size()));
      }
      return items.front();
    }
    std::string reviewer;
    if (j.is_object() && j.contains("reviewer_id") && j["reviewer_id"].is_string()) {
      reviewer = j["reviewer_id"].get<std::string>();
    }
    return parse_item(j, reviewer, "item");
  } catch (const Error& e) {
    if (e.code() == ErrorCode::SchemaError) fail(ErrorCode::UnparseableResponse, e.detail());
    throw;
  }
}

MetaLabelSet parse_meta_labels(std::string_view text) {
  MetaLabelSet set;
  const auto lines = detail::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (detail::trim(lines[i]).empty()) continue;
    const std::string where = "line " + std::to_string(i + 1) + ": ";
    try {
      const json j = json::parse(lines[i]);
      if (!j.is_object()) fail(ErrorCode::SchemaError, "not an object");
      for (const char* k : {"paper_id", "reviewer_id", "item_index", "correctness", "significance", "evidence"}) {
        if (!j.contains(k)) fail(ErrorCode::SchemaError, std::string("missing field '") + k + "'");
      }
      if (!j["item_index"].is_number_integer() || j["item_index"].get<long long>() < 1) {
        fail(ErrorCode::SchemaError, "'item_index' must be an integer >= 1");
      }
      ItemId id{j["paper_id"].get<std::string>(), j["reviewer_id"].get<std::string>(), j["item_index"].get<int>()};
      LabelState s;
      s.correctness = parse_correctness(j["correctness"].get<std::string>());
      if (!j["significance"].is_null()) s.significance = parse_significance(j["significance"].get<std::string>());
      if (!j["evidence"].is_null()) s.evidence = parse_evidence(j["evidence"].get<std::string>());
      check_cascade(s.correctness, s.significance, s.evidence);
      if (j.contains("prediction_of_expert_judgments") && !j["prediction_of_expert_judgments"].is_null()) {
        const JointClass p = parse_joint_class(j["prediction_of_expert_judgments"].get<std::string>());
        check_prediction_consistency(s, p);
        set.predictions[id] = p;
      }
      if (!set.labels.emplace(id, s).second) {
        fail(ErrorCode::SchemaError, "duplicate meta labels for " + id.str());
      }
    } catch (const json::exception& e) {
      fail(ErrorCode::SchemaError, where + e.what());
    } catch (const Error& e) {
      fail(e.code(), where + e.detail());
    }
  }
  return set;
}

MetaLabelSet load_meta_labels(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return parse_meta_labels(text);
  } catch (const Error& e) {
    fail(e.code(), path.string() + ": " + e.detail());
  }
}

std::string serialize_meta_labels(const MetaLabelSet& set) {
  std::string out;
  for (const auto& [id, s] : set.labels) {
    json pred = nullptr;
    if (auto it = set.predictions.find(id); it != set.predictions.end()) pred = std::string(to_string(it->second));
    out += "{\"paper_id\":" + json(id.paper_id).dump() + ",\"reviewer_id\":" + json(id.reviewer_id).dump() +
           ",\"item_index\":" + std::to_string(id.index) + ",\"correctness\":" +
           json(std::string(to_string(s.correctness))).dump() + ",\"significance\":" +
           (s.significance ? json(std::string(to_string(*s.significance))) : json(nullptr)).dump() +
           ",\"evidence\":" + (s.evidence ? json(std::string(to_string(*s.evidence))) : json(nullptr)).dump() +
           ",\"prediction_of_expert_judgments\":" + pred.dump() + "}\n";
  }
  return out;
}

// ---------------------------------------------------------------------------

TemplateSet TemplateSet::defaults() {
  TemplateSet t;
  t.texts_["similarity"] = detail::k_template_similarity;
  t.texts_["meta_review"] = detail::k_template_meta_review;
  return t;
}

TemplateSet TemplateSet::load(const std::filesystem::path& dir) {
  TemplateSet t = defaults();
  if (!std::filesystem::is_directory(dir)) fail(ErrorCode::IoError, "template directory " + dir.string() + " not found");
  for (auto& [name, text] : t.texts_) {
    const auto file = dir / (name + ".txt");
    if (!std::filesystem::exists(file)) continue;
    text = read_text_file(file);
    if (!is_valid_utf8(text)) fail(ErrorCode::InvalidEncoding, file.string() + " is not valid UTF-8");
  }
  return t;
}

const std::string& TemplateSet::text(const std::string& name) const {
  auto it = texts_.find(name);
  if (it == texts_.end()) fail(ErrorCode::InvariantViolation, "no template named " + name);
  return it->second;
}

std::string TemplateSet::id(const std::string& name) const { return name + "@" + sha256_hex(text(name)).substr(0, 16); }

std::string render_template(std::string_view text, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto open = text.find("{{", pos);
    if (open == std::string_view::npos) {
      out.append(text.substr(pos));
      break;
    }
    const auto close = text.find("}}", open + 2);
    if (close == std::string_view::npos) {
      out.append(text.substr(pos));
      break;
    }
    out.append(text.substr(pos, open - pos));
    const std::string key(detail::trim(text.substr(open + 2, close - open - 2)));
    if (auto it = values.find(key); it != values.end()) {
      out += it->second;
    } else {
      out.append(text.substr(open, close + 2 - open));
    }
    pos = close + 2;
  }
  return out;
}

namespace {

std::size_t utf8_floor(std::string_view s, std::size_t n) {
  if (n >= s.size()) return s.size();
  while (n > 0 && (static_cast<unsigned char>(s[n]) & 0xC0) == 0x80) --n;
  return n;
}

}  // namespace

std::string paper_context(const PaperBundle& bundle, std::size_t budget) {
  std::string out = bundle.preprint_text.substr(0, utf8_floor(bundle.preprint_text, budget));
  if (out.size() < bundle.preprint_text.size()) return out + "\n[truncated]";
  std::string captions;
  for (const auto& f : bundle.figures) {
    if (!f.caption.empty()) captions += f.filename + ": " + f.caption + "\n";
  }
  if (!captions.empty()) {
    const std::string block = "\n\nFigure captions:\n" + captions;
    if (out.size() + block.size() <= budget) out += block;
  }
  return out;
}

// ---------------------------------------------------------------------------

MockBackend::MockBackend(Options options) : opt_(std::move(options)) {}

namespace {

json meta_document(const ItemId& id, const LabelState& s, JointClass prediction) {
  const json item = {
      {"item_number", id.index},
      {"reasoning", "fixture"},
      {"correctness", std::string(to_string(s.correctness))},
      {"significance", s.significance ? json(std::string(to_string(*s.significance))) : json(nullptr)},
      {"evidence", s.evidence ? json(std::string(to_string(*s.evidence))) : json(nullptr)},
      {"prediction_of_expert_judgments", std::string(to_string(prediction))},
  };
  return {{"paper_id", id.paper_id}, {"reviewers", json::array({{{"reviewer_id", id.reviewer_id}, {"items", json::array({item})}}})}};
}

}  // namespace

std::string MockBackend::complete(const Prompt& /*prompt*/, const JudgeRequest& req) {
  const std::size_t n = dispatches_.fetch_add(1);
  if (n < opt_.transient_failures) throw TransportError("mock transient failure", true, 503);
  check_request(req);

  const std::string hash = cache_key(req);
  Rng rng(derive_seed(opt_.seed, hash));
  if (req.kind == JudgeKind::Similarity) {
    int ordinal = 0;
    if (auto v = opt_.similarity.find(req.items[0].id, req.items[1].id)) {
      ordinal = v->ordinal;
    } else {
      switch (opt_.similarity_default) {
        case Default::Similar: ordinal = 3; break;
        case Default::Dissimilar: ordinal = 0; break;
        case Default::Hashed: ordinal = static_cast<int>(rng.below(4)); break;
        case Default::Fail: throw TransportError("mock has no verdict for the pair", false, 404);
      }
    }
    const json reply = {{"reasoning", "fixture"},
                        {"category", std::string(kCategories[static_cast<std::size_t>(ordinal)])},
                        {"ordinal", ordinal}};
    return "```json\n" + reply.dump() + "\n```";
  }

  const ItemId& id = req.items[0].id;
  LabelState s;
  std::optional<JointClass> prediction;
  if (auto it = opt_.meta.labels.find(id); it != opt_.meta.labels.end()) {
    s = it->second;
    if (auto p = opt_.meta.predictions.find(id); p != opt_.meta.predictions.end()) prediction = p->second;
  } else {
    const auto states = legal_label_states();
    switch (opt_.meta_default) {
      case Default::Similar: s = states[4]; break;  // Correct, Significant, Sufficient
      case Default::Dissimilar: s = states[0]; break;
      case Default::Hashed: s = states[rng.below(states.size())]; break;
      case Default::Fail: throw TransportError("mock has no labels for the item", false, 404);
    }
  }
  if (!prediction) prediction = joint_class_of(s, s);
  return meta_document(id, s, *prediction).dump(2);
}

// ---------------------------------------------------------------------------

RemoteBackend::Options RemoteBackend::options_from_env() {
  auto env = [](const char* k) -> std::string {
    const char* v = std::getenv(k);
    return v ? v : "";
  };
  Options o;
  o.url = env("REVBENCH_JUDGE_URL");
  o.token = env("REVBENCH_JUDGE_TOKEN");
  o.model = env("REVBENCH_JUDGE_MODEL");
  if (o.url.empty()) fail(ErrorCode::TransportFailure, "REVBENCH_JUDGE_URL is not set");
  if (o.model.empty()) fail(ErrorCode::TransportFailure, "REVBENCH_JUDGE_MODEL is not set");
  return o;
}

RemoteBackend::RemoteBackend(Options options) : opt_(std::move(options)) {
  const auto scheme_end = opt_.url.find("://");
  if (scheme_end == std::string::npos) fail(ErrorCode::TransportFailure, "judge URL lacks a scheme: " + opt_.url);
  const auto path_start = opt_.url.find('/', scheme_end + 3);
  scheme_host_ = opt_.url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : opt_.url.substr(path_start);
}

std::string RemoteBackend::complete(const Prompt& prompt, const JudgeRequest& /*req*/) {
  httplib::Client client(scheme_host_);
  client.set_connection_timeout(opt_.timeout);
  client.set_read_timeout(opt_.timeout);
  client.set_write_timeout(opt_.timeout);
  httplib::Headers headers;
  if (!opt_.token.empty()) headers.emplace("Authorization", "Bearer " + opt_.token);
  json messages = json::array();
  if (!prompt.system.empty()) messages.push_back({{"role", "system"}, {"content", prompt.system}});
  messages.push_back({{"role", "user"}, {"content", prompt.user}});
  const json body = {{"model", opt_.model}, {"messages", messages}, {"temperature", opt_.temperature}};

  auto res = client.Post(path_, headers, body.dump(), "application/json");
  if (!res) throw TransportError("judge request failed: " + httplib::to_string(res.error()), true);
  const int status = res->status;
  if (status == 429 || status >= 500) {
    throw TransportError("judge returned HTTP " + std::to_string(status), true, status);
  }
  if (status < 200 || status >= 300) {
    throw TransportError("judge returned HTTP " + std::to_string(status) + ": " + res->body.substr(0, 200), false,
                         status);
  }
  try {
    const json j = json::parse(res->body);
    const auto& content = j.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) fail(ErrorCode::UnparseableResponse, "judge reply content is not a string");
    return content.get<std::string>();
  } catch (const json::exception& e) {
    fail(ErrorCode::UnparseableResponse, std::string("judge reply envelope: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) fail(ErrorCode::IoError, "cannot create cache directory " + dir_.string() + ": " + ec.message());
}

std::optional<std::string> ResponseCache::get(const std::string& hash) const {
  const auto file = dir_ / (hash + ".json");
  std::error_code ec;
  if (!std::filesystem::exists(file, ec)) return std::nullopt;
  try {
    const json j = json::parse(read_text_file(file));
    if (j.contains("response") && j["response"].is_string()) return j["response"].get<std::string>();
  } catch (const std::exception&) {
  }
  return std::nullopt;
}

namespace {

std::string cache_timestamp() {
  std::time_t t = std::time(nullptr);
  if (const char* sde = std::getenv("SOURCE_DATE_EPOCH")) {
    char* end = nullptr;
    const long long v = std::strtoll(sde, &end, 10);
    if (end && *end == '\0' && v >= 0) t = static_cast<std::time_t>(v);
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json verdict_json(const JudgeVerdict& v) {
  if (v.kind == JudgeKind::Similarity) return {{"ordinal", v.ordinal}};
  json j = json::object();
  if (v.labels) {
    j["correctness"] = std::string(to_string(v.labels->correctness));
    j["significance"] = v.labels->significance ? json(std::string(to_string(*v.labels->significance))) : json(nullptr);
    j["evidence"] = v.labels->evidence ? json(std::string(to_string(*v.labels->evidence))) : json(nullptr);
  }
  if (v.prediction) j["prediction_of_expert_judgments"] = std::string(to_string(*v.prediction));
  return j;
}

std::atomic<unsigned long> temp_counter{0};

}  // namespace

void ResponseCache::put(const std::string& hash, const std::string& canonical_request,
                        const std::string& raw_response, const JudgeVerdict& verdict) const {
  const auto final_path = dir_ / (hash + ".json");
  std::error_code ec;
  if (std::filesystem::exists(final_path, ec)) return;
  const json doc = {{"request_hash", hash},
                    {"request", json::parse(canonical_request)},
                    {"response", raw_response},
                    {"verdict", verdict_json(verdict)},
                    {"timestamp", cache_timestamp()}};
  const auto tmp = dir_ / ("." + hash + "." + std::to_string(::getpid()) + "." +
                           std::to_string(temp_counter.fetch_add(1)) + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoError, "cannot write " + tmp.string());
    out << doc.dump(2) << '\n';
    if (!out.flush()) fail(ErrorCode::IoError, "cannot write " + tmp.string());
  }
  // A hard link publishes the file only if no writer got there first.
  std::filesystem::create_hard_link(tmp, final_path, ec);
  if (ec && !std::filesystem::exists(final_path)) {
    std::error_code ec2;
    std::filesystem::rename(tmp, final_path, ec2);
    if (ec2) fail(ErrorCode::IoError, "cannot publish cache file " + final_path.string() + ": " + ec2.message());
    return;
  }
  std::filesystem::remove(tmp, ec);
}

// ---------------------------------------------------------------------------

Judge::Judge(std::shared_ptr<JudgeBackend> backend, TemplateSet templates, JudgeOptions options)
    : backend_(std::move(backend)), templates_(std::move(templates)), opt_(std::move(options)) {
  if (!backend_) fail(ErrorCode::InvariantViolation, "judge without a backend");
  if (opt_.max_attempts == 0) opt_.max_attempts = 1;
  if (opt_.max_in_flight == 0) opt_.max_in_flight = 1;
  if (opt_.cache_dir) cache_.emplace(*opt_.cache_dir);
}

namespace {

std::string item_markdown(const ReviewItem& item) {
  Review r;
  r.items = {item};
  std::set<int> seen;
  for (const auto& e : item.evidence) {
    if (e.citation_index && e.citation_link && seen.insert(*e.citation_index).second) {
      r.citations.push_back(Citation{*e.citation_index, *e.citation_link, e.citation_link});
    }
  }
  return serialize_review_markdown(r);
}

std::pair<std::string, std::string> split_sections(const std::string& text) {
  const auto sys = text.find("[system]\n");
  const auto usr = text.find("[user]\n");
  if (sys == std::string::npos || usr == std::string::npos || usr < sys) return {"", text};
  return {std::string(detail::trim(text.substr(sys + 9, usr - sys - 9))),
          std::string(detail::trim(text.substr(usr + 7)))};
}

}  // namespace

Prompt Judge::render(const JudgeRequest& req) const {
  check_request(req);
  const std::string name = req.kind == JudgeKind::Similarity ? "similarity" : "meta_review";
  std::map<std::string, std::string> values{{"paper_id", req.paper_id}, {"paper_context", req.paper_context}};
  if (req.kind == JudgeKind::Similarity) {
    values["item_a"] = item_markdown(req.items[0]);
    values["item_b"] = item_markdown(req.items[1]);
  } else {
    values["item"] = item_markdown(req.items[0]);
    values["reviewer_id"] = req.items[0].id.reviewer_id;
    values["item_number"] = std::to_string(req.items[0].id.index);
  }
  auto [sys, usr] = split_sections(templates_.text(name));
  Prompt p{render_template(sys, values), render_template(usr, values)};
  if (p.system.size() + p.user.size() > opt_.prompt_limit) {
    fail(ErrorCode::ContextOverflow, "rendered " + name + " prompt is " +
                                         std::to_string(p.system.size() + p.user.size()) +
                                         " bytes; the limit is " + std::to_string(opt_.prompt_limit));
  }
  return p;
}

std::string Judge::fetch(const JudgeRequest& req, const std::string& hash, bool& from_cache) {
  {
    std::lock_guard lock(mu_);
    if (auto it = memory_.find(hash); it != memory_.end()) {
      from_cache = true;
      return it->second;
    }
  }
  if (cache_) {
    if (auto hit = cache_->get(hash)) {
      from_cache = true;
      return *hit;
    }
  }
  from_cache = false;
  const Prompt prompt = render(req);
  for (std::size_t attempt = 1;; ++attempt) {
    dispatches_.fetch_add(1);
    try {
      return backend_->complete(prompt, req);
    } catch (const TransportError& e) {
      if (!e.retryable() || attempt >= opt_.max_attempts) {
        fail(ErrorCode::TransportFailure, e.detail() + " (after " + std::to_string(attempt) +
                                              " attempt" + (attempt == 1 ? "" : "s") + ")");
      }
      if (opt_.backoff.count() > 0) std::this_thread::sleep_for(opt_.backoff * (1LL << (attempt - 1)));
    }
  }
}

JudgeVerdict Judge::run(const JudgeRequest& req) {
  const std::string canonical = canonical_request(req);
  const std::string hash = sha256_hex(canonical);
  const auto start = std::chrono::steady_clock::now();
  JudgeVerdict v;
  v.kind = req.kind;
  v.request_hash = hash;
  v.raw_response = fetch(req, hash, v.from_cache);
  v.latency = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
  try {
    if (req.kind == JudgeKind::Similarity) {
      v.ordinal = parse_similarity_response(v.raw_response, &v.reasoning);
    } else {
      MetaReviewItem m = parse_meta_review_response(v.raw_response);
      v.labels = m.labels;
      v.prediction = m.prediction;
      v.reasoning = std::move(m.reasoning);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::UnparseableResponse, std::string("judge reply for ") + req.items[0].id.str() + ": " + e.what());
  } catch (const Error& e) {
    fail(e.code(), std::string("judge reply for ") + req.items[0].id.str() + ": " + e.detail());
  }
  if (!v.from_cache) {
    {
      std::lock_guard lock(mu_);
      memory_.emplace(hash, v.raw_response);
    }
    if (cache_) cache_->put(hash, canonical, v.raw_response, v);
  }
  return v;
}

JudgeVerdict Judge::classify_similarity(const JudgeRequest& req) {
  if (req.kind != JudgeKind::Similarity) fail(ErrorCode::InvariantViolation, "not a similarity request");
  return run(req);
}

JudgeVerdict Judge::judge_meta_review(const JudgeRequest& req) {
  if (req.kind != JudgeKind::MetaReview) fail(ErrorCode::InvariantViolation, "not a meta-review request");
  return run(req);
}

std::vector<JudgeVerdict> Judge::run_all(const std::vector<JudgeRequest>& requests) {
  // One dispatch per distinct request, whatever the duplication in the input.
  std::vector<std::string> hashes;
  std::map<std::string, std::size_t> first;
  std::vector<std::size_t> unique;
  hashes.reserve(requests.size());
  for (std::size_t i = 0; i < requests.size(); ++i) {
    hashes.push_back(cache_key(requests[i]));
    if (first.emplace(hashes.back(), i).second) unique.push_back(i);
  }

  std::vector<std::optional<JudgeVerdict>> results(requests.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr error;
  std::mutex error_mu;
  auto worker = [&] {
    while (!stop.load()) {
      const std::size_t k = next.fetch_add(1);
      if (k >= unique.size()) return;
      const std::size_t i = unique[k];
      try {
        results[i] = run(requests[i]);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
        stop.store(true);
      }
    }
  };
  const std::size_t n_threads = std::min(opt_.max_in_flight, unique.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);

  std::vector<JudgeVerdict> out;
  out.reserve(requests.size());
  for (std::size_t i = 0; i < requests.size(); ++i) {
    const std::size_t src = first.at(hashes[i]);
    out.push_back(*results[src]);
    if (src != i) out.back().from_cache = true;
  }
  return out;
}

// ---------------------------------------------------------------------------

VerdictTable calibrated_verdicts(const VerdictTable& reference, double sensitivity, double specificity,
                                 std::uint64_t seed) {
  std::vector<std::pair<std::uint64_t, std::size_t>> pos;
  std::vector<std::pair<std::uint64_t, std::size_t>> neg;
  const auto entries = reference.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& [k, v] = entries[i];
    const std::uint64_t order = derive_seed(seed, k.first.str() + "|" + k.second.str());
    (is_similar(v) ? pos : neg).emplace_back(order, i);
  }
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());
  const auto hits = static_cast<std::size_t>(std::llround(sensitivity * static_cast<double>(pos.size())));
  const auto false_alarms =
      static_cast<std::size_t>(std::llround((1.0 - specificity) * static_cast<double>(neg.size())));
  VerdictTable out;
  for (std::size_t r = 0; r < pos.size(); ++r) {
    const auto& [k, v] = entries[pos[r].second];
    out.insert(k.first, k.second, SimilarityVerdict{r < hits ? v.ordinal : 1, VerdictSource::Judge});
  }
  for (std::size_t r = 0; r < neg.size(); ++r) {
    const auto& [k, v] = entries[neg[r].second];
    out.insert(k.first, k.second, SimilarityVerdict{r < false_alarms ? 2 : v.ordinal, VerdictSource::Judge});
  }
  return out;
}

JudgeCalibration confusion(const VerdictTable& reference, const VerdictTable& judged) {
  JudgeCalibration c;
  for (const auto& [k, v] : reference.entries()) {
    const bool truth = is_similar(v);
    const bool said = is_similar(judged.ordinal(k.first, k.second));
    if (truth && said) ++c.tp;
    else if (truth) ++c.fn;
    else if (said) ++c.fp;
    else ++c.tn;
  }
  return c;
}

}  // namespace revbench
