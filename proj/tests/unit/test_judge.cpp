#include <gtest/gtest.h>

#include <httplib.h>

#include <json.hpp>
#include <thread>

#include "revbench/judge.hpp"
#include "test_util.hpp"

using namespace revbench;
using nlohmann::json;

namespace {

ReviewItem item(const std::string& reviewer, int index, const std::string& title = "A point") {
  ReviewItem it;
  it.id = ItemId{"p1", reviewer, index};
  it.title = title;
  it.main_point = "The ablation in the second table omits the baseline.";
  return it;
}

json meta_item(const std::string& corr, json sig, json ev, const std::string& pred) {
  return {{"item_number", 1}, {"reasoning", "r"},         {"correctness", corr},
          {"significance", sig}, {"evidence", ev}, {"prediction_of_expert_judgments", pred}};
}

std::string meta_doc(const json& it) {
  return json{{"paper_id", "p1"}, {"reviewers", json::array({{{"reviewer_id", "ai_a"}, {"items", json::array({it})}}})}}
      .dump();
}

JudgeOptions quick() {
  JudgeOptions o;
  o.backoff = std::chrono::milliseconds(0);
  return o;
}

}  // namespace

TEST(Hashing, Sha256KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Hashing, SimilarityKeyIgnoresPairOrder) {
  const auto a = make_similarity_request("t@1", "p1", "ctx", item("h1", 1), item("ai_a", 2));
  const auto b = make_similarity_request("t@1", "p1", "ctx", item("ai_a", 2), item("h1", 1));
  EXPECT_EQ(cache_key(a), cache_key(b));
  const auto c = make_similarity_request("t@2", "p1", "ctx", item("h1", 1), item("ai_a", 2));
  EXPECT_NE(cache_key(a), cache_key(c));
  const auto d = make_similarity_request("t@1", "p1", "ctx2", item("h1", 1), item("ai_a", 2));
  EXPECT_NE(cache_key(a), cache_key(d));
  EXPECT_EQ(canonical_request(a).find("ctx\""), std::string::npos);
}

TEST(Parsing, ExtractJson) {
  EXPECT_EQ(extract_json("Sure.\n```json\n{\"a\": \"}\"}\n```\nDone"), "{\"a\": \"}\"}");
  EXPECT_EQ(extract_json("[1, [2]] trailing"), "[1, [2]]");
  EXPECT_THROW_CODE(extract_json("no json here"), ErrorCode::UnparseableResponse);
  EXPECT_THROW_CODE(extract_json("{\"open\": 1"), ErrorCode::UnparseableResponse);
}

TEST(Parsing, SimilarityReplies) {
  std::string why;
  EXPECT_EQ(parse_similarity_response("{\"ordinal\": 2, \"reasoning\": \"x\"}", &why), 2);
  EXPECT_EQ(why, "x");
  EXPECT_EQ(parse_similarity_response("{\"category\": \"same_criticism_same_evidence\"}"), 3);
  EXPECT_EQ(parse_similarity_response("{\"category\": \"different_target\", \"ordinal\": 0}"), 0);
  EXPECT_THROW_CODE(parse_similarity_response("{\"category\": \"different_target\", \"ordinal\": 1}"),
                    ErrorCode::UnparseableResponse);
  EXPECT_THROW_CODE(parse_similarity_response("{\"ordinal\": 4}"), ErrorCode::UnparseableResponse);
  EXPECT_THROW_CODE(parse_similarity_response("{\"category\": \"similar\"}"), ErrorCode::UnparseableResponse);
  EXPECT_THROW_CODE(parse_similarity_response("[3]"), ErrorCode::UnparseableResponse);
}

TEST(MetaSchema, AcceptsWellFormedDocument) {
  const auto items = validate_meta_review_document(
      meta_doc(meta_item("Correct", "Marginally Significant", "Requires More", "correct_marginal_requires_more")));
  ASSERT_EQ(items.size(), 1u);
  EXPECT_EQ(items[0].reviewer_id, "ai_a");
  EXPECT_EQ(items[0].labels.significance, Significance::MarginallySignificant);
  EXPECT_EQ(items[0].prediction, JointClass::CorrectMarginalRequiresMore);
}

TEST(MetaSchema, RejectsBadShapesAndLabels) {
  EXPECT_THROW_CODE(validate_meta_review_document("{\"paper_id\": \"p1\"}"), ErrorCode::SchemaError);
  EXPECT_THROW_CODE(validate_meta_review_document("not json"), ErrorCode::SchemaError);
  json it = meta_item("Correct", "Significant", "Sufficient", "correct_significant_sufficient");
  it.erase("reasoning");
  EXPECT_THROW_CODE(validate_meta_review_document(meta_doc(it)), ErrorCode::SchemaError);
  EXPECT_THROW_CODE(
      validate_meta_review_document(meta_doc(meta_item("Corect", nullptr, nullptr, "incorrect"))),
      ErrorCode::UnknownLabelString);
  EXPECT_THROW_CODE(validate_meta_review_document(
                        meta_doc(meta_item("Correct", "Significant", "Sufficent", "correct_significant_sufficient"))),
                    ErrorCode::UnknownLabelString);
  EXPECT_THROW_CODE(
      validate_meta_review_document(meta_doc(meta_item("Not Correct", "Significant", nullptr, "incorrect"))),
      ErrorCode::CascadeViolation);
  EXPECT_THROW_CODE(validate_meta_review_document(
                        meta_doc(meta_item("Correct", "Significant", nullptr, "correct_significant_sufficient"))),
                    ErrorCode::CascadeViolation);
}

TEST(MetaSchema, PredictionConsistency) {
  const LabelState nc{Correctness::NotCorrect, {}, {}};
  const LabelState css{Correctness::Correct, Significance::Significant, EvidenceSufficiency::Sufficient};
  EXPECT_NO_THROW(check_prediction_consistency(nc, JointClass::Incorrect));
  EXPECT_NO_THROW(check_prediction_consistency(nc, JointClass::DisagreeOnCorrectness));
  EXPECT_NO_THROW(check_prediction_consistency(css, JointClass::DisagreeOnCorrectness));
  EXPECT_NO_THROW(check_prediction_consistency(css, JointClass::CorrectDisagreeOnSignificance));
  EXPECT_NO_THROW(check_prediction_consistency(css, JointClass::CorrectSignificantDisagreeOnEvidence));
  EXPECT_THROW_CODE(check_prediction_consistency(nc, JointClass::CorrectNotSignificant),
                    ErrorCode::InconsistentPrediction);
  EXPECT_THROW_CODE(check_prediction_consistency(css, JointClass::Incorrect), ErrorCode::InconsistentPrediction);
  EXPECT_THROW_CODE(check_prediction_consistency(css, JointClass::CorrectMarginalSufficient),
                    ErrorCode::InconsistentPrediction);
  EXPECT_THROW_CODE(check_prediction_consistency(css, JointClass::CorrectSignificantRequiresMore),
                    ErrorCode::InconsistentPrediction);
}

TEST(MetaSchema, ResponseShapes) {
  const json it = meta_item("Correct", "Not Significant", nullptr, "correct_not_significant");
  EXPECT_EQ(parse_meta_review_response("```json\n" + meta_doc(it) + "\n```").prediction,
            JointClass::CorrectNotSignificant);
  EXPECT_EQ(parse_meta_review_response(it.dump()).labels.significance, Significance::NotSignificant);
  json two = json::parse(meta_doc(it));
  json second = it;
  second["item_number"] = 2;
  two["reviewers"][0]["items"].push_back(second);
  EXPECT_THROW_CODE(parse_meta_review_response(two.dump()), ErrorCode::UnparseableResponse);
}

TEST(MetaLabelsFile, RoundTripAndErrors) {
  const std::string text =
      "{\"paper_id\":\"p1\",\"reviewer_id\":\"ai_a\",\"item_index\":1,\"correctness\":\"Correct\","
      "\"significance\":\"Significant\",\"evidence\":\"Sufficient\","
      "\"prediction_of_expert_judgments\":\"correct_significant_sufficient\"}\n"
      "{\"paper_id\":\"p1\",\"reviewer_id\":\"ai_a\",\"item_index\":2,\"correctness\":\"Not Correct\","
      "\"significance\":null,\"evidence\":null,\"prediction_of_expert_judgments\":null}\n";
  const auto set = parse_meta_labels(text);
  EXPECT_EQ(set.labels.size(), 2u);
  EXPECT_EQ(set.predictions.size(), 1u);
  EXPECT_EQ(serialize_meta_labels(set), text);
  const auto first_line = text.substr(0, text.find('\n') + 1);
  try {
    parse_meta_labels(first_line + first_line);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SchemaError);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(Templates, DefaultsOverridesAndRendering) {
  const auto d = TemplateSet::defaults();
  EXPECT_NE(d.text("similarity").find("{{item_a}}"), std::string::npos);
  EXPECT_EQ(d.id("meta_review").size(), std::string("meta_review@").size() + 16);
  TempDir dir;
  dir.write("similarity.txt", "[system]\nS\n[user]\n{{item_a}} vs {{item_b}} {{unknown}}\n");
  const auto o = TemplateSet::load(dir.path());
  EXPECT_NE(o.id("similarity"), d.id("similarity"));
  EXPECT_EQ(o.id("meta_review"), d.id("meta_review"));
  EXPECT_EQ(render_template("a {{x}} b {{y}}", {{"x", "1"}}), "a 1 b {{y}}");
  EXPECT_THROW_CODE(TemplateSet::load(dir.path() / "missing"), ErrorCode::IoError);
}

TEST(Templates, PaperContextTruncatesOnCodepoint) {
  PaperBundle b;
  b.preprint_text = "ab\xc3\xa9" "cd";  // a b e-acute c d
  EXPECT_EQ(paper_context(b, 3), "ab\n[truncated]");
  EXPECT_EQ(paper_context(b, 4), "ab\xc3\xa9\n[truncated]");
  EXPECT_EQ(paper_context(b, 100), b.preprint_text);
}

TEST(JudgeRun, MockAndCache) {
  TempDir cache;
  MockBackend::Options mo;
  mo.similarity.insert(item("h1", 1).id, item("ai_a", 1).id, {2, VerdictSource::Judge});
  auto backend = std::make_shared<MockBackend>(mo);
  JudgeOptions jo = quick();
  jo.cache_dir = cache.path();
  {
    Judge judge(backend, TemplateSet::defaults(), jo);
    const auto v = judge.classify_similarity(
        make_similarity_request(judge.templates().id("similarity"), "p1", "ctx", item("h1", 1), item("ai_a", 1)));
    EXPECT_EQ(v.ordinal, 2);
    EXPECT_FALSE(v.from_cache);
    EXPECT_TRUE(std::filesystem::exists(cache.path() / (v.request_hash + ".json")));
    const json stored = json::parse(slurp(cache.path() / (v.request_hash + ".json")));
    EXPECT_EQ(stored["request_hash"], v.request_hash);
  }
  // A fresh judge on the same cache directory makes no backend calls.
  Judge again(backend, TemplateSet::defaults(), jo);
  const auto before = backend->dispatches();
  const auto v = again.classify_similarity(
      make_similarity_request(again.templates().id("similarity"), "p1", "ctx", item("ai_a", 1), item("h1", 1)));
  EXPECT_TRUE(v.from_cache);
  EXPECT_EQ(v.ordinal, 2);
  EXPECT_EQ(backend->dispatches(), before);
  EXPECT_EQ(again.dispatches(), 0u);
}

TEST(JudgeRun, MetaDefaultsAreConsistent) {
  for (auto d : {MockBackend::Default::Similar, MockBackend::Default::Dissimilar, MockBackend::Default::Hashed}) {
    MockBackend::Options mo;
    mo.meta_default = d;
    Judge judge(std::make_shared<MockBackend>(mo), TemplateSet::defaults(), quick());
    for (int i = 1; i <= 5; ++i) {
      const auto v = judge.judge_meta_review(
          make_meta_review_request(judge.templates().id("meta_review"), "p1", "", item("ai_b", i)));
      ASSERT_TRUE(v.labels && v.prediction);
      EXPECT_NO_THROW(check_prediction_consistency(*v.labels, *v.prediction));
    }
  }
}

TEST(JudgeRun, RetriesTransientFailures) {
  MockBackend::Options mo;
  mo.transient_failures = 2;
  auto backend = std::make_shared<MockBackend>(mo);
  Judge judge(backend, TemplateSet::defaults(), quick());
  const auto req = make_similarity_request("t", "p1", "", item("h1", 1), item("ai_a", 1));
  EXPECT_EQ(judge.classify_similarity(req).ordinal, 0);
  EXPECT_EQ(judge.dispatches(), 3u);

  MockBackend::Options flaky;
  flaky.transient_failures = 10;
  JudgeOptions jo = quick();
  jo.max_attempts = 3;
  Judge limited(std::make_shared<MockBackend>(flaky), TemplateSet::defaults(), jo);
  EXPECT_THROW_CODE(limited.classify_similarity(req), ErrorCode::TransportFailure);
  EXPECT_EQ(limited.dispatches(), 3u);
}

TEST(JudgeRun, NonRetryableFailsAtOnce) {
  MockBackend::Options mo;
  mo.similarity_default = MockBackend::Default::Fail;
  Judge judge(std::make_shared<MockBackend>(mo), TemplateSet::defaults(), quick());
  EXPECT_THROW_CODE(judge.classify_similarity(make_similarity_request("t", "p1", "", item("h1", 1), item("h2", 1))),
                    ErrorCode::TransportFailure);
  EXPECT_EQ(judge.dispatches(), 1u);
}

TEST(JudgeRun, RunAllDedupesAndKeepsOrder) {
  MockBackend::Options mo;
  mo.similarity_default = MockBackend::Default::Hashed;
  mo.seed = 5;
  auto backend = std::make_shared<MockBackend>(mo);
  JudgeOptions jo = quick();
  jo.max_in_flight = 3;
  Judge judge(backend, TemplateSet::defaults(), jo);
  std::vector<JudgeRequest> reqs;
  for (int i = 1; i <= 6; ++i) reqs.push_back(make_similarity_request("t", "p1", "", item("h1", i), item("ai_a", 1)));
  reqs.push_back(make_similarity_request("t", "p1", "", item("ai_a", 1), item("h1", 3)));
  const auto out = judge.run_all(reqs);
  ASSERT_EQ(out.size(), 7u);
  EXPECT_EQ(backend->dispatches(), 6u);
  EXPECT_EQ(out[6].ordinal, out[2].ordinal);
  EXPECT_EQ(out[6].request_hash, out[2].request_hash);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(out[i].request_hash, cache_key(reqs[i]));

  Judge serial(std::make_shared<MockBackend>(mo), TemplateSet::defaults(), quick());
  for (std::size_t i = 0; i < reqs.size(); ++i) EXPECT_EQ(serial.classify_similarity(reqs[i]).ordinal, out[i].ordinal);
}

TEST(JudgeRun, ContextOverflowAndBadReplies) {
  JudgeOptions jo = quick();
  jo.prompt_limit = 200;
  Judge small(std::make_shared<MockBackend>(MockBackend::Options{}), TemplateSet::defaults(), jo);
  EXPECT_THROW_CODE(small.classify_similarity(make_similarity_request("t", "p1", "", item("h1", 1), item("h2", 1))),
                    ErrorCode::ContextOverflow);

  class Garbage : public JudgeBackend {
   public:
    std::string complete(const Prompt&, const JudgeRequest&) override { return "I think they are similar."; }
    std::string name() const override { return "garbage"; }
  };
  TempDir cache;
  JudgeOptions co = quick();
  co.cache_dir = cache.path();
  Judge judge(std::make_shared<Garbage>(), TemplateSet::defaults(), co);
  EXPECT_THROW_CODE(judge.classify_similarity(make_similarity_request("t", "p1", "", item("h1", 1), item("h2", 1))),
                    ErrorCode::UnparseableResponse);
  EXPECT_TRUE(std::filesystem::is_empty(cache.path()));
}

TEST(JudgeRun, RenderFillsSlots) {
  Judge judge(std::make_shared<MockBackend>(MockBackend::Options{}), TemplateSet::defaults(), quick());
  const auto p = judge.render(make_meta_review_request("t", "p9", "EXCERPT", item("ai_c", 4, "Unique title")));
  EXPECT_FALSE(p.system.empty());
  EXPECT_NE(p.user.find("EXCERPT"), std::string::npos);
  EXPECT_NE(p.user.find("Unique title"), std::string::npos);
  EXPECT_EQ(p.user.find("{{"), std::string::npos);
}

TEST(Calibrated, ReproducesConfusionCounts) {
  VerdictTable ref;
  for (int i = 1; i <= 70; ++i) ref.insert(item("h1", i).id, item("ai_a", i).id, {3, VerdictSource::Reference});
  for (int i = 1; i <= 94; ++i) ref.insert(item("h2", i).id, item("ai_b", i).id, {i % 2, VerdictSource::Reference});
  const auto judged = calibrated_verdicts(ref, 61.0 / 70.0, 91.0 / 94.0, 3);
  const auto c = confusion(ref, judged);
  EXPECT_EQ(c.tp, 61u);
  EXPECT_EQ(c.fn, 9u);
  EXPECT_EQ(c.fp, 3u);
  EXPECT_EQ(c.tn, 91u);
  EXPECT_THROW_CODE(confusion(ref, VerdictTable{}), ErrorCode::MissingVerdict);
}

TEST(Remote, RetriesThrottledRequests) {
  httplib::Server server;
  std::atomic<int> calls{0};
  std::string seen_auth;
  json seen_body;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    if (calls++ == 0) {
      res.status = 429;
      return;
    }
    seen_auth = req.get_header_value("Authorization");
    seen_body = json::parse(req.body);
    const json reply = {{"choices", json::array({{{"message", {{"content", "{\"ordinal\": 1}"}}}}})}};
    res.set_content(reply.dump(), "application/json");
  });
  server.Post("/bad", [](const httplib::Request&, httplib::Response& res) { res.status = 400; });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  RemoteBackend::Options ro;
  ro.url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
  ro.token = "secret";
  ro.model = "m";
  ro.timeout = std::chrono::seconds(5);
  Judge judge(std::make_shared<RemoteBackend>(ro), TemplateSet::defaults(), quick());
  const auto v = judge.classify_similarity(make_similarity_request("t", "p1", "", item("h1", 1), item("h2", 1)));
  EXPECT_EQ(v.ordinal, 1);
  EXPECT_EQ(calls.load(), 2);
  EXPECT_EQ(seen_auth, "Bearer secret");
  EXPECT_EQ(seen_body["model"], "m");
  EXPECT_EQ(seen_body["messages"].size(), 2u);

  ro.url = "http://127.0.0.1:" + std::to_string(port) + "/bad";
  Judge bad(std::make_shared<RemoteBackend>(ro), TemplateSet::defaults(), quick());
  EXPECT_THROW_CODE(bad.classify_similarity(make_similarity_request("t", "p1", "", item("h1", 2), item("h2", 1))),
                    ErrorCode::TransportFailure);
  EXPECT_EQ(bad.dispatches(), 1u);
  server.stop();
  t.join();
}
