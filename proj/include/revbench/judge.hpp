#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "revbench/corpus.hpp"
#include "revbench/error.hpp"
#include "revbench/rubric.hpp"
#include "revbench/similarity.hpp"

namespace revbench {

/// Lower-case hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

enum class JudgeKind { Similarity, MetaReview };

std::string_view to_string(JudgeKind k);

struct JudgeRequest {
  JudgeKind kind = JudgeKind::Similarity;
  std::string template_id;
  std::string paper_id;
  /// Bounded excerpt of the paper bundle.
  std::string paper_context;
  /// Similarity: the two items of the pair. Meta-review: the single item.
  std::vector<ReviewItem> items;
};

JudgeRequest make_similarity_request(std::string template_id, std::string paper_id, std::string context,
                                     ReviewItem a, ReviewItem b);
JudgeRequest make_meta_review_request(std::string template_id, std::string paper_id, std::string context,
                                      ReviewItem item);

/// Canonical JSON of the request as hashed and stored in the cache. The
/// pair order of similarity requests is normalized, the context enters as a
/// digest.
std::string canonical_request(const JudgeRequest& req);

/// SHA-256 over canonical_request.
std::string cache_key(const JudgeRequest& req);

struct JudgeVerdict {
  JudgeKind kind = JudgeKind::Similarity;
  std::string request_hash;
  int ordinal = 0;                      // similarity
  std::optional<LabelState> labels;     // meta-review
  std::optional<JointClass> prediction;  // meta-review
  std::string reasoning;
  std::string raw_response;
  std::chrono::milliseconds latency{0};
  bool from_cache = false;
};

// ---------------------------------------------------------------------------
// Response parsing and the meta-review wire schema
// ---------------------------------------------------------------------------

/// First JSON value in `text`, ignoring markdown fences and surrounding
/// prose. Throws UnparseableResponse.
std::string extract_json(std::string_view text);

/// Ordinal from a similarity reply: {"ordinal": n} or {"category": name}.
/// Throws UnparseableResponse.
int parse_similarity_response(std::string_view text, std::string* reasoning = nullptr);

struct MetaReviewItem {
  std::string reviewer_id;
  int item_number = 0;
  std::string reasoning;
  LabelState labels;
  JointClass prediction = JointClass::CorrectSignificantSufficient;
};

/// Throws InconsistentPrediction when the predicted class contradicts the
/// axis labels: a Correct item predicted "incorrect", a Not Correct item
/// predicted as a correct_* class, or an agreed significance / evidence
/// label in the class that differs from the item's own label.
void check_prediction_consistency(const LabelState& labels, JointClass prediction);

/// Validates a meta-review document (paper_id, reviewers[], items[] with
/// item_number, reasoning, correctness, significance, evidence,
/// prediction_of_expert_judgments) and returns its items.
/// Errors: SchemaError (shape), UnknownLabelString (label strings),
/// CascadeViolation, InconsistentPrediction.
std::vector<MetaReviewItem> validate_meta_review_document(std::string_view json_text);

/// Meta-review reply for one item: either the full document shape holding
/// exactly one item, or that item object alone. Shape errors become
/// UnparseableResponse; label and consistency errors keep their codes.
MetaReviewItem parse_meta_review_response(std::string_view text);

/// Stored meta-reviewer output, one record per item: paper_id, reviewer_id,
/// item_index, correctness, significance, evidence,
/// prediction_of_expert_judgments (optional).
struct MetaLabelSet {
  MetaLabels labels;
  std::map<ItemId, JointClass> predictions;
};

MetaLabelSet parse_meta_labels(std::string_view text);
MetaLabelSet load_meta_labels(const std::filesystem::path& path);
std::string serialize_meta_labels(const MetaLabelSet& set);

// ---------------------------------------------------------------------------
// Templates
// ---------------------------------------------------------------------------

/// Prompt templates with {{placeholder}} slots. Built-in defaults exist for
/// "similarity" and "meta_review"; a directory may override either with
/// `<name>.txt`. Template ids carry a digest of the text, so editing a
/// template changes every cache key that uses it.
class TemplateSet {
 public:
  static TemplateSet defaults();
  /// Defaults overridden by `<dir>/<name>.txt` files. Throws IoError.
  static TemplateSet load(const std::filesystem::path& dir);

  const std::string& text(const std::string& name) const;
  /// "<name>@<first 16 hex digits of the text digest>"
  std::string id(const std::string& name) const;

 private:
  std::map<std::string, std::string> texts_;
};

/// Replaces {{key}} with values[key]. Unknown placeholders are left as is.
std::string render_template(std::string_view text, const std::map<std::string, std::string>& values);

/// Head of the preprint, cut to at most `budget` bytes on a UTF-8 boundary.
std::string paper_context(const PaperBundle& bundle, std::size_t budget);

// ---------------------------------------------------------------------------
// Backends
// ---------------------------------------------------------------------------

/// Transport-level failure. Retryable failures (connection errors, 429,
/// 5xx) are retried; others fail the request at once.
class TransportError : public Error {
 public:
  TransportError(const std::string& message, bool retryable, int status = 0)
      : Error(ErrorCode::TransportFailure, message), retryable_(retryable), status_(status) {}
  bool retryable() const noexcept { return retryable_; }
  int status() const noexcept { return status_; }

 private:
  bool retryable_;
  int status_;
};

struct Prompt {
  std::string system;
  std::string user;
};

class JudgeBackend {
 public:
  virtual ~JudgeBackend() = default;
  /// Returns the raw reply text. Throws TransportError.
  virtual std::string complete(const Prompt& prompt, const JudgeRequest& req) = 0;
  virtual std::string name() const = 0;
};

/// Deterministic offline backend. Replies come from fixture tables keyed by
/// item ids; pairs and items outside the fixtures get a default reply.
/// Replies are JSON text, so the same parsers as for a remote judge apply.
class MockBackend : public JudgeBackend {
 public:
  enum class Default {
    Similar,     // ordinal 3 / fully positive
    Dissimilar,  // ordinal 0 / Not Correct
    Hashed,      // derived from the request hash and the seed
    Fail,        // non-retryable transport failure
  };

  struct Options {
    VerdictTable similarity;
    MetaLabelSet meta;
    Default similarity_default = Default::Dissimilar;
    Default meta_default = Default::Similar;
    std::uint64_t seed = 0;
    /// The first n dispatches throw a retryable TransportError.
    std::size_t transient_failures = 0;
  };

  explicit MockBackend(Options options);

  std::string complete(const Prompt& prompt, const JudgeRequest& req) override;
  std::string name() const override { return "mock"; }
  std::size_t dispatches() const { return dispatches_.load(); }

 private:
  Options opt_;
  std::atomic<std::size_t> dispatches_{0};
};

/// Chat-completions style HTTP backend: POST {model, messages, temperature}
/// with a bearer token, reply text read from choices[0].message.content.
class RemoteBackend : public JudgeBackend {
 public:
  struct Options {
    std::string url;  // full endpoint, e.g. https://host/v1/chat/completions
    std::string token;
    std::string model;
    double temperature = 0.0;
    std::chrono::seconds timeout{120};
  };

  /// Reads REVBENCH_JUDGE_URL, REVBENCH_JUDGE_TOKEN and REVBENCH_JUDGE_MODEL.
  /// Throws TransportFailure when the URL or model is unset.
  static Options options_from_env();

  explicit RemoteBackend(Options options);

  std::string complete(const Prompt& prompt, const JudgeRequest& req) override;
  std::string name() const override { return "remote"; }

 private:
  Options opt_;
  std::string scheme_host_;
  std::string path_;
};

// ---------------------------------------------------------------------------
// Cache and orchestration
// ---------------------------------------------------------------------------

/// One `<request_hash>.json` file per request holding the canonical request,
/// the verdict and a timestamp (SOURCE_DATE_EPOCH when set). Files are
/// published atomically and never overwritten, so concurrent writers of one
/// hash are harmless.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  /// Stored reply text for the hash, if any.
  std::optional<std::string> get(const std::string& hash) const;
  void put(const std::string& hash, const std::string& canonical_request, const std::string& raw_response,
           const JudgeVerdict& verdict) const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

struct JudgeOptions {
  std::size_t max_attempts = 5;
  std::size_t max_in_flight = 4;
  std::chrono::milliseconds backoff{500};
  /// Upper bound on the rendered prompt, in bytes.
  std::size_t prompt_limit = 400000;
  std::optional<std::filesystem::path> cache_dir;
};

class Judge {
 public:
  Judge(std::shared_ptr<JudgeBackend> backend, TemplateSet templates, JudgeOptions options);

  const TemplateSet& templates() const { return templates_; }

  /// Errors: TransportFailure, UnparseableResponse, ContextOverflow.
  JudgeVerdict classify_similarity(const JudgeRequest& req);
  /// Errors: TransportFailure, UnparseableResponse, UnknownLabelString,
  /// CascadeViolation, InconsistentPrediction, ContextOverflow.
  JudgeVerdict judge_meta_review(const JudgeRequest& req);

  /// Runs requests with at most max_in_flight in progress; results are in
  /// request order. The first failure is rethrown after all workers stop.
  std::vector<JudgeVerdict> run_all(const std::vector<JudgeRequest>& requests);

  /// Backend calls made by this judge (attempts, including retries).
  std::size_t dispatches() const { return dispatches_.load(); }

  Prompt render(const JudgeRequest& req) const;

 private:
  std::string fetch(const JudgeRequest& req, const std::string& hash, bool& from_cache);
  JudgeVerdict run(const JudgeRequest& req);

  std::shared_ptr<JudgeBackend> backend_;
  TemplateSet templates_;
  JudgeOptions opt_;
  std::optional<ResponseCache> cache_;
  mutable std::mutex mu_;
  std::map<std::string, std::string> memory_;
  std::atomic<std::size_t> dispatches_{0};
};

/// Fixture verdicts that a mock judge replays to reach given error rates on
/// a reference set exactly: round(sens * positives) reference-similar pairs
/// and round((1 - spec) * negatives) reference-dissimilar pairs come out
/// similar, chosen in a seed-determined order.
VerdictTable calibrated_verdicts(const VerdictTable& reference, double sensitivity, double specificity,
                                 std::uint64_t seed);

/// Confusion counts of `judged` against `reference` on the reference pairs.
/// Throws MissingVerdict.
JudgeCalibration confusion(const VerdictTable& reference, const VerdictTable& judged);

}  // namespace revbench
