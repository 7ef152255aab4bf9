#include "revbench/similarity.hpp"

#include <cmath>
#include <mutex>

#include <json.hpp>

#include "revbench/error.hpp"
#include "text_util.hpp"

namespace revbench {

using nlohmann::json;

std::string_view to_string(VerdictSource s) { return s == VerdictSource::Judge ? "judge" : "reference"; }

VerdictSource parse_verdict_source(std::string_view s) {
  if (s == "judge") return VerdictSource::Judge;
  if (s == "reference") return VerdictSource::Reference;
  fail(ErrorCode::UnknownLabelString, "unknown verdict source '" + std::string(s) + "'");
}

VerdictTable::VerdictTable(const VerdictTable& other) {
  std::shared_lock lock(other.mu_);
  map_ = other.map_;
}

VerdictTable& VerdictTable::operator=(const VerdictTable& other) {
  if (this == &other) return *this;
  std::map<Key, SimilarityVerdict> copy;
  {
    std::shared_lock lock(other.mu_);
    copy = other.map_;
  }
  std::unique_lock lock(mu_);
  map_ = std::move(copy);
  return *this;
}

VerdictTable::Key VerdictTable::key(const ItemId& a, const ItemId& b) {
  return a < b ? Key{a, b} : Key{b, a};
}

void VerdictTable::insert(const ItemId& a, const ItemId& b, SimilarityVerdict v) {
  if (a == b) fail(ErrorCode::SchemaError, "self-pair " + a.str() + " is not classified");
  if (v.ordinal < 0 || v.ordinal > 3) {
    fail(ErrorCode::SchemaError, "ordinal " + std::to_string(v.ordinal) + " outside 0..3");
  }
  Key k = key(a, b);
  std::unique_lock lock(mu_);
  auto [it, inserted] = map_.emplace(std::move(k), v);
  if (!inserted && it->second.ordinal != v.ordinal) {
    fail(ErrorCode::ConflictingVerdict, "pair (" + a.str() + ", " + b.str() + ") already has ordinal " +
                                            std::to_string(it->second.ordinal) + ", got " +
                                            std::to_string(v.ordinal));
  }
}

std::optional<SimilarityVerdict> VerdictTable::find(const ItemId& a, const ItemId& b) const {
  std::shared_lock lock(mu_);
  auto it = map_.find(key(a, b));
  if (it == map_.end()) return std::nullopt;
  return it->second;
}

int VerdictTable::ordinal(const ItemId& a, const ItemId& b) const {
  auto v = find(a, b);
  if (!v) fail(ErrorCode::MissingVerdict, "no verdict for (" + a.str() + ", " + b.str() + ")");
  return v->ordinal;
}

std::size_t VerdictTable::size() const {
  std::shared_lock lock(mu_);
  return map_.size();
}

std::vector<std::pair<VerdictTable::Key, SimilarityVerdict>> VerdictTable::entries() const {
  std::shared_lock lock(mu_);
  return {map_.begin(), map_.end()};
}

VerdictTable parse_verdicts(std::string_view text) {
  VerdictTable table;
  const auto lines = detail::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (detail::trim(lines[i]).empty()) continue;
    const std::string where = "line " + std::to_string(i + 1) + ": ";
    try {
      const json j = json::parse(lines[i]);
      if (!j.is_object()) fail(ErrorCode::SchemaError, "not an object");
      for (const char* k : {"paper_id", "item_id_a", "item_id_b", "ordinal"}) {
        if (!j.contains(k)) fail(ErrorCode::SchemaError, std::string("missing field '") + k + "'");
      }
      if (!j["ordinal"].is_number_integer()) fail(ErrorCode::SchemaError, "'ordinal' must be an integer");
      const std::string paper = j["paper_id"].get<std::string>();
      const ItemId a = parse_local_item_id(paper, j["item_id_a"].get<std::string>());
      const ItemId b = parse_local_item_id(paper, j["item_id_b"].get<std::string>());
      SimilarityVerdict v;
      v.ordinal = j["ordinal"].get<int>();
      if (j.contains("source")) v.source = parse_verdict_source(j["source"].get<std::string>());
      table.insert(a, b, v);
    } catch (const json::exception& e) {
      fail(ErrorCode::SchemaError, where + e.what());
    } catch (const Error& e) {
      fail(e.code(), where + e.detail());
    }
  }
  return table;
}

VerdictTable load_verdicts(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return parse_verdicts(text);
  } catch (const Error& e) {
    fail(e.code(), path.string() + ": " + e.detail());
  }
}

std::string serialize_verdicts(const VerdictTable& table) {
  std::string out;
  for (const auto& [k, v] : table.entries()) {
    out += "{\"paper_id\":" + json(k.first.paper_id).dump() + ",\"item_id_a\":" + json(k.first.local()).dump() +
           ",\"item_id_b\":" + json(k.second.local()).dump() + ",\"ordinal\":" + std::to_string(v.ordinal) +
           ",\"source\":" + json(std::string(to_string(v.source))).dump() + "}\n";
  }
  return out;
}

JudgeCalibration parse_calibration(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::SchemaError, std::string("calibration: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorCode::SchemaError, "calibration: expected an object");
  JudgeCalibration c;
  auto field = [&](const char* key) -> std::uint64_t {
    if (!j.contains(key) || !j[key].is_number_integer() || j[key].get<long long>() < 0) {
      fail(ErrorCode::SchemaError, std::string("calibration: '") + key + "' must be a non-negative integer");
    }
    return j[key].get<std::uint64_t>();
  };
  c.tp = field("tp");
  c.fn = field("fn");
  c.fp = field("fp");
  c.tn = field("tn");
  return c;
}

JudgeCalibration load_calibration(const std::filesystem::path& path) {
  return parse_calibration(read_text_file(path));
}

ErrorRates error_rates(const JudgeCalibration& c) {
  if (c.positives() == 0) fail(ErrorCode::EmptyPositiveClass, "calibration has no reference-similar pairs");
  if (c.negatives() == 0) fail(ErrorCode::EmptyNegativeClass, "calibration has no reference-dissimilar pairs");
  return {static_cast<double>(c.tp) / static_cast<double>(c.positives()),
          static_cast<double>(c.tn) / static_cast<double>(c.negatives())};
}

namespace {

/// Correction for resampled rates, which may be uninformative; never throws.
double rogan_gladen_clipped(double apparent, double sens, double spec) {
  const double num = apparent + spec - 1.0;
  const double den = sens + spec - 1.0;
  if (den == 0.0) return num > 0.0 ? 1.0 : 0.0;
  return std::clamp(num / den, 0.0, 1.0);
}

std::array<double, 4> split(const std::array<double, 4>& raw, double similar_mass) {
  std::array<double, 4> out{};
  const double lo = raw[0] + raw[1];
  const double hi = raw[2] + raw[3];
  const double not_similar_mass = 1.0 - similar_mass;
  if (lo > 0.0) {
    out[0] = not_similar_mass * raw[0] / lo;
    out[1] = not_similar_mass * raw[1] / lo;
  } else {
    out[0] = out[1] = not_similar_mass / 2.0;
  }
  if (hi > 0.0) {
    out[2] = similar_mass * raw[2] / hi;
    out[3] = similar_mass * raw[3] / hi;
  } else {
    out[2] = out[3] = similar_mass / 2.0;
  }
  return out;
}

std::array<double, 4> as_double(const std::array<std::uint64_t, 4>& c) {
  return {static_cast<double>(c[0]), static_cast<double>(c[1]), static_cast<double>(c[2]),
          static_cast<double>(c[3])};
}

}  // namespace

double rogan_gladen(double apparent, double sensitivity, double specificity) {
  if (sensitivity + specificity <= 1.0) {
    fail(ErrorCode::UninformativeJudge, "sensitivity + specificity <= 1; the judge carries no signal");
  }
  return rogan_gladen_clipped(apparent, sensitivity, specificity);
}

std::array<double, 4> corrected_distribution(const std::array<double, 4>& raw_counts, double sensitivity,
                                             double specificity) {
  double total = 0.0;
  for (double c : raw_counts) {
    if (c < 0.0) fail(ErrorCode::InvariantViolation, "negative pair count");
    total += c;
  }
  if (total <= 0.0) fail(ErrorCode::EmptyInput, "corrected distribution over zero pairs");
  const double apparent = (raw_counts[2] + raw_counts[3]) / total;
  return split(raw_counts, rogan_gladen(apparent, sensitivity, specificity));
}

CorrectedDistribution corrected_distribution_ci(const std::vector<PaperPairCounts>& papers,
                                                const JudgeCalibration& calibration,
                                                const BootstrapConfig& cfg) {
  if (papers.empty()) fail(ErrorCode::EmptyClusters, "no papers with classified pairs");
  const ErrorRates rates = error_rates(calibration);

  std::array<std::uint64_t, 4> pooled{};
  for (const auto& p : papers) {
    for (int k = 0; k < 4; ++k) pooled[k] += p.counts[k];
  }
  const std::uint64_t total = pooled[0] + pooled[1] + pooled[2] + pooled[3];
  if (total == 0) fail(ErrorCode::EmptyInput, "corrected distribution over zero pairs");

  CorrectedDistribution out;
  out.papers = papers.size();
  out.pairs = total;
  for (int k = 0; k < 4; ++k) out.raw[k] = static_cast<double>(pooled[k]) / static_cast<double>(total);
  const auto point = corrected_distribution(as_double(pooled), rates.sensitivity, rates.specificity);

  const auto reps = bootstrap_replicates(
      papers.size(), cfg, [&](const std::vector<std::size_t>& idx, Rng& rng) {
        std::array<double, 4> c{};
        for (auto i : idx) {
          for (int k = 0; k < 4; ++k) c[k] += static_cast<double>(papers[i].counts[k]);
        }
        const double n = c[0] + c[1] + c[2] + c[3];
        const double se = static_cast<double>(rng.binomial(calibration.positives(), rates.sensitivity)) /
                          static_cast<double>(calibration.positives());
        const double sp = static_cast<double>(rng.binomial(calibration.negatives(), rates.specificity)) /
                          static_cast<double>(calibration.negatives());
        std::array<double, 5> r{};
        if (n <= 0.0) {
          // Every drawn paper had zero pairs: fall back to the point estimate.
          for (int k = 0; k < 4; ++k) r[k] = point[k];
          r[4] = point[2] + point[3];
          return r;
        }
        const double similar = rogan_gladen_clipped((c[2] + c[3]) / n, se, sp);
        const auto d = split(c, similar);
        for (int k = 0; k < 4; ++k) r[k] = d[k];
        r[4] = similar;
        return r;
      });

  std::array<std::vector<double>, 5> columns;
  for (auto& col : columns) col.reserve(reps.size());
  for (const auto& r : reps) {
    for (int k = 0; k < 5; ++k) columns[k].push_back(r[k]);
  }
  for (int k = 0; k < 4; ++k) out.corrected[k] = percentile_interval(columns[k], point[k], cfg.level);
  out.similar.raw = out.raw[2] + out.raw[3];
  out.similar.corrected = point[2] + point[3];
  out.similar.sensitivity = rates.sensitivity;
  out.similar.specificity = rates.specificity;
  out.similar.ci = percentile_interval(columns[4], out.similar.corrected, cfg.level);
  return out;
}

CorrectedPrevalence corrected_prevalence_ci(const std::vector<PaperPairCounts>& papers,
                                            const JudgeCalibration& calibration,
                                            const BootstrapConfig& cfg) {
  return corrected_distribution_ci(papers, calibration, cfg).similar;
}

CoverageResult coverage(const std::vector<ItemId>& items_a, const std::vector<ItemId>& items_b,
                        const VerdictTable& verdicts, int threshold) {
  if (items_a.empty()) fail(ErrorCode::EmptySideA, "coverage of an empty item set");
  CoverageResult r;
  for (const auto& a : items_a) {
    bool hit = false;
    for (const auto& b : items_b) {
      if (a == b) continue;
      if (verdicts.ordinal(a, b) >= threshold) {
        hit = true;
        break;
      }
    }
    if (hit) r.covered.push_back(a);
  }
  r.fraction = static_cast<double>(r.covered.size()) / static_cast<double>(items_a.size());
  return r;
}

CoverageResult coverage(const std::vector<ReviewItem>& items_a, const std::vector<ReviewItem>& items_b,
                        const VerdictTable& verdicts, int threshold) {
  std::vector<ItemId> a;
  std::vector<ItemId> b;
  for (const auto& i : items_a) a.push_back(i.id);
  for (const auto& i : items_b) b.push_back(i.id);
  return coverage(a, b, verdicts, threshold);
}

std::string_view to_string(PairType t) {
  switch (t) {
    case PairType::HumanHumanSame: return "human-human/same-reviewer";
    case PairType::HumanHumanDiff: return "human-human/diff-reviewer";
    case PairType::AiAiSame: return "ai-ai/same-reviewer";
    case PairType::AiAiDiff: return "ai-ai/diff-reviewer";
    case PairType::HumanAi: return "human-ai";
  }
  return "";
}

PairType pair_type(const ItemId& a, ReviewerKind kind_a, const ItemId& b, ReviewerKind kind_b) {
  if (kind_a != kind_b) return PairType::HumanAi;
  const bool same = a.reviewer_id == b.reviewer_id;
  if (kind_a == ReviewerKind::Human) return same ? PairType::HumanHumanSame : PairType::HumanHumanDiff;
  return same ? PairType::AiAiSame : PairType::AiAiDiff;
}

std::map<PairType, std::vector<PaperPairCounts>> pair_counts_by_type(
    const VerdictTable& verdicts,
    const std::function<std::optional<ReviewerKind>(const std::string&, const std::string&)>& kind_of) {
  std::map<PairType, std::map<std::string, PaperPairCounts>> acc;
  for (const auto& [k, v] : verdicts.entries()) {
    const auto ka = kind_of(k.first.paper_id, k.first.reviewer_id);
    const auto kb = kind_of(k.second.paper_id, k.second.reviewer_id);
    if (!ka || !kb) {
      fail(ErrorCode::SchemaError, "reviewer kind unknown for pair (" + k.first.str() + ", " + k.second.str() + ")");
    }
    auto& slot = acc[pair_type(k.first, *ka, k.second, *kb)][k.first.paper_id];
    slot.paper_id = k.first.paper_id;
    slot.counts[static_cast<std::size_t>(v.ordinal)] += 1;
  }
  std::map<PairType, std::vector<PaperPairCounts>> out;
  for (auto& [type, papers] : acc) {
    auto& vec = out[type];
    for (auto& [id, c] : papers) vec.push_back(std::move(c));
  }
  return out;
}

}  // namespace revbench
