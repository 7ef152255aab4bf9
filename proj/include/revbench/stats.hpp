#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <thread>
#include <type_traits>
#include <utility>
#include <vector>

#include "revbench/error.hpp"
#include "revbench/rng.hpp"

namespace revbench {

enum class IntervalMethod { Wilson, PercentileBootstrap };

std::string_view to_string(IntervalMethod m);

struct IntervalEstimate {
  double point = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.95;
  IntervalMethod method = IntervalMethod::PercentileBootstrap;
};

struct BootstrapConfig {
  std::size_t iterations = 10000;
  std::uint64_t seed = 0;
  double level = 0.95;
  /// Worker threads; 0 picks hardware concurrency. Results do not depend on it.
  unsigned threads = 0;
};

/// Throws InvariantViolation on iterations == 0 or level outside (0, 1).
void validate(const BootstrapConfig& cfg);

// ---------------------------------------------------------------------------
// Agreement
// ---------------------------------------------------------------------------

/// Square table of rating counts: counts[i][j] = pairs rated (i, j).
struct ContingencyTable {
  std::vector<std::vector<double>> counts;

  explicit ContingencyTable(std::size_t k = 0) : counts(k, std::vector<double>(k, 0.0)) {}
  std::size_t categories() const { return counts.size(); }
  double total() const;
};

double percent_agreement(const ContingencyTable& t);
/// Throws DegenerateMarginals when chance agreement is exactly 1.
double cohen_kappa(const ContingencyTable& t);
/// Chance agreement uses K = max(categories in t, vocabulary_size).
/// Throws SingleCategoryVocabulary when K < 2.
double gwet_ac1(const ContingencyTable& t, std::size_t vocabulary_size = 0);

/// Encodes label pairs into a table over the sorted set of observed labels.
/// Throws EmptyInput.
template <class Label>
ContingencyTable tabulate(const std::vector<std::pair<Label, Label>>& pairs) {
  if (pairs.empty()) fail(ErrorCode::EmptyInput, "agreement over zero pairs");
  std::map<Label, std::size_t> code;
  for (const auto& [a, b] : pairs) {
    code.emplace(a, 0);
    code.emplace(b, 0);
  }
  std::size_t next = 0;
  for (auto& [label, c] : code) c = next++;
  ContingencyTable t(code.size());
  for (const auto& [a, b] : pairs) t.counts[code[a]][code[b]] += 1.0;
  return t;
}

template <class Label>
double percent_agreement(const std::vector<std::pair<Label, Label>>& pairs) {
  return percent_agreement(tabulate(pairs));
}

template <class Label>
double cohen_kappa(const std::vector<std::pair<Label, Label>>& pairs) {
  return cohen_kappa(tabulate(pairs));
}

template <class Label>
double gwet_ac1(const std::vector<std::pair<Label, Label>>& pairs, std::size_t vocabulary_size = 0) {
  return gwet_ac1(tabulate(pairs), vocabulary_size);
}

// ---------------------------------------------------------------------------
// Intervals and paired tests
// ---------------------------------------------------------------------------

/// Two-sided standard normal quantile for `level`; exactly 1.959964 at 0.95.
double z_for_level(double level);

/// Wilson score interval. Throws EmptyInput on trials == 0 and
/// InvariantViolation on successes > trials.
IntervalEstimate wilson_ci(std::size_t successes, std::size_t trials, double level = 0.95);

struct PairedTResult {
  double mean_diff = 0.0;
  double sd_diff = 0.0;
  double cohen_d = 0.0;
  double t = 0.0;
  double df = 0.0;
  double p_value = 1.0;
};

/// One-sample t on paired differences; d uses the sd of the differences.
/// Throws EmptyInput (< 2 values) and ZeroVariance.
PairedTResult paired_t(const std::vector<double>& diffs);

struct WilcoxonResult {
  double w_plus = 0.0;
  double w_minus = 0.0;
  std::size_t n = 0;        // nonzero differences
  std::size_t dropped = 0;  // zero differences
  double rank_biserial_r = 0.0;
  double p_value = 1.0;
  bool exact = true;
};

/// Signed-rank test with zero differences dropped and average ranks on ties.
/// Exact p for n <= 25, tie-corrected normal approximation otherwise.
/// Throws AllZeroDiffs.
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& diffs);

// ---------------------------------------------------------------------------
// Bootstrap
// ---------------------------------------------------------------------------

/// Percentile (linear interpolation between order statistics) of a sorted
/// sample, q in [0, 1].
double sorted_quantile(const std::vector<double>& sorted, double q);

/// Percentile interval over replicates, widened if needed so that it
/// contains `point`.
IntervalEstimate percentile_interval(std::vector<double> replicates, double point, double level);

/// Runs `iterations` replicates of `fn(indices, rng)` and returns their
/// results. `indices` is a with-replacement draw of n_clusters cluster
/// indices. Replicate i always uses the stream stream_seed(cfg.seed, i), so
/// the output is identical for any thread count.
template <class Fn>
auto bootstrap_replicates(std::size_t n_clusters, const BootstrapConfig& cfg, Fn&& fn) {
  using R = std::decay_t<std::invoke_result_t<Fn&, const std::vector<std::size_t>&, Rng&>>;
  validate(cfg);
  if (n_clusters == 0) fail(ErrorCode::EmptyClusters, "bootstrap over zero clusters");
  std::vector<R> out(cfg.iterations);
  unsigned threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, cfg.iterations));

  auto work = [&](std::size_t begin, std::size_t end) {
    std::vector<std::size_t> idx(n_clusters);
    for (std::size_t i = begin; i < end; ++i) {
      Rng rng(stream_seed(cfg.seed, i));
      for (auto& k : idx) k = static_cast<std::size_t>(rng.below(n_clusters));
      out[i] = fn(static_cast<const std::vector<std::size_t>&>(idx), rng);
    }
  };
  if (threads <= 1) {
    work(0, cfg.iterations);
    return out;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (cfg.iterations + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t b = t * chunk;
    const std::size_t e = std::min(cfg.iterations, b + chunk);
    if (b < e) pool.emplace_back(work, b, e);
  }
  for (auto& th : pool) th.join();
  return out;
}

/// Cluster (paper-level) percentile bootstrap of `statistic`, which maps a
/// multiset of clusters (as pointers, repeats allowed) to a real.
/// Throws EmptyClusters.
template <class Cluster, class Statistic>
IntervalEstimate cluster_bootstrap_ci(const std::vector<Cluster>& clusters, Statistic&& statistic,
                                      const BootstrapConfig& cfg) {
  if (clusters.empty()) fail(ErrorCode::EmptyClusters, "bootstrap over zero clusters");
  std::vector<const Cluster*> all;
  all.reserve(clusters.size());
  for (const auto& c : clusters) all.push_back(&c);
  const double point = statistic(all);
  auto reps = bootstrap_replicates(clusters.size(), cfg,
                                   [&](const std::vector<std::size_t>& idx, Rng&) {
                                     std::vector<const Cluster*> sample;
                                     sample.reserve(idx.size());
                                     for (auto k : idx) sample.push_back(&clusters[k]);
                                     return static_cast<double>(statistic(sample));
                                   });
  return percentile_interval(std::move(reps), point, cfg.level);
}

/// One proportion per group (paper), in key order. Throws EmptyGroup.
template <class Record, class Predicate>
std::vector<std::pair<std::string, double>> per_paper_rates(
    const std::map<std::string, std::vector<Record>>& groups, Predicate&& pred) {
  std::vector<std::pair<std::string, double>> out;
  out.reserve(groups.size());
  for (const auto& [paper, rows] : groups) {
    if (rows.empty()) fail(ErrorCode::EmptyGroup, "paper " + paper + " has no records");
    std::size_t k = 0;
    for (const auto& r : rows) k += pred(r) ? 1 : 0;
    out.emplace_back(paper, static_cast<double>(k) / static_cast<double>(rows.size()));
  }
  return out;
}

double mean(const std::vector<double>& xs);

}  // namespace revbench
