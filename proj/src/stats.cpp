#include "revbench/stats.hpp"

#include <cmath>
#include <numeric>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

namespace revbench {

std::string_view to_string(IntervalMethod m) {
  return m == IntervalMethod::Wilson ? "wilson" : "percentile_bootstrap";
}

void validate(const BootstrapConfig& cfg) {
  if (cfg.iterations == 0) fail(ErrorCode::InvariantViolation, "bootstrap iterations must be >= 1");
  if (!(cfg.level > 0.0 && cfg.level < 1.0)) {
    fail(ErrorCode::InvariantViolation, "confidence level must lie in (0, 1)");
  }
}

double ContingencyTable::total() const {
  double n = 0.0;
  for (const auto& row : counts) n += std::accumulate(row.begin(), row.end(), 0.0);
  return n;
}

namespace {

struct Marginals {
  std::vector<double> row;
  std::vector<double> col;
  double n = 0.0;
  double agree = 0.0;
};

Marginals marginals(const ContingencyTable& t) {
  Marginals m;
  const std::size_t k = t.categories();
  m.row.assign(k, 0.0);
  m.col.assign(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    if (t.counts[i].size() != k) fail(ErrorCode::InvariantViolation, "contingency table is not square");
    for (std::size_t j = 0; j < k; ++j) {
      const double c = t.counts[i][j];
      if (c < 0.0) fail(ErrorCode::InvariantViolation, "negative contingency count");
      m.row[i] += c;
      m.col[j] += c;
      m.n += c;
      if (i == j) m.agree += c;
    }
  }
  if (m.n <= 0.0) fail(ErrorCode::EmptyInput, "agreement over zero pairs");
  return m;
}

}  // namespace

double percent_agreement(const ContingencyTable& t) {
  const Marginals m = marginals(t);
  return m.agree / m.n;
}

double cohen_kappa(const ContingencyTable& t) {
  const Marginals m = marginals(t);
  const double pa = m.agree / m.n;
  double pe = 0.0;
  for (std::size_t k = 0; k < m.row.size(); ++k) pe += (m.row[k] / m.n) * (m.col[k] / m.n);
  if (pe == 1.0) {
    fail(ErrorCode::DegenerateMarginals, "both raters use a single shared label; kappa is undefined");
  }
  return (pa - pe) / (1.0 - pe);
}

double gwet_ac1(const ContingencyTable& t, std::size_t vocabulary_size) {
  const Marginals m = marginals(t);
  const std::size_t k = std::max(vocabulary_size, t.categories());
  if (k < 2) fail(ErrorCode::SingleCategoryVocabulary, "AC1 needs at least two categories");
  const double pa = m.agree / m.n;
  double sum = 0.0;
  for (std::size_t c = 0; c < m.row.size(); ++c) {
    const double pi = (m.row[c] + m.col[c]) / (2.0 * m.n);
    sum += pi * (1.0 - pi);
  }
  const double pe = sum / static_cast<double>(k - 1);
  return (pa - pe) / (1.0 - pe);
}

double z_for_level(double level) {
  if (!(level > 0.0 && level < 1.0)) fail(ErrorCode::InvariantViolation, "level must lie in (0, 1)");
  if (level == 0.95) return 1.959964;
  boost::math::normal_distribution<double> normal;
  return boost::math::quantile(normal, 1.0 - (1.0 - level) / 2.0);
}

IntervalEstimate wilson_ci(std::size_t successes, std::size_t trials, double level) {
  if (trials == 0) fail(ErrorCode::EmptyInput, "Wilson interval with zero trials");
  if (successes > trials) fail(ErrorCode::InvariantViolation, "successes exceed trials");
  const double z = z_for_level(level);
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  IntervalEstimate ci;
  ci.point = p;
  ci.level = level;
  ci.method = IntervalMethod::Wilson;
  ci.lower = successes == 0 ? 0.0 : std::max(0.0, center - half);
  ci.upper = successes == trials ? 1.0 : std::min(1.0, center + half);
  ci.lower = std::min(ci.lower, p);
  ci.upper = std::max(ci.upper, p);
  return ci;
}

double mean(const std::vector<double>& xs) {
  if (xs.empty()) fail(ErrorCode::EmptyInput, "mean of an empty sample");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

PairedTResult paired_t(const std::vector<double>& diffs) {
  if (diffs.size() < 2) fail(ErrorCode::EmptyInput, "paired t needs at least two differences");
  const double n = static_cast<double>(diffs.size());
  const double m = mean(diffs);
  double ss = 0.0;
  for (double d : diffs) ss += (d - m) * (d - m);
  const double sd = std::sqrt(ss / (n - 1.0));
  if (sd == 0.0) fail(ErrorCode::ZeroVariance, "all paired differences are identical");
  PairedTResult r;
  r.mean_diff = m;
  r.sd_diff = sd;
  r.cohen_d = m / sd;
  r.t = m / (sd / std::sqrt(n));
  r.df = n - 1.0;
  boost::math::students_t_distribution<double> dist(r.df);
  r.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(r.t))));
  return r;
}

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& diffs) {
  std::vector<double> nz;
  nz.reserve(diffs.size());
  for (double d : diffs) {
    if (d != 0.0) nz.push_back(d);
  }
  WilcoxonResult r;
  r.dropped = diffs.size() - nz.size();
  r.n = nz.size();
  if (nz.empty()) fail(ErrorCode::AllZeroDiffs, "every paired difference is zero");

  std::vector<std::size_t> order(nz.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return std::fabs(nz[a]) < std::fabs(nz[b]); });
  // Doubled ranks stay integral under averaging.
  std::vector<long long> rank2(nz.size());
  double tie_term = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && std::fabs(nz[order[j + 1]]) == std::fabs(nz[order[i]])) ++j;
    const long long avg2 = static_cast<long long>(i + 1 + j + 1);  // 2 * (first+last)/2
    for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = avg2;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  long long w_plus2 = 0;
  long long total2 = 0;
  for (std::size_t i = 0; i < nz.size(); ++i) {
    total2 += rank2[i];
    if (nz[i] > 0) w_plus2 += rank2[i];
  }
  r.w_plus = static_cast<double>(w_plus2) / 2.0;
  r.w_minus = static_cast<double>(total2 - w_plus2) / 2.0;
  r.rank_biserial_r = (r.w_plus - r.w_minus) / (r.w_plus + r.w_minus);

  const std::size_t n = nz.size();
  if (n <= 25) {
    r.exact = true;
    // Distribution of the doubled positive-rank sum over all 2^n sign patterns.
    std::vector<double> dist(static_cast<std::size_t>(total2) + 1, 0.0);
    dist[0] = 1.0;
    long long reach = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (long long s = reach; s >= 0; --s) {
        if (dist[static_cast<std::size_t>(s)] != 0.0) dist[static_cast<std::size_t>(s + rank2[i])] += dist[static_cast<std::size_t>(s)];
      }
      reach += rank2[i];
    }
    const double count = std::ldexp(1.0, static_cast<int>(n));
    const long long lo = std::min(w_plus2, total2 - w_plus2);
    double tail = 0.0;
    for (long long s = 0; s <= lo; ++s) tail += dist[static_cast<std::size_t>(s)];
    r.p_value = std::min(1.0, 2.0 * tail / count);
  } else {
    r.exact = false;
    const double nn = static_cast<double>(n);
    const double mu = nn * (nn + 1.0) / 4.0;
    const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
    const double z = (r.w_plus - mu) / std::sqrt(var);
    boost::math::normal_distribution<double> normal;
    r.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(normal, std::fabs(z))));
  }
  return r;
}

double sorted_quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) fail(ErrorCode::EmptyInput, "quantile of an empty sample");
  q = std::clamp(q, 0.0, 1.0);
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

IntervalEstimate percentile_interval(std::vector<double> replicates, double point, double level) {
  std::sort(replicates.begin(), replicates.end());
  const double alpha = 1.0 - level;
  IntervalEstimate ci;
  ci.point = point;
  ci.level = level;
  ci.method = IntervalMethod::PercentileBootstrap;
  ci.lower = std::min(sorted_quantile(replicates, alpha / 2.0), point);
  ci.upper = std::max(sorted_quantile(replicates, 1.0 - alpha / 2.0), point);
  return ci;
}

}  // namespace revbench
