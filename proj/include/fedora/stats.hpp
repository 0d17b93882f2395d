#pragma once

// Nonparametric comparison of score groups: Kruskal-Wallis omnibus test,
// Dunn's pairwise posthoc test with Bonferroni correction, and Cliff's delta
// effect sizes with the symbol table used to report them.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fedora/error.hpp"

namespace fedora::stats {

struct Group {
  std::string name;
  std::vector<double> values;
};

using ScoreGroups = std::vector<Group>;

// ---------------------------------------------------------------------------
// Special functions

/// Regularised upper incomplete gamma Q(a, x) = Γ(a, x) / Γ(a).
inline double gamma_q(double a, double x) {
  if (!(a > 0.0)) throw Error(ErrorCode::InvalidGroups, "gamma_q needs a > 0");
  if (x <= 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  constexpr int kMaxIter = 10000;
  constexpr double kTol = 1e-16;
  const double log_prefix = a * std::log(x) - x - std::lgamma(a);

  if (x < a + 1.0) {
    // Series for P(a, x), then Q = 1 - P.
    double term = 1.0 / a;
    double sum = term;
    for (int n = 1; n < kMaxIter; ++n) {
      term *= x / (a + n);
      sum += term;
      if (std::abs(term) < std::abs(sum) * kTol) break;
    }
    return std::max(0.0, 1.0 - sum * std::exp(log_prefix));
  }

  // Continued fraction for Q(a, x), modified Lentz.
  constexpr double tiny = std::numeric_limits<double>::min() / kTol;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kTol) break;
  }
  return std::exp(log_prefix) * h;
}

/// Survival function of the chi-squared distribution.
inline double chi2_sf(double x, double df) { return gamma_q(df / 2.0, x / 2.0); }

/// Two-sided standard normal tail probability P(|Z| >= |z|).
inline double normal_two_sided(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

// ---------------------------------------------------------------------------
// Ranks

struct PooledRanks {
  std::vector<std::vector<double>> ranks;  // per group, same layout as input
  double tie_sum = 0.0;                    // sum over tie blocks of t^3 - t
  std::size_t total = 0;
};

/// Mid-ranks (1-based) of all values pooled across groups.
inline PooledRanks pooled_ranks(const ScoreGroups& groups) {
  std::vector<std::pair<double, std::pair<std::size_t, std::size_t>>> all;
  PooledRanks out;
  out.ranks.resize(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    out.ranks[g].resize(groups[g].values.size());
    for (std::size_t i = 0; i < groups[g].values.size(); ++i) all.push_back({groups[g].values[i], {g, i}});
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  out.total = all.size();
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) ++j;
    const double t = static_cast<double>(j - i);
    const double mid = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) out.ranks[all[k].second.first][all[k].second.second] = mid;
    out.tie_sum += t * t * t - t;
    i = j;
  }
  return out;
}

inline void check_groups(const ScoreGroups& groups) {
  if (groups.size() < 2) throw Error(ErrorCode::InvalidGroups, "need at least two groups");
  std::size_t total = 0;
  for (const auto& g : groups) {
    if (g.values.empty()) throw Error(ErrorCode::InvalidGroups, "group '" + g.name + "' is empty");
    for (double v : g.values)
      if (!std::isfinite(v)) throw Error(ErrorCode::InvalidGroups, "non-finite score in '" + g.name + "'");
    total += g.values.size();
  }
  if (total < 5) throw Error(ErrorCode::InvalidGroups, "need at least five observations in total");
}

// ---------------------------------------------------------------------------
// Kruskal-Wallis

struct KruskalResult {
  double h = 0.0;
  double p = 1.0;
  std::size_t df = 0;
  bool all_identical = false;  // H undefined; reported as H = 0, p = 1
};

/// Tie-corrected H statistic; p from the chi-squared survival function with
/// (groups - 1) degrees of freedom.
inline KruskalResult kruskal_wallis(const ScoreGroups& groups) {
  check_groups(groups);
  const PooledRanks r = pooled_ranks(groups);
  const double n = static_cast<double>(r.total);
  KruskalResult out;
  out.df = groups.size() - 1;

  const double correction = 1.0 - r.tie_sum / (n * n * n - n);
  if (correction <= 0.0) {
    out.all_identical = true;
    return out;
  }
  double sum = 0.0;
  for (const auto& ranks : r.ranks) {
    const double rs = std::accumulate(ranks.begin(), ranks.end(), 0.0);
    sum += rs * rs / static_cast<double>(ranks.size());
  }
  out.h = (12.0 / (n * (n + 1.0)) * sum - 3.0 * (n + 1.0)) / correction;
  out.h = std::max(out.h, 0.0);
  out.p = chi2_sf(out.h, static_cast<double>(out.df));
  return out;
}

// ---------------------------------------------------------------------------
// Dunn's test

struct DunnResult {
  std::vector<std::vector<double>> z;          // signed, mean rank of row minus column
  std::vector<std::vector<double>> p_raw;      // two-sided
  std::vector<std::vector<double>> p_adjusted; // Bonferroni, clipped to 1
  std::size_t pairs = 0;
};

inline DunnResult dunn_posthoc(const ScoreGroups& groups) {
  check_groups(groups);
  const PooledRanks r = pooled_ranks(groups);
  const std::size_t g = groups.size();
  const double n = static_cast<double>(r.total);
  const double variance = n * (n + 1.0) / 12.0 - r.tie_sum / (12.0 * (n - 1.0));

  std::vector<double> mean_rank(g);
  for (std::size_t i = 0; i < g; ++i)
    mean_rank[i] = std::accumulate(r.ranks[i].begin(), r.ranks[i].end(), 0.0) /
                   static_cast<double>(r.ranks[i].size());

  DunnResult out;
  out.pairs = g * (g - 1) / 2;
  out.z.assign(g, std::vector<double>(g, 0.0));
  out.p_raw.assign(g, std::vector<double>(g, 1.0));
  out.p_adjusted.assign(g, std::vector<double>(g, 1.0));
  for (std::size_t i = 0; i < g; ++i) {
    for (std::size_t j = 0; j < g; ++j) {
      if (i == j) continue;
      const double se = std::sqrt(variance * (1.0 / static_cast<double>(r.ranks[i].size()) +
                                              1.0 / static_cast<double>(r.ranks[j].size())));
      if (!(se > 0.0)) continue;  // every value tied: no evidence either way
      out.z[i][j] = (mean_rank[i] - mean_rank[j]) / se;
      out.p_raw[i][j] = normal_two_sided(out.z[i][j]);
      out.p_adjusted[i][j] = std::min(1.0, out.p_raw[i][j] * static_cast<double>(out.pairs));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cliff's delta

enum class Magnitude { Negligible, Small, Medium, Large };

inline constexpr double kSmallEffect = 0.147;
inline constexpr double kMediumEffect = 0.33;
inline constexpr double kLargeEffect = 0.474;

constexpr Magnitude magnitude(double delta) {
  const double m = delta < 0 ? -delta : delta;
  if (m >= kLargeEffect) return Magnitude::Large;
  if (m >= kMediumEffect) return Magnitude::Medium;
  if (m >= kSmallEffect) return Magnitude::Small;
  return Magnitude::Negligible;
}

constexpr std::string_view to_string(Magnitude m) {
  switch (m) {
    case Magnitude::Negligible: return "negligible";
    case Magnitude::Small: return "small";
    case Magnitude::Medium: return "medium";
    case Magnitude::Large: return "large";
  }
  return "unknown";
}

constexpr std::string_view symbol(Magnitude m) {
  switch (m) {
    case Magnitude::Negligible: return "~";
    case Magnitude::Small: return "+";
    case Magnitude::Medium: return "++";
    case Magnitude::Large: return "+++";
  }
  return "?";
}

struct EffectSize {
  double delta = 0.0;
  Magnitude magnitude = Magnitude::Negligible;
};

/// delta = (#{a_i > b_j} - #{a_i < b_j}) / (|a| |b|).
inline EffectSize cliffs_delta(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::InvalidGroups, "Cliff's delta needs non-empty samples");
  std::vector<double> sorted_b = b;
  std::sort(sorted_b.begin(), sorted_b.end());
  long long dominance = 0;
  for (double x : a) {
    const auto below = std::lower_bound(sorted_b.begin(), sorted_b.end(), x) - sorted_b.begin();
    const auto above = sorted_b.end() - std::upper_bound(sorted_b.begin(), sorted_b.end(), x);
    dominance += below - above;
  }
  EffectSize e;
  e.delta = static_cast<double>(dominance) / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
  e.magnitude = magnitude(e.delta);
  return e;
}

// ---------------------------------------------------------------------------
// Report

struct ComparisonReport {
  std::vector<std::string> names;
  KruskalResult omnibus;
  double alpha = 0.05;
  bool posthoc_performed = false;
  DunnResult dunn;                               // filled when posthoc_performed
  std::vector<std::vector<EffectSize>> effects;  // row vs column, all pairs
  std::vector<std::vector<std::string>> symbols; // shown only when significant

  bool significant(std::size_t i, std::size_t j) const {
    return posthoc_performed && i != j && dunn.p_adjusted[i][j] < alpha;
  }
};

inline ComparisonReport comparison_report(const ScoreGroups& groups, double alpha = 0.05) {
  ComparisonReport rep;
  rep.alpha = alpha;
  for (const auto& g : groups) rep.names.push_back(g.name);
  rep.omnibus = kruskal_wallis(groups);
  const std::size_t g = groups.size();
  rep.symbols.assign(g, std::vector<std::string>(g));
  if (rep.omnibus.all_identical || !(rep.omnibus.p < alpha)) return rep;

  rep.posthoc_performed = true;
  rep.dunn = dunn_posthoc(groups);
  rep.effects.assign(g, std::vector<EffectSize>(g));
  for (std::size_t i = 0; i < g; ++i)
    for (std::size_t j = 0; j < g; ++j) {
      if (i == j) continue;
      rep.effects[i][j] = cliffs_delta(groups[i].values, groups[j].values);
      if (rep.significant(i, j)) rep.symbols[i][j] = std::string(symbol(rep.effects[i][j].magnitude));
    }
  return rep;
}

/// Lower-triangular effect-size table: rows are groups 2..g, columns groups
/// 1..g-1; significant cells show the magnitude symbol, others stay blank.
inline std::string render_effect_table(const ComparisonReport& rep, std::string_view corner) {
  std::ostringstream out;
  out << "Kruskal-Wallis: H = " << std::fixed << std::setprecision(4) << rep.omnibus.h
      << ", p = " << std::scientific << std::setprecision(4) << rep.omnibus.p
      << ", df = " << rep.omnibus.df << '\n';
  if (!rep.posthoc_performed) {
    out << "no posthoc performed (p >= " << std::defaultfloat << rep.alpha << ")\n";
    return out.str();
  }
  const std::size_t g = rep.names.size();
  std::size_t width = std::max<std::size_t>(corner.size(), 3);
  for (const auto& n : rep.names) width = std::max(width, n.size());
  auto cell = [&](std::string_view s) {
    out << ' ' << s << std::string(width - s.size(), ' ') << " |";
  };
  auto rule = [&] {
    out << '+';
    for (std::size_t c = 0; c < g; ++c) out << std::string(width + 2, '-') << '+';
    out << '\n';
  };
  out << "Dunn (Bonferroni) effect sizes, alpha = " << std::defaultfloat << rep.alpha << '\n';
  rule();
  out << '|';
  cell(corner);
  for (std::size_t j = 0; j + 1 < g; ++j) cell(rep.names[j]);
  out << '\n';
  rule();
  for (std::size_t i = 1; i < g; ++i) {
    out << '|';
    cell(rep.names[i]);
    for (std::size_t j = 0; j + 1 < g; ++j) cell(j < i ? std::string_view(rep.symbols[i][j]) : "");
    out << '\n';
  }
  rule();
  out << "~ negligible (|d| < 0.147), + small (< 0.33), ++ medium (< 0.474), +++ large\n";
  return out.str();
}

}  // namespace fedora::stats
