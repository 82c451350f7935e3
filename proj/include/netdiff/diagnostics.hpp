#pragma once

// Trimming error curves, error bound, curvature checks and the trimming-mistake audit.

#include <netdiff/model.hpp>
#include <netdiff/scenario_engine.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace netdiff {

/// log(exp(hi) - exp(lo)) for hi >= lo.
inline double log_diff_exp(double hi, double lo) {
  if (lo == kNegInf) return hi;
  if (lo >= hi) return kNegInf;
  return hi + std::log1p(-std::exp(lo - hi));
}

namespace detail {

inline void require_budget(const Village& v, std::uint64_t budget) {
  const auto est = exact_branch_estimate(v, budget);
  if (est > budget)
    throw BudgetError("village '" + v.name + "': exact scenario count exceeds the budget of " +
                          std::to_string(budget) + "; use trimmed evaluation",
                      static_cast<double>(est));
}

/// Whether a leaf path S_1..S_{T-2} survives trimming value d, replayed with the
/// reference operations (eligible_piis, trim_select) rather than the evaluator.
inline bool retained_under(const Village& v, const ParamPoint& theta, std::size_t d,
                           const std::vector<const StatusSet*>& path) {
  ExchangeState st;
  st.informed = v.seeds.bits();
  for (std::size_t e = 1; e <= path.size(); ++e) {
    st.t = e;
    const auto plan = trim_select(eligible_piis(st, v, theta), theta, d);
    const StatusSet& next = *path[e - 1];
    for (auto i : plan.to_a)
      if (!next.test(i)) return false;
    for (auto i : plan.to_b)
      if (next.test(i)) return false;
    st.informed = next;
  }
  return true;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Error curve
// ---------------------------------------------------------------------------

/// eps_d = L_exact - L_hat_d for d = 0..d-bar, with the probability mass newly
/// retained at each d (log scale; entry 0 is the whole mass retained at d = 0).
struct ErrorCurve {
  ParamPoint theta;
  std::string village;
  double exact = kNegInf;
  std::vector<double> loglik;    ///< L_hat_d
  std::vector<double> epsilon;   ///< eps_d
  std::vector<double> new_mass;  ///< log P(s_d)

  std::size_t max_d() const noexcept { return epsilon.empty() ? 0 : epsilon.size() - 1; }
};

inline ErrorCurve error_curve(const VillageEvaluator& ev, const ParamPoint& theta,
                              std::optional<std::size_t> d_max = std::nullopt,
                              std::uint64_t budget = 5'000'000) {
  const Village& v = ev.village();
  detail::require_budget(v, budget);
  ErrorCurve c;
  c.theta = theta;
  c.village = v.name;
  c.exact = ev.evaluate(theta, kUnbounded).log_likelihood;
  const std::size_t top = d_max.value_or(ev.max_pii_count());
  for (std::size_t d = 0; d <= top; ++d) {
    const double l = ev.evaluate(theta, d).log_likelihood;
    c.loglik.push_back(l);
    c.epsilon.push_back(c.exact == kNegInf ? 0.0 : c.exact - l);
    LogSumExp fresh;
    ev.visit_leaves(theta, d, [&](const std::vector<const StatusSet*>& path, double mass) {
      if (d == 0 || !detail::retained_under(v, theta, d - 1, path)) fresh.add(mass);
    });
    c.new_mass.push_back(fresh.value());
  }
  return c;
}

inline ErrorCurve error_curve(const Village& v, const ParamPoint& theta, std::optional<std::size_t> d_max = std::nullopt,
                              std::uint64_t budget = 5'000'000) {
  return error_curve(VillageEvaluator(v), theta, d_max, budget);
}

struct SlopeReport {
  std::vector<double> slope;      ///< eps_{d-1} - eps_d, entry 0 unused
  std::vector<double> predicted;  ///< log(1 + P(s_d) / sum_{x<d} P(s_x))
  double max_discrepancy = 0.0;   ///< relative, against max(1, |predicted|)
};

/// Predicted slope log(1 + P(s_d)/prior) from log masses.
inline double predicted_slope(double log_prior, double log_new) {
  if (log_new == kNegInf) return 0.0;
  if (log_prior == kNegInf) return std::numeric_limits<double>::infinity();
  return std::log1p(std::exp(log_new - log_prior));
}

/// Check eps_{d-1} - eps_d against the newly retained masses in `log_masses`
/// (defaults to the masses stored in the curve).
inline SlopeReport slope_identity_check(const ErrorCurve& c, const std::vector<double>* log_masses = nullptr) {
  const auto& m = log_masses ? *log_masses : c.new_mass;
  if (m.size() != c.epsilon.size()) throw InputError("branch masses and error curve differ in length");
  SlopeReport r;
  r.slope.assign(m.size(), 0.0);
  r.predicted.assign(m.size(), 0.0);
  LogSumExp prior;
  if (!m.empty()) prior.add(m[0]);
  for (std::size_t d = 1; d < m.size(); ++d) {
    r.slope[d] = c.epsilon[d - 1] - c.epsilon[d];
    r.predicted[d] = predicted_slope(prior.value(), m[d]);
    prior.add(m[d]);
    const double gap = std::abs(r.slope[d] - r.predicted[d]);
    if (std::isfinite(r.predicted[d]))
      r.max_discrepancy = std::max(r.max_discrepancy, gap / std::max(1.0, std::abs(r.predicted[d])));
    else if (std::isfinite(r.slope[d]))
      r.max_discrepancy = std::numeric_limits<double>::infinity();
  }
  return r;
}

struct ConvexityReport {
  std::vector<double> ratio;            ///< P(s_d) / sum_{x<d} P(s_x), entry 0 unused
  std::vector<std::size_t> violations;  ///< d with ratio[d-1] < ratio[d]
  std::vector<std::size_t> kinks;       ///< d with ratio[d] > 1 (slope above log 2)
  bool convex() const noexcept { return violations.empty(); }
};

inline ConvexityReport convexity_report(const std::vector<double>& log_masses) {
  ConvexityReport r;
  r.ratio.assign(log_masses.size(), 0.0);
  LogSumExp prior;
  if (!log_masses.empty()) prior.add(log_masses[0]);
  for (std::size_t d = 1; d < log_masses.size(); ++d) {
    const double lp = prior.value();
    r.ratio[d] = log_masses[d] == kNegInf ? 0.0
                 : lp == kNegInf          ? std::numeric_limits<double>::infinity()
                                          : std::exp(log_masses[d] - lp);
    prior.add(log_masses[d]);
    if (d >= 2 && r.ratio[d - 1] < r.ratio[d]) r.violations.push_back(d);
    if (r.ratio[d] > 1.0) r.kinks.push_back(d);
  }
  return r;
}

inline ConvexityReport convexity_report(const ErrorCurve& c) { return convexity_report(c.new_mass); }

// ---------------------------------------------------------------------------
// Error bound
// ---------------------------------------------------------------------------

struct ErrorBound {
  std::size_t e1 = 0;                ///< eligible PIIs in the first exchange
  std::size_t d = 0;
  double log_min_mass = kNegInf;     ///< smallest retained period-1 branch, exact continuation
  double log_bound = kNegInf;        ///< log(2^{e1-d} * min mass)
  double log_count_bound = kNegInf;  ///< log((2^{e1} - 2^d) * min mass): one term per dropped branch
};

/// Bound on the probability mass lost by trimming the first exchange at d.
/// The mass of a period-1 branch includes the root, the first-exchange factors and
/// the exact continuation; zero-mass branches are not counted as retained.
inline ErrorBound error_bound(const VillageEvaluator& ev, const ParamPoint& theta, std::size_t d) {
  const Village& v = ev.village();
  if (v.periods() < 3) throw InputError("error bound needs at least one trimmed exchange (T >= 3)");
  const auto root = initial_state(v, theta);
  const auto piis = eligible_piis(root, v, theta);
  ErrorBound b;
  b.e1 = piis.size();
  b.d = d;
  if (d > b.e1) throw InputError("error bound needs d <= e1 (" + std::to_string(b.e1) + ")");
  const auto plan = trim_select(piis, theta, d);
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& child : expand_exchange(root, plan, v, theta)) {
    const double m = child.log_prob + ev.continuation(theta, kUnbounded, 2, child.informed);
    if (m != kNegInf) lo = std::min(lo, m);
  }
  if (!std::isfinite(lo)) return b;
  b.log_min_mass = lo;
  b.log_bound = static_cast<double>(b.e1 - d) * std::log(2.0) + lo;
  const double dropped = std::ldexp(1.0, static_cast<int>(b.e1)) - std::ldexp(1.0, static_cast<int>(d));
  b.log_count_bound = dropped > 0.0 ? std::log(dropped) + lo : kNegInf;
  return b;
}

/// log of the probability mass lost at d: log(exp(L_exact) - exp(L_hat_d)).
inline double log_missing_mass(const VillageEvaluator& ev, const ParamPoint& theta, std::size_t d) {
  return log_diff_exp(ev.evaluate(theta, kUnbounded).log_likelihood, ev.evaluate(theta, d).log_likelihood);
}

// ---------------------------------------------------------------------------
// Interpolated error
// ---------------------------------------------------------------------------

enum class Curvature { unknown, linear, convex, concave, mixed };

inline const char* to_string(Curvature c) {
  switch (c) {
    case Curvature::linear: return "linear";
    case Curvature::convex: return "convex";
    case Curvature::concave: return "concave";
    case Curvature::mixed: return "mixed";
    default: return "unknown";
  }
}

struct InterpolatedError {
  double estimate = 0.0;  ///< eps_0 extrapolated from the first slope
  Curvature curvature = Curvature::unknown;
  bool conservative = false;  ///< true only when the observed prefix is convex or linear
};

/// Extrapolate eps_0 from L_hat_0, L_hat_1, ...: the error vanishes at d = zero_at and the
/// curve is taken to fall with the first observed slope all the way there.
inline InterpolatedError interpolated_error_estimate(const std::vector<double>& loglik_prefix, std::size_t zero_at,
                                                     double tol = 1e-12) {
  if (loglik_prefix.size() < 2) throw InputError("interpolated error estimate needs at least two curve points");
  InterpolatedError out;
  const double first = loglik_prefix[1] - loglik_prefix[0];
  out.estimate = static_cast<double>(zero_at) * first;
  if (loglik_prefix.size() >= 3) {
    bool up = false, down = false;
    for (std::size_t d = 2; d < loglik_prefix.size(); ++d) {
      const double prev = loglik_prefix[d - 1] - loglik_prefix[d - 2];
      const double cur = loglik_prefix[d] - loglik_prefix[d - 1];
      if (cur < prev - tol) down = true;
      if (cur > prev + tol) up = true;
    }
    out.curvature = up && down ? Curvature::mixed : down ? Curvature::convex : up ? Curvature::concave : Curvature::linear;
  }
  out.conservative = out.curvature == Curvature::convex || out.curvature == Curvature::linear;
  return out;
}

// ---------------------------------------------------------------------------
// ip-betweenness and the trimming-mistake audit
// ---------------------------------------------------------------------------

struct Betweenness {
  std::vector<double> b;                   ///< aligned with the intermediate list
  std::vector<std::size_t> excluded_finals;  ///< finals without an intermediate neighbour
};

/// b_j = sum over finals k adjacent to j of 1 / #(intermediates adjacent to k that are adjacent to an IP).
inline Betweenness ip_betweenness(const VillageNetwork& net, const SeedVector& s0,
                                  const std::vector<std::size_t>& intermediates,
                                  const std::vector<std::size_t>& finals) {
  StatusSet routed(net.size());
  for (auto j : intermediates)
    if (net.neighbors(j).intersects(s0.bits())) routed.set(j);
  Betweenness out;
  out.b.assign(intermediates.size(), 0.0);
  for (auto k : finals) {
    const std::size_t share = net.neighbors(k).count_common(routed);
    if (share == 0) {
      out.excluded_finals.push_back(k);
      continue;
    }
    for (std::size_t idx = 0; idx < intermediates.size(); ++idx)
      if (routed.test(intermediates[idx]) && net.linked(intermediates[idx], k))
        out.b[idx] += 1.0 / static_cast<double>(share);
  }
  return out;
}

enum class Verdict { optimal, mistake1, mistake2 };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::mistake1: return "mistake1";
    case Verdict::mistake2: return "mistake2";
    default: return "optimal";
  }
}

struct SubgraphAudit {
  std::size_t agent = 0;   ///< 0-based
  double betweenness = 0.0;
  std::size_t in_degree = 0;
  std::size_t out_degree = 0;  ///< finals adjacent to the agent
  bool chose_a = false;
  std::vector<std::size_t> group;  ///< agent plus same-default trimmed PIIs sharing a final
  double single_chosen = 0.0, single_alternative = 0.0;  ///< normalized masses
  double group_chosen = 0.0, group_alternative = 0.0;
  bool selection_violated = false;  ///< some dropped branch with the agent flipped outweighs a retained one
  Verdict verdict = Verdict::optimal;
};

/// Audit each trimmed first-exchange PII: compare the downstream mass of its default
/// with the flipped choice, holding the other trimming choices fixed. The group
/// comparison flips every member of the agent's group together. A dropped period-1
/// branch heavier than the lightest retained one marks every agent it flips.
inline std::vector<SubgraphAudit> mistake_audit(const VillageEvaluator& ev, const ParamPoint& theta, std::size_t d,
                                                std::uint64_t budget = 5'000'000) {
  const Village& v = ev.village();
  detail::require_budget(v, budget);
  std::vector<SubgraphAudit> out;
  if (v.periods() < 3) return out;
  const auto root = initial_state(v, theta);
  const auto piis = eligible_piis(root, v, theta);
  const auto plan = trim_select(piis, theta, d);
  if (plan.to_a.empty() && plan.to_b.empty()) return out;

  const StatusSet& s0 = v.seeds.bits();
  const std::size_t n = v.size();
  std::vector<const EligiblePII*> by_id(n, nullptr);
  for (const auto& e : piis) by_id[e.individual] = &e;
  StatusSet to_a(n), trimmed(n);
  for (auto i : plan.to_a) to_a.set(i), trimmed.set(i);
  for (auto i : plan.to_b) trimmed.set(i);

  StatusSet base = s0;  // S_0 plus the new period-2 participants
  for (std::size_t i = 0; i < n; ++i)
    if (!s0.test(i) && v.outcomes.at(i, 2)) base.set(i);

  auto factor = [&](std::size_t i, bool informed) {
    return informed ? by_id[i]->contribution.a : by_id[i]->contribution.b;
  };

  // Normalized mass with members of `group` assigned `informed`, others at their default.
  auto mass = [&](const std::vector<std::size_t>& group, bool informed) {
    double own = 1.0;
    StatusSet start = base;
    to_a.for_each_set([&](std::size_t i) { start.set(i); });
    for (auto i : group) {
      own *= factor(i, informed);
      start.assign(i, informed);
    }
    if (own == 0.0) return 0.0;
    double total = 0.0;
    const std::uint64_t subsets = std::uint64_t{1} << plan.free.size();
    for (std::uint64_t mask = 0; mask < subsets; ++mask) {
      StatusSet s1 = start;
      double f = own;
      for (std::size_t k = 0; k < plan.free.size(); ++k) {
        const bool on = (mask >> k) & 1u;
        f *= factor(plan.free[k], on);
        if (on) s1.set(plan.free[k]);
      }
      if (f == 0.0) continue;
      total += f * std::exp(ev.continuation(theta, kUnbounded, 2, s1));
    }
    return total;
  };

  // Intermediates: uninformed neighbours of an IP. Finals: adjacent to no IP.
  std::vector<std::size_t> intermediates;
  StatusSet is_final(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (s0.test(i)) continue;
    if (v.network.neighbors(i).intersects(s0))
      intermediates.push_back(i);
    else
      is_final.set(i);
  }

  // Exhaustive check of the selection criterion: every period-1 branch with exact continuation.
  double min_kept = std::numeric_limits<double>::infinity();
  for (const auto& c : expand_exchange(root, plan, v, theta))
    min_kept = std::min(min_kept, c.log_prob + ev.continuation(theta, kUnbounded, 2, c.informed));
  StatusSet flipped_somewhere(n);
  for (const auto& c : expand_exchange(root, trim_select(piis, theta, kUnbounded), v, theta)) {
    StatusSet off(n);
    for (auto i : plan.to_a)
      if (!c.informed.test(i)) off.set(i);
    for (auto i : plan.to_b)
      if (c.informed.test(i)) off.set(i);
    if (!off.any()) continue;  // retained
    const double m = c.log_prob + ev.continuation(theta, kUnbounded, 2, c.informed);
    if (m > min_kept + 1e-12) off.for_each_set([&](std::size_t i) { flipped_somewhere.set(i); });
  }

  for (std::size_t j = 0; j < n; ++j) {
    if (!trimmed.test(j)) continue;
    SubgraphAudit a;
    a.agent = j;
    a.in_degree = by_id[j]->informed_links;
    a.chose_a = to_a.test(j);
    std::vector<std::size_t> finals;
    v.network.neighbors(j).for_each_set([&](std::size_t k) {
      if (is_final.test(k)) finals.push_back(k);
    });
    a.out_degree = finals.size();
    const auto pos = std::find(intermediates.begin(), intermediates.end(), j) - intermediates.begin();
    StatusSet local(n);
    for (auto k : finals) local.set(k);
    a.betweenness = ip_betweenness(v.network, v.seeds, intermediates, finals).b.at(static_cast<std::size_t>(pos));

    a.single_chosen = mass({j}, a.chose_a);
    a.single_alternative = mass({j}, !a.chose_a);
    a.group = {j};
    for (std::size_t k = 0; k < n; ++k) {
      if (k == j || !trimmed.test(k) || to_a.test(k) != a.chose_a) continue;
      if (v.network.neighbors(k).intersects(local)) a.group.push_back(k);
    }
    std::sort(a.group.begin(), a.group.end());
    if (a.group.size() > 1) {
      a.group_chosen = mass(a.group, a.chose_a);
      a.group_alternative = mass(a.group, !a.chose_a);
    } else {
      a.group_chosen = a.single_chosen;
      a.group_alternative = a.single_alternative;
    }
    a.selection_violated = flipped_somewhere.test(j);
    const bool worse = a.single_alternative > a.single_chosen || a.group_alternative > a.group_chosen ||
                       a.selection_violated;
    if (worse) a.verdict = a.chose_a ? Verdict::mistake1 : Verdict::mistake2;
    out.push_back(std::move(a));
  }
  return out;
}

inline std::size_t mistake_count(const std::vector<SubgraphAudit>& audits) {
  return static_cast<std::size_t>(std::count_if(audits.begin(), audits.end(),
                                                [](const SubgraphAudit& a) { return a.verdict != Verdict::optimal; }));
}

}  // namespace netdiff
