#pragma once

// Latent information-scenario enumeration with trimming.
//
// An exchange t (1 <= t <= T-1) turns the status vector S_{t-1} into S_t.  Its
// factor for individual i is info_density(S_it) * outcome_density(Y_i(t+1)), so
// the branch state needed to continue is S_{t-1} alone.  Exchanges 1..T-2 are
// enumerated (and trimmed); the last exchange is summed in closed form because
// nothing downstream depends on S_{T-1}.

#include <netdiff/model.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <utility>
#include <vector>

namespace netdiff {

/// Trimming value meaning "never trim" (exact likelihood).
inline constexpr std::size_t kUnbounded = std::numeric_limits<std::size_t>::max();

/// Tie rule for PIIs equally far from the threshold: the lower index is trimmed first.
inline constexpr bool kTrimTiesByAscendingIndex = true;
/// A PII whose reception probability equals the threshold exactly is trimmed to B.
inline constexpr bool kTrimAtThresholdToB = true;

// ---------------------------------------------------------------------------
// Numerics
// ---------------------------------------------------------------------------

/// Streaming log-sum-exp. The result depends on insertion order only through
/// rounding, and a fixed order gives bit-identical results.
class LogSumExp {
 public:
  void add(double x) noexcept {
    if (x == kNegInf) return;
    if (max_ == kNegInf) {
      max_ = x;
      sum_ = 1.0;
    } else if (x <= max_) {
      sum_ += std::exp(x - max_);
    } else {
      sum_ = sum_ * std::exp(max_ - x) + 1.0;
      max_ = x;
    }
  }
  double value() const noexcept { return max_ == kNegInf ? kNegInf : max_ + std::log(sum_); }

 private:
  double max_ = kNegInf;
  double sum_ = 0.0;
};

inline double safe_log(double x) noexcept { return x > 0.0 ? std::log(x) : kNegInf; }

// ---------------------------------------------------------------------------
// Reference operations (materialized states)
// ---------------------------------------------------------------------------

/// Branch state entering exchange t: the statuses S_{t-1}.
struct ExchangeState {
  std::size_t t = 1;
  StatusSet informed;   ///< S_{t-1}
  StatusSet opted_out;  ///< informed and not participating in period t
  double log_prob = 0.0;
};

/// Root state: S_0 = seeds, accumulated probability P(Y_1 | S_0).
inline ExchangeState initial_state(const Village& v, const ParamPoint& theta) {
  ExchangeState s;
  s.t = 1;
  s.informed = v.seeds.bits();
  s.opted_out = StatusSet(v.size());
  double lp = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    lp += safe_log(first_outcome_density(v.outcomes.at(i, 1), v.seeds.is_ip(i), theta.p));
    if (v.seeds.is_ip(i) && !v.outcomes.at(i, 1)) s.opted_out.set(i);
  }
  s.log_prob = lp;
  return s;
}

struct EligiblePII {
  std::size_t individual = 0;
  std::size_t informed_links = 0;
  double r = 0.0;
  PIIContribution contribution;
};

/// Uninformed non-participants (in period t+1) with positive reception probability for
/// whom both alternatives are feasible. Someone who participates after t+1 cannot be
/// informed now and opt out, so they stay uninformed with factor 1 - r and are not a PII.
inline std::vector<EligiblePII> eligible_piis(const ExchangeState& state, const Village& v, const ParamPoint& theta) {
  if (state.t + 1 > v.periods()) throw InputError("eligible_piis: exchange beyond the outcome horizon");
  const auto rec = reception_probabilities(v.network, state.informed, theta.q, state.t);
  std::vector<EligiblePII> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (state.informed.test(i) || v.outcomes.at(i, state.t + 1)) continue;
    if (rec.r[i] <= 0.0) continue;
    if (v.outcomes.first_participation(i) > state.t + 1) continue;
    out.push_back({i, v.network.neighbors(i).count_common(state.informed), rec.r[i],
                   PIIContribution::from(rec.r[i], theta.p)});
  }
  return out;
}

struct TrimPlan {
  std::vector<std::size_t> free;
  std::vector<std::size_t> to_a;
  std::vector<std::size_t> to_b;
};

/// Keep the d PIIs closest to the A/B threshold free; push the rest to their more
/// likely default (A above the threshold, B at or below it).
inline TrimPlan trim_select(const std::vector<EligiblePII>& piis, const ParamPoint& theta, std::size_t d) {
  TrimPlan plan;
  if (d >= piis.size()) {
    for (const auto& e : piis) plan.free.push_back(e.individual);
    return plan;
  }
  const double threshold = trim_threshold(theta.p);
  std::vector<const EligiblePII*> order;
  order.reserve(piis.size());
  for (const auto& e : piis) order.push_back(&e);
  std::stable_sort(order.begin(), order.end(), [&](const EligiblePII* a, const EligiblePII* b) {
    const double da = std::abs(a->r - threshold), db = std::abs(b->r - threshold);
    if (da != db) return da > db;
    return a->individual < b->individual;
  });
  const std::size_t trimmed = piis.size() - d;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto* e = order[k];
    if (k < trimmed) {
      (e->r > threshold ? plan.to_a : plan.to_b).push_back(e->individual);
    } else {
      plan.free.push_back(e->individual);
    }
  }
  std::sort(plan.free.begin(), plan.free.end());
  std::sort(plan.to_a.begin(), plan.to_a.end());
  std::sort(plan.to_b.begin(), plan.to_b.end());
  return plan;
}

/// Children of a state under a trim plan, one per subset of the free set, with
/// zero-probability children dropped. Factors come straight from the densities.
inline std::vector<ExchangeState> expand_exchange(const ExchangeState& state, const TrimPlan& plan, const Village& v,
                                                  const ParamPoint& theta, std::uint64_t* dead = nullptr) {
  const std::size_t t = state.t;
  const std::size_t n = v.size();
  if (t + 1 > v.periods()) throw InputError("expand_exchange: exchange beyond the outcome horizon");
  if (plan.free.size() >= 63) throw InputError("expand_exchange: free set too large to enumerate");
  const auto rec = reception_probabilities(v.network, state.informed, theta.q, t);

  StatusSet base = state.informed;
  for (std::size_t i = 0; i < n; ++i)
    if (!state.informed.test(i) && v.outcomes.at(i, t + 1)) base.set(i);
  for (auto i : plan.to_a) base.set(i);

  std::vector<ExchangeState> children;
  const std::uint64_t subsets = std::uint64_t{1} << plan.free.size();
  for (std::uint64_t mask = 0; mask < subsets; ++mask) {
    StatusSet next = base;
    for (std::size_t k = 0; k < plan.free.size(); ++k)
      if ((mask >> k) & 1u) next.set(plan.free[k]);
    double lp = state.log_prob;
    for (std::size_t i = 0; i < n && lp != kNegInf; ++i) {
      const bool s_prev = state.informed.test(i), s_now = next.test(i);
      const double f = info_density(s_now, s_prev, rec.r[i], v.outcomes.at(i, t)) *
                       outcome_density(v.outcomes.at(i, t + 1), v.outcomes.at(i, t), s_now, s_prev, theta.p);
      lp += safe_log(f);
    }
    if (lp == kNegInf) {
      if (dead) ++*dead;
      continue;
    }
    ExchangeState child;
    child.t = t + 1;
    child.informed = std::move(next);
    child.opted_out = StatusSet(n);
    for (std::size_t i = 0; i < n; ++i)
      if (child.informed.test(i) && !v.outcomes.at(i, t + 1)) child.opted_out.set(i);
    child.log_prob = lp;
    children.push_back(std::move(child));
  }
  return children;
}

/// Joint probability P(Y = y, S = scenario | S_0, G, p, q) as a plain product of
/// per-individual, per-period densities. Zero for inconsistent scenarios.
inline double scenario_log_probability(const Village& v, const ParamPoint& theta, const InfoScenario& s) {
  const std::size_t T = v.periods();
  if (s.exchanges() + 1 != T || s.size() != v.size())
    throw InputError("scenario dimensions do not match the village");
  double lp = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i)
    lp += safe_log(first_outcome_density(v.outcomes.at(i, 1), v.seeds.is_ip(i), theta.p));
  for (std::size_t t = 1; t + 1 <= T && lp != kNegInf; ++t) {
    const StatusSet& prev = t == 1 ? v.seeds.bits() : s.column(t - 1);
    const auto rec = reception_probabilities(v.network, prev, theta.q, t);
    for (std::size_t i = 0; i < v.size(); ++i) {
      const bool sp = prev.test(i), sn = s.at(i, t);
      lp += safe_log(info_density(sn, sp, rec.r[i], v.outcomes.at(i, t)) *
                     outcome_density(v.outcomes.at(i, t + 1), v.outcomes.at(i, t), sn, sp, theta.p));
    }
  }
  return lp;
}

inline double scenario_probability(const Village& v, const ParamPoint& theta, const InfoScenario& s) {
  return std::exp(scenario_log_probability(v, theta, s));
}

// ---------------------------------------------------------------------------
// Scenario counting
// ---------------------------------------------------------------------------

namespace detail {

struct CountKey {
  std::vector<std::uint64_t> words;
  std::size_t remaining;
  friend bool operator<(const CountKey& a, const CountKey& b) {
    return a.remaining != b.remaining ? a.remaining < b.remaining : a.words < b.words;
  }
};

inline std::uint64_t count_from(const VillageNetwork& net, const StatusSet& informed, std::size_t remaining,
                                std::uint64_t cap, std::map<CountKey, std::uint64_t>& memo) {
  if (remaining == 0) return 1;
  CountKey key{informed.words(), remaining};
  if (auto it = memo.find(key); it != memo.end()) return it->second;
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < net.size(); ++i)
    if (!informed.test(i) && net.neighbors(i).intersects(informed)) candidates.push_back(i);
  std::uint64_t total = 0;
  if (candidates.size() >= 63 || (std::uint64_t{1} << candidates.size()) > cap) {
    total = cap + 1;
  } else {
    StatusSet next = informed;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << candidates.size()); ++mask) {
      next.copy_from(informed);
      for (std::size_t k = 0; k < candidates.size(); ++k)
        if ((mask >> k) & 1u) next.set(candidates[k]);
      total += count_from(net, next, remaining - 1, cap, memo);
      if (total > cap) {
        total = cap + 1;
        break;
      }
    }
  }
  memo.emplace(std::move(key), total);
  return total;
}

}  // namespace detail

/// Number of monotone status sequences S_1 <= ... <= S_exchanges reachable from the
/// seeds, where every newly informed individual has an informed neighbour in the
/// previous column. Saturates at cap + 1.
inline std::uint64_t count_scenarios(const VillageNetwork& net, const SeedVector& s0, std::size_t exchanges,
                                     std::uint64_t cap = std::numeric_limits<std::uint64_t>::max() - 1) {
  if (exchanges < 1) throw InputError("count_scenarios needs at least one exchange");
  std::map<detail::CountKey, std::uint64_t> memo;
  return detail::count_from(net, s0.bits(), exchanges, cap, memo);
}

// ---------------------------------------------------------------------------
// Fast evaluator
// ---------------------------------------------------------------------------

struct EvalStats {
  std::uint64_t leaves = 0;     ///< branches reaching the final exchange (retained S_1..S_{T-2})
  std::uint64_t dead = 0;       ///< zero-probability branches pruned
  std::uint64_t trimmed = 0;    ///< individual trimming decisions made
  std::size_t max_piis = 0;     ///< largest eligible PII count in a trimmed exchange
};

struct EvalResult {
  double log_likelihood = kNegInf;
  EvalStats stats;
};

/// Per-village precomputation shared by all grid points and trimming values.
/// Immutable after construction; evaluate() is const and thread-safe.
/// Holds a reference: the village must outlive the evaluator.
class VillageEvaluator {
 public:
  explicit VillageEvaluator(Village&&) = delete;
  explicit VillageEvaluator(const Village& v) : v_(&v) {
    validate(v);
    const std::size_t n = v.size();
    first_.resize(n);
    for (std::size_t i = 0; i < n; ++i) first_[i] = v.outcomes.first_participation(i);
    max_degree_ = v.network.max_degree();
  }

  const Village& village() const noexcept { return *v_; }
  std::size_t periods() const noexcept { return v_->periods(); }

  /// Per-parameter lookup tables indexed by informed-neighbour count.
  struct Tables {
    ParamPoint theta;
    double threshold = 0.5;
    std::vector<double> r, log_a, log_b, log_new, log_total;
  };

  Tables tables(const ParamPoint& theta) const {
    Tables tb;
    tb.theta = theta;
    tb.threshold = trim_threshold(theta.p);
    const std::size_t m = max_degree_ + 1;
    tb.r.resize(m);
    tb.log_a.resize(m);
    tb.log_b.resize(m);
    tb.log_new.resize(m);
    tb.log_total.resize(m);
    for (std::size_t k = 0; k < m; ++k) {
      const double r = reception_probability(k, theta.q);
      tb.r[k] = r;
      tb.log_a[k] = safe_log(r * (1.0 - theta.p));
      tb.log_b[k] = safe_log(1.0 - r);
      tb.log_new[k] = safe_log(r * theta.p);
      tb.log_total[k] = safe_log(1.0 - theta.p * r);
    }
    return tb;
  }

  double root_log_prob(const ParamPoint& theta) const {
    double lp = 0.0;
    v_->seeds.bits().for_each_set(
        [&](std::size_t i) { lp += safe_log(v_->outcomes.at(i, 1) ? theta.p : 1.0 - theta.p); });
    return lp;
  }

  /// Village log-likelihood at theta with trimming value d (kUnbounded = exact).
  EvalResult evaluate(const ParamPoint& theta, std::size_t d) const {
    const double root = root_log_prob(theta);
    EvalResult res;
    if (root == kNegInf) return res;
    auto tb = tables(theta);
    LogSumExp acc;
    Walker walker(*this, tb, d, res.stats);
    walker.run(1, v_->seeds.bits(), root, [&](double leaf) { acc.add(leaf); });
    res.log_likelihood = acc.value();
    return res;
  }

  /// log of the probability mass of all continuations of a state entering exchange t
  /// (factors of exchanges t..T-1 only), with trimming value d applied from t on.
  double continuation(const ParamPoint& theta, std::size_t d, std::size_t t, const StatusSet& informed,
                      EvalStats* stats = nullptr) const {
    auto tb = tables(theta);
    EvalStats local;
    LogSumExp acc;
    Walker walker(*this, tb, d, stats ? *stats : local);
    walker.run(t, informed, 0.0, [&](double leaf) { acc.add(leaf); });
    return acc.value();
  }

  /// Visit every retained leaf with the full path of status vectors S_1..S_{T-2}.
  /// The visitor receives (const std::vector<const StatusSet*>& path, double log_mass).
  template <class Visitor>
  EvalStats visit_leaves(const ParamPoint& theta, std::size_t d, Visitor&& visitor) const {
    EvalStats stats;
    const double root = root_log_prob(theta);
    if (root == kNegInf) return stats;
    auto tb = tables(theta);
    Walker walker(*this, tb, d, stats);
    walker.run(1, v_->seeds.bits(), root, [&](double leaf) { visitor(walker.path(), leaf); });
    return stats;
  }

  /// Largest PII count over all branches of the exact tree in the trimmed exchanges.
  /// Structural for interior parameters; evaluated at p = q = 1/2.
  std::size_t max_pii_count() const { return evaluate({0.5, 0.5}, kUnbounded).stats.max_piis; }

  /// Individuals who participate after period t+1: informing them in exchange t without
  /// immediate participation makes the branch impossible.
  bool participates_after(std::size_t i, std::size_t period) const noexcept {
    return first_[i] > period;
  }
  std::size_t first_participation(std::size_t i) const noexcept { return first_[i]; }

 private:
  struct Pii {
    std::size_t individual;
    std::size_t links;
    double distance;
  };

  struct Frame {
    StatusSet next;
    StatusSet child;
    std::vector<Pii> piis;
    std::vector<std::size_t> free;
  };

  class Walker {
   public:
    Walker(const VillageEvaluator& ev, const Tables& tb, std::size_t d, EvalStats& stats)
        : ev_(ev), tb_(tb), d_(d), stats_(stats) {
      const std::size_t T = ev.periods();
      frames_.resize(T + 1);
      for (auto& f : frames_) {
        f.next = StatusSet(ev.village().size());
        f.child = StatusSet(ev.village().size());
      }
      path_.assign(T > 2 ? T - 2 : 0, nullptr);
    }

    const std::vector<const StatusSet*>& path() const noexcept { return path_; }

    template <class Sink>
    void run(std::size_t t, const StatusSet& informed, double log_prob, Sink&& sink) {
      explore(t, informed, log_prob, sink);
    }

   private:
    template <class Sink>
    void explore(std::size_t t, const StatusSet& informed, double log_prob, Sink& sink) {
      const Village& v = ev_.village();
      const std::size_t T = v.periods();
      if (t >= T) {  // T == 1: nothing latent
        ++stats_.leaves;
        sink(log_prob);
        return;
      }
      Frame& fr = frames_[t];
      fr.next.copy_from(informed);
      fr.piis.clear();
      double base = log_prob;
      const bool last = (t + 1 == T);
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (informed.test(i)) continue;
        const std::size_t k = v.network.neighbors(i).count_common(informed);
        if (ev_.first_[i] == t + 1) {
          if (k == 0 || tb_.log_new[k] == kNegInf) {
            ++stats_.dead;
            return;
          }
          base += tb_.log_new[k];
          fr.next.set(i);
        } else if (k > 0) {
          if (ev_.first_[i] > t + 1)
            base += tb_.log_b[k];  // informing now would contradict the later participation
          else
            fr.piis.push_back({i, k, std::abs(tb_.r[k] - tb_.threshold)});
        }
      }

      if (last) {
        for (const auto& e : fr.piis) base += tb_.log_total[e.links];
        if (base == kNegInf) {
          ++stats_.dead;
          return;
        }
        ++stats_.leaves;
        sink(base);
        return;
      }

      stats_.max_piis = std::max(stats_.max_piis, fr.piis.size());
      if (fr.piis.size() > d_) {
        std::stable_sort(fr.piis.begin(), fr.piis.end(), [](const Pii& a, const Pii& b) {
          if (a.distance != b.distance) return a.distance > b.distance;
          return a.individual < b.individual;
        });
      }
      const std::size_t trimmed = fr.piis.size() > d_ ? fr.piis.size() - d_ : 0;
      stats_.trimmed += trimmed;
      fr.free.clear();
      for (std::size_t idx = 0; idx < fr.piis.size(); ++idx) {
        const Pii& e = fr.piis[idx];
        if (idx < trimmed) {
          if (tb_.r[e.links] > tb_.threshold) {
            base += tb_.log_a[e.links];
            fr.next.set(e.individual);
          } else {
            base += tb_.log_b[e.links];
          }
        } else {
          fr.free.push_back(idx);
        }
      }
      if (base == kNegInf) {
        ++stats_.dead;
        return;
      }
      if (fr.free.size() >= 63) throw BudgetError("free PII set too large to enumerate", std::ldexp(1.0, 63));

      const std::uint64_t subsets = std::uint64_t{1} << fr.free.size();
      path_[t - 1] = &fr.child;
      for (std::uint64_t mask = 0; mask < subsets; ++mask) {
        fr.child.copy_from(fr.next);
        double lp = base;
        for (std::size_t k = 0; k < fr.free.size(); ++k) {
          const Pii& e = fr.piis[fr.free[k]];
          if ((mask >> k) & 1u) {
            lp += tb_.log_a[e.links];
            fr.child.set(e.individual);
          } else {
            lp += tb_.log_b[e.links];
          }
        }
        if (lp == kNegInf) {
          ++stats_.dead;
          continue;
        }
        explore(t + 1, fr.child, lp, sink);
      }
    }

    const VillageEvaluator& ev_;
    const Tables& tb_;
    std::size_t d_;
    EvalStats& stats_;
    std::vector<Frame> frames_;
    std::vector<const StatusSet*> path_;
  };

  const Village* v_;
  std::vector<std::size_t> first_;
  std::size_t max_degree_ = 0;
};

/// Village log-likelihood with trimming value d (kUnbounded for the exact value).
inline double village_log_likelihood(const Village& v, const ParamPoint& theta, std::size_t d = kUnbounded) {
  return VillageEvaluator(v).evaluate(theta, d).log_likelihood;
}

/// Upper bound on the number of enumerated branches in exact mode.
inline std::uint64_t exact_branch_estimate(const Village& v, std::uint64_t cap) {
  if (v.periods() < 3) return 1;
  return count_scenarios(v.network, v.seeds, v.periods() - 2, cap);
}

}  // namespace netdiff
