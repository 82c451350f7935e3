#pragma once

// Sample likelihood surfaces, grid-search MLE, likelihood-ratio confidence sets
// and the two-period baseline estimator.

#include <netdiff/model.hpp>
#include <netdiff/parallel.hpp>
#include <netdiff/scenario_engine.hpp>

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace netdiff {

// ---------------------------------------------------------------------------
// Grid
// ---------------------------------------------------------------------------

/// Rectangular (p, q) grid with strictly increasing axes.
class Grid {
 public:
  Grid() = default;
  Grid(std::vector<double> p, std::vector<double> q) : p_(std::move(p)), q_(std::move(q)) { check(); }

  /// Axis min, min+step, ..., up to max (inclusive within step/1000).
  static std::vector<double> axis(double lo, double hi, double step) {
    if (!(step > 0.0) || hi < lo) throw InputError("grid axis needs step > 0 and max >= min");
    std::vector<double> out;
    const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-3)) + 1;
    for (std::size_t k = 0; k < count; ++k) out.push_back(std::round((lo + k * step) * 1e12) / 1e12);
    return out;
  }

  /// p, q in {0.01, ..., 0.99}.
  static Grid default_grid() { return Grid(axis(0.01, 0.99, 0.01), axis(0.01, 0.99, 0.01)); }

  /// Sub-rectangle keeping axis values within [p_lo, p_hi] x [q_lo, q_hi].
  Grid restricted(double p_lo, double p_hi, double q_lo, double q_hi) const {
    auto keep = [](const std::vector<double>& a, double lo, double hi) {
      std::vector<double> out;
      for (double x : a)
        if (x >= lo - 1e-12 && x <= hi + 1e-12) out.push_back(x);
      return out;
    };
    return Grid(keep(p_, p_lo, p_hi), keep(q_, q_lo, q_hi));
  }

  const std::vector<double>& p_values() const noexcept { return p_; }
  const std::vector<double>& q_values() const noexcept { return q_; }
  std::size_t size() const noexcept { return p_.size() * q_.size(); }
  bool empty() const noexcept { return size() == 0; }

  /// Points are ordered p-major: index = ip * |q| + iq, which is lexicographic in (p, q).
  ParamPoint point(std::size_t index) const { return {p_[index / q_.size()], q_[index % q_.size()]}; }
  std::size_t p_index(std::size_t index) const { return index / q_.size(); }
  std::size_t q_index(std::size_t index) const { return index % q_.size(); }

  bool on_border(std::size_t index) const {
    const auto ip = p_index(index), iq = q_index(index);
    return ip == 0 || iq == 0 || ip + 1 == p_.size() || iq + 1 == q_.size();
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  void check() const {
    auto strictly_increasing = [](const std::vector<double>& a) {
      for (std::size_t k = 1; k < a.size(); ++k)
        if (!(a[k] > a[k - 1])) return false;
      return true;
    };
    if (!strictly_increasing(p_) || !strictly_increasing(q_)) throw InputError("grid axes must be strictly increasing");
    for (double x : p_)
      if (x < 0.0 || x > 1.0) throw InputError("grid p value outside [0,1]");
    for (double x : q_)
      if (x < 0.0 || x > 1.0) throw InputError("grid q value outside [0,1]");
  }

  std::vector<double> p_, q_;
};

// ---------------------------------------------------------------------------
// Surfaces and estimates
// ---------------------------------------------------------------------------

/// Log-likelihood over a grid for one trimming value. -inf entries are allowed.
struct LikelihoodSurface {
  Grid grid;
  std::size_t d = kUnbounded;
  std::vector<double> loglik;
  std::vector<std::uint64_t> dead_branches;

  double at(std::size_t index) const { return loglik.at(index); }

  /// Index of the maximum; ties break to the lexicographically smallest (p, q).
  /// nullopt when every entry is -inf.
  std::optional<std::size_t> argmax() const {
    std::optional<std::size_t> best;
    for (std::size_t k = 0; k < loglik.size(); ++k) {
      if (loglik[k] == kNegInf || std::isnan(loglik[k])) continue;
      if (!best || loglik[k] > loglik[*best]) best = k;
    }
    return best;
  }
};

struct ConfidenceSet {
  double level = 0.95;
  double critical_value = 0.0;
  std::vector<ParamPoint> points;

  /// Axis-wise hull of the set, as reported in estimate tables.
  std::pair<double, double> p_range() const { return range([](const ParamPoint& x) { return x.p; }); }
  std::pair<double, double> q_range() const { return range([](const ParamPoint& x) { return x.q; }); }

 private:
  template <class F>
  std::pair<double, double> range(F f) const {
    if (points.empty()) return {std::nan(""), std::nan("")};
    double lo = f(points.front()), hi = lo;
    for (const auto& x : points) {
      lo = std::min(lo, f(x));
      hi = std::max(hi, f(x));
    }
    return {lo, hi};
  }
};

struct EstimateRecord {
  std::string label;              ///< "d=<k>", "exact" or "two-period"
  std::size_t d = kUnbounded;
  bool two_period = false;
  double p_hat = std::nan("");
  double q_hat = std::nan("");
  double loglik = kNegInf;
  bool boundary = false;
  std::vector<ConfidenceSet> confidence_sets;
};

/// Chi-square quantile with the given degrees of freedom.
inline double chi_square_quantile(double level, double dof = 2.0) {
  if (!(level > 0.0 && level < 1.0)) throw InputError("confidence level must lie in (0,1)");
  boost::math::chi_squared_distribution<double> dist(dof);
  return boost::math::quantile(dist, level);
}

/// Grid points whose LR statistic 2 (L(theta_hat) - L(theta)) is at most the
/// chi-square(2) quantile at `level`. -inf points are never included.
inline ConfidenceSet lr_confidence_set(const LikelihoodSurface& surface, double level) {
  ConfidenceSet cs;
  cs.level = level;
  cs.critical_value = chi_square_quantile(level, 2.0);
  const auto best = surface.argmax();
  if (!best) return cs;
  const double top = surface.loglik[*best];
  for (std::size_t k = 0; k < surface.loglik.size(); ++k) {
    const double v = surface.loglik[k];
    if (v == kNegInf) continue;
    if (k == *best || 2.0 * (top - v) <= cs.critical_value) cs.points.push_back(surface.grid.point(k));
  }
  return cs;
}

inline EstimateRecord make_record(const LikelihoodSurface& surface, const std::vector<double>& levels) {
  EstimateRecord rec;
  rec.d = surface.d;
  rec.label = surface.d == kUnbounded ? "exact" : "d=" + std::to_string(surface.d);
  if (const auto best = surface.argmax()) {
    const auto pt = surface.grid.point(*best);
    rec.p_hat = pt.p;
    rec.q_hat = pt.q;
    rec.loglik = surface.loglik[*best];
    rec.boundary = surface.grid.on_border(*best);
  }
  for (double level : levels) rec.confidence_sets.push_back(lr_confidence_set(surface, level));
  return rec;
}

// ---------------------------------------------------------------------------
// Two-period baseline
// ---------------------------------------------------------------------------

/// Closed-form log-likelihood of the first two outcome periods: no latent enumeration.
namespace detail {

inline void validate_two_period(const Village& v) {
  if (v.periods() < 2) throw InputError("two-period estimator needs at least two outcome periods");
  validate(Village{v.name, v.network, v.seeds, v.outcomes.truncated(2)});
}

inline double two_period_unchecked(const Village& v, const ParamPoint& theta) {
  const auto& s0 = v.seeds.bits();
  double lp = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    lp += safe_log(first_outcome_density(v.outcomes.at(i, 1), s0.test(i), theta.p));
    if (s0.test(i)) continue;
    const double r = reception_probability(v.network.neighbors(i).count_common(s0), theta.q);
    if (v.outcomes.at(i, 2))
      lp += safe_log(r * theta.p);
    else if (r > 0.0)
      lp += safe_log(1.0 - r * theta.p);
  }
  return lp;
}

}  // namespace detail

inline double two_period_log_likelihood(const Village& v, const ParamPoint& theta) {
  detail::validate_two_period(v);
  return detail::two_period_unchecked(v, theta);
}

// ---------------------------------------------------------------------------
// Sample
// ---------------------------------------------------------------------------

/// Validated villages with their evaluators. Villages are held at stable addresses.
class Sample {
 public:
  Sample() = default;
  explicit Sample(std::vector<Village> villages) {
    for (auto& v : villages) add(std::move(v));
  }

  void add(Village v) {
    villages_.push_back(std::make_unique<Village>(std::move(v)));
    evaluators_.push_back(std::make_unique<VillageEvaluator>(*villages_.back()));
    max_pii_.push_back(std::nullopt);
  }

  std::size_t size() const noexcept { return villages_.size(); }
  const Village& village(std::size_t k) const { return *villages_.at(k); }
  const VillageEvaluator& evaluator(std::size_t k) const { return *evaluators_.at(k); }

  /// d-bar of village k (largest PII count in a trimmed exchange); computed on demand.
  std::size_t max_pii(std::size_t k) const {
    if (!max_pii_.at(k)) max_pii_[k] = evaluators_[k]->max_pii_count();
    return *max_pii_[k];
  }
  void set_max_pii(std::size_t k, std::size_t value) const { max_pii_.at(k) = value; }
  bool max_pii_known(std::size_t k) const { return max_pii_.at(k).has_value(); }

  std::size_t max_pii_overall() const {
    std::size_t m = 0;
    for (std::size_t k = 0; k < size(); ++k) m = std::max(m, max_pii(k));
    return m;
  }

 private:
  std::vector<std::unique_ptr<Village>> villages_;
  std::vector<std::unique_ptr<VillageEvaluator>> evaluators_;
  mutable std::vector<std::optional<std::size_t>> max_pii_;
};

/// Sum over villages of L_{v, min(d, d-bar_v)}. Trimming with d >= d-bar_v trims
/// nothing, so each village is evaluated with d directly.
inline double sample_log_likelihood(const Sample& sample, const ParamPoint& theta, std::size_t d) {
  double total = 0.0;
  for (std::size_t k = 0; k < sample.size(); ++k) {
    const double l = sample.evaluator(k).evaluate(theta, d).log_likelihood;
    if (l == kNegInf) return kNegInf;
    total += l;
  }
  return total;
}

struct SearchOptions {
  std::size_t workers = 1;
  std::vector<double> levels{0.90, 0.95, 0.99};
  /// Called after each village surface is complete: (village index, d, seconds).
  std::function<void(std::size_t, std::size_t, double)> on_village_done;
};

/// Per-village surface at trimming value d over the grid, evaluated in parallel over
/// grid points. Values are written into index-addressed slots.
inline LikelihoodSurface village_surface(const VillageEvaluator& ev, const Grid& grid, std::size_t d,
                                         std::size_t workers) {
  LikelihoodSurface s;
  s.grid = grid;
  s.d = d;
  s.loglik.assign(grid.size(), kNegInf);
  s.dead_branches.assign(grid.size(), 0);
  parallel_for(grid.size(), workers, [&](std::size_t k) {
    const auto r = ev.evaluate(grid.point(k), d);
    s.loglik[k] = r.log_likelihood;
    s.dead_branches[k] = r.stats.dead;
  });
  return s;
}

inline LikelihoodSurface two_period_village_surface(const Village& v, const Grid& grid, std::size_t workers) {
  LikelihoodSurface s;
  s.grid = grid;
  s.d = kUnbounded;
  s.loglik.assign(grid.size(), kNegInf);
  s.dead_branches.assign(grid.size(), 0);
  detail::validate_two_period(v);
  parallel_for(grid.size(), workers, [&](std::size_t k) { s.loglik[k] = detail::two_period_unchecked(v, grid.point(k)); });
  return s;
}

/// Pointwise sum of village surfaces in village order.
inline LikelihoodSurface sum_surfaces(const std::vector<const LikelihoodSurface*>& parts, const Grid& grid,
                                      std::size_t d) {
  LikelihoodSurface s;
  s.grid = grid;
  s.d = d;
  s.loglik.assign(grid.size(), 0.0);
  s.dead_branches.assign(grid.size(), 0);
  for (const auto* part : parts)
    for (std::size_t k = 0; k < grid.size(); ++k) {
      s.loglik[k] += part->loglik[k];
      s.dead_branches[k] += part->dead_branches[k];
    }
  return s;
}

/// Surfaces reused across trimming values: a village evaluated at d >= d-bar_v is
/// stored once under kUnbounded.
class SurfaceCache {
 public:
  SurfaceCache(const Sample& sample, Grid grid, std::size_t workers)
      : sample_(&sample), grid_(std::move(grid)), workers_(workers), cache_(sample.size()) {}

  const Grid& grid() const noexcept { return grid_; }

  std::size_t effective_d(std::size_t k, std::size_t d) const {
    if (d == kUnbounded) return kUnbounded;
    if (sample_->max_pii_known(k) && d >= sample_->max_pii(k)) return kUnbounded;
    return d;
  }

  const LikelihoodSurface& village(std::size_t k, std::size_t d,
                                   const std::function<void(std::size_t, std::size_t, double)>& on_done = {}) {
    const std::size_t key = effective_d(k, d);
    auto& slot = cache_.at(k)[key];
    if (!slot) {
      const auto start = std::chrono::steady_clock::now();
      slot = std::make_unique<LikelihoodSurface>(village_surface(sample_->evaluator(k), grid_, key, workers_));
      if (on_done)
        on_done(k, key, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    }
    return *slot;
  }

  /// Sample surface at d; the stored d is the requested one.
  LikelihoodSurface sample_surface(std::size_t d,
                                   const std::function<void(std::size_t, std::size_t, double)>& on_done = {}) {
    std::vector<const LikelihoodSurface*> parts;
    for (std::size_t k = 0; k < sample_->size(); ++k) parts.push_back(&village(k, d, on_done));
    return sum_surfaces(parts, grid_, d);
  }

 private:
  const Sample* sample_;
  Grid grid_;
  std::size_t workers_;
  std::vector<std::map<std::size_t, std::unique_ptr<LikelihoodSurface>>> cache_;
};

namespace detail {

inline void require_finite_somewhere(const LikelihoodSurface& total, const std::vector<const LikelihoodSurface*>& parts) {
  if (total.argmax()) return;
  for (std::size_t k = 0; k < parts.size(); ++k)
    if (!parts[k]->argmax())
      throw EstimationError("log-likelihood is -inf at every grid point; first inconsistent village is #" +
                            std::to_string(k + 1));
  throw EstimationError("log-likelihood is -inf at every grid point");
}

}  // namespace detail

/// Evaluate the sample surface at d and locate its maximum.
inline std::pair<LikelihoodSurface, EstimateRecord> grid_search(const Sample& sample, const Grid& grid, std::size_t d,
                                                                const SearchOptions& opt = {}) {
  if (grid.empty()) throw InputError("grid is empty");
  SurfaceCache cache(sample, grid, opt.workers);
  std::vector<const LikelihoodSurface*> parts;
  for (std::size_t k = 0; k < sample.size(); ++k) parts.push_back(&cache.village(k, d, opt.on_village_done));
  auto total = sum_surfaces(parts, grid, d);
  detail::require_finite_somewhere(total, parts);
  auto rec = make_record(total, opt.levels);
  return {std::move(total), std::move(rec)};
}

struct SequenceResult {
  std::vector<LikelihoodSurface> surfaces;  ///< one per d, then the two-period surface
  std::vector<EstimateRecord> records;      ///< same order
};

/// One estimate per trimming value (ascending) plus the two-period baseline. A trimming
/// value whose surface is -inf everywhere yields a record without an argmax (NaN estimates);
/// the exact and two-period surfaces must have a finite point.
inline SequenceResult estimate_sequence(const Sample& sample, const Grid& grid, const std::vector<std::size_t>& d_values,
                                        const SearchOptions& opt = {}) {
  if (grid.empty()) throw InputError("grid is empty");
  if (!std::is_sorted(d_values.begin(), d_values.end())) throw InputError("trimming values must be ascending");
  SequenceResult out;
  SurfaceCache cache(sample, grid, opt.workers);
  for (std::size_t d : d_values) {
    std::vector<const LikelihoodSurface*> parts;
    for (std::size_t k = 0; k < sample.size(); ++k) parts.push_back(&cache.village(k, d, opt.on_village_done));
    auto total = sum_surfaces(parts, grid, d);
    if (d == kUnbounded) detail::require_finite_somewhere(total, parts);
    out.records.push_back(make_record(total, opt.levels));
    out.surfaces.push_back(std::move(total));
  }
  std::vector<LikelihoodSurface> baseline_parts;
  baseline_parts.reserve(sample.size());
  for (std::size_t k = 0; k < sample.size(); ++k)
    baseline_parts.push_back(two_period_village_surface(sample.village(k), grid, opt.workers));
  std::vector<const LikelihoodSurface*> ptrs;
  for (const auto& s : baseline_parts) ptrs.push_back(&s);
  auto baseline = sum_surfaces(ptrs, grid, kUnbounded);
  detail::require_finite_somewhere(baseline, ptrs);
  auto rec = make_record(baseline, opt.levels);
  rec.label = "two-period";
  rec.two_period = true;
  out.records.push_back(std::move(rec));
  out.surfaces.push_back(std::move(baseline));
  return out;
}

}  // namespace netdiff
