#pragma once

// Synthetic adoption data and the Monte Carlo study of the trimming estimator.

#include <netdiff/estimation.hpp>
#include <netdiff/model.hpp>
#include <netdiff/rng.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace netdiff {

// ---------------------------------------------------------------------------
// Networks
// ---------------------------------------------------------------------------

/// Principal submatrix on rows/columns [offset, offset + size) (0-based).
inline VillageNetwork extract_submatrix(const VillageNetwork& full, std::size_t offset, std::size_t size) {
  if (size < 1 || offset + size > full.size())
    throw InputError("submatrix [" + std::to_string(offset) + ", " + std::to_string(offset + size) +
                     ") does not fit a network of " + std::to_string(full.size()) + " individuals");
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < size; ++i)
    for (std::size_t j = i + 1; j < size; ++j)
      if (full.linked(offset + i, offset + j)) edges.emplace_back(i, j);
  return VillageNetwork::from_edges(size, edges);
}

/// Surrogate network: G(n, link_prob).
inline VillageNetwork erdos_renyi(std::size_t n, double link_prob, const CounterRng& rng) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.uniform({i, j}) <= link_prob) edges.emplace_back(i, j);
  return VillageNetwork::from_edges(n, edges);
}

/// Surrogate network: Watts-Strogatz ring with `neighbors` links per side, each
/// rewired with probability `rewire`.
inline VillageNetwork small_world(std::size_t n, std::size_t neighbors, double rewire, const CounterRng& rng) {
  if (n < 3 || 2 * neighbors >= n) throw InputError("small_world needs n >= 3 and 2*neighbors < n");
  std::vector<std::vector<int>> g(n, std::vector<int>(n, 0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 1; k <= neighbors; ++k) {
      const std::size_t j = (i + k) % n;
      g[i][j] = g[j][i] = 1;
    }
  for (std::size_t k = 1; k <= neighbors; ++k)
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = (i + k) % n;
      if (!g[i][j] || rng.uniform({0, i, k}) > rewire) continue;
      for (std::uint64_t attempt = 0; attempt < 4 * n; ++attempt) {
        const auto target = static_cast<std::size_t>(rng.below(n, {1, i, k, attempt}));
        if (target == i || g[i][target]) continue;
        g[i][j] = g[j][i] = 0;
        g[i][target] = g[target][i] = 1;
        break;
      }
    }
  return VillageNetwork::from_dense(g);
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

/// One injection point drawn uniformly from n individuals.
inline SeedVector draw_ip(std::size_t n, const CounterRng& rng) {
  if (n < 1) throw InputError("draw_ip needs at least one individual");
  return SeedVector::from_indices(n, {static_cast<std::size_t>(rng.below(n, {0x1b}))});
}

struct SimulatedData {
  OutcomeMatrix outcomes;
  InfoScenario info;  ///< latent ground truth S_1..S_{T-1}
};

/// Forward simulation of participation and word-of-mouth transmission.
/// Draw keys: participation (1, t, i); transmission in exchange t (2, t, sender, receiver).
inline SimulatedData simulate_adoption(const VillageNetwork& net, const SeedVector& s0, double p0, double q0,
                                       std::size_t periods, const CounterRng& rng) {
  ParamPoint::checked(p0, q0);
  if (periods < 1) throw InputError("simulation needs at least one period");
  if (s0.size() != net.size()) throw InputError("seed vector and network disagree on size");
  const std::size_t n = net.size();
  SimulatedData out{OutcomeMatrix(n, periods), InfoScenario(n, periods - 1)};

  StatusSet informed = s0.bits();
  StatusSet fresh = s0.bits();
  StatusSet participating(n);
  for (std::size_t t = 1; t <= periods; ++t) {
    fresh.for_each_set([&](std::size_t i) {
      if (rng.uniform({1, t, i}) <= p0) participating.set(i);
    });
    for (std::size_t i = 0; i < n; ++i) out.outcomes.set(i, t, participating.test(i));
    if (t == periods) break;

    StatusSet next = informed;
    fresh.clear();
    informed.for_each_set([&](std::size_t sender) {
      net.neighbors(sender).for_each_set([&](std::size_t receiver) {
        if (informed.test(receiver)) return;
        if (rng.uniform({2, t, sender, receiver}) <= q0 && !next.test(receiver)) {
          next.set(receiver);
          fresh.set(receiver);
        }
      });
    });
    informed = std::move(next);
    out.info.column(t) = informed;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Monte Carlo
// ---------------------------------------------------------------------------

struct MCConfig {
  std::size_t submatrix_size = 20;  ///< N
  std::size_t villages = 11;        ///< V
  std::size_t replications = 90;    ///< R
  double p0 = 0.5;
  double q0 = 0.5;
  std::size_t periods = 4;          ///< T
  std::uint64_t seed_s_first = 1;   ///< seed S of replication 0 (IP draw and submatrix offset)
  std::uint64_t seed_d_first = 2;   ///< seed D of replication 0 (data simulation)
  std::uint64_t master_seed = 0;
  std::vector<VillageNetwork> sources;
  Grid grid = Grid::default_grid();
  std::vector<double> levels{0.95};
  std::size_t workers = 1;
  std::uint64_t exact_budget = 5'000'000;  ///< refuse villages whose exact branch estimate exceeds this

  void check() const {
    if (submatrix_size < 1) throw InputError("N must be at least 1");
    if (villages < 1 || replications < 1) throw InputError("V and R must be at least 1");
    ParamPoint::checked(p0, q0);
    if (sources.empty()) throw InputError("Monte Carlo needs at least one source network");
    for (const auto& s : sources)
      if (s.size() < submatrix_size) throw InputError("source network smaller than the submatrix size");
  }
};

struct ReplicationEstimate {
  std::size_t d = 0;
  double p_hat = std::nan("");
  double q_hat = std::nan("");
  double loglik = kNegInf;
  bool boundary = false;
};

struct ReplicationResult {
  std::size_t replication = 0;
  std::uint64_t seed_s = 0;
  std::uint64_t seed_d = 0;
  std::vector<std::size_t> offsets;         ///< submatrix offset per village
  std::vector<std::size_t> max_pii;         ///< d-bar per village
  std::vector<ReplicationEstimate> trimmed; ///< d = 0..max d-bar; the last entry is the exact MLE
  ReplicationEstimate two_period;
  bool ok = true;
  std::string error;
  double seconds = 0.0;

  /// Estimate at trimming value d; beyond this replication's d-bar it is the exact MLE.
  const ReplicationEstimate& at(std::size_t d) const { return trimmed.at(std::min(d, trimmed.size() - 1)); }
  const ReplicationEstimate& exact() const { return trimmed.back(); }
};

/// Submatrix offset of village v in a replication with seed S: start at row seed S
/// (wrapped into range); villages that share a source network are shifted by N.
inline std::size_t submatrix_offset(std::uint64_t seed_s, std::size_t village, std::size_t source_count,
                                    std::size_t source_size, std::size_t N) {
  const std::size_t span = source_size - N + 1;
  const std::size_t reuse = village / source_count;
  return static_cast<std::size_t>((seed_s + reuse * N) % span);
}

/// Simulated villages of one replication.
inline std::vector<Village> simulate_replication(const MCConfig& cfg, std::size_t r, std::vector<std::size_t>* offsets = nullptr,
                                                 std::vector<InfoScenario>* truth = nullptr) {
  const std::uint64_t seed_s = cfg.seed_s_first + r, seed_d = cfg.seed_d_first + r;
  const CounterRng root(cfg.master_seed);
  std::vector<Village> villages;
  for (std::size_t v = 0; v < cfg.villages; ++v) {
    const auto& source = cfg.sources[v % cfg.sources.size()];
    const std::size_t off = submatrix_offset(seed_s, v, cfg.sources.size(), source.size(), cfg.submatrix_size);
    if (offsets) offsets->push_back(off);
    auto net = extract_submatrix(source, off, cfg.submatrix_size);
    auto s0 = draw_ip(cfg.submatrix_size, root.split(0x5eed5).split(seed_s).split(v));
    auto sim = simulate_adoption(net, s0, cfg.p0, cfg.q0, cfg.periods, root.split(0xda7a).split(seed_d).split(v));
    if (truth) truth->push_back(sim.info);
    villages.push_back(Village{"r" + std::to_string(r) + "v" + std::to_string(v), std::move(net), std::move(s0),
                               std::move(sim.outcomes)});
  }
  return villages;
}

inline ReplicationEstimate to_replication_estimate(const EstimateRecord& rec, std::size_t d) {
  return {d, rec.p_hat, rec.q_hat, rec.loglik, rec.boundary};
}

/// Simulate and estimate one replication. Failures are recorded, not thrown.
inline ReplicationResult run_replication(const MCConfig& cfg, std::size_t r) {
  const auto start = std::chrono::steady_clock::now();
  ReplicationResult res;
  res.replication = r;
  res.seed_s = cfg.seed_s_first + r;
  res.seed_d = cfg.seed_d_first + r;
  try {
    Sample sample(simulate_replication(cfg, r, &res.offsets));
    for (std::size_t v = 0; v < sample.size(); ++v) {
      const auto est = exact_branch_estimate(sample.village(v), cfg.exact_budget);
      if (est > cfg.exact_budget)
        throw BudgetError("village " + std::to_string(v) + " exceeds the exact-evaluation budget",
                          static_cast<double>(est));
      res.max_pii.push_back(sample.max_pii(v));
    }
    const std::size_t top = sample.max_pii_overall();
    std::vector<std::size_t> ds(top + 1);
    for (std::size_t d = 0; d <= top; ++d) ds[d] = d;
    SearchOptions opt;
    opt.workers = cfg.workers;
    opt.levels = cfg.levels;
    const auto seq = estimate_sequence(sample, cfg.grid, ds, opt);
    for (std::size_t k = 0; k <= top; ++k) res.trimmed.push_back(to_replication_estimate(seq.records[k], k));
    res.two_period = to_replication_estimate(seq.records.back(), 0);
  } catch (const std::exception& e) {
    res.ok = false;
    res.error = e.what();
  }
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

struct MeanSE {
  double mean = std::nan("");
  double se = std::nan("");
  std::size_t count = 0;
};

/// Mean and empirical standard error sqrt(sum (x - mean)^2 / (R - 1)).
inline MeanSE mean_and_se(const std::vector<double>& xs) {
  MeanSE out;
  out.count = xs.size();
  if (xs.empty()) return out;
  double sum = 0.0;
  for (double x : xs) sum += x;
  out.mean = sum / static_cast<double>(xs.size());
  if (xs.size() < 2) return out;
  double ss = 0.0;
  for (double x : xs) ss += (x - out.mean) * (x - out.mean);
  out.se = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  return out;
}

struct SummaryRow {
  std::string label;  ///< "d=<k>" or "two-period"
  std::size_t d = 0;
  MeanSE p, q;
  double mean_abs_gap_p = std::nan("");  ///< mean |p_hat_d - p_hat_exact|
  double mean_abs_gap_q = std::nan("");
};

/// Per-d summary over successful replications, d = 0..max d-bar, then the two-period row.
inline std::vector<SummaryRow> summarize(const std::vector<ReplicationResult>& results) {
  std::size_t top = 0;
  std::vector<const ReplicationResult*> ok;
  for (const auto& r : results)
    if (r.ok && !r.trimmed.empty()) {
      ok.push_back(&r);
      top = std::max(top, r.trimmed.size() - 1);
    }
  std::vector<SummaryRow> rows;
  for (std::size_t d = 0; d <= top && !ok.empty(); ++d) {
    // replications whose trimmed surface had no finite point at this d are left out
    std::vector<double> ps, qs;
    double gap_p = 0.0, gap_q = 0.0;
    for (const auto* r : ok) {
      const auto& e = r->at(d);
      if (std::isnan(e.p_hat) || std::isnan(e.q_hat)) continue;
      ps.push_back(e.p_hat);
      qs.push_back(e.q_hat);
      gap_p += std::abs(e.p_hat - r->exact().p_hat);
      gap_q += std::abs(e.q_hat - r->exact().q_hat);
    }
    SummaryRow row;
    row.label = "d=" + std::to_string(d);
    row.d = d;
    row.p = mean_and_se(ps);
    row.q = mean_and_se(qs);
    if (!ps.empty()) {
      row.mean_abs_gap_p = gap_p / static_cast<double>(ps.size());
      row.mean_abs_gap_q = gap_q / static_cast<double>(ps.size());
    }
    rows.push_back(row);
  }
  if (!ok.empty()) {
    std::vector<double> ps, qs;
    for (const auto* r : ok) {
      ps.push_back(r->two_period.p_hat);
      qs.push_back(r->two_period.q_hat);
    }
    SummaryRow row;
    row.label = "two-period";
    row.p = mean_and_se(ps);
    row.q = mean_and_se(qs);
    rows.push_back(row);
  }
  return rows;
}

/// All replications in order. `on_done` is called after each replication.
inline std::vector<ReplicationResult> run_monte_carlo(const MCConfig& cfg,
                                                      const std::function<void(const ReplicationResult&)>& on_done = {}) {
  cfg.check();
  std::vector<ReplicationResult> results;
  results.reserve(cfg.replications);
  for (std::size_t r = 0; r < cfg.replications; ++r) {
    results.push_back(run_replication(cfg, r));
    if (on_done) on_done(results.back());
  }
  return results;
}

}  // namespace netdiff
