#pragma once

// Domain types of the diffusion model and the per-individual densities.
//
// Periods are 1-based throughout: outcomes are observed for t = 1..T, latent
// information statuses exist for t = 0..T-1 where column 0 is the seed vector.
// Individuals are 0-based indices.

#include <netdiff/errors.hpp>
#include <netdiff/status_set.hpp>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace netdiff {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// VillageNetwork
// ---------------------------------------------------------------------------

/// Symmetric binary adjacency with zero diagonal, stored as one packed row per individual.
class VillageNetwork {
 public:
  VillageNetwork() = default;

  /// Empty (edgeless) network on n individuals.
  explicit VillageNetwork(std::size_t n) : n_(n), rows_(n, StatusSet(n)) {}

  /// From a dense 0/1 matrix. Throws InputError on non-square, non-binary,
  /// asymmetric input or a nonzero diagonal.
  static VillageNetwork from_dense(const std::vector<std::vector<int>>& g) {
    const std::size_t n = g.size();
    VillageNetwork net(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (g[i].size() != n)
        throw InputError("adjacency row " + std::to_string(i + 1) + " has " +
                         std::to_string(g[i].size()) + " entries, expected " + std::to_string(n));
      for (std::size_t j = 0; j < n; ++j) {
        const int v = g[i][j];
        if (v != 0 && v != 1)
          throw InputError("adjacency entry (" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
                           ") is not 0/1");
        if (i == j && v != 0)
          throw InputError("nonzero diagonal at individual " + std::to_string(i + 1));
      }
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        if (g[i][j] != g[j][i])
          throw InputError("asymmetric adjacency: g(" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
                           ") != g(" + std::to_string(j + 1) + "," + std::to_string(i + 1) + ")");
        if (g[i][j]) net.link(i, j);
      }
    return net;
  }

  /// From 0-based undirected edges; duplicates are harmless.
  static VillageNetwork from_edges(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
    VillageNetwork net(n);
    for (auto [a, b] : edges) {
      if (a >= n || b >= n) throw InputError("edge endpoint out of range");
      if (a == b) throw InputError("self-loop at individual " + std::to_string(a + 1));
      net.link(a, b);
    }
    return net;
  }

  std::size_t size() const noexcept { return n_; }
  bool linked(std::size_t i, std::size_t j) const noexcept { return rows_[i].test(j); }
  const StatusSet& neighbors(std::size_t i) const noexcept { return rows_[i]; }
  std::size_t degree(std::size_t i) const noexcept { return rows_[i].count(); }

  std::size_t max_degree() const noexcept {
    std::size_t m = 0;
    for (const auto& r : rows_) m = std::max(m, r.count());
    return m;
  }

  std::size_t edge_count() const noexcept {
    std::size_t c = 0;
    for (const auto& r : rows_) c += r.count();
    return c / 2;
  }

  std::vector<std::vector<int>> to_dense() const {
    std::vector<std::vector<int>> g(n_, std::vector<int>(n_, 0));
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j) g[i][j] = linked(i, j) ? 1 : 0;
    return g;
  }

  /// Graph distance from the nearest member of sources; SIZE_MAX when unreachable.
  std::vector<std::size_t> distances_from(const StatusSet& sources) const {
    std::vector<std::size_t> dist(n_, std::numeric_limits<std::size_t>::max());
    std::deque<std::size_t> queue;
    sources.for_each_set([&](std::size_t i) {
      dist[i] = 0;
      queue.push_back(i);
    });
    while (!queue.empty()) {
      const std::size_t u = queue.front();
      queue.pop_front();
      rows_[u].for_each_set([&](std::size_t v) {
        if (dist[v] == std::numeric_limits<std::size_t>::max()) {
          dist[v] = dist[u] + 1;
          queue.push_back(v);
        }
      });
    }
    return dist;
  }

  friend bool operator==(const VillageNetwork& a, const VillageNetwork& b) noexcept {
    return a.n_ == b.n_ && a.rows_ == b.rows_;
  }

 private:
  void link(std::size_t a, std::size_t b) {
    rows_[a].set(b);
    rows_[b].set(a);
  }

  std::size_t n_ = 0;
  std::vector<StatusSet> rows_;
};

// ---------------------------------------------------------------------------
// SeedVector, OutcomeMatrix, InfoScenario
// ---------------------------------------------------------------------------

/// Information injection points (status column 0).
class SeedVector {
 public:
  SeedVector() = default;
  explicit SeedVector(StatusSet s) : s_(std::move(s)) {
    if (!s_.any()) throw InputError("seed vector has no information injection point");
  }
  static SeedVector from_indices(std::size_t n, const std::vector<std::size_t>& ips) {
    StatusSet s(n);
    for (auto i : ips) {
      if (i >= n) throw InputError("injection point " + std::to_string(i + 1) + " out of range");
      s.set(i);
    }
    return SeedVector(std::move(s));
  }

  std::size_t size() const noexcept { return s_.size(); }
  bool is_ip(std::size_t i) const noexcept { return s_.test(i); }
  const StatusSet& bits() const noexcept { return s_; }

  friend bool operator==(const SeedVector&, const SeedVector&) = default;

 private:
  StatusSet s_;
};

/// Observed participation dummies, one packed column per period t = 1..T.
class OutcomeMatrix {
 public:
  OutcomeMatrix() = default;
  OutcomeMatrix(std::size_t n, std::size_t periods) : n_(n), cols_(periods, StatusSet(n)) {}

  /// rows[i][t-1] = y_it.
  static OutcomeMatrix from_rows(const std::vector<std::vector<int>>& rows) {
    if (rows.empty()) throw InputError("outcome matrix has no rows");
    const std::size_t periods = rows.front().size();
    OutcomeMatrix y(rows.size(), periods);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != periods) throw InputError("outcome matrix is ragged at row " + std::to_string(i + 1));
      for (std::size_t t = 0; t < periods; ++t) {
        if (rows[i][t] != 0 && rows[i][t] != 1)
          throw InputError("outcome entry (" + std::to_string(i + 1) + "," + std::to_string(t + 1) + ") is not 0/1");
        y.set(i, t + 1, rows[i][t] == 1);
      }
    }
    return y;
  }

  std::size_t size() const noexcept { return n_; }
  std::size_t periods() const noexcept { return cols_.size(); }

  /// y_it for t in 1..T; t = 0 reads as 0 (nobody participates before period 1).
  bool at(std::size_t i, std::size_t t) const noexcept { return t > 0 && cols_[t - 1].test(i); }
  void set(std::size_t i, std::size_t t, bool v) { cols_.at(t - 1).assign(i, v); }
  const StatusSet& column(std::size_t t) const { return cols_.at(t - 1); }

  /// First period with y_it = 1, or 0 when i never participates.
  std::size_t first_participation(std::size_t i) const noexcept {
    for (std::size_t t = 1; t <= periods(); ++t)
      if (at(i, t)) return t;
    return 0;
  }

  /// Copy restricted to the first `periods` columns.
  OutcomeMatrix truncated(std::size_t periods) const {
    OutcomeMatrix y(n_, periods);
    for (std::size_t t = 1; t <= periods; ++t) y.cols_[t - 1] = cols_.at(t - 1);
    return y;
  }

  std::vector<std::vector<int>> to_rows() const {
    std::vector<std::vector<int>> rows(n_, std::vector<int>(periods(), 0));
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t t = 1; t <= periods(); ++t) rows[i][t - 1] = at(i, t) ? 1 : 0;
    return rows;
  }

  friend bool operator==(const OutcomeMatrix&, const OutcomeMatrix&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<StatusSet> cols_;
};

/// One latent realization of the information statuses S_1..S_{T-1}.
class InfoScenario {
 public:
  InfoScenario() = default;
  InfoScenario(std::size_t n, std::size_t exchanges) : n_(n), cols_(exchanges, StatusSet(n)) {}

  std::size_t size() const noexcept { return n_; }
  std::size_t exchanges() const noexcept { return cols_.size(); }

  /// s_it for t in 1..T-1.
  bool at(std::size_t i, std::size_t t) const noexcept { return cols_[t - 1].test(i); }
  void set(std::size_t i, std::size_t t, bool v) { cols_.at(t - 1).assign(i, v); }
  const StatusSet& column(std::size_t t) const { return cols_.at(t - 1); }
  StatusSet& column(std::size_t t) { return cols_.at(t - 1); }

  std::vector<std::vector<int>> to_rows() const {
    std::vector<std::vector<int>> rows(n_, std::vector<int>(exchanges(), 0));
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t t = 1; t <= exchanges(); ++t) rows[i][t - 1] = at(i, t) ? 1 : 0;
    return rows;
  }

  friend bool operator==(const InfoScenario&, const InfoScenario&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<StatusSet> cols_;
};

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

/// Participation probability p and transmission probability q.
struct ParamPoint {
  double p = 0.5;
  double q = 0.5;

  static ParamPoint checked(double p, double q) {
    if (!(p >= 0.0 && p <= 1.0) || !(q >= 0.0 && q <= 1.0))
      throw InputError("parameters must lie in [0,1]: p=" + std::to_string(p) + " q=" + std::to_string(q));
    return {p, q};
  }

  friend bool operator==(const ParamPoint&, const ParamPoint&) = default;
};

// ---------------------------------------------------------------------------
// Village bundle and data validation
// ---------------------------------------------------------------------------

struct Village {
  std::string name;
  VillageNetwork network;
  SeedVector seeds;
  OutcomeMatrix outcomes;

  std::size_t size() const noexcept { return network.size(); }
  std::size_t periods() const noexcept { return outcomes.periods(); }
};

/// Throws ValidationError (individual and period are 0-based / 1-based) when the
/// outcome matrix cannot have been generated by the model for this network and seeds.
inline void validate(const Village& v) {
  const std::size_t n = v.network.size();
  if (v.seeds.size() != n || v.outcomes.size() != n)
    throw InputError("village '" + v.name + "': network, seeds and outcomes disagree on size");
  if (v.outcomes.periods() < 1) throw InputError("village '" + v.name + "': no outcome periods");
  const auto dist = v.network.distances_from(v.seeds.bits());
  const std::size_t T = v.outcomes.periods();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 2; t <= T; ++t)
      if (v.outcomes.at(i, t - 1) && !v.outcomes.at(i, t))
        throw ValidationError("village '" + v.name + "': individual " + std::to_string(i + 1) +
                                  " stops participating in period " + std::to_string(t),
                              i, t);
    const std::size_t first = v.outcomes.first_participation(i);
    if (first == 0) continue;
    if (first == 1 && !v.seeds.is_ip(i))
      throw ValidationError("village '" + v.name + "': individual " + std::to_string(i + 1) +
                                " participates in period 1 without being an injection point",
                            i, 1);
    if (v.seeds.is_ip(i) && first > 1)
      throw ValidationError("village '" + v.name + "': injection point " + std::to_string(i + 1) +
                                " opted out in period 1 but participates in period " + std::to_string(first),
                            i, first);
    if (dist[i] == std::numeric_limits<std::size_t>::max() || dist[i] + 1 > first)
      throw ValidationError("village '" + v.name + "': individual " + std::to_string(i + 1) +
                                " participates in period " + std::to_string(first) +
                                " but is too far from every injection point",
                            i, first);
  }
}

// ---------------------------------------------------------------------------
// Densities
// ---------------------------------------------------------------------------

/// Reception probabilities r_i = 1 - prod_j (1 - g_ij q s_j) for a status vector.
struct ReceptionVector {
  std::vector<double> r;
  std::size_t period = 0;
};

inline ReceptionVector reception_probabilities(const VillageNetwork& net, const StatusSet& status, double q,
                                               std::size_t period = 0) {
  if (status.size() != net.size())
    throw InputError("status vector has length " + std::to_string(status.size()) + ", network has " +
                     std::to_string(net.size()) + " individuals");
  ReceptionVector out{std::vector<double>(net.size(), 0.0), period};
  for (std::size_t i = 0; i < net.size(); ++i) {
    double none = 1.0;
    status.for_each_set([&](std::size_t j) {
      if (net.linked(i, j)) none *= (1.0 - q);
    });
    out.r[i] = 1.0 - none;
  }
  return out;
}

inline double reception_probability(std::size_t informed_links, double q) {
  return 1.0 - std::pow(1.0 - q, static_cast<double>(informed_links));
}

/// P(Y_i1 = y | S_i0 = s0).
inline double first_outcome_density(bool y, bool s0, double p) {
  const double yv = y, sv = s0;
  return sv * (yv * p + (1 - yv) * (1 - p)) + (1 - sv) * (1 - yv);
}

/// P(Y_it = y_now | Y_i(t-1) = y_prev, S_i(t-1) = s_prev, S_i(t-2) = s_prev2) for t >= 2.
inline double outcome_density(bool y_now, bool y_prev, bool s_prev, bool s_prev2, double p) {
  const double yn = y_now, yp = y_prev;
  const double switched = static_cast<double>(s_prev) * (1.0 - static_cast<double>(s_prev2));
  return yp * yn + (1 - yp) * yn * (switched * p) + (1 - yp) * (1 - yn) * (1 - switched * p);
}

/// P(S_it = s_now | S_i(t-1) = s_prev, r_it, Y_it = y_now).
inline double info_density(bool s_now, bool s_prev, double r, bool y_now) {
  const double sn = s_now, sp = s_prev, y = y_now;
  return y * sn + (1 - y) * (sn * (1 - sp) * r + (1 - sn) * (1 - sp) * (1 - r) + sn * sp);
}

/// Likelihood contributions of a potentially informed individual.
struct PIIContribution {
  double a = 0.0;  ///< newly informed, opted out: r (1-p)
  double b = 1.0;  ///< uninformed: 1-r
  double c = 1.0;  ///< informed and opted out earlier

  static PIIContribution from(double r, double p) { return {r * (1.0 - p), 1.0 - r, 1.0}; }
  double total() const noexcept { return a + b; }
};

/// Reception probability at which scenarios A and B are equally likely.
inline double trim_threshold(double p) { return 1.0 / (2.0 - p); }

/// Participation probability p at which A and B tie for a PII with `links` informed
/// neighbours. May be negative; callers clamp for display.
inline double equivalence_curve(std::size_t links, double q) {
  if (links == 0) throw InputError("equivalence curve needs at least one informed link");
  return 2.0 - 1.0 / (1.0 - std::pow(1.0 - q, static_cast<double>(links)));
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

enum class IndividualKind { FormerParticipant, NewParticipant, OutOfReach, PII };
enum class PIIState { None, Free, TrimmedA, TrimmedB, PrevInformed };

struct IndividualClass {
  IndividualKind kind = IndividualKind::OutOfReach;
  PIIState state = PIIState::None;

  friend bool operator==(const IndividualClass&, const IndividualClass&) = default;
};

inline const char* to_string(IndividualKind k) {
  switch (k) {
    case IndividualKind::FormerParticipant: return "former_participant";
    case IndividualKind::NewParticipant: return "new_participant";
    case IndividualKind::OutOfReach: return "out_of_reach";
    case IndividualKind::PII: return "pii";
  }
  return "?";
}

/// Classify every individual at period t (2 <= t <= T) given reception probabilities
/// r_i(t-1) of the current branch and the branch's informed-and-opted-out flags.
inline std::vector<IndividualClass> classify(const OutcomeMatrix& y, std::size_t t, const ReceptionVector& r_prev,
                                             const StatusSet& opted_out) {
  if (t < 2 || t > y.periods())
    throw InputError("classify: period " + std::to_string(t) + " outside 2.." + std::to_string(y.periods()));
  if (r_prev.r.size() != y.size() || opted_out.size() != y.size())
    throw InputError("classify: dimension mismatch");
  std::vector<IndividualClass> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y.at(i, t - 1)) {
      out[i] = {IndividualKind::FormerParticipant, PIIState::None};
    } else if (y.at(i, t)) {
      if (opted_out.test(i) || r_prev.r[i] <= 0.0)
        throw ValidationError("individual " + std::to_string(i + 1) + " participates in period " +
                                  std::to_string(t) + " but cannot have been newly informed",
                              i, t);
      out[i] = {IndividualKind::NewParticipant, PIIState::None};
    } else if (opted_out.test(i)) {
      out[i] = {IndividualKind::PII, PIIState::PrevInformed};
    } else if (r_prev.r[i] <= 0.0) {
      out[i] = {IndividualKind::OutOfReach, PIIState::None};
    } else {
      out[i] = {IndividualKind::PII, PIIState::Free};
    }
  }
  return out;
}

}  // namespace netdiff
