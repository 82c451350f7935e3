#pragma once

// Independent reference computations for the test suites. Nothing here calls the
// scenario engine; likelihoods are rebuilt from the generative description of the model.

#include <netdiff/model.hpp>
#include <netdiff/rng.hpp>
#include <netdiff/simulation.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

using netdiff::OutcomeMatrix;
using netdiff::ParamPoint;
using netdiff::Village;

inline constexpr std::size_t kNever = std::numeric_limits<std::size_t>::max();

/// Probability of (Y, S) where S is given by the time tau_i at which i becomes informed
/// (0 for IPs, kNever if never). Written directly from the generative story:
/// informed individuals decide once, in the period after they learn, whether to participate.
inline double generative_probability(const Village& v, const ParamPoint& th, const std::vector<std::size_t>& tau) {
  const std::size_t n = v.size(), T = v.periods();
  double prob = 1.0;
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      if (tau[i] < t) continue;  // already informed before exchange t
      std::size_t links = 0;
      for (std::size_t j = 0; j < n; ++j)
        if (v.network.linked(i, j) && tau[j] <= t - 1) ++links;
      const double r = 1.0 - std::pow(1.0 - th.q, static_cast<double>(links));
      prob *= tau[i] == t ? r : 1.0 - r;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t first = v.outcomes.first_participation(i);
    if (tau[i] == kNever || tau[i] + 1 > T) {
      if (first != 0) return 0.0;
      continue;
    }
    const std::size_t decide = tau[i] + 1;  // period of the single participation decision
    if (first == 0) {
      prob *= 1.0 - th.p;
    } else if (first == decide) {
      prob *= th.p;
    } else {
      return 0.0;
    }
    for (std::size_t t = decide; t <= T; ++t)
      if (v.outcomes.at(i, t) != (first != 0)) return 0.0;
  }
  return prob;
}

/// Calls f(tau) for every assignment of informing times to non-IPs (1..T-1 or never).
inline void for_each_informing_time(const Village& v, const std::function<void(const std::vector<std::size_t>&)>& f) {
  const std::size_t n = v.size(), T = v.periods();
  std::vector<std::size_t> tau(n, kNever), free;
  for (std::size_t i = 0; i < n; ++i) {
    if (v.seeds.is_ip(i))
      tau[i] = 0;
    else
      free.push_back(i);
  }
  const std::size_t options = T;  // 1..T-1 plus never
  std::vector<std::size_t> digit(free.size(), 0);
  for (;;) {
    for (std::size_t k = 0; k < free.size(); ++k) tau[free[k]] = digit[k] + 1 < options ? digit[k] + 1 : kNever;
    f(tau);
    std::size_t k = 0;
    while (k < free.size() && ++digit[k] == options) digit[k++] = 0;
    if (k == free.size()) break;
  }
}

/// S matrix (columns 1..T-1) for informing times.
inline netdiff::InfoScenario scenario_from_tau(const Village& v, const std::vector<std::size_t>& tau) {
  netdiff::InfoScenario s(v.size(), v.periods() - 1);
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t t = 1; t + 1 <= v.periods(); ++t) s.set(i, t, tau[i] <= t);
  return s;
}

/// Exact likelihood by exhaustive summation of the generative probability.
inline double brute_force_likelihood(const Village& v, const ParamPoint& th) {
  double total = 0.0;
  for_each_informing_time(v, [&](const std::vector<std::size_t>& tau) { total += generative_probability(v, th, tau); });
  return total;
}

/// Every outcome matrix with monotone rows (first participation in 1..T or never).
inline void for_each_outcome_matrix(std::size_t n, std::size_t T, const std::function<void(const OutcomeMatrix&)>& f) {
  std::vector<std::size_t> first(n, 0);
  for (;;) {
    OutcomeMatrix y(n, T);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t t = 1; t <= T; ++t) y.set(i, t, first[i] != 0 && t >= first[i]);
    f(y);
    std::size_t k = 0;
    while (k < n && ++first[k] == T + 1) first[k++] = 0;
    if (k == n) break;
  }
}

/// Random connected-ish network, random IPs, outcomes simulated from the model.
inline Village random_village(std::mt19937_64& gen, std::size_t n, std::size_t T, double link_prob,
                              std::size_t max_ips = 2) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 1; i < n; ++i) {  // random spanning tree keeps the graph connected
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    edges.emplace_back(pick(gen), i);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (u(gen) < link_prob) edges.emplace_back(i, j);
  auto net = netdiff::VillageNetwork::from_edges(n, edges);
  std::uniform_int_distribution<std::size_t> count(1, std::min(max_ips, n));
  std::vector<std::size_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = i;
  std::shuffle(ids.begin(), ids.end(), gen);
  ids.resize(count(gen));
  auto s0 = netdiff::SeedVector::from_indices(n, ids);
  const double p0 = 0.2 + 0.6 * u(gen), q0 = 0.2 + 0.7 * u(gen);
  auto sim = netdiff::simulate_adoption(net, s0, p0, q0, T, netdiff::CounterRng(gen()));
  return Village{"random", std::move(net), std::move(s0), std::move(sim.outcomes)};
}

inline bool close_rel(double a, double b, double rel) {
  if (a == b) return true;
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b));
}

}  // namespace oracle
