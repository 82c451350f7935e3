// netdiff command-line front end.

#include <netdiff/diagnostics.hpp>
#include <netdiff/estimation.hpp>
#include <netdiff/io.hpp>
#include <netdiff/parallel.hpp>
#include <netdiff/simulation.hpp>

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace netdiff;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kInvalid = 2, kBudget = 3 };

void log_line(const std::string& msg) { std::cerr << "[netdiff] " << msg << '\n'; }

std::string seconds_str(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3fs", s);
  return buf;
}

struct GridSpec {
  std::string p = "0.01:0.99:0.01";
  std::string q = "0.01:0.99:0.01";

  /// "min:max:step" or an explicit comma-separated list.
  static std::vector<double> axis(const std::string& spec) {
    if (spec.find(':') != std::string::npos) {
      const auto a = spec.find(':'), b = spec.find(':', a + 1);
      if (b == std::string::npos) throw InputError("grid axis '" + spec + "' must be min:max:step");
      return Grid::axis(parse_double(spec.substr(0, a)), parse_double(spec.substr(a + 1, b - a - 1)),
                        parse_double(spec.substr(b + 1)));
    }
    std::vector<double> out;
    for (const auto& f : split_fields(spec)) out.push_back(parse_double(f));
    return out;
  }

  Grid build() const { return Grid(axis(p), axis(q)); }
};

void add_grid_options(CLI::App* app, GridSpec& g) {
  app->add_option("--grid-p", g.p, "p axis as min:max:step or a comma list")->capture_default_str();
  app->add_option("--grid-q", g.q, "q axis as min:max:step or a comma list")->capture_default_str();
}

std::vector<double> parse_levels(const std::string& s) {
  std::vector<double> out;
  for (const auto& f : split_fields(s)) out.push_back(parse_double(f));
  for (double l : out)
    if (!(l > 0.0 && l < 1.0)) throw InputError("confidence level " + format_double(l) + " is outside (0,1)");
  return out;
}

/// Trimming values: "unbounded", "all" (0..d-bar_max), "a-b", or a comma list.
struct DSpec {
  bool all = false;
  std::vector<std::size_t> values;
};

DSpec parse_d(const std::string& s) {
  DSpec out;
  for (const auto& f : split_fields(s)) {
    if (f == "unbounded" || f == "exact") {
      out.values.push_back(kUnbounded);
    } else if (f == "all") {
      out.all = true;
    } else if (const auto dash = f.find('-'); dash != std::string::npos) {
      const auto lo = std::stoul(f.substr(0, dash)), hi = std::stoul(f.substr(dash + 1));
      if (hi < lo) throw InputError("bad trimming range '" + f + "'");
      for (auto d = lo; d <= hi; ++d) out.values.push_back(d);
    } else {
      std::size_t pos = 0;
      const auto d = std::stoul(f, &pos);
      if (pos != f.size()) throw InputError("bad trimming value '" + f + "'");
      out.values.push_back(d);
    }
  }
  std::sort(out.values.begin(), out.values.end());
  out.values.erase(std::unique(out.values.begin(), out.values.end()), out.values.end());
  if (out.values.empty() && !out.all) throw InputError("no trimming values given");
  return out;
}

std::string d_tag(std::size_t d) { return d == kUnbounded ? "exact" : "d" + std::to_string(d); }

void require_exact_budget(const Village& v, std::uint64_t budget) {
  const auto est = exact_branch_estimate(v, budget);
  if (est > budget)
    throw BudgetError("village '" + v.name + "': exact evaluation needs more than " + std::to_string(budget) +
                          " period-1.." + std::to_string(v.periods() - 2) +
                          " branches; raise --budget or use a finite --d",
                      static_cast<double>(est));
}

Sample load_sample(const std::string& path) {
  Sample s;
  for (auto& rec : load_villages(path)) s.add(std::move(rec.village));
  return s;
}

// ---------------------------------------------------------------------------

struct SourceOptions {
  std::vector<std::string> networks;
  std::string surrogate;  // "", "er" or "ws"
  std::size_t surrogate_count = 1;
  std::size_t surrogate_size = 60;
  double link_prob = 0.08;
  std::size_t ws_neighbors = 2;
  double rewire = 0.1;
};

void add_source_options(CLI::App* app, SourceOptions& o) {
  app->add_option("--network", o.networks, "source network file(s), dense CSV or edge list");
  app->add_option("--surrogate", o.surrogate, "generate source networks instead: er or ws")
      ->check(CLI::IsMember({"er", "ws"}));
  app->add_option("--surrogate-count", o.surrogate_count, "number of surrogate networks")->capture_default_str();
  app->add_option("--surrogate-size", o.surrogate_size, "individuals per surrogate network")->capture_default_str();
  app->add_option("--link-prob", o.link_prob, "er link probability")->capture_default_str();
  app->add_option("--ws-neighbors", o.ws_neighbors, "ws ring neighbours per side")->capture_default_str();
  app->add_option("--rewire", o.rewire, "ws rewiring probability")->capture_default_str();
}

std::vector<VillageNetwork> build_sources(const SourceOptions& o, std::uint64_t master_seed) {
  std::vector<VillageNetwork> out;
  for (const auto& p : o.networks) out.push_back(load_network(p));
  if (!o.surrogate.empty()) {
    const CounterRng rng = CounterRng(master_seed).split(0x5077);
    for (std::size_t k = 0; k < o.surrogate_count; ++k)
      out.push_back(o.surrogate == "er" ? erdos_renyi(o.surrogate_size, o.link_prob, rng.split(k))
                                        : small_world(o.surrogate_size, o.ws_neighbors, o.rewire, rng.split(k)));
  }
  if (out.empty()) throw InputError("give --network files or --surrogate");
  return out;
}

// ---------------------------------------------------------------------------

int run(int argc, char** argv) {
  CLI::App app{"Estimation of network diffusion models with latent information scenarios"};
  app.require_subcommand(1);
  std::size_t workers = default_workers();
  std::uint64_t budget = 5'000'000;
  app.add_option("--workers", workers, "worker threads (default: NETDIFF_WORKERS or hardware concurrency)")
      ->check(CLI::PositiveNumber);
  app.add_option("--budget", budget, "largest exact branch count accepted before refusing")->capture_default_str();

  // count-scenarios
  auto* count = app.add_subcommand("count-scenarios", "count monotone information scenarios from the IPs");
  std::string count_network, count_villages;
  std::vector<std::size_t> count_ips;
  std::size_t count_exchanges = 0;
  std::uint64_t count_cap = std::numeric_limits<std::uint64_t>::max();
  count->add_option("--network", count_network, "network file");
  count->add_option("--ip", count_ips, "1-based injection points");
  count->add_option("--villages", count_villages, "village JSON (uses its IPs and T-1 exchanges)");
  count->add_option("--exchanges", count_exchanges, "number of information exchanges");
  count->add_option("--cap", count_cap, "stop counting at this value");

  // simulate
  auto* sim = app.add_subcommand("simulate", "simulate villages: outcomes Y, latent S and seeds s0");
  SourceOptions sim_src;
  add_source_options(sim, sim_src);
  std::size_t sim_villages = 1, sim_size = 20, sim_periods = 4;
  double sim_p0 = 0.5, sim_q0 = 0.5;
  std::uint64_t sim_seed_s = 1, sim_seed_d = 2, sim_master = 0;
  std::string sim_out;
  sim->add_option("--villages", sim_villages, "number of villages")->capture_default_str();
  sim->add_option("--size", sim_size, "individuals per village (submatrix size)")->capture_default_str();
  sim->add_option("--periods", sim_periods, "outcome periods T")->capture_default_str();
  sim->add_option("--p0", sim_p0, "participation probability")->capture_default_str();
  sim->add_option("--q0", sim_q0, "transmission probability")->capture_default_str();
  sim->add_option("--seed-s", sim_seed_s, "seed for IP draws and submatrix offsets")->capture_default_str();
  sim->add_option("--seed-d", sim_seed_d, "seed for the data simulation")->capture_default_str();
  sim->add_option("--master-seed", sim_master, "master seed")->capture_default_str();
  sim->add_option("--out", sim_out, "output village JSON")->required();

  // estimate
  auto* est = app.add_subcommand("estimate", "likelihood surfaces and estimates per trimming value");
  std::string est_villages, est_out, est_d = "all", est_levels = "0.90,0.95,0.99";
  GridSpec est_grid;
  est->add_option("--villages", est_villages, "village JSON")->required();
  est->add_option("--d", est_d, "trimming values: all, unbounded, a-b or a comma list")->capture_default_str();
  est->add_option("--levels", est_levels, "confidence levels")->capture_default_str();
  est->add_option("--out", est_out, "output directory")->required();
  add_grid_options(est, est_grid);

  // mc
  auto* mc = app.add_subcommand("mc", "Monte Carlo study of the trimming estimator");
  SourceOptions mc_src;
  add_source_options(mc, mc_src);
  MCConfig cfg;
  std::string mc_out, mc_levels = "0.95";
  GridSpec mc_grid;
  mc->add_option("--size", cfg.submatrix_size, "individuals per village N")->capture_default_str();
  mc->add_option("--villages", cfg.villages, "villages per replication V")->capture_default_str();
  mc->add_option("--replications", cfg.replications, "replications R")->capture_default_str();
  mc->add_option("--periods", cfg.periods, "outcome periods T")->capture_default_str();
  mc->add_option("--p0", cfg.p0, "true participation probability")->capture_default_str();
  mc->add_option("--q0", cfg.q0, "true transmission probability")->capture_default_str();
  mc->add_option("--seed-s-first", cfg.seed_s_first, "seed S of the first replication")->capture_default_str();
  mc->add_option("--seed-d-first", cfg.seed_d_first, "seed D of the first replication")->capture_default_str();
  mc->add_option("--master-seed", cfg.master_seed, "master seed")->capture_default_str();
  mc->add_option("--levels", mc_levels, "confidence levels")->capture_default_str();
  mc->add_option("--out", mc_out, "output directory")->required();
  add_grid_options(mc, mc_grid);

  // errcurve
  auto* ec = app.add_subcommand("errcurve", "trimming error curve per village at one grid point");
  std::string ec_villages, ec_out;
  double ec_p = 0.5, ec_q = 0.5;
  std::optional<std::size_t> ec_dmax;
  ec->add_option("--villages", ec_villages, "village JSON")->required();
  ec->add_option("--p", ec_p, "p")->capture_default_str();
  ec->add_option("--q", ec_q, "q")->capture_default_str();
  ec->add_option("--d-max", ec_dmax, "largest trimming value (default: d-bar of each village)");
  ec->add_option("--out", ec_out, "output CSV")->required();

  // audit
  auto* au = app.add_subcommand("audit", "audit first-exchange trimming choices");
  std::string au_villages, au_out;
  double au_p = 0.5, au_q = 0.5;
  std::size_t au_d = 0;
  au->add_option("--villages", au_villages, "village JSON")->required();
  au->add_option("--p", au_p, "p")->capture_default_str();
  au->add_option("--q", au_q, "q")->capture_default_str();
  au->add_option("--d", au_d, "trimming value")->capture_default_str();
  au->add_option("--out", au_out, "output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kInvalid;
  }

  if (*count) {
    std::uint64_t n = 0;
    if (!count_villages.empty()) {
      const auto recs = load_villages(count_villages);
      const auto& v = recs.front().village;
      n = count_scenarios(v.network, v.seeds, count_exchanges ? count_exchanges : v.periods() - 1, count_cap);
    } else {
      if (count_network.empty() || count_ips.empty()) throw InputError("count-scenarios needs --network and --ip");
      const auto net = load_network(count_network);
      std::vector<std::size_t> ips;
      for (auto i : count_ips) {
        if (i < 1 || i > net.size()) throw InputError("IP id " + std::to_string(i) + " out of range");
        ips.push_back(i - 1);
      }
      n = count_scenarios(net, SeedVector::from_indices(net.size(), ips), count_exchanges, count_cap);
    }
    std::cout << n << '\n';
    return kOk;
  }

  if (*sim) {
    MCConfig c;
    c.submatrix_size = sim_size;
    c.villages = sim_villages;
    c.replications = 1;
    c.p0 = sim_p0;
    c.q0 = sim_q0;
    c.periods = sim_periods;
    c.seed_s_first = sim_seed_s;
    c.seed_d_first = sim_seed_d;
    c.master_seed = sim_master;
    c.sources = build_sources(sim_src, sim_master);
    c.check();
    std::vector<InfoScenario> truth;
    auto villages = simulate_replication(c, 0, nullptr, &truth);
    std::vector<VillageRecord> out;
    for (std::size_t v = 0; v < villages.size(); ++v) {
      villages[v].name = "village" + std::to_string(v + 1);
      out.push_back({std::move(villages[v]), std::move(truth[v])});
    }
    save_villages(sim_out, out);
    log_line("wrote " + std::to_string(out.size()) + " villages to " + sim_out);
    return kOk;
  }

  if (*est) {
    const Sample sample = load_sample(est_villages);
    const Grid grid = est_grid.build();
    const auto levels = parse_levels(est_levels);
    auto ds = parse_d(est_d);
    const bool exact_needed = ds.all || std::find(ds.values.begin(), ds.values.end(), kUnbounded) != ds.values.end();
    if (exact_needed)
      for (std::size_t k = 0; k < sample.size(); ++k) require_exact_budget(sample.village(k), budget);
    if (ds.all) {
      const std::size_t top = sample.max_pii_overall();
      for (std::size_t d = 0; d <= top; ++d) ds.values.push_back(d);
      std::sort(ds.values.begin(), ds.values.end());
      ds.values.erase(std::unique(ds.values.begin(), ds.values.end()), ds.values.end());
    }
    SearchOptions opt;
    opt.workers = workers;
    opt.levels = levels;
    opt.on_village_done = [&](std::size_t k, std::size_t d, double secs) {
      log_line("village " + sample.village(k).name + " " + d_tag(d) + ": " + std::to_string(grid.size()) +
               " grid points in " + seconds_str(secs));
    };
    const auto seq = estimate_sequence(sample, grid, ds.values, opt);
    json records = json::array();
    for (std::size_t k = 0; k < seq.records.size(); ++k) {
      const bool baseline = k + 1 == seq.records.size();
      const std::string file = baseline ? "surface_two_period.csv" : "surface_" + d_tag(seq.surfaces[k].d) + ".csv";
      write_text(fs::path(est_out) / file, surface_csv(seq.surfaces[k]));
      records.push_back(estimate_to_json(seq.records[k]));
    }
    json top{{"villages", sample.size()}, {"grid_points", grid.size()}, {"estimates", records}};
    json dbar = json::array();
    for (std::size_t k = 0; k < sample.size(); ++k)
      dbar.push_back(sample.max_pii_known(k) ? json(sample.max_pii(k)) : json(nullptr));
    top["max_pii"] = dbar;
    write_text(fs::path(est_out) / "estimates.json", top.dump(1) + "\n");
    for (const auto& r : seq.records)
      if (std::isnan(r.p_hat)) log_line("warning: " + r.label + " surface is -inf at every grid point");
    for (const auto& r : seq.records)
      std::cout << r.label << ": p=" << format_double(r.p_hat) << " q=" << format_double(r.q_hat)
                << " loglik=" << format_double(r.loglik) << (r.boundary ? " (boundary)" : "") << '\n';
    return kOk;
  }

  if (*mc) {
    cfg.sources = build_sources(mc_src, cfg.master_seed);
    cfg.grid = mc_grid.build();
    cfg.levels = parse_levels(mc_levels);
    cfg.workers = workers;
    cfg.exact_budget = budget;
    cfg.check();
    std::string lines;
    const auto results = run_monte_carlo(cfg, [&](const ReplicationResult& r) {
      log_line("replication " + std::to_string(r.replication) + (r.ok ? " ok" : " failed: " + r.error) + " in " +
               seconds_str(r.seconds));
      lines += replication_to_json(r).dump() + "\n";
    });
    write_text(fs::path(mc_out) / "results.jsonl", lines);
    write_text(fs::path(mc_out) / "summary.csv", summary_csv(summarize(results)));
    std::size_t failed = 0;
    for (const auto& r : results) failed += r.ok ? 0 : 1;
    std::cout << results.size() << " replications, " << failed << " failed\n";
    return kOk;
  }

  if (*ec) {
    const ParamPoint theta = ParamPoint::checked(ec_p, ec_q);
    const Sample sample = load_sample(ec_villages);
    std::string out;
    for (std::size_t k = 0; k < sample.size(); ++k) {
      require_exact_budget(sample.village(k), budget);
      const auto start = std::chrono::steady_clock::now();
      const auto curve = error_curve(sample.evaluator(k), theta, ec_dmax, budget);
      std::string csv = error_curve_csv(curve);
      out += k == 0 ? csv : csv.substr(csv.find('\n') + 1);
      const auto slope = slope_identity_check(curve);
      const auto conv = convexity_report(curve);
      log_line("village " + sample.village(k).name + ": d-bar " + std::to_string(curve.max_d()) +
               ", slope identity discrepancy " + format_double(slope.max_discrepancy) + ", convexity violations " +
               std::to_string(conv.violations.size()) + " in " +
               seconds_str(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()));
    }
    write_text(ec_out, out);
    return kOk;
  }

  if (*au) {
    const ParamPoint theta = ParamPoint::checked(au_p, au_q);
    const Sample sample = load_sample(au_villages);
    std::string out = audit_csv_header();
    std::size_t mistakes = 0;
    for (std::size_t k = 0; k < sample.size(); ++k) {
      const auto audits = mistake_audit(sample.evaluator(k), theta, au_d, budget);
      mistakes += mistake_count(audits);
      out += audit_csv_rows(sample.village(k).name, theta, au_d, audits);
    }
    write_text(au_out, out);
    std::cout << mistakes << " mistakes\n";
    return kOk;
  }
  return kFailure;
}

int report(const std::string& kind, const std::string& message, int code, json extra = json::object()) {
  extra["error"] = kind;
  extra["message"] = message;
  std::cerr << extra.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ValidationError& e) {
    return report("validation", e.what(), kInvalid, {{"individual", e.individual() + 1}, {"period", e.period()}});
  } catch (const InputError& e) {
    return report("input", e.what(), kInvalid);
  } catch (const BudgetError& e) {
    return report("budget", e.what(), kBudget, {{"estimate", e.estimate()}});
  } catch (const EstimationError& e) {
    return report("estimation", e.what(), kFailure);
  } catch (const std::exception& e) {
    return report("internal", e.what(), kFailure);
  }
}
