#pragma once

// File formats: networks (dense CSV or edge list), village JSON, surfaces (CSV),
// estimate records (JSON), Monte Carlo records (JSON lines), curves and audits (CSV).

#include <netdiff/diagnostics.hpp>
#include <netdiff/estimation.hpp>
#include <netdiff/model.hpp>
#include <netdiff/simulation.hpp>

#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace netdiff {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Text helpers
// ---------------------------------------------------------------------------

/// Shortest round-trip decimal; "nan", "inf", "-inf" for non-finite values.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x < 0 ? "-inf" : "inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double x = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw InputError("not a number: '" + std::string(s) + "'");
  return x;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

/// Split on commas, semicolons, tabs or spaces; empty fields are dropped.
inline std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',' || ch == ';' || ch == ' ' || ch == '\t' || ch == '\r') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

/// Simple comma-separated table with a header row.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const {
    for (std::size_t k = 0; k < header.size(); ++k)
      if (header[k] == name) return k;
    throw InputError("CSV has no column '" + std::string(name) + "'");
  }
};

inline CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cur;
    for (char ch : line) {
      if (ch == ',') {
        cells.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(ch);
      }
    }
    cells.push_back(cur);
    if (t.header.empty()) {
      t.header = std::move(cells);
    } else {
      if (cells.size() != t.header.size())
        throw InputError("CSV line " + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                         " fields, found " + std::to_string(cells.size()));
      t.rows.push_back(std::move(cells));
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Networks
// ---------------------------------------------------------------------------

/// Dense 0/1 matrix or two-column edge list with 1-based ids (header optional).
/// A square table of 0/1 entries is read as a dense matrix.
inline VillageNetwork parse_network(const std::string& text, const std::string& source = "network") {
  std::vector<std::vector<long>> rows;
  std::vector<std::size_t> line_of;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    const auto fields = split_fields(line);
    if (fields.empty() || fields[0].starts_with('#')) continue;
    std::vector<long> vals;
    bool numeric = true;
    for (const auto& f : fields) {
      long x = 0;
      const auto res = std::from_chars(f.data(), f.data() + f.size(), x);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size()) {
        numeric = false;
        break;
      }
      vals.push_back(x);
    }
    if (!numeric) {
      if (rows.empty() && !header_seen && fields.size() == 2) {
        header_seen = true;
        continue;
      }
      throw InputError(source + ":" + std::to_string(lineno) + ": non-integer field");
    }
    rows.push_back(std::move(vals));
    line_of.push_back(lineno);
  }
  if (rows.empty()) throw InputError(source + ": no data");

  bool dense = !header_seen;
  for (const auto& r : rows) {
    if (r.size() != rows.size()) dense = false;
    for (long x : r)
      if (x != 0 && x != 1) dense = false;
  }
  if (dense) {
    std::vector<std::vector<int>> g(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) g[i].assign(rows[i].begin(), rows[i].end());
    try {
      return VillageNetwork::from_dense(g);
    } catch (const InputError& e) {
      throw InputError(source + ": " + e.what());
    }
  }

  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::size_t n = 0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& r = rows[k];
    const std::string where = source + ":" + std::to_string(line_of[k]) + ": ";
    if (r.size() != 2) {
      if (r.size() > 2 && !header_seen)
        throw InputError(where + "dense matrix rows must have " + std::to_string(rows.size()) + " 0/1 entries");
      throw InputError(where + "edge list rows need exactly two node ids");
    }
    if (r[0] < 1 || r[1] < 1) throw InputError(where + "node ids are 1-based");
    if (r[0] == r[1]) throw InputError(where + "self-loop on node " + std::to_string(r[0]));
    edges.emplace_back(static_cast<std::size_t>(r[0] - 1), static_cast<std::size_t>(r[1] - 1));
    n = std::max<std::size_t>(n, static_cast<std::size_t>(std::max(r[0], r[1])));
  }
  return VillageNetwork::from_edges(n, edges);
}

inline VillageNetwork load_network(const std::filesystem::path& path) { return parse_network(read_text(path), path.string()); }

inline std::string dense_csv(const VillageNetwork& net) {
  std::string out;
  for (const auto& row : net.to_dense()) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out += ',';
      out += row[j] ? '1' : '0';
    }
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Villages
// ---------------------------------------------------------------------------

struct VillageRecord {
  Village village;
  std::optional<InfoScenario> info;  ///< latent truth, present for simulated data
};

inline std::vector<std::vector<int>> int_rows(const json& j, const std::string& what) {
  if (!j.is_array()) throw InputError(what + " must be an array of rows");
  std::vector<std::vector<int>> rows;
  for (const auto& r : j) {
    if (!r.is_array()) throw InputError(what + " must be an array of rows");
    rows.push_back(r.get<std::vector<int>>());
  }
  return rows;
}

/// Village object: {"name", "network" (path, relative to base_dir) or "adjacency" (dense rows),
/// "ip" (1-based ids), "outcomes" (one row per individual), optional "info"}.
inline VillageRecord village_from_json(const json& j, const std::filesystem::path& base_dir = {}) {
  try {
    VillageRecord rec;
    Village& v = rec.village;
    v.name = j.value("name", std::string("village"));
    if (j.contains("adjacency"))
      v.network = VillageNetwork::from_dense(int_rows(j.at("adjacency"), "adjacency"));
    else if (j.contains("network"))
      v.network = load_network(base_dir / j.at("network").get<std::string>());
    else
      throw InputError("village '" + v.name + "' has neither 'network' nor 'adjacency'");
    std::vector<std::size_t> ips;
    for (const auto& x : j.at("ip")) {
      const long id = x.get<long>();
      if (id < 1 || static_cast<std::size_t>(id) > v.network.size())
        throw InputError("village '" + v.name + "': IP id " + std::to_string(id) + " out of range");
      ips.push_back(static_cast<std::size_t>(id - 1));
    }
    v.seeds = SeedVector::from_indices(v.network.size(), ips);
    v.outcomes = OutcomeMatrix::from_rows(int_rows(j.at("outcomes"), "outcomes"));
    if (v.outcomes.size() != v.network.size())
      throw InputError("village '" + v.name + "': outcome rows do not match the network size");
    if (j.contains("info")) {
      const auto rows = int_rows(j.at("info"), "info");
      const std::size_t cols = rows.empty() ? 0 : rows[0].size();
      InfoScenario s(rows.size(), cols);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != cols) throw InputError("info rows have unequal length");
        for (std::size_t t = 1; t <= cols; ++t) s.set(i, t, rows[i][t - 1] != 0);
      }
      rec.info = std::move(s);
    }
    return rec;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed village JSON: ") + e.what());
  }
}

inline json village_to_json(const Village& v, const InfoScenario* info = nullptr) {
  json j;
  j["name"] = v.name;
  j["adjacency"] = v.network.to_dense();
  std::vector<std::size_t> ips;
  v.seeds.bits().for_each_set([&](std::size_t i) { ips.push_back(i + 1); });
  j["ip"] = ips;
  j["outcomes"] = v.outcomes.to_rows();
  if (info) j["info"] = info->to_rows();
  return j;
}

/// A village file holds one village object or {"villages": [...]}.
inline std::vector<VillageRecord> load_villages(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  const auto base = path.parent_path();
  std::vector<VillageRecord> out;
  if (j.contains("villages")) {
    for (const auto& item : j.at("villages")) out.push_back(village_from_json(item, base));
  } else {
    out.push_back(village_from_json(j, base));
  }
  if (out.empty()) throw InputError(path.string() + ": no villages");
  return out;
}

inline void save_villages(const std::filesystem::path& path, const std::vector<VillageRecord>& villages) {
  json arr = json::array();
  for (const auto& r : villages) arr.push_back(village_to_json(r.village, r.info ? &*r.info : nullptr));
  write_text(path, json{{"villages", arr}}.dump(1) + "\n");
}

// ---------------------------------------------------------------------------
// Surfaces and estimates
// ---------------------------------------------------------------------------

inline std::string surface_csv(const LikelihoodSurface& s) {
  std::string out = "p,q,loglik,dead_branches\n";
  for (std::size_t k = 0; k < s.loglik.size(); ++k) {
    const auto pt = s.grid.point(k);
    out += format_double(pt.p) + ',' + format_double(pt.q) + ',' + format_double(s.loglik[k]) + ',' +
           std::to_string(s.dead_branches.empty() ? 0 : s.dead_branches[k]) + '\n';
  }
  return out;
}

/// Inverse of surface_csv; the grid is rebuilt from the distinct axis values.
inline LikelihoodSurface parse_surface_csv(const std::string& text, std::size_t d = kUnbounded) {
  const auto t = parse_csv(text);
  const auto cp = t.column("p"), cq = t.column("q"), cl = t.column("loglik"), cd = t.column("dead_branches");
  std::vector<double> ps, qs;
  for (const auto& r : t.rows) {
    const double p = parse_double(r[cp]), q = parse_double(r[cq]);
    if (ps.empty() || ps.back() != p) ps.push_back(p);
    if (ps.size() == 1) qs.push_back(q);
  }
  LikelihoodSurface s;
  s.grid = Grid(ps, qs);
  s.d = d;
  if (t.rows.size() != s.grid.size()) throw InputError("surface CSV is not a full p-major grid");
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    const auto pt = s.grid.point(k);
    if (parse_double(t.rows[k][cp]) != pt.p || parse_double(t.rows[k][cq]) != pt.q)
      throw InputError("surface CSV row " + std::to_string(k + 2) + " is out of grid order");
    s.loglik.push_back(parse_double(t.rows[k][cl]));
    s.dead_branches.push_back(std::stoull(t.rows[k][cd]));
  }
  return s;
}

/// JSON number, or the strings "nan" / "-inf" / "inf" for non-finite values.
inline json number_json(double x) { return std::isfinite(x) ? json(x) : json(format_double(x)); }
inline double number_from_json(const json& j) { return j.is_string() ? parse_double(j.get<std::string>()) : j.get<double>(); }

inline json estimate_to_json(const EstimateRecord& r) {
  json j;
  j["label"] = r.label;
  j["d"] = r.d == kUnbounded ? json("unbounded") : json(r.d);
  j["two_period"] = r.two_period;
  j["p_hat"] = number_json(r.p_hat);
  j["q_hat"] = number_json(r.q_hat);
  j["loglik"] = number_json(r.loglik);
  j["boundary"] = r.boundary;
  json sets = json::array();
  for (const auto& cs : r.confidence_sets) {
    json c;
    c["level"] = cs.level;
    c["critical_value"] = cs.critical_value;
    json pts = json::array();
    for (const auto& pt : cs.points) pts.push_back({pt.p, pt.q});
    c["points"] = pts;
    const auto pr = cs.p_range(), qr = cs.q_range();
    c["p_range"] = {number_json(pr.first), number_json(pr.second)};
    c["q_range"] = {number_json(qr.first), number_json(qr.second)};
    sets.push_back(c);
  }
  j["confidence_sets"] = sets;
  return j;
}

inline EstimateRecord estimate_from_json(const json& j) {
  EstimateRecord r;
  r.label = j.at("label").get<std::string>();
  r.d = j.at("d").is_string() ? kUnbounded : j.at("d").get<std::size_t>();
  r.two_period = j.at("two_period").get<bool>();
  r.p_hat = number_from_json(j.at("p_hat"));
  r.q_hat = number_from_json(j.at("q_hat"));
  r.loglik = number_from_json(j.at("loglik"));
  r.boundary = j.at("boundary").get<bool>();
  for (const auto& c : j.at("confidence_sets")) {
    ConfidenceSet cs;
    cs.level = c.at("level").get<double>();
    cs.critical_value = c.at("critical_value").get<double>();
    for (const auto& pt : c.at("points")) cs.points.push_back({pt.at(0).get<double>(), pt.at(1).get<double>()});
    r.confidence_sets.push_back(std::move(cs));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Monte Carlo records
// ---------------------------------------------------------------------------

inline json replication_estimate_json(const ReplicationEstimate& e) {
  return {{"d", e.d}, {"p_hat", number_json(e.p_hat)}, {"q_hat", number_json(e.q_hat)},
          {"loglik", number_json(e.loglik)}, {"boundary", e.boundary}};
}

inline ReplicationEstimate replication_estimate_from_json(const json& j) {
  ReplicationEstimate e;
  e.d = j.at("d").get<std::size_t>();
  e.p_hat = number_from_json(j.at("p_hat"));
  e.q_hat = number_from_json(j.at("q_hat"));
  e.loglik = number_from_json(j.at("loglik"));
  e.boundary = j.at("boundary").get<bool>();
  return e;
}

/// One line of results.jsonl. Timing is left out so files are reproducible.
inline json replication_to_json(const ReplicationResult& r) {
  json j;
  j["replication"] = r.replication;
  j["seed_s"] = r.seed_s;
  j["seed_d"] = r.seed_d;
  j["ok"] = r.ok;
  if (!r.ok) j["error"] = r.error;
  j["offsets"] = r.offsets;
  j["max_pii"] = r.max_pii;
  json tr = json::array();
  for (const auto& e : r.trimmed) tr.push_back(replication_estimate_json(e));
  j["trimmed"] = tr;
  j["two_period"] = replication_estimate_json(r.two_period);
  return j;
}

inline ReplicationResult replication_from_json(const json& j) {
  ReplicationResult r;
  r.replication = j.at("replication").get<std::size_t>();
  r.seed_s = j.at("seed_s").get<std::uint64_t>();
  r.seed_d = j.at("seed_d").get<std::uint64_t>();
  r.ok = j.at("ok").get<bool>();
  if (j.contains("error")) r.error = j.at("error").get<std::string>();
  r.offsets = j.at("offsets").get<std::vector<std::size_t>>();
  r.max_pii = j.at("max_pii").get<std::vector<std::size_t>>();
  for (const auto& e : j.at("trimmed")) r.trimmed.push_back(replication_estimate_from_json(e));
  r.two_period = replication_estimate_from_json(j.at("two_period"));
  return r;
}

inline std::vector<ReplicationResult> parse_results_jsonl(const std::string& text) {
  std::vector<ReplicationResult> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(replication_from_json(json::parse(line)));
  return out;
}

inline std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::string out = "estimator,d,count,mean_p,se_p,mean_q,se_q,mean_abs_gap_p,mean_abs_gap_q\n";
  for (const auto& r : rows)
    out += r.label + ',' + (r.label == "two-period" ? std::string("") : std::to_string(r.d)) + ',' +
           std::to_string(r.p.count) + ',' + format_double(r.p.mean) + ',' + format_double(r.p.se) + ',' +
           format_double(r.q.mean) + ',' + format_double(r.q.se) + ',' + format_double(r.mean_abs_gap_p) + ',' +
           format_double(r.mean_abs_gap_q) + '\n';
  return out;
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

inline std::string error_curve_csv(const ErrorCurve& c) {
  std::string out = "village,p,q,d,loglik,exact,epsilon,log_new_mass\n";
  for (std::size_t d = 0; d < c.epsilon.size(); ++d)
    out += c.village + ',' + format_double(c.theta.p) + ',' + format_double(c.theta.q) + ',' + std::to_string(d) + ',' +
           format_double(c.loglik[d]) + ',' + format_double(c.exact) + ',' + format_double(c.epsilon[d]) + ',' +
           format_double(c.new_mass[d]) + '\n';
  return out;
}

inline ErrorCurve parse_error_curve_csv(const std::string& text) {
  const auto t = parse_csv(text);
  ErrorCurve c;
  for (const auto& r : t.rows) {
    c.village = r[t.column("village")];
    c.theta = {parse_double(r[t.column("p")]), parse_double(r[t.column("q")])};
    c.exact = parse_double(r[t.column("exact")]);
    c.loglik.push_back(parse_double(r[t.column("loglik")]));
    c.epsilon.push_back(parse_double(r[t.column("epsilon")]));
    c.new_mass.push_back(parse_double(r[t.column("log_new_mass")]));
  }
  return c;
}

inline std::string audit_csv_header() {
  return "village,p,q,d,agent,betweenness,in_degree,out_degree,default,group,single_chosen,single_alternative,"
         "group_chosen,group_alternative,selection_violated,verdict\n";
}

inline std::string audit_csv_rows(const std::string& village, const ParamPoint& theta, std::size_t d,
                                  const std::vector<SubgraphAudit>& audits) {
  std::string out;
  for (const auto& a : audits) {
    std::string group;
    for (auto g : a.group) group += (group.empty() ? "" : " ") + std::to_string(g + 1);
    out += village + ',' + format_double(theta.p) + ',' + format_double(theta.q) + ',' + std::to_string(d) + ',' +
           std::to_string(a.agent + 1) + ',' + format_double(a.betweenness) + ',' + std::to_string(a.in_degree) + ',' +
           std::to_string(a.out_degree) + ',' + (a.chose_a ? "A" : "B") + ',' + group + ',' +
           format_double(a.single_chosen) + ',' + format_double(a.single_alternative) + ',' +
           format_double(a.group_chosen) + ',' + format_double(a.group_alternative) + ',' +
           (a.selection_violated ? "1" : "0") + ',' + to_string(a.verdict) + '\n';
  }
  return out;
}

inline std::vector<SubgraphAudit> parse_audit_csv(const std::string& text) {
  const auto t = parse_csv(text);
  std::vector<SubgraphAudit> out;
  for (const auto& r : t.rows) {
    SubgraphAudit a;
    a.agent = std::stoul(r[t.column("agent")]) - 1;
    a.betweenness = parse_double(r[t.column("betweenness")]);
    a.in_degree = std::stoul(r[t.column("in_degree")]);
    a.out_degree = std::stoul(r[t.column("out_degree")]);
    a.chose_a = r[t.column("default")] == "A";
    for (const auto& g : split_fields(r[t.column("group")])) a.group.push_back(std::stoul(g) - 1);
    a.single_chosen = parse_double(r[t.column("single_chosen")]);
    a.single_alternative = parse_double(r[t.column("single_alternative")]);
    a.group_chosen = parse_double(r[t.column("group_chosen")]);
    a.group_alternative = parse_double(r[t.column("group_alternative")]);
    a.selection_violated = r[t.column("selection_violated")] == "1";
    const auto& v = r[t.column("verdict")];
    a.verdict = v == "mistake1" ? Verdict::mistake1 : v == "mistake2" ? Verdict::mistake2 : Verdict::optimal;
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace netdiff
