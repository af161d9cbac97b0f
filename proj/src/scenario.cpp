#include "balance/scenario.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>

namespace balance {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& msg) { throw ScenarioError(msg); }

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

double parse_with_units(const std::string& text, const char* what,
                        const std::vector<std::pair<std::string, double>>& suffixes) {
  std::string t = trim(text);
  if (t.empty()) fail(std::string(what) + ": empty quantity");
  const char* begin = t.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end == begin) fail(std::string(what) + ": no number in \"" + text + "\"");
  if (!std::isfinite(v)) fail(std::string(what) + ": non-finite value in \"" + text + "\"");
  std::string suffix = lower(trim(std::string(end)));
  if (suffix.empty()) return v;
  for (const auto& [name, scale] : suffixes)
    if (suffix == name) return v * scale;
  fail(std::string(what) + ": unknown unit \"" + trim(std::string(end)) + "\"");
}

const std::vector<std::pair<std::string, double>> kHashUnits = {
    {"h", 1.0}, {"kh", 1e3}, {"mh", 1e6}, {"gh", 1e9}};
const std::vector<std::pair<std::string, double>> kTimeUnits = {
    {"us", 1e-6}, {"ms", 1e-3}, {"s", 1.0}, {"min", 60.0}, {"h", 3600.0}};

void check_keys(const json& obj, const char* section,
                std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known) fail("unknown key \"" + it.key() + "\" in " + section);
  }
}

const json& require(const json& obj, const char* key, const char* section) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(std::string(section) + " is missing \"" + key + "\"");
  return *it;
}

double qty(const json& v, const char* what, double (*parse)(const std::string&)) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) return parse(v.get<std::string>());
  fail(std::string(what) + " must be a number or a unit string");
}

long long get_int(const json& v, const char* what) {
  if (!v.is_number_integer()) fail(std::string(what) + " must be an integer");
  return v.get<long long>();
}

double get_num(const json& v, const char* what) {
  if (!v.is_number()) fail(std::string(what) + " must be a number");
  return v.get<double>();
}

ForkChoice parse_rule(const json& v, const char* what) {
  if (!v.is_string()) fail(std::string(what) + " must be \"ghost\" or \"nakamoto\"");
  std::string s = lower(v.get<std::string>());
  if (s == "ghost") return ForkChoice::ghost;
  if (s == "nakamoto") return ForkChoice::nakamoto;
  fail(std::string(what) + " must be \"ghost\" or \"nakamoto\", not \"" + v.get<std::string>() +
       "\"");
}

NodeRole parse_role(const json& v) {
  if (!v.is_string()) fail("node role must be a string");
  std::string s = lower(v.get<std::string>());
  if (s == "miner") return NodeRole::miner;
  if (s == "client") return NodeRole::client;
  if (s == "attacker") return NodeRole::attacker;
  fail("node role must be miner, client, or attacker, not \"" + v.get<std::string>() + "\"");
}

void complete_edges(NetworkGraph& g, double latency) {
  for (std::size_t i = 0; i < g.nodes.size(); ++i)
    for (std::size_t j = i + 1; j < g.nodes.size(); ++j)
      g.edges.push_back({g.nodes[i].id, g.nodes[j].id, latency});
}

NetworkGraph generated_network(const json& net) {
  check_keys(net, "network",
             {"topology", "latency", "miners", "clients", "attacker_power", "total_power",
              "miner_power"});
  if (net.contains("topology")) {
    const json& t = net.at("topology");
    if (!t.is_string() || lower(t.get<std::string>()) != "complete")
      fail("only the \"complete\" topology generator is supported");
  }
  double latency = qty(require(net, "latency", "network"), "network.latency", parse_duration);
  if (!(latency > 0.0)) fail("network.latency must be positive");
  long long miners = get_int(require(net, "miners", "network"), "network.miners");
  if (miners < 1) fail("network.miners must be at least 1");
  long long clients = net.contains("clients") ? get_int(net.at("clients"), "network.clients") : 0;
  if (clients < 0) fail("network.clients must be non-negative");
  double attacker_power =
      net.contains("attacker_power")
          ? qty(net.at("attacker_power"), "network.attacker_power", parse_power)
          : 0.0;
  if (!(attacker_power >= 0.0)) fail("network.attacker_power must be non-negative");
  if (net.contains("total_power") == net.contains("miner_power"))
    fail("network needs exactly one of total_power or miner_power");
  double per;
  if (net.contains("total_power")) {
    double total = qty(net.at("total_power"), "network.total_power", parse_power);
    if (!(total >= attacker_power))
      fail("network.total_power must cover the attacker power");
    per = (total - attacker_power) / static_cast<double>(miners);
  } else {
    per = qty(net.at("miner_power"), "network.miner_power", parse_power);
    if (!(per >= 0.0)) fail("network.miner_power must be non-negative");
  }
  NetworkGraph g;
  g.nodes.push_back({0, attacker_power, NodeRole::attacker});
  NodeId next = 1;
  for (long long i = 0; i < miners; ++i) g.nodes.push_back({next++, per, NodeRole::miner});
  for (long long i = 0; i < clients; ++i) g.nodes.push_back({next++, 0.0, NodeRole::client});
  complete_edges(g, latency);
  return g;
}

NetworkGraph explicit_network(const json& net) {
  check_keys(net, "network", {"nodes", "edges", "latency"});
  std::optional<double> default_latency;
  if (net.contains("latency")) {
    default_latency = qty(net.at("latency"), "network.latency", parse_duration);
    if (!(*default_latency > 0.0)) fail("network.latency must be positive");
  }
  NetworkGraph g;
  const json& nodes = require(net, "nodes", "network");
  if (!nodes.is_array() || nodes.empty()) fail("network.nodes must be a non-empty array");
  for (const json& n : nodes) {
    if (!n.is_object()) fail("each node must be an object");
    check_keys(n, "node", {"id", "power", "role"});
    long long id = get_int(require(n, "id", "node"), "node.id");
    if (id < 0) fail("node.id must be non-negative");
    double power = n.contains("power") ? qty(n.at("power"), "node.power", parse_power) : 0.0;
    NodeRole role = n.contains("role") ? parse_role(n.at("role")) : NodeRole::miner;
    g.nodes.push_back({static_cast<NodeId>(id), power, role});
  }
  const json& edges = require(net, "edges", "network");
  if (!edges.is_array()) fail("network.edges must be an array");
  for (const json& e : edges) {
    NetworkEdge edge;
    if (e.is_array()) {
      if (e.size() != 2 && e.size() != 3) fail("edge arrays must be [a, b] or [a, b, latency]");
      edge.a = static_cast<NodeId>(get_int(e.at(0), "edge endpoint"));
      edge.b = static_cast<NodeId>(get_int(e.at(1), "edge endpoint"));
      if (e.size() == 3)
        edge.latency = qty(e.at(2), "edge latency", parse_duration);
      else if (default_latency)
        edge.latency = *default_latency;
      else
        fail("edge [a, b] needs network.latency as a default");
    } else if (e.is_object()) {
      check_keys(e, "edge", {"a", "b", "latency"});
      edge.a = static_cast<NodeId>(get_int(require(e, "a", "edge"), "edge.a"));
      edge.b = static_cast<NodeId>(get_int(require(e, "b", "edge"), "edge.b"));
      if (e.contains("latency"))
        edge.latency = qty(e.at("latency"), "edge latency", parse_duration);
      else if (default_latency)
        edge.latency = *default_latency;
      else
        fail("edge {a, b} needs network.latency as a default");
    } else {
      fail("edges must be arrays or objects");
    }
    g.edges.push_back(edge);
  }
  return g;
}

Scenario build_complete_scenario(int correct_miners, int clients, double attacker_power,
                                 double miner_power, double latency, double tick,
                                 double difficulty, ForkChoice rule, int m, double rho,
                                 std::optional<double> tau, std::optional<double> horizon) {
  Scenario sc;
  sc.graph.nodes.push_back({0, attacker_power, NodeRole::attacker});
  NodeId next = 1;
  for (int i = 0; i < correct_miners; ++i)
    sc.graph.nodes.push_back({next++, miner_power, NodeRole::miner});
  for (int i = 0; i < clients; ++i) sc.graph.nodes.push_back({next++, 0.0, NodeRole::client});
  complete_edges(sc.graph, latency);
  sc.mining = {difficulty, tick};
  sc.consensus = default_config(rule);
  sc.consensus.m = m;
  sc.attack.rho = rho;
  sc.attack.k = 2;
  sc.attack.epsilon = 0.1;
  sc.attack.tau = tau;
  sc.attack.variant = rule;
  sc.attack.start = 10.0;
  sc.horizon = horizon;
  return sc;
}

}  // namespace

double parse_power(const std::string& text) {
  std::string t = trim(text);
  std::string l = lower(t);
  if (l.size() >= 2 && l.compare(l.size() - 2, 2, "/s") == 0) t = t.substr(0, t.size() - 2);
  return parse_with_units(t, "power", kHashUnits);
}

double parse_hashes(const std::string& text) {
  return parse_with_units(text, "difficulty", kHashUnits);
}

double parse_duration(const std::string& text) {
  return parse_with_units(text, "duration", kTimeUnits);
}

Scenario scenario_from_json(const nlohmann::json& doc) {
  try {
    if (!doc.is_object()) fail("scenario must be a JSON object");
    check_keys(doc, "scenario", {"network", "mining", "consensus", "attack", "run"});
    Scenario sc;

    if (doc.contains("consensus")) {
      const json& c = doc.at("consensus");
      if (!c.is_object()) fail("consensus must be an object");
      check_keys(c, "consensus", {"rule", "m"});
      ForkChoice rule =
          c.contains("rule") ? parse_rule(c.at("rule"), "consensus.rule") : ForkChoice::ghost;
      sc.consensus = default_config(rule);
      if (c.contains("m")) {
        long long m = get_int(c.at("m"), "consensus.m");
        if (m < 1) fail("consensus.m must be at least 1");
        sc.consensus.m = static_cast<int>(m);
      }
    } else {
      sc.consensus = default_config(ForkChoice::ghost);
    }

    const json& mining = require(doc, "mining", "scenario");
    if (!mining.is_object()) fail("mining must be an object");
    check_keys(mining, "mining", {"difficulty", "tick"});
    sc.mining.difficulty =
        qty(require(mining, "difficulty", "mining"), "mining.difficulty", parse_hashes);
    sc.mining.tick =
        mining.contains("tick") ? qty(mining.at("tick"), "mining.tick", parse_duration) : 1.0;

    const json& net = require(doc, "network", "scenario");
    if (!net.is_object()) fail("network must be an object");
    bool generated = net.contains("topology") || net.contains("miners");
    sc.graph = generated ? generated_network(net) : explicit_network(net);

    sc.attack.variant = sc.consensus.rule;
    if (doc.contains("attack")) {
      const json& a = doc.at("attack");
      if (!a.is_object()) fail("attack must be an object");
      check_keys(a, "attack", {"rho", "k", "epsilon", "tau", "variant", "pi", "delta", "start"});
      if (a.contains("rho")) sc.attack.rho = get_num(a.at("rho"), "attack.rho");
      if (a.contains("k")) sc.attack.k = static_cast<int>(get_int(a.at("k"), "attack.k"));
      if (a.contains("epsilon")) sc.attack.epsilon = get_num(a.at("epsilon"), "attack.epsilon");
      if (a.contains("variant")) sc.attack.variant = parse_rule(a.at("variant"), "attack.variant");
      if (a.contains("pi")) sc.attack.pi = get_num(a.at("pi"), "attack.pi");
      if (a.contains("delta")) sc.attack.delta = get_num(a.at("delta"), "attack.delta");
      if (a.contains("start")) sc.attack.start = qty(a.at("start"), "attack.start", parse_duration);
      if (a.contains("tau")) {
        const json& tau = a.at("tau");
        if (tau.is_string() && lower(tau.get<std::string>()) == "auto")
          sc.attack.tau.reset();
        else
          sc.attack.tau = qty(tau, "attack.tau", parse_duration);
      }
    }

    if (doc.contains("run")) {
      const json& r = doc.at("run");
      if (!r.is_object()) fail("run must be an object");
      check_keys(r, "run", {"horizon", "seed", "seeds", "seed_count", "out"});
      if (r.contains("horizon")) {
        const json& h = r.at("horizon");
        if (h.is_string() && lower(h.get<std::string>()) == "auto")
          sc.horizon.reset();
        else
          sc.horizon = qty(h, "run.horizon", parse_duration);
      }
      if (r.contains("seed")) {
        long long s = get_int(r.at("seed"), "run.seed");
        if (s < 0) fail("run.seed must be non-negative");
        sc.seed = static_cast<std::uint64_t>(s);
      }
      if (r.contains("seeds") && r.contains("seed_count"))
        fail("run takes either seeds or seed_count, not both");
      const char* key = r.contains("seeds") ? "seeds" : (r.contains("seed_count") ? "seed_count" : nullptr);
      if (key) {
        long long n = get_int(r.at(key), "run.seeds");
        if (n < 1) fail("run.seeds must be at least 1");
        sc.seed_count = static_cast<int>(n);
      }
      if (r.contains("out")) {
        if (!r.at("out").is_string()) fail("run.out must be a string");
        sc.out_dir = r.at("out").get<std::string>();
      }
    }
    return sc;
  } catch (const json::exception& e) {
    fail(std::string("malformed scenario: ") + e.what());
  }
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open scenario file " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    fail(path + ": " + e.what());
  }
  return scenario_from_json(doc);
}

Scenario preset(const std::string& name) {
  // The published testbed constants live here and nowhere else.
  if (name == "r3") {
    // Consortium testbed scale: 50 nodes of which 15 mine, 20 MH/s total
    // with a 2.4 MH/s top miner acting as the attacker, 30 MH difficulty,
    // 20 ms links.
    return build_complete_scenario(14, 35, 2.4e6, 17.6e6 / 14.0, 0.02, 0.02, 30e6,
                                   ForkChoice::ghost, 11, 0.12, std::nullopt, std::nullopt);
  }
  if (name == "emulab") {
    // Two balanced miner groups (7 + attacker vs 7) at 40 KH difficulty,
    // 60 s delay, 2 ms links.
    return build_complete_scenario(14, 0, 10e3, 5e3, 0.002, 0.002, 40e3, ForkChoice::ghost, 11,
                                   0.125, 60.0, 120.0);
  }
  if (name == "ethereum-default") {
    // Desk scale at the default private-chain difficulty of 4 KH; tau is
    // derived from epsilon = 0.1.
    return build_complete_scenario(8, 2, 1800.0, 1650.0, 0.02, 0.02, 4000.0, ForkChoice::ghost,
                                   11, 0.12, std::nullopt, std::nullopt);
  }
  fail("unknown preset \"" + name + "\"; available: r3, emulab, ethereum-default");
}

std::vector<std::string> preset_names() { return {"r3", "emulab", "ethereum-default"}; }

VerdictRow verdict_row(std::uint64_t seed, const AttackVerdict& verdict) {
  VerdictRow row;
  row.seed = seed;
  row.success = verdict.success;
  row.committed_then_reverted = verdict.committed_then_reverted;
  row.delta = verdict.delta_observed;
  row.attacker_blocks = verdict.attacker_blocks;
  row.adopted_origin = verdict.adopted_origin;
  row.uncles_attacker = verdict.outcome.uncles_attacker;
  return row;
}

std::string verdicts_csv(const std::vector<VerdictRow>& rows) {
  std::string out = "# balance-verdicts v1\n";
  out += "seed,success,committed_then_reverted,delta,attacker_blocks,adopted_origin,uncles_attacker\n";
  char buf[160];
  for (const VerdictRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%llu,%s,%s,%lld,%lld,%d,%lld\n",
                  static_cast<unsigned long long>(r.seed), r.success ? "true" : "false",
                  r.committed_then_reverted ? "true" : "false", r.delta, r.attacker_blocks,
                  r.adopted_origin, r.uncles_attacker);
    out += buf;
  }
  return out;
}

std::string sweep_csv(const std::vector<SweepPoint>& points) {
  std::string out = "# balance-sweep v1\n";
  out += "x,bound,vacuous\n";
  char buf[96];
  for (const SweepPoint& p : points) {
    std::snprintf(buf, sizeof buf, "%.10g,%.10g,%s\n", p.x, p.bound,
                  p.vacuous ? "true" : "false");
    out += buf;
  }
  return out;
}

WilsonInterval wilson95(long long successes, long long trials) {
  if (trials <= 0) throw InvalidConfig("the interval needs at least one trial");
  if (successes < 0 || successes > trials)
    throw InvalidConfig("successes must lie in [0, trials]");
  const double z = 1.96;
  double n = static_cast<double>(trials);
  double phat = static_cast<double>(successes) / n;
  double z2 = z * z;
  double denom = 1.0 + z2 / n;
  double center = phat + z2 / (2.0 * n);
  double radius = z * std::sqrt(phat * (1.0 - phat) / n + z2 / (4.0 * n * n));
  return {(center - radius) / denom, (center + radius) / denom};
}

nlohmann::ordered_json summary_json(const std::vector<VerdictRow>& rows) {
  long long successes = 0, reverted = 0;
  for (const VerdictRow& r : rows) {
    successes += r.success ? 1 : 0;
    reverted += r.committed_then_reverted ? 1 : 0;
  }
  ordered_json j;
  j["schema"] = "balance-summary v1";
  j["seeds"] = rows.size();
  j["successes"] = successes;
  j["committed_then_reverted"] = reverted;
  if (rows.empty()) {
    j["success_frequency"] = 0.0;
    j["wilson95"] = ordered_json{{"low", 0.0}, {"high", 1.0}};
  } else {
    WilsonInterval w = wilson95(successes, static_cast<long long>(rows.size()));
    j["success_frequency"] = static_cast<double>(successes) / static_cast<double>(rows.size());
    j["wilson95"] = ordered_json{{"low", w.low}, {"high", w.high}};
  }
  return j;
}

nlohmann::ordered_json verdict_json(const AttackVerdict& verdict, std::uint64_t seed) {
  ordered_json j;
  j["schema"] = "balance-verdict v1";
  j["seed"] = seed;
  j["success"] = verdict.success;
  j["committed_then_reverted"] = verdict.committed_then_reverted;
  j["victim_committed_at_partition_end"] = verdict.victim_committed_at_t1;
  j["tx"] = verdict.tx;
  j["double_spend_tx"] = verdict.double_spend_tx;
  j["delta"] = verdict.delta_observed;
  j["attacker_blocks"] = verdict.attacker_blocks;
  j["adopted_origin"] = verdict.adopted_origin;
  j["uncles_attacker"] = verdict.outcome.uncles_attacker;
  j["per_subgraph_blocks"] = verdict.outcome.per_subgraph_blocks;
  j["total_minted"] = verdict.outcome.total_minted;
  j["window"] = ordered_json{{"start", verdict.outcome.window_start},
                             {"tau", verdict.outcome.window_tau}};
  return j;
}

nlohmann::ordered_json bound_report_json(const BoundReport& report) {
  ordered_json j;
  j["schema"] = "balance-bounds v1";
  j["mu_c"] = report.mu_c;
  j["mu_m"] = report.mu_m;
  j["delta"] = report.delta;
  j["delta_derived"] = report.delta_derived;
  j["delta_threshold"] = report.delta_threshold;
  j["threshold_bound"] = report.threshold_bound;
  if (report.mu_m_bound)
    j["mu_m_bound"] = *report.mu_m_bound;
  else
    j["mu_m_bound"] = nullptr;
  j["formula"] = report.formula_used;
  return j;
}

}  // namespace balance
