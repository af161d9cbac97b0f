#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "balance/analysis.hpp"
#include "balance/attack.hpp"
#include "balance/consensus.hpp"
#include "balance/errors.hpp"
#include "balance/simnet.hpp"
#include "json.hpp"

namespace balance {

// One fully resolved experiment: graph, mining model, consensus rule, attack
// parameters, and run controls.
struct Scenario {
  NetworkGraph graph;
  MiningModel mining;
  ConsensusConfig consensus;
  AttackParams attack;
  std::optional<double> horizon;  // seconds; absent means derive a safe one
  std::uint64_t seed = 1;
  int seed_count = 1;
  std::optional<std::string> out_dir;
};

// Unit-suffixed quantities. Power: "2.4 MH/s" (H, KH, MH, GH; the "/s" is
// optional). Hashes: "30 MH". Time: "20 ms", "60 s", "11 min", "2 h". Bare
// numbers mean base units (H/s, H, seconds). ScenarioError on anything else.
double parse_power(const std::string& text);
double parse_hashes(const std::string& text);
double parse_duration(const std::string& text);

// Strict scenario parsing: sections network, mining, consensus, attack, run;
// unknown keys are rejected. The network section is either an explicit
// {nodes, edges} pair or a complete-graph generator {topology, latency,
// miners, clients, attacker_power, total_power | miner_power}.
Scenario scenario_from_json(const nlohmann::json& doc);
Scenario load_scenario(const std::string& path);

// Built-in scenarios: "r3" (testbed-scale consortium network), "emulab"
// (two balanced miner groups, 60 s delay), "ethereum-default" (desk-scale
// run at the default private-chain difficulty).
Scenario preset(const std::string& name);
std::vector<std::string> preset_names();

// Flat per-seed result record, the unit of the batch CSV.
struct VerdictRow {
  std::uint64_t seed = 0;
  bool success = false;
  bool committed_then_reverted = false;
  long long delta = 0;
  long long attacker_blocks = 0;
  int adopted_origin = -1;
  long long uncles_attacker = 0;
};

VerdictRow verdict_row(std::uint64_t seed, const AttackVerdict& verdict);

// CSV emitters. Every file starts with a schema-versioned comment line; the
// bytes are deterministic functions of the rows.
std::string verdicts_csv(const std::vector<VerdictRow>& rows);
std::string sweep_csv(const std::vector<SweepPoint>& points);

struct WilsonInterval {
  double low = 0.0;
  double high = 1.0;
};

// 95% Wilson score interval for a binomial proportion.
WilsonInterval wilson95(long long successes, long long trials);

nlohmann::ordered_json summary_json(const std::vector<VerdictRow>& rows);
nlohmann::ordered_json verdict_json(const AttackVerdict& verdict, std::uint64_t seed);
nlohmann::ordered_json bound_report_json(const BoundReport& report);

}  // namespace balance
