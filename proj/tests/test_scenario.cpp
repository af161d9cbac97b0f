#include <string>

#include "balance/scenario.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace balance;
using nlohmann::json;

TEST_CASE("unit-suffixed quantities parse case-insensitively") {
  CHECK(parse_power("2.4 MH/s") == doctest::Approx(2.4e6));
  CHECK(parse_power("2.4MH") == doctest::Approx(2.4e6));
  CHECK(parse_power("5 kh/s") == doctest::Approx(5e3));
  CHECK(parse_power("3 GH/s") == doctest::Approx(3e9));
  CHECK(parse_power("17") == doctest::Approx(17.0));
  CHECK(parse_hashes("30 MH") == doctest::Approx(30e6));
  CHECK(parse_hashes("40 kH") == doctest::Approx(40e3));
  CHECK(parse_hashes("512") == doctest::Approx(512.0));
  CHECK(parse_duration("20 ms") == doctest::Approx(0.02));
  CHECK(parse_duration("250 us") == doctest::Approx(250e-6));
  CHECK(parse_duration("60 s") == doctest::Approx(60.0));
  CHECK(parse_duration("11 min") == doctest::Approx(660.0));
  CHECK(parse_duration("2 h") == doctest::Approx(7200.0));
  CHECK(parse_duration("90") == doctest::Approx(90.0));

  CHECK_THROWS_AS(parse_power(""), ScenarioError);
  CHECK_THROWS_AS(parse_power("MH"), ScenarioError);
  CHECK_THROWS_AS(parse_power("5 TB"), ScenarioError);
  CHECK_THROWS_AS(parse_hashes("30 MH/s"), ScenarioError);
  CHECK_THROWS_AS(parse_duration("5 days"), ScenarioError);
}

TEST_CASE("a generated complete network resolves into a full scenario") {
  json doc = json::parse(R"({
    "consensus": {"rule": "ghost", "m": 11},
    "mining": {"difficulty": "40 kH", "tick": "2 ms"},
    "network": {
      "topology": "complete",
      "miners": 14,
      "clients": 2,
      "latency": "2 ms",
      "attacker_power": "10 kH/s",
      "miner_power": "5 kH/s"
    },
    "attack": {"k": 2, "epsilon": 0.1, "tau": "60 s", "start": "10 s"},
    "run": {"seed": 7, "seed_count": 3, "horizon": "120 s", "out": "results"}
  })");
  Scenario sc = scenario_from_json(doc);
  CHECK(sc.graph.nodes.size() == 17);
  CHECK(sc.graph.edges.size() == 17 * 16 / 2);
  CHECK(sc.graph.total_power() == doctest::Approx(80e3));
  CHECK(sc.graph.attacker_fraction() == doctest::Approx(0.125));
  CHECK(sc.mining.difficulty == doctest::Approx(40e3));
  CHECK(sc.mining.tick == doctest::Approx(0.002));
  CHECK(sc.consensus.rule == ForkChoice::ghost);
  CHECK(sc.consensus.m == 11);
  CHECK(sc.attack.k == 2);
  CHECK(sc.attack.tau == doctest::Approx(60.0));
  CHECK(sc.attack.start == doctest::Approx(10.0));
  CHECK(sc.seed == 7);
  CHECK(sc.seed_count == 3);
  REQUIRE(sc.horizon.has_value());
  CHECK(*sc.horizon == doctest::Approx(120.0));
  REQUIRE(sc.out_dir.has_value());
  CHECK(*sc.out_dir == "results");

  // total_power is the alternative spelling of the same graph.
  json total = doc;
  total["network"].erase("miner_power");
  total["network"]["total_power"] = "80 kH/s";
  Scenario sc2 = scenario_from_json(total);
  CHECK(sc2.graph.total_power() == doctest::Approx(80e3));
  CHECK(sc2.graph.attacker_fraction() == doctest::Approx(0.125));
}

TEST_CASE("an explicit node and edge list resolves with latency defaults") {
  json doc = json::parse(R"({
    "mining": {"difficulty": 100},
    "network": {
      "latency": "10 ms",
      "nodes": [
        {"id": 0, "power": "2 H/s", "role": "attacker"},
        {"id": 1, "power": 5},
        {"id": 2, "role": "client"}
      ],
      "edges": [[0, 1], [1, 2, "20 ms"], {"a": 0, "b": 2}]
    }
  })");
  Scenario sc = scenario_from_json(doc);
  REQUIRE(sc.graph.nodes.size() == 3);
  CHECK(sc.graph.nodes[0].role == NodeRole::attacker);
  CHECK(sc.graph.nodes[1].power == doctest::Approx(5.0));
  CHECK(sc.graph.nodes[2].role == NodeRole::client);
  REQUIRE(sc.graph.edges.size() == 3);
  CHECK(sc.graph.edges[0].latency == doctest::Approx(0.01));
  CHECK(sc.graph.edges[1].latency == doctest::Approx(0.02));
  CHECK(sc.graph.edges[2].latency == doctest::Approx(0.01));
  // Defaults when the sections are absent.
  CHECK(sc.consensus.rule == ForkChoice::ghost);
  CHECK(sc.mining.tick == doctest::Approx(1.0));
  CHECK(sc.attack.variant == ForkChoice::ghost);
  CHECK(sc.seed == 1);
  CHECK(sc.seed_count == 1);
  CHECK_FALSE(sc.horizon.has_value());
}

TEST_CASE("the attack variant follows the consensus rule unless overridden") {
  json doc = json::parse(R"({
    "consensus": {"rule": "nakamoto"},
    "mining": {"difficulty": 100},
    "network": {"topology": "complete", "miners": 2, "latency": "10 ms",
                "miner_power": 5}
  })");
  CHECK(scenario_from_json(doc).attack.variant == ForkChoice::nakamoto);
  doc["attack"] = {{"variant", "ghost"}};
  CHECK(scenario_from_json(doc).attack.variant == ForkChoice::ghost);
}

TEST_CASE("auto markers clear the delay and horizon") {
  json doc = json::parse(R"({
    "mining": {"difficulty": 100},
    "network": {"topology": "complete", "miners": 2, "latency": "10 ms",
                "miner_power": 5},
    "attack": {"tau": "auto"},
    "run": {"horizon": "auto"}
  })");
  Scenario sc = scenario_from_json(doc);
  CHECK_FALSE(sc.attack.tau.has_value());
  CHECK_FALSE(sc.horizon.has_value());
}

TEST_CASE("strict parsing rejects unknown keys and contradictions") {
  json base = json::parse(R"({
    "mining": {"difficulty": 100},
    "network": {"topology": "complete", "miners": 2, "latency": "10 ms",
                "miner_power": 5}
  })");

  json doc = base;
  doc["surprise"] = 1;
  CHECK_THROWS_AS(scenario_from_json(doc), ScenarioError);

  doc = base;
  doc["network"]["color"] = "blue";
  CHECK_THROWS_AS(scenario_from_json(doc), ScenarioError);

  doc = base;
  doc["attack"] = {{"speed", 3}};
  CHECK_THROWS_AS(scenario_from_json(doc), ScenarioError);

  doc = base;
  doc["run"] = {{"seeds", 2}, {"seed_count", 2}};
  CHECK_THROWS_AS(scenario_from_json(doc), ScenarioError);

  doc = base;
  doc["run"] = {{"seeds", 0}};
  CHECK_THROWS_AS(scenario_from_json(doc), ScenarioError);

  doc = base;
  doc["network"]["topology"] = "ring";
  CHECK_THROWS_AS(scenario_from_json(doc), ScenarioError);

  doc = base;
  doc["network"]["total_power"] = 20;
  CHECK_THROWS_AS(scenario_from_json(doc), ScenarioError);

  doc = base;
  doc["network"].erase("miner_power");
  CHECK_THROWS_AS(scenario_from_json(doc), ScenarioError);

  doc = base;
  doc.erase("mining");
  CHECK_THROWS_AS(scenario_from_json(doc), ScenarioError);

  CHECK_THROWS_AS(scenario_from_json(json::parse("[1, 2]")), ScenarioError);
}

TEST_CASE("built-in scenarios carry the published shapes") {
  CHECK(preset_names() == std::vector<std::string>{"r3", "emulab", "ethereum-default"});
  CHECK_THROWS_AS(preset("classic"), ScenarioError);

  Scenario r3 = preset("r3");
  CHECK(r3.graph.nodes.size() == 50);
  CHECK(r3.graph.total_power() == doctest::Approx(20e6));
  CHECK(r3.graph.attacker_fraction() == doctest::Approx(0.12));
  CHECK(r3.mining.difficulty == doctest::Approx(30e6));
  CHECK(r3.consensus.rule == ForkChoice::ghost);
  CHECK(r3.consensus.m == 11);
  CHECK_FALSE(r3.attack.tau.has_value());

  Scenario emulab = preset("emulab");
  CHECK(emulab.graph.nodes.size() == 15);
  CHECK(emulab.graph.attacker_fraction() == doctest::Approx(0.125));
  CHECK(emulab.attack.tau == doctest::Approx(60.0));
  REQUIRE(emulab.horizon.has_value());
  CHECK(*emulab.horizon == doctest::Approx(120.0));

  Scenario desk = preset("ethereum-default");
  CHECK(desk.graph.nodes.size() == 11);
  CHECK(desk.graph.total_power() == doctest::Approx(15e3));
  CHECK(desk.graph.attacker_fraction() == doctest::Approx(0.12));
  CHECK(desk.mining.difficulty == doctest::Approx(4000.0));
}

TEST_CASE("verdict rows serialize to the versioned CSV") {
  VerdictRow row;
  row.seed = 1;
  row.success = true;
  row.committed_then_reverted = true;
  row.delta = 9;
  row.attacker_blocks = 17;
  row.adopted_origin = 0;
  row.uncles_attacker = 0;
  CHECK(verdicts_csv({row}) ==
        "# balance-verdicts v1\n"
        "seed,success,committed_then_reverted,delta,attacker_blocks,"
        "adopted_origin,uncles_attacker\n"
        "1,true,true,9,17,0,0\n");

  SweepPoint a{100.0, 0.25, false};
  SweepPoint b{2.5, -1.5, true};
  CHECK(sweep_csv({a, b}) ==
        "# balance-sweep v1\n"
        "x,bound,vacuous\n"
        "100,0.25,false\n"
        "2.5,-1.5,true\n");
}

TEST_CASE("the binomial confidence interval brackets the observed rate") {
  WilsonInterval w = wilson95(9, 10);
  CHECK(w.low == doctest::Approx(0.595842).epsilon(1e-4));
  CHECK(w.high == doctest::Approx(0.982124).epsilon(1e-4));

  CHECK_THROWS_AS(wilson95(0, 0), InvalidConfig);
  CHECK_THROWS_AS(wilson95(4, 3), InvalidConfig);

  WilsonInterval all = wilson95(3, 3);
  CHECK(all.high == doctest::Approx(1.0));
  CHECK(all.low > 0.2);

  WilsonInterval none = wilson95(0, 5);
  CHECK(none.low == doctest::Approx(0.0));
  CHECK(none.high == doctest::Approx(0.43449).epsilon(1e-4));
}

TEST_CASE("summary and bound reports serialize with schema tags") {
  VerdictRow win;
  win.seed = 1;
  win.success = true;
  win.committed_then_reverted = true;
  VerdictRow loss;
  loss.seed = 2;

  nlohmann::ordered_json s = summary_json({win, loss});
  CHECK(s["schema"] == "balance-summary v1");
  CHECK(s["seeds"] == 2);
  CHECK(s["successes"] == 1);
  CHECK(s["committed_then_reverted"] == 1);
  CHECK(s["success_frequency"] == doctest::Approx(0.5));
  CHECK(s["wilson95"].contains("low"));
  CHECK(s["wilson95"].contains("high"));

  nlohmann::ordered_json empty = summary_json({});
  CHECK(empty["seeds"] == 0);
  CHECK(empty["success_frequency"] == doctest::Approx(0.0));

  BoundInputs in;
  in.rho = 0.12;
  in.total_power = 20e6;
  in.difficulty = 30e6;
  in.tau = 1180.0;
  in.k = 2;
  nlohmann::ordered_json b = bound_report_json(general_k_bounds(in));
  CHECK(b["schema"] == "balance-bounds v1");
  CHECK(b["mu_c"] == doctest::Approx(346.1333333));
  CHECK(b["delta_derived"] == true);

  AttackVerdict v;
  v.tx = 1;
  nlohmann::ordered_json vj = verdict_json(v, 42);
  CHECK(vj["schema"] == "balance-verdict v1");
  CHECK(vj["seed"] == 42);
  CHECK(vj["success"] == false);
  CHECK(vj["tx"] == 1);
  CHECK(vj["window"].contains("tau"));
}
