#include "balance/attack.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <set>

namespace balance {

namespace {

std::pair<NodeId, NodeId> norm_edge(NodeId a, NodeId b) {
  return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
}

bool branch_carries_tx(const BlockDag& dag, const std::vector<BlockId>& branch, TxId tx) {
  for (BlockId b : branch) {
    const auto& txs = dag.block(b).txs;
    if (std::find(txs.begin(), txs.end(), tx) != txs.end()) return true;
  }
  return false;
}

}  // namespace

PartitionPlan plan_partition(const NetworkGraph& graph, int k) {
  if (k < 2) throw WrongK("the partition needs at least two classes");
  struct Item {
    NodeId id;
    double power;
  };
  std::vector<Item> miners;
  std::vector<NodeId> clients, attackers;
  for (const NetworkNode& n : graph.nodes) {
    switch (n.role) {
      case NodeRole::miner: miners.push_back({n.id, n.power}); break;
      case NodeRole::client: clients.push_back(n.id); break;
      case NodeRole::attacker: attackers.push_back(n.id); break;
    }
  }
  if (static_cast<int>(miners.size()) < k)
    throw TooFewMiners("need at least " + std::to_string(k) + " correct miners, have " +
                       std::to_string(miners.size()));
  std::sort(miners.begin(), miners.end(), [](const Item& a, const Item& b) {
    return a.power != b.power ? a.power > b.power : a.id < b.id;
  });
  std::sort(clients.begin(), clients.end());

  // Longest processing time first: heaviest miner to the lightest class.
  // Ties fall to the class with fewer members, so every class is populated.
  std::vector<int> lpt(miners.size());
  std::vector<double> sums(k, 0.0);
  std::vector<int> counts(k, 0);
  for (std::size_t i = 0; i < miners.size(); ++i) {
    int best = 0;
    for (int c = 1; c < k; ++c)
      if (std::tie(sums[c], counts[c]) < std::tie(sums[best], counts[best])) best = c;
    lpt[i] = best;
    sums[best] += miners[i].power;
    counts[best] += 1;
  }
  double lpt_max = *std::max_element(sums.begin(), sums.end());

  std::vector<int> assign = lpt;
  // Exhaustive pass over all assignments when the space is small; the greedy
  // result is kept unless something is strictly better.
  double space = std::pow(static_cast<double>(k), static_cast<double>(miners.size()));
  if (space <= static_cast<double>(1 << 22)) {
    std::vector<int> cur(miners.size(), 0);
    std::vector<double> s(k);
    double best_max = lpt_max;
    for (;;) {
      std::fill(s.begin(), s.end(), 0.0);
      bool empty_class = false;
      for (std::size_t i = 0; i < miners.size(); ++i) s[cur[i]] += miners[i].power;
      std::vector<int> cnt(k, 0);
      for (std::size_t i = 0; i < miners.size(); ++i) cnt[cur[i]]++;
      for (int c = 0; c < k; ++c)
        if (cnt[c] == 0) empty_class = true;
      if (!empty_class) {
        double mx = *std::max_element(s.begin(), s.end());
        if (mx < best_max) {
          best_max = mx;
          assign = cur;
        }
      }
      std::size_t pos = 0;
      while (pos < cur.size() && ++cur[pos] == k) cur[pos++] = 0;
      if (pos == cur.size()) break;
    }
  }

  // Classes are ordered by their smallest miner id; the attacker then joins
  // class 0 and clients spread round-robin in id order.
  std::vector<std::vector<NodeId>> classes(k);
  for (std::size_t i = 0; i < miners.size(); ++i) classes[assign[i]].push_back(miners[i].id);
  for (auto& cls : classes) std::sort(cls.begin(), cls.end());
  std::sort(classes.begin(), classes.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });

  PartitionPlan plan;
  plan.class_powers.assign(k, 0.0);
  std::map<NodeId, double> miner_power;
  for (const Item& m : miners) miner_power[m.id] = m.power;
  for (int c = 0; c < k; ++c)
    for (NodeId id : classes[c]) plan.class_powers[c] += miner_power[id];
  for (NodeId id : attackers) classes[0].push_back(id);
  for (std::size_t i = 0; i < clients.size(); ++i)
    classes[i % static_cast<std::size_t>(k)].push_back(clients[i]);
  for (auto& cls : classes) std::sort(cls.begin(), cls.end());
  plan.classes = std::move(classes);

  std::map<NodeId, int> class_of;
  for (int c = 0; c < k; ++c)
    for (NodeId id : plan.classes[c]) class_of[id] = c;
  std::set<std::pair<NodeId, NodeId>> cut;
  for (const NetworkEdge& e : graph.edges) {
    auto a = class_of.find(e.a);
    auto b = class_of.find(e.b);
    if (a == class_of.end() || b == class_of.end())
      throw InvalidConfig("edge references an unknown node");
    if (a->second != b->second) cut.insert(norm_edge(e.a, e.b));
  }
  plan.cut.assign(cut.begin(), cut.end());
  return plan;
}

double min_attack_delay(const AttackParams& params, double total_power, double difficulty) {
  if (params.k < 2) throw WrongK("the attack needs at least two subgraphs");
  if (!(total_power > 0.0)) throw InvalidConfig("total power must be positive");
  if (!(difficulty >= 1.0)) throw InvalidConfig("difficulty must be at least 1 hash");
  double rho = params.rho;
  if (!(rho > 0.0)) throw DegenerateAttacker("the delay formula needs attacker power");
  if (rho >= 0.5) throw InvalidConfig("attacker must hold less than half the power");
  double eps = params.epsilon;
  double limit = 2.0 * static_cast<double>(params.k);
  if (!(eps > 0.0)) throw InvalidEpsilon("epsilon must be positive");
  if (eps > limit)
    throw InvalidEpsilon("epsilon above " + std::to_string(limit) +
                         " makes the guarantee vacuous");
  if (params.k == 2)
    return (1.0 - rho) * 6.0 * difficulty * std::log(4.0 / eps) /
           (4.0 * rho * rho * total_power);
  double delta = params.delta ? *params.delta : 2.0 * rho / (1.0 - rho);
  if (!(delta > 0.0)) throw InvalidConfig("delta must be positive");
  return 3.0 * static_cast<double>(params.k) * difficulty *
         std::log(2.0 * static_cast<double>(params.k) / eps) /
         (delta * delta * (1.0 - rho) * total_power);
}

bool block_obliviousness_check(const BlockDag& before, const BlockDag& after,
                               const ConsensusConfig& cfg, TxId tx) {
  if (!is_committed(before, cfg, tx)) return false;
  if (is_committed(after, cfg, tx)) return false;
  return !branch_carries_tx(after, main_branch(after, cfg), tx);
}

AttackVerdict execute_attack(const NetworkGraph& graph, const MiningModel& mining,
                             const ConsensusConfig& cfg, const AttackParams& params,
                             std::uint64_t seed, std::optional<double> horizon, RelayMode relay) {
  if (params.variant != cfg.rule)
    throw InvalidConfig("attack variant must match the consensus fork-choice rule");
  if (cfg.rule == ForkChoice::nakamoto) {
    double pi = params.pi.value_or(1.0);
    if (!(pi > 0.0) || pi > 1.0) throw InvalidConfig("pi must be in (0, 1]");
  } else if (params.pi) {
    throw InvalidConfig("pi applies to the longest-chain variant only");
  }
  if (!(params.start >= 0.0)) throw InvalidConfig("attack start must be non-negative");

  std::map<NodeId, NodeRole> role;
  std::vector<NodeId> attackers;
  for (const NetworkNode& n : graph.nodes) {
    role[n.id] = n.role;
    if (n.role == NodeRole::attacker) attackers.push_back(n.id);
  }
  if (attackers.empty()) throw DegenerateAttacker("the graph has no attacker node");
  std::sort(attackers.begin(), attackers.end());

  double rho = graph.attacker_fraction();
  if (params.rho != 0.0 && std::abs(params.rho - rho) > 1e-6)
    throw InvalidConfig("params.rho does not match the graph's attacker power share");
  if (rho >= 0.5) throw InvalidConfig("attacker must hold less than half the power");

  PartitionPlan plan = plan_partition(graph, params.k);

  double total = graph.total_power();
  if (!(total > 0.0)) throw InvalidConfig("the graph has no mining power");
  double tau;
  if (params.tau) {
    tau = *params.tau;
    if (!(tau >= 0.0)) throw InvalidConfig("tau must be non-negative");
  } else {
    AttackParams derived = params;
    derived.rho = rho;
    tau = min_attack_delay(derived, total, mining.difficulty);
  }

  if (!(mining.tick > 0.0)) throw InvalidConfig("tick must be positive");
  auto grid_up = [&](double s) { return std::ceil(s / mining.tick - 1e-9) * mining.tick; };
  double start = grid_up(params.start);
  double tau_g = tau > 0.0 ? grid_up(tau) : 0.0;

  std::vector<DelayInjection> injections;
  if (tau_g > 0.0) injections.push_back({plan.cut, start, tau_g});

  Simulator sim(graph, mining, cfg, injections, seed, relay);

  double lift = start + tau_g;
  double settle = lift + sim.diameter() + mining.tick;
  double hz;
  if (horizon) {
    hz = *horizon;
    if (hz < settle) throw InvalidConfig("horizon ends before the merge settles");
  } else {
    double runway =
        std::max(5.0 * mining.tick, 4.0 * (cfg.m + 1) * mining.difficulty / total);
    hz = grid_up(settle + runway);
  }

  // The merchant lives in class 1 (the victim side); a client if there is
  // one, else the smallest correct node.
  NodeId merchant = 0;
  bool have_merchant = false;
  for (NodeId id : plan.classes[1])
    if (role[id] == NodeRole::client) {
      merchant = id;
      have_merchant = true;
      break;
    }
  if (!have_merchant)
    for (NodeId id : plan.classes[1])
      if (role[id] != NodeRole::attacker) {
        merchant = id;
        have_merchant = true;
        break;
      }
  if (!have_merchant) throw InvalidConfig("the victim class has no correct node");

  NodeId attacker_id = attackers.front();
  NodeId beneficiary = attacker_id;
  for (NodeId id : plan.classes[0])
    if (role[id] != NodeRole::attacker) {
      beneficiary = id;
      break;
    }
  if (beneficiary == attacker_id)
    for (const NetworkNode& n : graph.nodes)
      if (n.role != NodeRole::attacker) {
        beneficiary = n.id;
        break;
      }

  Transaction tx{1, attacker_id, merchant, 100.0, std::nullopt};
  Transaction tx2{2, attacker_id, beneficiary, 100.0, tx.id};

  struct Shared {
    std::vector<PolicyStep> steps;
    BlockDag victim_t1;
    bool have_t1 = false;
    bool committed_t1 = false;
    bool tx2_emitted = false;
  };
  auto sh = std::make_shared<Shared>();

  sim.schedule_hook(start, [merchant, tx](Simulator& s) { s.submit_transaction(merchant, tx); });

  for (NodeId a : attackers) {
    sim.set_policy(a, [sh, cfg](const Simulator& s, NodeId me) -> std::optional<BlockId> {
      if (!s.window_active()) return std::nullopt;
      const BlockDag& v = s.view(me);
      // b2: the earliest block of the isolation window visible on this side.
      std::optional<BlockId> b2;
      double b2_at = 0.0;
      double ws = s.window_start();
      for (const auto& [id, b] : v.blocks()) {
        if (b.created_at < ws) continue;
        if (!b2 || b.created_at < b2_at) {
          b2 = id;
          b2_at = b.created_at;
        }
      }
      if (!b2) return std::nullopt;
      BlockId tip = main_branch(v, cfg).back();
      BlockId parent =
          cfg.rule == ForkChoice::nakamoto ? tip : (v.descends_from(tip, *b2) ? tip : *b2);
      sh->steps.push_back({s.now(), parent, tip});
      return parent;
    });
  }

  if (tau_g > 0.0) {
    PartitionPlan plan_copy = plan;
    std::map<NodeId, NodeRole> role_copy = role;
    sim.schedule_hook(lift, [sh, cfg, tx, tx2, merchant, attacker_id, plan_copy,
                             role_copy](Simulator& s) {
      sh->victim_t1 = s.view(merchant);
      sh->have_t1 = true;
      sh->committed_t1 = is_committed(sh->victim_t1, cfg, tx.id);
      // The exchanged views: one representative per class plus the attacker.
      BlockDag merged = s.view(attacker_id);
      for (const auto& cls : plan_copy.classes)
        for (NodeId id : cls)
          if (role_copy.at(id) != NodeRole::attacker) {
            merged.merge_from(s.view(id));
            break;
          }
      bool victim_lost = !branch_carries_tx(merged, main_branch(merged, cfg), tx.id);
      if (victim_lost) {
        s.submit_transaction(attacker_id, tx2);
        sh->tx2_emitted = true;
      }
    });
  }

  SimulationOutcome out = sim.finish(hz);

  AttackVerdict verdict;
  verdict.tx = tx.id;
  verdict.attacker_steps = std::move(sh->steps);
  verdict.victim_committed_at_t1 = sh->committed_t1;
  verdict.delta_observed = out.delta;
  verdict.attacker_blocks = out.attacker_blocks;
  verdict.adopted_origin = out.adopted_origin;
  if (sh->have_t1) {
    verdict.victim_view_t1 = std::move(sh->victim_t1);
    verdict.committed_then_reverted =
        block_obliviousness_check(verdict.victim_view_t1, out.final_dag, cfg, tx.id);
  }
  if (sh->tx2_emitted) {
    verdict.double_spend_tx = tx2.id;
    verdict.success =
        verdict.committed_then_reverted && is_committed(out.final_dag, cfg, tx2.id);
  }
  out.reverted_commit = verdict.committed_then_reverted;
  verdict.outcome = std::move(out);
  return verdict;
}

}  // namespace balance
