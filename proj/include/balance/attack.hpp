#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "balance/chain.hpp"
#include "balance/consensus.hpp"
#include "balance/errors.hpp"
#include "balance/simnet.hpp"

namespace balance {

// Parameters of one delay-and-outmine attack. rho is the attacker's fraction
// of the total mining power; when nonzero it must match the graph within
// 1e-6, when zero it is read off the graph.
struct AttackParams {
  double rho = 0.0;
  int k = 2;                    // number of isolated subgraphs
  double epsilon = 0.1;         // target failure probability when tau is derived
  std::optional<double> tau;    // delay in seconds; derived from epsilon if absent
  ForkChoice variant = ForkChoice::ghost;
  std::optional<double> pi;     // chance a correct miner extends the longest branch
                                // (longest-chain variant only; analytic input)
  std::optional<double> delta;  // concentration margin for k > 2; default 2*rho/(1-rho)
  double start = 10.0;          // injection start, seconds of honest warmup
};

// Assignment of every node to one of k classes. Correct miners are balanced
// by power; attackers always sit in class 0 (they mine toward that side) and
// are excluded from class_powers; clients are spread round-robin by id.
struct PartitionPlan {
  std::vector<std::vector<NodeId>> classes;        // each sorted ascending
  std::vector<std::pair<NodeId, NodeId>> cut;      // every inter-class edge
  std::vector<double> class_powers;                // correct H/s per class
};

// One attacker parent choice: the parent it mined on and its local
// fork-choice tip at that moment. The longest-chain variant must always have
// parent == tip.
struct PolicyStep {
  double at = 0.0;
  BlockId parent = 0;
  BlockId tip = 0;
};

struct AttackVerdict {
  bool committed_then_reverted = false;
  TxId tx = 0;                   // victim spend
  TxId double_spend_tx = 0;      // conflicting spend; 0 when never emitted
  long long delta_observed = 0;  // max pairwise window-block difference
  long long attacker_blocks = 0;
  bool success = false;  // committed_then_reverted and the double spend committed
  int adopted_origin = -1;
  bool victim_committed_at_t1 = false;
  BlockDag victim_view_t1;  // merchant's view when the delay lifts
  std::vector<PolicyStep> attacker_steps;
  SimulationOutcome outcome;
};

// Balances the correct miners over k classes, minimizing the heaviest class
// power: longest-processing-time greedy, then an exhaustive pass when the
// assignment space is small enough (k^miners <= 2^22), kept only when
// strictly better. Throws TooFewMiners with fewer than k correct miners.
PartitionPlan plan_partition(const NetworkGraph& graph, int k);

// Smallest delay that makes the attack succeed with probability >= 1-epsilon.
// k=2 uses the two-subgraph line formula; k>2 the general concentration
// bound with params.delta (or its default). Throws InvalidEpsilon when the
// log term goes negative (epsilon > 2k) or epsilon <= 0, DegenerateAttacker
// when rho <= 0, InvalidConfig when rho >= 1/2.
double min_attack_delay(const AttackParams& params, double total_power, double difficulty);

// Runs one full attack: partitions the graph, delays the cut for tau,
// credits a merchant in class 1, mines the attacker chain grafted after the
// first isolated-window block on the attacker side, then lifts the delay and
// issues the conflicting spend if the victim branch lost the merge. The
// horizon defaults to enough time for the merge to settle plus commit
// runway; an explicit horizon must reach past the settling point.
AttackVerdict execute_attack(const NetworkGraph& graph, const MiningModel& mining,
                             const ConsensusConfig& cfg, const AttackParams& params,
                             std::uint64_t seed, std::optional<double> horizon = {},
                             RelayMode relay = RelayMode::gossip);

// True iff tx was committed in `before` and is gone from `after`: not
// committed there and absent from its main branch entirely.
bool block_obliviousness_check(const BlockDag& before, const BlockDag& after,
                               const ConsensusConfig& cfg, TxId tx);

}  // namespace balance
