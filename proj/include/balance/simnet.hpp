#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <variant>
#include <vector>

#include "balance/chain.hpp"
#include "balance/consensus.hpp"

namespace balance {

enum class NodeRole { miner, client, attacker };

struct NetworkNode {
  NodeId id = 0;
  double power = 0.0;  // hashes per second; 0 for pure relays
  NodeRole role = NodeRole::miner;
};

struct NetworkEdge {
  NodeId a = 0;
  NodeId b = 0;
  double latency = 0.0;  // seconds, one-way
};

struct NetworkGraph {
  std::vector<NetworkNode> nodes;
  std::vector<NetworkEdge> edges;

  double total_power() const;
  double attacker_power() const;
  // Attacker share of the total power; 0 when there is no mining power.
  double attacker_fraction() const;
};

struct MiningModel {
  double difficulty = 0.0;   // expected hashes per block; success rate p = 1/difficulty
  double tick = 1.0;         // seconds per mining round
};

// Stops communication on a set of edges for tau seconds: every message sent
// across a cut edge with send time inside [start, start+tau) is buffered and
// delivered at start+tau plus the edge latency. Nothing is dropped.
struct DelayInjection {
  std::vector<std::pair<NodeId, NodeId>> cut;
  double start = 0.0;
  double tau = 0.0;
};

enum class RelayMode {
  gossip,       // nodes forward every first-seen block/transaction
  minted_only,  // nodes broadcast only what they minted or issued themselves
};

struct SimulationOutcome {
  // Blocks minted by correct nodes of each partition class during the
  // injection window, indexed like `classes`.
  std::vector<long long> per_subgraph_blocks;
  long long attacker_blocks = 0;  // attacker blocks minted during the window
  long long delta = 0;            // max pairwise |X_i - X_j|
  // Index of the class whose window-era main-branch blocks survive in the
  // final main branch; -1 when no class is distinguished.
  int adopted_origin = -1;
  // Set by the attack driver when a commit observed at the window end was
  // reverted afterwards; plain runs leave it false.
  bool reverted_commit = false;
  std::vector<long long> uncles_per_class;
  long long uncles_attacker = 0;
  long long total_minted = 0;
  double window_start = 0.0;  // seconds; 0/0 when no injection was active
  double window_tau = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::vector<NodeId>> classes;  // partition classes, by min node id
  std::vector<NodeId> attackers;
  BlockDag final_dag;  // union of everything minted, i.e. the global view
  std::vector<BlockId> final_branch;
};

struct UncleCounts {
  std::vector<long long> per_class;
  long long attacker = 0;
};

// Attached blocks absent from the final main branch, grouped by the class
// of their miner (attacker blocks counted separately).
UncleCounts count_uncles(const SimulationOutcome& outcome, const ConsensusConfig& cfg);

class Simulator;

// Returns the parent to mine on, or nothing to sit the round out. Invoked
// only for rounds in which the node actually drew at least one block.
using MinerPolicy = std::function<std::optional<BlockId>(const Simulator&, NodeId)>;
using Hook = std::function<void(Simulator&)>;

// Deterministic discrete-event simulation of miners on a latency graph.
// Per tick each miner draws Binomial(power * tick, 1/difficulty) blocks,
// chains same-tick blocks on each other, and floods them to its neighbors.
// Identical construction inputs and seed give bit-identical outcomes; every
// node mines from its own RNG substream derived from (seed, node id).
class Simulator {
 public:
  Simulator(NetworkGraph graph, MiningModel mining, ConsensusConfig cfg,
            std::vector<DelayInjection> injections, std::uint64_t seed,
            RelayMode relay = RelayMode::gossip);

  // Run every tick, delivery and hook with time <= horizon (seconds) and
  // assemble the outcome. Call at most once.
  SimulationOutcome finish(double horizon);

  void set_policy(NodeId node, MinerPolicy policy);
  void schedule_hook(double at_seconds, Hook hook);
  // Places the transaction in `at`'s mempool right away and gossips it.
  void submit_transaction(NodeId at, const Transaction& tx);

  double now() const;  // seconds
  const BlockDag& view(NodeId node) const;
  const BlockDag& global_view() const { return global_; }
  const NetworkGraph& graph() const { return graph_; }
  const ConsensusConfig& consensus() const { return cfg_; }
  const std::vector<std::vector<NodeId>>& classes() const { return classes_; }
  int node_class(NodeId node) const;
  // Longest one-way shortest-path latency between any two nodes, seconds.
  double diameter() const;
  bool window_active() const;
  double window_start() const;
  double window_end() const;
  long long minted_in_window(NodeId node) const;

 private:
  using TimeUs = std::int64_t;

  struct BlockMsg {
    NodeId to = 0;
    NodeId from = 0;
    Block block;
  };
  struct TxMsg {
    NodeId to = 0;
    NodeId from = 0;
    Transaction tx;
  };
  struct HookMsg {
    Hook fn;
  };
  struct Event {
    TimeUs at = 0;
    int rank = 0;  // deliveries 0, hooks 1; mining happens after both
    std::uint64_t seq = 0;
    std::variant<std::monostate, BlockMsg, TxMsg, HookMsg> payload;
  };
  struct EventAfter {
    bool operator()(const Event& a, const Event& b) const {
      return std::tie(a.at, a.rank, a.seq) > std::tie(b.at, b.rank, b.seq);
    }
  };

  struct NodeState {
    NetworkNode info;
    BlockDag view;
    std::map<TxId, Transaction> mempool;
    std::set<TxId> seen_txs;
    std::mt19937_64 rng;
    long long trials_per_tick = 0;
    long long minted_in_window = 0;
  };

  std::size_t index_of(NodeId id) const;
  void process(Event& ev);
  void mine_round(TimeUs t);
  void deliver_block(const BlockMsg& msg);
  void deliver_tx(const TxMsg& msg);
  void accept_tx(NodeState& node, const Transaction& tx);
  void broadcast_block(NodeId from, const Block& block, TimeUs send_time);
  void broadcast_tx(NodeId from, const Transaction& tx, TimeUs send_time);
  void send(Event ev);
  TimeUs delivery_time(NodeId from, NodeId to, TimeUs send_time, TimeUs latency) const;
  std::vector<TxId> collect_txs(const NodeState& node, BlockId parent) const;
  BlockId honest_parent(const NodeState& node) const;
  void compute_classes();

  NetworkGraph graph_;
  MiningModel mining_;
  ConsensusConfig cfg_;
  std::vector<DelayInjection> injections_;
  RelayMode relay_;
  std::uint64_t seed_;
  double p_;  // 1 / difficulty
  TimeUs tick_us_;
  TimeUs now_us_ = 0;
  std::uint64_t next_seq_ = 0;
  BlockId next_block_id_ = 1;

  std::vector<NodeState> nodes_;
  std::map<NodeId, std::size_t> index_;
  std::vector<std::vector<std::pair<std::size_t, TimeUs>>> adjacency_;  // by index
  std::map<std::pair<NodeId, NodeId>, TimeUs> edge_latency_;
  std::set<std::pair<NodeId, NodeId>> cut_;  // first injection, normalized
  struct CutWindow {
    TimeUs start = 0;
    TimeUs end = 0;
    std::set<std::pair<NodeId, NodeId>> edges;
  };
  std::vector<CutWindow> cuts_;  // one per injection, for delivery lookups
  TimeUs window_start_us_ = 0;
  TimeUs window_end_us_ = 0;
  bool has_window_ = false;

  std::vector<std::vector<NodeId>> classes_;
  std::vector<int> class_of_;  // component index, by node index
  std::map<TxId, TxId> conflict_pairs_;  // both directions
  std::vector<std::set<BlockId>> t1_branch_snapshots_;
  std::map<NodeId, MinerPolicy> policies_;
  std::priority_queue<Event, std::vector<Event>, EventAfter> queue_;
  BlockDag global_;
  bool finished_ = false;
  long long reverted_flag_ = 0;

  friend struct SimulatorTestAccess;

 public:
  // The attack driver owns the reversal verdict; it flips this flag so the
  // outcome mirrors it.
  void mark_reverted() { reverted_flag_ = 1; }
};

// Convenience wrapper: simulate with honest miners only.
SimulationOutcome run(const NetworkGraph& graph, const MiningModel& mining,
                      const ConsensusConfig& cfg, const std::vector<DelayInjection>& injections,
                      double horizon, std::uint64_t seed, RelayMode relay = RelayMode::gossip);

// Number of blocks a lone miner of the given power finds over the duration
// (a multiple of the tick), as the sum of per-tick binomial draws. The
// expectation is power * duration / difficulty.
long long sample_blocks(double power, double duration, const MiningModel& mining,
                        std::mt19937_64& rng);

// RNG substream for (seed, node): statistically independent streams with a
// stable mapping, so runs are reproducible node by node.
std::mt19937_64 node_rng(std::uint64_t seed, NodeId node);

}  // namespace balance
