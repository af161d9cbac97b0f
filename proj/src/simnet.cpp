#include "balance/simnet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace balance {

double NetworkGraph::total_power() const {
  double t = 0.0;
  for (const auto& n : nodes) t += n.power;
  return t;
}

double NetworkGraph::attacker_power() const {
  double t = 0.0;
  for (const auto& n : nodes)
    if (n.role == NodeRole::attacker) t += n.power;
  return t;
}

double NetworkGraph::attacker_fraction() const {
  double t = total_power();
  return t > 0.0 ? attacker_power() / t : 0.0;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::pair<NodeId, NodeId> norm_edge(NodeId a, NodeId b) {
  return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
}

constexpr std::int64_t kUsPerSecond = 1'000'000;

std::int64_t to_us(double seconds) {
  return std::llround(seconds * static_cast<double>(kUsPerSecond));
}

double to_seconds(std::int64_t us) {
  return static_cast<double>(us) / static_cast<double>(kUsPerSecond);
}

}  // namespace

std::mt19937_64 node_rng(std::uint64_t seed, NodeId node) {
  std::uint64_t s = splitmix64(seed);
  s = splitmix64(s ^ (0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(node) + 1)));
  return std::mt19937_64(s);
}

Simulator::Simulator(NetworkGraph graph, MiningModel mining, ConsensusConfig cfg,
                     std::vector<DelayInjection> injections, std::uint64_t seed, RelayMode relay)
    : graph_(std::move(graph)),
      mining_(mining),
      cfg_(cfg),
      injections_(std::move(injections)),
      relay_(relay),
      seed_(seed) {
  if (!(mining_.difficulty >= 1.0))
    throw InvalidConfig("difficulty must be at least 1 hash so the success rate is a probability");
  if (!(mining_.tick > 0.0)) throw InvalidConfig("tick must be positive");
  if (cfg_.m < 1) throw InvalidConfig("m must be at least 1");
  if (graph_.nodes.empty()) throw InvalidConfig("network has no nodes");
  p_ = 1.0 / mining_.difficulty;
  tick_us_ = to_us(mining_.tick);
  if (tick_us_ <= 0) throw InvalidConfig("tick is below the 1 microsecond resolution");

  std::sort(graph_.nodes.begin(), graph_.nodes.end(),
            [](const NetworkNode& a, const NetworkNode& b) { return a.id < b.id; });
  nodes_.reserve(graph_.nodes.size());
  for (const NetworkNode& n : graph_.nodes) {
    if (index_.count(n.id)) throw InvalidConfig("duplicate node id " + std::to_string(n.id));
    if (!(n.power >= 0.0)) throw InvalidConfig("negative mining power");
    if (n.role == NodeRole::client && n.power > 0.0)
      throw InvalidConfig("client nodes cannot carry mining power");
    index_.emplace(n.id, nodes_.size());
    NodeState st{n, BlockDag{}, {}, {}, node_rng(seed, n.id), 0, 0};
    st.trials_per_tick = std::llround(n.power * mining_.tick);
    nodes_.push_back(std::move(st));
  }

  adjacency_.assign(nodes_.size(), {});
  for (const NetworkEdge& e : graph_.edges) {
    if (!index_.count(e.a) || !index_.count(e.b))
      throw InvalidConfig("edge references an unknown node");
    if (e.a == e.b) throw InvalidConfig("self edges are not allowed");
    if (!(e.latency > 0.0)) throw InvalidConfig("edge latency must be positive");
    auto key = norm_edge(e.a, e.b);
    TimeUs lat = to_us(e.latency);
    if (lat <= 0) throw InvalidConfig("edge latency is below the 1 microsecond resolution");
    if (!edge_latency_.emplace(key, lat).second) throw InvalidConfig("duplicate edge");
    adjacency_[index_.at(e.a)].push_back({index_.at(e.b), lat});
    adjacency_[index_.at(e.b)].push_back({index_.at(e.a), lat});
  }
  for (auto& adj : adjacency_) std::sort(adj.begin(), adj.end());

  for (const DelayInjection& inj : injections_) {
    if (!(inj.start >= 0.0) || !(inj.tau >= 0.0))
      throw InvalidConfig("injection start and tau must be non-negative");
    CutWindow cw;
    cw.start = to_us(inj.start);
    cw.end = cw.start + to_us(inj.tau);
    for (auto [a, b] : inj.cut) {
      if (!edge_latency_.count(norm_edge(a, b)))
        throw InvalidConfig("injection cut references an edge that is not in the graph");
      cw.edges.insert(norm_edge(a, b));
    }
    cuts_.push_back(std::move(cw));
  }
  if (!injections_.empty()) {
    const DelayInjection& first = injections_.front();
    for (auto [a, b] : first.cut) cut_.insert(norm_edge(a, b));
    window_start_us_ = to_us(first.start);
    window_end_us_ = window_start_us_ + to_us(first.tau);
    has_window_ = window_end_us_ > window_start_us_;
  }

  compute_classes();

  // The whole graph must be connected, otherwise parts of the network would
  // never converge even without any injection.
  {
    std::vector<int> comp(nodes_.size(), -1);
    std::vector<std::size_t> stack{0};
    comp[0] = 0;
    while (!stack.empty()) {
      std::size_t v = stack.back();
      stack.pop_back();
      for (auto [w, lat] : adjacency_[v])
        if (comp[w] < 0) {
          comp[w] = 0;
          stack.push_back(w);
        }
    }
    if (nodes_.size() > 1)
      for (std::size_t i = 0; i < nodes_.size(); ++i)
        if (comp[i] < 0) throw InvalidConfig("network graph is not connected");
  }

  if (has_window_) {
    // Partition-end snapshot of each class representative's main branch,
    // restricted to window-era blocks; adopted_origin is read off these.
    Event ev;
    ev.at = window_end_us_;
    ev.rank = 1;
    ev.seq = next_seq_++;
    ev.payload = HookMsg{[this](Simulator&) {
      t1_branch_snapshots_.clear();
      double ws = to_seconds(window_start_us_);
      double we = to_seconds(window_end_us_);
      for (const auto& members : classes_) {
        std::set<BlockId> snap;
        const BlockDag& v = view(members.front());
        for (BlockId b : main_branch(v, cfg_)) {
          double at = v.block(b).created_at;
          if (at >= ws && at < we) snap.insert(b);
        }
        t1_branch_snapshots_.push_back(std::move(snap));
      }
    }};
    queue_.push(std::move(ev));
  }
}

void Simulator::compute_classes() {
  // Partition classes are the connected components of the graph minus the
  // first injection's cut; with no injection the network is one class.
  std::vector<std::size_t> parent(nodes_.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<std::size_t(std::size_t)> find = [&](std::size_t v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  for (const auto& [key, lat] : edge_latency_) {
    if (cut_.count(key)) continue;
    std::size_t a = find(index_.at(key.first));
    std::size_t b = find(index_.at(key.second));
    if (a != b) parent[a] = b;
  }
  std::map<std::size_t, std::vector<NodeId>> comps;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    comps[find(i)].push_back(nodes_[i].info.id);
  // Components keyed by root; order classes by their smallest node id.
  std::vector<std::vector<NodeId>> classes;
  for (auto& [root, members] : comps) {
    std::sort(members.begin(), members.end());
    classes.push_back(std::move(members));
  }
  std::sort(classes.begin(), classes.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  classes_ = std::move(classes);
  class_of_.assign(nodes_.size(), -1);
  for (std::size_t c = 0; c < classes_.size(); ++c)
    for (NodeId id : classes_[c]) class_of_[index_.at(id)] = static_cast<int>(c);
}

std::size_t Simulator::index_of(NodeId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw InvalidConfig("unknown node id " + std::to_string(id));
  return it->second;
}

double Simulator::now() const { return to_seconds(now_us_); }

const BlockDag& Simulator::view(NodeId node) const { return nodes_[index_of(node)].view; }

int Simulator::node_class(NodeId node) const { return class_of_[index_of(node)]; }

bool Simulator::window_active() const {
  return has_window_ && now_us_ >= window_start_us_ && now_us_ < window_end_us_;
}

double Simulator::window_start() const { return to_seconds(window_start_us_); }
double Simulator::window_end() const { return to_seconds(window_end_us_); }

long long Simulator::minted_in_window(NodeId node) const {
  return nodes_[index_of(node)].minted_in_window;
}

double Simulator::diameter() const {
  constexpr TimeUs inf = std::numeric_limits<TimeUs>::max() / 4;
  std::size_t n = nodes_.size();
  std::vector<TimeUs> dist(n * n, inf);
  for (std::size_t i = 0; i < n; ++i) dist[i * n + i] = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (auto [j, lat] : adjacency_[i]) dist[i * n + j] = std::min(dist[i * n + j], lat);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        dist[i * n + j] = std::min(dist[i * n + j], dist[i * n + k] + dist[k * n + j]);
  TimeUs worst = 0;
  for (TimeUs d : dist) worst = std::max(worst, d);
  return to_seconds(worst);
}

void Simulator::set_policy(NodeId node, MinerPolicy policy) {
  index_of(node);
  policies_[node] = std::move(policy);
}

void Simulator::schedule_hook(double at_seconds, Hook hook) {
  Event ev;
  ev.at = to_us(at_seconds);
  ev.rank = 1;
  ev.seq = next_seq_++;
  ev.payload = HookMsg{std::move(hook)};
  queue_.push(std::move(ev));
}

void Simulator::send(Event ev) {
  ev.seq = next_seq_++;
  queue_.push(std::move(ev));
}

Simulator::TimeUs Simulator::delivery_time(NodeId from, NodeId to, TimeUs send_time,
                                           TimeUs latency) const {
  // A message sent on a cut edge while its injection is active is buffered
  // until the delay lifts; nothing is ever dropped.
  auto key = norm_edge(from, to);
  for (const CutWindow& cw : cuts_) {
    if (send_time < cw.start || send_time >= cw.end) continue;
    if (cw.edges.count(key)) return cw.end + latency;
  }
  return send_time + latency;
}

void Simulator::broadcast_block(NodeId from, const Block& block, TimeUs send_time) {
  std::size_t fi = index_of(from);
  for (auto [ni, lat] : adjacency_[fi]) {
    NodeId to = nodes_[ni].info.id;
    Event ev;
    ev.at = delivery_time(from, to, send_time, lat);
    ev.rank = 0;
    ev.payload = BlockMsg{to, from, block};
    send(std::move(ev));
  }
}

void Simulator::broadcast_tx(NodeId from, const Transaction& tx, TimeUs send_time) {
  std::size_t fi = index_of(from);
  for (auto [ni, lat] : adjacency_[fi]) {
    NodeId to = nodes_[ni].info.id;
    Event ev;
    ev.at = delivery_time(from, to, send_time, lat);
    ev.rank = 0;
    ev.payload = TxMsg{to, from, tx};
    send(std::move(ev));
  }
}

void Simulator::submit_transaction(NodeId at, const Transaction& tx) {
  if (tx.conflicts_with && *tx.conflicts_with == tx.id)
    throw InvalidConfig("a transaction cannot conflict with itself");
  if (tx.source == tx.destination) throw InvalidConfig("transaction source equals destination");
  if (tx.conflicts_with) {
    conflict_pairs_[tx.id] = *tx.conflicts_with;
    conflict_pairs_[*tx.conflicts_with] = tx.id;
  }
  NodeState& node = nodes_[index_of(at)];
  if (node.seen_txs.count(tx.id)) return;
  accept_tx(node, tx);
  broadcast_tx(at, tx, now_us_);
}

void Simulator::accept_tx(NodeState& node, const Transaction& tx) {
  node.seen_txs.insert(tx.id);
  // Conflicting pair resolution: the newer transaction replaces the older
  // one, so a reissued spend supersedes the original in the mempool.
  if (tx.conflicts_with) {
    auto it = node.mempool.find(*tx.conflicts_with);
    if (it != node.mempool.end()) {
      if (tx.id > it->first) {
        node.mempool.erase(it);
        node.mempool.emplace(tx.id, tx);
      }
      return;
    }
  }
  for (const auto& [id, held] : node.mempool)
    if (held.conflicts_with && *held.conflicts_with == tx.id) {
      if (tx.id > id) {
        node.mempool.erase(id);
        node.mempool.emplace(tx.id, tx);
      }
      return;
    }
  node.mempool.emplace(tx.id, tx);
}

void Simulator::deliver_block(const BlockMsg& msg) {
  NodeState& node = nodes_[index_of(msg.to)];
  if (node.view.knows(msg.block.id)) return;
  node.view.insert(msg.block);
  if (relay_ == RelayMode::gossip) {
    std::size_t fi = index_of(msg.to);
    for (auto [ni, lat] : adjacency_[fi]) {
      NodeId to = nodes_[ni].info.id;
      if (to == msg.from) continue;
      Event ev;
      ev.at = delivery_time(msg.to, to, now_us_, lat);
      ev.rank = 0;
      ev.payload = BlockMsg{to, msg.to, msg.block};
      send(std::move(ev));
    }
  }
}

void Simulator::deliver_tx(const TxMsg& msg) {
  NodeState& node = nodes_[index_of(msg.to)];
  if (node.seen_txs.count(msg.tx.id)) return;
  accept_tx(node, msg.tx);
  if (relay_ == RelayMode::gossip) {
    std::size_t fi = index_of(msg.to);
    for (auto [ni, lat] : adjacency_[fi]) {
      NodeId to = nodes_[ni].info.id;
      if (to == msg.from) continue;
      Event ev;
      ev.at = delivery_time(msg.to, to, now_us_, lat);
      ev.rank = 0;
      ev.payload = TxMsg{to, msg.to, msg.tx};
      send(std::move(ev));
    }
  }
}

std::vector<TxId> Simulator::collect_txs(const NodeState& node, BlockId parent) const {
  if (node.mempool.empty()) return {};
  std::set<TxId> on_chain;
  BlockId cur = parent;
  for (;;) {
    const Block& b = node.view.block(cur);
    on_chain.insert(b.txs.begin(), b.txs.end());
    if (!b.parent) break;
    cur = *b.parent;
  }
  std::vector<TxId> out;
  for (const auto& [id, tx] : node.mempool) {
    if (on_chain.count(id)) continue;
    if (tx.conflicts_with && on_chain.count(*tx.conflicts_with)) continue;
    // Covers the reverse link too: if the replacing spend is already on this
    // branch the original must never be mined, even by a node that only ever
    // saw the original.
    auto pair = conflict_pairs_.find(id);
    if (pair != conflict_pairs_.end() && on_chain.count(pair->second)) continue;
    out.push_back(id);
  }
  return out;
}

BlockId Simulator::honest_parent(const NodeState& node) const {
  return main_branch(node.view, cfg_).back();
}

void Simulator::mine_round(TimeUs t) {
  double created = to_seconds(t);
  bool in_window = has_window_ && t >= window_start_us_ && t < window_end_us_;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    NodeState& node = nodes_[i];
    if (node.trials_per_tick <= 0) continue;
    std::binomial_distribution<long long> dist(node.trials_per_tick, p_);
    long long found = dist(node.rng);
    if (found <= 0) continue;
    std::optional<BlockId> parent;
    auto pit = policies_.find(node.info.id);
    if (pit != policies_.end())
      parent = pit->second(*this, node.info.id);
    else
      parent = honest_parent(node);
    if (!parent) continue;  // the policy sat this round out; the draw is discarded
    BlockId prev = *parent;
    for (long long k = 0; k < found; ++k) {
      Block b;
      b.id = next_block_id_++;
      b.parent = prev;
      b.miner = node.info.id;
      b.created_at = created;
      b.txs = collect_txs(node, prev);
      node.view.insert(b);
      global_.insert(b);
      if (in_window) node.minted_in_window++;
      broadcast_block(node.info.id, b, t);
      prev = b.id;
    }
  }
}

void Simulator::process(Event& ev) {
  if (auto* bm = std::get_if<BlockMsg>(&ev.payload))
    deliver_block(*bm);
  else if (auto* tm = std::get_if<TxMsg>(&ev.payload))
    deliver_tx(*tm);
  else if (auto* hm = std::get_if<HookMsg>(&ev.payload))
    hm->fn(*this);
}

SimulationOutcome Simulator::finish(double horizon) {
  if (!(horizon > 0.0)) throw InvalidConfig("horizon must be positive");
  if (finished_) throw InvalidConfig("finish() may be called only once");
  finished_ = true;
  TimeUs horizon_us = to_us(horizon);
  TimeUs next_tick = tick_us_;
  for (;;) {
    bool have = !queue_.empty() && queue_.top().at <= horizon_us;
    // Deliveries and hooks at time T run before the mining round at T.
    if (have && (next_tick > horizon_us || queue_.top().at <= next_tick)) {
      Event ev = queue_.top();
      queue_.pop();
      now_us_ = ev.at;
      process(ev);
    } else if (next_tick <= horizon_us) {
      now_us_ = next_tick;
      mine_round(next_tick);
      next_tick += tick_us_;
    } else {
      break;
    }
  }
  now_us_ = horizon_us;

  SimulationOutcome out;
  out.seed = seed_;
  out.classes = classes_;
  out.window_start = has_window_ ? to_seconds(window_start_us_) : 0.0;
  out.window_tau = has_window_ ? to_seconds(window_end_us_ - window_start_us_) : 0.0;
  out.per_subgraph_blocks.assign(classes_.size(), 0);
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const NodeState& node = nodes_[i];
    if (node.info.role == NodeRole::attacker) {
      out.attackers.push_back(node.info.id);
      out.attacker_blocks += node.minted_in_window;
    } else if (class_of_[i] >= 0) {
      out.per_subgraph_blocks[class_of_[i]] += node.minted_in_window;
    }
  }
  for (std::size_t i = 0; i < out.per_subgraph_blocks.size(); ++i)
    for (std::size_t j = i + 1; j < out.per_subgraph_blocks.size(); ++j)
      out.delta = std::max(out.delta,
                           std::llabs(out.per_subgraph_blocks[i] - out.per_subgraph_blocks[j]));
  out.total_minted = static_cast<long long>(global_.block_count()) - 1;
  out.final_branch = main_branch(global_, cfg_);
  std::set<BlockId> on_branch(out.final_branch.begin(), out.final_branch.end());
  out.uncles_per_class.assign(classes_.size(), 0);
  for (const auto& [id, b] : global_.blocks()) {
    if (id == global_.genesis() || on_branch.count(id)) continue;
    std::size_t mi = index_of(b.miner);
    if (nodes_[mi].info.role == NodeRole::attacker)
      out.uncles_attacker++;
    else if (class_of_[mi] >= 0)
      out.uncles_per_class[class_of_[mi]]++;
  }
  if (!t1_branch_snapshots_.empty()) {
    long long best = 0, second = 0;
    int best_idx = -1;
    for (std::size_t c = 0; c < t1_branch_snapshots_.size(); ++c) {
      long long overlap = 0;
      for (BlockId b : t1_branch_snapshots_[c])
        if (on_branch.count(b)) overlap++;
      if (overlap > best) {
        second = best;
        best = overlap;
        best_idx = static_cast<int>(c);
      } else {
        second = std::max(second, overlap);
      }
    }
    out.adopted_origin = (best > 0 && best > second) ? best_idx : -1;
  }
  out.reverted_commit = reverted_flag_ != 0;
  out.final_dag = std::move(global_);
  return out;
}

SimulationOutcome run(const NetworkGraph& graph, const MiningModel& mining,
                      const ConsensusConfig& cfg, const std::vector<DelayInjection>& injections,
                      double horizon, std::uint64_t seed, RelayMode relay) {
  Simulator sim(graph, mining, cfg, injections, seed, relay);
  return sim.finish(horizon);
}

long long sample_blocks(double power, double duration, const MiningModel& mining,
                        std::mt19937_64& rng) {
  if (!(mining.difficulty >= 1.0)) throw InvalidConfig("difficulty must be at least 1 hash");
  if (!(mining.tick > 0.0)) throw InvalidConfig("tick must be positive");
  if (!(power >= 0.0)) throw InvalidConfig("power must be non-negative");
  if (!(duration >= 0.0)) throw InvalidConfig("duration must be non-negative");
  long long ticks = std::llround(duration / mining.tick);
  if (std::abs(static_cast<double>(ticks) * mining.tick - duration) >
      1e-6 * std::max(1.0, duration))
    throw InvalidConfig("duration must be a whole number of ticks");
  long long trials = std::llround(power * mining.tick);
  if (trials <= 0 || ticks <= 0) return 0;
  std::binomial_distribution<long long> dist(trials, 1.0 / mining.difficulty);
  long long total = 0;
  for (long long i = 0; i < ticks; ++i) total += dist(rng);
  return total;
}

UncleCounts count_uncles(const SimulationOutcome& outcome, const ConsensusConfig& cfg) {
  UncleCounts counts;
  counts.per_class.assign(outcome.classes.size(), 0);
  std::set<NodeId> attackers(outcome.attackers.begin(), outcome.attackers.end());
  std::map<NodeId, int> class_of;
  for (std::size_t c = 0; c < outcome.classes.size(); ++c)
    for (NodeId id : outcome.classes[c]) class_of[id] = static_cast<int>(c);
  std::vector<BlockId> branch = main_branch(outcome.final_dag, cfg);
  std::set<BlockId> on_branch(branch.begin(), branch.end());
  for (const auto& [id, b] : outcome.final_dag.blocks()) {
    if (id == outcome.final_dag.genesis() || on_branch.count(id)) continue;
    if (attackers.count(b.miner))
      counts.attacker++;
    else if (auto it = class_of.find(b.miner); it != class_of.end())
      counts.per_class[it->second]++;
  }
  return counts;
}

}  // namespace balance
