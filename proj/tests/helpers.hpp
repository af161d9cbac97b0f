#pragma once

#include <utility>
#include <vector>

#include "balance/chain.hpp"
#include "balance/simnet.hpp"

namespace testutil {

// Two branches compete under one genesis. The longest chain runs
// 1-3-6-9-12; the heaviest subtree hangs off 2 via 2-5-8-13 with side
// blocks 4 and 7, so the two fork-choice rules pick different tips.
// Tx 100 sits in block 1, 101 in 2, 102 in 5, 103 in 8.
inline balance::BlockDag fork_tree() {
  balance::BlockDag dag;
  auto add = [&dag](balance::BlockId id, balance::BlockId parent,
                    std::vector<balance::TxId> txs = {}) {
    balance::Block b;
    b.id = id;
    b.parent = parent;
    b.miner = 1;
    b.created_at = static_cast<double>(id);
    b.txs = std::move(txs);
    dag.insert(b);
  };
  add(1, 0, {100});
  add(2, 0, {101});
  add(3, 1);
  add(4, 2);
  add(5, 2, {102});
  add(6, 3);
  add(7, 5);
  add(8, 5, {103});
  add(9, 6);
  add(12, 9);
  add(13, 8);
  return dag;
}

// Complete graph over the given miner powers; ids start at 1.
inline balance::NetworkGraph miner_clique(const std::vector<double>& powers,
                                          double latency = 0.01) {
  balance::NetworkGraph g;
  for (std::size_t i = 0; i < powers.size(); ++i)
    g.nodes.push_back(
        {static_cast<balance::NodeId>(i + 1), powers[i], balance::NodeRole::miner});
  for (std::size_t i = 0; i < g.nodes.size(); ++i)
    for (std::size_t j = i + 1; j < g.nodes.size(); ++j)
      g.edges.push_back({g.nodes[i].id, g.nodes[j].id, latency});
  return g;
}

}  // namespace testutil
