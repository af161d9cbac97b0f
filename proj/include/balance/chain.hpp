#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "balance/errors.hpp"

namespace balance {

using BlockId = std::uint64_t;
using TxId = std::uint64_t;
using NodeId = std::uint32_t;

struct Transaction {
  TxId id = 0;
  NodeId source = 0;
  NodeId destination = 0;
  double amount = 0.0;
  // Set on a double spend: the id of the transaction it conflicts with.
  std::optional<TxId> conflicts_with;

  bool operator==(const Transaction&) const = default;
};

struct Block {
  BlockId id = 0;
  // Empty only for the genesis block.
  std::optional<BlockId> parent;
  NodeId miner = 0;
  // Distance from genesis; genesis has height 0. The DAG recomputes this on
  // attach, so it is always consistent with the parent pointer.
  std::uint32_t height = 0;
  double created_at = 0.0;  // simulated seconds
  std::vector<TxId> txs;

  bool operator==(const Block&) const = default;
};

// Append-only block tree (a DAG of blocks where every block has exactly one
// parent pointer; forks make it a tree rooted at genesis). Blocks may arrive
// in any order: a block whose parent is not attached yet is buffered and
// attached once the parent arrives.
class BlockDag {
 public:
  explicit BlockDag(BlockId genesis_id = 0, double genesis_created_at = 0.0);

  BlockId genesis() const { return genesis_; }

  // Inserts one block. Re-inserting an identical block is a no-op; a block
  // with a known id but different content raises DuplicateConflict.
  void insert(const Block& b);

  // Set union of the two views. Both must share the same genesis.
  void merge_from(const BlockDag& other);

  bool attached(BlockId id) const { return blocks_.count(id) != 0; }
  // True if the block is attached or waiting in the orphan buffer.
  bool knows(BlockId id) const;

  const Block& block(BlockId id) const;
  const std::vector<BlockId>& children(BlockId id) const;

  std::size_t block_count() const { return blocks_.size(); }
  std::size_t orphan_count() const;

  // Attached blocks in ascending id order.
  const std::map<BlockId, Block>& blocks() const { return blocks_; }

  // True if descendant can reach ancestor by following parent pointers
  // (a block is its own ancestor). Both blocks must be attached.
  bool descends_from(BlockId descendant, BlockId ancestor) const;

  // Canonical line-oriented snapshot of the attached blocks, ascending id:
  //   id parent miner height created_at tx_ids...
  // The genesis line has parent '-'. Two views are equal views of the chain
  // iff their serializations are byte-identical.
  std::string serialize() const;

 private:
  void attach(Block b);

  BlockId genesis_;
  std::map<BlockId, Block> blocks_;
  std::map<BlockId, std::vector<BlockId>> children_;
  // Blocks waiting for their parent, keyed by the missing parent id.
  std::map<BlockId, std::vector<Block>> orphans_;
};

// Union of the two views as a new DAG; raises GenesisMismatch if the views
// do not share a genesis. Commutative, associative and idempotent.
BlockDag merge(const BlockDag& a, const BlockDag& b);

}  // namespace balance
