#include "balance/chain.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <deque>

namespace balance {

BlockDag::BlockDag(BlockId genesis_id, double genesis_created_at) : genesis_(genesis_id) {
  Block g;
  g.id = genesis_id;
  g.created_at = genesis_created_at;
  blocks_.emplace(genesis_id, g);
  children_.emplace(genesis_id, std::vector<BlockId>{});
}

bool BlockDag::knows(BlockId id) const {
  if (blocks_.count(id)) return true;
  for (const auto& [parent, waiting] : orphans_)
    for (const Block& b : waiting)
      if (b.id == id) return true;
  return false;
}

const Block& BlockDag::block(BlockId id) const {
  auto it = blocks_.find(id);
  if (it == blocks_.end()) throw UnknownBlock("unknown block id " + std::to_string(id));
  return it->second;
}

const std::vector<BlockId>& BlockDag::children(BlockId id) const {
  auto it = children_.find(id);
  if (it == children_.end()) throw UnknownBlock("unknown block id " + std::to_string(id));
  return it->second;
}

std::size_t BlockDag::orphan_count() const {
  std::size_t n = 0;
  for (const auto& [parent, waiting] : orphans_) n += waiting.size();
  return n;
}

namespace {

// Content equality ignoring height: the DAG owns the height field.
bool same_content(const Block& a, const Block& b) {
  return a.id == b.id && a.parent == b.parent && a.miner == b.miner &&
         a.created_at == b.created_at && a.txs == b.txs;
}

}  // namespace

void BlockDag::insert(const Block& b) {
  if (!b.parent) {
    // Only the genesis block has no parent.
    const Block& g = blocks_.at(genesis_);
    if (b.id != genesis_ || b.created_at != g.created_at || !b.txs.empty())
      throw GenesisMismatch("parentless block " + std::to_string(b.id) +
                            " does not match genesis " + std::to_string(genesis_));
    return;
  }
  if (auto it = blocks_.find(b.id); it != blocks_.end()) {
    if (!same_content(it->second, b))
      throw DuplicateConflict("block id " + std::to_string(b.id) + " re-inserted with different content");
    return;
  }
  if (auto oit = orphans_.find(*b.parent); oit != orphans_.end())
    for (const Block& w : oit->second)
      if (w.id == b.id) {
        if (!same_content(w, b))
          throw DuplicateConflict("block id " + std::to_string(b.id) + " re-inserted with different content");
        return;
      }
  if (!blocks_.count(*b.parent)) {
    orphans_[*b.parent].push_back(b);
    return;
  }
  attach(b);
  // Attaching may release buffered descendants, possibly a whole chain.
  std::deque<BlockId> ready{b.id};
  while (!ready.empty()) {
    BlockId parent = ready.front();
    ready.pop_front();
    auto it = orphans_.find(parent);
    if (it == orphans_.end()) continue;
    std::vector<Block> waiting = std::move(it->second);
    orphans_.erase(it);
    for (Block& w : waiting) {
      // A duplicate id can surface here if two copies were buffered under
      // different claimed parents; resolve it the same way insert does.
      if (auto bit = blocks_.find(w.id); bit != blocks_.end()) {
        if (!same_content(bit->second, w))
          throw DuplicateConflict("block id " + std::to_string(w.id) + " re-inserted with different content");
        continue;
      }
      BlockId wid = w.id;
      attach(std::move(w));
      ready.push_back(wid);
    }
  }
}

void BlockDag::attach(Block b) {
  BlockId id = b.id;
  b.height = blocks_.at(*b.parent).height + 1;
  auto& sibs = children_[*b.parent];
  sibs.push_back(id);
  std::sort(sibs.begin(), sibs.end());
  children_.emplace(id, std::vector<BlockId>{});
  blocks_.emplace(id, std::move(b));
}

void BlockDag::merge_from(const BlockDag& other) {
  if (other.genesis_ != genesis_ ||
      other.blocks_.at(other.genesis_).created_at != blocks_.at(genesis_).created_at)
    throw GenesisMismatch("cannot merge views with different genesis blocks");
  for (const auto& [id, b] : other.blocks_)
    if (id != other.genesis_) insert(b);
  for (const auto& [parent, waiting] : other.orphans_)
    for (const Block& b : waiting) insert(b);
}

BlockDag merge(const BlockDag& a, const BlockDag& b) {
  BlockDag out = a;
  out.merge_from(b);
  return out;
}

std::string BlockDag::serialize() const {
  std::string out;
  out.reserve(blocks_.size() * 48);
  char line[160];
  for (const auto& [id, b] : blocks_) {
    int n;
    if (b.parent)
      n = std::snprintf(line, sizeof line, "%" PRIu64 " %" PRIu64 " %u %u %.6f", id, *b.parent,
                        b.miner, b.height, b.created_at);
    else
      n = std::snprintf(line, sizeof line, "%" PRIu64 " - %u %u %.6f", id, b.miner, b.height,
                        b.created_at);
    out.append(line, static_cast<std::size_t>(n));
    for (TxId tx : b.txs) {
      out.push_back(' ');
      out += std::to_string(tx);
    }
    out.push_back('\n');
  }
  return out;
}

bool BlockDag::descends_from(BlockId descendant, BlockId ancestor) const {
  BlockId cur = descendant;
  for (;;) {
    if (cur == ancestor) return true;
    const Block& b = block(cur);
    if (!b.parent) return false;
    cur = *b.parent;
  }
}

}  // namespace balance
