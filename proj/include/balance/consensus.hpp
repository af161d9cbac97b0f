#pragma once

#include <vector>

#include "balance/chain.hpp"

namespace balance {

enum class ForkChoice { nakamoto, ghost };

struct ConsensusConfig {
  ForkChoice rule = ForkChoice::ghost;
  // Number of main-branch successors required for a commit.
  int m = 11;
};

// Per-rule defaults: the longest-branch rule commits after 5 confirmations,
// the heaviest-subtree rule after 11.
ConsensusConfig default_config(ForkChoice rule);

// depth(b): 1 for a leaf, else 1 + max over children. Length in blocks of
// the longest chain rooted at b, b included.
int depth(const BlockDag& dag, BlockId b);

// num_desc(b): 1 for a leaf, else 1 + sum over children. Size in blocks of
// the subtree rooted at b, b included.
int num_desc(const BlockDag& dag, BlockId b);

// Main branch from genesis to a tip: at every step descend into the child
// with the maximal score (depth for nakamoto, num_desc for ghost); ties go
// to the smallest block id. Deterministic for a given view.
std::vector<BlockId> main_branch(const BlockDag& dag, const ConsensusConfig& cfg);

// A transaction is committed iff some main-branch block contains it and is
// followed by at least cfg.m further main-branch blocks.
bool is_committed(const BlockDag& dag, const ConsensusConfig& cfg, TxId tx);

}  // namespace balance
