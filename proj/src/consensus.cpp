#include "balance/consensus.hpp"

#include <algorithm>
#include <unordered_map>

namespace balance {

ConsensusConfig default_config(ForkChoice rule) {
  return rule == ForkChoice::nakamoto ? ConsensusConfig{rule, 5} : ConsensusConfig{rule, 11};
}

namespace {

// One iterative post-order pass computing the requested score for every
// block in the subtree of root. Iterative on purpose: main branches reach
// thousands of blocks and recursion would not survive that.
std::unordered_map<BlockId, int> subtree_scores(const BlockDag& dag, BlockId root, ForkChoice rule) {
  std::unordered_map<BlockId, int> score;
  score.reserve(dag.block_count());
  std::vector<std::pair<BlockId, bool>> stack{{root, false}};
  while (!stack.empty()) {
    auto [b, expanded] = stack.back();
    stack.pop_back();
    const auto& kids = dag.children(b);
    if (!expanded) {
      stack.push_back({b, true});
      for (BlockId c : kids) stack.push_back({c, false});
      continue;
    }
    if (kids.empty()) {
      score[b] = 1;
    } else if (rule == ForkChoice::nakamoto) {
      int best = 0;
      for (BlockId c : kids) best = std::max(best, score[c]);
      score[b] = 1 + best;
    } else {
      int sum = 0;
      for (BlockId c : kids) sum += score[c];
      score[b] = 1 + sum;
    }
  }
  return score;
}

}  // namespace

int depth(const BlockDag& dag, BlockId b) {
  return subtree_scores(dag, b, ForkChoice::nakamoto).at(b);
}

int num_desc(const BlockDag& dag, BlockId b) {
  return subtree_scores(dag, b, ForkChoice::ghost).at(b);
}

std::vector<BlockId> main_branch(const BlockDag& dag, const ConsensusConfig& cfg) {
  auto score = subtree_scores(dag, dag.genesis(), cfg.rule);
  std::vector<BlockId> branch{dag.genesis()};
  for (;;) {
    const auto& kids = dag.children(branch.back());
    if (kids.empty()) break;
    // Children are sorted ascending, so keeping the first strict maximum
    // realizes the smallest-id tie-break.
    BlockId pick = kids.front();
    int best = score.at(pick);
    for (std::size_t i = 1; i < kids.size(); ++i)
      if (score.at(kids[i]) > best) {
        pick = kids[i];
        best = score.at(kids[i]);
      }
    branch.push_back(pick);
  }
  return branch;
}

bool is_committed(const BlockDag& dag, const ConsensusConfig& cfg, TxId tx) {
  std::vector<BlockId> branch = main_branch(dag, cfg);
  for (std::size_t i = 0; i < branch.size(); ++i) {
    const Block& b = dag.block(branch[i]);
    if (std::find(b.txs.begin(), b.txs.end(), tx) != b.txs.end())
      return branch.size() - 1 - i >= static_cast<std::size_t>(cfg.m);
  }
  return false;
}

}  // namespace balance
