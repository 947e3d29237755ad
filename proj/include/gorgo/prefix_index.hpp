#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gorgo/types.hpp"

namespace gorgo {

using NodeId = std::string;

struct MatchResult {
    std::int64_t match_len = 0;       // L_hit, in tokens
    std::vector<NodeId> holders;      // sorted; empty iff match_len == 0
};

/// Token-block radix trie mapping prompt prefixes to the nodes that have
/// served them. Stores no KV contents, only (node id, last-touch) marks along
/// each path. Value-semantic: copies are deep snapshots, which is how gossip
/// summaries are modeled.
///
/// Match lengths are rounded down to the block boundary unless the raw match
/// consumes the whole query. Block size 1 gives exact longest-common-prefix
/// semantics.
class PrefixIndex {
public:
    explicit PrefixIndex(std::int64_t block_size = 16, std::int64_t capacity_blocks = 1 << 16);

    void insert(std::span<const Token> tokens, const NodeId& node_id, std::uint64_t now);
    MatchResult longest_prefix_match(std::span<const Token> tokens) const;
    std::int64_t overlap_for_node(std::span<const Token> tokens, const NodeId& node_id) const;

    // Removes least-recently-touched leaf blocks until total <= capacity.
    // Returns the number of blocks evicted. `now` is accepted for interface
    // symmetry with insert; LRU order depends only on stored touch times.
    std::int64_t evict_to_capacity(std::uint64_t now);

    std::int64_t total_blocks() const { return total_blocks_; }
    std::int64_t capacity_blocks() const { return capacity_blocks_; }
    std::int64_t block_size() const { return block_size_; }
    bool empty() const { return total_blocks_ == 0; }
    void clear();

    // One line per path: "t1 t2 .. -> holder@touch,holder@touch", sorted by
    // path label; used by golden tests.
    std::string debug_dump() const;

private:
    struct Node {
        // Children sorted by label; vector keeps the type copyable and the
        // iteration order deterministic.
        std::vector<std::pair<TokenSeq, Node>> children;
        // Sorted by node id.
        std::vector<std::pair<NodeId, std::uint64_t>> holders;
        std::uint64_t last_touch = 0;
    };

    struct RawMatch {
        std::int64_t len = 0;
        const Node* deepest = nullptr;  // node owning the final matched token
    };

    RawMatch raw_match(std::span<const Token> tokens) const;
    std::int64_t rounded(std::int64_t raw_len, std::size_t query_len) const;
    static void touch(Node& n, const NodeId& node_id, std::uint64_t now);
    static bool holds(const Node& n, const NodeId& node_id);

    Node root_;
    std::int64_t block_size_;
    std::int64_t capacity_blocks_;
    std::int64_t total_blocks_ = 0;
};

}  // namespace gorgo
