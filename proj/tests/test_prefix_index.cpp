#include <algorithm>
#include <set>
#include <vector>

#include "doctest.h"
#include "gorgo/prefix_index.hpp"
#include "gorgo/rng.hpp"

using namespace gorgo;

namespace {

// Naive list-of-sequences oracle for longest-prefix-match and per-node
// overlap (block size 1 semantics).
struct NaiveIndex {
    std::vector<std::pair<TokenSeq, NodeId>> entries;

    void insert(const TokenSeq& t, const NodeId& n) { entries.push_back({t, n}); }

    static std::size_t lcp(const TokenSeq& a, const TokenSeq& b) {
        std::size_t n = std::min(a.size(), b.size());
        std::size_t i = 0;
        while (i < n && a[i] == b[i]) ++i;
        return i;
    }

    MatchResult match(const TokenSeq& q) const {
        std::size_t best = 0;
        for (const auto& [seq, node] : entries) best = std::max(best, lcp(seq, q));
        MatchResult r;
        r.match_len = static_cast<std::int64_t>(best);
        if (best == 0) return r;
        std::set<NodeId> holders;
        for (const auto& [seq, node] : entries)
            if (lcp(seq, q) >= best) holders.insert(node);
        r.holders.assign(holders.begin(), holders.end());
        return r;
    }

    std::int64_t overlap(const TokenSeq& q, const NodeId& n) const {
        std::size_t best = 0;
        for (const auto& [seq, node] : entries)
            if (node == n) best = std::max(best, lcp(seq, q));
        return static_cast<std::int64_t>(best);
    }
};

TokenSeq random_seq(rng::Stream& rng, std::size_t max_len, std::uint32_t alphabet) {
    std::size_t len = 1 + rng.next_below(max_len);
    TokenSeq t(len);
    for (auto& x : t) x = static_cast<Token>(rng.next_below(alphabet));
    return t;
}

}  // namespace

TEST_CASE("exact reinsertion match") {
    PrefixIndex idx(1, 1024);
    idx.insert(TokenSeq{1, 2, 3, 4}, "A", 1);
    auto m = idx.longest_prefix_match(TokenSeq{1, 2, 3, 4});
    CHECK(m.match_len == 4);
    REQUIRE(m.holders.size() == 1);
    CHECK(m.holders[0] == "A");

    // A full-query match is reported even when it is not block-aligned.
    PrefixIndex blocky(16, 1024);
    blocky.insert(TokenSeq{1, 2, 3, 4}, "A", 1);
    CHECK(blocky.longest_prefix_match(TokenSeq{1, 2, 3, 4}).match_len == 4);
}

TEST_CASE("divergent sequences and partial queries") {
    PrefixIndex idx(1, 1024);
    idx.insert(TokenSeq{1, 2, 3, 4}, "A", 1);
    idx.insert(TokenSeq{1, 2, 9, 9}, "B", 2);
    auto m = idx.longest_prefix_match(TokenSeq{1, 2, 3, 0});
    CHECK(m.match_len == 3);
    REQUIRE(m.holders.size() == 1);
    CHECK(m.holders[0] == "A");
}

TEST_CASE("same sequence from two nodes unions holders") {
    PrefixIndex idx(1, 1024);
    idx.insert(TokenSeq{7, 8, 9}, "A", 1);
    idx.insert(TokenSeq{7, 8, 9}, "B", 2);
    auto m = idx.longest_prefix_match(TokenSeq{7, 8, 9});
    CHECK(m.match_len == 3);
    CHECK(m.holders == std::vector<NodeId>{"A", "B"});
}

TEST_CASE("empty trie and plain prefix match") {
    PrefixIndex idx(1, 1024);
    auto m = idx.longest_prefix_match(TokenSeq{1, 2, 3});
    CHECK(m.match_len == 0);
    CHECK(m.holders.empty());

    idx.insert(TokenSeq{5, 5, 5, 5, 5}, "C", 1);
    auto m2 = idx.longest_prefix_match(TokenSeq{5, 5, 5, 7});
    CHECK(m2.match_len == 3);
    CHECK(m2.holders == std::vector<NodeId>{"C"});
}

TEST_CASE("block granularity rounds down except on full-query matches") {
    PrefixIndex idx(2, 1024);
    idx.insert(TokenSeq{1, 2, 3}, "A", 1);
    // Raw overlap 3 in the middle of a query rounds down to the block edge.
    CHECK(idx.longest_prefix_match(TokenSeq{1, 2, 3, 9}).match_len == 2);
    // Full query contained: no rounding.
    CHECK(idx.longest_prefix_match(TokenSeq{1, 2, 3}).match_len == 3);
    CHECK(idx.overlap_for_node(TokenSeq{1, 2, 3, 9}, "A") == 2);
    CHECK(idx.overlap_for_node(TokenSeq{1, 2, 3}, "A") == 3);
    // Raw match below one block reports zero with empty holders.
    CHECK(idx.longest_prefix_match(TokenSeq{1, 7, 7, 7}).match_len == 0);
    CHECK(idx.longest_prefix_match(TokenSeq{1, 7, 7, 7}).holders.empty());
}

TEST_CASE("overlap_for_node") {
    PrefixIndex idx(1, 1024);
    CHECK(idx.overlap_for_node(TokenSeq{1, 2}, "nobody") == 0);

    idx.insert(TokenSeq{1, 2, 3}, "A", 1);
    idx.insert(TokenSeq{1, 2, 3, 4, 5}, "B", 2);
    CHECK(idx.overlap_for_node(TokenSeq{1, 2, 3, 4, 5}, "A") == 3);
    CHECK(idx.overlap_for_node(TokenSeq{1, 2, 3, 4, 5}, "B") == 5);
    CHECK(idx.overlap_for_node(TokenSeq{1, 2, 3, 4, 5}, "C") == 0);

    // Single-holder degeneracy: overlap equals the global match length.
    PrefixIndex solo(1, 1024);
    solo.insert(TokenSeq{4, 4, 4}, "only", 1);
    auto q = TokenSeq{4, 4, 9};
    CHECK(solo.overlap_for_node(q, "only") == solo.longest_prefix_match(q).match_len);
}

TEST_CASE("idempotent reinsertion changes timestamps only") {
    PrefixIndex idx(1, 1024);
    idx.insert(TokenSeq{1, 2, 3}, "A", 1);
    auto before = idx.longest_prefix_match(TokenSeq{1, 2, 3});
    auto blocks_before = idx.total_blocks();
    idx.insert(TokenSeq{1, 2, 3}, "A", 9);
    auto after = idx.longest_prefix_match(TokenSeq{1, 2, 3});
    CHECK(after.match_len == before.match_len);
    CHECK(after.holders == before.holders);
    CHECK(idx.total_blocks() == blocks_before);
}

TEST_CASE("lru eviction") {
    PrefixIndex idx(1, 2);
    idx.insert(TokenSeq{1}, "A", 1);
    idx.insert(TokenSeq{2}, "A", 2);
    CHECK(idx.evict_to_capacity(3) == 0);  // under capacity: no-op

    idx.insert(TokenSeq{3}, "A", 3);  // overflow evicts the t=1 path
    CHECK(idx.total_blocks() == 2);
    CHECK(idx.longest_prefix_match(TokenSeq{1}).match_len == 0);
    CHECK(idx.longest_prefix_match(TokenSeq{2}).match_len == 1);
    CHECK(idx.longest_prefix_match(TokenSeq{3}).match_len == 1);
}

TEST_CASE("capacity holds after any operation") {
    PrefixIndex idx(1, 32);
    rng::Stream rng(29);
    for (int i = 0; i < 500; ++i) {
        idx.insert(random_seq(rng, 12, 4), "n" + std::to_string(rng.next_below(3)),
                   static_cast<std::uint64_t>(i));
        CHECK(idx.total_blocks() <= idx.capacity_blocks());
    }
}

TEST_CASE("match length is non-decreasing when a longer extension is inserted") {
    PrefixIndex idx(1, 4096);
    rng::Stream rng(31);
    for (int i = 0; i < 200; ++i) {
        TokenSeq base = random_seq(rng, 24, 8);
        idx.insert(base, "A", static_cast<std::uint64_t>(2 * i));
        TokenSeq query = base;
        query.push_back(static_cast<Token>(rng.next_below(8)));
        auto before = idx.longest_prefix_match(query).match_len;
        TokenSeq extended = query;
        extended.push_back(static_cast<Token>(rng.next_below(8)));
        idx.insert(extended, "A", static_cast<std::uint64_t>(2 * i + 1));
        auto after = idx.longest_prefix_match(query).match_len;
        CHECK(after >= before);
    }
}

TEST_CASE("randomized oracle equivalence, 200 inserts x 200 queries") {
    PrefixIndex idx(1, 1 << 20);
    NaiveIndex oracle;
    rng::Stream rng(37);
    std::vector<NodeId> nodes{"n0", "n1", "n2", "n3"};

    for (int i = 0; i < 200; ++i) {
        TokenSeq t = random_seq(rng, 64, 16);
        const NodeId& n = nodes[rng.next_below(nodes.size())];
        idx.insert(t, n, static_cast<std::uint64_t>(i));
        oracle.insert(t, n);
    }
    for (int i = 0; i < 200; ++i) {
        TokenSeq q = random_seq(rng, 64, 16);
        auto got = idx.longest_prefix_match(q);
        auto want = oracle.match(q);
        CHECK(got.match_len == want.match_len);
        CHECK(got.holders == want.holders);
        for (const auto& n : nodes) CHECK(idx.overlap_for_node(q, n) == oracle.overlap(q, n));
    }
}

TEST_CASE("debug dump golden") {
    PrefixIndex idx(1, 1024);
    idx.insert(TokenSeq{1, 2}, "A", 5);
    idx.insert(TokenSeq{1, 3}, "B", 7);
    CHECK(idx.debug_dump() ==
          "1 -> A@5,B@7\n"
          "1 2 -> A@5\n"
          "1 3 -> B@7\n");
}
