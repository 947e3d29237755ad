#include "gorgo/prefix_index.hpp"

#include <algorithm>
#include <cassert>
#include <sstream>

namespace gorgo {

namespace {

std::size_t common_prefix_len(std::span<const Token> a, std::span<const Token> b) {
    std::size_t n = std::min(a.size(), b.size());
    std::size_t i = 0;
    while (i < n && a[i] == b[i]) ++i;
    return i;
}

}  // namespace

PrefixIndex::PrefixIndex(std::int64_t block_size, std::int64_t capacity_blocks)
    : block_size_(block_size), capacity_blocks_(capacity_blocks) {
    if (block_size_ < 1) throw ConfigError("prefix index block_size must be >= 1");
    if (capacity_blocks_ < 1) throw ConfigError("prefix index capacity_blocks must be >= 1");
}

void PrefixIndex::touch(Node& n, const NodeId& node_id, std::uint64_t now) {
    auto it = std::lower_bound(n.holders.begin(), n.holders.end(), node_id,
                               [](const auto& h, const NodeId& id) { return h.first < id; });
    if (it != n.holders.end() && it->first == node_id) {
        it->second = std::max(it->second, now);
    } else {
        n.holders.insert(it, {node_id, now});
    }
    n.last_touch = std::max(n.last_touch, now);
}

bool PrefixIndex::holds(const Node& n, const NodeId& node_id) {
    auto it = std::lower_bound(n.holders.begin(), n.holders.end(), node_id,
                               [](const auto& h, const NodeId& id) { return h.first < id; });
    return it != n.holders.end() && it->first == node_id;
}

void PrefixIndex::insert(std::span<const Token> tokens, const NodeId& node_id, std::uint64_t now) {
    if (tokens.empty()) return;

    Node* cur = &root_;
    std::span<const Token> rest = tokens;
    while (!rest.empty()) {
        std::span<const Token> want = rest.subspan(0, std::min<std::size_t>(rest.size(), static_cast<std::size_t>(block_size_)));

        // Find a child sharing at least the first token with `want`.
        auto it = std::find_if(cur->children.begin(), cur->children.end(),
                               [&](const auto& c) { return c.first.front() == want.front(); });
        if (it == cur->children.end()) {
            // New edge holding one block of the remaining tokens.
            auto at = std::lower_bound(cur->children.begin(), cur->children.end(), want,
                                       [](const auto& c, std::span<const Token> w) {
                                           return std::lexicographical_compare(c.first.begin(), c.first.end(), w.begin(), w.end());
                                       });
            it = cur->children.insert(at, {TokenSeq(want.begin(), want.end()), Node{}});
            ++total_blocks_;
            touch(it->second, node_id, now);
            cur = &it->second;
            rest = rest.subspan(want.size());
            continue;
        }

        TokenSeq& label = it->first;
        std::size_t lcp = common_prefix_len(label, rest);
        if (lcp == label.size()) {
            // Full edge consumed.
            touch(it->second, node_id, now);
            cur = &it->second;
            rest = rest.subspan(lcp);
            continue;
        }
        if (lcp == rest.size()) {
            // Remaining tokens are a strict prefix of the edge: split so the
            // inserted sequence ends on a node boundary.
            Node tail = std::move(it->second);
            TokenSeq tail_label(label.begin() + static_cast<std::ptrdiff_t>(lcp), label.end());
            Node head;
            head.holders = tail.holders;  // everyone covering the edge covers its prefix
            head.last_touch = tail.last_touch;
            head.children.push_back({std::move(tail_label), std::move(tail)});
            label.resize(lcp);
            it->second = std::move(head);
            ++total_blocks_;
            touch(it->second, node_id, now);
            rest = rest.subspan(lcp);
            cur = &it->second;
            continue;
        }
        if (lcp == 0) {
            // Shares the first token but diverges immediately cannot happen:
            // children are keyed by first token. Defensive: treat as miss.
            assert(false && "children share first token but lcp == 0");
            return;
        }
        // Diverges inside the edge: split, then descend into a new sibling.
        Node tail = std::move(it->second);
        TokenSeq tail_label(label.begin() + static_cast<std::ptrdiff_t>(lcp), label.end());
        Node head;
        head.holders = tail.holders;
        head.last_touch = tail.last_touch;
        head.children.push_back({std::move(tail_label), std::move(tail)});
        label.resize(lcp);
        it->second = std::move(head);
        ++total_blocks_;
        touch(it->second, node_id, now);
        cur = &it->second;
        rest = rest.subspan(lcp);
    }

    if (total_blocks_ > capacity_blocks_) evict_to_capacity(now);
}

PrefixIndex::RawMatch PrefixIndex::raw_match(std::span<const Token> tokens) const {
    RawMatch m;
    const Node* cur = &root_;
    std::span<const Token> rest = tokens;
    while (!rest.empty()) {
        const Node* next = nullptr;
        std::size_t consumed = 0;
        for (const auto& [label, child] : cur->children) {
            if (label.front() != rest.front()) continue;
            std::size_t lcp = common_prefix_len(label, rest);
            if (lcp == label.size()) {
                next = &child;
                consumed = lcp;
            } else if (lcp > 0) {
                // Partial match into this edge terminates the walk.
                m.len += static_cast<std::int64_t>(lcp);
                m.deepest = &child;
                return m;
            }
            break;  // at most one child can share the first token
        }
        if (next == nullptr) break;
        m.len += static_cast<std::int64_t>(consumed);
        m.deepest = next;
        cur = next;
        rest = rest.subspan(consumed);
    }
    return m;
}

std::int64_t PrefixIndex::rounded(std::int64_t raw_len, std::size_t query_len) const {
    if (raw_len == static_cast<std::int64_t>(query_len)) return raw_len;
    return (raw_len / block_size_) * block_size_;
}

MatchResult PrefixIndex::longest_prefix_match(std::span<const Token> tokens) const {
    MatchResult r;
    RawMatch m = raw_match(tokens);
    r.match_len = rounded(m.len, tokens.size());
    if (r.match_len == 0) return r;
    r.holders.reserve(m.deepest->holders.size());
    for (const auto& [id, _] : m.deepest->holders) r.holders.push_back(id);
    return r;
}

std::int64_t PrefixIndex::overlap_for_node(std::span<const Token> tokens, const NodeId& node_id) const {
    std::int64_t raw = 0;
    const Node* cur = &root_;
    std::span<const Token> rest = tokens;
    while (!rest.empty()) {
        const Node* next = nullptr;
        std::size_t consumed = 0;
        bool partial = false;
        for (const auto& [label, child] : cur->children) {
            if (label.front() != rest.front()) continue;
            std::size_t lcp = common_prefix_len(label, rest);
            if (!holds(child, node_id)) break;
            if (lcp == label.size()) {
                next = &child;
                consumed = lcp;
            } else if (lcp > 0) {
                raw += static_cast<std::int64_t>(lcp);
                partial = true;
            }
            break;
        }
        if (partial || next == nullptr) break;
        raw += static_cast<std::int64_t>(consumed);
        cur = next;
        rest = rest.subspan(consumed);
    }
    return rounded(raw, tokens.size());
}

std::int64_t PrefixIndex::evict_to_capacity(std::uint64_t /*now*/) {
    std::int64_t evicted = 0;
    while (total_blocks_ > capacity_blocks_) {
        // Locate the leaf with the oldest touch; DFS order breaks ties.
        Node* best_parent = nullptr;
        std::size_t best_idx = 0;
        std::uint64_t best_touch = 0;
        bool found = false;

        struct Frame {
            Node* node;
        };
        std::vector<Frame> stack{{&root_}};
        while (!stack.empty()) {
            Node* n = stack.back().node;
            stack.pop_back();
            for (std::size_t i = 0; i < n->children.size(); ++i) {
                Node& c = n->children[i].second;
                if (c.children.empty()) {
                    if (!found || c.last_touch < best_touch) {
                        found = true;
                        best_touch = c.last_touch;
                        best_parent = n;
                        best_idx = i;
                    }
                } else {
                    stack.push_back({&c});
                }
            }
        }
        if (!found) break;
        best_parent->children.erase(best_parent->children.begin() + static_cast<std::ptrdiff_t>(best_idx));
        --total_blocks_;
        ++evicted;
    }
    return evicted;
}

void PrefixIndex::clear() {
    root_ = Node{};
    total_blocks_ = 0;
}

std::string PrefixIndex::debug_dump() const {
    std::ostringstream out;
    struct Frame {
        const Node* node;
        std::string path;
    };

    // Recursive lambda keeps output in sorted child order.
    auto emit = [&out](const auto& self, const Node& n, const std::string& path) -> void {
        for (const auto& [label, child] : n.children) {
            std::string p = path;
            for (Token t : label) {
                if (!p.empty()) p += ' ';
                p += std::to_string(t);
            }
            out << p << " -> ";
            bool first = true;
            for (const auto& [id, ts] : child.holders) {
                if (!first) out << ',';
                first = false;
                out << id << '@' << ts;
            }
            out << '\n';
            self(self, child, p);
        }
    };
    emit(emit, root_, "");
    return out.str();
}

}  // namespace gorgo
