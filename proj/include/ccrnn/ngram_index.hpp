#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "corpus.hpp"
#include "error.hpp"

namespace ccrnn {

using ContextId = std::uint32_t;
using NGram = std::vector<CharId>;
using NGramCounts = std::map<NGram, std::uint64_t>;

/// Counts of every contiguous substring of length 1..n_max; one pass per order.
inline NGramCounts count_ngrams(std::span<const CharId> stream, std::size_t n_max)
{
    if (n_max < 1)
        throw ParameterError("n-gram order must be at least 1");
    NGramCounts counts;
    for (std::size_t n = 1; n <= n_max && n <= stream.size(); ++n) {
        for (std::size_t t = 0; t + n <= stream.size(); ++t)
            ++counts[NGram(stream.begin() + t, stream.begin() + t + n)];
    }
    return counts;
}

/**
 * Frequency-filtered set of character n-grams stored as a trie over reversed
 * sequences: the parent of node (x1..xn) is its proper suffix (x2..xn), so a
 * longest-suffix query is a single descent from the root reading the history
 * backwards. Node index doubles as the context id; node 0 is the empty context.
 *
 * Retained: every n-gram of length <= n_max with count >= cutoff, every observed
 * unigram, and all suffixes of retained n-grams.
 */
class NGramIndex {
public:
    static constexpr ContextId empty_context = 0;

    NGramIndex() : nodes_{Node{}} {}

    /// Only the empty context: every query maps to context 0.
    static NGramIndex empty_only() { return NGramIndex(); }

    static NGramIndex build(const NGramCounts& counts, std::uint64_t cutoff, std::size_t n_max)
    {
        if (cutoff < 1)
            throw ParameterError("n-gram cutoff must be at least 1");
        if (n_max < 1)
            throw ParameterError("n-gram order must be at least 1");
        std::vector<Entry> keep;
        for (const auto& [gram, count] : counts) {
            if (gram.empty() || gram.size() > n_max)
                continue;
            if (gram.size() == 1 || count >= cutoff)
                keep.push_back({gram, count});
        }
        // suffix closure
        std::map<NGram, std::uint64_t> closed;
        for (const auto& e : keep)
            closed[e.gram] = e.count;
        for (const auto& e : keep) {
            for (std::size_t k = 1; k < e.gram.size(); ++k) {
                NGram suffix(e.gram.begin() + k, e.gram.end());
                if (!closed.count(suffix)) {
                    auto it = counts.find(suffix);
                    closed[suffix] = it == counts.end() ? 0 : it->second;
                }
            }
        }
        std::vector<Entry> all;
        all.reserve(closed.size());
        for (auto& [g, c] : closed)
            all.push_back({g, c});
        return from_entries(std::move(all), cutoff, n_max);
    }

    /**
     * Same retained set as build(count_ngrams(stream, n_max), cutoff, n_max),
     * without materializing rare n-grams: order n+1 is only counted where the
     * n-gram ending at the same position reached the cutoff, since a frequent
     * n-gram has frequent suffixes.
     */
    static NGramIndex build(std::span<const CharId> stream, std::uint64_t cutoff, std::size_t n_max)
    {
        if (cutoff < 1)
            throw ParameterError("n-gram cutoff must be at least 1");
        if (n_max < 1)
            throw ParameterError("n-gram order must be at least 1");
        constexpr std::uint32_t none = std::numeric_limits<std::uint32_t>::max();

        std::vector<Node> nodes{Node{}};
        std::unordered_map<std::uint64_t, std::uint32_t> children;
        auto child = [&](std::uint32_t parent, CharId sym) {
            const std::uint64_t key = (std::uint64_t(parent) << 32) | sym;
            auto [it, inserted] = children.try_emplace(key, static_cast<std::uint32_t>(nodes.size()));
            if (inserted)
                nodes.push_back(Node{parent, sym, 0, nodes[parent].depth + 1});
            return it->second;
        };

        std::vector<std::uint32_t> at(stream.size(), none);
        for (std::size_t t = 0; t < stream.size(); ++t) {
            at[t] = child(0, stream[t]);
            ++nodes[at[t]].count;
        }
        for (std::size_t n = 1; n < n_max; ++n) {
            bool any = false;
            for (std::size_t t = stream.size(); t-- > 0;) {
                const std::uint32_t cur = at[t];
                if (cur == none || t < n || nodes[cur].count < cutoff) {
                    at[t] = none;
                    continue;
                }
                const std::uint32_t next = child(cur, stream[t - n]);
                ++nodes[next].count;
                at[t] = next;
                any = true;
            }
            if (!any)
                break;
        }

        std::vector<Entry> keep;
        for (std::size_t i = 1; i < nodes.size(); ++i) {
            if (nodes[i].depth == 1 || nodes[i].count >= cutoff)
                keep.push_back({gram_of(nodes, static_cast<std::uint32_t>(i)), nodes[i].count});
        }
        return from_entries(std::move(keep), cutoff, n_max);
    }

    /// Context count including the empty context.
    std::size_t size() const noexcept { return nodes_.size(); }
    std::size_t max_order() const noexcept { return n_max_; }
    std::uint64_t cutoff() const noexcept { return cutoff_; }

    /**
     * Context of the longest retained suffix of `history` (oldest first, newest
     * last). Only the last max_order() symbols are examined. Returns the empty
     * context iff the newest symbol is not a retained unigram.
     */
    ContextId longest_match(std::span<const CharId> history) const
    {
        std::uint32_t node = 0;
        std::size_t steps = 0;
        for (auto it = history.rbegin(); it != history.rend() && steps < n_max_; ++it, ++steps) {
            auto found = children_.find((std::uint64_t(node) << 32) | *it);
            if (found == children_.end())
                break;
            node = found->second;
        }
        return node;
    }

    NGram ngram(ContextId id) const
    {
        check(id);
        return gram_of(nodes_, id);
    }

    std::uint64_t count(ContextId id) const
    {
        check(id);
        return nodes_[id].count;
    }

    bool contains(std::span<const CharId> gram) const
    {
        std::uint32_t node = 0;
        for (auto it = gram.rbegin(); it != gram.rend(); ++it) {
            auto found = children_.find((std::uint64_t(node) << 32) | *it);
            if (found == children_.end())
                return false;
            node = found->second;
        }
        return true;
    }

    /// Inspection dump: `<count>\t<context-id>\t<n-gram as escaped chars>` per context.
    void dump(std::ostream& os, const CharVocab& cv) const
    {
        for (std::size_t id = 0; id < nodes_.size(); ++id) {
            os << nodes_[id].count << '\t' << id << '\t';
            for (CharId c : gram_of(nodes_, static_cast<std::uint32_t>(id)))
                os << escape_char(cv.char_of(c));
            os << '\n';
        }
    }

    /// Text form embedded in checkpoints: header line, then `<count>\t<id>\t<char ids>` per non-empty context.
    std::string serialize() const
    {
        std::ostringstream os;
        os << "ngram_index " << n_max_ << ' ' << cutoff_ << ' ' << nodes_.size() << '\n';
        for (std::size_t id = 1; id < nodes_.size(); ++id) {
            os << nodes_[id].count << '\t' << id << '\t';
            const NGram g = gram_of(nodes_, static_cast<std::uint32_t>(id));
            for (std::size_t k = 0; k < g.size(); ++k)
                os << (k ? " " : "") << g[k];
            os << '\n';
        }
        return os.str();
    }

    static NGramIndex deserialize(std::string_view text)
    {
        auto lines = split_text_lines(text);
        if (lines.empty())
            throw InputError("empty n-gram index");
        std::istringstream head(lines[0]);
        std::string tag;
        std::size_t n_max = 0, size = 0;
        std::uint64_t cutoff = 0;
        head >> tag >> n_max >> cutoff >> size;
        if (tag != "ngram_index" || !head || lines.size() != size)
            throw InputError("malformed n-gram index header");
        std::vector<Entry> entries;
        std::vector<std::size_t> ids;
        for (std::size_t i = 1; i < lines.size(); ++i) {
            std::istringstream ls(lines[i]);
            Entry e;
            std::size_t id = 0;
            ls >> e.count >> id;
            CharId c;
            while (ls >> c)
                e.gram.push_back(c);
            if (e.gram.empty())
                throw InputError("malformed n-gram index line " + std::to_string(i));
            ids.push_back(id);
            entries.push_back(std::move(e));
        }
        NGramIndex idx = from_entries(entries, cutoff, n_max);
        for (std::size_t i = 0; i < entries.size(); ++i) {
            if (idx.longest_match(entries[i].gram) != ids[i] ||
                idx.nodes_[ids[i]].depth != entries[i].gram.size())
                throw InputError("n-gram index ids are not canonical");
        }
        return idx;
    }

    friend bool operator==(const NGramIndex& a, const NGramIndex& b)
    {
        return a.n_max_ == b.n_max_ && a.cutoff_ == b.cutoff_ && a.nodes_ == b.nodes_;
    }

private:
    struct Node {
        std::uint32_t parent = 0;
        CharId symbol = 0;
        std::uint64_t count = 0;
        std::uint32_t depth = 0;
        friend bool operator==(const Node&, const Node&) = default;
    };

    struct Entry {
        NGram gram;
        std::uint64_t count = 0;
    };

    void check(ContextId id) const
    {
        if (id >= nodes_.size())
            throw IndexError("context id " + std::to_string(id) + " out of range");
    }

    static NGram gram_of(const std::vector<Node>& nodes, std::uint32_t id)
    {
        NGram g;
        for (std::uint32_t n = id; n != 0; n = nodes[n].parent)
            g.push_back(nodes[n].symbol);
        return g; // walking to the root reads the n-gram front to back
    }

    /// Canonical ids: by length, then by reversed sequence. Parents precede children.
    static NGramIndex from_entries(std::vector<Entry> entries, std::uint64_t cutoff, std::size_t n_max)
    {
        std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
            if (a.gram.size() != b.gram.size())
                return a.gram.size() < b.gram.size();
            return std::lexicographical_compare(a.gram.rbegin(), a.gram.rend(), b.gram.rbegin(), b.gram.rend());
        });
        NGramIndex idx;
        idx.n_max_ = n_max;
        idx.cutoff_ = cutoff;
        std::uint64_t unigram_total = 0;
        for (const auto& e : entries) {
            std::uint32_t parent = 0;
            if (e.gram.size() > 1) {
                auto it = idx.children_.end();
                std::uint32_t node = 0;
                for (std::size_t k = e.gram.size() - 1; k >= 1; --k) {
                    it = idx.children_.find((std::uint64_t(node) << 32) | e.gram[k]);
                    if (it == idx.children_.end())
                        throw InputError("n-gram set is not suffix-closed");
                    node = it->second;
                }
                parent = node;
            } else {
                unigram_total += e.count;
            }
            const auto id = static_cast<std::uint32_t>(idx.nodes_.size());
            if (!idx.children_.emplace((std::uint64_t(parent) << 32) | e.gram.front(), id).second)
                throw InputError("duplicate n-gram");
            idx.nodes_.push_back(Node{parent, e.gram.front(), e.count, static_cast<std::uint32_t>(e.gram.size())});
        }
        idx.nodes_[0].count = unigram_total;
        return idx;
    }

    std::vector<Node> nodes_;
    std::unordered_map<std::uint64_t, std::uint32_t> children_;
    std::size_t n_max_ = 0;
    std::uint64_t cutoff_ = 1;
};

} // namespace ccrnn
