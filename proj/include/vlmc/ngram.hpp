#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "vlmc/errors.hpp"
#include "vlmc/ingest.hpp"
#include "vlmc/tokens.hpp"

namespace vlmc {

/// S . pages . F
inline Tokens augment(std::span<const Token> pages) {
    if (pages.empty()) throw ContractViolation("augment: empty session");
    Tokens out;
    out.reserve(pages.size() + 2);
    out.push_back(kStart);
    out.insert(out.end(), pages.begin(), pages.end());
    out.push_back(kFinish);
    return out;
}

inline Tokens augment(const Session& s) { return augment(std::span<const Token>(s.pages)); }

using CountMap = std::unordered_map<Tokens, std::uint64_t, TokensHash>;

/// Counts of length-n windows over augmented sessions.
struct NGramTable {
    std::size_t n = 0;
    CountMap counts;

    [[nodiscard]] std::uint64_t count(const Tokens& g) const {
        auto it = counts.find(g);
        return it == counts.end() ? 0 : it->second;
    }

    [[nodiscard]] std::uint64_t total() const {
        std::uint64_t t = 0;
        for (const auto& [_, c] : counts) t += c;
        return t;
    }
};

inline NGramTable count_ngrams(const std::vector<Session>& sessions, std::size_t n) {
    if (n == 0) throw DomainError("count_ngrams: n must be >= 1");
    NGramTable table{n, {}};
    for (const auto& s : sessions) {
        const auto aug = augment(s);
        for (std::size_t i = 0; i + n <= aug.size(); ++i)
            ++table.counts[Tokens(aug.begin() + static_cast<std::ptrdiff_t>(i),
                                  aug.begin() + static_cast<std::ptrdiff_t>(i + n))];
    }
    return table;
}

/// Window counts for every length 1..max_len with left/right extension
/// lookups, i.e. #(x) for any token sequence x up to max_len.
class NGramIndex {
public:
    NGramIndex() = default;

    NGramIndex(const std::vector<Session>& sessions, std::size_t max_len) : max_len_(max_len) {
        if (max_len == 0) throw DomainError("NGramIndex: max_len must be >= 1");
        for (const auto& s : sessions) {
            const auto aug = augment(s);
            for (std::size_t i = 0; i < aug.size(); ++i) {
                Tokens w;
                for (std::size_t n = 1; n <= max_len && i + n <= aug.size(); ++n) {
                    w.push_back(aug[i + n - 1]);
                    ++counts_[w];
                }
            }
        }
        for (const auto& [w, c] : counts_) {
            if (w.size() < 2) continue;
            successors_[Tokens(w.begin(), w.end() - 1)].emplace_back(w.back(), c);
            predecessors_[Tokens(w.begin() + 1, w.end())].emplace_back(w.front(), c);
        }
        const auto by_token = [](const auto& a, const auto& b) { return token_less(a.first, b.first); };
        for (auto& [_, v] : successors_) std::sort(v.begin(), v.end(), by_token);
        for (auto& [_, v] : predecessors_) std::sort(v.begin(), v.end(), by_token);
    }

    [[nodiscard]] std::size_t max_len() const noexcept { return max_len_; }

    [[nodiscard]] std::uint64_t count(const Tokens& x) const {
        if (x.size() > max_len_) throw ContractViolation("NGramIndex: sequence longer than indexed length");
        auto it = counts_.find(x);
        return it == counts_.end() ? 0 : it->second;
    }

    using Extensions = std::vector<std::pair<Token, std::uint64_t>>;

    /// Tokens v with #(x . v) > 0, in token order.
    [[nodiscard]] const Extensions& successors(const Tokens& x) const { return lookup(successors_, x); }

    /// Tokens p with #(p . x) > 0, in token order.
    [[nodiscard]] const Extensions& predecessors(const Tokens& x) const { return lookup(predecessors_, x); }

    [[nodiscard]] NGramTable table(std::size_t n) const {
        if (n == 0 || n > max_len_) throw DomainError("NGramIndex: table length out of range");
        NGramTable t{n, {}};
        for (const auto& [w, c] : counts_)
            if (w.size() == n) t.counts.emplace(w, c);
        return t;
    }

private:
    using ExtMap = std::unordered_map<Tokens, Extensions, TokensHash>;

    static const Extensions& lookup(const ExtMap& m, const Tokens& x) {
        static const Extensions empty;
        auto it = m.find(x);
        return it == m.end() ? empty : it->second;
    }

    std::size_t max_len_ = 0;
    CountMap counts_;
    ExtMap successors_;
    ExtMap predecessors_;
};

struct RankedEntry {
    Tokens item;
    double score = 0;
};

/// Top-m list: scores non-increasing, ties in ascending token order.
struct RankedList {
    std::size_t m = 0;
    std::vector<RankedEntry> entries;

    [[nodiscard]] std::size_t size() const noexcept { return entries.size(); }
};

/// Sorts by score (descending) and breaks ties lexicographically. Scores
/// within `rel_tol` of the first score of a tie run count as tied.
inline RankedList rank_entries(std::vector<RankedEntry> entries, std::size_t m, double rel_tol = 0) {
    if (m == 0) throw DomainError("ranked list size m must be >= 1");
    std::sort(entries.begin(), entries.end(), [](const RankedEntry& a, const RankedEntry& b) {
        if (a.score != b.score) return a.score > b.score;
        return tokens_less(a.item, b.item);
    });
    if (rel_tol > 0) {
        std::size_t i = 0;
        while (i < entries.size()) {
            const double head = entries[i].score;
            std::size_t j = i + 1;
            while (j < entries.size() && head - entries[j].score <= rel_tol * std::abs(head)) ++j;
            std::sort(entries.begin() + static_cast<std::ptrdiff_t>(i), entries.begin() + static_cast<std::ptrdiff_t>(j),
                      [](const RankedEntry& a, const RankedEntry& b) { return tokens_less(a.item, b.item); });
            i = j;
        }
    }
    if (entries.size() > m) entries.resize(m);
    return RankedList{m, std::move(entries)};
}

/// When `skip_start` is set, n-grams beginning with S are left out (trails
/// never start at S, so they cannot be matched by a model ranking).
inline RankedList top_m_ngrams(const NGramTable& table, std::size_t m, bool skip_start = false) {
    std::vector<RankedEntry> entries;
    entries.reserve(table.counts.size());
    for (const auto& [g, c] : table.counts) {
        if (skip_start && !g.empty() && g.front() == kStart) continue;
        entries.push_back({g, static_cast<double>(c)});
    }
    return rank_entries(std::move(entries), m);
}

/// `n,tokens,count` rows in ranking order.
inline std::string ngram_table_csv(const NGramTable& table, const PageTable* pages = nullptr) {
    const auto ranked = rank_entries([&] {
        std::vector<RankedEntry> e;
        for (const auto& [g, c] : table.counts) e.push_back({g, static_cast<double>(c)});
        return e;
    }(), std::max<std::size_t>(1, table.counts.size()));
    std::string out = "n,tokens,count\n";
    for (const auto& e : ranked.entries) {
        out += std::to_string(table.n) + ',' + format_tokens(e.item, pages) + ',' +
               std::to_string(static_cast<std::uint64_t>(e.score)) + '\n';
    }
    return out;
}

/// `rank,tokens,score` rows. `decimals` < 0 prints integral scores.
inline std::string ranked_list_csv(const RankedList& list, const PageTable* pages = nullptr, int decimals = -1,
                                   const char* item_header = "tokens", const char* score_header = "score") {
    std::string out = std::string("rank,") + item_header + ',' + score_header + '\n';
    for (std::size_t i = 0; i < list.entries.size(); ++i) {
        const auto& e = list.entries[i];
        std::string score;
        if (decimals < 0) {
            score = std::to_string(static_cast<long long>(e.score));
        } else {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.*f", decimals, e.score);
            score = buf;
        }
        out += std::to_string(i + 1) + ',' + format_tokens(e.item, pages) + ',' + score + '\n';
    }
    return out;
}

}  // namespace vlmc
