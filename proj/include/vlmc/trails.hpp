#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vlmc/errors.hpp"
#include "vlmc/model.hpp"
#include "vlmc/ngram.hpp"
#include "vlmc/tokens.hpp"

namespace vlmc {

enum class LengthMode { strict, nonstrict };

inline const char* to_string(LengthMode m) { return m == LengthMode::strict ? "strict" : "nonstrict"; }

inline LengthMode parse_length_mode(std::string_view s) {
    if (s == "strict") return LengthMode::strict;
    if (s == "nonstrict") return LengthMode::nonstrict;
    throw ConfigError("length mode must be 'strict' or 'nonstrict', got '" + std::string(s) + "'");
}

struct TrailQuery {
    double lambda = 0.001;  // cut-point; a trail survives when its probability is > lambda
    std::size_t mtl = 3;    // maximum trail length in tokens, F included
    LengthMode length_mode = LengthMode::strict;
    std::size_t m = 10;

    void validate() const {
        if (!(lambda >= 0 && lambda <= 1)) throw ConfigError("lambda must lie in [0, 1]");
        if (mtl < 1) throw ConfigError("mtl must be >= 1");
        if (m < 1) throw ConfigError("top-m must be >= 1");
    }
};

struct Trail {
    Tokens pages;
    double probability = 0;
};

/// Relative tolerance under which two trail probabilities count as tied.
inline constexpr double kTrailTieTolerance = 1e-9;

/// Level-by-level expansion from every page, weighted by initial
/// probability. Each frontier trail keeps the probability mass of every
/// state path that spells it, so a trail's probability is the sum over its
/// clone paths. Trails at or below lambda are pruned together with all their
/// extensions. F ends a trail and counts toward its length.
inline std::vector<Trail> extract_trails(const ModelGraph& model, const TrailQuery& query) {
    query.validate();
    if (query.lambda <= 0 && model.has_cycle())
        throw ConfigError("lambda = 0 on a cyclic model would enumerate without bound");

    struct Node {
        Tokens pages;
        std::map<StateId, double> mass;
        double probability = 0;
    };
    const double total = model.total_views();
    std::vector<Trail> found;
    if (total <= 0) return found;

    std::vector<Node> level;
    for (auto page : model.pages()) {
        Node n{{page}, {}, 0};
        for (auto id : model.states_of(page)) {
            const double p = model.visits(id) / total;
            if (p > 0) n.mass[id] = p;
            n.probability += p;
        }
        if (n.probability > query.lambda) level.push_back(std::move(n));
    }

    for (std::size_t len = 1; !level.empty(); ++len) {
        const bool collect = query.length_mode == LengthMode::nonstrict || len == query.mtl;
        if (collect)
            for (const auto& n : level) found.push_back({n.pages, n.probability});
        if (len == query.mtl) break;
        std::vector<Node> next;
        for (const auto& n : level) {
            if (n.pages.back() == kFinish) continue;
            std::map<Token, std::map<StateId, double>, decltype(&token_less)> children(&token_less);
            for (const auto& [u, m] : n.mass) {
                const double v = model.visits(u);
                if (v <= 0) continue;
                for (const auto& [t, w] : model.state(u).out) children[model.state(t).key.page][t] += m * w / v;
            }
            for (auto& [page, mass] : children) {
                double p = 0;
                for (const auto& [_, x] : mass) p += x;
                if (!(p > query.lambda)) continue;
                Node c{n.pages, std::move(mass), p};
                c.pages.push_back(page);
                next.push_back(std::move(c));
            }
        }
        level = std::move(next);
    }

    if (query.length_mode == LengthMode::nonstrict) {
        std::set<Tokens> prefixes;
        for (const auto& t : found)
            if (t.pages.size() > 1) prefixes.insert(Tokens(t.pages.begin(), t.pages.end() - 1));
        std::erase_if(found, [&](const Trail& t) { return prefixes.contains(t.pages); });
    }
    std::sort(found.begin(), found.end(), [](const Trail& a, const Trail& b) { return tokens_less(a.pages, b.pages); });
    return found;
}

/// Probability-descending, lexicographic among ties, truncated to m.
inline RankedList top_m_trails(const std::vector<Trail>& trails, std::size_t m) {
    std::vector<RankedEntry> entries;
    entries.reserve(trails.size());
    for (const auto& t : trails) entries.push_back({t.pages, t.probability});
    return rank_entries(std::move(entries), m, kTrailTieTolerance);
}

/// `rank,trail,probability` rows, probabilities at 4 decimals.
inline std::string trails_csv(const RankedList& list, const PageTable* pages = nullptr) {
    return ranked_list_csv(list, pages, 4, "trail", "probability");
}

}  // namespace vlmc
