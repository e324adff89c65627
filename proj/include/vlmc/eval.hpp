#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "vlmc/build.hpp"
#include "vlmc/errors.hpp"
#include "vlmc/ingest.hpp"
#include "vlmc/model.hpp"
#include "vlmc/ngram.hpp"
#include "vlmc/tokens.hpp"
#include "vlmc/trails.hpp"

namespace vlmc {

// ---------------------------------------------------------------------------
// Summarisation: ranked list comparison

struct ListComparison {
    double footrule = 0;
    double overlap = 0;
    std::size_t m = 0;
    std::size_t union_size = 0;
};

namespace detail {

inline std::map<Tokens, std::size_t> ranks_of(const RankedList& l) {
    std::map<Tokens, std::size_t> r;
    for (std::size_t i = 0; i < l.entries.size(); ++i) r.emplace(l.entries[i].item, i + 1);
    return r;
}

}  // namespace detail

/// Spearman footrule with location parameter m + 1, as proximity in [0, 1]:
/// 1 - sum over the union of |rank1 - rank2| / (m (m + 1)).
inline double footrule(const RankedList& a, const RankedList& b) {
    const std::size_t m = std::max(a.m, b.m);
    if (m == 0) throw DomainError("footrule: m must be >= 1");
    if (a.size() > m || b.size() > m) throw DomainError("footrule: list longer than m");
    const auto ra = detail::ranks_of(a), rb = detail::ranks_of(b);
    std::set<Tokens> items;
    for (const auto& [k, _] : ra) items.insert(k);
    for (const auto& [k, _] : rb) items.insert(k);
    std::size_t sum = 0;
    for (const auto& item : items) {
        const auto fa = ra.contains(item) ? ra.at(item) : m + 1;
        const auto fb = rb.contains(item) ? rb.at(item) : m + 1;
        sum += fa > fb ? fa - fb : fb - fa;
    }
    return 1.0 - static_cast<double>(sum) / static_cast<double>(m * (m + 1));
}

/// Fraction of the reference items that also occur in the assessed list.
inline double overlap(const RankedList& reference, const RankedList& assessed) {
    if (reference.entries.empty()) throw DomainError("overlap: empty reference list");
    const auto ref = detail::ranks_of(reference);
    std::size_t hit = 0;
    for (const auto& [item, _] : detail::ranks_of(assessed)) hit += ref.contains(item);
    return static_cast<double>(hit) / static_cast<double>(ref.size());
}

inline ListComparison compare_lists(const RankedList& reference, const RankedList& assessed) {
    ListComparison c;
    c.footrule = footrule(reference, assessed);
    c.overlap = overlap(reference, assessed);
    c.m = std::max(reference.m, assessed.m);
    std::set<Tokens> items;
    for (const auto& e : reference.entries) items.insert(e.item);
    for (const auto& e : assessed.entries) items.insert(e.item);
    c.union_size = items.size();
    return c;
}

/// Compares the model's top-m trails of length n with the top-m n-grams of
/// `sessions` (the reference). N-grams starting at S are left out of the
/// reference since trails never start there.
inline ListComparison summarisation_eval(const ModelGraph& model, const std::vector<Session>& sessions, std::size_t n,
                                         const TrailQuery& query) {
    if (query.mtl != n) throw ContractViolation("summarisation_eval: query.mtl must equal n");
    const auto reference = top_m_ngrams(count_ngrams(sessions, n), query.m, true);
    if (reference.entries.empty()) throw DomainError("summarisation_eval: no n-grams of this length");
    const auto assessed = top_m_trails(extract_trails(model, query), query.m);
    return compare_lists(reference, assessed);
}

// ---------------------------------------------------------------------------
// Prediction

struct ReachableItem {
    Token page = 0;
    double probability = 0;
};

/// Out-neighbour pages ranked by probability, ties in token order.
using Reachable = std::vector<ReachableItem>;

struct PredictionOutcome {
    Tokens prefix;
    Token target = 0;
    Reachable reachable;
    std::size_t rank = 1;
    std::size_t ae = 0;
    std::size_t ae_c = 0;
    bool fallback = false;
};

inline void sort_reachable(Reachable& r) {
    std::sort(r.begin(), r.end(), [](const ReachableItem& a, const ReachableItem& b) {
        if (a.probability != b.probability) return a.probability > b.probability;
        return token_less(a.page, b.page);
    });
}

/// Competition ranks ("1224"): rank = 1 + #items strictly more probable than
/// the target, ae = rank - 1, ae_c = #items strictly less probable. A target
/// missing from the reachable set has probability 0.
inline PredictionOutcome score_prediction(Reachable reachable, Token target, Tokens prefix = {}) {
    sort_reachable(reachable);
    double pt = 0;
    for (const auto& r : reachable)
        if (r.page == target) pt = r.probability;
    PredictionOutcome o;
    o.prefix = std::move(prefix);
    o.target = target;
    for (const auto& r : reachable) {
        if (r.probability > pt) ++o.ae;
        else if (r.probability < pt) ++o.ae_c;
    }
    o.rank = o.ae + 1;
    o.reachable = std::move(reachable);
    return o;
}

enum class Anchor {
    session_start,  // the prefix begins right after S
    anywhere        // the prefix may start at any clone of its first page
};

namespace detail {

inline bool path_less(const ModelGraph& model, const std::vector<StateId>& a, const std::vector<StateId>& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), [&](StateId x, StateId y) {
        return model.state(x).key < model.state(y).key;
    });
}

inline Reachable reachable_from(const ModelGraph& model, StateId s) {
    std::map<Token, double> by_page;
    const double v = model.visits(s);
    for (const auto& [t, w] : model.state(s).out) by_page[model.state(t).key.page] += w;
    Reachable r;
    for (const auto& [page, w] : by_page) r.push_back({page, v > 0 ? w / v : 0.0});
    sort_reachable(r);
    return r;
}

}  // namespace detail

/// Follows the prefix through the state graph along its most probable state
/// path (ties: lexicographically smaller path) and returns the reachable
/// pages of the final state. nullopt when no state path spells the prefix.
inline std::optional<Reachable> predict_next(const ModelGraph& model, const Tokens& prefix,
                                             Anchor anchor = Anchor::session_start) {
    if (prefix.empty()) throw ContractViolation("predict_next: empty prefix");
    struct Best {
        double score;
        std::vector<StateId> path;
    };
    std::map<StateId, Best> best;
    std::size_t i = 0;
    if (anchor == Anchor::session_start) {
        best[model.start()] = {1.0, {model.start()}};
    } else {
        const double total = model.total_views();
        for (auto id : model.states_of(prefix.front()))
            if (model.visits(id) > 0 && total > 0) best[id] = {model.visits(id) / total, {id}};
        i = 1;
    }
    for (; i < prefix.size() && !best.empty(); ++i) {
        std::map<StateId, Best> next;
        for (const auto& [u, b] : best) {
            const double v = model.visits(u);
            if (v <= 0) continue;
            for (const auto& [t, w] : model.state(u).out) {
                if (model.state(t).key.page != prefix[i]) continue;
                Best cand{b.score * w / v, b.path};
                cand.path.push_back(t);
                auto it = next.find(t);
                if (it == next.end() || cand.score > it->second.score ||
                    (cand.score == it->second.score && detail::path_less(model, cand.path, it->second.path)))
                    next[t] = std::move(cand);
            }
        }
        best = std::move(next);
    }
    if (best.empty()) return std::nullopt;
    auto winner = best.begin();
    for (auto it = std::next(best.begin()); it != best.end(); ++it)
        if (it->second.score > winner->second.score ||
            (it->second.score == winner->second.score && detail::path_less(model, it->second.path, winner->second.path)))
            winner = it;
    return detail::reachable_from(model, winner->first);
}

/// Every page ranked by initial probability.
inline Reachable unconditional_ranking(const ModelGraph& model) {
    Reachable r;
    const double total = model.total_views();
    for (auto p : model.pages()) r.push_back({p, total > 0 ? model.page_views(p) / total : 0.0});
    sort_reachable(r);
    return r;
}

/// predict_next anchored at S; when that fails, leading pages are dropped
/// until an unanchored walk succeeds, and an empty remainder falls back to
/// the unconditional page ranking. `fallback` tells whether any of that
/// was needed.
inline std::pair<Reachable, bool> predict_with_fallback(const ModelGraph& model, const Tokens& prefix) {
    if (auto r = predict_next(model, prefix, Anchor::session_start)) return {std::move(*r), false};
    for (std::size_t drop = 1; drop < prefix.size(); ++drop) {
        const Tokens rest(prefix.begin() + static_cast<std::ptrdiff_t>(drop), prefix.end());
        if (auto r = predict_next(model, rest, Anchor::anywhere)) return {std::move(*r), true};
    }
    // Dropping nothing but walking unanchored still beats the page ranking.
    if (auto r = predict_next(model, prefix, Anchor::anywhere)) return {std::move(*r), true};
    return {unconditional_ranking(model), true};
}

inline double mae(const std::vector<PredictionOutcome>& outcomes) {
    if (outcomes.empty()) throw DomainError("mae: no outcomes");
    double s = 0;
    for (const auto& o : outcomes) s += static_cast<double>(o.ae);
    return s / static_cast<double>(outcomes.size());
}

/// Ratio of sums: sum(ae) / (sum(ae) + sum(ae_c)); 0 when both are 0.
inline double st_mae(const std::vector<PredictionOutcome>& outcomes) {
    if (outcomes.empty()) throw DomainError("st_mae: no outcomes");
    double ae = 0, aec = 0;
    for (const auto& o : outcomes) {
        ae += static_cast<double>(o.ae);
        aec += static_cast<double>(o.ae_c);
    }
    return ae + aec > 0 ? ae / (ae + aec) : 0.0;
}

// ---------------------------------------------------------------------------
// Cross-validation

struct FoldPlan {
    std::size_t k_total = 0;
    std::size_t train_upto = 0;  // train on partitions 1..train_upto, test on train_upto + 1
};

struct FoldSet {
    std::vector<std::vector<Session>> partitions;
    std::vector<FoldPlan> plans;

    [[nodiscard]] std::vector<Session> training(const FoldPlan& p) const {
        check(p);
        std::vector<Session> out;
        for (std::size_t i = 0; i < p.train_upto; ++i)
            out.insert(out.end(), partitions[i].begin(), partitions[i].end());
        return out;
    }

    [[nodiscard]] const std::vector<Session>& test(const FoldPlan& p) const {
        check(p);
        return partitions[p.train_upto];
    }

private:
    void check(const FoldPlan& p) const {
        if (p.k_total != partitions.size() || p.train_upto < 1 || p.train_upto >= p.k_total)
            throw ContractViolation("fold plan does not fit this fold set");
    }
};

namespace detail {

inline FoldSet split_contiguous(std::vector<Session> sessions, std::size_t k_total) {
    FoldSet f;
    const auto n = sessions.size();
    std::size_t pos = 0;
    for (std::size_t i = 0; i < k_total; ++i) {
        const auto size = n / k_total + (i < n % k_total ? 1 : 0);
        f.partitions.emplace_back(std::make_move_iterator(sessions.begin() + static_cast<std::ptrdiff_t>(pos)),
                                  std::make_move_iterator(sessions.begin() + static_cast<std::ptrdiff_t>(pos + size)));
        pos += size;
    }
    for (std::size_t i = 1; i < k_total; ++i) f.plans.push_back({k_total, i});
    return f;
}

}  // namespace detail

/// Sorts by first timestamp (stable) and cuts k_total contiguous partitions
/// whose sizes differ by at most one; plans train on 1..i and test on i + 1.
inline FoldSet temporal_folds(std::vector<Session> sessions, std::size_t k_total) {
    if (k_total < 2) throw DomainError("temporal_folds: k_total must be >= 2");
    if (sessions.size() < k_total) throw DomainError("temporal_folds: fewer sessions than partitions");
    std::stable_sort(sessions.begin(), sessions.end(),
                     [](const Session& a, const Session& b) { return a.first_timestamp < b.first_timestamp; });
    return detail::split_contiguous(std::move(sessions), k_total);
}

/// Same partitioning after a seeded shuffle (non-temporal cross-validation).
inline FoldSet shuffled_folds(std::vector<Session> sessions, std::size_t k_total, std::uint64_t seed) {
    if (k_total < 2) throw DomainError("shuffled_folds: k_total must be >= 2");
    if (sessions.size() < k_total) throw DomainError("shuffled_folds: fewer sessions than partitions");
    std::mt19937_64 rng(seed);
    for (std::size_t i = sessions.size(); i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(sessions[i - 1], sessions[pick(rng)]);
    }
    return detail::split_contiguous(std::move(sessions), k_total);
}

struct PredictionReport {
    int order = 1;
    std::size_t states = 0;
    double mae = 0;
    double st_mae = 0;
    std::size_t tested = 0;
    std::size_t skipped = 0;  // test sessions of length 1
    std::size_t fallback = 0;
};

/// Predicts the last page of every test session of length >= 2 from the
/// preceding pages.
inline PredictionReport evaluate_predictions(const ModelGraph& model, const std::vector<Session>& test,
                                             std::vector<PredictionOutcome>* outcomes_out = nullptr) {
    PredictionReport rep;
    rep.order = model.order;
    rep.states = model.state_count();
    std::vector<PredictionOutcome> outcomes;
    for (const auto& s : test) {
        if (s.pages.size() < 2) {
            ++rep.skipped;
            continue;
        }
        Tokens prefix(s.pages.begin(), s.pages.end() - 1);
        auto [reachable, fell_back] = predict_with_fallback(model, prefix);
        auto o = score_prediction(std::move(reachable), s.pages.back(), std::move(prefix));
        o.fallback = fell_back;
        rep.fallback += fell_back;
        outcomes.push_back(std::move(o));
    }
    if (outcomes.empty()) throw DomainError("prediction_eval: no test session of length >= 2");
    rep.tested = outcomes.size();
    rep.mae = mae(outcomes);
    rep.st_mae = st_mae(outcomes);
    if (outcomes_out) *outcomes_out = std::move(outcomes);
    return rep;
}

inline PredictionReport prediction_eval(const FoldSet& folds, const FoldPlan& plan, const BuildParams& params) {
    const auto model = build_vlmc(folds.training(plan), params);
    return evaluate_predictions(model, folds.test(plan));
}

}  // namespace vlmc
