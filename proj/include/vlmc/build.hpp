#pragma once

// Model construction: first-order estimation, divergence assessment,
// in-path clustering and state cloning up to a target order.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "vlmc/errors.hpp"
#include "vlmc/ingest.hpp"
#include "vlmc/model.hpp"
#include "vlmc/ngram.hpp"
#include "vlmc/tokens.hpp"

namespace vlmc {

/// Absolute slack on "summary <= gamma" so that values equal in exact
/// arithmetic compare as equal in double precision.
inline constexpr double kGammaSlack = 1e-12;

struct InPath {
    Tokens path;  // history ending in the assessed state's page
    std::uint64_t count = 0;
    std::vector<std::uint64_t> out_counts;  // aligned with InPathSet::targets

    [[nodiscard]] double conditional(std::size_t j) const {
        return count ? static_cast<double>(out_counts[j]) / static_cast<double>(count) : 0.0;
    }
};

/// In-paths of one state with their next-token counts over a shared target list.
struct InPathSet {
    Tokens targets;
    std::vector<InPath> paths;
};

using Partition = std::vector<std::vector<Tokens>>;

struct DivergenceRow {
    Tokens in_path;
    Token target = 0;
    double higher = 0;   // conditional estimate given the in-path
    double current = 0;  // the model's transition probability
    double diff = 0;
};

struct DivergenceTable {
    StateKey state;
    std::vector<DivergenceRow> rows;

    [[nodiscard]] double max() const {
        double m = 0;
        for (const auto& r : rows) m = std::max(m, r.diff);
        return m;
    }

    [[nodiscard]] double avg() const {
        if (rows.empty()) return 0;
        double s = 0;
        for (const auto& r : rows) s += r.diff;
        return s / static_cast<double>(rows.size());
    }

    [[nodiscard]] double summary(GammaMode mode) const { return mode == GammaMode::max ? max() : avg(); }
};

namespace detail {

inline Tokens prepend(Token p, const Tokens& x) {
    Tokens out;
    out.reserve(x.size() + 1);
    out.push_back(p);
    out.insert(out.end(), x.begin(), x.end());
    return out;
}

inline Tokens append(const Tokens& x, Token v) {
    Tokens out = x;
    out.push_back(v);
    return out;
}

inline InPathSet make_inpath_set(std::vector<Tokens> paths, const NGramIndex& index) {
    std::sort(paths.begin(), paths.end(), TokensLess{});
    paths.erase(std::unique(paths.begin(), paths.end()), paths.end());
    std::map<Token, bool, decltype(&token_less)> targets(&token_less);
    for (const auto& p : paths)
        for (const auto& [v, _] : index.successors(p)) targets[v] = true;
    InPathSet set;
    for (const auto& [v, _] : targets) set.targets.push_back(v);
    for (auto& p : paths) {
        InPath ip;
        ip.count = index.count(p);
        ip.out_counts.assign(set.targets.size(), 0);
        for (std::size_t j = 0; j < set.targets.size(); ++j) ip.out_counts[j] = index.count(append(p, set.targets[j]));
        ip.path = std::move(p);
        set.paths.push_back(std::move(ip));
    }
    return set;
}

/// Maps every state context to its state and resolves a history to the
/// state(s) whose contexts cover it.
class ContextIndex {
public:
    explicit ContextIndex(const ModelGraph& model) : finish_(model.finish()) {
        for (StateId id = 0; id < model.state_count(); ++id)
            for (const auto& c : model.state(id).contexts) {
                owner_[c] = id;
                max_len_ = std::max(max_len_, c.size());
            }
    }

    /// Adds `count` occurrences of history `h` to the owning state. A history
    /// shorter than the page's contexts is split over the contexts extending it.
    void resolve(const Tokens& h, std::uint64_t count, const NGramIndex& index,
                 std::map<StateId, double>& out) const {
        if (h.back() == kFinish) {
            out[finish_] += static_cast<double>(count);
            return;
        }
        for (std::size_t len = std::min(h.size(), max_len_); len >= 1; --len) {
            auto it = owner_.find(Tokens(h.end() - static_cast<std::ptrdiff_t>(len), h.end()));
            if (it != owner_.end()) {
                out[it->second] += static_cast<double>(count);
                return;
            }
        }
        if (h.front() == kStart) throw ContractViolation("state contexts do not cover a session history");
        for (const auto& [p, c] : index.predecessors(h)) resolve(prepend(p, h), c, index, out);
    }

private:
    StateId finish_;
    std::size_t max_len_ = 0;
    std::unordered_map<Tokens, StateId, TokensHash> owner_;
};

inline std::vector<Tokens> contexts_of(const ModelGraph& model, StateId id) {
    if (id == model.start()) return {Tokens{kStart}};
    return model.state(id).contexts;
}

/// Current page-level transition probabilities of a state, per target token.
inline std::map<Token, double> page_probabilities(const ModelGraph& model, StateId id) {
    std::map<Token, double> out;
    const double v = model.visits(id);
    if (v <= 0) return out;
    for (const auto& [t, w] : model.state(id).out) out[model.state(t).key.page] += w / v;
    return out;
}

inline void append_rows(DivergenceTable& table, const InPathSet& set, const std::map<Token, double>& current) {
    for (const auto& p : set.paths)
        for (std::size_t j = 0; j < set.targets.size(); ++j) {
            DivergenceRow row;
            row.in_path = p.path;
            row.target = set.targets[j];
            row.higher = p.conditional(j);
            auto it = current.find(row.target);
            row.current = it == current.end() ? 0.0 : it->second;
            row.diff = std::abs(row.higher - row.current);
            table.rows.push_back(std::move(row));
        }
}

}  // namespace detail

/// The state's contexts as in-paths (no extension).
inline InPathSet current_inpaths(const ModelGraph& model, const NGramIndex& index, StateId state) {
    auto ctx = detail::contexts_of(model, state);
    if (ctx.empty()) throw ContractViolation("state carries no contexts (model not built from sessions)");
    return detail::make_inpath_set(std::move(ctx), index);
}

/// The state's contexts extended one token further into the past. Contexts
/// that already begin with S are complete histories and stay as they are.
inline InPathSet next_order_inpaths(const ModelGraph& model, const NGramIndex& index, StateId state) {
    const auto ctx = detail::contexts_of(model, state);
    if (ctx.empty()) throw ContractViolation("state carries no contexts (model not built from sessions)");
    std::vector<Tokens> paths;
    for (const auto& c : ctx) {
        if (c.front() == kStart) {
            paths.push_back(c);
            continue;
        }
        if (c.size() + 2 > index.max_len())
            throw ContractViolation("n-gram index too short for the next order");
        for (const auto& [p, _] : index.predecessors(c)) paths.push_back(detail::prepend(p, c));
    }
    return detail::make_inpath_set(std::move(paths), index);
}

/// Conditional estimates given each next-order in-path versus the state's
/// current transition probabilities; one row per (in-path, out page).
inline DivergenceTable divergence(const ModelGraph& model, const NGramIndex& index, StateId state) {
    DivergenceTable table{model.state(state).key, {}};
    detail::append_rows(table, next_order_inpaths(model, index, state), detail::page_probabilities(model, state));
    return table;
}

/// How well the clones of `page` represent the conditionals of the contexts
/// they hold, i.e. the residual divergence after cloning.
inline DivergenceTable accuracy(const ModelGraph& model, const NGramIndex& index, PageId page) {
    DivergenceTable table{StateKey{page, 0}, {}};
    for (auto id : model.states_of(page))
        detail::append_rows(table, current_inpaths(model, index, id), detail::page_probabilities(model, id));
    return table;
}

namespace detail {

__extension__ using u128 = unsigned __int128;

inline bool same_conditionals(const InPath& a, const InPath& b) {
    for (std::size_t j = 0; j < a.out_counts.size(); ++j)
        if (static_cast<u128>(a.out_counts[j]) * b.count != static_cast<u128>(b.out_counts[j]) * a.count)
            return false;
    return true;
}

struct Group {
    std::vector<std::size_t> members;
    std::uint64_t count = 0;
    std::vector<std::uint64_t> out;
};

/// gamma-mode summary of |member conditional - pooled| over the rows of a ∪ b.
inline double merged_summary(const InPathSet& set, const Group& a, const Group& b, GammaMode mode) {
    const auto n = set.targets.size();
    const double total = static_cast<double>(a.count + b.count);
    double worst = 0, sum = 0;
    std::size_t rows = 0;
    for (const Group* g : {&a, &b})
        for (auto m : g->members)
            for (std::size_t j = 0; j < n; ++j) {
                const double pooled = static_cast<double>(a.out[j] + b.out[j]) / total;
                const double d = std::abs(set.paths[m].conditional(j) - pooled);
                worst = std::max(worst, d);
                sum += d;
                ++rows;
            }
    if (mode == GammaMode::max) return worst;
    return rows ? sum / static_cast<double>(rows) : 0.0;
}

inline Partition to_partition(const InPathSet& set, std::vector<Group> groups) {
    for (auto& g : groups)
        std::sort(g.members.begin(), g.members.end(),
                  [&](std::size_t x, std::size_t y) { return tokens_less(set.paths[x].path, set.paths[y].path); });
    std::stable_sort(groups.begin(), groups.end(), [&](const Group& x, const Group& y) {
        if (x.count != y.count) return x.count > y.count;
        return tokens_less(set.paths[x.members.front()].path, set.paths[y.members.front()].path);
    });
    Partition out;
    for (const auto& g : groups) {
        std::vector<Tokens> paths;
        for (auto m : g.members) paths.push_back(set.paths[m].path);
        out.push_back(std::move(paths));
    }
    return out;
}

}  // namespace detail

/// Partitions in-paths into groups whose pooled conditional vector stays
/// within gamma of each member. With gamma = 0 only exactly equal vectors
/// share a group. Otherwise groups are merged greedily: starting from
/// singletons in descending count order, the pair whose merge has the
/// smallest gamma-mode summary is merged while that summary is <= gamma.
/// Groups come out by descending total count.
inline Partition cluster_inpaths(const InPathSet& set, double gamma, GammaMode mode) {
    std::vector<std::size_t> order(set.paths.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (set.paths[a].count != set.paths[b].count) return set.paths[a].count > set.paths[b].count;
        return tokens_less(set.paths[a].path, set.paths[b].path);
    });
    std::vector<detail::Group> groups;
    const auto singleton = [&](std::size_t i) {
        return detail::Group{{i}, set.paths[i].count, set.paths[i].out_counts};
    };
    const auto absorb = [](detail::Group& into, const detail::Group& from) {
        into.members.insert(into.members.end(), from.members.begin(), from.members.end());
        into.count += from.count;
        for (std::size_t j = 0; j < into.out.size(); ++j) into.out[j] += from.out[j];
    };

    if (gamma <= 0) {
        for (auto i : order) {
            auto it = std::find_if(groups.begin(), groups.end(), [&](const detail::Group& g) {
                return detail::same_conditionals(set.paths[g.members.front()], set.paths[i]);
            });
            if (it == groups.end()) groups.push_back(singleton(i));
            else absorb(*it, singleton(i));
        }
        return detail::to_partition(set, std::move(groups));
    }

    for (auto i : order) groups.push_back(singleton(i));
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> cost(groups.size(), std::vector<double>(groups.size(), inf));
    for (std::size_t a = 0; a < groups.size(); ++a)
        for (std::size_t b = a + 1; b < groups.size(); ++b)
            cost[a][b] = detail::merged_summary(set, groups[a], groups[b], mode);

    for (;;) {
        std::size_t best_a = 0, best_b = 0;
        double best = inf;
        for (std::size_t a = 0; a < groups.size(); ++a)
            for (std::size_t b = a + 1; b < groups.size(); ++b)
                if (cost[a][b] < best) {
                    best = cost[a][b];
                    best_a = a;
                    best_b = b;
                }
        if (!(best <= gamma + kGammaSlack)) break;
        absorb(groups[best_a], groups[best_b]);
        groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(best_b));
        cost.erase(cost.begin() + static_cast<std::ptrdiff_t>(best_b));
        for (auto& row : cost) row.erase(row.begin() + static_cast<std::ptrdiff_t>(best_b));
        for (std::size_t x = 0; x < groups.size(); ++x) {
            if (x == best_a) continue;
            const auto lo = std::min(x, best_a), hi = std::max(x, best_a);
            cost[lo][hi] = detail::merged_summary(set, groups[lo], groups[hi], mode);
        }
    }
    return detail::to_partition(set, std::move(groups));
}

/// Recomputes every transition weight from the state contexts: a context c
/// followed by v contributes #(c . v) to the state owning the history c . v.
inline void rewire(ModelGraph& model, const NGramIndex& index) {
    const detail::ContextIndex owners(model);
    model.clear_transitions();
    for (auto id : model.ordered_states()) {
        if (id == model.finish()) continue;
        std::map<StateId, double> acc;
        for (const auto& c : detail::contexts_of(model, id))
            for (const auto& [v, cnt] : index.successors(c)) owners.resolve(detail::append(c, v), cnt, index, acc);
        for (const auto& [t, w] : acc) model.set_transition(id, t, w);
    }
}

namespace detail {

/// Splits `state` per partition without rewiring: the first group stays
/// with the state, each further group moves to a fresh clone.
inline std::vector<StateId> apply_partition(ModelGraph& model, const NGramIndex& index, StateId state,
                                            const Partition& partition, bool validate = true) {
    if (partition.empty()) throw ContractViolation("empty partition");
    const auto page = model.state(state).key.page;
    if (is_artificial(page)) throw ContractViolation("S and F cannot be cloned");

    std::vector<Tokens> given;
    for (const auto& g : partition) {
        if (g.empty()) throw ContractViolation("partition has an empty group");
        given.insert(given.end(), g.begin(), g.end());
    }
    std::sort(given.begin(), given.end(), TokensLess{});
    if (std::adjacent_find(given.begin(), given.end()) != given.end())
        throw ContractViolation("partition lists an in-path twice");
    const auto paths_of = [](const InPathSet& s) {
        std::vector<Tokens> out;
        for (const auto& p : s.paths) out.push_back(p.path);
        return out;
    };
    if (validate && given != paths_of(next_order_inpaths(model, index, state)) &&
        given != paths_of(current_inpaths(model, index, state)))
        throw ContractViolation("partition does not match the state's in-paths");

    std::vector<StateId> ids{state};
    model.mutable_state(state).contexts = partition.front();
    for (std::size_t g = 1; g < partition.size(); ++g) {
        const auto id = model.add_clone(page);
        model.mutable_state(id).contexts = partition[g];
        ids.push_back(id);
    }
    return ids;
}

/// Splits states until every context of a state reaches the same successor
/// state on each next page (the automaton is deterministic over the pages
/// whose contexts are tracked). Returns the number of clones created.
inline std::size_t refine_deterministic(ModelGraph& model, const NGramIndex& index) {
    std::size_t created = 0;
    for (bool changed = true; changed;) {
        changed = false;
        auto owners = std::make_unique<ContextIndex>(model);
        for (auto id : model.ordered_states()) {
            const auto& ctx = model.state(id).contexts;
            if (ctx.size() < 2 || is_artificial(model.state(id).key.page)) continue;
            using Signature = std::vector<std::pair<Token, std::vector<StateId>>>;
            std::map<Signature, std::vector<Tokens>> by_signature;
            for (const auto& c : ctx) {
                Signature sig;
                for (const auto& [v, cnt] : index.successors(c)) {
                    std::map<StateId, double> acc;
                    owners->resolve(append(c, v), cnt, index, acc);
                    std::vector<StateId> targets;
                    for (const auto& [t, _] : acc) targets.push_back(t);
                    sig.emplace_back(v, std::move(targets));
                }
                by_signature[sig].push_back(c);
            }
            if (by_signature.size() < 2) continue;
            std::vector<std::pair<std::uint64_t, std::vector<Tokens>>> groups;
            for (auto& [_, g] : by_signature) {
                std::sort(g.begin(), g.end(), TokensLess{});
                std::uint64_t total = 0;
                for (const auto& c : g) total += index.count(c);
                groups.emplace_back(total, std::move(g));
            }
            std::stable_sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) {
                if (a.first != b.first) return a.first > b.first;
                return tokens_less(a.second.front(), b.second.front());
            });
            const auto page = model.state(id).key.page;
            model.mutable_state(id).contexts = groups.front().second;
            for (std::size_t g = 1; g < groups.size(); ++g) {
                const auto clone = model.add_clone(page);
                model.mutable_state(clone).contexts = std::move(groups[g].second);
                ++created;
            }
            owners = std::make_unique<ContextIndex>(model);
            changed = true;
        }
    }
    return created;
}

}  // namespace detail

/// Splits `state` by `partition` (groups of its next-order in-paths, or of
/// its current contexts) and recomputes all transition weights. The first
/// group keeps the state; every other group gets a fresh clone.
inline std::vector<StateId> clone_state(ModelGraph& model, StateId state, const Partition& partition,
                                        const NGramIndex& index) {
    if (partition.size() < 2) throw ContractViolation("clone_state needs at least two groups");
    const auto page = model.state(state).key.page;
    if (!is_artificial(page) && model.page_views(page) < static_cast<double>(model.params.num_visits))
        throw ContractViolation("page is requested fewer than num_visits times");
    auto ids = detail::apply_partition(model, index, state, partition);
    rewire(model, index);
    return ids;
}

/// One state per page plus S and F, weights = bigram counts.
inline ModelGraph build_first_order(const NGramIndex& index) {
    if (index.max_len() < 2) throw ContractViolation("first-order model needs bigram counts");
    ModelGraph model;
    model.mutable_state(model.start()).contexts = {Tokens{kStart}};
    std::vector<PageId> pages;
    for (const auto& [v, _] : index.table(1).counts)
        if (!is_artificial(v.front())) pages.push_back(v.front());
    std::sort(pages.begin(), pages.end(), token_less);
    for (auto p : pages) {
        const auto id = model.add_state(p);
        model.mutable_state(id).contexts = {Tokens{p}};
    }
    rewire(model, index);
    model.order = 1;
    return model;
}

inline ModelGraph build_first_order(const std::vector<Session>& sessions) {
    if (sessions.empty()) throw DomainError("build_first_order: no sessions");
    return build_first_order(NGramIndex(sessions, 2));
}

using OrderObserver = std::function<void(int order, const ModelGraph& model)>;

/// Extends the first-order model one order at a time. At each order every
/// state of a page requested at least num_visits times has its contexts
/// extended one token back; when the gamma-mode divergence of the extended
/// in-paths exceeds gamma they are clustered and the state is cloned.
/// States are visited in ascending (page, clone) order.
inline ModelGraph build_vlmc(const NGramIndex& index, const BuildParams& params, const OrderObserver& observer = {}) {
    params.validate();
    if (index.max_len() < static_cast<std::size_t>(params.target_order) + 1)
        throw ContractViolation("n-gram index too short for the target order");
    auto model = build_first_order(index);
    model.params = params;
    if (observer) observer(1, model);
    for (int k = 2; k <= params.target_order; ++k) {
        std::vector<StateId> eligible;
        for (auto id : model.ordered_states()) {
            const auto page = model.state(id).key.page;
            if (!is_artificial(page) && model.page_views(page) >= static_cast<double>(params.num_visits))
                eligible.push_back(id);
        }
        for (auto id : eligible) {
            const auto set = next_order_inpaths(model, index, id);
            Partition partition;
            if (params.gamma <= 0) {
                partition = cluster_inpaths(set, 0, params.gamma_mode);
            } else if (divergence(model, index, id).summary(params.gamma_mode) > params.gamma + kGammaSlack) {
                partition = cluster_inpaths(set, params.gamma, params.gamma_mode);
            } else {
                partition.emplace_back();
                for (const auto& p : set.paths) partition.front().push_back(p.path);
            }
            detail::apply_partition(model, index, id, partition, false);
        }
        detail::refine_deterministic(model, index);
        rewire(model, index);
        model.order = k;
        if (observer) observer(k, model);
    }
    return model;
}

inline ModelGraph build_vlmc(const std::vector<Session>& sessions, const BuildParams& params,
                             const OrderObserver& observer = {}) {
    if (sessions.empty()) throw DomainError("build_vlmc: no sessions");
    params.validate();
    return build_vlmc(NGramIndex(sessions, static_cast<std::size_t>(params.target_order) + 1), params, observer);
}

}  // namespace vlmc
