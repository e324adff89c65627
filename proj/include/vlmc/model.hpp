#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "vlmc/errors.hpp"
#include "vlmc/tokens.hpp"

namespace vlmc {

enum class GammaMode { max, avg };

inline const char* to_string(GammaMode m) { return m == GammaMode::max ? "max" : "avg"; }

inline GammaMode parse_gamma_mode(std::string_view s) {
    if (s == "max") return GammaMode::max;
    if (s == "avg") return GammaMode::avg;
    throw ConfigError("gamma mode must be 'max' or 'avg', got '" + std::string(s) + "'");
}

struct BuildParams {
    int target_order = 1;
    double gamma = 0;
    GammaMode gamma_mode = GammaMode::max;
    std::uint64_t num_visits = 0;

    void validate() const {
        if (target_order < 1) throw ConfigError("target order must be >= 1");
        if (!(gamma >= 0 && gamma <= 1)) throw ConfigError("gamma must lie in [0, 1]");
    }
};

struct StateKey {
    PageId page = 0;
    std::uint32_t clone = 0;

    bool operator==(const StateKey&) const = default;

    /// Page in token order (S first, F last), then clone index.
    friend std::strong_ordering operator<=>(const StateKey& a, const StateKey& b) {
        if (auto c = token_order_key(a.page) <=> token_order_key(b.page); c != 0) return c;
        return a.clone <=> b.clone;
    }
};

using StateId = std::uint32_t;

/// Weighted directed graph over (page, clone) states plus S and F.
///
/// Transition weights are traversal counts; visits of a non-F state are the
/// sum of its out-weights and of F the sum of its in-weights. States built
/// from sessions also carry their contexts: the histories (token sequences
/// ending in the state's page) whose occurrences the state stands for.
class ModelGraph {
public:
    struct State {
        StateKey key;
        std::vector<Tokens> contexts;
        std::map<StateId, double> out;
        double out_total = 0;
        double in_total = 0;
    };

    ModelGraph() {
        add_state(kStart);
        add_state(kFinish);
    }

    StateId add_state(PageId page, std::uint32_t clone = 0) {
        if (is_artificial(page) && clone != 0) throw ContractViolation("S and F cannot be cloned");
        const StateKey key{page, clone};
        if (index_.contains(key)) throw ContractViolation("duplicate state");
        const auto id = static_cast<StateId>(states_.size());
        states_.push_back(State{key, {}, {}, 0, 0});
        index_.emplace(key, id);
        return id;
    }

    /// Adds a fresh clone of `page` with the next unused clone index.
    StateId add_clone(PageId page) {
        std::uint32_t next = 0;
        for (auto it = index_.lower_bound(StateKey{page, 0}); it != index_.end() && it->first.page == page; ++it)
            next = it->first.clone + 1;
        return add_state(page, next);
    }

    void add_transition(StateId from, StateId to, double weight) {
        set_transition(from, to, transition_weight(from, to) + weight);
    }

    void set_transition(StateId from, StateId to, double weight) {
        check(from);
        check(to);
        if (states_[from].key.page == kFinish) throw ContractViolation("F has no outgoing transitions");
        if (states_[to].key.page == kStart) throw ContractViolation("S has no incoming transitions");
        if (!(weight >= 0)) throw ContractViolation("transition weights must be non-negative");
        auto& out = states_[from].out;
        const double old = transition_weight(from, to);
        if (weight == 0) out.erase(to);
        else out[to] = weight;
        states_[from].out_total += weight - old;
        states_[to].in_total += weight - old;
    }

    void clear_transitions() {
        for (auto& s : states_) {
            s.out.clear();
            s.out_total = 0;
            s.in_total = 0;
        }
    }

    [[nodiscard]] double transition_weight(StateId from, StateId to) const {
        const auto& out = states_.at(from).out;
        auto it = out.find(to);
        return it == out.end() ? 0.0 : it->second;
    }

    [[nodiscard]] double probability(StateId from, StateId to) const {
        const double v = visits(from);
        return v > 0 ? transition_weight(from, to) / v : 0.0;
    }

    [[nodiscard]] std::size_t state_count() const noexcept { return states_.size(); }
    [[nodiscard]] const State& state(StateId id) const { return states_.at(id); }
    [[nodiscard]] State& mutable_state(StateId id) { return states_.at(id); }
    [[nodiscard]] StateId start() const noexcept { return 0; }
    [[nodiscard]] StateId finish() const noexcept { return 1; }

    [[nodiscard]] std::optional<StateId> find(StateKey key) const {
        auto it = index_.find(key);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    [[nodiscard]] StateId at(PageId page, std::uint32_t clone = 0) const {
        if (auto id = find({page, clone})) return *id;
        throw DomainError("no state (" + std::to_string(page) + ", " + std::to_string(clone) + ")");
    }

    /// Clones of a page in clone order.
    [[nodiscard]] std::vector<StateId> states_of(PageId page) const {
        std::vector<StateId> out;
        for (auto it = index_.lower_bound(StateKey{page, 0}); it != index_.end() && it->first.page == page; ++it)
            out.push_back(it->second);
        return out;
    }

    /// All states in ascending (page, clone) order.
    [[nodiscard]] std::vector<StateId> ordered_states() const {
        std::vector<StateId> out;
        out.reserve(index_.size());
        for (const auto& [_, id] : index_) out.push_back(id);
        return out;
    }

    /// Non-artificial pages in token order.
    [[nodiscard]] std::vector<PageId> pages() const {
        std::vector<PageId> out;
        for (const auto& [key, _] : index_)
            if (!is_artificial(key.page) && (out.empty() || out.back() != key.page)) out.push_back(key.page);
        return out;
    }

    [[nodiscard]] double visits(StateId id) const {
        const auto& s = states_.at(id);
        return s.key.page == kFinish ? s.in_total : s.out_total;
    }

    [[nodiscard]] double page_views(PageId page) const {
        double v = 0;
        for (auto id : states_of(page)) v += visits(id);
        return v;
    }

    [[nodiscard]] double total_views() const {
        double v = 0;
        for (const auto& [key, id] : index_)
            if (!is_artificial(key.page)) v += states_[id].out_total;
        return v;
    }

    [[nodiscard]] bool has_cycle() const {
        // 0 = unvisited, 1 = on stack, 2 = done
        std::vector<int> mark(states_.size(), 0);
        std::vector<std::pair<StateId, std::map<StateId, double>::const_iterator>> stack;
        for (StateId root = 0; root < states_.size(); ++root) {
            if (mark[root]) continue;
            mark[root] = 1;
            stack.emplace_back(root, states_[root].out.begin());
            while (!stack.empty()) {
                auto& [u, it] = stack.back();
                if (it == states_[u].out.end()) {
                    mark[u] = 2;
                    stack.pop_back();
                    continue;
                }
                const StateId v = (it++)->first;
                if (mark[v] == 1) return true;
                if (mark[v] == 0) {
                    mark[v] = 1;
                    stack.emplace_back(v, states_[v].out.begin());
                }
            }
        }
        return false;
    }

    int order = 1;
    BuildParams params{};

private:
    void check(StateId id) const {
        if (id >= states_.size()) throw ContractViolation("unknown state id");
    }

    std::vector<State> states_;
    std::map<StateKey, StateId> index_;
};

/// visits(page)/total_views; with a clone index, that clone's share.
inline double initial_probability(const ModelGraph& model, PageId page) {
    if (is_artificial(page) || model.states_of(page).empty())
        throw DomainError("initial_probability: unknown page " + std::to_string(page));
    const double total = model.total_views();
    return total > 0 ? model.page_views(page) / total : 0.0;
}

inline double initial_probability(const ModelGraph& model, StateKey key) {
    const auto id = model.find(key);
    if (!id || is_artificial(key.page)) throw DomainError("initial_probability: unknown state");
    const double total = model.total_views();
    return total > 0 ? model.visits(*id) / total : 0.0;
}

/// Sum over every state path whose page projection equals `trail` of the
/// initial probability of its first state times its transition probabilities.
inline double trail_probability(const ModelGraph& model, const Tokens& trail) {
    if (trail.empty() || is_artificial(trail.front())) return 0.0;
    const double total = model.total_views();
    if (total <= 0) return 0.0;
    std::map<StateId, double> mass;
    for (auto id : model.states_of(trail.front())) mass[id] = model.visits(id) / total;
    for (std::size_t i = 1; i < trail.size() && !mass.empty(); ++i) {
        std::map<StateId, double> next;
        for (const auto& [u, m] : mass) {
            const double v = model.visits(u);
            if (v <= 0) continue;
            for (const auto& [t, w] : model.state(u).out)
                if (model.state(t).key.page == trail[i]) next[t] += m * w / v;
        }
        mass = std::move(next);
    }
    double p = 0;
    for (const auto& [_, m] : mass) p += m;
    return p;
}

namespace detail {

inline std::string number_text(double v) {
    std::array<char, 64> buf{};
    auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), p);
}

}  // namespace detail

/// Flat text form: header lines, then `page clone visits` per state, then
/// `from_page from_clone to_page to_clone weight` per transition. Numbers are
/// written in shortest round-trip form.
inline std::string serialize_model(const ModelGraph& model) {
    std::ostringstream out;
    out << "vlmc-model 1\n";
    out << "order " << model.order << '\n';
    out << "gamma " << detail::number_text(model.params.gamma) << '\n';
    out << "mode " << to_string(model.params.gamma_mode) << '\n';
    out << "num_visits " << model.params.num_visits << '\n';
    out << "total_views " << detail::number_text(model.total_views()) << '\n';
    const auto ordered = model.ordered_states();
    out << "states " << ordered.size() << '\n';
    for (auto id : ordered) {
        const auto& s = model.state(id);
        out << s.key.page << ' ' << s.key.clone << ' ' << detail::number_text(model.visits(id)) << '\n';
    }
    std::size_t n_trans = 0;
    for (auto id : ordered) n_trans += model.state(id).out.size();
    out << "transitions " << n_trans << '\n';
    for (auto id : ordered) {
        const auto& s = model.state(id);
        std::vector<std::pair<StateKey, double>> rows;
        for (const auto& [t, w] : s.out) rows.emplace_back(model.state(t).key, w);
        std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        for (const auto& [k, w] : rows)
            out << s.key.page << ' ' << s.key.clone << ' ' << k.page << ' ' << k.clone << ' '
                << detail::number_text(w) << '\n';
    }
    return out.str();
}

inline ModelGraph parse_model(std::string_view text) {
    std::istringstream in{std::string(text)};
    const auto fail = [](const std::string& what) -> ConfigError { return ConfigError("model file: " + what); };
    const auto expect = [&](const char* key) {
        std::string k;
        if (!(in >> k) || k != key) throw fail(std::string("expected '") + key + "'");
    };
    ModelGraph model;
    int version = 0;
    expect("vlmc-model");
    if (!(in >> version) || version != 1) throw fail("unsupported version");
    expect("order");
    in >> model.order;
    expect("gamma");
    in >> model.params.gamma;
    expect("mode");
    std::string mode;
    in >> mode;
    model.params.gamma_mode = parse_gamma_mode(mode);
    expect("num_visits");
    in >> model.params.num_visits;
    expect("total_views");
    double total = 0;
    in >> total;
    expect("states");
    std::size_t n_states = 0;
    in >> n_states;
    if (!in) throw fail("bad header");
    model.params.target_order = model.order;
    std::vector<std::pair<StateId, double>> declared;
    for (std::size_t i = 0; i < n_states; ++i) {
        PageId page = 0;
        std::uint32_t clone = 0;
        double visits = 0;
        if (!(in >> page >> clone >> visits)) throw fail("bad state line");
        auto id = model.find({page, clone});
        if (!id) id = model.add_state(page, clone);
        declared.emplace_back(*id, visits);
    }
    expect("transitions");
    std::size_t n_trans = 0;
    in >> n_trans;
    for (std::size_t i = 0; i < n_trans; ++i) {
        PageId fp = 0, tp = 0;
        std::uint32_t fc = 0, tc = 0;
        double w = 0;
        if (!(in >> fp >> fc >> tp >> tc >> w)) throw fail("bad transition line");
        const auto from = model.find({fp, fc});
        const auto to = model.find({tp, tc});
        if (!from || !to) throw fail("transition references an undeclared state");
        model.add_transition(*from, *to, w);
    }
    for (const auto& [id, v] : declared)
        if (model.visits(id) != v) throw fail("state visits disagree with transition weights");
    if (model.total_views() != total) throw fail("total_views disagrees with state visits");
    return model;
}

}  // namespace vlmc
