#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <utility>
#include <vector>

#include "vlmc/vlmc.hpp"

namespace fixtures {

using vlmc::PageId;
using vlmc::Session;
using vlmc::Tokens;

/// Page p of the worked examples (numbered from 1) as a PageId.
constexpr PageId pg(unsigned p) { return vlmc::kFirstPage + p - 1; }

inline Tokens pages(std::initializer_list<unsigned> ps) {
    Tokens t;
    for (auto p : ps) t.push_back(pg(p));
    return t;
}

inline void add(std::vector<Session>& out, std::initializer_list<unsigned> ps, int times, double ts = 0) {
    for (int i = 0; i < times; ++i) out.push_back(Session{pages(ps), ts});
}

/// Six sessions shapes through page 2:
/// (1,2,3)x3 (1,2,5)x1 (4,2,3)x4 (4,2,5)x2 (6,2,3)x1 (6,2,5)x3.
inline std::vector<Session> fixture_a() {
    std::vector<Session> s;
    add(s, {1, 2, 3}, 3);
    add(s, {1, 2, 5}, 1);
    add(s, {4, 2, 3}, 4);
    add(s, {4, 2, 5}, 2);
    add(s, {6, 2, 3}, 1);
    add(s, {6, 2, 5}, 3);
    return s;
}

/// Hand-built graph where page 3 has two clones: 3 reached from 1 and 3'
/// reached from 2, plus an isolated page 6 carrying the remaining views.
inline vlmc::ModelGraph fixture_b() {
    vlmc::ModelGraph g;
    const auto S = g.start(), F = g.finish();
    const auto p1 = g.add_state(pg(1)), p2 = g.add_state(pg(2));
    const auto p3 = g.add_state(pg(3)), p3b = g.add_clone(pg(3));
    const auto p4 = g.add_state(pg(4)), p5 = g.add_state(pg(5)), p6 = g.add_state(pg(6));
    g.add_transition(S, p1, 11);
    g.add_transition(p1, p3, 9);
    g.add_transition(p1, F, 2);
    g.add_transition(S, p2, 12);
    g.add_transition(p2, p3b, 12);
    g.add_transition(p3, p4, 2);
    g.add_transition(p3, p5, 7);
    g.add_transition(p3b, p4, 8);
    g.add_transition(p3b, p5, 2);
    g.add_transition(p3b, F, 2);
    g.add_transition(p4, F, 10);
    g.add_transition(p5, F, 9);
    g.add_transition(S, p6, 38);
    g.add_transition(p6, F, 38);
    return g;
}

struct SessionShape {
    unsigned max_pages = 10;
    unsigned max_sessions = 50;
    unsigned max_len = 6;
};

/// Sessions over pages 1..max_pages with uniformly drawn lengths; revisits
/// allowed, so the data usually contains cycles.
inline std::vector<Session> random_sessions(std::mt19937_64& rng, SessionShape shape = {}) {
    std::uniform_int_distribution<unsigned> n_pages(1, shape.max_pages), n_sessions(1, shape.max_sessions),
        len(1, shape.max_len);
    const unsigned np = n_pages(rng);
    std::uniform_int_distribution<unsigned> page(1, np);
    std::vector<Session> out;
    const unsigned ns = n_sessions(rng);
    for (unsigned i = 0; i < ns; ++i) {
        Session s;
        s.first_timestamp = static_cast<double>(i);
        for (unsigned l = len(rng); l > 0; --l) s.pages.push_back(pg(page(rng)));
        out.push_back(std::move(s));
    }
    return out;
}

/// A random graph with at most max_states states including S and F: a few
/// pages, some cloned, random integer weights. Flow is not conserved.
inline vlmc::ModelGraph random_model(std::mt19937_64& rng, unsigned max_states = 8) {
    vlmc::ModelGraph g;
    std::uniform_int_distribution<unsigned> n_extra(1, max_states - 2), coin(0, 2), weight(1, 9);
    const unsigned n = n_extra(rng);
    std::vector<vlmc::StateId> real;
    unsigned next_page = 1;
    for (unsigned i = 0; i < n; ++i) {
        if (!real.empty() && coin(rng) == 0) {
            real.push_back(g.add_clone(g.state(real.back()).key.page));
        } else {
            real.push_back(g.add_state(pg(next_page++)));
        }
    }
    for (auto s : real)
        if (coin(rng) != 0) g.add_transition(g.start(), s, weight(rng));
    for (auto u : real) {
        for (auto v : real)
            if (coin(rng) == 0) g.add_transition(u, v, weight(rng));
        if (coin(rng) != 0 || g.state(u).out.empty()) g.add_transition(u, g.finish(), weight(rng));
    }
    return g;
}

}  // namespace fixtures
