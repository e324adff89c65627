#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "vlmc/build.hpp"
#include "vlmc/config.hpp"
#include "vlmc/errors.hpp"
#include "vlmc/eval.hpp"
#include "vlmc/ingest.hpp"
#include "vlmc/model.hpp"
#include "vlmc/ngram.hpp"
#include "vlmc/trails.hpp"

namespace vlmc {

/// File name -> content. Commands are pure; the caller decides where the
/// files go.
using Outputs = std::map<std::string, std::string>;

namespace detail {

inline std::string read_text(const std::string& path) {
    if (path == "-") return {std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>()};
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("error while reading '" + path + "'");
    return ss.str();
}

inline std::string fixed(double v, int decimals = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

inline std::string stats_csv(const SessionStats& st) {
    return "pages,requests,sessions,len1,len2,len3\n" + std::to_string(st.pages) + ',' +
           std::to_string(st.requests) + ',' + std::to_string(st.sessions) + ',' + std::to_string(st.by_length[0]) +
           ',' + std::to_string(st.by_length[1]) + ',' + std::to_string(st.by_length[2]) + '\n';
}

}  // namespace detail

struct Dataset {
    PageTable pages;
    std::vector<Session> sessions;
    std::size_t skipped_lines = 0;
};

/// Reads every configured input. Raw logs are concatenated, filtered and
/// sessionized together; session files are read line by line, as page ids
/// of `pages` when a page table is configured and as labels otherwise.
inline Dataset load_dataset(const RunConfig& cfg) {
    if (cfg.inputs.empty()) throw ConfigError("no input given");
    Dataset d;
    if (cfg.input_kind == InputKind::raw) {
        const auto fmt = parse_format(cfg.format);
        fmt.validate();
        std::vector<LogRecord> records;
        for (const auto& path : cfg.inputs) {
            auto parsed = parse_log(std::string_view(detail::read_text(path)), fmt);
            d.skipped_lines += parsed.skipped;
            records.insert(records.end(), std::make_move_iterator(parsed.records.begin()),
                           std::make_move_iterator(parsed.records.end()));
        }
        d.sessions = sessionize(filter_requests(std::move(records), cfg.filter_rules()), d.pages,
                                cfg.sessionize_options());
        return d;
    }
    const auto mode = cfg.pages_path.empty() ? SessionTokens::labels : SessionTokens::ids;
    if (!cfg.pages_path.empty()) d.pages = PageTable::from_tsv(detail::read_text(cfg.pages_path));
    for (const auto& path : cfg.inputs) {
        auto s = read_sessions(detail::read_text(path), d.pages, mode, cfg.max_session_len);
        d.sessions.insert(d.sessions.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
    }
    return d;
}

/// sessions.tsv, pages.tsv and a one-row dataset summary.
inline Outputs cmd_sessionize(const RunConfig& cfg) {
    cfg.validate();
    const auto d = load_dataset(cfg);
    return {{"sessions.tsv", write_sessions(d.sessions)},
            {"pages.tsv", d.pages.to_tsv()},
            {"summary.csv", detail::stats_csv(session_stats(d.sessions))}};
}

/// Builds up to the largest configured order with the first gamma; writes
/// the model and the state count reached at every order.
inline Outputs cmd_build(const RunConfig& cfg) {
    cfg.validate();
    const auto d = load_dataset(cfg);
    std::string counts = "order,states\n";
    const auto model = build_vlmc(d.sessions, cfg.build_params(cfg.max_order(), cfg.gammas.front()),
                                  [&](int k, const ModelGraph& m) {
                                      counts += std::to_string(k) + ',' + std::to_string(m.state_count()) + '\n';
                                  });
    return {{"model.txt", serialize_model(model)}, {"pages.tsv", d.pages.to_tsv()}, {"states_by_order.csv", counts}};
}

inline std::string trails_file_name(std::size_t mtl, LengthMode mode) {
    return "trails_mtl" + std::to_string(mtl) + '_' + to_string(mode) + ".csv";
}

/// Top-m trails for every (mtl, length mode) pair, from the model file when
/// one is configured and from a freshly built model otherwise.
inline Outputs cmd_trails(const RunConfig& cfg) {
    cfg.validate();
    ModelGraph model;
    PageTable pages;
    if (!cfg.model_path.empty()) {
        model = parse_model(detail::read_text(cfg.model_path));
        if (!cfg.pages_path.empty()) pages = PageTable::from_tsv(detail::read_text(cfg.pages_path));
    } else {
        auto d = load_dataset(cfg);
        model = build_vlmc(d.sessions, cfg.build_params(cfg.max_order(), cfg.gammas.front()));
        pages = std::move(d.pages);
    }
    const PageTable* labels = pages.size() > 0 ? &pages : nullptr;
    Outputs out;
    for (auto mtl : cfg.mtls)
        for (auto mode : cfg.length_modes)
            out[trails_file_name(mtl, mode)] =
                trails_csv(top_m_trails(extract_trails(model, cfg.trail_query(mtl, mode)), cfg.top_m), labels);
    return out;
}

/// Footrule and overlap of model trail rankings against n-gram rankings for
/// every (order, gamma, mtl, length mode) cell.
inline Outputs cmd_summarize(const RunConfig& cfg) {
    cfg.validate();
    const auto d = load_dataset(cfg);
    if (d.sessions.empty()) throw DomainError("summarize: no sessions");
    std::string csv = "order,gamma,mode,mtl,length_mode,m,footrule,overlap\n";
    const NGramIndex index(d.sessions, static_cast<std::size_t>(cfg.max_order()) + 1);
    for (int order : cfg.orders) {
        for (double gamma : cfg.gammas) {
            const auto model = build_vlmc(index, cfg.build_params(order, gamma));
            for (auto mtl : cfg.mtls) {
                for (auto mode : cfg.length_modes) {
                    const auto c = summarisation_eval(model, d.sessions, mtl, cfg.trail_query(mtl, mode));
                    csv += std::to_string(order) + ',' + detail::number_text(gamma) + ',' + to_string(cfg.gamma_mode) +
                           ',' + std::to_string(mtl) + ',' + to_string(mode) + ',' + std::to_string(c.m) + ',' +
                           detail::fixed(c.footrule) + ',' + detail::fixed(c.overlap) + '\n';
                }
            }
        }
    }
    return {{"summarize.csv", csv}};
}

/// Temporal (or seeded shuffled) k-fold prediction: one row per fold and
/// order 1..max order, each fold's models built with the first gamma.
inline Outputs cmd_predict(const RunConfig& cfg) {
    cfg.validate();
    const auto d = load_dataset(cfg);
    const auto folds =
        cfg.shuffle ? shuffled_folds(d.sessions, cfg.folds, cfg.seed) : temporal_folds(d.sessions, cfg.folds);
    std::string csv = "k,order,states,MAE,st_MAE,tested,skipped,fallback\n";
    for (const auto& plan : folds.plans) {
        const auto& test = folds.test(plan);
        build_vlmc(folds.training(plan), cfg.build_params(cfg.max_order(), cfg.gammas.front()),
                   [&](int k, const ModelGraph& m) {
                       const auto r = evaluate_predictions(m, test);
                       csv += std::to_string(plan.train_upto) + ',' + std::to_string(k) + ',' +
                              std::to_string(r.states) + ',' + detail::fixed(r.mae) + ',' + detail::fixed(r.st_mae) +
                              ',' + std::to_string(r.tested) + ',' + std::to_string(r.skipped) + ',' +
                              std::to_string(r.fallback) + '\n';
                   });
    }
    return {{"predict.csv", csv}};
}

/// Dataset characteristics plus the full n-gram count table for every
/// configured trail length.
inline Outputs cmd_report(const RunConfig& cfg) {
    cfg.validate();
    const auto d = load_dataset(cfg);
    Outputs out{{"report.csv", detail::stats_csv(session_stats(d.sessions))}};
    const PageTable* labels = d.pages.size() > 0 ? &d.pages : nullptr;
    for (auto n : cfg.mtls)
        out["ngrams_" + std::to_string(n) + ".csv"] = ngram_table_csv(count_ngrams(d.sessions, n), labels);
    return out;
}

inline void write_outputs(const std::filesystem::path& dir, const Outputs& outputs) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
    for (const auto& [name, content] : outputs) {
        const auto path = dir / name;
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot write '" + path.string() + "'");
        f << content;
        if (!f) throw IoError("error while writing '" + path.string() + "'");
    }
}

}  // namespace vlmc
