#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "vlmc/errors.hpp"
#include "vlmc/ingest.hpp"
#include "vlmc/model.hpp"
#include "vlmc/trails.hpp"

namespace vlmc {

enum class InputKind { raw, sessions };

inline const char* to_string(InputKind k) { return k == InputKind::raw ? "raw" : "sessions"; }

inline InputKind parse_input_kind(std::string_view s) {
    if (s == "raw") return InputKind::raw;
    if (s == "sessions") return InputKind::sessions;
    throw ConfigError("input kind must be 'raw' or 'sessions', got '" + std::string(s) + "'");
}

// List-valued fields describe the experiment grid; single-valued commands
// (build, trails) use the largest order and the first entry of the others.
struct RunConfig {
    std::vector<std::string> inputs;
    InputKind input_kind = InputKind::sessions;
    std::string format = "csv:source,timestamp,url,status";
    double gap_seconds = 1800;
    std::size_t max_session_len = 15;
    std::vector<std::string> exclude_suffixes;
    std::vector<std::string> keep_suffixes;
    std::vector<int> exclude_status;

    std::vector<int> orders{1};
    std::vector<double> gammas{0.0};
    GammaMode gamma_mode = GammaMode::max;
    std::uint64_t num_visits = 0;

    double lambda = 0.001;
    std::vector<std::size_t> mtls{3};
    std::vector<LengthMode> length_modes{LengthMode::strict};
    std::size_t top_m = 10;

    std::size_t folds = 10;
    bool shuffle = false;
    std::uint64_t seed = 1;

    std::string out_dir = "out";
    std::string model_path;  // trails: read this model instead of building one
    std::string pages_path;  // page table for session files written as ids

    bool operator==(const RunConfig&) const = default;

    [[nodiscard]] int max_order() const {
        int k = 1;
        for (int o : orders) k = std::max(k, o);
        return k;
    }

    [[nodiscard]] BuildParams build_params(int order, double gamma) const {
        return BuildParams{order, gamma, gamma_mode, num_visits};
    }

    [[nodiscard]] TrailQuery trail_query(std::size_t mtl, LengthMode mode) const {
        return TrailQuery{lambda, mtl, mode, top_m};
    }

    [[nodiscard]] FilterRules filter_rules() const { return {exclude_suffixes, keep_suffixes, exclude_status}; }

    [[nodiscard]] SessionizeOptions sessionize_options() const { return {gap_seconds, max_session_len}; }

    void validate() const {
        if (input_kind == InputKind::raw) parse_format(format).validate();
        if (!(gap_seconds >= 0)) throw ConfigError("gap must be >= 0");
        if (max_session_len < 1) throw ConfigError("max_len must be >= 1");
        if (orders.empty() || gammas.empty() || mtls.empty() || length_modes.empty())
            throw ConfigError("order, gamma, mtl and length_mode lists must not be empty");
        for (int o : orders) build_params(o, 0).validate();
        for (double g : gammas) build_params(1, g).validate();
        for (auto mtl : mtls)
            for (auto mode : length_modes) trail_query(mtl, mode).validate();
        if (folds < 2) throw ConfigError("folds must be >= 2");
    }
};

namespace detail {

inline std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> out;
    if (trim(s).empty()) return out;
    for (auto f : split_fields(s, ',')) out.emplace_back(trim(f));
    return out;
}

template <class T, class F>
std::string join_list(const std::vector<T>& v, F&& fmt) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += fmt(v[i]);
    }
    return out;
}

template <class Int>
Int config_int(std::string_view key, std::string_view value) {
    auto v = parse_int<Int>(trim(value));
    if (!v) throw ConfigError(std::string(key) + ": expected an integer, got '" + std::string(value) + "'");
    return *v;
}

inline double config_double(std::string_view key, std::string_view value) {
    auto v = parse_double(trim(value));
    if (!v) throw ConfigError(std::string(key) + ": expected a number, got '" + std::string(value) + "'");
    return *v;
}

inline bool config_bool(std::string_view key, std::string_view value) {
    const auto v = lower(trim(value));
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(std::string(key) + ": expected true or false, got '" + std::string(value) + "'");
}

template <class T, class F>
std::vector<T> map_list(std::string_view value, F&& parse) {
    std::vector<T> out;
    for (const auto& item : split_list(value)) out.push_back(parse(item));
    return out;
}

}  // namespace detail

/// Sets one field from its config-file spelling. Unknown keys are errors.
inline void set_config_value(RunConfig& c, std::string_view key, std::string_view value) {
    using namespace detail;
    const auto str = [](const std::string& s) { return s; };
    if (key == "input") c.inputs = split_list(value);
    else if (key == "input_kind") c.input_kind = parse_input_kind(trim(value));
    else if (key == "format") c.format = std::string(trim(value));
    else if (key == "gap") c.gap_seconds = config_double(key, value);
    else if (key == "max_len") c.max_session_len = config_int<std::size_t>(key, value);
    else if (key == "exclude_suffixes") c.exclude_suffixes = map_list<std::string>(value, str);
    else if (key == "keep_suffixes") c.keep_suffixes = map_list<std::string>(value, str);
    else if (key == "exclude_status")
        c.exclude_status = map_list<int>(value, [&](const std::string& s) { return config_int<int>(key, s); });
    else if (key == "order")
        c.orders = map_list<int>(value, [&](const std::string& s) { return config_int<int>(key, s); });
    else if (key == "gamma")
        c.gammas = map_list<double>(value, [&](const std::string& s) { return config_double(key, s); });
    else if (key == "gamma_mode") c.gamma_mode = parse_gamma_mode(trim(value));
    else if (key == "num_visits") c.num_visits = config_int<std::uint64_t>(key, value);
    else if (key == "lambda") c.lambda = config_double(key, value);
    else if (key == "mtl")
        c.mtls = map_list<std::size_t>(value, [&](const std::string& s) { return config_int<std::size_t>(key, s); });
    else if (key == "length_mode")
        c.length_modes = map_list<LengthMode>(value, [](const std::string& s) { return parse_length_mode(s); });
    else if (key == "top_m") c.top_m = config_int<std::size_t>(key, value);
    else if (key == "folds") c.folds = config_int<std::size_t>(key, value);
    else if (key == "shuffle") c.shuffle = config_bool(key, value);
    else if (key == "seed") c.seed = config_int<std::uint64_t>(key, value);
    else if (key == "out_dir") c.out_dir = std::string(trim(value));
    else if (key == "model") c.model_path = std::string(trim(value));
    else if (key == "pages") c.pages_path = std::string(trim(value));
    else throw ConfigError("unknown config key '" + std::string(key) + "'");
}

/// `key = value` lines; `#` starts a comment line.
inline RunConfig parse_config(std::string_view text, RunConfig base = {}) {
    std::size_t pos = 0, line_no = 0;
    while (pos <= text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        const auto line = detail::trim(text.substr(pos, end - pos));
        pos = end + 1;
        ++line_no;
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        set_config_value(base, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    }
    return base;
}

inline RunConfig load_config(const std::string& path, RunConfig base = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), std::move(base));
}

/// Writes every field, so parse_config(format_config(c)) == c.
inline std::string format_config(const RunConfig& c) {
    using detail::join_list;
    const auto id = [](const std::string& s) { return s; };
    const auto num = [](auto v) { return detail::number_text(static_cast<double>(v)); };
    const auto integer = [](auto v) { return std::to_string(v); };
    std::ostringstream o;
    o << "input = " << join_list(c.inputs, id) << '\n'
      << "input_kind = " << to_string(c.input_kind) << '\n'
      << "format = " << c.format << '\n'
      << "gap = " << num(c.gap_seconds) << '\n'
      << "max_len = " << c.max_session_len << '\n'
      << "exclude_suffixes = " << join_list(c.exclude_suffixes, id) << '\n'
      << "keep_suffixes = " << join_list(c.keep_suffixes, id) << '\n'
      << "exclude_status = " << join_list(c.exclude_status, integer) << '\n'
      << "order = " << join_list(c.orders, integer) << '\n'
      << "gamma = " << join_list(c.gammas, num) << '\n'
      << "gamma_mode = " << to_string(c.gamma_mode) << '\n'
      << "num_visits = " << c.num_visits << '\n'
      << "lambda = " << num(c.lambda) << '\n'
      << "mtl = " << join_list(c.mtls, integer) << '\n'
      << "length_mode = " << join_list(c.length_modes, [](LengthMode m) { return std::string(to_string(m)); }) << '\n'
      << "top_m = " << c.top_m << '\n'
      << "folds = " << c.folds << '\n'
      << "shuffle = " << (c.shuffle ? "true" : "false") << '\n'
      << "seed = " << c.seed << '\n'
      << "out_dir = " << c.out_dir << '\n'
      << "model = " << c.model_path << '\n'
      << "pages = " << c.pages_path << '\n';
    return o.str();
}

}  // namespace vlmc
