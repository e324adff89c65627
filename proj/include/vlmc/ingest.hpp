#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <istream>
#include <iterator>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "vlmc/errors.hpp"
#include "vlmc/tokens.hpp"

namespace vlmc {

struct LogRecord {
    std::string source_key;
    double timestamp = 0;
    std::string url;
    std::optional<int> status;

    bool operator==(const LogRecord&) const = default;
};

enum class ColumnRole { source, timestamp, url, status, ignored };

/// Column roles in file order plus the field delimiter. A delimiter of ' '
/// splits on runs of blanks.
struct FormatDescriptor {
    char delimiter = ',';
    std::vector<ColumnRole> columns;

    [[nodiscard]] std::optional<std::size_t> column_of(ColumnRole role) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == role) return i;
        return std::nullopt;
    }

    void validate() const {
        for (auto role : {ColumnRole::source, ColumnRole::timestamp, ColumnRole::url})
            if (!column_of(role))
                throw ConfigError("format descriptor is missing a required column role (source, timestamp, url)");
    }
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line, char delim) {
    std::vector<std::string_view> out;
    if (delim == ' ') {
        std::size_t i = 0;
        while (i < line.size()) {
            while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
            if (i >= line.size()) break;
            auto j = i;
            while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
            out.push_back(line.substr(i, j - i));
            i = j;
        }
        return out;
    }
    std::size_t start = 0;
    for (;;) {
        auto pos = line.find(delim, start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
    return v;
}

template <class Int>
std::optional<Int> parse_int(std::string_view s) {
    s = trim(s);
    Int v{};
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
    return v;
}

inline std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return out;
}

inline bool ends_with_ci(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && lower(s.substr(s.size() - suffix.size())) == lower(suffix);
}

inline std::string format_number(double v) {
    std::array<char, 64> buf{};
    auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), p);
}

}  // namespace detail

/// Parses `<delimiter>:<role>,<role>,...`, e.g. `csv:source,timestamp,url,status`.
/// Delimiter names: csv, tsv, space, pipe, or any single character. Roles:
/// source, timestamp, url, status, and `_` (or `skip`) for ignored columns.
inline FormatDescriptor parse_format(std::string_view spec) {
    const auto colon = spec.find(':');
    if (colon == std::string_view::npos) throw ConfigError("format descriptor needs '<delimiter>:<roles>'");
    FormatDescriptor fmt;
    const auto delim = spec.substr(0, colon);
    if (delim == "csv") fmt.delimiter = ',';
    else if (delim == "tsv") fmt.delimiter = '\t';
    else if (delim == "space") fmt.delimiter = ' ';
    else if (delim == "pipe") fmt.delimiter = '|';
    else if (delim.size() == 1) fmt.delimiter = delim[0];
    else throw ConfigError("unknown delimiter '" + std::string(delim) + "'");
    for (auto role : detail::split_fields(spec.substr(colon + 1), ',')) {
        role = detail::trim(role);
        if (role == "source") fmt.columns.push_back(ColumnRole::source);
        else if (role == "timestamp") fmt.columns.push_back(ColumnRole::timestamp);
        else if (role == "url") fmt.columns.push_back(ColumnRole::url);
        else if (role == "status") fmt.columns.push_back(ColumnRole::status);
        else if (role == "_" || role == "skip") fmt.columns.push_back(ColumnRole::ignored);
        else throw ConfigError("unknown column role '" + std::string(role) + "'");
    }
    for (auto role : {ColumnRole::source, ColumnRole::timestamp, ColumnRole::url, ColumnRole::status})
        if (std::count(fmt.columns.begin(), fmt.columns.end(), role) > 1)
            throw ConfigError("column role listed twice in format descriptor");
    fmt.validate();
    return fmt;
}

/// Drops query string and fragment, then trailing slashes (the root "/" stays).
inline std::string normalize_url(std::string_view url) {
    url = detail::trim(url);
    if (auto q = url.find_first_of("?#"); q != std::string_view::npos) url = url.substr(0, q);
    while (url.size() > 1 && url.back() == '/') url.remove_suffix(1);
    return std::string(url);
}

struct ParsedLog {
    std::vector<LogRecord> records;
    std::size_t skipped = 0;
};

inline std::optional<LogRecord> parse_log_line(std::string_view line, const FormatDescriptor& fmt) {
    const auto fields = detail::split_fields(line, fmt.delimiter);
    if (fields.size() < fmt.columns.size()) return std::nullopt;
    LogRecord rec;
    for (std::size_t i = 0; i < fmt.columns.size(); ++i) {
        const auto field = detail::trim(fields[i]);
        switch (fmt.columns[i]) {
            case ColumnRole::source:
                if (field.empty()) return std::nullopt;
                rec.source_key = std::string(field);
                break;
            case ColumnRole::timestamp: {
                auto ts = detail::parse_double(field);
                if (!ts || !std::isfinite(*ts) || *ts < 0) return std::nullopt;
                rec.timestamp = *ts;
                break;
            }
            case ColumnRole::url:
                rec.url = normalize_url(field);
                if (rec.url.empty()) return std::nullopt;
                break;
            case ColumnRole::status:
                if (field.empty() || field == "-") break;
                if (auto st = detail::parse_int<int>(field)) rec.status = *st;
                else return std::nullopt;
                break;
            case ColumnRole::ignored:
                break;
        }
    }
    return rec;
}

/// One record per well-formed line; malformed lines are skipped and counted.
inline ParsedLog parse_log(std::istream& in, const FormatDescriptor& fmt) {
    fmt.validate();
    if (!in) throw IoError("log stream is not readable");
    ParsedLog out;
    std::string line;
    while (std::getline(in, line)) {
        std::string_view view = line;
        if (!view.empty() && view.back() == '\r') view.remove_suffix(1);
        if (detail::trim(view).empty()) continue;
        if (auto rec = parse_log_line(view, fmt)) out.records.push_back(std::move(*rec));
        else ++out.skipped;
    }
    if (in.bad()) throw IoError("error while reading log stream");
    return out;
}

inline ParsedLog parse_log(std::string_view text, const FormatDescriptor& fmt) {
    std::istringstream in{std::string(text)};
    return parse_log(in, fmt);
}

struct FilterRules {
    std::vector<std::string> excluded_suffixes;  // e.g. ".gif"
    std::vector<std::string> kept_suffixes;      // exceptions to the exclusions, e.g. ".jpg"
    std::vector<int> excluded_status_classes;    // hundreds digit: 4 drops 4xx

    [[nodiscard]] bool keeps(const LogRecord& r) const {
        if (r.status) {
            const int cls = *r.status / 100;
            if (std::find(excluded_status_classes.begin(), excluded_status_classes.end(), cls) !=
                excluded_status_classes.end())
                return false;
        }
        const auto matches = [&](const std::vector<std::string>& suffixes) {
            return std::any_of(suffixes.begin(), suffixes.end(),
                               [&](const std::string& s) { return detail::ends_with_ci(r.url, s); });
        };
        return !matches(excluded_suffixes) || matches(kept_suffixes);
    }
};

inline std::vector<LogRecord> filter_requests(std::vector<LogRecord> records, const FilterRules& rules) {
    std::erase_if(records, [&](const LogRecord& r) { return !rules.keeps(r); });
    return records;
}

struct Session {
    Tokens pages;
    double first_timestamp = 0;

    bool operator==(const Session&) const = default;
};

struct SessionizeOptions {
    double gap_seconds = 1800;
    std::size_t max_session_len = 15;
};

/// Splits a page run into consecutive non-overlapping chunks of at most
/// max_len pages. `times` (parallel to pages, may be empty) supplies each
/// chunk's first timestamp.
inline void append_chunks(std::vector<Session>& out, const Tokens& pages, const std::vector<double>& times,
                          double fallback_time, std::size_t max_len) {
    if (max_len == 0) throw ConfigError("max_session_len must be >= 1");
    for (std::size_t i = 0; i < pages.size(); i += max_len) {
        const auto end = std::min(pages.size(), i + max_len);
        out.push_back(Session{Tokens(pages.begin() + static_cast<std::ptrdiff_t>(i),
                                     pages.begin() + static_cast<std::ptrdiff_t>(end)),
                              times.empty() ? fallback_time : times[i]});
    }
}

/// Groups records by source key, orders each group by timestamp (stable),
/// cuts at gaps longer than gap_seconds and caps session length. Output is
/// ordered by first timestamp, ties by first record position.
inline std::vector<Session> sessionize(const std::vector<LogRecord>& records, PageTable& pages,
                                       const SessionizeOptions& opt = {}) {
    if (opt.max_session_len == 0) throw ConfigError("max_session_len must be >= 1");
    if (!(opt.gap_seconds >= 0)) throw ConfigError("gap_seconds must be >= 0");

    std::vector<std::string> urls;
    urls.reserve(records.size());
    for (const auto& r : records) urls.push_back(r.url);
    pages.intern_sorted(std::move(urls));

    std::map<std::string, std::vector<std::size_t>> by_key;
    for (std::size_t i = 0; i < records.size(); ++i) by_key[records[i].source_key].push_back(i);

    struct Pending {
        Session session;
        std::size_t first_index;
    };
    std::vector<Pending> pending;
    for (auto& [key, idx] : by_key) {
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t a, std::size_t b) { return records[a].timestamp < records[b].timestamp; });
        std::size_t start = 0;
        for (std::size_t j = 1; j <= idx.size(); ++j) {
            const bool cut = j == idx.size() ||
                             records[idx[j]].timestamp - records[idx[j - 1]].timestamp > opt.gap_seconds;
            if (!cut) continue;
            Tokens run;
            std::vector<double> times;
            for (std::size_t t = start; t < j; ++t) {
                run.push_back(*pages.find(records[idx[t]].url));
                times.push_back(records[idx[t]].timestamp);
            }
            std::vector<Session> chunks;
            append_chunks(chunks, run, times, 0, opt.max_session_len);
            std::size_t offset = start;
            for (auto& c : chunks) {
                const auto len = c.pages.size();
                pending.push_back({std::move(c), idx[offset]});
                offset += len;
            }
            start = j;
        }
    }
    std::stable_sort(pending.begin(), pending.end(), [](const Pending& a, const Pending& b) {
        if (a.session.first_timestamp != b.session.first_timestamp)
            return a.session.first_timestamp < b.session.first_timestamp;
        return a.first_index < b.first_index;
    });
    std::vector<Session> out;
    out.reserve(pending.size());
    for (auto& p : pending) out.push_back(std::move(p.session));
    return out;
}

/// Canonical session file: `first_timestamp<TAB>id id id`.
inline std::string write_sessions(const std::vector<Session>& sessions) {
    std::string out;
    for (const auto& s : sessions) {
        out += detail::format_number(s.first_timestamp);
        out += '\t';
        out += format_tokens(s.pages);
        out += '\n';
    }
    return out;
}

enum class SessionTokens {
    labels,  // tokens are urls / external labels, registered into the table
    ids      // tokens are PageIds already present in the table
};

/// Reads one session per line; an optional `timestamp<TAB>` prefix carries
/// the first timestamp, otherwise the line number is used. Sessions longer
/// than max_len are split.
inline std::vector<Session> read_sessions(std::string_view text, PageTable& pages, SessionTokens mode,
                                          std::size_t max_len = 15) {
    struct Line {
        double ts;
        std::vector<std::string_view> tokens;
    };
    std::vector<Line> lines;
    std::size_t pos = 0, line_no = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        double ts = static_cast<double>(line_no);
        if (auto tab = line.find('\t'); tab != std::string_view::npos) {
            auto parsed = detail::parse_double(line.substr(0, tab));
            if (!parsed) throw ConfigError("session line " + std::to_string(line_no) + " has a bad timestamp");
            ts = *parsed;
            line = line.substr(tab + 1);
        }
        auto toks = detail::split_fields(line, ' ');
        if (toks.empty()) continue;
        lines.push_back({ts, std::move(toks)});
    }
    if (mode == SessionTokens::labels) {
        std::vector<std::string> labels;
        for (const auto& l : lines)
            for (auto t : l.tokens) labels.emplace_back(t);
        pages.intern_sorted(std::move(labels));
    }
    std::vector<Session> out;
    for (const auto& l : lines) {
        Tokens run;
        for (auto t : l.tokens) {
            if (mode == SessionTokens::labels) {
                run.push_back(*pages.find(t));
            } else {
                auto id = detail::parse_int<PageId>(t);
                if (!id || *id < kFirstPage || *id - kFirstPage >= pages.size())
                    throw ConfigError("session token '" + std::string(t) + "' is not a known page id");
                run.push_back(*id);
            }
        }
        append_chunks(out, run, {}, l.ts, max_len);
    }
    return out;
}

/// Dataset characteristics: pages, requests, sessions and short-session counts.
struct SessionStats {
    std::size_t pages = 0;
    std::size_t requests = 0;
    std::size_t sessions = 0;
    std::array<std::size_t, 3> by_length{};  // l = 1, 2, 3
};

inline SessionStats session_stats(const std::vector<Session>& sessions) {
    SessionStats st;
    std::set<PageId> distinct;
    for (const auto& s : sessions) {
        st.requests += s.pages.size();
        distinct.insert(s.pages.begin(), s.pages.end());
        if (s.pages.size() >= 1 && s.pages.size() <= 3) ++st.by_length[s.pages.size() - 1];
    }
    st.pages = distinct.size();
    st.sessions = sessions.size();
    return st;
}

}  // namespace vlmc
