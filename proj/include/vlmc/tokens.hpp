#pragma once

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "vlmc/errors.hpp"

namespace vlmc {

/// Dense page identifier. 0 and 1 are the artificial start/finish states.
using PageId = std::uint32_t;
using Token = PageId;
using Tokens = std::vector<Token>;

inline constexpr Token kStart = 0;
inline constexpr Token kFinish = 1;
inline constexpr PageId kFirstPage = 2;

inline constexpr bool is_artificial(Token t) noexcept { return t == kStart || t == kFinish; }

/// Sort key: S before every page, F after every page.
inline constexpr std::uint64_t token_order_key(Token t) noexcept {
    return t == kFinish ? std::uint64_t{0x1'0000'0000} : std::uint64_t{t};
}

inline constexpr bool token_less(Token a, Token b) noexcept {
    return token_order_key(a) < token_order_key(b);
}

inline bool tokens_less(const Tokens& a, const Tokens& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), token_less);
}

struct TokensLess {
    bool operator()(const Tokens& a, const Tokens& b) const { return tokens_less(a, b); }
};

struct TokensHash {
    std::size_t operator()(const Tokens& t) const noexcept {
        std::uint64_t h = 1469598103934665603ull;
        for (Token x : t) {
            h ^= x + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
            h *= 1099511628211ull;
        }
        return static_cast<std::size_t>(h);
    }
};

/// Bidirectional url <-> PageId mapping. Ids are dense from kFirstPage.
class PageTable {
public:
    PageId intern(std::string_view url) {
        if (auto it = ids_.find(std::string(url)); it != ids_.end()) return it->second;
        const auto id = static_cast<PageId>(kFirstPage + labels_.size());
        labels_.emplace_back(url);
        ids_.emplace(labels_.back(), id);
        return id;
    }

    /// Registers unseen labels in sorted order (numeric order when every
    /// label is a non-negative integer) so that id order follows label order.
    void intern_sorted(std::vector<std::string> labels) {
        std::erase_if(labels, [&](const std::string& l) { return contains(l); });
        std::sort(labels.begin(), labels.end());
        labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
        const bool numeric = std::all_of(labels.begin(), labels.end(), [](const std::string& l) {
            return !l.empty() && l.size() < 19 &&
                   std::all_of(l.begin(), l.end(), [](char c) { return c >= '0' && c <= '9'; });
        });
        if (numeric) {
            std::stable_sort(labels.begin(), labels.end(), [](const std::string& a, const std::string& b) {
                return std::stoull(a) < std::stoull(b);
            });
        }
        for (const auto& l : labels) intern(l);
    }

    [[nodiscard]] std::optional<PageId> find(std::string_view url) const {
        if (auto it = ids_.find(std::string(url)); it != ids_.end()) return it->second;
        return std::nullopt;
    }

    [[nodiscard]] bool contains(std::string_view url) const { return find(url).has_value(); }

    [[nodiscard]] const std::string& label(PageId id) const {
        static const std::string s = "S", f = "F";
        if (id == kStart) return s;
        if (id == kFinish) return f;
        if (id < kFirstPage || id - kFirstPage >= labels_.size())
            throw DomainError("unknown page id " + std::to_string(id));
        return labels_[id - kFirstPage];
    }

    [[nodiscard]] std::size_t size() const noexcept { return labels_.size(); }

    /// Writes `id<TAB>label` lines.
    [[nodiscard]] std::string to_tsv() const {
        std::string out;
        for (std::size_t i = 0; i < labels_.size(); ++i) {
            out += std::to_string(kFirstPage + i);
            out += '\t';
            out += labels_[i];
            out += '\n';
        }
        return out;
    }

    static PageTable from_tsv(std::string_view text) {
        PageTable table;
        std::size_t pos = 0;
        std::size_t line_no = 0;
        while (pos < text.size()) {
            auto end = text.find('\n', pos);
            if (end == std::string_view::npos) end = text.size();
            auto line = text.substr(pos, end - pos);
            pos = end + 1;
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
            if (line.empty()) continue;
            const auto tab = line.find('\t');
            PageId id = 0;
            if (tab == std::string_view::npos ||
                std::from_chars(line.data(), line.data() + tab, id).ec != std::errc{} ||
                id != kFirstPage + table.size())
                throw ConfigError("page table line " + std::to_string(line_no) + " is malformed");
            table.intern(line.substr(tab + 1));
        }
        return table;
    }

private:
    std::vector<std::string> labels_;
    std::unordered_map<std::string, PageId> ids_;
};

inline std::string format_tokens(const Tokens& t, const PageTable* pages = nullptr, char sep = ' ') {
    std::string out;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (i) out += sep;
        if (t[i] == kStart) out += 'S';
        else if (t[i] == kFinish) out += 'F';
        else if (pages) out += pages->label(t[i]);
        else out += std::to_string(t[i]);
    }
    return out;
}

}  // namespace vlmc
