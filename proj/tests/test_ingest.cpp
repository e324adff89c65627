#include <gtest/gtest.h>

#include <sstream>

#include "support/fixtures.hpp"
#include "vlmc/ingest.hpp"

using namespace vlmc;

namespace {

const FormatDescriptor kCsv = parse_format("csv:source,timestamp,url,status");

LogRecord rec(std::string key, double ts, std::string url, std::optional<int> status = 200) {
    return {std::move(key), ts, std::move(url), status};
}

}  // namespace

TEST(PageTable, ReservesStartAndFinish) {
    PageTable t;
    EXPECT_EQ(t.intern("/a"), kFirstPage);
    EXPECT_EQ(t.intern("/b"), kFirstPage + 1);
    EXPECT_EQ(t.intern("/a"), kFirstPage);
    EXPECT_EQ(t.label(kStart), "S");
    EXPECT_EQ(t.label(kFinish), "F");
    EXPECT_FALSE(t.find("/c"));
    EXPECT_THROW((void)t.label(99), DomainError);
}

TEST(PageTable, SortedRegistrationUsesNumericOrderForIntegers) {
    PageTable t;
    t.intern_sorted({"10", "2", "1", "2"});
    EXPECT_EQ(*t.find("1"), kFirstPage);
    EXPECT_EQ(*t.find("2"), kFirstPage + 1);
    EXPECT_EQ(*t.find("10"), kFirstPage + 2);
}

TEST(PageTable, TsvRoundTrip) {
    PageTable t;
    t.intern_sorted({"/x", "/a", "/m"});
    const auto back = PageTable::from_tsv(t.to_tsv());
    EXPECT_EQ(back.to_tsv(), t.to_tsv());
    EXPECT_THROW(PageTable::from_tsv("5\t/a\n"), ConfigError);
}

TEST(ParseFormat, AcceptsNamedAndLiteralDelimiters) {
    EXPECT_EQ(parse_format("tsv:url,source,timestamp").delimiter, '\t');
    EXPECT_EQ(parse_format("space:source,_,timestamp,url").delimiter, ' ');
    EXPECT_EQ(parse_format(";:source,timestamp,url").delimiter, ';');
}

TEST(ParseFormat, MissingRequiredRoleIsConfigError) {
    EXPECT_THROW(parse_format("csv:source,url,status"), ConfigError);
    EXPECT_THROW(parse_format("csv:source,timestamp,url,bogus"), ConfigError);
    EXPECT_THROW(parse_format("source,timestamp,url"), ConfigError);
    EXPECT_THROW(parse_format("csv:source,timestamp,url,url"), ConfigError);
}

TEST(ParseLog, EmptyStream) {
    const auto r = parse_log(std::string_view{}, kCsv);
    EXPECT_TRUE(r.records.empty());
    EXPECT_EQ(r.skipped, 0u);
}

TEST(ParseLog, SingleWellFormedLine) {
    const auto r = parse_log(std::string_view("10.0.0.1,1041379200,/guide,200"), kCsv);
    ASSERT_EQ(r.records.size(), 1u);
    EXPECT_EQ(r.records[0], rec("10.0.0.1", 1041379200, "/guide", 200));
}

TEST(ParseLog, MalformedLinesAreCountedAndSkipped) {
    const auto r = parse_log(std::string_view("a,1,/x,200\nb,/y,200\nc,3,/z,200\n"), kCsv);
    EXPECT_EQ(r.records.size(), 2u);
    EXPECT_EQ(r.skipped, 1u);
}

TEST(ParseLog, UnreadableStreamIsIoError) {
    std::istringstream in;
    in.setstate(std::ios::badbit);
    EXPECT_THROW(parse_log(in, kCsv), IoError);
}

TEST(ParseLog, NormalizesUrls) {
    EXPECT_EQ(normalize_url("/a/b/?q=1"), "/a/b");
    EXPECT_EQ(normalize_url("/a#frag"), "/a");
    EXPECT_EQ(normalize_url("/"), "/");
    const auto r = parse_log(std::string_view("k,5,/docs/?page=2,-"), kCsv);
    ASSERT_EQ(r.records.size(), 1u);
    EXPECT_EQ(r.records[0].url, "/docs");
    EXPECT_FALSE(r.records[0].status);
}

TEST(FilterRequests, SuffixExclusion) {
    const std::vector<LogRecord> in{rec("k", 0, "/a.gif"), rec("k", 1, "/b.html")};
    const auto out = filter_requests(in, FilterRules{{".gif"}, {}, {}});
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].url, "/b.html");
    EXPECT_EQ(filter_requests(in, FilterRules{}).size(), 2u);
}

TEST(FilterRequests, KeptSuffixOverridesExclusion) {
    const std::vector<LogRecord> in{rec("k", 0, "/a.GIF"), rec("k", 1, "/b.jpg"), rec("k", 2, "/c")};
    const auto out = filter_requests(in, FilterRules{{".gif", ".jpg"}, {".jpg"}, {}});
    ASSERT_EQ(out.size(), 2u);
    EXPECT_EQ(out[0].url, "/b.jpg");
    EXPECT_EQ(out[1].url, "/c");
}

TEST(FilterRequests, StatusClasses) {
    const std::vector<LogRecord> in{rec("k", 0, "/a", 200), rec("k", 1, "/b", 404), rec("k", 2, "/c", 500)};
    const auto out = filter_requests(in, FilterRules{{}, {}, {4, 5}});
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].url, "/a");
}

TEST(Sessionize, GapStartsNewSession) {
    PageTable t;
    const auto s = sessionize({rec("k", 0, "/p0"), rec("k", 100, "/p1"), rec("k", 2000, "/p2")}, t);
    ASSERT_EQ(s.size(), 2u);
    EXPECT_EQ(s[0].pages, (Tokens{*t.find("/p0"), *t.find("/p1")}));
    EXPECT_EQ(s[0].first_timestamp, 0);
    EXPECT_EQ(s[1].pages, (Tokens{*t.find("/p2")}));
    EXPECT_EQ(s[1].first_timestamp, 2000);
}

TEST(Sessionize, GapEqualToLimitDoesNotSplit) {
    PageTable t;
    EXPECT_EQ(sessionize({rec("k", 0, "/a"), rec("k", 1800, "/b")}, t).size(), 1u);
}

TEST(Sessionize, LongRunsAreSplitIntoChunks) {
    PageTable t;
    std::vector<LogRecord> in;
    for (int i = 0; i < 17; ++i) in.push_back(rec("k", i, "/p" + std::to_string(i)));
    const auto s = sessionize(in, t);
    ASSERT_EQ(s.size(), 2u);
    EXPECT_EQ(s[0].pages.size(), 15u);
    EXPECT_EQ(s[1].pages.size(), 2u);
    EXPECT_EQ(s[1].first_timestamp, 15);
}

TEST(Sessionize, KeysAreSeparated) {
    PageTable t;
    const auto s = sessionize({rec("a", 0, "/x"), rec("b", 1, "/y"), rec("a", 2, "/z"), rec("b", 3, "/x")}, t);
    ASSERT_EQ(s.size(), 2u);
    EXPECT_EQ(s[0].pages, (Tokens{*t.find("/x"), *t.find("/z")}));
    EXPECT_EQ(s[1].pages, (Tokens{*t.find("/y"), *t.find("/x")}));
}

TEST(Sessionize, TimestampTiesKeepLogOrder) {
    PageTable t;
    const auto s = sessionize({rec("k", 5, "/b"), rec("k", 5, "/a"), rec("k", 1, "/c")}, t);
    ASSERT_EQ(s.size(), 1u);
    EXPECT_EQ(s[0].pages, (Tokens{*t.find("/c"), *t.find("/b"), *t.find("/a")}));
}

TEST(Sessionize, KeepsConsecutiveDuplicates) {
    PageTable t;
    const auto s = sessionize({rec("k", 0, "/a"), rec("k", 1, "/a")}, t);
    ASSERT_EQ(s.size(), 1u);
    EXPECT_EQ(s[0].pages.size(), 2u);
}

TEST(Sessionize, RejectsBadOptions) {
    PageTable t;
    EXPECT_THROW(sessionize({}, t, {1800, 0}), ConfigError);
    EXPECT_THROW(sessionize({}, t, {-1, 15}), ConfigError);
}

TEST(SessionFile, WriteThenReadIds) {
    PageTable t;
    t.intern_sorted({"/a", "/b", "/c"});
    const std::vector<Session> s{{{kFirstPage, kFirstPage + 2}, 12.5}, {{kFirstPage + 1}, 40}};
    const auto text = write_sessions(s);
    EXPECT_EQ(text, "12.5\t2 4\n40\t3\n");
    EXPECT_EQ(read_sessions(text, t, SessionTokens::ids), s);
}

TEST(SessionFile, ReadLabelsWithoutTimestamps) {
    PageTable t;
    const auto s = read_sessions("/home /a\n\n/b\n", t, SessionTokens::labels);
    ASSERT_EQ(s.size(), 2u);
    EXPECT_EQ(s[0].first_timestamp, 1);
    EXPECT_EQ(s[1].first_timestamp, 3);
    EXPECT_EQ(t.size(), 3u);
}

TEST(SessionFile, UnknownIdIsConfigError) {
    PageTable t;
    t.intern("/a");
    EXPECT_THROW(read_sessions("0\t2 7\n", t, SessionTokens::ids), ConfigError);
}

TEST(SessionStats, CountsShortSessions) {
    const auto st = session_stats(fixtures::fixture_a());
    EXPECT_EQ(st.sessions, 14u);
    EXPECT_EQ(st.pages, 6u);
    EXPECT_EQ(st.requests, 42u);
    EXPECT_EQ(st.by_length[2], 14u);
}

TEST(SessionizeProperties, ConservesRequestsAndRespectsLimits) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<LogRecord> in;
        std::uniform_int_distribution<int> key(0, 3), page(0, 6), step(0, 2500);
        double ts = 0;
        const int n = 1 + trial * 3;
        for (int i = 0; i < n; ++i) {
            ts += step(rng);
            in.push_back(rec("k" + std::to_string(key(rng)), ts, "/p" + std::to_string(page(rng))));
        }
        PageTable t;
        const SessionizeOptions opt{1800, 5};
        const auto s = sessionize(in, t, opt);
        std::size_t total = 0;
        for (std::size_t i = 0; i < s.size(); ++i) {
            total += s[i].pages.size();
            EXPECT_GE(s[i].pages.size(), 1u);
            EXPECT_LE(s[i].pages.size(), opt.max_session_len);
            if (i) {
                EXPECT_LE(s[i - 1].first_timestamp, s[i].first_timestamp);
            }
        }
        EXPECT_EQ(total, in.size());
    }
}
