#include <gtest/gtest.h>

#include <random>

#include "wayfinder/page_model.hpp"

using namespace wayfinder;

namespace {

RawDocument html(std::string body, int status = 200) {
    return {"https://site.test/dir/index.html", status, std::move(body), ContentKind::html, false, std::nullopt};
}

RawDocument plain(std::string body, int status = 200) {
    return {"https://site.test/dir/index.html", status, std::move(body), ContentKind::plain_text, false, std::nullopt};
}

std::string letters(std::size_t n, char c = 'a') { return std::string(n, c); }

}  // namespace

TEST(Summarize, EmptyBodyIsAllZero) {
    const auto s = summarize(html(""));
    EXPECT_EQ(s.total_chars, 0u);
    EXPECT_EQ(s.valid_chars, 0u);
    EXPECT_EQ(s.n_para, 0u);
    EXPECT_EQ(s.n_btn, 0u);
}

TEST(Summarize, ThreeParagraphsTenAnchors) {
    std::string body = "<html><body>";
    for (int i = 0; i < 3; ++i) body += "<p>" + letters(100, static_cast<char>('a' + i)) + "</p>";
    body += "<div>";
    for (int i = 0; i < 10; ++i) body += "<a href=\"/l" + std::to_string(i) + "\">x</a> ";
    body += "</div></body></html>";
    const auto s = summarize(html(body));
    EXPECT_EQ(s.n_para, 3u);
    EXPECT_EQ(s.n_btn, 10u);
}

TEST(Summarize, HalfGibberishHalfLetters) {
    std::string body;
    for (int i = 0; i < 200; ++i) body += "\xEF\xBF\xBD";  // U+FFFD
    body += letters(200);
    const auto s = summarize(plain(body));
    ASSERT_GT(s.total_chars, 0u);
    EXPECT_NEAR(static_cast<double>(s.valid_chars) / static_cast<double>(s.total_chars), 0.5, 0.01);
}

TEST(Summarize, ScriptAndStyleExcluded) {
    const auto a = summarize(html("<p>visible text</p><script>var x = 1;</script><style>p{}</style>"));
    const auto b = summarize(html("<p>visible text</p>"));
    EXPECT_EQ(a.total_chars, b.total_chars);
    EXPECT_EQ(a.extracted_text, b.extracted_text);
}

TEST(Summarize, StructuralTagsCollected) {
    const auto s = summarize(html("<h1>T</h1><ul><li>a</li></ul><table><tr><td>1</td></tr></table><h4>x</h4>"));
    const std::set<std::string> expect{"h1", "li", "table"};
    EXPECT_EQ(s.structural_tags, expect);
}

TEST(Summarize, PlainTextLinkLinesAreButtons) {
    const auto s = summarize(plain("# Title\n\nsome text\n\n[One](https://site.test/1)\n[Two](/2)\n"));
    EXPECT_EQ(s.n_btn, 2u);
    EXPECT_TRUE(s.structural_tags.count("h1"));
}

TEST(Summarize, RunsOfSymbolsAreGibberish) {
    const auto s = summarize(plain("hello ########"));
    EXPECT_LT(s.valid_chars, s.total_chars);
}

TEST(Summarize, PureAndValidNeverExceedsTotal) {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> byte(0, 255);
    for (int i = 0; i < 400; ++i) {
        std::string s(static_cast<std::size_t>(byte(rng)), '\0');
        for (auto& c : s) c = static_cast<char>(byte(rng));
        for (auto kind : {ContentKind::html, ContentKind::plain_text}) {
            RawDocument d{"https://r.test/", 200, s, kind, false, std::nullopt};
            const auto a = summarize(d);
            EXPECT_LE(a.valid_chars, a.total_chars);
            EXPECT_EQ(a, summarize(d));
        }
    }
}

TEST(ExtractLinks, NoAnchors) { EXPECT_TRUE(extract_links(html("<p>none</p>")).empty()); }

TEST(ExtractLinks, DuplicateHrefKeptOnce) {
    const auto l = extract_links(html("<a href=\"/x\">1</a><a href=\"/x\">2</a>"));
    ASSERT_EQ(l.size(), 1u);
    EXPECT_EQ(l[0].anchor_text, "1");
}

TEST(ExtractLinks, FixtureLinkSet) {
    const auto l = extract_links(
        html("<a href=\"/a\">A</a><a href=\"/b\">B</a><a href=\"#top\">Top</a><a href=\"/a\">A again</a>"));
    ASSERT_EQ(l.size(), 2u);
    EXPECT_EQ(l[0].href, "https://site.test/a");
    EXPECT_EQ(l[1].href, "https://site.test/b");
    EXPECT_LT(l[0].position_index, l[1].position_index);
}

TEST(ExtractLinks, RelativeAndBaseHref) {
    const auto l = extract_links(html("<base href=\"https://other.test/x/\"><a href=\"y\">y</a>"));
    ASSERT_EQ(l.size(), 1u);
    EXPECT_EQ(l[0].href, "https://other.test/x/y");
}

TEST(ExtractLinks, PlainTextMarkdownLinks) {
    const auto l = extract_links(plain("[Home](https://site.test/)\n[Sub](sub.html)\n[Frag](#x)"));
    ASSERT_EQ(l.size(), 2u);
    EXPECT_EQ(l[1].href, "https://site.test/dir/sub.html");
}

TEST(ExtractLinks, DuplicateFreeFirstOccurrenceOrder) {
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<int> pick(0, 6);
    for (int trial = 0; trial < 200; ++trial) {
        std::string body;
        std::vector<std::string> order;
        for (int i = 0; i < 15; ++i) {
            const auto h = "/p" + std::to_string(pick(rng));
            body += "<a href=\"" + h + "\">t</a>";
            const auto abs = "https://site.test" + h;
            if (std::find(order.begin(), order.end(), abs) == order.end()) order.push_back(abs);
        }
        const auto l = extract_links(html(body));
        ASSERT_EQ(l.size(), order.size());
        for (std::size_t i = 0; i < l.size(); ++i) EXPECT_EQ(l[i].href, order[i]);
    }
}

TEST(DetectMarkers, ErrorStatusAlwaysFlags) {
    for (int status : {400, 404, 500, 503}) EXPECT_TRUE(detect_markers(html("<p>fine</p>", status)).has_error_page);
    EXPECT_FALSE(detect_markers(html("<p>fine</p>", 200)).has_error_page);
}

TEST(DetectMarkers, CaptchaKeyword) {
    EXPECT_TRUE(detect_markers(html("<p>Please complete the CAPTCHA</p>")).has_captcha);
    EXPECT_TRUE(detect_markers(html("<p>Verify you are human</p>")).has_captcha);
}

TEST(DetectMarkers, NextPageAnchor) {
    const auto m = detect_markers(html("<a href=\"/p1\">Prev</a><a href=\"/p3\">Next page</a>"));
    ASSERT_TRUE(m.has_next_page);
    ASSERT_TRUE(m.next_page_link.has_value());
    EXPECT_EQ(m.next_page_link->href, "https://site.test/p3");
}

TEST(DetectMarkers, RelNextLink) {
    const auto m = detect_markers(html("<head><link rel=\"next\" href=\"/page/2\"></head><p>x</p>"));
    ASSERT_TRUE(m.has_next_page);
    EXPECT_EQ(m.next_page_link->href, "https://site.test/page/2");
}

TEST(DetectMarkers, CustomKeywordTable) {
    MarkerKeywords kw;
    kw.gallery = {"photo wall"};
    EXPECT_TRUE(detect_markers(html("<p>Our photo wall</p>"), kw).has_gallery);
    EXPECT_FALSE(detect_markers(html("<p>gallery</p>"), kw).has_gallery);
}

TEST(DetectMarkers, NextLinkPresentIffFlag) {
    for (const char* body : {"<a href=\"/n\">more results</a>", "<p>no pagination</p>", "<a href=\"/n\">»</a>"}) {
        const auto m = detect_markers(html(body));
        EXPECT_EQ(m.has_next_page, m.next_page_link.has_value());
    }
}
