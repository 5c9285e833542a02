#include "dlpfs/matcher.hpp"

#include <gtest/gtest.h>

#include <random>

#include "dlpfs/policy.hpp"

using namespace dlpfs;

namespace {

PolicySpec email_policy() {
  return parse_policy(R"json({
    "do_read": true, "do_write": false,
    "rules": [{"patterns": [{"type": "re",
                 "spec": "(?:\\w|[.-])+@(?:\\w|[.-])+\\.\\w{2,4}"}],
               "transformation": {"type": "redact"}}]})json");
}

PolicySpec dict_policy(const std::vector<std::string>& terms,
                       bool word_boundary) {
  PolicySpec spec;
  spec.do_read = true;
  Rule rule;
  Pattern p;
  p.kind = PatternKind::Dictionary;
  p.terms = terms;
  p.word_boundary = word_boundary;
  p.compiled = std::make_shared<DictionaryMatcher>(terms, false, word_boundary,
                                                   spec.max_match_bytes);
  rule.patterns.push_back(std::move(p));
  rule.transformation.kind = TransformKind::Redact;
  spec.rules.push_back(std::move(rule));
  return spec;
}

}  // namespace

TEST(Scan, EmailInGeneratedRowText) {
  PolicySpec policy = email_policy();
  std::string row =
      "131,\"C00.2\",\"$825.05\",\"Nation cut last old. "
      "vanessa36@cox-mata.net Series stand morning.\"";
  auto spans = scan(row, policy);
  ASSERT_EQ(spans.size(), 1u);
  size_t start = row.find("vanessa36");
  EXPECT_EQ(spans[0].start, start);
  EXPECT_EQ(spans[0].end - spans[0].start, 22u);
  EXPECT_EQ(row.substr(spans[0].start, 22), "vanessa36@cox-mata.net");
  EXPECT_EQ(spans[0].rule_index, 0u);
}

TEST(Scan, EmptyBuffer) {
  PolicySpec policy = email_policy();
  EXPECT_TRUE(scan("", policy).empty());
}

TEST(Scan, EmptyPolicy) {
  PolicySpec policy;
  EXPECT_TRUE(scan("anything at all", policy).empty());
}

// Overlap resolution between dictionary terms: leftmost wins, the
// overlapping later hit is suppressed. Embedded hits require anchoring off.
TEST(Scan, DictionaryOverlapLeftmostWins) {
  PolicySpec policy = dict_policy({"XXb", "bXX"}, /*word_boundary=*/false);
  auto spans = scan("aXXbXXc", policy);
  ASSERT_EQ(spans.size(), 1u);
  EXPECT_EQ(spans[0].start, 1u);
  EXPECT_EQ(spans[0].end, 4u);
}

TEST(Scan, WordBoundaryAnchoringSuppressesEmbeddedHits) {
  PolicySpec anchored = dict_policy({"cat"}, true);
  EXPECT_TRUE(scan("concatenate", anchored).empty());
  auto spans = scan("a cat sat", anchored);
  ASSERT_EQ(spans.size(), 1u);
  EXPECT_EQ(spans[0].start, 2u);

  PolicySpec loose = dict_policy({"cat"}, false);
  EXPECT_EQ(scan("concatenate", loose).size(), 1u);
}

TEST(Scan, CaseInsensitiveDictionaryByDefault) {
  PolicySpec policy = dict_policy({"Secret"}, true);
  auto spans = scan("a SECRET and a secret", policy);
  EXPECT_EQ(spans.size(), 2u);
}

TEST(Scan, LowerRuleIndexWinsTies) {
  PolicySpec policy;
  policy.do_read = true;
  for (int i = 0; i < 2; ++i) {
    Rule rule;
    Pattern p;
    p.kind = PatternKind::Regex;
    p.regex = "token";
    p.compiled = std::make_shared<re::RegexMatcher>(p.regex, 1024);
    rule.patterns.push_back(std::move(p));
    rule.transformation.kind = TransformKind::Redact;
    policy.rules.push_back(std::move(rule));
  }
  auto spans = scan("a token here", policy);
  ASSERT_EQ(spans.size(), 1u);
  EXPECT_EQ(spans[0].rule_index, 0u);
}

TEST(Scan, SpansDisjointAndSorted) {
  PolicySpec policy = email_policy();
  std::string text = "a@b.com xx c@d.net yy e@f.org";
  auto spans = scan(text, policy);
  ASSERT_EQ(spans.size(), 3u);
  for (size_t i = 1; i < spans.size(); ++i)
    EXPECT_LE(spans[i - 1].end, spans[i].start);
}

TEST(ScanTruncated, ClosedWindowDegeneratesToScan) {
  PolicySpec policy = email_policy();
  std::string text = "reach me: vanessa36@cox-mata.net thanks";
  auto full = scan(text, policy);
  auto result = scan_truncated(text, policy, false, false);
  EXPECT_EQ(result.spans, full);
  EXPECT_EQ(result.unresolved_prefix, 0u);
  EXPECT_EQ(result.unresolved_suffix, 0u);
}

TEST(ScanTruncated, DanglingEmailPrefixReportedUnresolved) {
  PolicySpec policy = email_policy();
  std::string text = "Nation cut last old. vanessa36@cox-ma";
  auto result = scan_truncated(text, policy, false, true);
  EXPECT_TRUE(result.spans.empty());
  size_t dangling = text.size() - text.find("vanessa36");
  EXPECT_GE(result.unresolved_suffix, dangling);

  // Widening the window materialises the match.
  std::string full_text = text + "ta.net and more words";
  auto spans = scan(full_text, policy);
  ASSERT_EQ(spans.size(), 1u);
  EXPECT_EQ(full_text.substr(spans[0].start, spans[0].end - spans[0].start),
            "vanessa36@cox-mata.net");
}

TEST(ScanTruncated, AllSpacesBothEdgesOpen) {
  PolicySpec policy = email_policy();
  std::string spaces(64, ' ');
  auto result = scan_truncated(spaces, policy, true, true);
  EXPECT_TRUE(result.spans.empty());
  EXPECT_EQ(result.unresolved_prefix, 0u);
  EXPECT_EQ(result.unresolved_suffix, 0u);
}

TEST(ScanTruncated, LeftOpenWithholdsEdgeMatches) {
  PolicySpec policy = email_policy();
  // Looks like a complete address, but the window begins mid-token: the
  // real match may start earlier.
  std::string text = "a36@cox-mata.net and text follows here";
  auto closed = scan(text, policy);
  ASSERT_EQ(closed.size(), 1u);
  auto result = scan_truncated(text, policy, true, false);
  EXPECT_TRUE(result.spans.empty());
  EXPECT_GE(result.unresolved_prefix, closed[0].end);
}

TEST(ScanTruncated, MatchCapLimitsSpanLength) {
  PolicySpec policy;
  policy.do_read = true;
  policy.max_match_bytes = 8;
  Rule rule;
  Pattern p;
  p.kind = PatternKind::Regex;
  p.regex = "a+";
  p.compiled = std::make_shared<re::RegexMatcher>(p.regex, 8);
  rule.patterns.push_back(std::move(p));
  rule.transformation.kind = TransformKind::Redact;
  policy.rules.push_back(std::move(rule));

  auto spans = scan(std::string(20, 'a'), policy);
  ASSERT_FALSE(spans.empty());
  for (const auto& s : spans) EXPECT_LE(s.end - s.start, 8u);
}

// Split-invariance: scanning via two overlapping guarded windows and merging
// (window-1 spans starting before the cut, window-2 spans from the cut on)
// reproduces the whole-buffer scan when guards cover the pattern extent.
TEST(ScanProperty, SplitInvarianceOnPlantedCorpus) {
  PolicySpec policy = parse_policy(R"json({
    "do_read": true, "do_write": false,
    "rules": [
      {"patterns": [{"type": "re",
         "spec": "\\w{1,10}@\\w{1,8}\\.\\w{2,3}"}],
       "transformation": {"type": "redact"}},
      {"patterns": [{"type": "dict", "spec": ["FrequentKeyword", "icdcode"]}],
       "transformation": {"type": "redact"}}
    ]})json");
  const size_t g = max_pattern_extent(policy);
  ASSERT_GT(g, 0u);

  std::mt19937_64 rng(7);
  const std::string filler = "the quick brown fox jumps over lazy dogs ";
  for (int iter = 0; iter < 500; ++iter) {
    std::string buf;
    while (buf.size() < 80 + rng() % 240) {
      switch (rng() % 4) {
        case 0: buf += "bob7@mail.com"; break;
        case 1: buf += "FrequentKeyword "; break;
        case 2: buf += "icdcode "; break;
        default: buf += filler.substr(0, 5 + rng() % 30); break;
      }
    }
    size_t k = 1 + rng() % (buf.size() - 1);

    auto whole = scan(buf, policy);
    size_t w1_end = std::min(buf.size(), k + g);
    size_t w2_start = k > g ? k - g : 0;
    auto win1 = scan(bytes_view(buf).substr(0, w1_end), policy);
    auto win2 = scan_window(bytes_view(buf).substr(w2_start), policy,
                            [&] {
                              EdgeContext e;
                              e.left_open = w2_start > 0;
                              if (w2_start > 0)
                                e.prev_byte = static_cast<unsigned char>(
                                    buf[w2_start - 1]);
                              return e;
                            }())
                    .spans;

    std::vector<MatchSpan> merged;
    for (const auto& s : win1)
      if (s.start < k) merged.push_back(s);
    for (auto s : win2) {
      s.start += w2_start;
      s.end += w2_start;
      if (s.capture) {
        s.capture->first += w2_start;
        s.capture->second += w2_start;
      }
      if (s.start >= k) merged.push_back(s);
    }
    EXPECT_EQ(merged, whole) << "iter " << iter << " k=" << k << " buf=" << buf;
    if (merged != whole) break;
  }
}

TEST(ScanProperty, DeterministicAcrossRepeatedCalls) {
  PolicySpec policy = email_policy();
  std::string text = "mail a@b.com and c@d-e.net plus junk";
  auto a = scan(text, policy);
  auto b = scan(text, policy);
  EXPECT_EQ(a, b);
}

TEST(ScanPerf, RuntimeGrowsLinearlyWithBufferLength) {
  PolicySpec policy = email_policy();
  auto make_buf = [](size_t n) {
    std::string b;
    b.reserve(n);
    while (b.size() < n) b += "plain words without hits here ";
    return b;
  };
  auto time_scan = [&](const std::string& buf) {
    auto t0 = std::chrono::steady_clock::now();
    auto spans = scan(buf, policy);
    EXPECT_TRUE(spans.empty());
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  };
  std::string small = make_buf(256 << 10);
  std::string big = make_buf(1 << 20);
  time_scan(small);  // warm-up
  double t_small = std::min(time_scan(small), time_scan(small));
  double t_big = std::min(time_scan(big), time_scan(big));
  // 4x the bytes: linear stays near 4x, anything superlinear blows past 10x.
  EXPECT_LT(t_big, 10.0 * t_small) << "small=" << t_small << " big=" << t_big;
}
