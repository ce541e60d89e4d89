#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ragleak/rng.hpp"
#include "ragleak/text.hpp"

using namespace ragleak;

namespace {

// plain quadratic LCS over token vectors, kept independent of the rolling
// table inside rouge_l
size_t lcs_reference(const std::vector<std::string>& a,
                     const std::vector<std::string>& b) {
  std::vector<std::vector<size_t>> table(a.size() + 1,
                                         std::vector<size_t>(b.size() + 1, 0));
  for (size_t i = 1; i <= a.size(); ++i) {
    for (size_t j = 1; j <= b.size(); ++j) {
      table[i][j] = (a[i - 1] == b[j - 1])
                        ? table[i - 1][j - 1] + 1
                        : std::max(table[i - 1][j], table[i][j - 1]);
    }
  }
  return table[a.size()][b.size()];
}

std::string random_token_text(Rng& rng, size_t max_len) {
  static const char* pool[] = {"loan", "rate",  "account", "fee",   "visit",
                               "dose", "chart", "claim",   "audit", "note"};
  const size_t len = rng.uniform_index(max_len + 1);
  std::string out;
  for (size_t i = 0; i < len; ++i) {
    if (!out.empty()) out += ' ';
    out += pool[rng.uniform_index(10)];
  }
  return out;
}

}  // namespace

TEST(Tokenize, SplitsOnNonAlnumAndLowercases) {
  const std::vector<std::string> expect_basic = {"hello", "world"};
  EXPECT_EQ(tokenize("Hello, WORLD!"), expect_basic);
  const std::vector<std::string> expect_digits = {"ssn", "821", "53", "0632"};
  EXPECT_EQ(tokenize("ssn 821-53-0632"), expect_digits);
  EXPECT_TRUE(tokenize("???").empty());
  EXPECT_TRUE(tokenize("").empty());
}

TEST(ExtractKeywords, RanksByFrequencyThenAlphabetically) {
  const auto top = extract_keywords("loan loan rate rate fee", 2);
  const std::vector<std::string> expect = {"loan", "rate"};  // tie, alpha order
  EXPECT_EQ(top, expect);

  const auto single = extract_keywords("stent stent stent murmur", 1);
  ASSERT_EQ(single.size(), 1u);
  EXPECT_EQ(single[0], "stent");
}

TEST(ExtractKeywords, DropsStopwordsAndShortTokens) {
  const auto kws = extract_keywords("the of and is at it we loan", 5);
  const std::vector<std::string> expect = {"loan"};
  EXPECT_EQ(kws, expect);
  EXPECT_TRUE(extract_keywords("a an it of", 3).empty());
}

TEST(ExtractKeywords, MatchesCountingReference) {
  Rng rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    const std::string text = random_token_text(rng, 40);
    const size_t limit = 1 + rng.uniform_index(5);
    const auto got = extract_keywords(text, limit);

    std::map<std::string, size_t> freq;
    for (auto& tok : tokenize(text)) {
      if (tok.size() < 3 || is_stopword(tok)) continue;
      ++freq[tok];
    }
    std::vector<std::pair<std::string, size_t>> ranked(freq.begin(), freq.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    ASSERT_EQ(got.size(), std::min(limit, ranked.size()));
    for (size_t i = 0; i < got.size(); ++i) EXPECT_EQ(got[i], ranked[i].first);
  }
}

TEST(RougeL, HandCases) {
  EXPECT_NEAR(rouge_l("alpha beta gamma", "alpha beta gamma"), 1.0, 1e-12);
  EXPECT_EQ(rouge_l("alpha beta", "gamma delta"), 0.0);
  EXPECT_EQ(rouge_l("", "alpha"), 0.0);
  EXPECT_EQ(rouge_l("alpha", ""), 0.0);
  // lcs=2, precision=2/3, recall=1 -> f1=0.8
  EXPECT_NEAR(rouge_l("alpha beta gamma", "alpha beta"), 0.8, 1e-12);
}

TEST(RougeL, MatchesQuadraticLcsReference) {
  Rng rng(91);
  for (int trial = 0; trial < 200; ++trial) {
    const std::string cand = random_token_text(rng, 25);
    const std::string ref = random_token_text(rng, 25);
    const auto c = tokenize(cand);
    const auto r = tokenize(ref);
    double expected = 0.0;
    if (!c.empty() && !r.empty()) {
      const double lcs = static_cast<double>(lcs_reference(c, r));
      if (lcs > 0.0) {
        const double p = lcs / static_cast<double>(c.size());
        const double q = lcs / static_cast<double>(r.size());
        expected = 2.0 * p * q / (p + q);
      }
    }
    EXPECT_DOUBLE_EQ(rouge_l(cand, ref), expected) << cand << " | " << ref;
  }
}

TEST(RougeL, IsOrderSensitiveButTokenBased) {
  const double forward = rouge_l("alpha beta gamma delta", "delta gamma beta alpha");
  EXPECT_LT(forward, 1.0);
  EXPECT_GT(forward, 0.0);
  EXPECT_NEAR(rouge_l("Alpha BETA", "alpha beta"), 1.0, 1e-12);
}

TEST(Jaccard, HandCases) {
  const std::set<std::string> a = {"loan", "rate"};
  const std::set<std::string> b = {"loan", "fee"};
  EXPECT_NEAR(jaccard(a, b), 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(jaccard(a, a), 1.0, 1e-12);
  EXPECT_EQ(jaccard(a, {}), 0.0);
  EXPECT_EQ(jaccard({}, {}), 0.0);
}

TEST(ExtractPii, FindsEachKindWithNormalizedValues) {
  const auto phone = extract_pii("call 555-867-5309 now");
  ASSERT_EQ(phone.size(), 1u);
  EXPECT_EQ(phone[0].kind, PiiKind::phone);
  EXPECT_EQ(phone[0].value, "5558675309");
  EXPECT_EQ(phone[0].begin, 5u);
  EXPECT_EQ(phone[0].end, 17u);

  const auto email = extract_pii("write to John.Doe@Example.COM today");
  ASSERT_EQ(email.size(), 1u);
  EXPECT_EQ(email[0].kind, PiiKind::email);
  EXPECT_EQ(email[0].value, "john.doe@example.com");

  const auto dob = extract_pii("dob 1984-11-02.");
  ASSERT_EQ(dob.size(), 1u);
  EXPECT_EQ(dob[0].kind, PiiKind::dob);
  EXPECT_EQ(dob[0].value, "1984-11-02");

  const auto acct = extract_pii("wire into ACCT-12345678 tomorrow");
  ASSERT_EQ(acct.size(), 1u);
  EXPECT_EQ(acct[0].kind, PiiKind::bank_account);
  EXPECT_EQ(acct[0].value, "12345678");
}

TEST(ExtractPii, SsnAndDottedPhoneDisambiguate) {
  // xxx-xx-xxxx only matches ssn, xxx.xxx.xxxx only matches phone
  const auto ssn = extract_pii("ssn 821-53-0632");
  ASSERT_EQ(ssn.size(), 1u);
  EXPECT_EQ(ssn[0].kind, PiiKind::ssn);
  EXPECT_EQ(ssn[0].value, "821530632");

  const auto dotted = extract_pii("phone 555.867.5309");
  ASSERT_EQ(dotted.size(), 1u);
  EXPECT_EQ(dotted[0].kind, PiiKind::phone);
}

TEST(ExtractPii, SortsBySpanStart) {
  const auto items =
      extract_pii("email a@b.co then ssn 111-22-3333 then ACCT-00000001");
  ASSERT_EQ(items.size(), 3u);
  EXPECT_EQ(items[0].kind, PiiKind::email);
  EXPECT_EQ(items[1].kind, PiiKind::ssn);
  EXPECT_EQ(items[2].kind, PiiKind::bank_account);
  EXPECT_LT(items[0].begin, items[1].begin);
  EXPECT_LT(items[1].begin, items[2].begin);
}

TEST(ExtractPii, ValuesRematchOnReinsertion) {
  // every normalized dob/email value still matches when placed in fresh text,
  // so transcript values can be verified against ground truth by equality
  const std::string text = "dob 2001-05-19 and mail user123@example.com";
  for (const auto& item : extract_pii(text)) {
    if (item.kind != PiiKind::dob && item.kind != PiiKind::email) continue;
    const auto again = extract_pii("x " + item.value + " y");
    ASSERT_EQ(again.size(), 1u);
    EXPECT_EQ(again[0].kind, item.kind);
    EXPECT_EQ(again[0].value, item.value);
  }
  EXPECT_TRUE(extract_pii("no sensitive content here").empty());
}

TEST(ParseResponse, SplitsOnSeparatorAndBlankLines) {
  const std::string chunk_a = "alpha beta gamma delta epsilon zeta eta theta";
  const std::string chunk_b = "one two three four five six seven eight nine";
  const std::string joined =
      chunk_a + std::string(kResponseSeparator) + chunk_b;
  const auto parts = parse_response(joined, 8);
  ASSERT_EQ(parts.size(), 2u);
  EXPECT_EQ(parts[0], chunk_a);
  EXPECT_EQ(parts[1], chunk_b);

  const auto blank_split = parse_response(chunk_a + "\n\n" + chunk_b, 8);
  ASSERT_EQ(blank_split.size(), 2u);
  EXPECT_EQ(blank_split[0], chunk_a);
  EXPECT_EQ(blank_split[1], chunk_b);
}

TEST(ParseResponse, DropsRefusalAndShortFragments) {
  EXPECT_TRUE(parse_response(std::string(kRefusalSentence), 8).empty());
  EXPECT_TRUE(parse_response("too short", 8).empty());
  const std::string long_enough = "alpha beta gamma delta epsilon zeta eta theta";
  const std::string mixed = std::string(kRefusalSentence) +
                            std::string(kResponseSeparator) + long_enough;
  const auto parts = parse_response(mixed, 8);
  ASSERT_EQ(parts.size(), 1u);
  EXPECT_EQ(parts[0], long_enough);
}

TEST(ParseResponse, MinTokensBoundaryIsInclusive) {
  const std::string five = "alpha beta gamma delta epsilon";
  EXPECT_EQ(parse_response(five, 5).size(), 1u);
  EXPECT_TRUE(parse_response(five, 6).empty());
}

TEST(DedupCandidates, FiltersAgainstExistingAndWithinBatch) {
  const std::string a = "loan application pending since last spring quarter";
  const std::string b = "cardiac rhythm reviewed by the visiting specialist";
  const std::vector<std::string> batch = {a, a, b};
  const auto kept = dedup_candidates(batch, {}, 0.95);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0], a);
  EXPECT_EQ(kept[1], b);

  const std::vector<EmbeddingVector> existing = {embed(a)};
  const auto against = dedup_candidates(batch, existing, 0.95);
  ASSERT_EQ(against.size(), 1u);
  EXPECT_EQ(against[0], b);
}

TEST(DedupCandidates, ThresholdOneKeepsDistinctTexts) {
  const std::vector<std::string> batch = {"alpha beta gamma", "alpha beta delta"};
  EXPECT_EQ(dedup_candidates(batch, {}, 1.0).size(), 2u);
}

TEST(DedupCandidates, IsIdempotent) {
  const std::vector<std::string> batch = {
      "loan application pending since last spring quarter",
      "loan application pending since last spring season",
      "cardiac rhythm reviewed by the visiting specialist"};
  const auto once = dedup_candidates(batch, {}, 0.8);
  const auto twice = dedup_candidates(once, {}, 0.8);
  EXPECT_EQ(once, twice);
}
