#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <map>
#include <regex>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "ragleak/embedding.hpp"

namespace ragleak {

// Fixed separator a compliant responder uses between echoed chunks, and the
// sentence a refusing responder emits. Response parsing strips both.
inline constexpr std::string_view kResponseSeparator = "\n---\n";
inline constexpr std::string_view kRefusalSentence =
    "I cannot share the requested information.";

// 175 English stopwords, stored in tokenized form (apostrophes never survive
// tokenization, so contraction fragments like "don" and "ll" appear instead).
inline const std::array<std::string_view, 175>& stopword_list() {
  static const std::array<std::string_view, 175> words = {
      "a", "about", "above", "across", "after", "again", "against", "ain", "all", "along",
      "also", "am", "among", "an", "and", "any", "are", "aren", "as", "at",
      "be", "because", "been", "before", "being", "below", "between", "both", "but", "by",
      "can", "cannot", "could", "couldn", "d", "did", "didn", "do", "does", "doesn",
      "doing", "don", "down", "during", "each", "few", "for", "from", "further", "had",
      "hadn", "has", "hasn", "have", "haven", "having", "he", "her", "here", "hers",
      "herself", "him", "himself", "his", "how", "however", "i", "if", "in", "into",
      "is", "isn", "it", "its", "itself", "just", "ll", "m", "ma", "me",
      "might", "mightn", "more", "most", "must", "mustn", "my", "myself", "needn", "no",
      "nor", "not", "now", "o", "of", "off", "on", "once", "only", "onto",
      "or", "other", "ought", "our", "ours", "ourselves", "out", "over", "own", "re",
      "s", "same", "shall", "shan", "she", "should", "shouldn", "so", "some", "such",
      "t", "than", "that", "the", "their", "theirs", "them", "themselves", "then", "there",
      "these", "they", "this", "those", "through", "to", "too", "toward", "under", "until",
      "up", "upon", "ve", "very", "was", "wasn", "we", "were", "weren", "what",
      "whatever", "when", "whenever", "where", "wherever", "which", "while", "who", "whoever", "whom",
      "whose", "why", "will", "with", "within", "without", "won", "would", "wouldn", "y",
      "you", "your", "yours", "yourself", "yourselves"};
  return words;
}

inline bool is_stopword(std::string_view token) {
  static const std::unordered_set<std::string_view> set(stopword_list().begin(),
                                                        stopword_list().end());
  return set.count(token) > 0;
}

// lowercase tokens split on non-alphanumerics: "The cat's hat" ->
// ["the", "cat", "s", "hat"]
inline std::vector<std::string> tokenize(std::string_view text) {
  return detail::split_tokens(text, /*lowercase=*/true);
}

// Top keywords by term frequency; stopwords and tokens shorter than three
// characters are dropped, ties broken alphabetically.
inline std::vector<std::string> extract_keywords(std::string_view text, size_t max_keywords) {
  std::map<std::string, size_t> freq;
  for (auto& tok : tokenize(text)) {
    if (tok.size() < 3 || is_stopword(tok)) continue;
    ++freq[tok];
  }
  std::vector<std::pair<std::string, size_t>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > max_keywords) ranked.resize(max_keywords);
  std::vector<std::string> out;
  out.reserve(ranked.size());
  for (auto& [word, count] : ranked) out.push_back(word);
  return out;
}

// Token-level ROUGE-L F1. Empty candidate or reference scores 0.
inline double rouge_l(std::string_view candidate, std::string_view reference) {
  const std::vector<std::string> c = tokenize(candidate);
  const std::vector<std::string> r = tokenize(reference);
  if (c.empty() || r.empty()) return 0.0;

  // LCS length with a two-row rolling table
  std::vector<size_t> prev(r.size() + 1, 0), cur(r.size() + 1, 0);
  for (size_t i = 1; i <= c.size(); ++i) {
    for (size_t j = 1; j <= r.size(); ++j) {
      if (c[i - 1] == r[j - 1]) {
        cur[j] = prev[j - 1] + 1;
      } else {
        cur[j] = std::max(prev[j], cur[j - 1]);
      }
    }
    std::swap(prev, cur);
  }
  const double lcs = static_cast<double>(prev[r.size()]);
  if (lcs == 0.0) return 0.0;
  const double precision = lcs / static_cast<double>(c.size());
  const double recall = lcs / static_cast<double>(r.size());
  return 2.0 * precision * recall / (precision + recall);
}

inline double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 0.0;
  size_t inter = 0;
  for (const auto& x : a) inter += b.count(x);
  const size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

enum class PiiKind { phone, email, ssn, dob, bank_account };

inline std::string_view pii_kind_name(PiiKind kind) {
  switch (kind) {
    case PiiKind::phone: return "phone";
    case PiiKind::email: return "email";
    case PiiKind::ssn: return "ssn";
    case PiiKind::dob: return "dob";
    case PiiKind::bank_account: return "bank_account";
  }
  return "unknown";
}

struct PiiItem {
  PiiKind kind;
  std::string value;  // normalized: digits only for phone/ssn/account, lowercase email
  size_t begin = 0;   // byte span of the raw match in the source text
  size_t end = 0;

  bool operator==(const PiiItem& other) const {
    return kind == other.kind && value == other.value && begin == other.begin &&
           end == other.end;
  }
};

namespace detail {

struct PiiPattern {
  PiiKind kind;
  const char* pattern;
};

inline const std::vector<std::pair<PiiKind, std::regex>>& pii_patterns() {
  static const std::vector<std::pair<PiiKind, std::regex>> patterns = [] {
    const PiiPattern raw[] = {
        {PiiKind::phone, R"(\b\d{3}[-. ]\d{3}[-. ]\d{4}\b)"},
        {PiiKind::email, R"(\b[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,}\b)"},
        {PiiKind::ssn, R"(\b\d{3}-\d{2}-\d{4}\b)"},
        {PiiKind::dob, R"(\b(19|20)\d{2}-\d{2}-\d{2}\b)"},
        {PiiKind::bank_account, R"(\bACCT-\d{8}\b)"},
    };
    std::vector<std::pair<PiiKind, std::regex>> out;
    for (const auto& p : raw) out.emplace_back(p.kind, std::regex(p.pattern));
    return out;
  }();
  return patterns;
}

inline std::string normalize_pii(PiiKind kind, std::string_view raw) {
  std::string out;
  switch (kind) {
    case PiiKind::phone:
    case PiiKind::ssn:
    case PiiKind::bank_account:
      for (const char c : raw) {
        if (c >= '0' && c <= '9') out.push_back(c);
      }
      return out;
    case PiiKind::email:
      for (const char c : raw) {
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
      }
      return out;
    case PiiKind::dob:
      return std::string(raw);
  }
  return std::string(raw);
}

}  // namespace detail

// Applies the five fixed patterns, leftmost non-overlapping within each kind,
// and reports normalized values with their raw byte spans. Results are sorted
// by span start (kind declaration order on identical starts).
inline std::vector<PiiItem> extract_pii(std::string_view text) {
  std::vector<PiiItem> items;
  const std::string subject(text);
  for (const auto& [kind, pattern] : detail::pii_patterns()) {
    auto begin = std::sregex_iterator(subject.begin(), subject.end(), pattern);
    for (auto it = begin; it != std::sregex_iterator(); ++it) {
      const auto& m = *it;
      PiiItem item;
      item.kind = kind;
      item.begin = static_cast<size_t>(m.position(0));
      item.end = item.begin + static_cast<size_t>(m.length(0));
      item.value = detail::normalize_pii(kind, m.str(0));
      items.push_back(std::move(item));
    }
  }
  std::stable_sort(items.begin(), items.end(), [](const PiiItem& a, const PiiItem& b) {
    if (a.begin != b.begin) return a.begin < b.begin;
    return static_cast<int>(a.kind) < static_cast<int>(b.kind);
  });
  return items;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace detail

// Splits a responder's text back into chunk-sized candidates: cut on the
// chunk separator and on blank lines, then drop short fragments and the
// refusal sentence. min_tokens guards against keeping command echoes and
// pleasantries.
inline std::vector<std::string> parse_response(std::string_view response,
                                               size_t min_tokens = 8) {
  std::vector<std::string> segments;
  size_t pos = 0;
  while (pos <= response.size()) {
    const size_t next = response.find(kResponseSeparator, pos);
    const std::string_view part = (next == std::string_view::npos)
                                      ? response.substr(pos)
                                      : response.substr(pos, next - pos);
    // further split on blank lines (a newline, optional spaces, a newline)
    size_t sub = 0;
    while (sub <= part.size()) {
      size_t cut = std::string_view::npos;
      size_t cut_len = 0;
      for (size_t i = sub; i + 1 < part.size(); ++i) {
        if (part[i] != '\n') continue;
        size_t j = i + 1;
        while (j < part.size() && (part[j] == ' ' || part[j] == '\t' || part[j] == '\r')) ++j;
        if (j < part.size() && part[j] == '\n') {
          cut = i;
          cut_len = j - i + 1;
          break;
        }
      }
      const std::string_view seg = (cut == std::string_view::npos)
                                       ? part.substr(sub)
                                       : part.substr(sub, cut - sub);
      segments.emplace_back(detail::trim(seg));
      if (cut == std::string_view::npos) break;
      sub = cut + cut_len;
    }
    if (next == std::string_view::npos) break;
    pos = next + kResponseSeparator.size();
  }

  std::vector<std::string> out;
  for (auto& seg : segments) {
    if (seg.empty() || seg == kRefusalSentence) continue;
    if (tokenize(seg).size() < min_tokens) continue;
    out.push_back(std::move(seg));
  }
  return out;
}

// Near-duplicate filter: a candidate survives only if its embedding stays
// strictly below the threshold against every existing vector and every
// candidate kept earlier in this batch. Input order is preserved.
inline std::vector<std::string> dedup_candidates(
    const std::vector<std::string>& candidates,
    const std::vector<EmbeddingVector>& existing, double threshold,
    const EmbedderConfig& cfg = {}) {
  std::vector<std::string> kept;
  std::vector<EmbeddingVector> kept_vecs(existing.begin(), existing.end());
  for (const auto& cand : candidates) {
    const EmbeddingVector v = embed(cand, cfg);
    bool duplicate = false;
    for (const auto& prev : kept_vecs) {
      if (cosine(v, prev) >= threshold) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) {
      kept.push_back(cand);
      kept_vecs.push_back(v);
    }
  }
  return kept;
}

}  // namespace ragleak
