#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ragleak/clustering.hpp"
#include "ragleak/rng.hpp"
#include "ragleak/text.hpp"
#include "ragleak/vector_store.hpp"

namespace ragleak {

struct Chunk {
  size_t id = 0;
  std::string text;
  std::string topic;          // planted topic name, empty for ingested data
  std::vector<PiiItem> pii;   // ground truth: values planted into the text
};

struct TopicSpec {
  std::string name;
  double proportion = 0.0;
};

struct CorpusSpec {
  size_t n_chunks = 500;
  std::vector<TopicSpec> topics;  // empty selects the ten built-in topics
  double pii_rate = 0.5;
  uint64_t seed = 7;
};

// Ten planted topic vocabularies, 40 words each, spanning clinic, workplace,
// and finance material. The default targeted probe topics (appointment,
// diagnosis, prescription, portal, inbox, vaccine, loan, transaction,
// insurance, flight) each live in exactly one bank so topic-guessing
// attackers have a realistic foothold.
inline const std::vector<std::pair<std::string, std::vector<std::string>>>&
topic_word_banks() {
  static const std::vector<std::pair<std::string, std::vector<std::string>>> banks = {
      {"cardiology",
       {"appointment", "cardiac", "artery", "rhythm", "murmur", "angina", "stent",
        "pacemaker", "cholesterol", "systolic", "diastolic", "valve", "aorta",
        "ischemia", "infarction", "angiogram", "palpitation", "hypertension",
        "echocardiogram", "electrocardiogram", "cardiologist", "chest",
        "angioplasty", "atrial", "ventricle", "fibrillation", "coronary", "bypass",
        "catheter", "plaque", "statin", "troponin", "arrhythmia", "tachycardia",
        "bradycardia", "myocardial", "vascular", "circulation", "heartbeat",
        "cardiogram"}},
      {"dermatology",
       {"diagnosis", "eczema", "psoriasis", "rash", "dermatitis", "melanoma",
        "biopsy", "lesion", "mole", "acne", "rosacea", "hives", "blister",
        "keratosis", "carcinoma", "dermatologist", "epidermis", "follicle", "sebum",
        "pigment", "wrinkle", "sunscreen", "topical", "ointment", "cream", "itch",
        "scalp", "freckle", "cyst", "wart", "fungal", "shingles", "urticaria",
        "vitiligo", "dermis", "allergen", "peeling", "pruritus", "erythema",
        "dermatoscope"}},
      {"neurology",
       {"prescription", "migraine", "seizure", "epilepsy", "neuron", "cortex",
        "stroke", "tremor", "neuropathy", "dopamine", "serotonin", "cerebral",
        "cranial", "synapse", "reflex", "vertigo", "concussion", "amnesia",
        "aphasia", "neurologist", "spinal", "sciatica", "myelin", "axon",
        "dementia", "alzheimer", "parkinson", "cognition", "headache", "numbness",
        "tingling", "paralysis", "cerebellum", "brainstem", "neurotransmitter",
        "anticonvulsant", "sedative", "neural", "synaptic", "neuralgia"}},
      {"pediatrics",
       {"vaccine", "immunization", "pediatrician", "infant", "toddler", "newborn",
        "growth", "milestone", "fever", "measles", "mumps", "rubella", "chickenpox",
        "croup", "colic", "teething", "asthma", "allergy", "nutrition", "formula",
        "breastfeeding", "checkup", "booster", "dosage", "weight", "height",
        "percentile", "earache", "tonsil", "adenoid", "whooping", "pertussis",
        "pediatric", "wellness", "development", "screening", "hearing", "vision",
        "infancy", "immunity"}},
      {"scheduling",
       {"portal", "meeting", "calendar", "agenda", "reschedule", "invite",
        "attendee", "conference", "webinar", "deadline", "reminder", "timezone",
        "availability", "slot", "booking", "minutes", "quorum", "followup",
        "standup", "sync", "roster", "venue", "room", "catering", "presenter",
        "keynote", "session", "workshop", "seminar", "huddle", "recurring",
        "cancellation", "postpone", "organizer", "participant", "scheduler",
        "timeslot", "punctual", "adjourn", "logistics"}},
      {"travel",
       {"flight", "airline", "airport", "boarding", "layover", "luggage", "baggage",
        "passport", "visa", "hotel", "reservation", "checkin", "checkout",
        "departure", "arrival", "terminal", "gate", "seat", "upgrade", "mileage",
        "itinerary", "destination", "roundtrip", "nonstop", "carrier", "shuttle",
        "rental", "lodging", "suite", "concierge", "customs", "currency", "voyage",
        "transit", "stopover", "fare", "refundable", "excursion", "traveler",
        "jetlag"}},
      {"projects",
       {"inbox", "password", "attachment", "draft", "thread", "folder", "archive",
        "forward", "recipient", "sender", "subject", "signature", "mailbox", "spam",
        "filter", "newsletter", "unsubscribe", "broadcast", "memo", "bulletin",
        "notification", "digest", "outbox", "compose", "reply", "mailing",
        "encryption", "login", "credential", "username", "workspace", "channel",
        "ticket", "backlog", "sprint", "kanban", "roadmap", "changelog",
        "repository", "server"}},
      {"lending",
       {"loan", "mortgage", "refinance", "lender", "borrower", "principal",
        "interest", "amortization", "collateral", "equity", "escrow",
        "underwriting", "appraisal", "downpayment", "installment", "foreclosure",
        "credit", "debt", "repayment", "lien", "origination", "delinquency",
        "prequalification", "cosigner", "disbursement", "maturity", "promissory",
        "solvency", "guarantor", "subprime", "creditworthiness", "borrowing",
        "lending", "payoff", "arrears", "usury", "annuity", "deferment",
        "forbearance", "grace"}},
      {"trading",
       {"transaction", "portfolio", "dividend", "stock", "bond", "broker",
        "brokerage", "ticker", "shares", "margin", "futures", "options", "hedge",
        "volatility", "liquidity", "bullish", "bearish", "exchange", "nasdaq",
        "index", "fund", "yield", "commodity", "derivative", "arbitrage",
        "settlement", "custodian", "valuation", "earnings", "securities", "trader",
        "quote", "spread", "position", "rebalance", "allocation", "benchmark",
        "bluechip", "daytrade", "shortsell"}},
      {"claims",
       {"insurance", "statement", "claim", "policy", "premium", "deductible",
        "copay", "coverage", "adjuster", "reimbursement", "beneficiary",
        "policyholder", "underwriter", "actuary", "rider", "exclusion", "liability",
        "indemnity", "subrogation", "payout", "claimant", "endorsement", "renewal",
        "lapse", "waiting", "appeal", "denial", "authorization", "network",
        "provider", "billing", "invoice", "copayment", "coinsurance", "actuarial",
        "arbitration", "mediation", "restitution", "disclosure", "verification"}},
  };
  return banks;
}

// connective filler shared by every topic; mostly stopwords plus a few
// deliberately bland record-keeping words
inline const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> words = {
      "the", "and", "was", "for", "with", "this", "that", "from", "noted",
      "reported", "reviewed", "during", "after", "before", "case", "note",
      "update", "status", "item", "follow", "recent", "prior", "pending",
      "complete", "open", "closed", "today", "yesterday", "week", "month",
      "year", "per", "plan", "next", "still", "under", "over", "new", "old",
      "last"};
  return words;
}

inline std::vector<TopicSpec> default_topic_mix() {
  static const double proportions[] = {0.17, 0.14, 0.12, 0.11, 0.10,
                                       0.09, 0.08, 0.07, 0.06, 0.06};
  std::vector<TopicSpec> mix;
  const auto& banks = topic_word_banks();
  for (size_t i = 0; i < banks.size(); ++i) {
    mix.push_back({banks[i].first, proportions[i]});
  }
  return mix;
}

namespace detail {

inline const std::vector<std::string>& bank_for(const std::string& topic) {
  for (const auto& [name, words] : topic_word_banks()) {
    if (name == topic) return words;
  }
  throw std::invalid_argument("generate_corpus: unknown topic '" + topic + "'");
}

// Zipf-like weights over a bank: heavy head so per-topic term frequencies are
// skewed and high-TF keywords recur across chunks of the same topic.
inline const std::vector<double>& zipf_cumulative(size_t n) {
  static std::map<size_t, std::vector<double>> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<double> cum(n, 0.0);
  double total = 0.0;
  for (size_t i = 0; i < n; ++i) {
    total += 1.0 / std::pow(static_cast<double>(i + 1), 0.8);
    cum[i] = total;
  }
  for (double& c : cum) c /= total;
  return cache.emplace(n, std::move(cum)).first->second;
}

inline size_t zipf_draw(Rng& rng, size_t n) {
  const auto& cum = zipf_cumulative(n);
  const double u = rng.uniform();
  const auto it = std::lower_bound(cum.begin(), cum.end(), u);
  return std::min(static_cast<size_t>(it - cum.begin()), n - 1);
}

struct PlantedPii {
  PiiKind kind;
  std::string raw;        // surface form stitched into the text
  std::string sentence;   // full sentence carrying the value
  size_t tokens;          // token cost of that sentence
};

inline PlantedPii make_pii(Rng& rng) {
  const auto digits = [&](size_t count) {
    std::string out;
    for (size_t i = 0; i < count; ++i)
      out.push_back(static_cast<char>('0' + rng.uniform_index(10)));
    return out;
  };
  PlantedPii p;
  switch (rng.uniform_index(5)) {
    case 0: {
      p.kind = PiiKind::phone;
      const char sep[] = {'-', '.', ' '};
      const char s = sep[rng.uniform_index(3)];
      p.raw = digits(3) + s + digits(3) + s + digits(4);
      p.sentence = "call " + p.raw;
      p.tokens = 4;
      break;
    }
    case 1: {
      p.kind = PiiKind::email;
      p.raw = "user" + digits(4) + "@example" + digits(2) + ".com";
      p.sentence = "email " + p.raw;
      p.tokens = 4;
      break;
    }
    case 2: {
      p.kind = PiiKind::ssn;
      // keep the leading group clear of 19x/20x so values never collide with
      // the date pattern
      p.raw = std::to_string(3 + rng.uniform_index(6)) + digits(2) + "-" + digits(2) +
              "-" + digits(4);
      p.sentence = "ssn " + p.raw;
      p.tokens = 4;
      break;
    }
    case 3: {
      p.kind = PiiKind::dob;
      const std::string year = (rng.uniform_index(2) ? "19" : "20") + digits(2);
      const int month = 1 + static_cast<int>(rng.uniform_index(12));
      const int day = 1 + static_cast<int>(rng.uniform_index(28));
      char buf[16];
      std::snprintf(buf, sizeof(buf), "-%02d-%02d", month, day);
      p.raw = year + buf;
      p.sentence = "dob " + p.raw;
      p.tokens = 4;
      break;
    }
    default: {
      p.kind = PiiKind::bank_account;
      p.raw = "ACCT-" + digits(8);
      p.sentence = "account " + p.raw;
      p.tokens = 3;
      break;
    }
  }
  return p;
}

}  // namespace detail

// Deterministic synthetic corpus. Every chunk is 30..200 tokens, at least 70%
// of them from the chunk's topic vocabulary (term frequencies Zipf-skewed),
// the rest connective filler plus zero or more planted PII sentences whose
// values are recorded as ground truth with byte spans.
inline std::vector<Chunk> generate_corpus(const CorpusSpec& spec) {
  if (spec.n_chunks == 0)
    throw std::invalid_argument("generate_corpus: n_chunks must be positive");
  if (spec.pii_rate < 0.0 || spec.pii_rate > 1.0)
    throw std::invalid_argument("generate_corpus: pii_rate must be in [0, 1]");
  const std::vector<TopicSpec> topics =
      spec.topics.empty() ? default_topic_mix() : spec.topics;
  double proportion_sum = 0.0;
  for (const auto& t : topics) {
    if (t.proportion < 0.0)
      throw std::invalid_argument("generate_corpus: negative topic proportion");
    proportion_sum += t.proportion;
  }
  if (std::abs(proportion_sum - 1.0) > 1e-9)
    throw std::invalid_argument("generate_corpus: topic proportions must sum to 1");

  // largest-remainder quota keeps realized topic counts as close to the
  // requested mix as integer counts allow
  const size_t n = spec.n_chunks;
  std::vector<size_t> quota(topics.size(), 0);
  std::vector<std::pair<double, size_t>> remainders;
  size_t assigned = 0;
  for (size_t i = 0; i < topics.size(); ++i) {
    const double exact = topics[i].proportion * static_cast<double>(n);
    quota[i] = static_cast<size_t>(exact);
    assigned += quota[i];
    remainders.emplace_back(exact - static_cast<double>(quota[i]), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (size_t i = 0; assigned < n; ++i, ++assigned) {
    quota[remainders[i % remainders.size()].second] += 1;
  }

  std::vector<Chunk> chunks;
  chunks.reserve(n);
  size_t topic_idx = 0, topic_used = 0;
  for (size_t id = 0; id < n; ++id) {
    while (topic_idx < topics.size() && topic_used >= quota[topic_idx]) {
      ++topic_idx;
      topic_used = 0;
    }
    const std::string& topic = topics[std::min(topic_idx, topics.size() - 1)].name;
    ++topic_used;

    Rng rng(derive_seed(spec.seed, "chunk", id));
    const auto& bank = detail::bank_for(topic);

    size_t total_tokens = 30 + rng.uniform_index(171);  // 30..200

    std::vector<detail::PlantedPii> planted;
    if (rng.uniform() < spec.pii_rate) {
      const size_t wanted = 1 + rng.uniform_index(3);
      size_t pii_tokens = 0;
      for (size_t i = 0; i < wanted; ++i) {
        auto p = detail::make_pii(rng);
        if ((pii_tokens + p.tokens) * 20 > total_tokens * 3) break;  // cap at 15%
        pii_tokens += p.tokens;
        planted.push_back(std::move(p));
      }
      if (planted.empty()) {
        auto p = detail::make_pii(rng);
        total_tokens = std::max(total_tokens, p.tokens * 7);  // keep the 70% floor
        planted.push_back(std::move(p));
      }
    }

    size_t pii_tokens = 0;
    for (const auto& p : planted) pii_tokens += p.tokens;
    const size_t body_tokens = total_tokens - pii_tokens;
    const size_t filler_count = (body_tokens * 12) / 100;
    const size_t topic_count = body_tokens - filler_count;

    // draw the body, then mark filler positions
    std::vector<std::string> body;
    body.reserve(body_tokens);
    for (size_t i = 0; i < topic_count; ++i) {
      body.push_back(bank[detail::zipf_draw(rng, bank.size())]);
    }
    for (size_t i = 0; i < filler_count; ++i) {
      body.push_back(filler_words()[rng.uniform_index(filler_words().size())]);
    }
    rng.shuffle(body);

    // fold body tokens into sentences of 6..12 words
    std::vector<std::string> sentences;
    size_t pos = 0;
    while (pos < body.size()) {
      const size_t len = std::min(body.size() - pos, 6 + rng.uniform_index(7));
      std::string s;
      for (size_t i = 0; i < len; ++i) {
        if (!s.empty()) s.push_back(' ');
        s += body[pos + i];
      }
      sentences.push_back(std::move(s));
      pos += len;
    }

    // splice PII sentences in at random positions
    for (auto& p : planted) {
      const size_t at = rng.uniform_index(sentences.size() + 1);
      sentences.insert(sentences.begin() + static_cast<std::ptrdiff_t>(at), p.sentence);
    }

    Chunk chunk;
    chunk.id = id;
    chunk.topic = topic;
    for (const auto& s : sentences) {
      if (!chunk.text.empty()) chunk.text.push_back(' ');
      chunk.text += s;
      chunk.text.push_back('.');
    }

    for (const auto& p : planted) {
      const size_t at = chunk.text.find(p.raw);
      PiiItem item;
      item.kind = p.kind;
      item.value = detail::normalize_pii(p.kind, p.raw);
      item.begin = at;
      item.end = at + p.raw.size();
      chunk.pii.push_back(std::move(item));
    }
    std::stable_sort(chunk.pii.begin(), chunk.pii.end(),
                     [](const PiiItem& a, const PiiItem& b) { return a.begin < b.begin; });
    chunks.push_back(std::move(chunk));
  }
  return chunks;
}

inline std::vector<ChunkInput> to_store_inputs(const std::vector<Chunk>& chunks) {
  std::vector<ChunkInput> inputs;
  inputs.reserve(chunks.size());
  for (const auto& c : chunks) inputs.push_back({c.id, c.text, c.topic});
  return inputs;
}

namespace detail {

inline nlohmann::ordered_json chunk_to_json(const Chunk& chunk) {
  nlohmann::ordered_json j;
  j["id"] = chunk.id;
  j["text"] = chunk.text;
  if (!chunk.topic.empty()) j["topic"] = chunk.topic;
  if (!chunk.pii.empty()) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& p : chunk.pii) {
      arr.push_back({{"kind", std::string(pii_kind_name(p.kind))},
                     {"value", p.value},
                     {"begin", p.begin},
                     {"end", p.end}});
    }
    j["pii"] = arr;
  }
  return j;
}

inline PiiKind pii_kind_from_name(const std::string& name) {
  for (const PiiKind k : {PiiKind::phone, PiiKind::email, PiiKind::ssn, PiiKind::dob,
                          PiiKind::bank_account}) {
    if (name == pii_kind_name(k)) return k;
  }
  throw std::invalid_argument("unknown pii kind '" + name + "'");
}

}  // namespace detail

inline void write_jsonl(const std::vector<Chunk>& chunks, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_jsonl: cannot open " + path);
  for (const auto& chunk : chunks) {
    out << detail::chunk_to_json(chunk).dump() << '\n';
  }
  if (!out) throw std::runtime_error("write_jsonl: write failed for " + path);
}

// Reads one JSON object per line. "id" and "text" are required; "topic" and
// "pii" round-trip when present. Malformed lines and duplicate ids are
// reported with their line number.
inline std::vector<Chunk> ingest_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("ingest_jsonl: cannot open " + path);
  std::vector<Chunk> chunks;
  std::map<size_t, size_t> seen;  // id -> line
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw std::runtime_error("ingest_jsonl: line " + std::to_string(line_no) +
                               ": invalid JSON: " + e.what());
    }
    if (!j.is_object() || !j.contains("id") || !j.contains("text") ||
        !j["id"].is_number_unsigned() || !j["text"].is_string()) {
      throw std::runtime_error("ingest_jsonl: line " + std::to_string(line_no) +
                               ": expected an object with unsigned \"id\" and string "
                               "\"text\"");
    }
    Chunk chunk;
    chunk.id = j["id"].get<size_t>();
    chunk.text = j["text"].get<std::string>();
    if (j.contains("topic")) chunk.topic = j["topic"].get<std::string>();
    if (j.contains("pii")) {
      for (const auto& p : j["pii"]) {
        PiiItem item;
        item.kind = detail::pii_kind_from_name(p.at("kind").get<std::string>());
        item.value = p.at("value").get<std::string>();
        item.begin = p.at("begin").get<size_t>();
        item.end = p.at("end").get<size_t>();
        chunk.pii.push_back(std::move(item));
      }
    }
    const auto [it, inserted] = seen.emplace(chunk.id, line_no);
    if (!inserted) {
      throw std::runtime_error("ingest_jsonl: line " + std::to_string(line_no) +
                               ": duplicate chunk id " + std::to_string(chunk.id) +
                               " (first seen on line " + std::to_string(it->second) +
                               ")");
    }
    chunks.push_back(std::move(chunk));
  }
  return chunks;
}

struct OracleTopics {
  std::vector<Anchor> anchors;        // one per discovered cluster
  std::vector<double> probabilities;  // softmax over cluster masses
};

// Ground-truth topic structure, computed with the attacker's own machinery so
// estimated and oracle distributions are directly comparable: embed every
// chunk, cluster, take one representative keyword per cluster, softmax the
// cluster masses.
inline OracleTopics oracle_topics(const std::vector<Chunk>& chunks, double eps,
                                  size_t min_pts, const EmbedderConfig& cfg = {}) {
  if (chunks.empty()) throw std::invalid_argument("oracle_topics: empty corpus");
  std::vector<KeywordPoint> points;
  points.reserve(chunks.size());
  for (const auto& chunk : chunks) {
    const auto kw = extract_keywords(chunk.text, 1);
    points.push_back({kw.empty() ? "untitled" : kw.front(), embed(chunk.text, cfg)});
  }
  std::vector<EmbeddingVector> vecs;
  vecs.reserve(points.size());
  for (const auto& p : points) vecs.push_back(p.embedding);
  const ClusterResult clusters = dbscan(vecs, eps, min_pts);
  OracleTopics oracle;
  oracle.anchors = derive_anchors(points, clusters);
  std::vector<double> weights;
  weights.reserve(oracle.anchors.size());
  for (const auto& a : oracle.anchors) weights.push_back(a.weight);
  oracle.probabilities = softmax(weights);
  return oracle;
}

inline TopicDistribution oracle_distribution(const std::vector<Chunk>& chunks, double eps,
                                             size_t min_pts,
                                             const EmbedderConfig& cfg = {}) {
  const OracleTopics oracle = oracle_topics(chunks, eps, min_pts, cfg);
  TopicDistribution dist;
  for (size_t i = 0; i < oracle.anchors.size(); ++i) {
    dist.entries.emplace_back(oracle.anchors[i].keyword, oracle.probabilities[i]);
  }
  return dist;
}

}  // namespace ragleak
