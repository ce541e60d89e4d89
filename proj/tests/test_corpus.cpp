#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "ragleak/corpus.hpp"
#include "ragleak/text.hpp"

using namespace ragleak;

namespace {

CorpusSpec small_spec(double pii_rate, uint64_t seed = 7) {
  CorpusSpec spec;
  spec.n_chunks = 60;
  spec.pii_rate = pii_rate;
  spec.seed = seed;
  return spec;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("ragleak_corpus_test_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST(GenerateCorpus, SingleTopicSpecLabelsEveryChunk) {
  CorpusSpec spec = small_spec(0.0);
  spec.topics = {{"lending", 1.0}};
  const auto chunks = generate_corpus(spec);
  ASSERT_EQ(chunks.size(), 60u);
  for (const auto& chunk : chunks) EXPECT_EQ(chunk.topic, "lending");
}

TEST(GenerateCorpus, TopicQuotasFollowProportionsExactly) {
  CorpusSpec spec;
  spec.n_chunks = 500;
  spec.pii_rate = 0.0;
  spec.topics = {{"cardiology", 0.6}, {"travel", 0.4}};
  const auto chunks = generate_corpus(spec);
  size_t cardiology = 0;
  for (const auto& chunk : chunks) cardiology += chunk.topic == "cardiology";
  EXPECT_EQ(cardiology, 300u);
}

TEST(GenerateCorpus, PiiRateZeroPlantsNothing) {
  const auto chunks = generate_corpus(small_spec(0.0));
  for (const auto& chunk : chunks) {
    EXPECT_TRUE(chunk.pii.empty());
    EXPECT_TRUE(extract_pii(chunk.text).empty()) << chunk.text;
  }
}

TEST(GenerateCorpus, PiiRateOnePlantsIntoEveryChunk) {
  const auto chunks = generate_corpus(small_spec(1.0));
  for (const auto& chunk : chunks) {
    ASSERT_FALSE(chunk.pii.empty());
    // every planted value is recoverable from the raw text by the extractor
    const auto found = extract_pii(chunk.text);
    for (const auto& planted : chunk.pii) {
      bool recovered = false;
      for (const auto& item : found) {
        if (item.kind == planted.kind && item.value == planted.value) {
          recovered = true;
          break;
        }
      }
      EXPECT_TRUE(recovered) << pii_kind_name(planted.kind) << " " << planted.value;
    }
    // recorded byte spans point at the surface form
    for (const auto& planted : chunk.pii) {
      ASSERT_LE(planted.end, chunk.text.size());
      const std::string raw = chunk.text.substr(planted.begin,
                                                planted.end - planted.begin);
      EXPECT_EQ(detail::normalize_pii(planted.kind, raw), planted.value);
    }
  }
}

TEST(GenerateCorpus, PiiIncidenceTracksTheRate) {
  CorpusSpec spec = small_spec(0.5);
  spec.n_chunks = 500;
  const auto chunks = generate_corpus(spec);
  size_t with_pii = 0;
  for (const auto& chunk : chunks) with_pii += !chunk.pii.empty();
  // Binomial(500, 0.5): mean 250, three sigma ~ 33.5
  EXPECT_GT(with_pii, 250u - 34u);
  EXPECT_LT(with_pii, 250u + 34u);
}

TEST(GenerateCorpus, ChunksStayWithinTokenBounds) {
  const auto chunks = generate_corpus(small_spec(0.5));
  for (const auto& chunk : chunks) {
    const size_t tokens = tokenize(chunk.text).size();
    EXPECT_GE(tokens, 30u) << chunk.id;
    EXPECT_LE(tokens, 200u) << chunk.id;
  }
}

TEST(GenerateCorpus, TopicVocabularyDominatesEachChunk) {
  CorpusSpec spec = small_spec(0.5);
  spec.topics = {{"neurology", 1.0}};
  const auto chunks = generate_corpus(spec);
  std::set<std::string> bank;
  for (const auto& [name, words] : topic_word_banks()) {
    if (name == "neurology") bank.insert(words.begin(), words.end());
  }
  for (const auto& chunk : chunks) {
    const auto tokens = tokenize(chunk.text);
    size_t from_bank = 0;
    for (const auto& tok : tokens) from_bank += bank.count(tok);
    EXPECT_GE(static_cast<double>(from_bank) / static_cast<double>(tokens.size()),
              0.7)
        << chunk.id;
  }
}

TEST(GenerateCorpus, IsDeterministicPerSeed) {
  const auto a = generate_corpus(small_spec(0.5, 11));
  const auto b = generate_corpus(small_spec(0.5, 11));
  const auto c = generate_corpus(small_spec(0.5, 12));
  ASSERT_EQ(a.size(), b.size());
  bool any_difference = false;
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].text, b[i].text);
    EXPECT_EQ(a[i].topic, b[i].topic);
    if (a[i].text != c[i].text) any_difference = true;
  }
  EXPECT_TRUE(any_difference);
}

TEST(GenerateCorpus, RejectsInvalidSpecs) {
  CorpusSpec spec = small_spec(0.5);
  spec.n_chunks = 0;
  EXPECT_THROW(generate_corpus(spec), std::invalid_argument);
  spec = small_spec(1.5);
  EXPECT_THROW(generate_corpus(spec), std::invalid_argument);
  spec = small_spec(0.5);
  spec.topics = {{"lending", 0.5}};  // does not sum to 1
  EXPECT_THROW(generate_corpus(spec), std::invalid_argument);
  spec.topics = {{"nonexistent", 1.0}};
  EXPECT_THROW(generate_corpus(spec), std::invalid_argument);
}

TEST(CorpusJsonl, RoundTripsThroughDisk) {
  TempDir dir;
  const auto original = generate_corpus(small_spec(0.7));
  const std::string path = (dir.path / "corpus.jsonl").string();
  write_jsonl(original, path);

  const auto restored = ingest_jsonl(path);
  ASSERT_EQ(restored.size(), original.size());
  for (size_t i = 0; i < original.size(); ++i) {
    EXPECT_EQ(restored[i].id, original[i].id);
    EXPECT_EQ(restored[i].text, original[i].text);
    EXPECT_EQ(restored[i].topic, original[i].topic);
    ASSERT_EQ(restored[i].pii.size(), original[i].pii.size());
    for (size_t j = 0; j < original[i].pii.size(); ++j) {
      EXPECT_TRUE(restored[i].pii[j] == original[i].pii[j]);
    }
  }

  // a second write of the restored chunks is byte-identical
  const std::string again = (dir.path / "again.jsonl").string();
  write_jsonl(restored, again);
  EXPECT_EQ(read_file(path), read_file(again));
}

TEST(CorpusJsonl, ReportsMalformedLinesWithTheirNumber) {
  TempDir dir;
  const std::string path = (dir.path / "broken.jsonl").string();
  {
    std::ofstream out(path, std::ios::binary);
    out << R"({"id": 0, "text": "fine"})" << '\n';
    out << "not json at all\n";
  }
  try {
    ingest_jsonl(path);
    FAIL() << "expected a parse failure";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(CorpusJsonl, ReportsDuplicateIdsAndMissingFields) {
  TempDir dir;
  const std::string dup_path = (dir.path / "dup.jsonl").string();
  {
    std::ofstream out(dup_path, std::ios::binary);
    out << R"({"id": 4, "text": "first"})" << '\n';
    out << R"({"id": 4, "text": "second"})" << '\n';
  }
  try {
    ingest_jsonl(dup_path);
    FAIL() << "expected a duplicate id failure";
  } catch (const std::runtime_error& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("duplicate chunk id 4"), std::string::npos) << what;
    EXPECT_NE(what.find("line 2"), std::string::npos) << what;
  }

  const std::string missing_path = (dir.path / "missing.jsonl").string();
  {
    std::ofstream out(missing_path, std::ios::binary);
    out << R"({"id": 0})" << '\n';
  }
  EXPECT_THROW(ingest_jsonl(missing_path), std::runtime_error);
  EXPECT_THROW(ingest_jsonl((dir.path / "absent.jsonl").string()),
               std::runtime_error);
}

TEST(OracleTopics, ProducesNormalizedDistributionDeterministically) {
  const auto chunks = generate_corpus(small_spec(0.5));
  const OracleTopics a = oracle_topics(chunks, 0.9, 3);
  const OracleTopics b = oracle_topics(chunks, 0.9, 3);
  ASSERT_FALSE(a.anchors.empty());
  ASSERT_EQ(a.anchors.size(), a.probabilities.size());
  double total = 0.0;
  for (const double p : a.probabilities) {
    EXPECT_GT(p, 0.0);
    total += p;
  }
  EXPECT_NEAR(total, 1.0, 1e-9);
  ASSERT_EQ(a.anchors.size(), b.anchors.size());
  for (size_t i = 0; i < a.anchors.size(); ++i) {
    EXPECT_EQ(a.anchors[i].keyword, b.anchors[i].keyword);
    EXPECT_EQ(a.probabilities[i], b.probabilities[i]);
  }
  EXPECT_THROW(oracle_topics({}, 0.9, 3), std::invalid_argument);
}

TEST(ToStoreInputs, PreservesIdsTextAndLabels) {
  const auto chunks = generate_corpus(small_spec(0.3));
  const auto inputs = to_store_inputs(chunks);
  ASSERT_EQ(inputs.size(), chunks.size());
  for (size_t i = 0; i < chunks.size(); ++i) {
    EXPECT_EQ(inputs[i].id, chunks[i].id);
    EXPECT_EQ(inputs[i].text, chunks[i].text);
    EXPECT_EQ(inputs[i].topic_label, chunks[i].topic);
  }
}
