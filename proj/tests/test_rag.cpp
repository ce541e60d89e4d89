#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "ragleak/rag.hpp"
#include "ragleak/rng.hpp"
#include "ragleak/text.hpp"
#include "ragleak/vector_store.hpp"

using namespace ragleak;

namespace {

std::vector<ChunkInput> sample_corpus() {
  return {
      {0, "cardiac rhythm reviewed by the visiting specialist during the appointment", ""},
      {1, "loan application pending since last spring quarter at the branch", ""},
      {2, "insurance claim filed after the storm damaged the garage roof", ""},
      {3, "appointment rescheduled because the patient portal stayed offline", ""},
      {4, "prescription refill approved by the attending physician yesterday", ""},
  };
}

std::string injected_query(const std::string& body) {
  return body + " " + injection_commands().front();
}

size_t echoed_chunk_count(const std::string& text) {
  if (text == kRefusalSentence) return 0;
  size_t count = 1;
  size_t pos = 0;
  while ((pos = text.find(kResponseSeparator, pos)) != std::string::npos) {
    ++count;
    pos += kResponseSeparator.size();
  }
  return count;
}

}  // namespace

TEST(InjectionDetection, FiresOnEveryCommandAndSurvivesShuffling) {
  for (const auto& cmd : injection_commands()) {
    EXPECT_TRUE(injection_detected("Tell me about loans. " + cmd)) << cmd;
    // the paraphrase defense reorders tokens but keeps the content words
    EXPECT_TRUE(injection_detected(paraphrase_query("About loans. " + cmd, 5))) << cmd;
  }
  EXPECT_FALSE(injection_detected("Tell me about loan rates please"));
  EXPECT_FALSE(injection_detected(""));
}

TEST(OracleEcho, EchoesRetrievedChunksVerbatimUnderInjection) {
  const VectorStore store = VectorStore::build_index(sample_corpus());
  ResponderSpec responder;
  responder.kind = ResponderKind::oracle_echo;
  const RagResponse response =
      answer(store, injected_query("loan application pending"), 2, -1.0, responder);
  EXPECT_TRUE(response.query_echoed);
  ASSERT_EQ(response.retrieved_ids.size(), 2u);
  for (const size_t id : response.retrieved_ids) {
    EXPECT_NE(response.text.find(store.chunk_by_id(id).text), std::string::npos);
  }
  EXPECT_EQ(echoed_chunk_count(response.text), 2u);
}

TEST(OracleEcho, RefusesWithoutInjection) {
  const VectorStore store = VectorStore::build_index(sample_corpus());
  ResponderSpec responder;
  responder.kind = ResponderKind::oracle_echo;
  const RagResponse response =
      answer(store, "tell me about loan applications", 2, -1.0, responder);
  EXPECT_FALSE(response.query_echoed);
  EXPECT_EQ(response.text, kRefusalSentence);
  EXPECT_EQ(response.retrieved_ids.size(), 2u);  // retrieval still happened
}

TEST(RefusalResponder, NeverLeaksCorpusText) {
  const VectorStore store = VectorStore::build_index(sample_corpus());
  ResponderSpec responder;
  responder.kind = ResponderKind::refusal;
  const RagResponse response =
      answer(store, injected_query("loan application pending"), 3, -1.0, responder);
  EXPECT_EQ(response.text, kRefusalSentence);
  for (const auto& chunk : store.chunks()) {
    EXPECT_EQ(response.text.find(chunk.text), std::string::npos);
  }
}

TEST(PartialEcho, KeepsChunksAtTheConfiguredRate) {
  const VectorStore store = VectorStore::build_index(sample_corpus());
  ResponderSpec responder;
  responder.kind = ResponderKind::partial_echo;
  responder.leak_fraction = 0.5;
  responder.seed = 9;

  size_t kept = 0;
  const size_t trials = 1000;
  for (size_t i = 0; i < trials; ++i) {
    const RagResponse response = answer(
        store, "probe number " + std::to_string(i) + " of the archive", 3, -1.0,
        responder);
    kept += echoed_chunk_count(response.text);
  }
  // Binomial(3000, 0.5): mean 1500, three sigma ~ 82
  EXPECT_GT(kept, 1500u - 83u);
  EXPECT_LT(kept, 1500u + 83u);
}

TEST(PartialEcho, ExtremeFractionsAreDegenerate) {
  const VectorStore store = VectorStore::build_index(sample_corpus());
  ResponderSpec responder;
  responder.kind = ResponderKind::partial_echo;
  responder.leak_fraction = 0.0;
  EXPECT_EQ(answer(store, "anything at all", 3, -1.0, responder).text,
            kRefusalSentence);
  responder.leak_fraction = 1.0;
  EXPECT_EQ(echoed_chunk_count(answer(store, "anything at all", 3, -1.0, responder).text),
            3u);
  responder.leak_fraction = 1.5;
  EXPECT_THROW(answer(store, "anything", 3, -1.0, responder), std::invalid_argument);
}

TEST(ParaphraseDefense, DropsStopwordsAndShufflesDeterministically) {
  const std::string query = "tell me about the loan and the insurance claim";
  const std::string a = paraphrase_query(query, 3);
  const std::string b = paraphrase_query(query, 3);
  EXPECT_EQ(a, b);
  for (const auto& tok : tokenize(a)) EXPECT_FALSE(is_stopword(tok)) << tok;
  const std::set<std::string> expect = {"tell", "loan", "insurance", "claim"};
  std::set<std::string> got;
  for (auto& tok : tokenize(a)) got.insert(std::move(tok));
  EXPECT_EQ(got, expect);
  EXPECT_EQ(paraphrase_query("loan", 3), "loan");
}

TEST(ParaphraseDefense, KeepsQueriesNearTheirOriginalEmbedding) {
  static const char* pool[] = {"loan",  "claim", "portal", "refill", "storm",
                               "chart", "audit", "visit",  "rate",   "note"};
  Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    std::string query;
    for (int w = 0; w < 8; ++w) {
      if (!query.empty()) query += ' ';
      query += pool[rng.uniform_index(10)];
    }
    const std::string shuffled = paraphrase_query(query, trial);
    EXPECT_GE(cosine(embed(query), embed(shuffled)), 0.9) << query;
  }
}

TEST(SummarizeChunk, KeepsBudgetSentencesInOriginalOrder) {
  const std::string chunk =
      "The loan was approved. The weather stayed calm. Another loan note arrived.";
  const std::string one = summarize_chunk(chunk, "loan", 1);
  EXPECT_EQ(detail::split_sentences(one).size(), 1u);
  EXPECT_NE(one.find("loan"), std::string::npos);

  const std::string two = summarize_chunk(chunk, "loan", 2);
  const auto sentences = detail::split_sentences(two);
  ASSERT_EQ(sentences.size(), 2u);
  // both loan sentences survive and keep their original relative order
  EXPECT_EQ(sentences[0], "The loan was approved.");
  EXPECT_EQ(sentences[1], "Another loan note arrived.");
}

TEST(SummarizeChunk, GenerousBudgetReturnsTextUnchanged) {
  const std::string chunk = "First sentence. Second sentence.";
  EXPECT_EQ(summarize_chunk(chunk, "anything", 2), chunk);
  EXPECT_EQ(summarize_chunk(chunk, "anything", 10), chunk);
  EXPECT_THROW(summarize_chunk(chunk, "anything", 0), std::invalid_argument);
}

TEST(AnswerPipeline, PostRetrievalDefensesPreserveTheRetrievedSet) {
  const VectorStore store = VectorStore::build_index(sample_corpus());
  ResponderSpec responder;
  responder.kind = ResponderKind::oracle_echo;
  const std::string query = injected_query("loan insurance appointment");

  const RagResponse plain = answer(store, query, 3, -1.0, responder);

  DefenseConfig mmr;
  mmr.mmr_lambda = 0.5;
  const RagResponse reranked = answer(store, query, 3, -1.0, responder, mmr);
  std::vector<size_t> a = plain.retrieved_ids;
  std::vector<size_t> b = reranked.retrieved_ids;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  EXPECT_EQ(a, b);

  DefenseConfig summarize;
  summarize.summarize_sentences = 2;
  const RagResponse summarized = answer(store, query, 3, -1.0, responder, summarize);
  EXPECT_EQ(summarized.retrieved_ids, plain.retrieved_ids);
}

TEST(AnswerPipeline, ParaphraseDefenseChangesRetrievalInput) {
  const VectorStore store = VectorStore::build_index(sample_corpus());
  ResponderSpec responder;
  responder.kind = ResponderKind::oracle_echo;
  DefenseConfig defense;
  defense.paraphrase = true;
  defense.paraphrase_seed = 21;
  const RagResponse response =
      answer(store, injected_query("loan application"), 3, -1.0, responder, defense);
  // the injection survives the shuffle, so the echo still happens
  EXPECT_TRUE(response.query_echoed);
  EXPECT_EQ(response.retrieved_ids.size(), 3u);
}

TEST(ExternalHttp, MissingEndpointIsAConfigError) {
  const VectorStore store = VectorStore::build_index(sample_corpus());
  ResponderSpec responder;
  responder.kind = ResponderKind::external_http;
  EXPECT_THROW(answer(store, "anything", 2, -1.0, responder), std::invalid_argument);
}

TEST(ExternalHttp, UnreachableEndpointRaisesHttpError) {
  const VectorStore store = VectorStore::build_index(sample_corpus());
  ResponderSpec responder;
  responder.kind = ResponderKind::external_http;
  responder.endpoint = "http://127.0.0.1:1/responder";
  EXPECT_THROW(answer(store, "anything", 2, -1.0, responder), ResponderHttpError);
}
