#pragma once

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ragleak/attack.hpp"
#include "ragleak/corpus.hpp"
#include "ragleak/eval.hpp"
#include "ragleak/rag.hpp"

namespace ragleak {

// Thrown for malformed or invalid configuration: the CLI maps it to exit 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when a file cannot be read or written: the CLI maps it to exit 3.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Everything a run needs, deserialized from one JSON document. Sections and
// keys are all optional; the defaults reproduce the standard experiment.
struct ExperimentConfig {
  std::string corpus_path;  // empty means generate from corpus_spec
  CorpusSpec corpus_spec;
  EmbedderConfig embedder;
  AttackConfig attack;
  AttackStrategy strategy = AttackStrategy::adaptive;
  ResponderSpec responder;
  DefenseConfig defense;
  bool oracle_enabled = true;
  double oracle_eps = 0.9;
  size_t oracle_min_pts = 3;
  double rouge_threshold = 0.5;
  SweepSpec sweep;
  std::vector<AttackStrategy> sweep_attacks = {AttackStrategy::adaptive,
                                               AttackStrategy::random_anchor,
                                               AttackStrategy::static_injection};
  std::vector<uint64_t> sweep_seeds = {1, 2, 3};
};

namespace detail {

inline void check_keys(const nlohmann::json& obj, const std::string& section,
                       std::initializer_list<const char*> allowed,
                       std::vector<std::string>& errors) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    bool known = false;
    for (const char* a : allowed) {
      if (key == a) {
        known = true;
        break;
      }
    }
    if (!known) errors.push_back(section + ": unknown key '" + key + "'");
  }
}

inline void read_bool(const nlohmann::json& obj, const std::string& section,
                      const char* key, bool& out, std::vector<std::string>& errors) {
  if (!obj.contains(key)) return;
  if (!obj[key].is_boolean()) {
    errors.push_back(section + "." + key + ": expected a boolean");
    return;
  }
  out = obj[key].get<bool>();
}

inline void read_double(const nlohmann::json& obj, const std::string& section,
                        const char* key, double& out, std::vector<std::string>& errors) {
  if (!obj.contains(key)) return;
  if (!obj[key].is_number()) {
    errors.push_back(section + "." + key + ": expected a number");
    return;
  }
  out = obj[key].get<double>();
}

inline void read_size(const nlohmann::json& obj, const std::string& section,
                      const char* key, size_t& out, std::vector<std::string>& errors) {
  if (!obj.contains(key)) return;
  if (obj[key].is_number_unsigned()) {
    out = obj[key].get<size_t>();
    return;
  }
  if (!obj[key].is_number_integer() || obj[key].get<int64_t>() < 0) {
    errors.push_back(section + "." + key + ": expected a non-negative integer");
    return;
  }
  out = obj[key].get<size_t>();
}

inline void read_int(const nlohmann::json& obj, const std::string& section,
                     const char* key, int& out, std::vector<std::string>& errors) {
  if (!obj.contains(key)) return;
  if (!obj[key].is_number_integer()) {
    errors.push_back(section + "." + key + ": expected an integer");
    return;
  }
  out = obj[key].get<int>();
}

inline void read_u64(const nlohmann::json& obj, const std::string& section,
                     const char* key, uint64_t& out, std::vector<std::string>& errors) {
  if (!obj.contains(key)) return;
  if (!obj[key].is_number_unsigned() &&
      !(obj[key].is_number_integer() && obj[key].get<int64_t>() >= 0)) {
    errors.push_back(section + "." + key + ": expected a non-negative integer");
    return;
  }
  out = obj[key].get<uint64_t>();
}

inline void read_string(const nlohmann::json& obj, const std::string& section,
                        const char* key, std::string& out,
                        std::vector<std::string>& errors) {
  if (!obj.contains(key)) return;
  if (!obj[key].is_string()) {
    errors.push_back(section + "." + key + ": expected a string");
    return;
  }
  out = obj[key].get<std::string>();
}

inline std::optional<AttackStrategy> strategy_from_name(const std::string& name) {
  if (name == "adaptive") return AttackStrategy::adaptive;
  if (name == "random") return AttackStrategy::random_anchor;
  if (name == "static") return AttackStrategy::static_injection;
  return std::nullopt;
}

}  // namespace detail

// Parses and validates the whole document, collecting every problem instead
// of stopping at the first so a bad config is fixable in one pass.
inline ExperimentConfig parse_experiment_config(const nlohmann::json& root,
                                                std::vector<std::string>& errors) {
  using detail::check_keys;
  using detail::read_bool;
  using detail::read_double;
  using detail::read_int;
  using detail::read_size;
  using detail::read_string;
  using detail::read_u64;

  ExperimentConfig cfg;
  if (!root.is_object()) {
    errors.push_back("config root: expected a JSON object");
    return cfg;
  }
  check_keys(root, "config",
             {"corpus", "embedder", "attack", "responder", "defense", "oracle",
              "scoring", "sweep"},
             errors);

  if (root.contains("corpus")) {
    const auto& c = root["corpus"];
    if (!c.is_object()) {
      errors.push_back("corpus: expected an object");
    } else {
      check_keys(c, "corpus", {"path", "n_chunks", "pii_rate", "seed", "topics"},
                 errors);
      read_string(c, "corpus", "path", cfg.corpus_path, errors);
      const bool has_gen_keys = c.contains("n_chunks") || c.contains("pii_rate") ||
                                c.contains("seed") || c.contains("topics");
      if (!cfg.corpus_path.empty() && has_gen_keys) {
        errors.push_back("corpus: give either path or a generation spec, not both");
      }
      read_size(c, "corpus", "n_chunks", cfg.corpus_spec.n_chunks, errors);
      read_double(c, "corpus", "pii_rate", cfg.corpus_spec.pii_rate, errors);
      read_u64(c, "corpus", "seed", cfg.corpus_spec.seed, errors);
      if (c.contains("topics")) {
        if (!c["topics"].is_array()) {
          errors.push_back("corpus.topics: expected an array");
        } else {
          double sum = 0.0;
          std::set<std::string> names;
          for (size_t i = 0; i < c["topics"].size(); ++i) {
            const auto& t = c["topics"][i];
            const std::string where = "corpus.topics[" + std::to_string(i) + "]";
            if (!t.is_object() || !t.contains("name") || !t.contains("proportion") ||
                !t["name"].is_string() || !t["proportion"].is_number()) {
              errors.push_back(where + ": expected {name, proportion}");
              continue;
            }
            TopicSpec spec;
            spec.name = t["name"].get<std::string>();
            spec.proportion = t["proportion"].get<double>();
            if (spec.name.empty()) errors.push_back(where + ".name: must not be empty");
            if (!names.insert(spec.name).second) {
              errors.push_back(where + ".name: duplicate topic '" + spec.name + "'");
            }
            if (spec.proportion < 0.0) {
              errors.push_back(where + ".proportion: must be non-negative");
            }
            sum += spec.proportion;
            cfg.corpus_spec.topics.push_back(std::move(spec));
          }
          if (!cfg.corpus_spec.topics.empty() && std::abs(sum - 1.0) > 1e-9) {
            errors.push_back("corpus.topics: proportions must sum to 1");
          }
        }
      }
      if (cfg.corpus_path.empty() && cfg.corpus_spec.n_chunks == 0) {
        errors.push_back("corpus.n_chunks: must be at least 1");
      }
      if (cfg.corpus_spec.pii_rate < 0.0 || cfg.corpus_spec.pii_rate > 1.0) {
        errors.push_back("corpus.pii_rate: must lie in [0, 1]");
      }
    }
  }

  if (root.contains("embedder")) {
    const auto& e = root["embedder"];
    if (!e.is_object()) {
      errors.push_back("embedder: expected an object");
    } else {
      check_keys(e, "embedder",
                 {"dimension", "ngram_max", "lowercase", "bigram_weight"}, errors);
      read_int(e, "embedder", "dimension", cfg.embedder.dimension, errors);
      read_int(e, "embedder", "ngram_max", cfg.embedder.ngram_max, errors);
      read_bool(e, "embedder", "lowercase", cfg.embedder.lowercase, errors);
      read_double(e, "embedder", "bigram_weight", cfg.embedder.bigram_weight, errors);
      if (cfg.embedder.dimension < 2) {
        errors.push_back("embedder.dimension: must be at least 2");
      }
      if (cfg.embedder.ngram_max < 1 || cfg.embedder.ngram_max > 2) {
        errors.push_back("embedder.ngram_max: must be 1 or 2");
      }
      if (cfg.embedder.bigram_weight < 0.0) {
        errors.push_back("embedder.bigram_weight: must be non-negative");
      }
    }
  }

  if (root.contains("attack")) {
    const auto& a = root["attack"];
    if (!a.is_object()) {
      errors.push_back("attack: expected an object");
    } else {
      check_keys(a, "attack",
                 {"budget", "top_k", "retrieval_threshold", "lambda", "epsilon",
                  "alpha1", "dedup_threshold", "anchors_per_query", "cluster_eps",
                  "cluster_min_pts", "cluster_method", "kmeans_k",
                  "keywords_per_chunk", "topic_set_size", "min_candidate_tokens",
                  "mode", "seed_topics", "seed", "decay_variant", "temperature",
                  "halt_on_convergence", "oracle_guided", "strategy"},
                 errors);
      read_size(a, "attack", "budget", cfg.attack.budget, errors);
      read_size(a, "attack", "top_k", cfg.attack.top_k, errors);
      read_double(a, "attack", "retrieval_threshold", cfg.attack.retrieval_threshold,
                  errors);
      read_double(a, "attack", "lambda", cfg.attack.lambda, errors);
      read_double(a, "attack", "epsilon", cfg.attack.epsilon, errors);
      read_double(a, "attack", "alpha1", cfg.attack.alpha1, errors);
      read_double(a, "attack", "dedup_threshold", cfg.attack.dedup_threshold, errors);
      read_size(a, "attack", "anchors_per_query", cfg.attack.anchors_per_query, errors);
      read_double(a, "attack", "cluster_eps", cfg.attack.cluster_eps, errors);
      read_size(a, "attack", "cluster_min_pts", cfg.attack.cluster_min_pts, errors);
      read_size(a, "attack", "kmeans_k", cfg.attack.kmeans_k, errors);
      read_size(a, "attack", "keywords_per_chunk", cfg.attack.keywords_per_chunk,
                errors);
      read_size(a, "attack", "topic_set_size", cfg.attack.topic_set_size, errors);
      read_size(a, "attack", "min_candidate_tokens", cfg.attack.min_candidate_tokens,
                errors);
      read_u64(a, "attack", "seed", cfg.attack.seed, errors);
      read_double(a, "attack", "temperature", cfg.attack.temperature, errors);
      read_bool(a, "attack", "halt_on_convergence", cfg.attack.halt_on_convergence,
                errors);
      read_bool(a, "attack", "oracle_guided", cfg.attack.oracle_guided, errors);

      if (a.contains("cluster_method")) {
        std::string method;
        read_string(a, "attack", "cluster_method", method, errors);
        if (method == "dbscan") {
          cfg.attack.cluster_method = ClusterMethod::dbscan_method;
        } else if (method == "kmeans") {
          cfg.attack.cluster_method = ClusterMethod::kmeans_method;
        } else if (!method.empty()) {
          errors.push_back("attack.cluster_method: must be 'dbscan' or 'kmeans'");
        }
      }
      if (a.contains("mode")) {
        std::string mode;
        read_string(a, "attack", "mode", mode, errors);
        if (mode == "targeted") {
          cfg.attack.mode = AttackMode::targeted;
        } else if (mode == "untargeted") {
          cfg.attack.mode = AttackMode::untargeted;
        } else if (!mode.empty()) {
          errors.push_back("attack.mode: must be 'targeted' or 'untargeted'");
        }
      }
      if (a.contains("decay_variant")) {
        std::string variant;
        read_string(a, "attack", "decay_variant", variant, errors);
        if (variant == "per_anchor") {
          cfg.attack.decay_variant = DecayVariant::per_anchor;
        } else if (variant == "global") {
          cfg.attack.decay_variant = DecayVariant::global;
        } else if (!variant.empty()) {
          errors.push_back("attack.decay_variant: must be 'per_anchor' or 'global'");
        }
      }
      if (a.contains("strategy")) {
        std::string name;
        read_string(a, "attack", "strategy", name, errors);
        const auto strategy = detail::strategy_from_name(name);
        if (strategy) {
          cfg.strategy = *strategy;
        } else if (!name.empty()) {
          errors.push_back("attack.strategy: must be 'adaptive', 'random' or 'static'");
        }
      }
      if (a.contains("seed_topics")) {
        if (!a["seed_topics"].is_array()) {
          errors.push_back("attack.seed_topics: expected an array of strings");
        } else {
          for (const auto& t : a["seed_topics"]) {
            if (!t.is_string() || t.get<std::string>().empty()) {
              errors.push_back("attack.seed_topics: entries must be non-empty strings");
              break;
            }
            cfg.attack.seed_topics.push_back(t.get<std::string>());
          }
        }
      }

      if (cfg.attack.budget == 0) errors.push_back("attack.budget: must be at least 1");
      if (cfg.attack.top_k == 0) errors.push_back("attack.top_k: must be at least 1");
      if (cfg.attack.lambda <= 0.0 || cfg.attack.lambda >= 1.0) {
        errors.push_back("attack.lambda: must lie strictly inside (0, 1)");
      }
      if (cfg.attack.epsilon <= 0.0) {
        errors.push_back("attack.epsilon: must be positive");
      }
      if (cfg.attack.alpha1 <= 0.0 || cfg.attack.alpha1 > 1.0) {
        errors.push_back("attack.alpha1: must lie in (0, 1]");
      }
      if (cfg.attack.dedup_threshold <= 0.0 || cfg.attack.dedup_threshold > 1.0) {
        errors.push_back("attack.dedup_threshold: must lie in (0, 1]");
      }
      if (cfg.attack.anchors_per_query == 0) {
        errors.push_back("attack.anchors_per_query: must be at least 1");
      }
      if (cfg.attack.cluster_eps <= 0.0) {
        errors.push_back("attack.cluster_eps: must be positive");
      }
      if (cfg.attack.cluster_min_pts == 0) {
        errors.push_back("attack.cluster_min_pts: must be at least 1");
      }
      if (cfg.attack.temperature <= 0.0) {
        errors.push_back("attack.temperature: must be positive");
      }
      if (cfg.attack.keywords_per_chunk == 0) {
        errors.push_back("attack.keywords_per_chunk: must be at least 1");
      }
      if (cfg.attack.topic_set_size == 0) {
        errors.push_back("attack.topic_set_size: must be at least 1");
      }
    }
  }

  if (root.contains("responder")) {
    const auto& r = root["responder"];
    if (!r.is_object()) {
      errors.push_back("responder: expected an object");
    } else {
      check_keys(r, "responder", {"kind", "leak_fraction", "endpoint", "seed"}, errors);
      if (r.contains("kind")) {
        std::string kind;
        read_string(r, "responder", "kind", kind, errors);
        if (kind == "oracle_echo") {
          cfg.responder.kind = ResponderKind::oracle_echo;
        } else if (kind == "partial_echo") {
          cfg.responder.kind = ResponderKind::partial_echo;
        } else if (kind == "refusal") {
          cfg.responder.kind = ResponderKind::refusal;
        } else if (kind == "external_http") {
          cfg.responder.kind = ResponderKind::external_http;
        } else if (!kind.empty()) {
          errors.push_back(
              "responder.kind: must be one of oracle_echo, partial_echo, refusal, "
              "external_http");
        }
      }
      read_double(r, "responder", "leak_fraction", cfg.responder.leak_fraction, errors);
      read_string(r, "responder", "endpoint", cfg.responder.endpoint, errors);
      read_u64(r, "responder", "seed", cfg.responder.seed, errors);
      if (cfg.responder.leak_fraction < 0.0 || cfg.responder.leak_fraction > 1.0) {
        errors.push_back("responder.leak_fraction: must lie in [0, 1]");
      }
      if (cfg.responder.kind == ResponderKind::external_http &&
          cfg.responder.endpoint.empty()) {
        errors.push_back("responder.endpoint: required for kind external_http");
      }
    }
  }

  if (root.contains("defense")) {
    const auto& d = root["defense"];
    if (!d.is_object()) {
      errors.push_back("defense: expected an object");
    } else {
      check_keys(d, "defense",
                 {"paraphrase", "gaussian_sigma", "mmr_lambda", "summarize_sentences"},
                 errors);
      read_bool(d, "defense", "paraphrase", cfg.defense.paraphrase, errors);
      read_double(d, "defense", "gaussian_sigma", cfg.defense.gaussian_sigma, errors);
      if (d.contains("mmr_lambda") && !d["mmr_lambda"].is_null()) {
        if (!d["mmr_lambda"].is_number()) {
          errors.push_back("defense.mmr_lambda: expected a number or null");
        } else {
          cfg.defense.mmr_lambda = d["mmr_lambda"].get<double>();
        }
      }
      if (d.contains("summarize_sentences") && !d["summarize_sentences"].is_null()) {
        if (!d["summarize_sentences"].is_number_integer() ||
            d["summarize_sentences"].get<int64_t>() < 0) {
          errors.push_back(
              "defense.summarize_sentences: expected a non-negative integer or null");
        } else {
          cfg.defense.summarize_sentences = d["summarize_sentences"].get<size_t>();
        }
      }
      if (cfg.defense.gaussian_sigma < 0.0) {
        errors.push_back("defense.gaussian_sigma: must be non-negative");
      }
      if (cfg.defense.mmr_lambda &&
          (*cfg.defense.mmr_lambda < 0.0 || *cfg.defense.mmr_lambda > 1.0)) {
        errors.push_back("defense.mmr_lambda: must lie in [0, 1]");
      }
      if (cfg.defense.summarize_sentences && *cfg.defense.summarize_sentences == 0) {
        errors.push_back("defense.summarize_sentences: must be at least 1");
      }
    }
  }

  if (root.contains("oracle")) {
    const auto& o = root["oracle"];
    if (!o.is_object()) {
      errors.push_back("oracle: expected an object");
    } else {
      check_keys(o, "oracle", {"enabled", "eps", "min_pts"}, errors);
      read_bool(o, "oracle", "enabled", cfg.oracle_enabled, errors);
      read_double(o, "oracle", "eps", cfg.oracle_eps, errors);
      read_size(o, "oracle", "min_pts", cfg.oracle_min_pts, errors);
      if (cfg.oracle_eps <= 0.0) errors.push_back("oracle.eps: must be positive");
      if (cfg.oracle_min_pts == 0) errors.push_back("oracle.min_pts: must be at least 1");
    }
  }

  if (root.contains("scoring")) {
    const auto& s = root["scoring"];
    if (!s.is_object()) {
      errors.push_back("scoring: expected an object");
    } else {
      check_keys(s, "scoring", {"rouge_threshold"}, errors);
      read_double(s, "scoring", "rouge_threshold", cfg.rouge_threshold, errors);
      if (cfg.rouge_threshold <= 0.0 || cfg.rouge_threshold > 1.0) {
        errors.push_back("scoring.rouge_threshold: must lie in (0, 1]");
      }
    }
  }

  if (root.contains("sweep")) {
    const auto& s = root["sweep"];
    if (!s.is_object()) {
      errors.push_back("sweep: expected an object");
    } else {
      check_keys(s, "sweep",
                 {"include_none", "include_paraphrase", "sigmas", "mmr_lambdas",
                  "summarize_budgets", "attacks", "seeds"},
                 errors);
      read_bool(s, "sweep", "include_none", cfg.sweep.include_none, errors);
      read_bool(s, "sweep", "include_paraphrase", cfg.sweep.include_paraphrase, errors);
      if (s.contains("sigmas")) {
        if (!s["sigmas"].is_array()) {
          errors.push_back("sweep.sigmas: expected an array of numbers");
        } else {
          for (const auto& v : s["sigmas"]) {
            if (!v.is_number() || v.get<double>() < 0.0) {
              errors.push_back("sweep.sigmas: entries must be non-negative numbers");
              break;
            }
            cfg.sweep.sigmas.push_back(v.get<double>());
          }
        }
      }
      if (s.contains("mmr_lambdas")) {
        if (!s["mmr_lambdas"].is_array()) {
          errors.push_back("sweep.mmr_lambdas: expected an array of numbers");
        } else {
          for (const auto& v : s["mmr_lambdas"]) {
            if (!v.is_number() || v.get<double>() < 0.0 || v.get<double>() > 1.0) {
              errors.push_back("sweep.mmr_lambdas: entries must lie in [0, 1]");
              break;
            }
            cfg.sweep.mmr_lambdas.push_back(v.get<double>());
          }
        }
      }
      if (s.contains("summarize_budgets")) {
        if (!s["summarize_budgets"].is_array()) {
          errors.push_back("sweep.summarize_budgets: expected an array of integers");
        } else {
          for (const auto& v : s["summarize_budgets"]) {
            if (!v.is_number_integer() || v.get<int64_t>() < 1) {
              errors.push_back("sweep.summarize_budgets: entries must be integers >= 1");
              break;
            }
            cfg.sweep.summarize_budgets.push_back(v.get<size_t>());
          }
        }
      }
      if (s.contains("attacks")) {
        if (!s["attacks"].is_array()) {
          errors.push_back("sweep.attacks: expected an array of strategy names");
        } else {
          cfg.sweep_attacks.clear();
          for (const auto& v : s["attacks"]) {
            const auto strategy =
                v.is_string() ? detail::strategy_from_name(v.get<std::string>())
                              : std::nullopt;
            if (!strategy) {
              errors.push_back(
                  "sweep.attacks: entries must be 'adaptive', 'random' or 'static'");
              break;
            }
            cfg.sweep_attacks.push_back(*strategy);
          }
          if (cfg.sweep_attacks.empty()) {
            errors.push_back("sweep.attacks: must not be empty");
          }
        }
      }
      if (s.contains("seeds")) {
        if (!s["seeds"].is_array()) {
          errors.push_back("sweep.seeds: expected an array of integers");
        } else {
          cfg.sweep_seeds.clear();
          for (const auto& v : s["seeds"]) {
            if (!v.is_number_unsigned() &&
                !(v.is_number_integer() && v.get<int64_t>() >= 0)) {
              errors.push_back("sweep.seeds: entries must be non-negative integers");
              break;
            }
            cfg.sweep_seeds.push_back(v.get<uint64_t>());
          }
          if (cfg.sweep_seeds.empty()) errors.push_back("sweep.seeds: must not be empty");
        }
      }
    }
  }

  return cfg;
}

inline nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return doc;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  const nlohmann::json doc = load_json_file(path);
  std::vector<std::string> errors;
  ExperimentConfig cfg = parse_experiment_config(doc, errors);
  if (!errors.empty()) {
    std::string message = "invalid config " + path + ":";
    for (const auto& e : errors) {
      message += "\n  - " + e;
    }
    throw ConfigError(message);
  }
  return cfg;
}

}  // namespace ragleak
