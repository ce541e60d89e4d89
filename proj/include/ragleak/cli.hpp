#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ragleak/config.hpp"
#include "ragleak/corpus.hpp"
#include "ragleak/eval.hpp"

namespace ragleak::cli {

namespace detail {

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << content;
  if (!out) throw IoError("write failed for " + path);
}

inline void ensure_directory(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) throw IoError("cannot create directory " + path + ": " + ec.message());
}

inline std::vector<Chunk> load_or_generate_corpus(const ExperimentConfig& cfg) {
  if (!cfg.corpus_path.empty()) return ingest_jsonl(cfg.corpus_path);
  return generate_corpus(cfg.corpus_spec);
}

inline ScoreOptions score_options(const ExperimentConfig& cfg) {
  ScoreOptions opts;
  opts.rouge_threshold = cfg.rouge_threshold;
  opts.dedup_threshold = cfg.attack.dedup_threshold;
  opts.min_candidate_tokens = cfg.attack.min_candidate_tokens;
  opts.embedder = cfg.embedder;
  return opts;
}

inline OracleReference to_reference(const OracleTopics& oracle) {
  return OracleReference{oracle.anchors, oracle.probabilities};
}

// "label=path" picks an explicit label; a bare path is labeled by its stem.
inline std::pair<std::string, std::string> split_labeled_path(const std::string& arg) {
  const size_t eq = arg.find('=');
  if (eq != std::string::npos && eq > 0) {
    return {arg.substr(0, eq), arg.substr(eq + 1)};
  }
  return {std::filesystem::path(arg).stem().string(), arg};
}

inline int run_gen_corpus(const std::string& config_path, const std::string& out_path) {
  ExperimentConfig cfg;
  if (!config_path.empty()) cfg = load_experiment_config(config_path);
  if (!cfg.corpus_path.empty()) {
    throw ConfigError("gen-corpus needs a generation spec, but corpus.path is set");
  }
  const std::vector<Chunk> chunks = generate_corpus(cfg.corpus_spec);
  write_jsonl(chunks, out_path);
  std::cout << "wrote " << chunks.size() << " chunks to " << out_path << "\n";
  return 0;
}

inline int run_attack_command(const std::string& config_path, const std::string& out_dir,
                              bool verbose) {
  ExperimentConfig cfg;
  if (!config_path.empty()) cfg = load_experiment_config(config_path);
  ensure_directory(out_dir);

  const std::vector<Chunk> chunks = load_or_generate_corpus(cfg);
  const VectorStore store = VectorStore::build_index(to_store_inputs(chunks), cfg.embedder);

  OracleReference reference;
  const bool use_oracle = cfg.oracle_enabled || cfg.attack.oracle_guided;
  if (use_oracle) {
    reference = to_reference(
        oracle_topics(chunks, cfg.oracle_eps, cfg.oracle_min_pts, cfg.embedder));
  }

  DefenseConfig defense = cfg.defense;
  defense.paraphrase_seed = derive_seed(cfg.attack.seed, "paraphrase-defense");
  defense.perturb_seed = derive_seed(cfg.attack.seed, "gaussian-defense");

  AttackTranscript transcript;
  if (defense.gaussian_sigma > 0.0) {
    const VectorStore noised =
        apply_gaussian_perturbation(store, defense.gaussian_sigma, defense.perturb_seed);
    transcript = run_attack_loop(noised, cfg.attack, cfg.responder, defense,
                                 cfg.strategy, use_oracle ? &reference : nullptr);
  } else {
    transcript = run_attack_loop(store, cfg.attack, cfg.responder, defense,
                                 cfg.strategy, use_oracle ? &reference : nullptr);
  }

  const std::string stem = transcript.attack + "_seed" + std::to_string(cfg.attack.seed);
  const std::string transcript_path =
      (std::filesystem::path(out_dir) / ("transcript_" + stem + ".jsonl")).string();
  write_transcript(transcript, transcript_path);

  const LeakReport report = score_transcript(transcript, chunks, score_options(cfg));

  nlohmann::ordered_json metrics;
  metrics["attack"] = transcript.attack;
  metrics["seed"] = cfg.attack.seed;
  metrics["rounds"] = transcript.rounds.size();
  metrics["lc"] = report.lc;
  metrics["ulc"] = report.ulc;
  metrics["tlg"] = report.tlg;
  metrics["asr"] = report.asr;
  metrics["rouge_mean"] = report.rouge_mean;
  if (!transcript.rounds.empty() && transcript.rounds.back().oracle_gap_l1) {
    metrics["final_oracle_gap_l1"] = *transcript.rounds.back().oracle_gap_l1;
  } else {
    metrics["final_oracle_gap_l1"] = nullptr;
  }
  const std::string metrics_path =
      (std::filesystem::path(out_dir) / ("metrics_" + stem + ".json")).string();
  write_text_file(metrics_path, metrics.dump(2) + "\n");

  if (verbose) {
    for (const auto& r : transcript.rounds) {
      std::cerr << "round " << r.round << ": " << r.new_chunks.size()
                << " new chunks, " << r.pii.size() << " pii hits";
      if (r.oracle_gap_l1) std::cerr << ", gap " << *r.oracle_gap_l1;
      std::cerr << "\n";
    }
  }
  std::cout << "attack=" << transcript.attack << " rounds=" << transcript.rounds.size()
            << " lc=" << report.lc << " ulc=" << report.ulc << " tlg=" << report.tlg
            << " asr=" << format_double(report.asr)
            << " rouge_mean=" << format_double(report.rouge_mean) << "\n";
  return 0;
}

inline int run_report(const std::string& config_path, const std::string& out_dir,
                      const std::vector<std::string>& transcript_args) {
  ExperimentConfig cfg;
  if (!config_path.empty()) cfg = load_experiment_config(config_path);
  ensure_directory(out_dir);

  const std::vector<Chunk> chunks = load_or_generate_corpus(cfg);
  const ScoreOptions opts = score_options(cfg);

  std::vector<std::pair<std::string, AttackTranscript>> transcripts;
  std::vector<std::pair<std::string, LeakReport>> reports;
  for (const auto& arg : transcript_args) {
    auto [label, path] = split_labeled_path(arg);
    AttackTranscript transcript = read_transcript(path, label);
    reports.emplace_back(label, score_transcript(transcript, chunks, opts));
    transcripts.emplace_back(std::move(label), std::move(transcript));
  }

  std::string summary = "label,rounds,lc,ulc,tlg,asr,rouge_mean\n";
  for (size_t i = 0; i < reports.size(); ++i) {
    const auto& [label, report] = reports[i];
    summary += label;
    summary += ',';
    summary += std::to_string(transcripts[i].second.rounds.size());
    summary += ',';
    summary += std::to_string(report.lc);
    summary += ',';
    summary += std::to_string(report.ulc);
    summary += ',';
    summary += std::to_string(report.tlg);
    summary += ',';
    summary += format_double(report.asr);
    summary += ',';
    summary += format_double(report.rouge_mean);
    summary += '\n';
  }

  const std::filesystem::path dir(out_dir);
  write_text_file((dir / "summary.csv").string(), summary);
  write_text_file((dir / "leakage_rounds.csv").string(), rounds_to_csv(reports));
  write_text_file((dir / "oracle_gap.csv").string(), gap_trace_to_csv(transcripts));
  std::cout << "scored " << reports.size() << " transcripts into " << out_dir << "\n";
  return 0;
}

inline int run_sweep_command(const std::string& config_path, const std::string& out_path,
                             const std::vector<uint64_t>& seed_override) {
  ExperimentConfig cfg;
  if (!config_path.empty()) cfg = load_experiment_config(config_path);

  const std::vector<Chunk> chunks = load_or_generate_corpus(cfg);
  const VectorStore store = VectorStore::build_index(to_store_inputs(chunks), cfg.embedder);

  OracleReference reference;
  const OracleReference* reference_ptr = nullptr;
  if (cfg.oracle_enabled) {
    reference = to_reference(
        oracle_topics(chunks, cfg.oracle_eps, cfg.oracle_min_pts, cfg.embedder));
    reference_ptr = &reference;
  }

  const std::vector<uint64_t>& seeds =
      seed_override.empty() ? cfg.sweep_seeds : seed_override;
  const std::vector<DefenseCell> grid = build_defense_grid(cfg.sweep);
  const std::vector<SweepRow> rows =
      run_sweep(store, chunks, cfg.attack, cfg.responder, grid, seeds,
                cfg.sweep_attacks, reference_ptr, score_options(cfg));

  write_text_file(out_path, sweep_to_csv(rows));
  std::cout << "wrote " << rows.size() << " sweep rows to " << out_path << "\n";
  return 0;
}

}  // namespace detail

// Entry point shared by the binary and the tests. Returns the process exit
// code: 0 on success, 2 for bad usage or configuration, 3 for I/O and
// runtime failures.
inline int run(const std::vector<std::string>& args) {
  CLI::App app{"simulator for studying data extraction from retrieval-backed assistants"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path;
  bool verbose = false;
  std::vector<uint64_t> seeds;
  std::vector<std::string> transcript_args;

  auto* gen = app.add_subcommand("gen-corpus", "generate a synthetic corpus as JSONL");
  gen->add_option("--config", config_path, "experiment config (JSON)");
  gen->add_option("--out", out_path, "output JSONL path")->required();

  auto* attack = app.add_subcommand("attack", "run one attack and write its transcript");
  attack->add_option("--config", config_path, "experiment config (JSON)");
  attack->add_option("--out", out_path, "output directory")->required();
  attack->add_flag("--verbose", verbose, "per-round progress on stderr");

  auto* report = app.add_subcommand("report", "score transcripts into CSV tables");
  report->add_option("--config", config_path, "experiment config (JSON)");
  report->add_option("--out", out_path, "output directory")->required();
  report->add_option("transcripts", transcript_args, "transcript files, label=path or path")
      ->required();

  auto* sweep = app.add_subcommand("sweep-defenses", "run the defense grid, write CSV");
  sweep->add_option("--config", config_path, "experiment config (JSON)");
  sweep->add_option("--out", out_path, "output CSV path")->required();
  sweep->add_option("--seeds", seeds, "override sweep seeds")->delimiter(',');

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("ragleak");
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) return detail::run_gen_corpus(config_path, out_path);
    if (attack->parsed()) return detail::run_attack_command(config_path, out_path, verbose);
    if (report->parsed()) return detail::run_report(config_path, out_path, transcript_args);
    if (sweep->parsed()) return detail::run_sweep_command(config_path, out_path, seeds);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}

}  // namespace ragleak::cli
