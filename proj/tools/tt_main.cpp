#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include <CLI11.hpp>

#include "tt/harness.hpp"

namespace {

using namespace tt;

// --config file values become the defaults, explicit flags override them, and
// TT_SEED overrides everything.
RunConfig preload_config(int argc, char** argv) {
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--config") return RunConfig::from_json_file(argv[i + 1]);
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg.rfind("--config=", 0) == 0) return RunConfig::from_json_file(arg.substr(9));
  }
  return RunConfig{};
}

void apply_env_seed(RunConfig& cfg) {
  if (const char* env = std::getenv("TT_SEED")) {
    try {
      cfg.seed = std::stoull(env);
    } catch (const std::exception&) {
      throw ConfigError(std::string("TT_SEED is not an unsigned integer: ") + env);
    }
  }
}

void add_model_flags(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--config", "JSON config file; flags override its values")
      ->type_name("FILE")
      ->check(CLI::ExistingFile);
  cmd->add_option("--d", cfg.d, "token hidden width");
  cmd->add_option("--d-bilinear", cfg.d_bilinear, "biaffine output width (0: ceil(sqrt(d)))");
  cmd->add_option("--d-prime", cfg.d_prime, "table channel width");
  cmd->add_option("--heads", cfg.heads, "attention heads");
  cmd->add_option("--ffn-width", cfg.ffn_width, "feed-forward width (0: 4*d-prime)");
  cmd->add_option("--num-layers", cfg.num_layers, "T-T layers (even)");
  cmd->add_option("--b", cfg.b, "block width");
  cmd->add_option("--w", cfg.w, "window width in blocks (odd)");
  cmd->add_option("--attention", cfg.attention, "stripe | full");
  cmd->add_flag("--loop-shift,!--no-loop-shift", cfg.loop_shift, "cyclic shifts between layers");
  cmd->add_option("--wrap", cfg.wrap, "neighbor wrap: flattened | torus");
  cmd->add_flag("--per-channel-gate", cfg.per_channel_gate, "vector residual gate");
  cmd->add_flag("--bypass-tt", cfg.bypass_tt, "skip the T-T stack (ablation)");
  cmd->add_option("--vocab-size", cfg.vocab_size, "embedding vocabulary size");
  cmd->add_option("--task", cfg.task, "aste | aope");
  cmd->add_option("--positive-weight", cfg.positive_weight, "vertex-cell loss weight");
  cmd->add_option("--max-candidates", cfg.max_candidates, "candidate rectangle cap");
  cmd->add_option("--lr", cfg.lr, "AdamW learning rate");
  cmd->add_option("--beta1", cfg.beta1, "AdamW beta1");
  cmd->add_option("--beta2", cfg.beta2, "AdamW beta2");
  cmd->add_option("--adam-eps", cfg.adam_eps, "AdamW epsilon");
  cmd->add_option("--weight-decay", cfg.weight_decay, "decoupled weight decay");
  cmd->add_option("--epochs", cfg.epochs, "training epochs");
  cmd->add_option("--batch-size", cfg.batch_size, "sentences per optimizer step");
  cmd->add_option("--seed", cfg.seed, "RNG seed (TT_SEED env overrides)");
  cmd->add_option("--corpus", cfg.corpus, "corpus file");
  cmd->add_option("--corpus-format", cfg.corpus_format, "auto | jsonl | hash");
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write: " + path);
  out << text;
}

int run_train(RunConfig cfg) {
  apply_env_seed(cfg);
  cfg.validate();
  const CorpusFile corpus = load_corpus(cfg);
  Model model = make_model(cfg);
  TrainResult res = train(model, cfg, corpus);
  std::ostringstream log;
  for (const std::string& line : res.log_lines) log << line << "\n";
  std::cout << log.str();
  std::cout << "test report:\n" << res.test.to_string();
  if (!cfg.checkpoint_out.empty()) {
    save_checkpoint(cfg.checkpoint_out, cfg, model.store());
    std::cout << "checkpoint written to " << cfg.checkpoint_out << "\n";
  }
  if (!cfg.log_out.empty()) write_text(cfg.log_out, log.str());
  return 0;
}

int run_eval(RunConfig cfg, const std::string& split_name) {
  apply_env_seed(cfg);
  if (cfg.checkpoint.empty()) throw ConfigError("eval needs --checkpoint");
  const LoadedCheckpoint ckpt = load_checkpoint(cfg.checkpoint);
  RunConfig model_cfg = ckpt.config;
  model_cfg.corpus = cfg.corpus.empty() ? model_cfg.corpus : cfg.corpus;
  model_cfg.corpus_format = cfg.corpus_format;
  model_cfg.validate();
  Model model = make_model(model_cfg);
  apply_checkpoint(model, ckpt);
  const CorpusFile corpus = load_corpus(model_cfg);
  EvalReport report;
  if (split_name == "all") {
    std::vector<size_t> all(corpus.size());
    for (size_t i = 0; i < all.size(); ++i) all[i] = i;
    report = evaluate(model, corpus, all, Vocabulary::from_corpus(corpus));
  } else {
    Split split = Split::Test;
    if (split_name == "train") split = Split::Train;
    else if (split_name == "dev") split = Split::Dev;
    else if (split_name != "test") throw ConfigError("split must be train, dev, test or all");
    report = evaluate_split(model, corpus, split);
  }
  std::cout << report.to_string();
  return 0;
}

std::vector<int> parse_int_list(const std::string& csv, const char* what) {
  std::vector<int> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw ConfigError(std::string("bad ") + what + " list entry: '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError(std::string("empty ") + what + " list");
  return out;
}

int run_bench(RunConfig cfg, const std::string& ns, const std::string& bs, const std::string& ws,
              int reps) {
  apply_env_seed(cfg);
  std::vector<BenchPoint> sweep;
  for (int n : parse_int_list(ns, "n"))
    for (int b : parse_int_list(bs, "b"))
      for (int w : parse_int_list(ws, "w")) {
        if (n % b != 0 || w % 2 == 0 || w > n / b) continue;  // skip invalid combinations
        sweep.push_back(BenchPoint{n, b, w});
      }
  if (sweep.empty()) throw ConfigError("bench sweep is empty after filtering invalid points");
  const std::vector<BenchRow> rows = bench(cfg, sweep, reps);
  const std::string csv = bench_csv(rows);
  if (!cfg.csv_out.empty()) {
    write_text(cfg.csv_out, csv);
    std::cout << "wrote " << rows.size() << " rows to " << cfg.csv_out << "\n";
  } else {
    std::cout << csv;
  }
  return 0;
}

int run_ablate(RunConfig cfg) {
  apply_env_seed(cfg);
  cfg.validate();
  const CorpusFile corpus = load_corpus(cfg);
  const std::vector<AblationRow> rows = ablate(cfg, corpus);
  const std::string table = ablation_table(rows);
  std::cout << table;
  if (!cfg.csv_out.empty()) write_text(cfg.csv_out, table);
  return 0;
}

int run_gen_data(const SynthConfig& synth, const std::string& out_path, const std::string& format) {
  const CorpusFile corpus = generate_synthetic(synth);
  if (out_path.empty()) throw ConfigError("gen-data needs --out");
  if (format == "jsonl") write_jsonl(corpus, out_path);
  else if (format == "hash") write_hash_format(corpus, out_path);
  else throw ConfigError("gen-data format must be jsonl or hash");
  std::cout << "wrote " << corpus.size() << " sentences to " << out_path << "\n";
  return 0;
}

std::vector<DistanceBucket> parse_buckets(const std::string& text) {
  // "1-3:1.0,4-6:0.5,10+:2" -> {lo,hi,weight}; weight defaults to 1
  std::vector<DistanceBucket> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    DistanceBucket b;
    std::string range = item;
    const size_t colon = item.find(':');
    if (colon != std::string::npos) {
      range = item.substr(0, colon);
      b.weight = std::stod(item.substr(colon + 1));
    }
    const size_t dash = range.find('-');
    try {
      if (dash != std::string::npos) {
        b.lo = std::stoi(range.substr(0, dash));
        b.hi = std::stoi(range.substr(dash + 1));
      } else if (!range.empty() && range.back() == '+') {
        b.lo = std::stoi(range.substr(0, range.size() - 1));
        b.hi = std::numeric_limits<int>::max();
      } else {
        b.lo = b.hi = std::stoi(range);
      }
    } catch (const std::exception&) {
      throw ConfigError("bad distance bucket '" + item + "' (want lo-hi[:weight])");
    }
    out.push_back(b);
  }
  if (out.empty()) throw ConfigError("empty distance bucket list");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"table-tagging aspect sentiment triplet extractor"};
  app.require_subcommand(1);

  RunConfig cfg;
  try {
    cfg = preload_config(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  }

  CLI::App* train_cmd = app.add_subcommand("train", "train a model and save the best checkpoint");
  add_model_flags(train_cmd, cfg);
  train_cmd->add_option("--checkpoint-out", cfg.checkpoint_out, "best-checkpoint output path");
  train_cmd->add_option("--log-out", cfg.log_out, "training log output path");

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a corpus split");
  std::string eval_split = "test";
  add_model_flags(eval_cmd, cfg);
  eval_cmd->add_option("--checkpoint", cfg.checkpoint, "checkpoint to evaluate")->required();
  eval_cmd->add_option("--split", eval_split, "train | dev | test | all");

  CLI::App* bench_cmd = app.add_subcommand("bench", "attention complexity benchmark, CSV output");
  std::string bench_n = "8,16", bench_b = "2,4", bench_w = "1,3";
  int bench_reps = 5;
  add_model_flags(bench_cmd, cfg);
  bench_cmd->add_option("--n-values", bench_n, "comma-separated padded table sides");
  bench_cmd->add_option("--b-values", bench_b, "comma-separated block widths");
  bench_cmd->add_option("--w-values", bench_w, "comma-separated window widths");
  bench_cmd->add_option("--reps", bench_reps, "timing repetitions per point");
  bench_cmd->add_option("--csv-out", cfg.csv_out, "CSV output path (default: stdout)");

  CLI::App* ablate_cmd = app.add_subcommand("ablate", "train and compare the ablation variants");
  add_model_flags(ablate_cmd, cfg);
  ablate_cmd->add_option("--csv-out", cfg.csv_out, "comparison table output path");

  CLI::App* gen_cmd = app.add_subcommand("gen-data", "generate a synthetic corpus");
  SynthConfig synth;
  std::string gen_out, gen_format = "jsonl", gen_buckets, gen_cue = "opinion";
  gen_cmd->add_option("--num-sentences", synth.num_sentences, "sentences to generate");
  gen_cmd->add_option("--vocab-size", synth.vocab_size, "token id space");
  gen_cmd->add_option("--len-lo", synth.len_lo, "min sentence length");
  gen_cmd->add_option("--len-hi", synth.len_hi, "max sentence length");
  gen_cmd->add_option("--triplets-lo", synth.triplets_lo, "min triplets per sentence");
  gen_cmd->add_option("--triplets-hi", synth.triplets_hi, "max triplets per sentence");
  gen_cmd->add_option("--distance-buckets", gen_buckets, "lo-hi[:weight],... aspect-opinion gaps");
  gen_cmd->add_option("--multiword-p", synth.multiword_p, "multi-word span probability");
  gen_cmd->add_option("--cue", gen_cue, "polarity signal: opinion | trailing");
  gen_cmd->add_option("--seed", synth.seed, "generator seed (TT_SEED env overrides)");
  gen_cmd->add_option("--out", gen_out, "output corpus path")->required();
  gen_cmd->add_option("--format", gen_format, "jsonl | hash");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) return app.exit(e);
    app.exit(e);
    return 2;
  }

  try {
    if (train_cmd->parsed()) return run_train(cfg);
    if (eval_cmd->parsed()) return run_eval(cfg, eval_split);
    if (bench_cmd->parsed()) return run_bench(cfg, bench_n, bench_b, bench_w, bench_reps);
    if (ablate_cmd->parsed()) return run_ablate(cfg);
    if (gen_cmd->parsed()) {
      if (!gen_buckets.empty()) synth.buckets = parse_buckets(gen_buckets);
      if (gen_cue == "trailing") synth.cue = CueMode::Trailing;
      else if (gen_cue != "opinion") throw ConfigError("cue must be 'opinion' or 'trailing'");
      if (const char* env = std::getenv("TT_SEED")) synth.seed = std::stoull(env);
      return run_gen_data(synth, gen_out, gen_format);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
