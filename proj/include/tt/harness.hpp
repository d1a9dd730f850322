#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tt/adamw.hpp"
#include "tt/data.hpp"
#include "tt/metrics.hpp"
#include "tt/model.hpp"

namespace tt {

// Flat run configuration mirrored by the CLI flags (kebab-case) and the JSON
// config file. Desk-scale defaults.
struct RunConfig {
  // model
  int d = 32;
  int d_bilinear = 0;  // 0 -> ceil(sqrt(d))
  int d_prime = 48;
  int heads = 4;
  int ffn_width = 0;  // 0 -> 4*d_prime
  int num_layers = 2;
  int b = 2;
  int w = 3;
  std::string attention = "stripe";  // stripe | full
  bool loop_shift = true;
  std::string wrap = "flattened";  // flattened | torus
  bool per_channel_gate = false;
  bool bypass_tt = false;
  int vocab_size = 200;
  std::string task = "aste";  // aste | aope
  double positive_weight = 1.0;
  int max_candidates = 512;
  // optimizer
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.01;
  int epochs = 15;
  int batch_size = 4;
  uint64_t seed = 42;
  // paths
  std::string corpus;
  std::string corpus_format = "auto";  // auto | jsonl | hash
  std::string checkpoint;              // input checkpoint (eval)
  std::string checkpoint_out;          // output checkpoint (train)
  std::string log_out;
  std::string csv_out;

  void validate() const;
  ModelConfig model_config() const;
  AdamwConfig adamw_config() const;

  std::string to_json() const;
  static RunConfig from_json(const std::string& text);
  static RunConfig from_json_file(const std::string& path);
};

// ---- corpus plumbing -----------------------------------------------------------

// Loads by configured format; "auto" picks jsonl for *.jsonl / *.json paths
// and the hash format otherwise.
CorpusFile load_corpus(const RunConfig& cfg);

enum class Split : uint8_t { Train = 0, Dev = 1, Test = 2 };

// Deterministic 80/10/10 split by hash of the record index; independent of
// model seed so the same corpus always splits the same way.
Split split_of_index(size_t index);
std::vector<size_t> split_indices(const CorpusFile& corpus, Split split);

// ---- checkpoints ----------------------------------------------------------------

inline constexpr char kCheckpointMagic[] = "TTCKPT1";

void save_checkpoint(const std::string& path, const RunConfig& cfg, const ParameterStore& store);

struct LoadedCheckpoint {
  RunConfig config;
  std::vector<std::pair<std::string, Tensor>> params;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

// Copies checkpoint values into the model, verifying ids and shapes.
void apply_checkpoint(Model& model, const LoadedCheckpoint& ckpt);

// ---- training and evaluation -----------------------------------------------------

Model make_model(const RunConfig& cfg);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  EvalReport dev;
  double wall_ms = 0.0;
  FlopLedger ledger;  // cumulative attention MACs so far
};

struct TrainResult {
  std::vector<EpochLog> epochs;
  int best_epoch = 0;  // 0 means the initialization checkpoint
  EvalReport dev_best;
  EvalReport test;
  FlopLedger total_ledger;
  std::vector<std::string> log_lines;
};

// Minibatch AdamW on the train split; after each epoch evaluates the dev
// split and keeps the best triplet-F1 parameters, which are restored into the
// model before the final test evaluation.
TrainResult train(Model& model, const RunConfig& cfg, const CorpusFile& corpus);

EvalReport evaluate(Model& model, const CorpusFile& corpus, const std::vector<size_t>& indices,
                    const Vocabulary& vocab,
                    const std::vector<DistanceBucket>& buckets = default_eval_buckets());

// Convenience: evaluate one split of a corpus.
EvalReport evaluate_split(Model& model, const CorpusFile& corpus, Split split);

// ---- complexity benchmark ----------------------------------------------------------

struct BenchPoint {
  int n = 0, b = 0, w = 0;
};

struct BenchRow {
  std::string mode;
  int n = 0, b = 0, w = 0, heads = 0, d_prime = 0;
  uint64_t score_macs = 0;
  uint64_t value_macs = 0;
  double median_ms = 0.0;
};

// One stripe row and one full row per sweep point. MAC counts come from the
// FlopLedger of a single forward pass; the median wall time is over `reps`
// repetitions.
std::vector<BenchRow> bench(const RunConfig& cfg, const std::vector<BenchPoint>& sweep, int reps);

std::string bench_csv(const std::vector<BenchRow>& rows);

// ---- ablation -------------------------------------------------------------------------

struct AblationRow {
  std::string name;
  Index parameter_count = 0;
  FlopLedger probe_ledger;  // one forward pass on the longest corpus sentence
  EvalReport test;
};

// Trains and evaluates the standard variants under one seed and corpus:
// the full model, loop-shift off, full attention with shifts, full attention
// without shifts, and the bypassed relation encoder.
std::vector<AblationRow> ablate(const RunConfig& cfg, const CorpusFile& corpus);

std::string ablation_table(const std::vector<AblationRow>& rows);

}  // namespace tt
