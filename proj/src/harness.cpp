#include "tt/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace tt {

namespace {

using nlohmann::json;

double now_ms() {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

AttnMode attention_mode(const std::string& s) {
  if (s == "stripe") return AttnMode::Stripe;
  if (s == "full") return AttnMode::Full;
  throw ConfigError("attention must be 'stripe' or 'full', got '" + s + "'");
}

WrapMode wrap_mode(const std::string& s) {
  if (s == "flattened") return WrapMode::Flattened;
  if (s == "torus") return WrapMode::Torus;
  throw ConfigError("wrap must be 'flattened' or 'torus', got '" + s + "'");
}

Task task_mode(const std::string& s) {
  if (s == "aste") return Task::Aste;
  if (s == "aope") return Task::Aope;
  throw ConfigError("task must be 'aste' or 'aope', got '" + s + "'");
}

}  // namespace

void RunConfig::validate() const { model_config().validate(); }

ModelConfig RunConfig::model_config() const {
  ModelConfig mc;
  mc.encoder.vocab_size = vocab_size;
  mc.encoder.d = d;
  mc.encoder.d_bilinear = d_bilinear > 0 ? d_bilinear : default_d_bilinear(d);
  mc.encoder.d_prime = d_prime;
  mc.tt.num_layers = num_layers;
  mc.tt.d_prime = d_prime;
  mc.tt.heads = heads;
  mc.tt.ffn_width = ffn_width > 0 ? ffn_width : 4 * d_prime;
  mc.tt.b = b;
  mc.tt.w = w;
  mc.tt.loop_shift_enabled = loop_shift;
  mc.tt.attention = attention_mode(attention);
  mc.tt.wrap = wrap_mode(wrap);
  mc.tt.per_channel_gate = per_channel_gate;
  mc.decoder.d_prime = d_prime;
  mc.decoder.task = task_mode(task);
  mc.decoder.positive_weight = positive_weight;
  mc.decoder.max_candidates = max_candidates;
  mc.bypass_tt = bypass_tt;
  if (lr <= 0.0) throw ConfigError("lr must be positive");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  return mc;
}

AdamwConfig RunConfig::adamw_config() const {
  AdamwConfig ac;
  ac.lr = lr;
  ac.beta1 = beta1;
  ac.beta2 = beta2;
  ac.eps = adam_eps;
  ac.weight_decay = weight_decay;
  return ac;
}

namespace {

// single source of truth for the JSON/flag field names
template <typename Cfg, typename Fn>
void for_each_field(Cfg& c, Fn&& fn) {
  fn("d", c.d);
  fn("d-bilinear", c.d_bilinear);
  fn("d-prime", c.d_prime);
  fn("heads", c.heads);
  fn("ffn-width", c.ffn_width);
  fn("num-layers", c.num_layers);
  fn("b", c.b);
  fn("w", c.w);
  fn("attention", c.attention);
  fn("loop-shift", c.loop_shift);
  fn("wrap", c.wrap);
  fn("per-channel-gate", c.per_channel_gate);
  fn("bypass-tt", c.bypass_tt);
  fn("vocab-size", c.vocab_size);
  fn("task", c.task);
  fn("positive-weight", c.positive_weight);
  fn("max-candidates", c.max_candidates);
  fn("lr", c.lr);
  fn("beta1", c.beta1);
  fn("beta2", c.beta2);
  fn("adam-eps", c.adam_eps);
  fn("weight-decay", c.weight_decay);
  fn("epochs", c.epochs);
  fn("batch-size", c.batch_size);
  fn("seed", c.seed);
  fn("corpus", c.corpus);
  fn("corpus-format", c.corpus_format);
  fn("checkpoint", c.checkpoint);
  fn("checkpoint-out", c.checkpoint_out);
  fn("log-out", c.log_out);
  fn("csv-out", c.csv_out);
}

}  // namespace

std::string RunConfig::to_json() const {
  json j = json::object();
  for_each_field(*this, [&j](const char* name, const auto& value) { j[name] = value; });
  return j.dump();
}

RunConfig RunConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config JSON must be an object");
  RunConfig cfg;
  json seen = json::object();
  for_each_field(cfg, [&](const char* name, auto& value) {
    seen[name] = true;
    if (!j.contains(name)) return;
    try {
      j.at(name).get_to(value);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config field '") + name + "': " + e.what());
    }
  });
  for (const auto& [key, _] : j.items())
    if (!seen.contains(key)) throw ConfigError("unknown config field '" + key + "'");
  return cfg;
}

RunConfig RunConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

CorpusFile load_corpus(const RunConfig& cfg) {
  if (cfg.corpus.empty()) throw ConfigError("no corpus path given");
  std::string fmt = cfg.corpus_format;
  if (fmt == "auto") {
    const bool json_ext = cfg.corpus.ends_with(".jsonl") || cfg.corpus.ends_with(".json");
    fmt = json_ext ? "jsonl" : "hash";
  }
  if (fmt == "jsonl") return load_jsonl(cfg.corpus);
  if (fmt == "hash") return load_hash_format(cfg.corpus);
  throw ConfigError("corpus-format must be auto, jsonl or hash, got '" + fmt + "'");
}

Split split_of_index(size_t index) {
  const uint64_t h = splitmix64(static_cast<uint64_t>(index)) % 10;
  if (h < 8) return Split::Train;
  return h == 8 ? Split::Dev : Split::Test;
}

std::vector<size_t> split_indices(const CorpusFile& corpus, Split split) {
  std::vector<size_t> out;
  for (size_t i = 0; i < corpus.size(); ++i)
    if (split_of_index(i) == split) out.push_back(i);
  return out;
}

// ---- checkpoints ----------------------------------------------------------------

namespace {

template <typename T>
void write_pod(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError("truncated checkpoint: " + path);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const RunConfig& cfg, const ParameterStore& store) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic) - 1);
  const std::string header = cfg.to_json();
  write_pod<uint64_t>(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  write_pod<uint64_t>(out, store.size());
  for (const Parameter& p : store.items()) {
    write_pod<uint32_t>(out, static_cast<uint32_t>(p.id.size()));
    out.write(p.id.data(), static_cast<std::streamsize>(p.id.size()));
    write_pod<uint32_t>(out, static_cast<uint32_t>(p.value.rank()));
    for (Index d : p.value.shape()) write_pod<int64_t>(out, static_cast<int64_t>(d));
    out.write(reinterpret_cast<const char*>(p.value.data()),
              static_cast<std::streamsize>(p.value.size() * sizeof(double)));
  }
  if (!out) throw DataError("failed writing checkpoint: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  char magic[sizeof(kCheckpointMagic) - 1];
  in.read(magic, sizeof(magic));
  if (!in || std::string(magic, sizeof(magic)) != kCheckpointMagic)
    throw DataError("not a checkpoint file (bad magic): " + path);
  const uint64_t header_len = read_pod<uint64_t>(in, path);
  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw DataError("truncated checkpoint: " + path);
  LoadedCheckpoint ckpt;
  ckpt.config = RunConfig::from_json(header);
  const uint64_t count = read_pod<uint64_t>(in, path);
  for (uint64_t i = 0; i < count; ++i) {
    const uint32_t id_len = read_pod<uint32_t>(in, path);
    std::string id(id_len, '\0');
    in.read(id.data(), id_len);
    const uint32_t rank = read_pod<uint32_t>(in, path);
    std::vector<Index> shape;
    for (uint32_t r = 0; r < rank; ++r) shape.push_back(static_cast<Index>(read_pod<int64_t>(in, path)));
    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!in) throw DataError("truncated checkpoint: " + path);
    ckpt.params.emplace_back(std::move(id), std::move(t));
  }
  return ckpt;
}

void apply_checkpoint(Model& model, const LoadedCheckpoint& ckpt) {
  ParameterStore& store = model.store();
  if (ckpt.params.size() != store.size())
    throw ConfigError("checkpoint has " + std::to_string(ckpt.params.size()) +
                      " parameters, model expects " + std::to_string(store.size()));
  for (const auto& [id, tensor] : ckpt.params) {
    Parameter& p = store.at(id);
    if (!p.value.same_shape(tensor))
      throw ConfigError("checkpoint parameter '" + id + "' has shape " +
                        shape_string(tensor.shape()) + ", model expects " +
                        shape_string(p.value.shape()));
    p.value = tensor;
  }
}

// ---- training and evaluation -----------------------------------------------------

Model make_model(const RunConfig& cfg) { return Model(cfg.model_config(), cfg.seed); }

namespace {

std::vector<Tensor> snapshot_params(const ParameterStore& store) {
  std::vector<Tensor> out;
  out.reserve(store.size());
  for (const Parameter& p : store.items()) out.push_back(p.value);
  return out;
}

void restore_params(ParameterStore& store, const std::vector<Tensor>& snap) {
  for (size_t i = 0; i < store.size(); ++i) store.items()[i].value = snap[i];
}

}  // namespace

EvalReport evaluate(Model& model, const CorpusFile& corpus, const std::vector<size_t>& indices,
                    const Vocabulary& vocab, const std::vector<DistanceBucket>& buckets) {
  std::vector<std::vector<Triplet>> predictions;
  std::vector<SentenceRecord> gold;
  predictions.reserve(indices.size());
  gold.reserve(indices.size());
  for (size_t idx : indices) {
    const SentenceRecord& rec = corpus.records.at(idx);
    predictions.push_back(model.predict(vocab.encode(rec)));
    gold.push_back(rec);
  }
  return score_predictions(predictions, gold, model.config().decoder.task == Task::Aope, buckets);
}

EvalReport evaluate_split(Model& model, const CorpusFile& corpus, Split split) {
  const Vocabulary vocab = Vocabulary::from_corpus(corpus);
  return evaluate(model, corpus, split_indices(corpus, split), vocab);
}

TrainResult train(Model& model, const RunConfig& cfg, const CorpusFile& corpus) {
  const Vocabulary vocab = Vocabulary::from_corpus(corpus);
  if (vocab.size() > cfg.vocab_size)
    throw ConfigError("corpus has " + std::to_string(vocab.size()) +
                      " distinct tokens but vocab-size is " + std::to_string(cfg.vocab_size));
  std::vector<size_t> train_idx = split_indices(corpus, Split::Train);
  const std::vector<size_t> dev_idx = split_indices(corpus, Split::Dev);
  const std::vector<size_t> test_idx = split_indices(corpus, Split::Test);
  if (train_idx.empty()) throw ConfigError("corpus has no training sentences after the split");

  // labels and token ids are fixed; cache them
  std::vector<std::vector<int>> ids(corpus.size());
  std::vector<TableLabels> labels(corpus.size());
  for (size_t i = 0; i < corpus.size(); ++i) {
    ids[i] = vocab.encode(corpus.records[i]);
    labels[i] = encode_labels(corpus.records[i]);
  }

  OptimizerState opt(model.store(), cfg.adamw_config());
  Rng shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

  TrainResult result;
  std::vector<Tensor> best = snapshot_params(model.store());
  result.dev_best = evaluate(model, corpus, dev_idx, vocab);
  result.best_epoch = 0;
  FlopLedger cumulative;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double t0 = now_ms();
    std::shuffle(train_idx.begin(), train_idx.end(), shuffle_rng.engine());
    double epoch_loss = 0.0;
    size_t batches = 0;
    for (size_t start = 0; start < train_idx.size(); start += static_cast<size_t>(cfg.batch_size)) {
      const size_t stop = std::min(train_idx.size(), start + static_cast<size_t>(cfg.batch_size));
      const double inv = 1.0 / static_cast<double>(stop - start);
      double batch_loss = 0.0;
      for (size_t k = start; k < stop; ++k) {
        const size_t si = train_idx[k];
        Graph g;
        Model::SentenceLoss loss = model.sentence_loss(g, ids[si], labels[si], &cumulative);
        batch_loss += loss.total.value()[0];
        g.backward(scale(loss.total, inv));
      }
      adamw_step(model.store(), opt);
      epoch_loss += batch_loss * inv;
      ++batches;
    }
    epoch_loss /= static_cast<double>(batches);

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = epoch_loss;
    log.dev = evaluate(model, corpus, dev_idx, vocab);
    log.wall_ms = now_ms() - t0;
    log.ledger = cumulative;
    if (log.dev.triplet.f1 > result.dev_best.triplet.f1) {
      result.dev_best = log.dev;
      result.best_epoch = epoch;
      best = snapshot_params(model.store());
    }
    std::ostringstream line;
    line << "epoch " << epoch << " train_loss=" << epoch_loss << " dev_f1=" << log.dev.triplet.f1
         << " dev_em=" << log.dev.sentence_exact_match_rate << " wall_ms=" << log.wall_ms
         << " score_macs=" << cumulative.score_macs;
    result.log_lines.push_back(line.str());
    result.epochs.push_back(std::move(log));
  }

  restore_params(model.store(), best);
  result.test = evaluate(model, corpus, test_idx, vocab);
  result.total_ledger = cumulative;
  std::ostringstream fin;
  fin << "best_epoch=" << result.best_epoch << " dev_f1=" << result.dev_best.triplet.f1
      << " test_f1=" << result.test.triplet.f1;
  result.log_lines.push_back(fin.str());
  return result;
}

// ---- complexity benchmark ----------------------------------------------------------

std::vector<BenchRow> bench(const RunConfig& cfg, const std::vector<BenchPoint>& sweep, int reps) {
  if (reps < 1) throw ConfigError("bench needs at least one repetition");
  std::vector<BenchRow> rows;
  for (const BenchPoint& pt : sweep) {
    if (pt.n < 1 || pt.b < 1 || pt.n % pt.b != 0)
      throw ConfigError("bench point n=" + std::to_string(pt.n) + " b=" + std::to_string(pt.b) +
                        " is not a padded multiple");
    StripeConfig scfg{pt.b, pt.w, cfg.heads, wrap_mode(cfg.wrap)};
    scfg.validate(pt.n / pt.b, cfg.d_prime);
    ParameterStore store(cfg.seed);
    const Index dp = cfg.d_prime;
    Parameter& wq = store.add_uniform("wq", {dp, dp});
    Parameter& bq = store.add_zeros("bq", {dp});
    Parameter& wk = store.add_uniform("wk", {dp, dp});
    Parameter& bk = store.add_zeros("bk", {dp});
    Parameter& wv = store.add_uniform("wv", {dp, dp});
    Parameter& bv = store.add_zeros("bv", {dp});
    Parameter& wo = store.add_uniform("wo", {dp, dp});
    Parameter& bo = store.add_zeros("bo", {dp});
    Tensor x({pt.n, pt.n, dp});
    Rng rng(cfg.seed + static_cast<uint64_t>(pt.n) * 1000003ULL + static_cast<uint64_t>(pt.b) * 101ULL +
            static_cast<uint64_t>(pt.w));
    for (Index i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1.0, 1.0);

    for (AttnMode mode : {AttnMode::Stripe, AttnMode::Full}) {
      FlopLedger ledger;
      std::vector<double> times;
      times.reserve(static_cast<size_t>(reps));
      for (int rep = 0; rep < reps; ++rep) {
        Graph g;
        AttentionParams vars;
        vars.wq = g.param(wq);
        vars.bq = g.param(bq);
        vars.wk = g.param(wk);
        vars.bk = g.param(bk);
        vars.wv = g.param(wv);
        vars.bv = g.param(bv);
        vars.wo = g.param(wo);
        vars.bo = g.param(bo);
        Var input = g.leaf(x);
        FlopLedger* lp = rep == 0 ? &ledger : nullptr;
        const double t0 = now_ms();
        if (mode == AttnMode::Stripe) stripe_attention_forward(input, vars, scfg, lp);
        else full_attention_forward(input, vars, cfg.heads, nullptr, lp);
        times.push_back(now_ms() - t0);
      }
      std::sort(times.begin(), times.end());
      BenchRow row;
      row.mode = mode == AttnMode::Stripe ? "stripe" : "full";
      row.n = pt.n;
      row.b = pt.b;
      row.w = pt.w;
      row.heads = cfg.heads;
      row.d_prime = cfg.d_prime;
      row.score_macs = ledger.score_macs;
      row.value_macs = ledger.value_macs;
      row.median_ms = times[times.size() / 2];
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream os;
  os << "mode,n,b,w,heads,d_prime,score_macs,value_macs,median_ms\n";
  for (const BenchRow& r : rows)
    os << r.mode << ',' << r.n << ',' << r.b << ',' << r.w << ',' << r.heads << ',' << r.d_prime
       << ',' << r.score_macs << ',' << r.value_macs << ',' << r.median_ms << "\n";
  return os.str();
}

// ---- ablation -------------------------------------------------------------------------

namespace {

FlopLedger probe_ledger(Model& model, const CorpusFile& corpus, const Vocabulary& vocab) {
  size_t longest = 0;
  for (size_t i = 0; i < corpus.size(); ++i)
    if (corpus.records[i].tokens.size() > corpus.records[longest].tokens.size()) longest = i;
  FlopLedger ledger;
  if (!corpus.records.empty()) model.predict(vocab.encode(corpus.records[longest]), &ledger);
  return ledger;
}

}  // namespace

std::vector<AblationRow> ablate(const RunConfig& cfg, const CorpusFile& corpus) {
  struct VariantSpec {
    const char* name;
    RunConfig config;
  };
  std::vector<VariantSpec> variants;
  {
    RunConfig full_model = cfg;
    variants.push_back({"full-model", full_model});
    RunConfig no_shift = cfg;
    no_shift.loop_shift = false;
    variants.push_back({"no-loop-shift", no_shift});
    RunConfig no_sa = cfg;
    no_sa.attention = "full";
    variants.push_back({"full-attention-with-shift", no_sa});
    RunConfig normal = cfg;
    normal.attention = "full";
    normal.loop_shift = false;
    variants.push_back({"normal-layers", normal});
    RunConfig bypass = cfg;
    bypass.bypass_tt = true;
    variants.push_back({"no-tt-encoder", bypass});
  }
  const Vocabulary vocab = Vocabulary::from_corpus(corpus);
  std::vector<AblationRow> rows;
  for (const VariantSpec& v : variants) {
    Model model = make_model(v.config);
    TrainResult res = train(model, v.config, corpus);
    AblationRow row;
    row.name = v.name;
    row.parameter_count = model.parameter_count();
    row.probe_ledger = probe_ledger(model, corpus, vocab);
    row.test = res.test;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << "variant,parameters,probe_score_macs,probe_value_macs,test_f1,test_exact_match\n";
  for (const AblationRow& r : rows)
    os << r.name << ',' << r.parameter_count << ',' << r.probe_ledger.score_macs << ','
       << r.probe_ledger.value_macs << ',' << r.test.triplet.f1 << ','
       << r.test.sentence_exact_match_rate << "\n";
  return os.str();
}

}  // namespace tt
