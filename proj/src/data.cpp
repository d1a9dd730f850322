#include "tt/data.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tt/rng.hpp"

namespace tt {

namespace {

using nlohmann::json;

[[noreturn]] void line_error(const std::string& path, size_t line, const std::string& what) {
  throw DataError(path + ":" + std::to_string(line) + ": " + what);
}

void validate_or_rethrow(const SentenceRecord& rec, const std::string& path, size_t line) {
  try {
    validate_record(rec);
  } catch (const DataError& e) {
    line_error(path, line, e.what());
  }
}

}  // namespace

CorpusFile load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file: " + path);
  CorpusFile corpus;
  corpus.format = CorpusFormat::Jsonl;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      line_error(path, lineno, std::string("malformed JSON: ") + e.what());
    }
    SentenceRecord rec;
    try {
      if (!obj.is_object() || !obj.contains("tokens")) throw DataError("missing 'tokens' field");
      rec.tokens = obj.at("tokens").get<std::vector<std::string>>();
      for (const auto& jt : obj.value("triplets", json::array())) {
        Triplet t;
        const auto a = jt.at("aspect").get<std::vector<int>>();
        const auto o = jt.at("opinion").get<std::vector<int>>();
        if (a.size() != 2 || o.size() != 2) throw DataError("span must be a [start, end] pair");
        t.aspect = Span{a[0], a[1]};
        t.opinion = Span{o[0], o[1]};
        t.polarity = polarity_from_name(jt.at("polarity").get<std::string>());
        rec.triplets.push_back(t);
      }
    } catch (const json::exception& e) {
      line_error(path, lineno, std::string("bad record: ") + e.what());
    } catch (const DataError& e) {
      line_error(path, lineno, e.what());
    }
    validate_or_rethrow(rec, path, lineno);
    corpus.records.push_back(std::move(rec));
  }
  return corpus;
}

void write_jsonl(const CorpusFile& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write corpus file: " + path);
  for (const SentenceRecord& rec : corpus.records) {
    json triplets = json::array();
    for (const Triplet& t : rec.triplets)
      triplets.push_back({{"aspect", {t.aspect.start, t.aspect.end}},
                          {"opinion", {t.opinion.start, t.opinion.end}},
                          {"polarity", polarity_name(t.polarity)}});
    json obj = {{"tokens", rec.tokens}, {"triplets", triplets}};
    out << obj.dump() << "\n";
  }
}

namespace {

// Recursive-descent parser for the triplet-list literal used by the
// hash-delimited corpus files, e.g. [([0, 1], [3], 'POS'), ([5], [7], 'NEG')].
class TripletListParser {
 public:
  explicit TripletListParser(const std::string& text) : s_(text) {}

  std::vector<Triplet> parse() {
    std::vector<Triplet> out;
    expect('[');
    skip_ws();
    if (peek() == ']') {
      ++pos_;
      finish();
      return out;
    }
    while (true) {
      out.push_back(parse_tuple());
      skip_ws();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      expect(']');
      finish();
      return out;
    }
  }

 private:
  Triplet parse_tuple() {
    expect('(');
    Span aspect = parse_span();
    expect(',');
    Span opinion = parse_span();
    expect(',');
    Polarity pol = parse_polarity();
    expect(')');
    return Triplet{aspect, opinion, pol};
  }

  Span parse_span() {
    expect('[');
    std::vector<int> idx;
    while (true) {
      idx.push_back(parse_int());
      skip_ws();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      expect(']');
      break;
    }
    for (size_t i = 1; i < idx.size(); ++i)
      if (idx[i] != idx[i - 1] + 1)
        throw DataError("span index list is not contiguous ascending: position " +
                        std::to_string(idx[i]) + " after " + std::to_string(idx[i - 1]));
    return Span{idx.front(), idx.back()};
  }

  Polarity parse_polarity() {
    skip_ws();
    const char quote = peek();
    if (quote != '\'' && quote != '"') throw DataError("expected quoted polarity");
    ++pos_;
    std::string name;
    while (pos_ < s_.size() && s_[pos_] != quote) name += s_[pos_++];
    if (pos_ == s_.size()) throw DataError("unterminated polarity string");
    ++pos_;
    return polarity_from_name(name);
  }

  int parse_int() {
    skip_ws();
    size_t start = pos_;
    if (pos_ < s_.size() && s_[pos_] == '-') ++pos_;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    if (pos_ == start) throw DataError("expected an integer in the triplet literal");
    return std::stoi(s_.substr(start, pos_ - start));
  }

  void expect(char c) {
    skip_ws();
    if (pos_ >= s_.size() || s_[pos_] != c)
      throw DataError(std::string("expected '") + c + "' in triplet literal at offset " +
                      std::to_string(pos_));
    ++pos_;
  }

  void finish() {
    skip_ws();
    if (pos_ != s_.size()) throw DataError("trailing characters after triplet literal");
  }

  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  const std::string& s_;
  size_t pos_ = 0;
};

std::vector<std::string> split_tokens(const std::string& sentence) {
  std::vector<std::string> out;
  std::istringstream iss(sentence);
  std::string tok;
  while (iss >> tok) out.push_back(tok);
  return out;
}

constexpr const char* kHashDelim = "####";

}  // namespace

CorpusFile load_hash_format(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file: " + path);
  CorpusFile corpus;
  corpus.format = CorpusFormat::Hash;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const size_t delim = line.find(kHashDelim);
    if (delim == std::string::npos) line_error(path, lineno, "missing '####' delimiter");
    SentenceRecord rec;
    rec.tokens = split_tokens(line.substr(0, delim));
    try {
      rec.triplets = TripletListParser(line.substr(delim + 4)).parse();
    } catch (const DataError& e) {
      line_error(path, lineno, e.what());
    }
    validate_or_rethrow(rec, path, lineno);
    corpus.records.push_back(std::move(rec));
  }
  return corpus;
}

void write_hash_format(const CorpusFile& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write corpus file: " + path);
  for (const SentenceRecord& rec : corpus.records) {
    std::string sentence;
    for (size_t i = 0; i < rec.tokens.size(); ++i) {
      const std::string& tok = rec.tokens[i];
      if (tok.empty() || tok.find_first_of(" \t") != std::string::npos ||
          tok.find(kHashDelim) != std::string::npos)
        throw DataError("token '" + tok + "' cannot be written in hash format");
      if (i) sentence += ' ';
      sentence += tok;
    }
    out << sentence << kHashDelim << '[';
    for (size_t k = 0; k < rec.triplets.size(); ++k) {
      const Triplet& t = rec.triplets[k];
      if (k) out << ", ";
      out << "([";
      for (int i = t.aspect.start; i <= t.aspect.end; ++i) {
        if (i > t.aspect.start) out << ", ";
        out << i;
      }
      out << "], [";
      for (int i = t.opinion.start; i <= t.opinion.end; ++i) {
        if (i > t.opinion.start) out << ", ";
        out << i;
      }
      out << "], '" << polarity_name(t.polarity) << "')";
    }
    out << "]\n";
  }
}

// ---- synthetic generation ----------------------------------------------------

namespace {

// Vocabulary layout for generated sentences, counted from the top of the id
// range: 3 cue tokens, 3×4 polarity opinion heads, 3 opinion continuations,
// 3 aspect continuations, 6 aspect heads. Everything below is filler, the
// upper three sixths of which are polarity-tinted.
struct SynthVocab {
  int vocab_size;

  explicit SynthVocab(int v) : vocab_size(v) {}

  static constexpr int kSpecials = 3 + 12 + 3 + 3 + 6;

  int cue(Polarity p) const { return vocab_size - 3 + static_cast<int>(p); }
  int opinion_head(Polarity p, int k) const {
    return vocab_size - 15 + static_cast<int>(p) * 4 + k;  // k in [0,4)
  }
  int opinion_cont(int k) const { return vocab_size - 18 + k; }  // k in [0,3)
  int aspect_cont(int k) const { return vocab_size - 21 + k; }
  int aspect_head(int k) const { return vocab_size - 27 + k; }  // k in [0,6)

  int fillers() const { return vocab_size - kSpecials; }
  int neutral_filler(int k) const { return k; }  // k in [0, fillers()/2)
  int tinted_filler(Polarity p, int k) const {
    const int base = fillers() / 2;
    const int band = fillers() / 6;
    return base + static_cast<int>(p) * band + k;  // k in [0, band)
  }
  int neutral_count() const { return fillers() / 2; }
  int tint_band() const { return fillers() / 6; }
};

std::string token_name(int id) { return "w" + std::to_string(id); }

struct GroupPlan {
  Polarity pol = Polarity::Pos;
  int a_len = 1;
  int o_len = 1;
  int dist = 1;
};

int span_sample(Rng& rng, double multiword_p) {
  if (!rng.bernoulli(multiword_p)) return 1;
  return rng.bernoulli(0.3) ? 3 : 2;
}

}  // namespace

void SynthConfig::validate() const {
  if (num_sentences < 0) throw ConfigError("num_sentences must be >= 0");
  if (vocab_size < SynthVocab::kSpecials + 12)
    throw ConfigError("synthetic vocab_size must be at least " +
                      std::to_string(SynthVocab::kSpecials + 12));
  if (len_lo < 2 || len_lo > len_hi) throw ConfigError("invalid sentence length range");
  if (triplets_lo < 1 || triplets_lo > triplets_hi) throw ConfigError("invalid triplet count range");
  if (buckets.empty()) throw ConfigError("at least one distance bucket is required");
  double total_w = 0.0;
  for (const DistanceBucket& b : buckets) {
    if (b.lo < 1 || b.lo > b.hi) throw ConfigError("distance bucket must satisfy 1 <= lo <= hi");
    if (b.weight < 0.0) throw ConfigError("distance bucket weight must be nonnegative");
    total_w += b.weight;
  }
  if (total_w <= 0.0) throw ConfigError("at least one distance bucket needs positive weight");
  if (multiword_p < 0.0 || multiword_p > 1.0) throw ConfigError("multiword probability out of [0,1]");
  const int cue_extra = cue == CueMode::Trailing ? 2 : 0;
  bool any_feasible = false;
  for (const DistanceBucket& b : buckets)
    if (b.weight > 0.0 && b.lo + 1 + cue_extra <= len_hi) any_feasible = true;
  if (!any_feasible)
    throw ConfigError("infeasible synthetic config: no weighted distance bucket fits a sentence of "
                      "length " + std::to_string(len_hi));
}

CorpusFile generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  SynthVocab vocab(cfg.vocab_size);
  Rng rng(cfg.seed);
  const int cue_extra = cfg.cue == CueMode::Trailing ? 2 : 0;
  const int min_group = 2 + cue_extra;
  const int sep = 2;

  CorpusFile corpus;
  corpus.format = CorpusFormat::Synthetic;
  corpus.records.reserve(static_cast<size_t>(cfg.num_sentences));

  for (int si = 0; si < cfg.num_sentences; ++si) {
    const int want = static_cast<int>(rng.uniform_int(cfg.triplets_lo, cfg.triplets_hi));
    std::vector<GroupPlan> groups;
    int used = 0;
    for (int gi = 0; gi < want; ++gi) {
      const int reserve = (want - 1 - gi) * (min_group + sep);
      const int this_sep = gi > 0 ? sep : 0;
      const int budget = cfg.len_hi - used - reserve - this_sep;
      if (budget < min_group) break;
      const int d_max = budget - min_group + 1;
      double total_w = 0.0;
      for (const DistanceBucket& b : cfg.buckets)
        if (b.weight > 0.0 && b.lo <= d_max) total_w += b.weight;
      if (total_w <= 0.0) break;
      double pick = rng.uniform(0.0, total_w);
      const DistanceBucket* chosen = nullptr;
      for (const DistanceBucket& b : cfg.buckets) {
        if (b.weight <= 0.0 || b.lo > d_max) continue;
        pick -= b.weight;
        if (pick <= 0.0 || &b == &cfg.buckets.back()) {
          chosen = &b;
          break;
        }
      }
      if (!chosen) {
        for (const DistanceBucket& b : cfg.buckets)
          if (b.weight > 0.0 && b.lo <= d_max) chosen = &b;
      }
      GroupPlan plan;
      plan.pol = static_cast<Polarity>(rng.uniform_int(0, 2));
      plan.dist = static_cast<int>(rng.uniform_int(chosen->lo, std::min(chosen->hi, d_max)));
      plan.a_len = span_sample(rng, cfg.multiword_p);
      plan.o_len = span_sample(rng, cfg.multiword_p);
      // shrink spans that blow the budget; (1,1) always fits
      while (plan.a_len + plan.o_len + plan.dist - 1 + cue_extra > budget) {
        if (plan.a_len >= plan.o_len && plan.a_len > 1) --plan.a_len;
        else --plan.o_len;
      }
      groups.push_back(plan);
      used += this_sep + plan.a_len + plan.dist - 1 + plan.o_len + cue_extra;
    }
    if (groups.empty())
      throw ConfigError("infeasible synthetic config: could not place a triplet in a sentence of "
                        "length " + std::to_string(cfg.len_hi));

    const int target = static_cast<int>(rng.uniform_int(std::max(used, cfg.len_lo), cfg.len_hi));
    int extra = target - used;
    const int lead = static_cast<int>(rng.uniform_int(0, std::min(extra, 2)));
    extra -= lead;

    SentenceRecord rec;
    auto neutral = [&] { return token_name(vocab.neutral_filler(
        static_cast<int>(rng.uniform_int(0, vocab.neutral_count() - 1)))); };
    auto gap_filler = [&](Polarity p) {
      if (cfg.cue == CueMode::Opinion && rng.bernoulli(0.5))
        return token_name(vocab.tinted_filler(p, static_cast<int>(rng.uniform_int(0, vocab.tint_band() - 1))));
      return neutral();
    };
    for (int i = 0; i < lead; ++i) rec.tokens.push_back(neutral());
    for (size_t gi = 0; gi < groups.size(); ++gi) {
      const GroupPlan& gp = groups[gi];
      if (gi > 0)
        for (int i = 0; i < sep; ++i) rec.tokens.push_back(neutral());
      const int a_start = static_cast<int>(rec.tokens.size());
      rec.tokens.push_back(token_name(vocab.aspect_head(static_cast<int>(rng.uniform_int(0, 5)))));
      for (int i = 1; i < gp.a_len; ++i)
        rec.tokens.push_back(token_name(vocab.aspect_cont(static_cast<int>(rng.uniform_int(0, 2)))));
      const int a_end = static_cast<int>(rec.tokens.size()) - 1;
      for (int i = 0; i < gp.dist - 1; ++i) rec.tokens.push_back(gap_filler(gp.pol));
      const int o_start = static_cast<int>(rec.tokens.size());
      if (cfg.cue == CueMode::Opinion) {
        rec.tokens.push_back(
            token_name(vocab.opinion_head(gp.pol, static_cast<int>(rng.uniform_int(0, 3)))));
      } else {
        const Polarity any = static_cast<Polarity>(rng.uniform_int(0, 2));
        rec.tokens.push_back(
            token_name(vocab.opinion_head(any, static_cast<int>(rng.uniform_int(0, 3)))));
      }
      for (int i = 1; i < gp.o_len; ++i)
        rec.tokens.push_back(token_name(vocab.opinion_cont(static_cast<int>(rng.uniform_int(0, 2)))));
      const int o_end = static_cast<int>(rec.tokens.size()) - 1;
      if (cfg.cue == CueMode::Trailing) {
        rec.tokens.push_back(neutral());
        rec.tokens.push_back(token_name(vocab.cue(gp.pol)));
      }
      rec.triplets.push_back(Triplet{Span{a_start, a_end}, Span{o_start, o_end}, gp.pol});
    }
    for (int i = 0; i < extra; ++i) rec.tokens.push_back(neutral());
    validate_record(rec);
    corpus.records.push_back(std::move(rec));
  }
  return corpus;
}

Vocabulary Vocabulary::from_corpus(const CorpusFile& corpus) {
  Vocabulary v;
  for (const SentenceRecord& rec : corpus.records) {
    for (const std::string& tok : rec.tokens) {
      if (!v.index_.count(tok)) {
        v.index_[tok] = static_cast<int>(v.tokens_.size());
        v.tokens_.push_back(tok);
      }
    }
  }
  return v;
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) throw DataError("token '" + token + "' not in vocabulary");
  return it->second;
}

std::vector<int> Vocabulary::encode(const SentenceRecord& record) const {
  std::vector<int> ids;
  ids.reserve(record.tokens.size());
  for (const std::string& tok : record.tokens) ids.push_back(id(tok));
  return ids;
}

}  // namespace tt
