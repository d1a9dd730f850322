#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "tt/tagging.hpp"

namespace tt {

enum class CorpusFormat : uint8_t { Jsonl = 0, Hash = 1, Synthetic = 2 };

struct CorpusFile {
  std::vector<SentenceRecord> records;
  CorpusFormat format = CorpusFormat::Synthetic;

  size_t size() const { return records.size(); }
};

// One JSON object per line:
//   {"tokens": ["a","b"], "triplets":
//     [{"aspect": [s,e], "opinion": [s,e], "polarity": "POS|NEU|NEG"}]}
CorpusFile load_jsonl(const std::string& path);
void write_jsonl(const CorpusFile& corpus, const std::string& path);

// Community convention: `sentence####[([a_idx...], [o_idx...], 'POS'), ...]`
// with contiguous inclusive index lists.
CorpusFile load_hash_format(const std::string& path);
void write_hash_format(const CorpusFile& corpus, const std::string& path);

struct DistanceBucket {
  int lo = 1;
  int hi = 3;
  double weight = 1.0;
};

// Where the polarity signal lives in generated sentences. Opinion puts it on
// the opinion head word (plus correlated gap fillers); Trailing strips it from
// the pair and plants a cue token two positions after the opinion end, out of
// reach of the candidate rectangle's own cells, so reading it requires
// attention hops across the table.
enum class CueMode : uint8_t { Opinion = 0, Trailing = 1 };

struct SynthConfig {
  int num_sentences = 2000;
  int vocab_size = 200;
  int len_lo = 6;
  int len_hi = 10;
  int triplets_lo = 1;
  int triplets_hi = 1;
  std::vector<DistanceBucket> buckets = {{1, 3, 1.0}};
  double multiword_p = 0.3;
  CueMode cue = CueMode::Opinion;
  uint64_t seed = 0;

  void validate() const;
};

// Deterministic corpus of synthetic review-like sentences. Each sentence
// carries its gold triplets; aspect spans precede their opinion spans with a
// filler gap drawn from the weighted distance buckets, and token identities
// carry the class signal (aspect/opinion head and continuation pools,
// polarity-bearing opinion heads or trailing cues, polarity-tinted gap
// fillers), so the tagging task is learnable from lexical evidence alone.
CorpusFile generate_synthetic(const SynthConfig& cfg);

// Token-string interning over a whole corpus, ids in first-appearance order.
class Vocabulary {
 public:
  static Vocabulary from_corpus(const CorpusFile& corpus);

  int id(const std::string& token) const;
  std::vector<int> encode(const SentenceRecord& record) const;
  int size() const { return static_cast<int>(tokens_.size()); }

 private:
  std::unordered_map<std::string, int> index_;
  std::vector<std::string> tokens_;
};

}  // namespace tt
