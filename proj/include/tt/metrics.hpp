#pragma once

#include <string>
#include <vector>

#include "tt/data.hpp"
#include "tt/tagging.hpp"

namespace tt {

struct PrF1 {
  uint64_t tp = 0;
  uint64_t num_pred = 0;
  uint64_t num_gold = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  bool operator==(const PrF1&) const = default;
};

// Micro-averaged scores with the 0/0 -> 0 convention.
PrF1 micro_prf1(uint64_t tp, uint64_t num_pred, uint64_t num_gold);

struct BucketScore {
  int lo = 0;
  int hi = 0;
  PrF1 score;

  bool operator==(const BucketScore&) const = default;
};

struct EvalReport {
  PrF1 triplet;  // exact match on (aspect span, opinion span, polarity); pairs for AOPE
  double sentence_exact_match_rate = 0.0;
  std::vector<BucketScore> by_distance;
  PrF1 single_word;    // aspect and opinion both single tokens
  PrF1 multi_aspect;   // aspect longer than one token
  PrF1 multi_opinion;  // opinion longer than one token

  bool operator==(const EvalReport&) const = default;
  std::string to_string() const;
};

std::vector<DistanceBucket> default_eval_buckets();

// Scores a batch of per-sentence predictions against gold. In AOPE mode the
// comparison drops polarities and deduplicates pairs.
EvalReport score_predictions(const std::vector<std::vector<Triplet>>& predictions,
                             const std::vector<SentenceRecord>& gold, bool aope,
                             const std::vector<DistanceBucket>& buckets);

}  // namespace tt
