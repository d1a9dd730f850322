#include "tt/metrics.hpp"

#include <algorithm>
#include <limits>
#include <set>
#include <sstream>

namespace tt {

PrF1 micro_prf1(uint64_t tp, uint64_t num_pred, uint64_t num_gold) {
  PrF1 m;
  m.tp = tp;
  m.num_pred = num_pred;
  m.num_gold = num_gold;
  m.precision = num_pred == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(num_pred);
  m.recall = num_gold == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(num_gold);
  m.f1 = (m.precision + m.recall) == 0.0 ? 0.0
                                         : 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

std::vector<DistanceBucket> default_eval_buckets() {
  return {{1, 3, 1.0}, {4, 6, 1.0}, {7, 9, 1.0}, {10, std::numeric_limits<int>::max(), 1.0}};
}

namespace {

struct Counts {
  uint64_t tp = 0, pred = 0, gold = 0;
};

bool in_bucket(int distance, const DistanceBucket& b) { return distance >= b.lo && distance <= b.hi; }

}  // namespace

EvalReport score_predictions(const std::vector<std::vector<Triplet>>& predictions,
                             const std::vector<SentenceRecord>& gold, bool aope,
                             const std::vector<DistanceBucket>& buckets) {
  if (predictions.size() != gold.size())
    throw ShapeError("score_predictions: " + std::to_string(predictions.size()) +
                     " prediction sets for " + std::to_string(gold.size()) + " sentences");
  Counts overall;
  std::vector<Counts> per_bucket(buckets.size());
  Counts single, multi_a, multi_o;
  uint64_t exact_sentences = 0;

  auto canon = [aope](const std::vector<Triplet>& ts) {
    std::set<Triplet> out;
    for (Triplet t : ts) {
      if (aope) t.polarity = Polarity::Pos;  // pairs only
      out.insert(t);
    }
    return out;
  };

  for (size_t si = 0; si < gold.size(); ++si) {
    const std::set<Triplet> pred_set = canon(predictions[si]);
    const std::set<Triplet> gold_set = canon(gold[si].triplets);
    if (pred_set == gold_set) ++exact_sentences;
    auto tally = [&](const std::set<Triplet>& items, auto member) {
      uint64_t n = 0;
      for (const Triplet& t : items)
        if (member(t)) ++n;
      return n;
    };
    auto tally_match = [&](auto member) {
      uint64_t n = 0;
      for (const Triplet& t : pred_set)
        if (member(t) && gold_set.count(t)) ++n;
      return n;
    };
    auto everything = [](const Triplet&) { return true; };
    overall.tp += tally_match(everything);
    overall.pred += pred_set.size();
    overall.gold += gold_set.size();
    for (size_t bi = 0; bi < buckets.size(); ++bi) {
      auto member = [&](const Triplet& t) {
        return in_bucket(pair_distance(t.aspect, t.opinion), buckets[bi]);
      };
      per_bucket[bi].tp += tally_match(member);
      per_bucket[bi].pred += tally(pred_set, member);
      per_bucket[bi].gold += tally(gold_set, member);
    }
    auto is_single = [](const Triplet& t) {
      return t.aspect.length() == 1 && t.opinion.length() == 1;
    };
    auto is_multi_a = [](const Triplet& t) { return t.aspect.length() > 1; };
    auto is_multi_o = [](const Triplet& t) { return t.opinion.length() > 1; };
    single.tp += tally_match(is_single);
    single.pred += tally(pred_set, is_single);
    single.gold += tally(gold_set, is_single);
    multi_a.tp += tally_match(is_multi_a);
    multi_a.pred += tally(pred_set, is_multi_a);
    multi_a.gold += tally(gold_set, is_multi_a);
    multi_o.tp += tally_match(is_multi_o);
    multi_o.pred += tally(pred_set, is_multi_o);
    multi_o.gold += tally(gold_set, is_multi_o);
  }

  EvalReport report;
  report.triplet = micro_prf1(overall.tp, overall.pred, overall.gold);
  report.sentence_exact_match_rate =
      gold.empty() ? 0.0 : static_cast<double>(exact_sentences) / static_cast<double>(gold.size());
  for (size_t bi = 0; bi < buckets.size(); ++bi)
    report.by_distance.push_back(BucketScore{
        buckets[bi].lo, buckets[bi].hi,
        micro_prf1(per_bucket[bi].tp, per_bucket[bi].pred, per_bucket[bi].gold)});
  report.single_word = micro_prf1(single.tp, single.pred, single.gold);
  report.multi_aspect = micro_prf1(multi_a.tp, multi_a.pred, multi_a.gold);
  report.multi_opinion = micro_prf1(multi_o.tp, multi_o.pred, multi_o.gold);
  return report;
}

namespace {

void append_prf1(std::ostringstream& os, const std::string& name, const PrF1& m) {
  os << "  " << name << ": P=" << m.precision << " R=" << m.recall << " F1=" << m.f1 << " (tp=" << m.tp
     << " pred=" << m.num_pred << " gold=" << m.num_gold << ")\n";
}

}  // namespace

std::string EvalReport::to_string() const {
  std::ostringstream os;
  append_prf1(os, "triplet", triplet);
  os << "  sentence_exact_match_rate=" << sentence_exact_match_rate << "\n";
  for (const BucketScore& b : by_distance) {
    std::string name = "distance[" + std::to_string(b.lo) + "-";
    name += b.hi == std::numeric_limits<int>::max() ? "inf" : std::to_string(b.hi);
    name += "]";
    append_prf1(os, name, b.score);
  }
  append_prf1(os, "single_word", single_word);
  append_prf1(os, "multi_aspect", multi_aspect);
  append_prf1(os, "multi_opinion", multi_opinion);
  return os.str();
}

}  // namespace tt
