#pragma once

#include <vector>

#include "tt/graph.hpp"
#include "tt/ops.hpp"
#include "tt/parameters.hpp"
#include "tt/tagging.hpp"

namespace tt {

enum class Task : uint8_t { Aste = 0, Aope = 1 };

// Classifier width: {Pos, Neu, Neg, Invalid} for ASTE, {Valid, Invalid} for
// AOPE. Invalid is always the last class.
Index sentiment_classes(Task task);
Index invalid_class(Task task);

struct DecoderConfig {
  Index d_prime = 48;
  Task task = Task::Aste;
  double positive_weight = 1.0;  // vertex-cell weight in the vertex loss
  Index max_candidates = 512;

  void validate() const;
};

struct DecoderParams {
  Parameter* tl_w = nullptr;    // [d', 2]
  Parameter* tl_b = nullptr;    // [2]
  Parameter* br_w = nullptr;    // [d', 2]
  Parameter* br_b = nullptr;    // [2]
  Parameter* sent_w = nullptr;  // [3d', k]
  Parameter* sent_b = nullptr;  // [k]

  static DecoderParams create(ParameterStore& store, const DecoderConfig& cfg);
  static DecoderParams lookup(ParameterStore& store);
};

// Per-cell 2-class logits (class 1 = vertex) for TL and BR.
struct VertexPredictions {
  Var p_tl;  // [n, n, 2]
  Var p_br;  // [n, n, 2]
};

VertexPredictions predict_vertices(Var r_final, const DecoderParams& params);

// Mean cross-entropy over cells, TL and BR terms summed. Cells holding a gold
// vertex can be up-weighted via cfg.positive_weight (weighted mean).
Var vertex_loss(const VertexPredictions& preds, const TableLabels& gold, const DecoderConfig& cfg);

// A TL/BR cell pair with TL weakly above-left of BR.
struct CandidatePair {
  Cell tl;
  Cell br;

  bool operator==(const CandidatePair&) const = default;
  auto operator<=>(const CandidatePair&) const = default;
};

// All geometrically valid (tl, br) pairs in deterministic row-major order
// (by TL then BR), truncated at max_candidates.
std::vector<CandidatePair> enumerate_candidates(const std::vector<Cell>& tl_cells,
                                                const std::vector<Cell>& br_cells,
                                                Index max_candidates);

// Candidate representation r_tl ⊕ r_br ⊕ maxpool(rectangle): [3·d'].
Var rectangle_repr(Var r_final, const CandidatePair& cand);

// Stacked representations for a batch of candidates: [m, 3·d'].
Var rectangle_reprs(Var r_final, const std::vector<CandidatePair>& cands);

// Class logits for each candidate: [m, k].
Var sentiment_logits(Var reprs, const DecoderParams& params);

// Gold class per candidate: the matching gold region's sentiment on an exact
// (tl, br) match, Invalid otherwise.
std::vector<int> candidate_labels(const std::vector<CandidatePair>& cands,
                                  const std::vector<Region>& gold_regions, Task task);

// Mean cross-entropy over candidates; zero contribution when there are none.
Var sentiment_loss(Var logits, const std::vector<int>& labels);

Var total_loss(Var l1, Var l2);

// Cells whose argmax class is "vertex", scanned row-major.
std::vector<Cell> cells_from_logits(const Tensor& logits);

// Inference-side decoding: candidates whose argmax class is not Invalid become
// triplets (aspect rows, opinion cols); duplicates are removed. In AOPE mode
// every survivor carries Polarity::Pos as a placeholder validity tag; compare
// pairs, not polarities.
std::vector<Triplet> extract_triplets(const std::vector<CandidatePair>& cands,
                                      const Tensor& sentiment_logits_val, Task task);

}  // namespace tt
