#include "tt/decoder.hpp"

#include <algorithm>

namespace tt {

Index sentiment_classes(Task task) { return task == Task::Aste ? 4 : 2; }
Index invalid_class(Task task) { return sentiment_classes(task) - 1; }

void DecoderConfig::validate() const {
  if (d_prime < 1) throw ConfigError("d_prime must be >= 1");
  if (positive_weight <= 0.0) throw ConfigError("positive_weight must be > 0");
  if (max_candidates < 1) throw ConfigError("max_candidates must be >= 1");
}

DecoderParams DecoderParams::create(ParameterStore& store, const DecoderConfig& cfg) {
  cfg.validate();
  DecoderParams p;
  p.tl_w = &store.add_uniform("dec.tl.w", {cfg.d_prime, 2});
  p.tl_b = &store.add_zeros("dec.tl.b", {2});
  p.br_w = &store.add_uniform("dec.br.w", {cfg.d_prime, 2});
  p.br_b = &store.add_zeros("dec.br.b", {2});
  const Index k = sentiment_classes(cfg.task);
  p.sent_w = &store.add_uniform("dec.sent.w", {3 * cfg.d_prime, k});
  p.sent_b = &store.add_zeros("dec.sent.b", {k});
  return p;
}

DecoderParams DecoderParams::lookup(ParameterStore& store) {
  DecoderParams p;
  p.tl_w = &store.at("dec.tl.w");
  p.tl_b = &store.at("dec.tl.b");
  p.br_w = &store.at("dec.br.w");
  p.br_b = &store.at("dec.br.b");
  p.sent_w = &store.at("dec.sent.w");
  p.sent_b = &store.at("dec.sent.b");
  return p;
}

VertexPredictions predict_vertices(Var r_final, const DecoderParams& params) {
  Graph& g = *r_final.graph;
  const Tensor& rv = r_final.value();
  if (rv.rank() != 3 || rv.dim(0) != rv.dim(1))
    throw ShapeError("predict_vertices: need [n,n,d'], got " + shape_string(rv.shape()));
  return VertexPredictions{linear(r_final, g.param(*params.tl_w), g.param(*params.tl_b)),
                           linear(r_final, g.param(*params.br_w), g.param(*params.br_b))};
}

namespace {

Var one_grid_loss(Var logits, const std::vector<uint8_t>& grid, double positive_weight) {
  const Index cells = logits.size() / 2;
  std::vector<int> targets(static_cast<size_t>(cells));
  for (Index i = 0; i < cells; ++i) targets[static_cast<size_t>(i)] = grid[static_cast<size_t>(i)] ? 1 : 0;
  Var flat = reshape(logits, {cells, 2});
  if (positive_weight == 1.0) return cross_entropy(flat, targets);
  std::vector<double> weights(static_cast<size_t>(cells));
  for (Index i = 0; i < cells; ++i)
    weights[static_cast<size_t>(i)] = grid[static_cast<size_t>(i)] ? positive_weight : 1.0;
  return cross_entropy(flat, targets, weights);
}

}  // namespace

Var vertex_loss(const VertexPredictions& preds, const TableLabels& gold, const DecoderConfig& cfg) {
  const Index n = preds.p_tl.dim(0);
  if (n != gold.n)
    throw ShapeError("vertex_loss: predictions for n=" + std::to_string(n) + " but labels for n=" +
                     std::to_string(gold.n));
  return add(one_grid_loss(preds.p_tl, gold.tl, cfg.positive_weight),
             one_grid_loss(preds.p_br, gold.br, cfg.positive_weight));
}

std::vector<CandidatePair> enumerate_candidates(const std::vector<Cell>& tl_cells,
                                                const std::vector<Cell>& br_cells,
                                                Index max_candidates) {
  std::vector<Cell> tl_sorted = tl_cells;
  std::vector<Cell> br_sorted = br_cells;
  std::sort(tl_sorted.begin(), tl_sorted.end());
  std::sort(br_sorted.begin(), br_sorted.end());
  std::vector<CandidatePair> out;
  for (const Cell& tl : tl_sorted) {
    for (const Cell& br : br_sorted) {
      if (tl.row <= br.row && tl.col <= br.col) {
        out.push_back(CandidatePair{tl, br});
        if (static_cast<Index>(out.size()) >= max_candidates) return out;
      }
    }
  }
  return out;
}

Var rectangle_repr(Var r_final, const CandidatePair& cand) {
  return reshape(rectangle_reprs(r_final, {cand}), {3 * r_final.dim(2)});
}

Var rectangle_reprs(Var r_final, const std::vector<CandidatePair>& cands) {
  const Tensor& rv = r_final.value();
  if (rv.rank() != 3 || rv.dim(0) != rv.dim(1))
    throw ShapeError("rectangle_reprs: need [n,n,d'], got " + shape_string(rv.shape()));
  const Index n = rv.dim(0);
  if (cands.empty()) throw ShapeError("rectangle_reprs: no candidates");
  std::vector<Index> tl_rows, br_rows;
  std::vector<CellRect> rects;
  tl_rows.reserve(cands.size());
  br_rows.reserve(cands.size());
  rects.reserve(cands.size());
  for (const CandidatePair& c : cands) {
    if (c.tl.row > c.br.row || c.tl.col > c.br.col)
      throw GeometryError("candidate TL (" + std::to_string(c.tl.row) + "," +
                          std::to_string(c.tl.col) + ") is below-right of BR (" +
                          std::to_string(c.br.row) + "," + std::to_string(c.br.col) + ")");
    tl_rows.push_back(static_cast<Index>(c.tl.row) * n + c.tl.col);
    br_rows.push_back(static_cast<Index>(c.br.row) * n + c.br.col);
    rects.push_back(CellRect{c.tl.row, c.tl.col, c.br.row, c.br.col});
  }
  Var tl_vecs = gather_rows(r_final, std::move(tl_rows));
  Var br_vecs = gather_rows(r_final, std::move(br_rows));
  Var pooled = rect_max_pool(r_final, rects);
  return concat_last({tl_vecs, br_vecs, pooled});
}

Var sentiment_logits(Var reprs, const DecoderParams& params) {
  Graph& g = *reprs.graph;
  return linear(reprs, g.param(*params.sent_w), g.param(*params.sent_b));
}

std::vector<int> candidate_labels(const std::vector<CandidatePair>& cands,
                                  const std::vector<Region>& gold_regions, Task task) {
  const int invalid = static_cast<int>(invalid_class(task));
  std::vector<int> labels(cands.size(), invalid);
  for (size_t i = 0; i < cands.size(); ++i) {
    for (const Region& r : gold_regions) {
      if (r.tl == cands[i].tl && r.br == cands[i].br) {
        labels[i] = task == Task::Aste ? static_cast<int>(r.sentiment) : 0;
        break;
      }
    }
  }
  return labels;
}

Var sentiment_loss(Var logits, const std::vector<int>& labels) {
  return cross_entropy(logits, labels);
}

Var total_loss(Var l1, Var l2) { return add(l1, l2); }

std::vector<Cell> cells_from_logits(const Tensor& logits) {
  if (logits.rank() != 3 || logits.dim(2) != 2)
    throw ShapeError("cells_from_logits: need [n,n,2], got " + shape_string(logits.shape()));
  const Index n = logits.dim(0);
  std::vector<Cell> out;
  for (Index r = 0; r < n; ++r)
    for (Index c = 0; c < n; ++c)
      if (logits[(r * n + c) * 2 + 1] > logits[(r * n + c) * 2 + 0])
        out.push_back(Cell{static_cast<int>(r), static_cast<int>(c)});
  return out;
}

std::vector<Triplet> extract_triplets(const std::vector<CandidatePair>& cands,
                                      const Tensor& sentiment_logits_val, Task task) {
  const Index k = sentiment_classes(task);
  const Index m = static_cast<Index>(cands.size());
  if (m == 0) return {};
  if (sentiment_logits_val.size() != m * k)
    throw ShapeError("extract_triplets: logits " + shape_string(sentiment_logits_val.shape()) +
                     " do not cover " + std::to_string(m) + " candidates");
  auto lm = sentiment_logits_val.as_matrix(m, k);
  std::vector<Triplet> out;
  for (Index i = 0; i < m; ++i) {
    Index best = 0;
    for (Index j = 1; j < k; ++j)
      if (lm(i, j) > lm(i, best)) best = j;
    if (best == invalid_class(task)) continue;
    const CandidatePair& c = cands[static_cast<size_t>(i)];
    const Polarity pol = task == Task::Aste ? static_cast<Polarity>(best) : Polarity::Pos;
    Triplet t{Span{c.tl.row, c.br.row}, Span{c.tl.col, c.br.col}, pol};
    if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
  }
  return out;
}

}  // namespace tt
