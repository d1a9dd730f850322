#include "tt/tagging.hpp"

#include <algorithm>

namespace tt {

std::string polarity_name(Polarity p) {
  switch (p) {
    case Polarity::Pos: return "POS";
    case Polarity::Neu: return "NEU";
    case Polarity::Neg: return "NEG";
  }
  return "POS";
}

Polarity polarity_from_name(const std::string& s) {
  if (s == "POS") return Polarity::Pos;
  if (s == "NEU") return Polarity::Neu;
  if (s == "NEG") return Polarity::Neg;
  throw DataError("unknown polarity '" + s + "' (expected POS, NEU or NEG)");
}

void validate_record(const SentenceRecord& record) {
  const int n = record.length();
  if (n < 1) throw DataError("sentence has no tokens");
  for (size_t i = 0; i < record.triplets.size(); ++i) {
    const Triplet& t = record.triplets[i];
    for (const Span* s : {&t.aspect, &t.opinion}) {
      if (s->start < 0 || s->start > s->end || s->end >= n)
        throw DataError("triplet " + std::to_string(i) + ": span [" + std::to_string(s->start) +
                        "," + std::to_string(s->end) + "] outside sentence of length " +
                        std::to_string(n));
    }
  }
}

TableLabels encode_labels(const SentenceRecord& record) {
  validate_record(record);
  const int n = record.length();
  TableLabels labels;
  labels.n = n;
  labels.tl.assign(static_cast<size_t>(n) * n, 0);
  labels.br.assign(static_cast<size_t>(n) * n, 0);
  for (const Triplet& t : record.triplets) {
    const Cell tl{t.aspect.start, t.opinion.start};
    const Cell br{t.aspect.end, t.opinion.end};
    for (const Region& r : labels.regions) {
      if (r.tl == tl && r.br == br && r.sentiment != t.polarity)
        throw DataError("conflicting sentiments for the rectangle (" + std::to_string(tl.row) +
                        "," + std::to_string(tl.col) + ")-(" + std::to_string(br.row) + "," +
                        std::to_string(br.col) + ")");
    }
    labels.tl[static_cast<size_t>(tl.row * n + tl.col)] = 1;
    labels.br[static_cast<size_t>(br.row * n + br.col)] = 1;
    labels.regions.push_back(Region{tl, br, t.polarity});
  }
  return labels;
}

std::vector<Triplet> decode_regions(const TableLabels& labels) {
  std::vector<Triplet> out;
  out.reserve(labels.regions.size());
  for (const Region& r : labels.regions) {
    if (r.tl.row > r.br.row || r.tl.col > r.br.col)
      throw GeometryError("region TL (" + std::to_string(r.tl.row) + "," +
                          std::to_string(r.tl.col) + ") is below-right of BR (" +
                          std::to_string(r.br.row) + "," + std::to_string(r.br.col) + ")");
    out.push_back(Triplet{Span{r.tl.row, r.br.row}, Span{r.tl.col, r.br.col}, r.sentiment});
  }
  return out;
}

int pad_length(int n, int b) {
  if (n < 1 || b < 1) throw ConfigError("pad_length: n and b must be positive");
  return ((n + b - 1) / b) * b;
}

int pair_distance(const Span& aspect, const Span& opinion) {
  if (aspect.start > opinion.end) return aspect.start - opinion.end;
  if (opinion.start > aspect.end) return opinion.start - aspect.end;
  return 0;
}

}  // namespace tt
