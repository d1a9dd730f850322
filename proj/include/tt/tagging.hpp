#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tt/errors.hpp"

namespace tt {

enum class Polarity : uint8_t { Pos = 0, Neu = 1, Neg = 2 };

std::string polarity_name(Polarity p);
Polarity polarity_from_name(const std::string& s);

// Inclusive token span [start, end].
struct Span {
  int start = 0;
  int end = 0;

  int length() const { return end - start + 1; }
  bool operator==(const Span&) const = default;
  auto operator<=>(const Span&) const = default;
};

struct Triplet {
  Span aspect;
  Span opinion;
  Polarity polarity = Polarity::Pos;

  bool operator==(const Triplet&) const = default;
  auto operator<=>(const Triplet&) const = default;
};

// Sentiment-free pair for the AOPE subtask.
struct AspectOpinionPair {
  Span aspect;
  Span opinion;

  bool operator==(const AspectOpinionPair&) const = default;
  auto operator<=>(const AspectOpinionPair&) const = default;
};

struct SentenceRecord {
  std::vector<std::string> tokens;
  std::vector<Triplet> triplets;

  int length() const { return static_cast<int>(tokens.size()); }
};

// Throws DataError describing the first violated invariant, if any.
void validate_record(const SentenceRecord& record);

struct Cell {
  int row = 0;
  int col = 0;

  bool operator==(const Cell&) const = default;
  auto operator<=>(const Cell&) const = default;
};

struct Region {
  Cell tl;
  Cell br;
  Polarity sentiment = Polarity::Pos;
};

// Boundary tagging of a sentence: 0/1 grids marking top-left and bottom-right
// rectangle vertices, plus the list of (TL, BR, sentiment) regions that pairs
// them back up. Rows index aspect tokens, columns opinion tokens.
struct TableLabels {
  int n = 0;
  std::vector<uint8_t> tl;  // n*n, row-major
  std::vector<uint8_t> br;
  std::vector<Region> regions;

  uint8_t tl_at(int r, int c) const { return tl[static_cast<size_t>(r * n + c)]; }
  uint8_t br_at(int r, int c) const { return br[static_cast<size_t>(r * n + c)]; }
};

// Maps gold triplets onto vertex grids and regions. A triplet with aspect
// [x,y] and opinion [m,n'] marks tl[x][m], br[y][n'] and keeps the pairing in
// the region list. Coincident TL/BR (single-word elements) mark one cell.
TableLabels encode_labels(const SentenceRecord& record);

// Inverse of encode_labels over the region list.
std::vector<Triplet> decode_regions(const TableLabels& labels);

// Smallest multiple of b that is >= n.
int pad_length(int n, int b);

// Gap between the nearest ends of two spans; 0 when they touch or overlap.
// Single definition shared by the synthetic generator and the evaluation
// harness.
int pair_distance(const Span& aspect, const Span& opinion);

}  // namespace tt
