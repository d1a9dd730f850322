#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "tt/rng.hpp"
#include "tt/tagging.hpp"

using namespace tt;

namespace {

SentenceRecord record_of(int n, std::vector<Triplet> triplets) {
  SentenceRecord rec;
  for (int i = 0; i < n; ++i) rec.tokens.push_back("tok" + std::to_string(i));
  rec.triplets = std::move(triplets);
  return rec;
}

// Random record whose triplets have pairwise-distinct (TL, BR) vertex pairs.
SentenceRecord random_record(Rng& rng) {
  const int n = static_cast<int>(rng.uniform_int(1, 12));
  const int want = static_cast<int>(rng.uniform_int(0, 3));
  std::vector<Triplet> triplets;
  std::set<std::pair<std::pair<int, int>, std::pair<int, int>>> seen;
  for (int k = 0; k < want; ++k) {
    Span a, o;
    a.start = static_cast<int>(rng.uniform_int(0, n - 1));
    a.end = static_cast<int>(rng.uniform_int(a.start, std::min(n - 1, a.start + 2)));
    o.start = static_cast<int>(rng.uniform_int(0, n - 1));
    o.end = static_cast<int>(rng.uniform_int(o.start, std::min(n - 1, o.start + 2)));
    const auto key = std::make_pair(std::make_pair(a.start, o.start), std::make_pair(a.end, o.end));
    if (seen.count(key)) continue;
    seen.insert(key);
    triplets.push_back(Triplet{a, o, static_cast<Polarity>(rng.uniform_int(0, 2))});
  }
  return record_of(n, std::move(triplets));
}

}  // namespace

TEST_CASE("encode_labels marks vertices and regions") {
  SUBCASE("multi-word opinion") {
    SentenceRecord rec = record_of(5, {Triplet{Span{1, 1}, Span{3, 4}, Polarity::Pos}});
    TableLabels labels = encode_labels(rec);
    int tl_ones = 0, br_ones = 0;
    for (uint8_t v : labels.tl) tl_ones += v;
    for (uint8_t v : labels.br) br_ones += v;
    CHECK(tl_ones == 1);
    CHECK(br_ones == 1);
    CHECK(labels.tl_at(1, 3) == 1);
    CHECK(labels.br_at(1, 4) == 1);
    REQUIRE(labels.regions.size() == 1);
    CHECK(labels.regions[0].tl == Cell{1, 3});
    CHECK(labels.regions[0].br == Cell{1, 4});
    CHECK(labels.regions[0].sentiment == Polarity::Pos);
  }
  SUBCASE("single-word elements make TL and BR coincide") {
    SentenceRecord rec = record_of(4, {Triplet{Span{0, 0}, Span{2, 2}, Polarity::Neg}});
    TableLabels labels = encode_labels(rec);
    CHECK(labels.tl_at(0, 2) == 1);
    CHECK(labels.br_at(0, 2) == 1);
    CHECK(labels.regions[0].tl == labels.regions[0].br);
  }
  SUBCASE("no triplets, all zeros") {
    TableLabels labels = encode_labels(record_of(3, {}));
    CHECK(std::count(labels.tl.begin(), labels.tl.end(), 1) == 0);
    CHECK(std::count(labels.br.begin(), labels.br.end(), 1) == 0);
    CHECK(labels.regions.empty());
  }
  SUBCASE("identical rectangle with conflicting sentiment is rejected") {
    SentenceRecord rec = record_of(4, {Triplet{Span{0, 0}, Span{2, 2}, Polarity::Neg},
                                       Triplet{Span{0, 0}, Span{2, 2}, Polarity::Pos}});
    CHECK_THROWS_AS(encode_labels(rec), DataError);
  }
  SUBCASE("shared vertices are both encoded") {
    SentenceRecord rec = record_of(6, {Triplet{Span{1, 2}, Span{4, 4}, Polarity::Pos},
                                       Triplet{Span{1, 3}, Span{4, 5}, Polarity::Neg}});
    TableLabels labels = encode_labels(rec);
    CHECK(labels.tl_at(1, 4) == 1);  // shared TL cell
    CHECK(labels.regions.size() == 2);
    int tl_ones = 0;
    for (uint8_t v : labels.tl) tl_ones += v;
    CHECK(tl_ones == 1);  // grid sparsity: shared vertex marked once
  }
}

TEST_CASE("decode_regions inverts encode_labels") {
  SUBCASE("coincident vertices") {
    TableLabels labels;
    labels.n = 3;
    labels.tl.assign(9, 0);
    labels.br.assign(9, 0);
    labels.regions = {Region{Cell{0, 2}, Cell{0, 2}, Polarity::Neg}};
    const std::vector<Triplet> out = decode_regions(labels);
    REQUIRE(out.size() == 1);
    CHECK(out[0] == Triplet{Span{0, 0}, Span{2, 2}, Polarity::Neg});
  }
  SUBCASE("empty regions decode to nothing") {
    TableLabels labels;
    labels.n = 2;
    labels.tl.assign(4, 0);
    labels.br.assign(4, 0);
    CHECK(decode_regions(labels).empty());
  }
  SUBCASE("invalid geometry raises") {
    TableLabels labels;
    labels.n = 3;
    labels.regions = {Region{Cell{2, 2}, Cell{1, 1}, Polarity::Pos}};
    CHECK_THROWS_AS(decode_regions(labels), GeometryError);
  }
  SUBCASE("round-trip over randomized non-colliding records") {
    Rng rng(2024);
    for (int trial = 0; trial < 500; ++trial) {
      SentenceRecord rec = random_record(rng);
      const std::vector<Triplet> decoded = decode_regions(encode_labels(rec));
      std::multiset<Triplet> a(rec.triplets.begin(), rec.triplets.end());
      std::multiset<Triplet> b(decoded.begin(), decoded.end());
      CHECK(a == b);
    }
  }
  SUBCASE("grid sparsity bound") {
    Rng rng(77);
    for (int trial = 0; trial < 200; ++trial) {
      SentenceRecord rec = random_record(rng);
      TableLabels labels = encode_labels(rec);
      const auto ones = [](const std::vector<uint8_t>& g) {
        return static_cast<size_t>(std::count(g.begin(), g.end(), 1));
      };
      CHECK(ones(labels.tl) <= rec.triplets.size());
      CHECK(ones(labels.br) <= rec.triplets.size());
    }
  }
}

TEST_CASE("pad_length") {
  CHECK(pad_length(5, 2) == 6);
  CHECK(pad_length(8, 4) == 8);
  CHECK(pad_length(10, 7) == 14);
  CHECK(pad_length(1, 1) == 1);
  CHECK_THROWS_AS(pad_length(0, 2), ConfigError);
  SUBCASE("properties") {
    for (int n = 1; n <= 30; ++n)
      for (int b = 1; b <= 9; ++b) {
        const int p = pad_length(n, b);
        CHECK(p % b == 0);
        CHECK(p >= n);
        CHECK(p - n < b);
      }
  }
}

TEST_CASE("pair_distance is the nearest-end gap") {
  CHECK(pair_distance(Span{0, 1}, Span{3, 4}) == 2);
  CHECK(pair_distance(Span{3, 4}, Span{0, 1}) == 2);
  CHECK(pair_distance(Span{0, 1}, Span{2, 2}) == 1);
  CHECK(pair_distance(Span{0, 3}, Span{2, 5}) == 0);  // overlap
}

TEST_CASE("record validation errors") {
  SentenceRecord empty;
  CHECK_THROWS_AS(validate_record(empty), DataError);
  SentenceRecord bad = record_of(3, {Triplet{Span{0, 3}, Span{1, 1}, Polarity::Pos}});
  CHECK_THROWS_AS(validate_record(bad), DataError);
}
