#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "ideaforge/embedding.hpp"

using namespace ideaforge;

TEST_CASE("text loader reads a minimal well-formed file") {
  std::istringstream in("2 3\na 1 0 0\nb 0 1 0\n");
  auto store = load_embeddings(in, EmbeddingFormat::kText, "test");
  CHECK(store.dimension() == 3);
  CHECK(store.size() == 2);
  CHECK(store.contains("a"));
  CHECK(store.contains("b"));
  CHECK(store.vector("a")[0] == 1.0f);
  CHECK(store.source_label() == "test");
}

TEST_CASE("binary loader matches the text loader") {
  std::istringstream text_in("2 3\na 1 0 0\nb 0 1 0\n");
  auto text_store = load_embeddings(text_in, EmbeddingFormat::kText);

  std::ostringstream bin;
  save_embeddings(text_store, bin, EmbeddingFormat::kBinary);
  std::istringstream bin_in(bin.str());
  auto bin_store = load_embeddings(bin_in, EmbeddingFormat::kBinary);

  REQUIRE(bin_store.size() == text_store.size());
  REQUIRE(bin_store.dimension() == text_store.dimension());
  for (const auto& token : text_store.tokens()) {
    const float* a = text_store.vector(token);
    const float* b = bin_store.vector(token);
    for (std::size_t d = 0; d < text_store.dimension(); ++d)
      CHECK(a[d] == b[d]);  // bit-exact
  }
}

TEST_CASE("loader rejects malformed input with distinct errors") {
  SECTION("malformed header") {
    std::istringstream in("not a header\na 1 0\n");
    CHECK_THROWS_AS(load_embeddings(in, EmbeddingFormat::kText), HeaderError);
  }
  SECTION("header with extra fields") {
    std::istringstream in("2 3 9\na 1 0 0\n");
    CHECK_THROWS_AS(load_embeddings(in, EmbeddingFormat::kText), HeaderError);
  }
  SECTION("wrong component count") {
    std::istringstream in("2 3\na 1 0\nb 0 1 0\n");
    CHECK_THROWS_AS(load_embeddings(in, EmbeddingFormat::kText), RecordError);
  }
  SECTION("too many components") {
    std::istringstream in("2 3\na 1 0 0 5\nb 0 1 0\n");
    CHECK_THROWS_AS(load_embeddings(in, EmbeddingFormat::kText), RecordError);
  }
  SECTION("non-finite value") {
    std::istringstream in("1 3\na 1 nan 0\n");
    CHECK_THROWS_AS(load_embeddings(in, EmbeddingFormat::kText), RecordError);
  }
  SECTION("empty vocabulary") {
    std::istringstream in("0 3\n");
    CHECK_THROWS_AS(load_embeddings(in, EmbeddingFormat::kText), EmbeddingError);
  }
}

TEST_CASE("duplicate tokens keep the first occurrence") {
  std::istringstream in("3 2\na 1 0\na 9 9\nb 0 1\n");
  auto store = load_embeddings(in, EmbeddingFormat::kText);
  CHECK(store.size() == 2);
  CHECK(store.duplicates_skipped() == 1);
  CHECK(store.vector("a")[0] == 1.0f);
}

TEST_CASE("cosine basics") {
  auto store = fixtures::make_store(3, {{"a", {1, 0, 0}},
                                        {"b", {0, 1, 0}},
                                        {"c", {1, 1, 0}},
                                        {"z", {0, 0, 0}}});
  CHECK(store.cosine("a", "a") == Catch::Approx(1.0).margin(1e-9));
  CHECK(store.cosine("a", "b") == Catch::Approx(0.0).margin(1e-12));
  CHECK(store.cosine("c", "a") == Catch::Approx(std::sqrt(2.0) / 2.0).margin(1e-9));
  CHECK_THROWS_AS(store.cosine("a", "missing"), OovError);
  CHECK_THROWS_AS(store.cosine("a", "z"), EmbeddingError);  // zero norm
}

TEST_CASE("cosine is symmetric on random stores") {
  std::mt19937_64 rng(17);
  auto space = fixtures::make_random_space(rng, 20, 5);
  for (std::size_t i = 0; i < space.tokens.size(); ++i)
    for (std::size_t j = i + 1; j < space.tokens.size(); ++j) {
      double ab = space.store.cosine(space.tokens[i], space.tokens[j]);
      double ba = space.store.cosine(space.tokens[j], space.tokens[i]);
      REQUIRE(std::abs(ab - ba) <= 1e-12);
    }
}

TEST_CASE("text round-trip preserves tokens and vectors") {
  std::mt19937_64 rng(3);
  auto space = fixtures::make_random_space(rng, 40, 7);
  std::ostringstream out;
  save_embeddings(space.store, out, EmbeddingFormat::kText);
  std::istringstream in(out.str());
  auto reloaded = load_embeddings(in, EmbeddingFormat::kText);
  REQUIRE(reloaded.size() == space.store.size());
  for (const auto& token : space.store.tokens()) {
    REQUIRE(reloaded.contains(token));
    const float* a = space.store.vector(token);
    const float* b = reloaded.vector(token);
    for (std::size_t d = 0; d < space.store.dimension(); ++d)
      REQUIRE(std::abs(a[d] - b[d]) <= 1e-6f);
  }
}

TEST_CASE("loading the same bytes twice yields equal stores") {
  std::string bytes = "2 2\nfoo 0.5 -0.25\nbar 1 2\n";
  std::istringstream in1(bytes), in2(bytes);
  auto s1 = load_embeddings(in1, EmbeddingFormat::kText);
  auto s2 = load_embeddings(in2, EmbeddingFormat::kText);
  REQUIRE(s1.tokens() == s2.tokens());
  for (const auto& token : s1.tokens())
    for (std::size_t d = 0; d < s1.dimension(); ++d)
      REQUIRE(s1.vector(token)[d] == s2.vector(token)[d]);
}
