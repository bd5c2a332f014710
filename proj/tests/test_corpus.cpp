#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "ideaforge/corpus.hpp"

using namespace ideaforge;

TEST_CASE("normalize_tokens lowercases and strips boundary punctuation") {
  CHECK(normalize_tokens("Rolling toy air gun.") ==
        std::vector<std::string>{"rolling", "toy", "air", "gun"});
  CHECK(normalize_tokens("Color changing LED roll toy") ==
        std::vector<std::string>{"color", "changing", "led", "roll", "toy"});
  CHECK(normalize_tokens("  (hello),  \"world\"! ") ==
        std::vector<std::string>{"hello", "world"});
}

TEST_CASE("normalize_tokens keeps internal hyphens") {
  CHECK(normalize_tokens("state-of-the-art design-") ==
        std::vector<std::string>{"state-of-the-art", "design"});
}

TEST_CASE("normalize_tokens handles typographic punctuation") {
  CHECK(normalize_tokens("\xE2\x80\x9Cquoted\xE2\x80\x9D term\xE2\x80\xA6") ==
        std::vector<std::string>{"quoted", "term"});
}

TEST_CASE("stopword removal") {
  CHECK(normalize_tokens("testing of the wires", true) ==
        std::vector<std::string>{"testing", "wires"});
  CHECK(normalize_tokens("testing of the wires", false) ==
        std::vector<std::string>{"testing", "of", "the", "wires"});
}

TEST_CASE("ingest plain lines") {
  std::istringstream in("Rolling toy air gun\nRolling toy dart game\n");
  auto result = ingest(in, IngestFormat::kLines);
  REQUIRE(result.documents.size() == 2);
  CHECK(result.documents[0].text == "Rolling toy air gun");
  CHECK(result.skipped == 0);
}

TEST_CASE("ingest JSONL skips malformed records with a warning") {
  std::istringstream in(
      "{\"id\":\"1\",\"text\":\"first\",\"date\":\"2020-01-01\"}\n"
      "this is not json\n"
      "{\"id\":\"3\",\"text\":\"third\",\"category\":\"Toys\"}\n");
  auto result = ingest(in, IngestFormat::kJsonl);
  REQUIRE(result.documents.size() == 2);
  CHECK(result.skipped == 1);
  CHECK(result.warnings.size() == 1);
  CHECK(result.documents[1].category == "Toys");
}

TEST_CASE("ingest rejects empty input") {
  std::istringstream in("");
  CHECK_THROWS_AS(ingest(in, IngestFormat::kLines), CorpusError);
}

TEST_CASE("filter_titles keeps word counts strictly above the minimum") {
  std::vector<SourceDocument> docs = {
      {"1", "one two three", {}, {}},
      {"2", "one two three four", {}, {}},
      {"3", "one two three four five", {}, {}},
  };
  auto kept = filter_titles(docs, 3);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].id == "2");
  CHECK(kept[1].id == "3");
}

TEST_CASE("filter_titles take_latest sorts by date descending") {
  std::vector<SourceDocument> docs = {
      {"old", "a b c d", {}, std::string("2019-05-01")},
      {"new", "a b c d", {}, std::string("2021-02-03")},
  };
  auto kept = filter_titles(docs, 3, 1);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].id == "new");
}

TEST_CASE("filter_titles take_latest truncates to the requested count") {
  std::vector<SourceDocument> docs;
  for (int k = 0; k < 25; ++k) {
    char date[16];
    std::snprintf(date, sizeof(date), "2020-01-%02d", (k % 28) + 1);
    docs.push_back({std::to_string(k), "a b c d", {}, std::string(date)});
  }
  auto kept = filter_titles(docs, 3, 20);
  CHECK(kept.size() == 20);
}

TEST_CASE("filter_titles requires dates for take_latest") {
  std::vector<SourceDocument> docs = {{"1", "a b c d", {}, {}}};
  CHECK_THROWS_AS(filter_titles(docs, 1, 1), CorpusError);
}

TEST_CASE("extract_keyword picks the candidate nearest the centroid") {
  SECTION("centroid coincides with one token") {
    // Centroid of {a, b} equals a's direction when b is the zero offset case;
    // here a's vector IS the centroid direction.
    auto store = fixtures::make_store(2, {{"a", {1, 0}}, {"b", {1, 0}}});
    SourceDocument doc{"d", "a b", {}, {}};
    // Both candidates tie at cosine 1; the earliest occurrence wins.
    CHECK(extract_keyword(doc, store, 1) == "a");
  }
  SECTION("hand-computed cosines") {
    auto store = fixtures::make_store(2, {{"x", {1, 0}},
                                          {"y", {0, 1}},
                                          {"z", {1, 1}}});
    // Centroid = (2/3, 2/3); z is exactly aligned with it.
    SourceDocument doc{"d", "x y z", {}, {}};
    CHECK(extract_keyword(doc, store, 1) == "z");
  }
  SECTION("underscore-joined phrase in the store wins when closest") {
    auto store = fixtures::make_store(2, {{"rolling", {1, 0}},
                                          {"toy", {0, 1}},
                                          {"rolling_toy", {1, 1}}});
    SourceDocument doc{"d", "Rolling toy", {}, {}};
    CHECK(extract_keyword(doc, store, 2) == "rolling toy");
  }
  SECTION("all-OOV document errors") {
    auto store = fixtures::make_store(2, {{"a", {1, 0}}});
    SourceDocument doc{"d", "zzz qqq", {}, {}};
    CHECK_THROWS_AS(extract_keyword(doc, store, 2), CorpusError);
  }
}

TEST_CASE("record serializations match the reference byte layouts") {
  CHECK(serialize_record(format_domain_record("toy", "Rolling toy air gun")) ==
        "KEYWORD: toy\nTITLE: Rolling toy air gun\n<|endoftext|>");
  CHECK(serialize_record(format_reddot_record(
            "Third Age", "In the narrow and limited space...")) ==
        "CATEGORY: Third Age\nDESCRIPTION: In the narrow and limited "
        "space...\n<|endoftext|>");
  CHECK(serialize_record(format_analogy_record("accordion", "computer mouse",
                                               "A flexible mouse.")) ==
        "Applying accordion to computer mouse.\nA flexible "
        "mouse.\n<|endoftext|>");
}

TEST_CASE("empty condition fields are rejected") {
  CHECK_THROWS_AS(format_domain_record("", "title"), CorpusError);
  CHECK_THROWS_AS(format_reddot_record("cat", ""), CorpusError);
  CHECK_THROWS_AS(format_analogy_record("a", "", "desc"), CorpusError);
}

TEST_CASE("records round-trip through serialization") {
  std::vector<TrainingRecord> records = {
      format_domain_record("toy", "Rolling toy air gun"),
      format_reddot_record("Life Science", "A device that helps."),
      format_analogy_record("lantern", "drone", "A glowing drone."),
  };
  for (const auto& record : records) {
    CHECK(parse_record(serialize_record(record)) == record);
  }
}

TEST_CASE("randomized record round-trips") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> kind_dist(0, 2);
  std::uniform_int_distribution<int> word_count(1, 6);
  auto random_words = [&](int count) {
    std::string out;
    for (int k = 0; k < count; ++k) {
      if (k) out += ' ';
      out += "word" + std::to_string(rng() % 1000);
    }
    return out;
  };
  for (int iter = 0; iter < 300; ++iter) {
    TrainingRecord record;
    switch (kind_dist(rng)) {
      case 0:
        record = format_domain_record(random_words(word_count(rng)),
                                      random_words(word_count(rng)));
        break;
      case 1:
        record = format_reddot_record(random_words(word_count(rng)),
                                      random_words(word_count(rng)));
        break;
      default:
        record = format_analogy_record(random_words(word_count(rng)),
                                       random_words(word_count(rng)),
                                       random_words(word_count(rng)));
        break;
    }
    REQUIRE(parse_record(serialize_record(record)) == record);
  }
}

TEST_CASE("custom record separator round-trips") {
  RecordLayout layout;
  layout.separator = "###";
  auto record = format_domain_record("toy", "A toy");
  auto text = serialize_record(record, layout);
  CHECK(text == "KEYWORD: toy\nTITLE: A toy\n###");
  CHECK(parse_record(text, layout) == record);
}
