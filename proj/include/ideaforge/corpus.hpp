#pragma once

#include <algorithm>
#include <cctype>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "ideaforge/embedding.hpp"

namespace ideaforge {

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Tokenization

namespace detail {

// ASCII punctuation plus the typographic quotes and dashes that survive
// copy-paste from product pages. Internal hyphens are preserved.
inline bool is_boundary_punct(std::string_view s, std::size_t pos, std::size_t& len) {
  unsigned char c = static_cast<unsigned char>(s[pos]);
  if (c < 0x80) {
    len = 1;
    return std::ispunct(c) != 0;
  }
  // UTF-8 sequences for U+2018/2019/201C/201D (quotes), U+2013/2014 (dashes),
  // U+2026 (ellipsis).
  static const char* seqs[] = {"\xE2\x80\x98", "\xE2\x80\x99", "\xE2\x80\x9C",
                               "\xE2\x80\x9D", "\xE2\x80\x93", "\xE2\x80\x94",
                               "\xE2\x80\xA6"};
  for (const char* q : seqs) {
    std::size_t n = std::char_traits<char>::length(q);
    if (s.compare(pos, n, q) == 0) {
      len = n;
      return true;
    }
  }
  len = 1;
  return false;
}

inline bool is_space_at(std::string_view s, std::size_t pos, std::size_t& len) {
  unsigned char c = static_cast<unsigned char>(s[pos]);
  if (c < 0x80) {
    len = 1;
    return std::isspace(c) != 0;
  }
  // NBSP, thin/hair/en spaces, narrow NBSP, ideographic space.
  static const char* seqs[] = {"\xC2\xA0",     "\xE2\x80\x89", "\xE2\x80\x8A",
                               "\xE2\x80\x82", "\xE2\x80\xAF", "\xE3\x80\x80"};
  for (const char* q : seqs) {
    std::size_t n = std::char_traits<char>::length(q);
    if (s.compare(pos, n, q) == 0) {
      len = n;
      return true;
    }
  }
  len = 1;
  return false;
}

inline const std::unordered_set<std::string>& stopword_set() {
  static const std::unordered_set<std::string> kStopwords = {
      "a",     "an",    "and",   "are",  "as",    "at",   "be",    "but",
      "by",    "for",   "from",  "has",  "have",  "he",   "her",   "his",
      "if",    "in",    "into",  "is",   "it",    "its",  "of",    "on",
      "or",    "s",     "she",   "so",   "such",  "t",    "that",  "the",
      "their", "them",  "then",  "there", "these", "they", "this",  "to",
      "was",   "were",  "when",  "which", "while", "will", "with",  "would"};
  return kStopwords;
}

}  // namespace detail

/// Lowercase, strip punctuation at token boundaries, split on whitespace.
/// Internal hyphens survive; empty tokens are dropped.
inline std::vector<std::string> normalize_tokens(std::string_view text,
                                                 bool remove_stopwords = false) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t len;
    if (detail::is_space_at(text, i, len)) {
      i += len;
      continue;
    }
    // Collect one whitespace-delimited chunk.
    std::string chunk;
    while (i < text.size() && !detail::is_space_at(text, i, len)) {
      chunk += text[i];
      ++i;
    }
    // Strip punctuation from both ends of the chunk.
    std::size_t begin = 0, end = chunk.size();
    std::size_t plen;
    while (begin < end && detail::is_boundary_punct(chunk, begin, plen)) begin += plen;
    while (end > begin) {
      // Find the start of the last character (possibly multi-byte).
      std::size_t last = end - 1;
      while (last > begin &&
             (static_cast<unsigned char>(chunk[last]) & 0xC0) == 0x80)
        --last;
      if (detail::is_boundary_punct(chunk, last, plen) && last + plen == end)
        end = last;
      else
        break;
    }
    if (begin >= end) continue;
    std::string token = chunk.substr(begin, end - begin);
    std::transform(token.begin(), token.end(), token.begin(), [](unsigned char c) {
      return static_cast<char>(std::tolower(c));
    });
    if (remove_stopwords && detail::stopword_set().count(token)) continue;
    out.push_back(std::move(token));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Source documents

struct SourceDocument {
  std::string id;
  std::string text;
  std::optional<std::string> category;
  std::optional<std::string> date;  // ISO-8601; lexicographic order is temporal

  bool operator==(const SourceDocument&) const = default;
};

enum class IngestFormat { kLines, kJsonl };

struct IngestResult {
  std::vector<SourceDocument> documents;
  std::size_t skipped = 0;
  std::vector<std::string> warnings;
};

/// Read documents from a plain title-per-line file or a JSONL file with
/// fields {id, text, category, date}. Malformed records are skipped and
/// counted.
inline IngestResult ingest(std::istream& in, IngestFormat format) {
  IngestResult result;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string trimmed = line;
    auto first = trimmed.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    if (format == IngestFormat::kLines) {
      SourceDocument doc;
      doc.id = std::to_string(lineno);
      doc.text = line;
      result.documents.push_back(std::move(doc));
    } else {
      nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.is_object() || !j.contains("text") ||
          !j["text"].is_string() || j["text"].get<std::string>().empty()) {
        ++result.skipped;
        result.warnings.push_back("line " + std::to_string(lineno) +
                                  ": malformed record skipped");
        continue;
      }
      SourceDocument doc;
      doc.id = j.value("id", std::to_string(lineno));
      doc.text = j["text"].get<std::string>();
      if (j.contains("category") && j["category"].is_string())
        doc.category = j["category"].get<std::string>();
      if (j.contains("date") && j["date"].is_string())
        doc.date = j["date"].get<std::string>();
      result.documents.push_back(std::move(doc));
    }
  }
  if (result.documents.empty()) throw CorpusError("no valid records in input");
  return result;
}

/// Keep titles with word count strictly greater than min_words, newest first,
/// truncated to take_latest. Word counting never removes stopwords.
inline std::vector<SourceDocument> filter_titles(
    const std::vector<SourceDocument>& docs, std::size_t min_words,
    std::optional<std::size_t> take_latest = std::nullopt) {
  std::vector<SourceDocument> kept;
  for (const auto& doc : docs) {
    if (normalize_tokens(doc.text, /*remove_stopwords=*/false).size() > min_words)
      kept.push_back(doc);
  }
  if (take_latest) {
    for (const auto& doc : kept)
      if (!doc.date)
        throw CorpusError("take_latest requires a date on every document (missing on id " +
                          doc.id + ")");
    std::stable_sort(kept.begin(), kept.end(),
                     [](const SourceDocument& a, const SourceDocument& b) {
                       return *a.date > *b.date;
                     });
    if (kept.size() > *take_latest) kept.resize(*take_latest);
  }
  return kept;
}

// ---------------------------------------------------------------------------
// Keyword extraction

/// Pick the n-gram (up to max_ngram words) whose embedding lies closest in
/// cosine to the document centroid. A phrase candidate uses the stored
/// underscore-joined vector when present, otherwise the mean of its member
/// vectors. Ties go to the earliest occurrence in the text.
inline std::string extract_keyword(const SourceDocument& doc,
                                   const EmbeddingStore& store,
                                   std::size_t max_ngram = 2) {
  std::vector<std::string> tokens = normalize_tokens(doc.text);
  std::vector<double> centroid(store.dimension(), 0.0);
  std::size_t in_vocab = 0;
  for (const auto& t : tokens) {
    if (!store.contains(t)) continue;
    const float* v = store.vector(t);
    for (std::size_t d = 0; d < store.dimension(); ++d) centroid[d] += v[d];
    ++in_vocab;
  }
  if (in_vocab == 0) throw CorpusError("no in-vocabulary tokens in document " + doc.id);
  for (double& x : centroid) x /= static_cast<double>(in_vocab);

  double cnorm = 0.0;
  for (double x : centroid) cnorm += x * x;
  cnorm = std::sqrt(cnorm);

  std::string best;
  double best_score = -2.0;
  for (std::size_t start = 0; start < tokens.size(); ++start) {
    for (std::size_t n = 1; n <= max_ngram && start + n <= tokens.size(); ++n) {
      std::string joined = tokens[start];
      std::string surface = tokens[start];
      for (std::size_t k = 1; k < n; ++k) {
        joined += '_';
        joined += tokens[start + k];
        surface += ' ';
        surface += tokens[start + k];
      }
      std::vector<double> vec(store.dimension(), 0.0);
      if (store.contains(joined)) {
        const float* v = store.vector(joined);
        for (std::size_t d = 0; d < store.dimension(); ++d) vec[d] = v[d];
      } else {
        bool all_in = true;
        for (std::size_t k = 0; k < n; ++k)
          if (!store.contains(tokens[start + k])) {
            all_in = false;
            break;
          }
        if (!all_in) continue;
        for (std::size_t k = 0; k < n; ++k) {
          const float* v = store.vector(tokens[start + k]);
          for (std::size_t d = 0; d < store.dimension(); ++d) vec[d] += v[d];
        }
        for (double& x : vec) x /= static_cast<double>(n);
      }
      double vnorm = 0.0, dot = 0.0;
      for (std::size_t d = 0; d < store.dimension(); ++d) {
        vnorm += vec[d] * vec[d];
        dot += vec[d] * centroid[d];
      }
      vnorm = std::sqrt(vnorm);
      if (vnorm == 0.0 || cnorm == 0.0) continue;
      double score = dot / (vnorm * cnorm);
      if (score > best_score + 1e-12) {
        best_score = score;
        best = surface;
      }
    }
  }
  if (best.empty()) throw CorpusError("no in-vocabulary candidates in document " + doc.id);
  return best;
}

// ---------------------------------------------------------------------------
// Training records

enum class TaskKind { kDomainSynthesis, kProblemDriven, kAnalogyDriven };

inline std::string to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::kDomainSynthesis: return "domain";
    case TaskKind::kProblemDriven: return "problem";
    case TaskKind::kAnalogyDriven: return "analogy";
  }
  return "?";
}

inline TaskKind task_kind_from_string(const std::string& s) {
  if (s == "domain") return TaskKind::kDomainSynthesis;
  if (s == "problem") return TaskKind::kProblemDriven;
  if (s == "analogy") return TaskKind::kAnalogyDriven;
  throw CorpusError("unknown task kind: " + s);
}

inline constexpr const char* kDefaultRecordSeparator = "<|endoftext|>";

struct RecordLayout {
  std::string keyword_label = "KEYWORD:";
  std::string title_label = "TITLE:";
  std::string category_label = "CATEGORY:";
  std::string description_label = "DESCRIPTION:";
  std::string separator = kDefaultRecordSeparator;
};

/// A condition-first training record: condition fields, then the completion.
struct TrainingRecord {
  TaskKind kind = TaskKind::kDomainSynthesis;
  std::vector<std::pair<std::string, std::string>> condition_fields;
  std::string completion;

  bool operator==(const TrainingRecord&) const = default;
};

namespace detail {
inline void require_nonempty(const std::string& value, const char* what) {
  if (value.empty()) throw CorpusError(std::string("empty field: ") + what);
}
}  // namespace detail

inline TrainingRecord format_domain_record(const std::string& keyword,
                                           const std::string& title) {
  detail::require_nonempty(keyword, "keyword");
  detail::require_nonempty(title, "title");
  return TrainingRecord{TaskKind::kDomainSynthesis,
                        {{"KEYWORD", keyword}, {"TITLE", title}},
                        title};
}

inline TrainingRecord format_reddot_record(const std::string& category,
                                           const std::string& description) {
  detail::require_nonempty(category, "category");
  detail::require_nonempty(description, "description");
  return TrainingRecord{TaskKind::kProblemDriven,
                        {{"CATEGORY", category}, {"DESCRIPTION", description}},
                        description};
}

inline TrainingRecord format_analogy_record(const std::string& source,
                                            const std::string& target,
                                            const std::string& description) {
  detail::require_nonempty(source, "source");
  detail::require_nonempty(target, "target");
  detail::require_nonempty(description, "description");
  return TrainingRecord{TaskKind::kAnalogyDriven,
                        {{"SOURCE", source}, {"TARGET", target}},
                        description};
}

/// Reference byte layouts. The condition always precedes the completion.
inline std::string serialize_record(const TrainingRecord& record,
                                    const RecordLayout& layout = {}) {
  std::string out;
  switch (record.kind) {
    case TaskKind::kDomainSynthesis:
      out = layout.keyword_label + " " + record.condition_fields[0].second + "\n" +
            layout.title_label + " " + record.completion + "\n" + layout.separator;
      break;
    case TaskKind::kProblemDriven:
      out = layout.category_label + " " + record.condition_fields[0].second + "\n" +
            layout.description_label + " " + record.completion + "\n" +
            layout.separator;
      break;
    case TaskKind::kAnalogyDriven:
      out = "Applying " + record.condition_fields[0].second + " to " +
            record.condition_fields[1].second + ".\n" + record.completion + "\n" +
            layout.separator;
      break;
  }
  return out;
}

/// Inverse of serialize_record. Analogy sources/targets must not contain the
/// literal " to " separator; the last occurrence in the heading is the split.
inline TrainingRecord parse_record(std::string_view text,
                                   const RecordLayout& layout = {}) {
  std::string s(text);
  auto strip_suffix = [&](const std::string& suffix) {
    if (s.size() < suffix.size() || s.compare(s.size() - suffix.size(),
                                              suffix.size(), suffix) != 0)
      throw CorpusError("record does not end with separator");
    s.resize(s.size() - suffix.size());
  };
  strip_suffix(layout.separator);
  if (s.empty() || s.back() != '\n') throw CorpusError("missing newline before separator");
  s.pop_back();

  auto first_nl = s.find('\n');
  if (first_nl == std::string::npos) throw CorpusError("record has no condition line");
  std::string head = s.substr(0, first_nl);
  std::string body = s.substr(first_nl + 1);

  auto strip_label = [](std::string& line, const std::string& label) {
    if (line.compare(0, label.size(), label) != 0 ||
        line.size() <= label.size() || line[label.size()] != ' ')
      throw CorpusError("expected label " + label);
    line = line.substr(label.size() + 1);
  };

  if (head.compare(0, layout.keyword_label.size(), layout.keyword_label) == 0) {
    strip_label(head, layout.keyword_label);
    strip_label(body, layout.title_label);
    return format_domain_record(head, body);
  }
  if (head.compare(0, layout.category_label.size(), layout.category_label) == 0) {
    strip_label(head, layout.category_label);
    strip_label(body, layout.description_label);
    return format_reddot_record(head, body);
  }
  if (head.compare(0, 9, "Applying ") == 0) {
    if (head.empty() || head.back() != '.')
      throw CorpusError("analogy heading must end with a period");
    std::string domains = head.substr(9, head.size() - 10);
    auto split = domains.rfind(" to ");
    if (split == std::string::npos)
      throw CorpusError("analogy heading has no \" to \" separator");
    return format_analogy_record(domains.substr(0, split),
                                 domains.substr(split + 4), body);
  }
  throw CorpusError("unrecognized record layout");
}

/// Write a fine-tuning corpus: records joined by newlines.
inline void write_corpus(const std::vector<TrainingRecord>& records,
                         std::ostream& out, const RecordLayout& layout = {}) {
  for (const auto& record : records) out << serialize_record(record, layout) << '\n';
}

}  // namespace ideaforge
