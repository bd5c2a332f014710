#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "ideaforge/corpus.hpp"
#include "ideaforge/embedding.hpp"
#include "ideaforge/llmclient.hpp"
#include "ideaforge/metrics.hpp"
#include "ideaforge/promptgen.hpp"

namespace ideaforge {

class PipelineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Concepts

/// Dedup normalization: lowercase, collapse whitespace, trim, drop trailing
/// sentence punctuation.
inline std::string normalize_concept_text(std::string_view raw) {
  std::string out;
  bool pending_space = false;
  for (char ch : raw) {
    unsigned char c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      if (!out.empty()) pending_space = true;
      continue;
    }
    if (pending_space) {
      out += ' ';
      pending_space = false;
    }
    out += static_cast<char>(std::tolower(c));
  }
  while (!out.empty() &&
         (out.back() == '.' || out.back() == '!' || out.back() == '?'))
    out.pop_back();
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

inline std::string fnv1a_hex(std::string_view data) {
  std::uint64_t h = 1469598103934665603ull;
  for (char c : data) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct ConceptScores {
  std::map<std::string, double> wmd_by_reference;
  std::optional<RelevancyScore> min_relevancy;  // absent when unscorable
};

struct Concept {
  std::string id;
  TaskSpec task;
  std::string prompt_hash;
  std::string raw_text;
  std::string normalized_text;
  std::size_t token_count = 0;
  std::optional<ConceptScores> scores;
};

inline Concept make_concept(std::string id, const TaskSpec& task,
                            const std::string& prompt, std::string raw_text) {
  Concept c;
  c.id = std::move(id);
  c.task = task;
  c.prompt_hash = fnv1a_hex(prompt);
  c.raw_text = std::move(raw_text);
  c.normalized_text = normalize_concept_text(c.raw_text);
  c.token_count =
      c.raw_text.empty() ? 0 : normalize_tokens(c.raw_text, false).size();
  return c;
}

// ---------------------------------------------------------------------------
// Run configuration

struct RunConfig {
  TaskSpec task;
  BackendConfig backend;
  GenerationParams params;
  std::size_t n_total = 500;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> references;  // name -> file path
  std::string embeddings_path;                    // general-purpose, for WMD
  std::string relevancy_embeddings_path;          // TechNet-style store
  bool remove_stopwords = true;
  std::string report_dir = ".";
  std::string concepts_path = "concepts.jsonl";
  bool use_mock = false;
  std::vector<std::string> mock_fixtures;

  void validate() const {
    if (n_total == 0) throw PipelineError("n_total must be >= 1");
    params.validate();
  }
};

inline nlohmann::json task_to_json(const TaskSpec& task) {
  nlohmann::json j{{"kind", to_string(task.kind)}};
  if (!task.target_domain.empty()) j["target_domain"] = task.target_domain;
  if (!task.category.empty()) j["category"] = task.category;
  if (!task.problem_statement.empty()) j["problem_statement"] = task.problem_statement;
  if (!task.source_domain.empty()) j["source_domain"] = task.source_domain;
  return j;
}

inline TaskSpec task_from_json(const nlohmann::json& j) {
  TaskSpec task;
  task.kind = task_kind_from_string(j.at("kind").get<std::string>());
  task.target_domain = j.value("target_domain", "");
  task.category = j.value("category", "");
  task.problem_statement = j.value("problem_statement", "");
  task.source_domain = j.value("source_domain", "");
  return task;
}

// ---------------------------------------------------------------------------
// Generation (append-only JSONL persistence; resumable)

struct GenerationOutcome {
  std::vector<Concept> concepts;
  bool completed = false;
  std::size_t requested = 0;
  std::string error;  // set when the backend gave out
};

inline std::vector<Concept> load_concepts(const std::string& path) {
  std::vector<Concept> concepts;
  std::ifstream in(path);
  if (!in) return concepts;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) continue;
    Concept c;
    c.id = j.at("id").get<std::string>();
    c.task = task_from_json(j.at("task"));
    c.prompt_hash = j.at("prompt_hash").get<std::string>();
    c.raw_text = j.at("raw_text").get<std::string>();
    c.normalized_text = normalize_concept_text(c.raw_text);
    c.token_count =
        c.raw_text.empty() ? 0 : normalize_tokens(c.raw_text, false).size();
    concepts.push_back(std::move(c));
  }
  return concepts;
}

inline void append_concept(std::ostream& out, const Concept& c) {
  nlohmann::json j{{"id", c.id},
                   {"task", task_to_json(c.task)},
                   {"prompt_hash", c.prompt_hash},
                   {"raw_text", c.raw_text}};
  out << j.dump() << '\n';
}

/// Generate until n_total concepts are persisted. A partially completed file
/// restarts from the persisted count; a dead backend leaves the partial run
/// on disk and reports the shortfall.
inline GenerationOutcome run_generation(const RunConfig& cfg, Backend& backend,
                                        const std::string& prompt) {
  cfg.validate();
  GenerationOutcome outcome;
  outcome.requested = cfg.n_total;
  outcome.concepts = load_concepts(cfg.concepts_path);
  if (outcome.concepts.size() >= cfg.n_total) {
    outcome.concepts.resize(cfg.n_total);
    outcome.completed = true;
    return outcome;
  }

  std::ofstream out(cfg.concepts_path, std::ios::app);
  if (!out) throw PipelineError("cannot open " + cfg.concepts_path + " for append");

  while (outcome.concepts.size() < cfg.n_total) {
    GenerationParams params = cfg.params;
    params.samples_per_request = std::min<std::size_t>(
        params.samples_per_request, cfg.n_total - outcome.concepts.size());
    std::vector<CompletionResult> batch;
    try {
      batch = backend.complete(prompt, params);
    } catch (const BackendError& e) {
      outcome.error = e.what();
      out.flush();
      return outcome;  // partial run persisted
    }
    for (auto& result : batch) {
      if (outcome.concepts.size() >= cfg.n_total) break;
      Concept c = make_concept(std::to_string(outcome.concepts.size() + 1),
                               cfg.task, prompt, std::move(result.text));
      append_concept(out, c);
      outcome.concepts.push_back(std::move(c));
    }
    out.flush();
  }
  outcome.completed = true;
  return outcome;
}

// ---------------------------------------------------------------------------
// Dedup

struct DedupResult {
  std::vector<Concept> unique;
  std::size_t total = 0;
  double ratio = 0.0;
};

/// Uniqueness by exact match of normalized text; first occurrence kept.
inline DedupResult dedup(const std::vector<Concept>& concepts) {
  DedupResult result;
  result.total = concepts.size();
  std::unordered_set<std::string> seen;
  for (const auto& c : concepts)
    if (seen.insert(c.normalized_text).second) result.unique.push_back(c);
  result.ratio = result.total == 0
                     ? 0.0
                     : static_cast<double>(result.unique.size()) /
                           static_cast<double>(result.total);
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation

struct EvaluationReport {
  std::vector<Concept> rows;  // unique concepts with scores filled in
  std::size_t total = 0;
  std::size_t unique = 0;
  double uniqueness_ratio = 0.0;
  std::size_t unscorable_relevancy = 0;
  std::vector<std::string> reference_ids;
  std::map<std::string, DistributionSummary> wmd_distributions;
  std::optional<DistributionSummary> relevancy_distribution;
  std::optional<DistributionSummary> token_length_distribution;
  std::map<std::string, double> reference_pair_wmd;  // "a|b" -> wmd
  std::vector<std::string> annotations;
  nlohmann::json config_snapshot;
  std::size_t histogram_bins = 30;
};

/// Score every unique concept: WMD against each reference and the minimum
/// pairwise term relevancy. One-term concepts are counted unscorable rather
/// than given a sentinel.
inline EvaluationReport run_evaluation(
    const std::vector<Concept>& concepts, const DedupResult& dedup_result,
    const std::map<std::string, std::string>& reference_texts,
    const EmbeddingStore& wmd_store, const EmbeddingStore& relevancy_store,
    bool remove_stopwords, std::size_t histogram_bins = 30) {
  EvaluationReport report;
  report.total = dedup_result.total;
  report.unique = dedup_result.unique.size();
  report.uniqueness_ratio = dedup_result.ratio;
  report.histogram_bins = histogram_bins;

  std::map<std::string, BagOfWords> reference_bags;
  for (const auto& [name, text] : reference_texts) {
    auto tokens = normalize_tokens(text, remove_stopwords);
    try {
      reference_bags.emplace(name, nbow(tokens, wmd_store));
    } catch (const EmptyBagError&) {
      throw PipelineError("reference " + name + " is empty after OOV drop");
    }
    report.reference_ids.push_back(name);
  }

  // Diversity baseline: pairwise WMD between the references themselves.
  for (auto it = reference_bags.begin(); it != reference_bags.end(); ++it)
    for (auto jt = std::next(it); jt != reference_bags.end(); ++jt) {
      double v = wmd(it->second, jt->second, wmd_store).value;
      report.reference_pair_wmd[it->first + "|" + jt->first] = v;
      std::ostringstream msg;
      msg << "reference-pair wmd " << it->first << " vs " << jt->first << " = " << v;
      report.annotations.push_back(msg.str());
    }

  std::string label = relevancy_store.source_label();
  std::transform(label.begin(), label.end(), label.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  if (label.find("technet") != std::string::npos)
    report.annotations.push_back(
        "relevancy reference mean 0.133 (TechNet-labeled store)");

  std::map<std::string, std::vector<double>> wmd_scores;
  std::vector<double> relevancy_scores;
  std::vector<double> token_lengths;

  for (const auto& row : dedup_result.unique) {
    Concept scored = row;
    scored.scores = ConceptScores{};
    auto tokens = normalize_tokens(row.normalized_text, remove_stopwords);
    try {
      BagOfWords bag = nbow(tokens, wmd_store);
      for (const auto& [name, ref_bag] : reference_bags) {
        double v = wmd(bag, ref_bag, wmd_store, name).value;
        scored.scores->wmd_by_reference[name] = v;
        wmd_scores[name].push_back(v);
      }
    } catch (const EmptyBagError&) {
      // all-OOV concept: no WMD rows for it
    }
    try {
      scored.scores->min_relevancy =
          min_pairwise_relevancy(tokens, relevancy_store);
      relevancy_scores.push_back(scored.scores->min_relevancy->value);
    } catch (const InsufficientTermsError&) {
      ++report.unscorable_relevancy;
    }
    if (row.token_count > 0)
      token_lengths.push_back(static_cast<double>(row.token_count));
    report.rows.push_back(std::move(scored));
  }

  for (auto& [name, scores] : wmd_scores)
    if (!scores.empty())
      report.wmd_distributions.emplace(
          name, distribution_summary(scores, histogram_bins));
  if (!relevancy_scores.empty())
    report.relevancy_distribution =
        distribution_summary(relevancy_scores, histogram_bins);
  if (!token_lengths.empty())
    report.token_length_distribution =
        distribution_summary(token_lengths, histogram_bins);
  return report;
}

// ---------------------------------------------------------------------------
// Report export

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

inline std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline nlohmann::json summary_to_json(const DistributionSummary& s) {
  return nlohmann::json{{"bin_edges", s.bin_edges}, {"counts", s.counts},
                        {"mean", s.mean},           {"min", s.min},
                        {"max", s.max},             {"q1", s.q1},
                        {"median", s.median},       {"q3", s.q3}};
}

}  // namespace detail

/// Row-oriented CSV: one line per unique concept.
inline void export_report_csv(const EvaluationReport& report, std::ostream& out) {
  out << "concept_id,task,token_count";
  for (const auto& name : report.reference_ids) out << ",wmd_" << name;
  out << ",min_relevancy,min_pair\n";
  for (const auto& row : report.rows) {
    out << detail::csv_escape(row.id) << ',' << to_string(row.task.kind) << ','
        << row.token_count;
    for (const auto& name : report.reference_ids) {
      out << ',';
      if (row.scores) {
        auto it = row.scores->wmd_by_reference.find(name);
        if (it != row.scores->wmd_by_reference.end())
          out << detail::format_double(it->second);
      }
    }
    out << ',';
    if (row.scores && row.scores->min_relevancy) {
      const auto& rel = *row.scores->min_relevancy;
      out << detail::format_double(rel.value) << ','
          << detail::csv_escape(rel.pair.first + "|" + rel.pair.second);
    } else {
      out << "unscorable,";
    }
    out << '\n';
  }
}

/// Structured document with the config snapshot and all distributions.
inline void export_report_json(const EvaluationReport& report, std::ostream& out) {
  nlohmann::json j;
  j["uniqueness"] = {{"total", report.total},
                     {"unique", report.unique},
                     {"ratio", report.uniqueness_ratio}};
  j["unscorable_relevancy"] = report.unscorable_relevancy;
  j["references"] = report.reference_ids;
  j["annotations"] = report.annotations;
  j["reference_pair_wmd"] = report.reference_pair_wmd;
  j["config"] = report.config_snapshot;
  j["histogram_bins"] = report.histogram_bins;
  nlohmann::json dists = nlohmann::json::object();
  for (const auto& [name, summary] : report.wmd_distributions)
    dists["wmd_" + name] = detail::summary_to_json(summary);
  if (report.relevancy_distribution)
    dists["min_relevancy"] = detail::summary_to_json(*report.relevancy_distribution);
  if (report.token_length_distribution)
    dists["token_length"] = detail::summary_to_json(*report.token_length_distribution);
  j["distributions"] = dists;
  out << j.dump(2) << '\n';
}

struct ExportedFiles {
  std::filesystem::path csv;
  std::filesystem::path json;
};

inline ExportedFiles export_report(const EvaluationReport& report,
                                   const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  ExportedFiles files{dir / "report.csv", dir / "report.json"};
  std::ofstream csv(files.csv, std::ios::binary);
  if (!csv) throw PipelineError("cannot write " + files.csv.string());
  export_report_csv(report, csv);
  std::ofstream json(files.json, std::ios::binary);
  if (!json) throw PipelineError("cannot write " + files.json.string());
  export_report_json(report, json);
  return files;
}

// ---------------------------------------------------------------------------
// Key-value configuration files

/// Parse `key = value` lines; '#' starts a comment. Later keys win.
inline std::map<std::string, std::string> parse_config(std::istream& in) {
  std::map<std::string, std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t");
      auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (!key.empty()) out[key] = value;
  }
  return out;
}

}  // namespace ideaforge
