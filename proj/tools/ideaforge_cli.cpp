// ideaforge: batch toolkit for preparing conditional concept corpora,
// driving a completion backend, and scoring the generated concepts.
//
// Subcommands: prepare, generate, evaluate, report. Each accepts --config
// with key=value settings plus explicit flag overrides.
//
// Exit codes: 0 success, 1 usage/config error, 2 backend failure with
// partial results persisted.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ideaforge/corpus.hpp"
#include "ideaforge/embedding.hpp"
#include "ideaforge/llmclient.hpp"
#include "ideaforge/metrics.hpp"
#include "ideaforge/pipeline.hpp"
#include "ideaforge/promptgen.hpp"

namespace fs = std::filesystem;
using namespace ideaforge;

namespace {

struct CliError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::map<std::string, std::string> load_config_file(const std::string& path) {
  if (path.empty()) return {};
  std::ifstream in(path);
  if (!in) throw CliError("cannot read config file: " + path);
  return parse_config(in);
}

std::string get(const std::map<std::string, std::string>& cfg,
                const std::string& key, const std::string& fallback = "") {
  auto it = cfg.find(key);
  return it == cfg.end() ? fallback : it->second;
}

EmbeddingFormat format_for_path(const std::string& path) {
  return path.size() > 4 && path.compare(path.size() - 4, 4, ".bin") == 0
             ? EmbeddingFormat::kBinary
             : EmbeddingFormat::kText;
}

EmbeddingStore load_store(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError("cannot open embeddings file: " + path);
  return load_embeddings(in, format_for_path(path), fs::path(path).filename());
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TaskSpec task_from_config(const std::map<std::string, std::string>& cfg) {
  TaskSpec task;
  std::string kind = get(cfg, "task.kind", "domain");
  task.kind = task_kind_from_string(kind);
  task.target_domain = get(cfg, "task.target_domain");
  task.category = get(cfg, "task.category");
  task.problem_statement = get(cfg, "task.problem_statement");
  task.source_domain = get(cfg, "task.source_domain");
  return task;
}

BackendConfig backend_from_config(const std::map<std::string, std::string>& cfg) {
  BackendConfig backend;
  backend.endpoint = get(cfg, "backend.endpoint", backend.endpoint);
  backend.path = get(cfg, "backend.path", backend.path);
  backend.model = get(cfg, "backend.model");
  backend.auth_env = get(cfg, "backend.auth_env", backend.auth_env);
  backend.kind = get(cfg, "backend.kind", "few-shot") == "fine-tuned"
                     ? BackendKind::kFineTuned
                     : BackendKind::kFewShot;
  if (auto v = get(cfg, "backend.timeout"); !v.empty())
    backend.timeout_seconds = std::stod(v);
  if (auto v = get(cfg, "backend.retries"); !v.empty())
    backend.max_retries = std::stoul(v);
  if (auto v = get(cfg, "backend.backoff_ms"); !v.empty())
    backend.backoff_base_ms = std::stoul(v);
  if (auto v = get(cfg, "backend.concurrency"); !v.empty())
    backend.max_concurrency = std::stoul(v);
  return backend;
}

std::map<std::string, std::string> parse_reference_flags(
    const std::vector<std::string>& flags) {
  std::map<std::string, std::string> refs;
  for (const auto& flag : flags) {
    auto eq = flag.find('=');
    if (eq == std::string::npos)
      throw CliError("--reference expects <name>=<path>, got: " + flag);
    refs[flag.substr(0, eq)] = flag.substr(eq + 1);
  }
  return refs;
}

std::vector<std::string> read_fixture_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CliError("cannot open fixtures file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) lines.push_back(line);
  return lines;
}

// ---------------------------------------------------------------------------

int cmd_prepare(const std::map<std::string, std::string>& cfg,
                const std::string& input, const std::string& format_name,
                const std::string& output, const std::string& manifest_path,
                std::size_t min_words, std::optional<std::size_t> take_latest,
                const std::string& embeddings_path, std::size_t max_ngram) {
  TaskSpec task = task_from_config(cfg);
  std::ifstream in(input);
  if (!in) throw CliError("cannot open input: " + input);

  nlohmann::json manifest;
  std::vector<TrainingRecord> records;

  if (task.kind == TaskKind::kAnalogyDriven) {
    // Tab-separated: source, target, description.
    std::string line;
    std::size_t lineno = 0, skipped = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      auto t1 = line.find('\t');
      auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
      if (t2 == std::string::npos) {
        ++skipped;
        std::cerr << "warning: line " << lineno << ": expected 3 tab-separated fields\n";
        continue;
      }
      records.push_back(format_analogy_record(line.substr(0, t1),
                                              line.substr(t1 + 1, t2 - t1 - 1),
                                              line.substr(t2 + 1)));
    }
    if (records.empty()) throw CliError("no valid analogy records in input");
    manifest["ingested"] = lineno;
    manifest["skipped"] = skipped;
  } else {
    IngestFormat format =
        format_name == "jsonl" ? IngestFormat::kJsonl : IngestFormat::kLines;
    auto ingested = ingest(in, format);
    manifest["ingested"] = ingested.documents.size() + ingested.skipped;
    manifest["skipped"] = ingested.skipped;
    for (const auto& w : ingested.warnings) std::cerr << "warning: " << w << '\n';

    if (task.kind == TaskKind::kDomainSynthesis) {
      auto kept = filter_titles(ingested.documents, min_words, take_latest);
      manifest["filtered_kept"] = kept.size();
      if (embeddings_path.empty())
        throw CliError("domain task needs --embeddings for keyword extraction");
      auto store = load_store(embeddings_path);
      std::size_t no_keyword = 0;
      for (const auto& doc : kept) {
        try {
          records.push_back(
              format_domain_record(extract_keyword(doc, store, max_ngram), doc.text));
        } catch (const CorpusError&) {
          ++no_keyword;
        }
      }
      manifest["no_keyword"] = no_keyword;
      manifest["keyword_method"] = "embedding-centroid cosine over the supplied store";
      manifest["embeddings"] = store.source_label();
    } else {
      for (const auto& doc : ingested.documents) {
        if (!doc.category) {
          std::cerr << "warning: document " << doc.id << " has no category, skipped\n";
          continue;
        }
        records.push_back(format_reddot_record(*doc.category, doc.text));
      }
      if (records.empty()) throw CliError("no categorized records in input");
    }
  }

  std::ofstream out(output, std::ios::binary);
  if (!out) throw CliError("cannot write output: " + output);
  write_corpus(records, out);

  manifest["records_written"] = records.size();
  manifest["task_kind"] = to_string(task.kind);
  manifest["record_separator"] = kDefaultRecordSeparator;
  manifest["condition_labels"] =
      "KEYWORD:/TITLE:/CATEGORY:/DESCRIPTION: (reference defaults; configurable)";
  if (!manifest_path.empty()) {
    std::ofstream mf(manifest_path, std::ios::binary);
    if (!mf) throw CliError("cannot write manifest: " + manifest_path);
    mf << manifest.dump(2) << '\n';
  }
  std::cout << "wrote " << records.size() << " records to " << output << '\n';
  return 0;
}

int cmd_generate(const std::map<std::string, std::string>& cfg, bool mock,
                 const std::string& mock_fixtures_path, std::size_t n_total,
                 std::uint64_t seed, const GenerationParams& params,
                 const std::string& concepts_path, const std::string& examples_path,
                 std::size_t shots) {
  RunConfig run;
  run.task = task_from_config(cfg);
  run.backend = backend_from_config(cfg);
  run.params = params;
  run.n_total = n_total;
  run.seed = seed;
  run.concepts_path = concepts_path;

  std::string prompt;
  if (!examples_path.empty()) {
    // Few-shot: sample example records and append the condition stub.
    std::string corpus_text = slurp(examples_path);
    std::vector<TrainingRecord> examples;
    RecordLayout layout;
    std::size_t pos = 0;
    while (true) {
      auto sep = corpus_text.find(layout.separator, pos);
      if (sep == std::string::npos) break;
      auto end = sep + layout.separator.size();
      examples.push_back(parse_record(
          std::string_view(corpus_text).substr(pos, end - pos), layout));
      pos = end;
      while (pos < corpus_text.size() && corpus_text[pos] == '\n') ++pos;
    }
    std::size_t count = shots == 0 ? examples.size() : shots;
    prompt = build_fewshot_prompt(examples, run.task, seed, count).render();
  } else {
    prompt = build_condition_stub(run.task);
  }

  std::unique_ptr<Backend> backend;
  if (mock) {
    std::vector<std::string> fixtures =
        mock_fixtures_path.empty()
            ? std::vector<std::string>{"Rolling toy wheeled target.",
                                       "Rolling toy dart game.",
                                       "Rolling toy with liquid container.",
                                       "Color changing LED roll toy.",
                                       "Rolling toy air gun."}
            : read_fixture_lines(mock_fixtures_path);
    backend = std::make_unique<MockBackend>(fixtures, seed);
  } else {
    backend = std::make_unique<HttpBackend>(run.backend);
  }

  auto outcome = run_generation(run, *backend, prompt);
  std::cout << "persisted " << outcome.concepts.size() << "/" << outcome.requested
            << " concepts to " << run.concepts_path << '\n';
  if (!outcome.completed) {
    std::cerr << "backend failure after " << outcome.concepts.size()
              << " concepts: " << outcome.error << '\n';
    return 2;
  }
  return 0;
}

int cmd_evaluate(const std::map<std::string, std::string>& cfg,
                 const std::string& concepts_path,
                 const std::map<std::string, std::string>& reference_flags,
                 const std::string& embeddings_path,
                 const std::string& relevancy_path, bool remove_stopwords,
                 const std::string& report_dir, std::size_t bins) {
  auto concepts = load_concepts(concepts_path);
  if (concepts.empty()) throw CliError("no concepts in " + concepts_path);

  std::map<std::string, std::string> references = reference_flags;
  if (references.empty()) {
    for (const auto& [key, value] : cfg)
      if (key.compare(0, 10, "reference.") == 0)
        references[key.substr(10)] = value;
  }
  if (references.empty()) throw CliError("at least one --reference <name>=<path> required");
  std::map<std::string, std::string> reference_texts;
  for (const auto& [name, path] : references) reference_texts[name] = slurp(path);

  std::string emb = embeddings_path.empty() ? get(cfg, "embeddings") : embeddings_path;
  if (emb.empty()) throw CliError("--embeddings required");
  std::string rel =
      relevancy_path.empty() ? get(cfg, "relevancy_embeddings", emb) : relevancy_path;
  auto wmd_store = load_store(emb);
  auto relevancy_store = rel == emb ? load_store(emb) : load_store(rel);

  auto deduped = dedup(concepts);
  auto report = run_evaluation(concepts, deduped, reference_texts, wmd_store,
                               relevancy_store, remove_stopwords, bins);
  nlohmann::json snapshot;
  snapshot["concepts"] = concepts_path;
  snapshot["embeddings"] = wmd_store.source_label();
  snapshot["relevancy_embeddings"] = relevancy_store.source_label();
  snapshot["stopwords_removed"] = remove_stopwords;
  snapshot["unique_only"] = true;  // duplicates are excluded from scoring
  for (const auto& [name, path] : references) snapshot["references"][name] = path;
  report.config_snapshot = snapshot;

  auto files = export_report(report, report_dir);
  std::cout << "unique " << report.unique << "/" << report.total << " (ratio "
            << report.uniqueness_ratio << ")\n";
  std::cout << "wrote " << files.csv.string() << " and " << files.json.string()
            << '\n';
  return 0;
}

int cmd_report(const std::string& report_path) {
  nlohmann::json j = nlohmann::json::parse(slurp(report_path));
  auto& uniq = j.at("uniqueness");
  std::cout << "unique concepts: " << uniq.at("unique") << "/" << uniq.at("total")
            << " (ratio " << uniq.at("ratio") << ")\n";
  std::cout << "unscorable for relevancy: " << j.value("unscorable_relevancy", 0)
            << '\n';
  for (const auto& note : j.value("annotations", nlohmann::json::array()))
    std::cout << "note: " << note.get<std::string>() << '\n';
  for (const auto& [name, dist] : j.at("distributions").items()) {
    std::cout << '\n' << name << ": mean " << dist.at("mean") << ", min "
              << dist.at("min") << ", max " << dist.at("max") << ", median "
              << dist.at("median") << '\n';
    const auto& counts = dist.at("counts");
    const auto& edges = dist.at("bin_edges");
    std::size_t peak = 1;
    for (const auto& c : counts)
      peak = std::max<std::size_t>(peak, c.get<std::size_t>());
    for (std::size_t k = 0; k < counts.size(); ++k) {
      std::size_t c = counts[k].get<std::size_t>();
      std::size_t bar = (c * 40) / peak;
      std::printf("  [%8.4f, %8.4f) %6zu %s\n", edges[k].get<double>(),
                  edges[k + 1].get<double>(), c, std::string(bar, '#').c_str());
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"conditional concept-generation corpus, generation and evaluation toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "key=value configuration file")
      ->configurable(false);

  // prepare ----------------------------------------------------------------
  auto* prepare = app.add_subcommand("prepare", "build a condition-first corpus");
  std::string prep_input, prep_format = "lines", prep_output = "corpus.txt";
  std::string prep_manifest = "manifest.json", prep_embeddings;
  std::size_t prep_min_words = 3, prep_max_ngram = 2;
  std::optional<std::size_t> prep_take_latest;
  prepare->add_option("--input", prep_input, "source documents")->required();
  prepare->add_option("--format", prep_format, "lines or jsonl");
  prepare->add_option("--output", prep_output, "corpus output file");
  prepare->add_option("--manifest", prep_manifest, "manifest output file");
  prepare->add_option("--min-words", prep_min_words, "titles must exceed this");
  prepare->add_option("--take-latest", prep_take_latest, "keep newest N documents");
  prepare->add_option("--embeddings", prep_embeddings, "store for keyword extraction");
  prepare->add_option("--max-ngram", prep_max_ngram, "keyword phrase length limit");

  // generate ---------------------------------------------------------------
  auto* generate = app.add_subcommand("generate", "run concept generation");
  bool gen_mock = false;
  std::string gen_fixtures, gen_concepts = "concepts.jsonl", gen_examples;
  std::size_t gen_n_total = 500, gen_shots = 0;
  std::uint64_t gen_seed = 0;
  std::optional<double> gen_temperature, gen_top_p;
  std::optional<std::size_t> gen_top_k, gen_max_tokens;
  std::vector<std::string> gen_stop;
  generate->add_flag("--mock", gen_mock, "use the deterministic mock backend");
  generate->add_option("--mock-fixtures", gen_fixtures, "fixture corpus for the mock");
  generate->add_option("--n-total", gen_n_total, "concepts to generate");
  generate->add_option("--seed", gen_seed, "sampling seed");
  generate->add_option("--temperature", gen_temperature, "sampling temperature");
  generate->add_option("--top-k", gen_top_k, "top-k candidates");
  generate->add_option("--top-p", gen_top_p, "nucleus mass");
  generate->add_option("--max-tokens", gen_max_tokens, "completion length limit");
  generate->add_option("--stop", gen_stop, "stop sequences (up to 4)");
  generate->add_option("--concepts", gen_concepts, "concepts output file");
  generate->add_option("--examples", gen_examples, "few-shot example corpus");
  generate->add_option("--shots", gen_shots, "examples per prompt (0 = all)");

  // evaluate ---------------------------------------------------------------
  auto* evaluate = app.add_subcommand("evaluate", "score generated concepts");
  std::string eval_concepts = "concepts.jsonl", eval_embeddings, eval_relevancy;
  std::string eval_report_dir = "reports", eval_stopwords = "on";
  std::vector<std::string> eval_references;
  std::size_t eval_bins = 30;
  evaluate->add_option("--concepts", eval_concepts, "concepts file");
  evaluate->add_option("--reference", eval_references, "<name>=<path>, repeatable");
  evaluate->add_option("--embeddings", eval_embeddings, "store for WMD");
  evaluate->add_option("--relevancy-embeddings", eval_relevancy,
                       "store for term relevancy (defaults to --embeddings)");
  evaluate->add_option("--stopwords", eval_stopwords, "on or off")
      ->check(CLI::IsMember({"on", "off"}));
  evaluate->add_option("--report-dir", eval_report_dir, "report output directory");
  evaluate->add_option("--bins", eval_bins, "histogram bin count");

  // report -----------------------------------------------------------------
  auto* report = app.add_subcommand("report", "summarize a report file");
  std::string report_file = "reports/report.json";
  report->add_option("--report", report_file, "report.json path");

  CLI11_PARSE(app, argc, argv);

  try {
    auto cfg = load_config_file(config_path);

    if (*prepare) {
      if (!prep_take_latest && !get(cfg, "take_latest").empty())
        prep_take_latest = std::stoul(get(cfg, "take_latest"));
      return cmd_prepare(cfg, prep_input, prep_format, prep_output, prep_manifest,
                         prep_min_words, prep_take_latest, prep_embeddings,
                         prep_max_ngram);
    }

    if (*generate) {
      TaskSpec task = task_from_config(cfg);
      BackendKind kind = backend_from_config(cfg).kind;
      GenerationParams params = default_params(task.kind, kind);
      if (auto v = get(cfg, "n_total"); !v.empty() &&
          generate->count("--n-total") == 0)
        gen_n_total = std::stoul(v);
      if (auto v = get(cfg, "seed"); !v.empty() && generate->count("--seed") == 0)
        gen_seed = std::stoull(v);
      if (auto v = get(cfg, "params.samples_per_request"); !v.empty())
        params.samples_per_request = std::stoul(v);
      if (gen_temperature) params.temperature = *gen_temperature;
      if (gen_top_p) params.top_p = *gen_top_p;
      if (gen_top_k) params.top_k = *gen_top_k;
      if (gen_max_tokens) params.max_tokens = *gen_max_tokens;
      if (!gen_stop.empty()) params.stop = gen_stop;
      params.validate();
      bool mock = gen_mock || get(cfg, "mock") == "true";
      return cmd_generate(cfg, mock, gen_fixtures, gen_n_total, gen_seed, params,
                          gen_concepts, gen_examples, gen_shots);
    }

    if (*evaluate) {
      bool stopwords = eval_stopwords == "on";
      if (evaluate->count("--stopwords") == 0 && get(cfg, "stopwords") == "off")
        stopwords = false;
      return cmd_evaluate(cfg, eval_concepts, parse_reference_flags(eval_references),
                          eval_embeddings, eval_relevancy, stopwords,
                          eval_report_dir, eval_bins);
    }

    if (*report) return cmd_report(report_file);
  } catch (const BackendError& e) {
    std::cerr << "backend error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
