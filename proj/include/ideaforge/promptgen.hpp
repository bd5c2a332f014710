#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "ideaforge/corpus.hpp"

namespace ideaforge {

class PromptError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One of the three concept-generation conditionings. problem_statement may
/// be a partial stem (loose condition); everything else must be non-empty.
struct TaskSpec {
  TaskKind kind = TaskKind::kDomainSynthesis;
  std::string target_domain;      // DomainSynthesis, AnalogyDriven
  std::string category;           // ProblemDriven
  std::string problem_statement;  // ProblemDriven; may be partial or empty
  std::string source_domain;      // AnalogyDriven

  void validate() const {
    switch (kind) {
      case TaskKind::kDomainSynthesis:
        if (target_domain.empty()) throw PromptError("target_domain required");
        break;
      case TaskKind::kProblemDriven:
        if (category.empty()) throw PromptError("category required");
        break;
      case TaskKind::kAnalogyDriven:
        if (source_domain.empty() || target_domain.empty())
          throw PromptError("source_domain and target_domain required");
        break;
    }
  }
};

enum class BackendKind { kFineTuned, kFewShot };

/// Sampling contract sent to the completion backend. top_k is absent for
/// backends that do not support it; at most 4 stop sequences.
struct GenerationParams {
  std::size_t max_tokens = 64;
  double temperature = 1.0;
  std::optional<std::size_t> top_k;
  double top_p = 1.0;
  std::vector<std::string> stop;
  double presence_penalty = 0.0;
  double frequency_penalty = 0.0;
  std::size_t samples_per_request = 1;

  void validate() const {
    if (max_tokens == 0) throw PromptError("max_tokens must be positive");
    if (temperature < 0.0) throw PromptError("temperature must be >= 0");
    if (top_p <= 0.0 || top_p > 1.0) throw PromptError("top_p must be in (0, 1]");
    if (top_k && *top_k == 0) throw PromptError("top_k must be positive");
    if (stop.size() > 4) throw PromptError("at most 4 stop sequences");
    if (samples_per_request == 0)
      throw PromptError("samples_per_request must be positive");
  }
};

/// Few-shot example block: serialized examples followed by the final
/// condition stub, all in the same layout.
struct FewShotBlock {
  std::vector<TrainingRecord> examples;
  std::string final_condition;

  std::string render(const RecordLayout& layout = {}) const {
    std::string out;
    for (const auto& example : examples)
      out += serialize_record(example, layout) + "\n";
    out += final_condition;
    return out;
  }
};

/// The record serialization truncated exactly where the completion begins.
inline std::string build_condition_stub(const TaskSpec& task,
                                        const RecordLayout& layout = {}) {
  task.validate();
  switch (task.kind) {
    case TaskKind::kDomainSynthesis:
      return layout.keyword_label + " " + task.target_domain + "\n" +
             layout.title_label;
    case TaskKind::kProblemDriven: {
      std::string stub =
          layout.category_label + " " + task.category + "\n" + layout.description_label;
      if (!task.problem_statement.empty()) stub += " " + task.problem_statement;
      return stub;
    }
    case TaskKind::kAnalogyDriven:
      return "Applying " + task.source_domain + " to " + task.target_domain + ".\n";
  }
  throw PromptError("invalid task kind");
}

/// Deterministically sample sample_count examples with the seed, concatenate
/// their serializations, append the condition stub.
inline FewShotBlock build_fewshot_prompt(const std::vector<TrainingRecord>& examples,
                                         const TaskSpec& task, std::uint64_t seed,
                                         std::size_t sample_count) {
  task.validate();
  if (sample_count == 0) throw PromptError("sample_count must be positive");
  if (examples.size() < sample_count)
    throw PromptError("insufficient examples: have " +
                      std::to_string(examples.size()) + ", need " +
                      std::to_string(sample_count));
  for (const auto& example : examples)
    if (example.kind != task.kind)
      throw PromptError("example task kind does not match the task");

  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  FewShotBlock block;
  block.examples.reserve(sample_count);
  for (std::size_t k = 0; k < sample_count; ++k)
    block.examples.push_back(examples[order[k]]);
  block.final_condition = build_condition_stub(task);
  return block;
}

/// Sampling defaults: fine-tuned profile uses temperature 0.9 with top-k 50;
/// few-shot uses temperature 0.9 with top-p 1 and no top-k. Titles stop at
/// the newline, descriptions at the record separator.
inline GenerationParams default_params(TaskKind task_kind, BackendKind backend,
                                       const RecordLayout& layout = {}) {
  GenerationParams params;
  params.temperature = 0.9;
  params.top_p = 1.0;
  if (backend == BackendKind::kFineTuned) params.top_k = 50;
  if (task_kind == TaskKind::kDomainSynthesis) {
    params.max_tokens = 64;
    params.stop = {"\n", layout.separator};
  } else {
    params.max_tokens = 400;
    params.stop = {layout.separator};
  }
  params.validate();
  return params;
}

}  // namespace ideaforge
