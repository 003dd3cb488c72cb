#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gamic/http_client.h"

namespace gamic {

enum class Task { Caption, Property, Yield };
Task parse_task(std::string_view name);
std::string_view task_name(Task t);
bool is_classification(Task t);

/// Zero-shot instruction text for a task.
std::string_view zero_shot_instruction(Task t);
/// "Caption" or "Answer".
std::string_view output_field(Task t);
/// Label text placed in demonstrations: Yes/No (property), High/Low (yield).
std::string render_label(Task t, bool positive);

struct Demonstration {
  std::string input;   // SMILES
  std::string output;  // caption or rendered label
  bool operator==(const Demonstration&) const = default;
};

struct PromptBundle {
  std::string id;
  Task task = Task::Caption;
  std::string instruction;                    // empty for multi-shot prompts
  std::vector<Demonstration> demonstrations;  // prompt order: least similar first
  std::string query;
  std::string rendered;
};

/// `retrieved` is in retrieval order (most similar first); the prompt lists
/// it reversed so the closest demonstration sits next to the query. With no
/// demonstrations the zero-shot instruction leads the prompt.
PromptBundle build_prompt(Task task, const std::vector<Demonstration>& retrieved, const std::string& query,
                          std::string id = {});

/// Recovers the demonstration blocks (prompt order) and the query from a
/// rendered prompt.
struct ParsedPrompt {
  std::vector<Demonstration> demonstrations;
  std::string query;
};
ParsedPrompt parse_prompt(std::string_view rendered, Task task);

class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  /// Throws BackendError or EmptyCompletion.
  virtual std::string complete(const PromptBundle& bundle) = 0;
  virtual std::string name() const = 0;
  /// Whether complete() may be called from several threads at once.
  virtual bool thread_safe() const { return true; }
};

/// Deterministic stand-in: copies the nearest demonstration's caption, or
/// takes the majority label (ties to the nearest demonstration). Without
/// demonstrations it answers with a fixed generic caption or the negative
/// label.
class MockBackend final : public LlmBackend {
 public:
  std::string complete(const PromptBundle& bundle) override;
  std::string name() const override { return "mock"; }
};

inline constexpr std::string_view kMockFallbackCaption = "The molecule is an organic compound.";

struct ChatConfig {
  HttpEndpoint http;
  std::string model;
  double temperature = 0.0;
  int max_tokens = 512;
};

/// Chat-completions client: POSTs {model, messages, temperature, max_tokens}
/// and returns choices[0].message.content.
class HttpChatBackend final : public LlmBackend {
 public:
  explicit HttpChatBackend(ChatConfig cfg) : cfg_(std::move(cfg)) {}
  std::string complete(const PromptBundle& bundle) override;
  std::string name() const override { return "http:" + cfg_.model; }
  std::string request_body(const PromptBundle& bundle) const;

 private:
  ChatConfig cfg_;
};

/// Serves completions imported from a JSONL file, keyed by prompt id.
class ReplayBackend final : public LlmBackend {
 public:
  explicit ReplayBackend(std::map<std::string, std::string> completions) : completions_(std::move(completions)) {}
  std::string complete(const PromptBundle& bundle) override;
  std::string name() const override { return "replay"; }

 private:
  std::map<std::string, std::string> completions_;
};

/// Completes every bundle, keeping input order, with up to `max_in_flight`
/// concurrent requests for thread-safe backends. The first error is rethrown
/// after all workers stop.
std::vector<std::string> complete_all(const std::vector<PromptBundle>& bundles, LlmBackend& backend,
                                      std::size_t max_in_flight = 1);

/// One JSON object per line: {"id", "task", "query", "demonstrations", "prompt"}.
std::string prompts_to_jsonl(const std::vector<PromptBundle>& bundles);
/// Reads {"id", "completion"} lines. Throws FormatError on malformed lines
/// or duplicate ids.
std::map<std::string, std::string> completions_from_jsonl(std::string_view text);
std::string completions_to_jsonl(const std::vector<std::string>& ids, const std::vector<std::string>& completions);

enum class Label { Negative, Positive, Unparseable };

/// Case-insensitive scan of the completion's words; the first of
/// yes/true/high/1 or no/false/low/0 decides.
Label parse_label(std::string_view completion);

}  // namespace gamic
