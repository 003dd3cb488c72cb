#include "gamic/promptllm.h"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <exception>
#include <json.hpp>
#include <mutex>
#include <thread>

#include "gamic/errors.h"

namespace gamic {

namespace {

constexpr std::string_view kCaptionInstruction =
    "You are an expert chemist. Given the molecular SMILES, your task is to predict the molecule description using "
    "your experienced molecular knowledge.";
constexpr std::string_view kPropertyInstruction =
    "You are an expert chemist. Given the molecular SMILES, your task is to predict whether the molecule has the "
    "property in question using your experienced molecular knowledge. Answer Yes or No.";
constexpr std::string_view kYieldInstruction =
    "You are an expert chemist. Given the reaction SMILES, your task is to predict whether the reaction yield is "
    "high or low using your experienced chemical knowledge. Answer High or Low.";

std::string block(Task t, const std::string& input, const std::string& output) {
  return "SMILES:" + input + "\n" + std::string(output_field(t)) + ":" + output;
}

}  // namespace

Task parse_task(std::string_view name) {
  if (name == "caption") return Task::Caption;
  if (name == "property") return Task::Property;
  if (name == "yield") return Task::Yield;
  throw ConfigError("unknown task '" + std::string(name) + "'");
}

std::string_view task_name(Task t) {
  switch (t) {
    case Task::Caption: return "caption";
    case Task::Property: return "property";
    case Task::Yield: return "yield";
  }
  return "?";
}

bool is_classification(Task t) { return t != Task::Caption; }

std::string_view zero_shot_instruction(Task t) {
  switch (t) {
    case Task::Caption: return kCaptionInstruction;
    case Task::Property: return kPropertyInstruction;
    case Task::Yield: return kYieldInstruction;
  }
  return {};
}

std::string_view output_field(Task t) { return t == Task::Caption ? "Caption" : "Answer"; }

std::string render_label(Task t, bool positive) {
  if (t == Task::Yield) return positive ? "High" : "Low";
  return positive ? "Yes" : "No";
}

PromptBundle build_prompt(Task task, const std::vector<Demonstration>& retrieved, const std::string& query,
                          std::string id) {
  PromptBundle b;
  b.id = std::move(id);
  b.task = task;
  b.query = query;
  b.demonstrations.assign(retrieved.rbegin(), retrieved.rend());
  if (b.demonstrations.empty()) {
    b.instruction = std::string(zero_shot_instruction(task));
    b.rendered = b.instruction + "\n\n";
  }
  for (const auto& d : b.demonstrations) b.rendered += block(task, d.input, d.output) + "\n\n";
  b.rendered += block(task, query, "");
  return b;
}

ParsedPrompt parse_prompt(std::string_view rendered, Task task) {
  ParsedPrompt out;
  const std::string field = "\n" + std::string(output_field(task)) + ":";
  std::size_t pos = 0;
  std::vector<std::pair<std::string, std::string>> blocks;
  while (pos < rendered.size()) {
    const auto start = rendered.find("SMILES:", pos);
    if (start == std::string_view::npos) break;
    const auto f = rendered.find(field, start);
    if (f == std::string_view::npos) throw FormatError("prompt block without an output field");
    const auto next = rendered.find("\n\nSMILES:", f);
    const auto end = next == std::string_view::npos ? rendered.size() : next;
    blocks.emplace_back(std::string(rendered.substr(start + 7, f - start - 7)),
                        std::string(rendered.substr(f + field.size(), end - f - field.size())));
    pos = next == std::string_view::npos ? rendered.size() : next + 2;
  }
  if (blocks.empty()) throw FormatError("prompt has no SMILES block");
  for (std::size_t i = 0; i + 1 < blocks.size(); ++i) {
    out.demonstrations.push_back({blocks[i].first, blocks[i].second});
  }
  out.query = blocks.back().first;
  return out;
}

std::string MockBackend::complete(const PromptBundle& bundle) {
  const auto& demos = bundle.demonstrations;
  if (bundle.task == Task::Caption) {
    if (demos.empty()) return std::string(kMockFallbackCaption);
    if (demos.back().output.empty()) throw EmptyCompletion("nearest demonstration has an empty caption");
    return demos.back().output;
  }
  if (demos.empty()) return render_label(bundle.task, false);
  int pos = 0, neg = 0;
  for (const auto& d : demos) {
    const Label l = parse_label(d.output);
    pos += l == Label::Positive;
    neg += l == Label::Negative;
  }
  if (pos != neg) return render_label(bundle.task, pos > neg);
  for (auto it = demos.rbegin(); it != demos.rend(); ++it) {
    const Label l = parse_label(it->output);
    if (l != Label::Unparseable) return render_label(bundle.task, l == Label::Positive);
  }
  return render_label(bundle.task, false);
}

std::string HttpChatBackend::request_body(const PromptBundle& bundle) const {
  nlohmann::ordered_json j;
  j["model"] = cfg_.model;
  j["messages"] = nlohmann::ordered_json::array({{{"role", "user"}, {"content", bundle.rendered}}});
  j["temperature"] = cfg_.temperature;
  j["max_tokens"] = cfg_.max_tokens;
  return j.dump();
}

std::string HttpChatBackend::complete(const PromptBundle& bundle) {
  HttpOutcome res;
  try {
    res = post_json(cfg_.http, request_body(bundle));
  } catch (const ConfigError& e) {
    throw BackendError(e.what());
  }
  if (!res.ok) {
    throw BackendError("chat completion failed after " + std::to_string(res.attempts) + " attempt(s): " + res.error);
  }
  std::string content;
  try {
    const auto j = nlohmann::json::parse(res.body);
    const auto& msg = j.at("choices").at(0).at("message").at("content");
    if (!msg.is_null()) content = msg.get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(std::string("unexpected chat completion response: ") + e.what());
  }
  if (std::all_of(content.begin(), content.end(), [](unsigned char c) { return std::isspace(c); })) {
    throw EmptyCompletion("empty completion for prompt '" + bundle.id + "'");
  }
  return content;
}

std::string ReplayBackend::complete(const PromptBundle& bundle) {
  auto it = completions_.find(bundle.id);
  if (it == completions_.end()) throw BackendError("no imported completion for prompt '" + bundle.id + "'");
  if (it->second.empty()) throw EmptyCompletion("imported completion for '" + bundle.id + "' is empty");
  return it->second;
}

std::vector<std::string> complete_all(const std::vector<PromptBundle>& bundles, LlmBackend& backend,
                                      std::size_t max_in_flight) {
  std::vector<std::string> out(bundles.size());
  const std::size_t workers =
      backend.thread_safe() ? std::clamp<std::size_t>(max_in_flight, 1, std::max<std::size_t>(1, bundles.size())) : 1;
  if (workers == 1) {
    for (std::size_t i = 0; i < bundles.size(); ++i) out[i] = backend.complete(bundles[i]);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (!failed) {
        const std::size_t i = next++;
        if (i >= bundles.size()) return;
        try {
          out[i] = backend.complete(bundles[i]);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!first_error) first_error = std::current_exception();
          failed = true;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

std::string prompts_to_jsonl(const std::vector<PromptBundle>& bundles) {
  std::string out;
  for (const auto& b : bundles) {
    nlohmann::ordered_json j;
    j["id"] = b.id;
    j["task"] = task_name(b.task);
    j["query"] = b.query;
    j["demonstrations"] = nlohmann::ordered_json::array();
    for (const auto& d : b.demonstrations) j["demonstrations"].push_back({{"input", d.input}, {"output", d.output}});
    j["prompt"] = b.rendered;
    out += j.dump() + "\n";
  }
  return out;
}

std::map<std::string, std::string> completions_from_jsonl(std::string_view text) {
  std::map<std::string, std::string> out;
  std::size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      auto id = j.at("id").get<std::string>();
      if (out.count(id)) throw FormatError("duplicate completion id '" + id + "' on line " + std::to_string(line_no));
      out.emplace(std::move(id), j.at("completion").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("completions line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::string completions_to_jsonl(const std::vector<std::string>& ids, const std::vector<std::string>& completions) {
  if (ids.size() != completions.size()) throw ConfigError("ids and completions differ in length");
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    nlohmann::ordered_json j;
    j["id"] = ids[i];
    j["completion"] = completions[i];
    out += j.dump() + "\n";
  }
  return out;
}

Label parse_label(std::string_view completion) {
  std::string word;
  auto decide = [&]() -> Label {
    if (word == "yes" || word == "true" || word == "high" || word == "1") return Label::Positive;
    if (word == "no" || word == "false" || word == "low" || word == "0") return Label::Negative;
    return Label::Unparseable;
  };
  for (std::size_t i = 0; i <= completion.size(); ++i) {
    const unsigned char c = i < completion.size() ? static_cast<unsigned char>(completion[i]) : ' ';
    if (std::isalnum(c)) {
      word.push_back(static_cast<char>(std::tolower(c)));
      continue;
    }
    if (!word.empty()) {
      if (const Label l = decide(); l != Label::Unparseable) return l;
      word.clear();
    }
  }
  return Label::Unparseable;
}

}  // namespace gamic
