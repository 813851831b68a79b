#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "uiscout/core.hpp"

namespace uiscout {

struct SelectorElement {
  std::string name;
  ElementKind kind = ElementKind::icon;
  BBox bbox;
};

struct SelectorContext {
  std::vector<SelectorElement> elements;
  std::vector<std::string> explored_names;  // sorted, unique
  std::string category_hint;

  static SelectorContext from_parse(const ScreenParse& parse, std::vector<std::string> explored,
                                    std::string category_hint);
};

struct SelectorConfig {
  std::string endpoint_url;  // e.g. http://127.0.0.1:8080/v1/select
  std::string token_env_var = "UISCOUT_LLM_TOKEN";
  std::string model = "gpt-4o";
  double timeout_s = 10.0;
  int max_retries = 2;
};

class PromptError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Numbered element list, explored-name list, and a one-number answer
// instruction. Throws PromptError on an empty element list.
std::string build_prompt(const SelectorContext& ctx);

enum class SelectStatus { ok, selector_unavailable, unparseable, out_of_range };
std::string to_string(SelectStatus s);

struct SelectOutcome {
  SelectStatus status = SelectStatus::ok;
  std::string element_name;  // set iff status == ok
  std::string detail;
  int attempts = 0;
};

// Chooses one element of the context. Never returns a name outside it.
class ElementSelector {
 public:
  virtual ~ElementSelector() = default;
  virtual SelectOutcome select(const SelectorContext& ctx) const = 0;
};

// HTTP POST {"prompt", "model"} -> {"text"}; bearer token from the
// configured environment variable when set.
class LlmSelectorClient final : public ElementSelector {
 public:
  explicit LlmSelectorClient(SelectorConfig config);
  SelectOutcome select(const SelectorContext& ctx) const override;
  const SelectorConfig& config() const { return config_; }

 private:
  SelectorConfig config_;
};

SelectOutcome select_remote(const SelectorContext& ctx, const SelectorConfig& config);

// First integer in the reply, 1-based; nullopt when there is none.
std::optional<long> parse_choice(const std::string& reply);

// Reply policy of the bundled mock: the lowest-numbered element whose name
// is not in the explored list, else one picked by a hash of the prompt.
std::string mock_reply_for_prompt(const std::string& prompt);

// Local endpoint implementing the selector contract, bound to 127.0.0.1 on
// an ephemeral port. `responder` maps a prompt to the reply text; a
// responder returning nullopt makes the server answer HTTP 500.
class MockSelectorServer {
 public:
  using Responder = std::function<std::optional<std::string>(const std::string& prompt)>;

  explicit MockSelectorServer(Responder responder = nullptr);
  ~MockSelectorServer();
  MockSelectorServer(const MockSelectorServer&) = delete;
  MockSelectorServer& operator=(const MockSelectorServer&) = delete;

  int port() const { return port_; }
  std::string url() const;
  int requests() const;
  std::string last_authorization() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

}  // namespace uiscout
