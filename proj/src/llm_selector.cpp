#include "uiscout/llm_selector.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdlib>
#include <mutex>
#include <set>
#include <sstream>

#include "httplib.h"
#include "uiscout/util.hpp"

namespace uiscout {

SelectorContext SelectorContext::from_parse(const ScreenParse& parse, std::vector<std::string> explored,
                                            std::string category_hint) {
  SelectorContext ctx;
  for (const auto& e : parse.elements) ctx.elements.push_back({e.name, e.kind, e.bbox});
  std::sort(explored.begin(), explored.end());
  explored.erase(std::unique(explored.begin(), explored.end()), explored.end());
  ctx.explored_names = std::move(explored);
  ctx.category_hint = std::move(category_hint);
  return ctx;
}

std::string build_prompt(const SelectorContext& ctx) {
  if (ctx.elements.empty()) throw PromptError("cannot build a selector prompt for an empty parse");
  std::ostringstream out;
  out << "You are exploring the interface of a";
  if (!ctx.category_hint.empty()) out << ' ' << ctx.category_hint;
  out << " desktop application.\n";
  out << "Elements on the current screen:\n";
  for (std::size_t i = 0; i < ctx.elements.size(); ++i) {
    const auto& e = ctx.elements[i];
    out << (i + 1) << ". [" << to_string(e.kind) << "] " << e.name << " (x=" << e.bbox.x << ", y=" << e.bbox.y
        << ", w=" << e.bbox.w << ", h=" << e.bbox.h << ")\n";
  }
  out << "Elements already explored:\n";
  if (ctx.explored_names.empty()) out << "(none)\n";
  for (const auto& n : ctx.explored_names) out << "- " << n << '\n';
  out << "Pick the element whose interaction is most likely to reveal new and diverse functionality.\n";
  out << "Answer with exactly one element number from 1 to " << ctx.elements.size() << ".\n";
  return out.str();
}

std::string to_string(SelectStatus s) {
  switch (s) {
    case SelectStatus::ok:
      return "ok";
    case SelectStatus::selector_unavailable:
      return "selector_unavailable";
    case SelectStatus::unparseable:
      return "unparseable";
    case SelectStatus::out_of_range:
      return "out_of_range";
  }
  return "?";
}

std::optional<long> parse_choice(const std::string& reply) {
  auto it = std::find_if(reply.begin(), reply.end(), [](unsigned char c) { return std::isdigit(c); });
  if (it == reply.end()) return std::nullopt;
  long v = 0;
  for (; it != reply.end() && std::isdigit(static_cast<unsigned char>(*it)); ++it) {
    if (v > 1'000'000'000L) return v;  // absurdly large; already out of any range
    v = v * 10 + (*it - '0');
  }
  return v;
}

std::string mock_reply_for_prompt(const std::string& prompt) {
  std::istringstream in(prompt);
  std::string line;
  std::vector<std::string> names;
  std::set<std::string> explored;
  bool in_explored = false;
  while (std::getline(in, line)) {
    if (line == "Elements already explored:") {
      in_explored = true;
      continue;
    }
    if (in_explored) {
      if (line.rfind("- ", 0) == 0) explored.insert(line.substr(2));
      continue;
    }
    const auto dot = line.find(". [");
    const auto close = line.find("] ");
    const auto coords = line.rfind(" (x=");
    if (dot == std::string::npos || close == std::string::npos || coords == std::string::npos || coords < close) {
      continue;
    }
    names.push_back(line.substr(close + 2, coords - close - 2));
  }
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (!explored.count(names[i])) return std::to_string(i + 1);
  }
  if (names.empty()) return "1";
  return std::to_string(fnv1a64(prompt) % names.size() + 1);
}

namespace {

void validate(const SelectorConfig& config) {
  if (!(config.timeout_s > 0)) throw std::invalid_argument("selector timeout must be > 0");
  if (config.max_retries < 0) throw std::invalid_argument("selector retries must be >= 0");
}

}  // namespace

SelectOutcome select_remote(const SelectorContext& ctx, const SelectorConfig& config) {
  validate(config);
  SelectOutcome out;
  std::string prompt;
  try {
    prompt = build_prompt(ctx);
  } catch (const PromptError& ex) {
    out.status = SelectStatus::selector_unavailable;
    out.detail = ex.what();
    return out;
  }
  if (config.endpoint_url.empty()) {
    out.status = SelectStatus::selector_unavailable;
    out.detail = "no endpoint configured";
    return out;
  }

  const auto [origin, path] = split_url(config.endpoint_url);
  httplib::Client client(origin);
  const auto timeout =
      std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::duration<double>(config.timeout_s));
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  if (const char* token = std::getenv(config.token_env_var.c_str()); token && *token) {
    client.set_bearer_token_auth(token);
  }
  const std::string body = json{{"prompt", prompt}, {"model", config.model}}.dump();

  out.status = SelectStatus::selector_unavailable;
  for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
    out.attempts = attempt + 1;
    auto res = client.Post(path, body, "application/json");
    if (!res) {
      out.detail = "request failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      out.detail = "HTTP " + std::to_string(res->status);
      continue;
    }
    std::string text;
    try {
      text = json::parse(res->body).at("text").get<std::string>();
    } catch (const json::exception& ex) {
      out.status = SelectStatus::unparseable;
      out.detail = std::string("malformed response: ") + ex.what();
      return out;
    }
    const auto choice = parse_choice(text);
    if (!choice) {
      out.status = SelectStatus::unparseable;
      out.detail = "no element number in reply '" + text + "'";
      return out;
    }
    if (*choice < 1 || *choice > static_cast<long>(ctx.elements.size())) {
      out.status = SelectStatus::out_of_range;
      out.detail = "reply " + std::to_string(*choice) + " outside 1.." + std::to_string(ctx.elements.size());
      return out;
    }
    out.status = SelectStatus::ok;
    out.element_name = ctx.elements[static_cast<std::size_t>(*choice - 1)].name;
    out.detail.clear();
    return out;
  }
  return out;
}

LlmSelectorClient::LlmSelectorClient(SelectorConfig config) : config_(std::move(config)) { validate(config_); }

SelectOutcome LlmSelectorClient::select(const SelectorContext& ctx) const { return select_remote(ctx, config_); }

// ---------------------------------------------------------------- mock server

struct MockSelectorServer::Impl {
  httplib::Server server;
  std::thread thread;
  Responder responder;
  std::atomic<int> requests{0};
  mutable std::mutex mu;
  std::string last_authorization;
};

MockSelectorServer::MockSelectorServer(Responder responder) : impl_(std::make_unique<Impl>()) {
  impl_->responder = responder ? std::move(responder) : Responder([](const std::string& p) {
    return std::optional<std::string>(mock_reply_for_prompt(p));
  });
  Impl* impl = impl_.get();
  impl->server.Post(".*", [impl](const httplib::Request& req, httplib::Response& res) {
    ++impl->requests;
    {
      std::lock_guard lock(impl->mu);
      impl->last_authorization = req.get_header_value("Authorization");
    }
    std::string prompt;
    try {
      prompt = json::parse(req.body).at("prompt").get<std::string>();
    } catch (const json::exception&) {
      res.status = 400;
      return;
    }
    const auto reply = impl->responder(prompt);
    if (!reply) {
      res.status = 500;
      return;
    }
    res.set_content(json{{"text", *reply}}.dump(), "application/json");
  });
  port_ = impl->server.bind_to_any_port("127.0.0.1");
  if (port_ <= 0) throw std::runtime_error("mock selector server could not bind");
  impl->thread = std::thread([impl] { impl->server.listen_after_bind(); });
  impl->server.wait_until_ready();
}

MockSelectorServer::~MockSelectorServer() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::string MockSelectorServer::url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/select"; }

int MockSelectorServer::requests() const { return impl_->requests.load(); }

std::string MockSelectorServer::last_authorization() const {
  std::lock_guard lock(impl_->mu);
  return impl_->last_authorization;
}

}  // namespace uiscout
