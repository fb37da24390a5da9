#pragma once

// Test doubles beyond the shipping MockBackend: a prompt-recording wrapper
// and backends with scripted failures or fixed raw output.

#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "homegate/backend.hpp"

namespace homegate::teststub {

class InspectingBackend final : public backend::Backend {
 public:
  explicit InspectingBackend(std::shared_ptr<backend::Backend> inner)
      : inner_(std::move(inner)) {}

  backend::BackendResponse classify(const prompting::PromptText& prompt) override {
    {
      std::lock_guard lock(mutex_);
      prompts_.push_back(prompt.text);
    }
    return inner_->classify(prompt);
  }
  bool probe() override { return inner_->probe(); }
  std::string describe() const override { return "inspecting:" + inner_->describe(); }

  std::vector<std::string> prompts() const {
    std::lock_guard lock(mutex_);
    return prompts_;
  }
  std::string last_prompt() const {
    std::lock_guard lock(mutex_);
    return prompts_.empty() ? "" : prompts_.back();
  }

 private:
  std::shared_ptr<backend::Backend> inner_;
  mutable std::mutex mutex_;
  std::vector<std::string> prompts_;
};

class FailingBackend final : public backend::Backend {
 public:
  explicit FailingBackend(backend::BackendErrorKind kind = backend::BackendErrorKind::Timeout)
      : kind_(kind) {}
  backend::BackendResponse classify(const prompting::PromptText&) override {
    throw backend::BackendError(kind_, "scripted failure", 0, 1);
  }
  bool probe() override { return false; }
  std::string describe() const override { return "failing"; }

 private:
  backend::BackendErrorKind kind_;
};

// Always answers with the same raw text (possibly unparseable).
class FixedTextBackend final : public backend::Backend {
 public:
  explicit FixedTextBackend(std::string raw) : raw_(std::move(raw)) {}
  backend::BackendResponse classify(const prompting::PromptText&) override {
    return backend::BackendResponse{raw_, 0.0, 1};
  }
  bool probe() override { return true; }
  std::string describe() const override { return "fixed:" + raw_; }

 private:
  std::string raw_;
};

}  // namespace homegate::teststub
