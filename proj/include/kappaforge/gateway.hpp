#pragma once

#include "kappaforge/errors.hpp"
#include "kappaforge/prompt.hpp"

#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace kappaforge {

struct RetryPolicy {
    int max_attempts = 4;
    std::chrono::milliseconds base_backoff{500};
    bool jitter = true;
};

struct ModelConfig {
    std::string model_id;
    std::string endpoint; // OpenAI-compatible chat-completions URL
    double temperature = 0.0;
    int max_in_flight = 4;
    RetryPolicy retry;
    std::chrono::milliseconds timeout{30000};
    std::chrono::milliseconds min_request_interval{0};
};

enum class BackendKind { Live, Mock, Replay };

std::string backend_kind_name(BackendKind kind);

struct Completion {
    std::string text; // raw untrimmed model output
    int attempt_count = 1;
    std::chrono::milliseconds latency{0};
    BackendKind backend_kind = BackendKind::Mock;
};

struct GatewayError {
    std::string message;
    int attempts = 0;
};

using CompletionResult = std::variant<Completion, GatewayError>;

inline bool succeeded(const CompletionResult& r) { return std::holds_alternative<Completion>(r); }

// Thrown by backends for a single failed attempt; the gateway retries.
class TransportFailure : public Error {
public:
    explicit TransportFailure(const std::string& msg) : Error("TransportFailure", msg) {}
};

// One completion attempt. Implementations must be safe for concurrent calls.
class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string fetch(const ModelConfig& config, const RenderedPrompt& prompt,
                              int instance_index) = 0;
    virtual BackendKind kind() const = 0;
};

// Stable content key for the replay cache; distinct per instance and
// temperature so reliability instances are cached separately.
std::string cache_key(const std::string& model_id, const std::string& prompt_fingerprint,
                      double temperature, int instance_index);

struct CallLogEntry {
    std::string model_id;
    std::string prompt_fingerprint;
    int instance_index = 0;
    int attempt = 0;
    bool success = false;
    std::string error;
};

// Append-only audit log of every gateway attempt.
class CallLog {
public:
    virtual ~CallLog() = default;
    virtual void record(const CallLogEntry& entry) = 0;
};

class FileCallLog : public CallLog {
public:
    explicit FileCallLog(const std::filesystem::path& path);
    void record(const CallLogEntry& entry) override;

private:
    std::mutex mutex_;
    std::string path_;
};

struct GatewayOptions {
    CallLog* log = nullptr;
    // Completions are recorded here (one file per cache_key) unless the
    // backend is already replaying from it.
    std::optional<std::filesystem::path> cache_dir;
    // Test seam; defaults to std::this_thread::sleep_for.
    std::function<void(std::chrono::milliseconds)> sleep;
};

// Retries with exponential backoff up to max_attempts; refusal text is not an
// error here, only transport failures are.
CompletionResult complete(Backend& backend, const ModelConfig& config,
                          const RenderedPrompt& prompt, int instance_index,
                          const GatewayOptions& options = {});

// At most max_in_flight requests outstanding; results aligned to input order;
// per-item failures recorded in place and the batch never aborts early.
std::vector<CompletionResult> complete_batch(Backend& backend, const ModelConfig& config,
                                             const std::vector<RenderedPrompt>& prompts,
                                             int instance_index,
                                             const GatewayOptions& options = {});

// Live OpenAI-compatible chat-completions backend. Reads the API key from
// KAPPAFORGE_API_KEY when present.
class HttpBackend : public Backend {
public:
    std::string fetch(const ModelConfig& config, const RenderedPrompt& prompt,
                      int instance_index) override;
    BackendKind kind() const override { return BackendKind::Live; }
};

// Scripted deterministic backend driven by a JSON rule file. Rules are
// matched first-to-last; all present fields must match.
class MockBackend : public Backend {
public:
    struct Rule {
        std::optional<std::string> model;
        std::optional<std::string> task;
        std::optional<std::string> strategy;
        std::optional<std::string> fingerprint;
        std::optional<std::string> body_contains; // substring of the prompt text
        std::string response;
    };

    MockBackend() = default;
    static std::unique_ptr<MockBackend> from_script_file(const std::filesystem::path& path);

    void add_rule(Rule rule) { rules_.push_back(std::move(rule)); }
    void set_transient_failures(double rate, int failing_attempts, uint64_t seed);

    std::string fetch(const ModelConfig& config, const RenderedPrompt& prompt,
                      int instance_index) override;
    BackendKind kind() const override { return BackendKind::Mock; }

private:
    std::vector<Rule> rules_;
    double transient_failure_rate_ = 0.0;
    int transient_failure_attempts_ = 1;
    uint64_t failure_seed_ = 0;
    std::mutex mutex_;
    std::map<std::string, int> attempt_counts_;
};

// Replays completions recorded under cache_dir; a miss is a transport
// failure.
class ReplayBackend : public Backend {
public:
    explicit ReplayBackend(std::filesystem::path cache_dir) : cache_dir_(std::move(cache_dir)) {}
    std::string fetch(const ModelConfig& config, const RenderedPrompt& prompt,
                      int instance_index) override;
    BackendKind kind() const override { return BackendKind::Replay; }

private:
    std::filesystem::path cache_dir_;
};

} // namespace kappaforge
