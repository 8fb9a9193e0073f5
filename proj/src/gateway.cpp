#include "kappaforge/gateway.hpp"

#include "kappaforge/sha256.hpp"

#include "httplib.h"
#include "json.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

namespace kappaforge {

using nlohmann::json;

std::string backend_kind_name(BackendKind kind) {
    switch (kind) {
        case BackendKind::Live: return "live";
        case BackendKind::Mock: return "mock";
        case BackendKind::Replay: return "replay";
    }
    return "?";
}

std::string cache_key(const std::string& model_id, const std::string& prompt_fingerprint,
                      double temperature, int instance_index) {
    char temp[32];
    std::snprintf(temp, sizeof(temp), "%.6f", temperature);
    std::string canonical = model_id;
    canonical.push_back('\x1f');
    canonical += prompt_fingerprint;
    canonical.push_back('\x1f');
    canonical += temp;
    canonical.push_back('\x1f');
    canonical += std::to_string(instance_index);
    return sha256_hex(canonical);
}

FileCallLog::FileCallLog(const std::filesystem::path& path) : path_(path.string()) {}

void FileCallLog::record(const CallLogEntry& entry) {
    std::lock_guard<std::mutex> lock(mutex_);
    std::ofstream out(path_, std::ios::app);
    json j;
    j["model"] = entry.model_id;
    j["prompt_fp"] = entry.prompt_fingerprint;
    j["instance"] = entry.instance_index;
    j["attempt"] = entry.attempt;
    j["success"] = entry.success;
    if (!entry.error.empty()) j["error"] = entry.error;
    out << j.dump() << "\n";
}

namespace {

std::chrono::milliseconds backoff_delay(const RetryPolicy& retry, int attempt) {
    double factor = std::pow(2.0, attempt - 1);
    double ms = double(retry.base_backoff.count()) * factor;
    if (retry.jitter) {
        thread_local std::mt19937_64 rng(std::random_device{}());
        double scale = 0.5 + double(rng() % 1000) / 1000.0; // [0.5, 1.5)
        ms *= scale;
    }
    return std::chrono::milliseconds(long(ms));
}

void write_cache_entry(const std::filesystem::path& dir, const std::string& key,
                       const std::string& text) {
    std::filesystem::create_directories(dir);
    std::filesystem::path final_path = dir / key;
    // Unique temp name per writer; concurrent writers of the same key race
    // only on the atomic rename.
    std::ostringstream tmp_name;
    tmp_name << key << ".tmp." << std::this_thread::get_id();
    std::filesystem::path tmp_path = dir / tmp_name.str();
    {
        std::ofstream out(tmp_path, std::ios::binary);
        out << text;
    }
    std::error_code ec;
    std::filesystem::rename(tmp_path, final_path, ec);
    if (ec) {
        std::filesystem::remove(tmp_path, ec);
    }
}

// Global pacing shared across threads when min_request_interval is set.
class RequestPacer {
public:
    void wait(std::chrono::milliseconds interval,
              const std::function<void(std::chrono::milliseconds)>& sleep) {
        if (interval.count() <= 0) return;
        std::chrono::steady_clock::time_point scheduled;
        {
            std::lock_guard<std::mutex> lock(mutex_);
            auto now = std::chrono::steady_clock::now();
            if (next_ < now) next_ = now;
            scheduled = next_;
            next_ += interval;
        }
        auto now = std::chrono::steady_clock::now();
        if (scheduled > now) {
            sleep(std::chrono::duration_cast<std::chrono::milliseconds>(scheduled - now));
        }
    }

private:
    std::mutex mutex_;
    std::chrono::steady_clock::time_point next_{};
};

RequestPacer g_pacer;

} // namespace

CompletionResult complete(Backend& backend, const ModelConfig& config,
                          const RenderedPrompt& prompt, int instance_index,
                          const GatewayOptions& options) {
    auto sleep = options.sleep
                     ? options.sleep
                     : [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    int max_attempts = std::max(1, config.retry.max_attempts);
    std::string last_error;
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        g_pacer.wait(config.min_request_interval, sleep);
        auto t0 = std::chrono::steady_clock::now();
        try {
            std::string text = backend.fetch(config, prompt, instance_index);
            auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::steady_clock::now() - t0);
            if (options.log) {
                options.log->record({config.model_id, prompt.fingerprint, instance_index,
                                     attempt, true, ""});
            }
            if (options.cache_dir && backend.kind() != BackendKind::Replay) {
                write_cache_entry(*options.cache_dir,
                                  cache_key(config.model_id, prompt.fingerprint,
                                            config.temperature, instance_index),
                                  text);
            }
            Completion completion;
            completion.text = std::move(text);
            completion.attempt_count = attempt;
            completion.latency = latency;
            completion.backend_kind = backend.kind();
            return completion;
        } catch (const TransportFailure& failure) {
            last_error = failure.what();
            if (options.log) {
                options.log->record({config.model_id, prompt.fingerprint, instance_index,
                                     attempt, false, last_error});
            }
            if (attempt < max_attempts) {
                sleep(backoff_delay(config.retry, attempt));
            }
        }
    }
    return GatewayError{"TransportExhausted: " + last_error, max_attempts};
}

std::vector<CompletionResult> complete_batch(Backend& backend, const ModelConfig& config,
                                             const std::vector<RenderedPrompt>& prompts,
                                             int instance_index, const GatewayOptions& options) {
    std::vector<CompletionResult> results(prompts.size(),
                                          GatewayError{"not attempted", 0});
    if (prompts.empty()) return results;

    size_t workers = std::min<size_t>(std::max(1, config.max_in_flight), prompts.size());
    std::atomic<size_t> next{0};
    auto run = [&] {
        while (true) {
            size_t i = next.fetch_add(1);
            if (i >= prompts.size()) break;
            results[i] = complete(backend, config, prompts[i], instance_index, options);
        }
    };
    if (workers == 1) {
        run();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(workers);
        for (size_t w = 0; w < workers; ++w) {
            threads.emplace_back(run);
        }
        for (auto& t : threads) t.join();
    }
    return results;
}

std::string HttpBackend::fetch(const ModelConfig& config, const RenderedPrompt& prompt,
                               int /*instance_index*/) {
    // Split the endpoint into client base and request path.
    const std::string& url = config.endpoint;
    size_t scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw TransportFailure("endpoint is not a URL: " + url);
    }
    size_t path_start = url.find('/', scheme_end + 3);
    std::string base = path_start == std::string::npos ? url : url.substr(0, path_start);
    std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

    httplib::Client client(base);
    client.set_connection_timeout(config.timeout);
    client.set_read_timeout(config.timeout);

    httplib::Headers headers;
    if (const char* key = std::getenv("KAPPAFORGE_API_KEY")) {
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    json body;
    body["model"] = config.model_id;
    body["temperature"] = config.temperature;
    body["messages"] = json::array({json{{"role", "user"}, {"content", prompt.text}}});

    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) {
        throw TransportFailure("connection error: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw TransportFailure("HTTP " + std::to_string(res->status));
    }
    json parsed = json::parse(res->body, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("choices") || parsed["choices"].empty() ||
        !parsed["choices"][0].contains("message") ||
        !parsed["choices"][0]["message"].contains("content")) {
        throw TransportFailure("malformed chat-completions response");
    }
    return parsed["choices"][0]["message"]["content"].get<std::string>();
}

std::unique_ptr<MockBackend> MockBackend::from_script_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open mock script: " + path.string());
    }
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw ConfigError("mock script is not a JSON object: " + path.string());
    }
    auto backend_ptr = std::make_unique<MockBackend>();
    MockBackend& backend = *backend_ptr;
    if (j.contains("rules")) {
        for (const auto& rj : j["rules"]) {
            Rule rule;
            if (rj.contains("model")) rule.model = rj["model"].get<std::string>();
            if (rj.contains("task")) rule.task = rj["task"].get<std::string>();
            if (rj.contains("strategy")) rule.strategy = rj["strategy"].get<std::string>();
            if (rj.contains("fingerprint")) rule.fingerprint = rj["fingerprint"].get<std::string>();
            if (rj.contains("body_contains"))
                rule.body_contains = rj["body_contains"].get<std::string>();
            if (!rj.contains("response")) {
                throw ConfigError("mock rule lacks a response");
            }
            rule.response = rj["response"].get<std::string>();
            backend.rules_.push_back(std::move(rule));
        }
    }
    double rate = j.value("transient_failure_rate", 0.0);
    if (rate > 0.0) {
        backend.set_transient_failures(rate, j.value("transient_failure_attempts", 1),
                                       j.value("failure_seed", uint64_t(1)));
    }
    return backend_ptr;
}

void MockBackend::set_transient_failures(double rate, int failing_attempts, uint64_t seed) {
    transient_failure_rate_ = rate;
    transient_failure_attempts_ = failing_attempts;
    failure_seed_ = seed;
}

std::string MockBackend::fetch(const ModelConfig& config, const RenderedPrompt& prompt,
                               int instance_index) {
    if (transient_failure_rate_ > 0.0) {
        std::string key = cache_key(config.model_id, prompt.fingerprint, config.temperature,
                                    instance_index);
        uint64_t h = splitmix64(fnv1a64(key) ^ failure_seed_);
        bool selected = double(h % 10000) < transient_failure_rate_ * 10000.0;
        if (selected) {
            int seen;
            {
                std::lock_guard<std::mutex> lock(mutex_);
                seen = ++attempt_counts_[key];
            }
            if (seen <= transient_failure_attempts_) {
                throw TransportFailure("injected transient failure");
            }
        }
    }

    // body_contains matches the fenced user text, not the instruction text;
    // the task templates themselves mention words like "casino".
    std::string_view body = prompt.text;
    const std::string marker = "Here is the text you need to analyze:\n```";
    size_t start = prompt.text.find(marker);
    if (start != std::string::npos) {
        size_t from = start + marker.size();
        size_t end = prompt.text.rfind("```");
        if (end != std::string::npos && end > from) {
            body = std::string_view(prompt.text).substr(from, end - from);
        }
    }

    for (const auto& rule : rules_) {
        if (rule.model && *rule.model != config.model_id) continue;
        if (rule.task && *rule.task != task_slug(prompt.task)) continue;
        if (rule.strategy && *rule.strategy != strategy_slug(prompt.strategy)) continue;
        if (rule.fingerprint && *rule.fingerprint != prompt.fingerprint) continue;
        if (rule.body_contains && body.find(*rule.body_contains) == std::string_view::npos)
            continue;
        return rule.response;
    }
    throw TransportFailure("no mock rule matches prompt " + prompt.fingerprint.substr(0, 12) +
                           " (task " + task_slug(prompt.task) + ")");
}

std::string ReplayBackend::fetch(const ModelConfig& config, const RenderedPrompt& prompt,
                                 int instance_index) {
    std::filesystem::path path =
        cache_dir_ / cache_key(config.model_id, prompt.fingerprint, config.temperature,
                               instance_index);
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw TransportFailure("replay cache miss: " + path.filename().string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

} // namespace kappaforge
