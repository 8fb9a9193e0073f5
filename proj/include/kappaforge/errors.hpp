#pragma once

#include <stdexcept>
#include <string>

namespace kappaforge {

// Base class for all harness errors so the CLI can map them to exit codes
// and a machine-readable error line. `kind` is a stable identifier.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string& kind() const { return kind_; }

private:
    std::string kind_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& message) : Error("ConfigError", message) {}
};

class UpstreamArtifactMissing : public Error {
public:
    explicit UpstreamArtifactMissing(const std::string& message)
        : Error("UpstreamArtifactMissing", message) {}
};

} // namespace kappaforge
