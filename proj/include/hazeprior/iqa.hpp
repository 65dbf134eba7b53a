#pragma once

#include <chrono>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hazeprior/image.hpp"

namespace hazeprior {

class MetricError : public std::runtime_error {
public:
    enum class Code { Spawn, NonZeroExit, Timeout, Unparseable };

    MetricError(Code code, const std::string& message) : std::runtime_error(message), code_(code) {}
    Code code() const { return code_; }

private:
    Code code_;
};

/// No-reference quality metric. Higher scores are better.
///
/// External metrics follow a file protocol: the image is written to a
/// temporary PNG, `{path}` in the command template is replaced by its
/// shell-quoted path, and the command (run through /bin/sh) must print one
/// finite decimal number to stdout and exit 0.
class MetricHandle {
public:
    enum class Kind { NativeContrast, External };

    static MetricHandle native_contrast() { return MetricHandle(Kind::NativeContrast, {}, {}); }
    /// Throws std::invalid_argument when the command's program cannot be found
    /// or is not executable.
    static MetricHandle external(std::string command_template,
                                 std::chrono::milliseconds timeout = std::chrono::seconds(60));
    /// "contrast" selects the native metric; anything else is an external
    /// command template ("{path}" is appended when absent).
    static MetricHandle parse(const std::string& spec);

    Kind kind() const { return kind_; }
    const std::string& command_template() const { return command_; }
    std::chrono::milliseconds timeout() const { return timeout_; }
    std::string name() const;

private:
    MetricHandle(Kind kind, std::string command, std::chrono::milliseconds timeout)
        : kind_(kind), command_(std::move(command)), timeout_(timeout)
    {}

    Kind kind_;
    std::string command_;
    std::chrono::milliseconds timeout_;
};

double score(const MetricHandle& metric, const Image& image);

/// Parses the external protocol's stdout: one finite decimal real, optionally
/// surrounded by whitespace.
double parse_metric_output(const std::string& text);

struct ScoreReport {
    std::vector<std::pair<std::string, double>> scores;  // (file name, score)
    double mean = 0.0;
};

/// Scores every image of a directory in lexicographic filename order. Up to
/// `max_concurrency` external subprocesses run at once.
ScoreReport score_directory(const MetricHandle& metric, const std::filesystem::path& dir, int max_concurrency = 1);

/// Directory for temporary files: $HAZEPRIOR_TMPDIR when set, else the system default.
std::filesystem::path temp_directory();

}  // namespace hazeprior
