#include "hazeprior/iqa.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <sstream>
#include <thread>

#include "hazeprior/error.hpp"
#include "hazeprior/image_io.hpp"

namespace hazeprior {

namespace fs = std::filesystem;

namespace {

std::string shell_quote(const std::string& s)
{
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') {
            out += "'\\''";
        } else {
            out += c;
        }
    }
    return out + "'";
}

bool is_executable_program(const std::string& program)
{
    if (program.empty()) return false;
    if (program.find('/') != std::string::npos) {
        return ::access(program.c_str(), X_OK) == 0;
    }
    const char* path_env = std::getenv("PATH");
    std::stringstream dirs(path_env != nullptr ? path_env : "/usr/bin:/bin");
    std::string dir;
    while (std::getline(dirs, dir, ':')) {
        const fs::path candidate = fs::path(dir.empty() ? "." : dir) / program;
        if (::access(candidate.c_str(), X_OK) == 0) return true;
    }
    return false;
}

struct ProcessResult {
    int exit_status = -1;
    std::string out;
};

// Runs `command` through /bin/sh in its own process group, capturing stdout.
// The whole group is killed when the timeout elapses.
ProcessResult run_command(const std::string& command, std::chrono::milliseconds timeout)
{
    int fds[2];
    if (::pipe2(fds, O_CLOEXEC) != 0) {
        throw MetricError(MetricError::Code::Spawn, "pipe failed for metric command");
    }
    const pid_t pid = ::fork();
    if (pid < 0) {
        ::close(fds[0]);
        ::close(fds[1]);
        throw MetricError(MetricError::Code::Spawn, "fork failed for metric command");
    }
    if (pid == 0) {
        ::setpgid(0, 0);
        ::dup2(fds[1], STDOUT_FILENO);
        const int devnull = ::open("/dev/null", O_RDONLY);
        if (devnull >= 0) ::dup2(devnull, STDIN_FILENO);
        ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }
    ::setpgid(pid, pid);
    ::close(fds[1]);

    ProcessResult result;
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    bool timed_out = false;
    char buf[4096];
    for (;;) {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) {
            timed_out = true;
            break;
        }
        pollfd pfd{fds[0], POLLIN, 0};
        const int ready = ::poll(&pfd, 1, static_cast<int>(left.count()));
        if (ready < 0 && errno == EINTR) continue;
        if (ready == 0) {
            timed_out = true;
            break;
        }
        const ssize_t n = ::read(fds[0], buf, sizeof(buf));
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) break;
        result.out.append(buf, static_cast<std::size_t>(n));
    }
    ::close(fds[0]);
    if (timed_out) {
        ::kill(-pid, SIGKILL);
        ::kill(pid, SIGKILL);
    }
    int status = 0;
    while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    if (timed_out) {
        throw MetricError(MetricError::Code::Timeout,
                          "metric command timed out after " + std::to_string(timeout.count()) + " ms");
    }
    result.exit_status = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
    return result;
}

std::atomic<unsigned long> g_temp_counter{0};

class TempFile {
public:
    explicit TempFile(const std::string& suffix)
    {
        path_ = temp_directory() / ("hazeprior_metric_" + std::to_string(::getpid()) + "_" +
                                    std::to_string(g_temp_counter.fetch_add(1)) + suffix);
    }
    ~TempFile()
    {
        std::error_code ec;
        fs::remove(path_, ec);
    }
    TempFile(const TempFile&) = delete;
    TempFile& operator=(const TempFile&) = delete;
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

}  // namespace

fs::path temp_directory()
{
    if (const char* dir = std::getenv("HAZEPRIOR_TMPDIR"); dir != nullptr && *dir != '\0') {
        return dir;
    }
    return fs::temp_directory_path();
}

MetricHandle MetricHandle::external(std::string command_template, std::chrono::milliseconds timeout)
{
    std::istringstream words(command_template);
    std::string program;
    words >> program;
    if (!is_executable_program(program)) {
        throw std::invalid_argument("metric command '" + program + "' is not an executable program");
    }
    if (timeout.count() <= 0) {
        throw std::invalid_argument("metric timeout must be positive");
    }
    return MetricHandle(Kind::External, std::move(command_template), timeout);
}

MetricHandle MetricHandle::parse(const std::string& spec)
{
    if (spec == "contrast") return native_contrast();
    std::string command = spec;
    if (command.find("{path}") == std::string::npos) command += " {path}";
    return external(command);
}

std::string MetricHandle::name() const
{
    return kind_ == Kind::NativeContrast ? "contrast" : command_;
}

double parse_metric_output(const std::string& text)
{
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) {
        throw MetricError(MetricError::Code::Unparseable, "metric printed no value");
    }
    const auto last = text.find_last_not_of(" \t\r\n");
    const std::string token = text.substr(first, last - first + 1);
    double value = 0.0;
    const char* begin = token.data();
    const char* end = token.data() + token.size();
    if (*begin == '+') ++begin;
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
        throw MetricError(MetricError::Code::Unparseable, "metric output is not a single finite number: '" + token + "'");
    }
    return value;
}

double score(const MetricHandle& metric, const Image& image)
{
    if (metric.kind() == MetricHandle::Kind::NativeContrast) {
        return rms_contrast(image);
    }
    TempFile file(".png");
    save_image(image, file.path());
    std::string command = metric.command_template();
    const std::string quoted = shell_quote(file.path().string());
    for (auto pos = command.find("{path}"); pos != std::string::npos; pos = command.find("{path}", pos + quoted.size())) {
        command.replace(pos, 6, quoted);
    }
    const ProcessResult run = run_command(command, metric.timeout());
    if (run.exit_status != 0) {
        throw MetricError(MetricError::Code::NonZeroExit,
                          "metric command exited with status " + std::to_string(run.exit_status));
    }
    return parse_metric_output(run.out);
}

ScoreReport score_directory(const MetricHandle& metric, const fs::path& dir, int max_concurrency)
{
    const auto files = list_images(dir);
    if (files.empty()) {
        throw DataError("no images to score in " + dir.string());
    }
    ScoreReport report;
    report.scores.resize(files.size());
    std::vector<std::exception_ptr> errors(files.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t i = next.fetch_add(1); i < files.size(); i = next.fetch_add(1)) {
            try {
                report.scores[i] = {files[i].filename().string(), score(metric, load_image(files[i]))};
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const int threads = metric.kind() == MetricHandle::Kind::External ? std::max(1, max_concurrency) : 1;
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    double sum = 0.0;
    for (const auto& [id, s] : report.scores) sum += s;
    report.mean = sum / static_cast<double>(report.scores.size());
    return report;
}

}  // namespace hazeprior
