#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace drvsynth {

struct ProcessOptions {
    std::vector<std::string> argv;
    /// nullopt removes the variable from the child's environment.
    std::map<std::string, std::optional<std::string>> env;
    std::filesystem::path cwd;
    std::optional<std::chrono::milliseconds> timeout;
    /// Bytes retained per stream; the rest is counted in *_dropped.
    std::size_t output_cap = 32 * 1024;
    bool merge_stderr = false;
};

struct ProcessResult {
    bool exec_failed = false;
    int exec_errno = 0;
    bool timed_out = false;
    std::optional<int> exit_code;
    std::optional<int> signal;
    std::string out;
    std::string err;
    std::size_t out_dropped = 0;
    std::size_t err_dropped = 0;
    double seconds = 0.0;

    bool succeeded() const { return !exec_failed && !timed_out && exit_code == 0; }
};

/// Runs a child in its own process group. On timeout the whole group is
/// killed with SIGKILL.
ProcessResult run_process(const ProcessOptions& options);

/// Long-lived child speaking a line protocol over stdin/stdout.
class LineChannel {
public:
    /// Throws std::system_error when the program cannot be executed.
    explicit LineChannel(std::vector<std::string> argv);
    ~LineChannel();

    LineChannel(const LineChannel&) = delete;
    LineChannel& operator=(const LineChannel&) = delete;

    /// Sends one request line and returns the next response line, or nullopt
    /// when the child closed its output.
    std::optional<std::string> request(const std::string& line);

private:
    int pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::string buffer_;
};

} // namespace drvsynth
