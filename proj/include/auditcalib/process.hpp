#pragma once

// Child processes run through /bin/sh with a deadline.

#include <chrono>
#include <mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace auditcalib::process {

using Environment = std::vector<std::pair<std::string, std::string>>;

struct Result {
    int exit_code = 0;  // 128 + signal when killed by a signal
    std::string out;
    std::string err;
};

// Runs `command` with `input` on stdin. Extra variables are added to the
// inherited environment. Throws AdapterTimeout after killing the child when
// the deadline passes, AdapterFailure when it cannot be started.
Result run(const std::string& command, std::string_view input, std::chrono::milliseconds timeout,
           const Environment& extra_env = {});

// Long-lived child speaking a line protocol: one request line in, one
// response line out. Calls are serialized.
class LineProcess {
public:
    LineProcess(const std::string& command, std::chrono::milliseconds timeout);
    ~LineProcess();
    LineProcess(const LineProcess&) = delete;
    LineProcess& operator=(const LineProcess&) = delete;

    // `line` must not contain a newline.
    std::string exchange(std::string_view line);

private:
    std::mutex mutex_;
    std::chrono::milliseconds timeout_;
    int pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::string buffer_;
};

}  // namespace auditcalib::process
