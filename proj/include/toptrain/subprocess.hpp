#pragma once

#include <filesystem>
#include <memory>
#include <string>

namespace toptrain {

// A long-lived child process spoken to one line at a time over stdin/stdout.
// The command runs through /bin/sh -c.
class LineProcess {
public:
    explicit LineProcess(const std::string& command);
    ~LineProcess();
    LineProcess(const LineProcess&) = delete;
    LineProcess& operator=(const LineProcess&) = delete;

    // Writes `line` plus '\n' and returns the next line of output.
    // Throws TransportError if the child has exited or closed its output.
    std::string exchange(const std::string& line);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Runs `command` through /bin/sh -c and waits; returns the exit code.
int run_shell(const std::string& command, const std::filesystem::path& working_dir = {});

}  // namespace toptrain
