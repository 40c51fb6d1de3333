#pragma once

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>

namespace testutil {

inline std::filesystem::path data(const std::string& name) { return std::filesystem::path(TOPTRAIN_TEST_DATA) / name; }
inline std::filesystem::path support(const std::string& name) {
    return std::filesystem::path(TOPTRAIN_TEST_SUPPORT) / name;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        std::string tmpl = (std::filesystem::temp_directory_path() / "toptrain-XXXXXX").string();
        if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
        path_ = tmpl;
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    std::filesystem::path path_;
};

struct Captured {
    int status = -1;
    std::string out;
};

// Runs a shell command, capturing stdout (stderr passes through).
inline Captured capture(const std::string& command) {
    Captured c;
    FILE* pipe = popen(command.c_str(), "r");
    if (!pipe) return c;
    std::array<char, 4096> buf{};
    std::size_t n = 0;
    while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) c.out.append(buf.data(), n);
    const int raw = pclose(pipe);
    c.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    return c;
}

inline Captured cli(const std::string& args) { return capture(std::string(TOPTRAIN_CLI) + " " + args); }

}  // namespace testutil
