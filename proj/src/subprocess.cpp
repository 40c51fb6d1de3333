#include "toptrain/subprocess.hpp"

#include <boost/process.hpp>

#include "toptrain/error.hpp"

namespace bp = boost::process;

namespace toptrain {

struct LineProcess::Impl {
    bp::opstream to_child;
    bp::ipstream from_child;
    bp::child child;
    std::string command;

    explicit Impl(const std::string& cmd)
        : child("/bin/sh", "-c", cmd, bp::std_in < to_child, bp::std_out > from_child), command(cmd) {}
};

LineProcess::LineProcess(const std::string& command) {
    try {
        impl_ = std::make_unique<Impl>(command);
    } catch (const std::exception& e) {
        throw TransportError("cannot start `" + command + "`: " + e.what());
    }
}

LineProcess::~LineProcess() {
    if (!impl_) return;
    impl_->to_child.pipe().close();
    std::error_code ec;
    if (!impl_->child.wait_for(std::chrono::seconds(2), ec)) impl_->child.terminate(ec);
}

std::string LineProcess::exchange(const std::string& line) {
    if (!impl_->child.running()) throw TransportError("subprocess `" + impl_->command + "` is not running");
    impl_->to_child << line << '\n';
    impl_->to_child.flush();
    if (!impl_->to_child) throw TransportError("write to `" + impl_->command + "` failed");
    std::string reply;
    if (!std::getline(impl_->from_child, reply))
        throw TransportError("subprocess `" + impl_->command + "` closed its output");
    if (!reply.empty() && reply.back() == '\r') reply.pop_back();
    return reply;
}

int run_shell(const std::string& command, const std::filesystem::path& working_dir) {
    try {
        if (working_dir.empty()) return bp::system("/bin/sh", "-c", command);
        return bp::system("/bin/sh", "-c", command, bp::start_dir(working_dir.string()));
    } catch (const std::exception& e) {
        throw TransportError("cannot run `" + command + "`: " + e.what());
    }
}

}  // namespace toptrain
