#include "metrol/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace metrol::log {
namespace {
std::atomic<Level> g_level{Level::Warn};
std::mutex g_mutex;
}  // namespace

void set_level(Level level) noexcept { g_level.store(level); }
Level level() noexcept { return g_level.load(); }

void warn(std::string_view message) {
    if (level() == Level::Quiet) return;
    std::scoped_lock lock(g_mutex);
    std::cerr << "metrol: warning: " << message << '\n';
}

void info(std::string_view message) {
    if (level() != Level::Info) return;
    std::scoped_lock lock(g_mutex);
    std::cerr << "metrol: " << message << '\n';
}

}  // namespace metrol::log
