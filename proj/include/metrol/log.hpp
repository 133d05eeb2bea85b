#pragma once

#include <string_view>

namespace metrol::log {

enum class Level { Quiet, Warn, Info };

void set_level(Level level) noexcept;
Level level() noexcept;

/// Writes "metrol: warning: <message>" to stderr unless quiet.
void warn(std::string_view message);
void info(std::string_view message);

}  // namespace metrol::log
