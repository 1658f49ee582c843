#pragma once

#include <spdlog/spdlog.h>

#include <utility>

// Thin wrapper over spdlog. The level comes from KERBS_LOG
// (quiet | info | debug, default info) the first time a logger is used.
namespace kerbs::log {

spdlog::logger& logger();

template <typename... Args>
void debug(fmt::format_string<Args...> fmt, Args&&... args) {
  logger().debug(fmt, std::forward<Args>(args)...);
}

template <typename... Args>
void info(fmt::format_string<Args...> fmt, Args&&... args) {
  logger().info(fmt, std::forward<Args>(args)...);
}

template <typename... Args>
void warn(fmt::format_string<Args...> fmt, Args&&... args) {
  logger().warn(fmt, std::forward<Args>(args)...);
}

}  // namespace kerbs::log
