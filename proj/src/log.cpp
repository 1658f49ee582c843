#include "kerbs/log.hpp"

#include <spdlog/sinks/stdout_sinks.h>

#include <cstdlib>
#include <memory>
#include <string_view>

namespace kerbs::log {

spdlog::logger& logger() {
  static const std::shared_ptr<spdlog::logger> instance = [] {
    auto l = std::make_shared<spdlog::logger>("kerbs",
                                              std::make_shared<spdlog::sinks::stderr_sink_mt>());
    l->set_pattern("[%l] %v");
    const char* env = std::getenv("KERBS_LOG");
    const std::string_view level = env ? env : "info";
    if (level == "quiet")
      l->set_level(spdlog::level::warn);
    else if (level == "debug")
      l->set_level(spdlog::level::debug);
    else
      l->set_level(spdlog::level::info);
    return l;
  }();
  return *instance;
}

}  // namespace kerbs::log
