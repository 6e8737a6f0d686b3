#include "fedpoison/log.hpp"

#include <cstdlib>
#include <string_view>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace fedpoison {

void init_logging() {
  auto logger = spdlog::stderr_color_mt("fedpoison");
  logger->set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
  spdlog::set_default_logger(logger);

  spdlog::level::level_enum level = spdlog::level::info;
  if (const char* env = std::getenv("FEDPOISON_LOG")) {
    const std::string_view v(env);
    if (v == "error") {
      level = spdlog::level::err;
    } else if (v == "debug") {
      level = spdlog::level::debug;
    } else if (v != "info" && !v.empty()) {
      spdlog::warn("FEDPOISON_LOG={} not recognised, using info", v);
    }
  }
  spdlog::set_level(level);
}

}  // namespace fedpoison
