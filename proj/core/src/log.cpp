#include "mfcp/log.hpp"

#include <cstdlib>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace mfcp::log {
namespace {

std::shared_ptr<spdlog::logger> logger() {
  static auto instance = [] {
    auto l = spdlog::stderr_color_mt("mfcp");
    l->set_pattern("[%l] %v");
    l->set_level(spdlog::level::info);
    return l;
  }();
  return instance;
}

}  // namespace

void init_from_env() {
  const char* raw = std::getenv("MFCP_LOG");
  const std::string value = raw ? raw : "";
  if (value == "error") {
    set_level(Level::Error);
  } else if (value == "debug") {
    set_level(Level::Debug);
  } else {
    set_level(Level::Info);
  }
}

void set_level(Level level) {
  switch (level) {
    case Level::Error: logger()->set_level(spdlog::level::err); break;
    case Level::Info: logger()->set_level(spdlog::level::info); break;
    case Level::Debug: logger()->set_level(spdlog::level::debug); break;
  }
}

void error(std::string_view msg) { logger()->error(msg); }
void warn(std::string_view msg) { logger()->warn(msg); }
void info(std::string_view msg) { logger()->info(msg); }
void debug(std::string_view msg) { logger()->debug(msg); }

}  // namespace mfcp::log
