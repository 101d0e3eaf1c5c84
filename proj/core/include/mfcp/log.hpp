#pragma once

#include <string_view>

namespace mfcp::log {

enum class Level { Error, Info, Debug };

/// Reads MFCP_LOG (error|info|debug) and configures the process logger.
/// Unknown or missing values fall back to info.
void init_from_env();
void set_level(Level level);

void error(std::string_view msg);
void warn(std::string_view msg);
void info(std::string_view msg);
void debug(std::string_view msg);

}  // namespace mfcp::log
