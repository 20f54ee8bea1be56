#pragma once

#include <sstream>
#include <string>

namespace opf {

enum class LogLevel { Quiet = 0, Info = 1, Debug = 2 };

/// Level from the OPFBOUND_LOG environment variable (quiet|info|debug),
/// read once per process. Defaults to quiet.
LogLevel log_level();

bool log_enabled(LogLevel lvl);
void log_line(LogLevel lvl, const std::string& msg);

}  // namespace opf
