#include "opf/log.hpp"

#include <cstdlib>
#include <iostream>

namespace opf {

LogLevel log_level() {
  static LogLevel lvl = [] {
    const char* env = std::getenv("OPFBOUND_LOG");
    if (!env) return LogLevel::Quiet;
    std::string v(env);
    if (v == "debug") return LogLevel::Debug;
    if (v == "info") return LogLevel::Info;
    return LogLevel::Quiet;
  }();
  return lvl;
}

bool log_enabled(LogLevel lvl) { return static_cast<int>(log_level()) >= static_cast<int>(lvl); }

void log_line(LogLevel lvl, const std::string& msg) {
  if (log_enabled(lvl)) std::cerr << msg << "\n";
}

}  // namespace opf
