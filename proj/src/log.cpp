#include "eyessl/log.hpp"

#include <iostream>
#include <mutex>

namespace eyessl {
namespace {

std::mutex g_mutex;

LogSink& sink() {
  static LogSink s = [](LogLevel level, const std::string& message) {
    std::clog << (level == LogLevel::kWarning ? "[warn] " : "[info] ") << message << '\n';
  };
  return s;
}

void emit(LogLevel level, const std::string& message) {
  std::lock_guard lock(g_mutex);
  if (sink()) sink()(level, message);
}

}  // namespace

LogSink set_log_sink(LogSink s) {
  std::lock_guard lock(g_mutex);
  LogSink previous = std::move(sink());
  sink() = std::move(s);
  return previous;
}

void log_info(const std::string& message) { emit(LogLevel::kInfo, message); }
void log_warning(const std::string& message) { emit(LogLevel::kWarning, message); }

}  // namespace eyessl
