#include "skelcap/logging.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace skelcap::log {

namespace {
std::atomic<Level> g_level{Level::info};
std::mutex g_mutex;

void emit(Level lvl, const char* tag, const std::string& message) {
  if (lvl < g_level.load()) return;
  std::lock_guard<std::mutex> lock(g_mutex);
  std::cerr << "[" << tag << "] " << message << '\n';
}
}  // namespace

void set_level(Level lvl) { g_level.store(lvl); }
Level level() { return g_level.load(); }

void debug(const std::string& m) { emit(Level::debug, "debug", m); }
void info(const std::string& m) { emit(Level::info, "info", m); }
void warning(const std::string& m) { emit(Level::warning, "warning", m); }
void error(const std::string& m) { emit(Level::error, "error", m); }

}  // namespace skelcap::log
