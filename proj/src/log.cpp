#include "flick/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <string>

namespace flick::log {

namespace {

Level from_env() {
  const char* raw = std::getenv("FLICK_LOG");
  if (raw == nullptr) return Level::info;
  const std::string value(raw);
  if (value == "error") return Level::error;
  if (value == "debug") return Level::debug;
  return Level::info;
}

std::atomic<int>& level_slot() {
  static std::atomic<int> slot{static_cast<int>(from_env())};
  return slot;
}

}  // namespace

Level threshold() { return static_cast<Level>(level_slot().load()); }

void set_threshold(Level level) { level_slot().store(static_cast<int>(level)); }

void write(Level level, std::string_view message) {
  if (static_cast<int>(level) > level_slot().load()) return;
  static constexpr const char* kTags[] = {"error", "info", "debug"};
  std::clog << "[flick " << kTags[static_cast<int>(level)] << "] " << message << '\n';
}

}  // namespace flick::log
