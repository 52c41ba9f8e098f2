#pragma once

#include <atomic>
#include <iostream>
#include <string_view>

namespace eatk::log {

inline std::atomic<bool>& enabled() {
  static std::atomic<bool> flag{true};
  return flag;
}

inline void set_enabled(bool on) { enabled().store(on); }

inline void info(std::string_view message) {
  if (enabled().load()) std::clog << "[eatk] " << message << '\n';
}

}  // namespace eatk::log
