#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <string>
#include <string_view>
#include <utility>

namespace mkan {

using LogSink = std::function<void(std::string_view)>;

namespace detail {
struct LogState {
  std::mutex mu;
  LogSink sink = [](std::string_view msg) { std::cerr << msg << '\n'; };
};
inline LogState& log_state() {
  static LogState s;
  return s;
}
}  // namespace detail

/// Replaces the warning sink (stderr by default). Returns the previous sink.
inline LogSink set_log_sink(LogSink sink) {
  auto& s = detail::log_state();
  std::lock_guard lock(s.mu);
  return std::exchange(s.sink, std::move(sink));
}

inline void log_warning(std::string_view msg) {
  auto& s = detail::log_state();
  std::lock_guard lock(s.mu);
  if (s.sink) s.sink(std::string("warning: ") + std::string(msg));
}

}  // namespace mkan
