#ifndef DPENET_LOG_HPP_
#define DPENET_LOG_HPP_

#include <functional>
#include <iostream>
#include <string>
#include <utility>

namespace dpenet::log {

using Sink = std::function<void(const std::string&)>;

inline Sink& warning_sink() {
  static Sink sink = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
  return sink;
}

/// Replace the warning sink, returning the previous one. An empty sink drops warnings.
inline Sink set_warning_sink(Sink sink) { return std::exchange(warning_sink(), std::move(sink)); }

inline void warn(const std::string& msg) {
  if (auto& sink = warning_sink()) sink(msg);
}

}  // namespace dpenet::log

#endif  // DPENET_LOG_HPP_
