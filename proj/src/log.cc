#include "hallucheck/log.h"

#include <atomic>
#include <iostream>
#include <mutex>

namespace hallucheck {
namespace {

std::mutex& log_mutex() {
  static std::mutex m;
  return m;
}

std::atomic<bool> g_quiet{false};

}  // namespace

void log_warning(std::string_view message) {
  std::lock_guard lock(log_mutex());
  std::cerr << "warning: " << message << '\n';
}

void log_info(std::string_view message) {
  if (g_quiet) return;
  std::lock_guard lock(log_mutex());
  std::cerr << message << '\n';
}

void set_quiet(bool quiet) { g_quiet = quiet; }

}  // namespace hallucheck
