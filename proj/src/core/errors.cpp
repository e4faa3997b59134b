#include "vhist/errors.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace vhist {

namespace {
std::atomic<std::size_t> g_warnings{0};
std::mutex g_warn_mutex;
}  // namespace

void warn(const std::string& message) {
  ++g_warnings;
  std::lock_guard lock(g_warn_mutex);
  std::cerr << "warning: " << message << '\n';
}

std::size_t warning_count() noexcept { return g_warnings.load(); }

}  // namespace vhist
