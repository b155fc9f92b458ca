#include "segbench/parallel.hpp"

#include <charconv>
#include <cstdlib>
#include <string_view>

namespace segbench {

unsigned default_jobs() noexcept {
  if (const char* env = std::getenv("SEGBENCH_JOBS")) {
    const std::string_view text(env);
    unsigned value = 0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec == std::errc{} && end == text.data() + text.size() && value > 0) return value;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace segbench
