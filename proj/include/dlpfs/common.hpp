#pragma once

#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dlpfs {

// Owned byte buffer / borrowed byte window. File content is treated as raw
// bytes throughout; text interpretation is the policy author's concern.
using bytes = std::string;
using bytes_view = std::string_view;

inline constexpr uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t hash_bytes(bytes_view data, uint64_t seed) {
  uint64_t h = splitmix64(seed ^ 0x51afb2fe9c8d3745ull);
  for (unsigned char c : data) h = splitmix64(h ^ c);
  return h;
}

inline uint64_t hash_combine(uint64_t a, uint64_t b) {
  return splitmix64(a ^ splitmix64(b));
}

// Errno-carrying error for anything touching the backing store.
class FsError : public std::runtime_error {
 public:
  FsError(int err, const std::string& what)
      : std::runtime_error(what + ": " + std::strerror(err)), err_(err) {}
  int code() const { return err_; }

 private:
  int err_;
};

enum class LogLevel : int { Error = 0, Warn = 1, Info = 2, Debug = 3 };

namespace detail {
inline LogLevel log_threshold() {
  static LogLevel level = [] {
    const char* env = std::getenv("DLPFS_LOG");
    if (!env) return LogLevel::Warn;
    std::string_view v(env);
    if (v == "error") return LogLevel::Error;
    if (v == "info") return LogLevel::Info;
    if (v == "debug") return LogLevel::Debug;
    return LogLevel::Warn;
  }();
  return level;
}
}  // namespace detail

inline void logf(LogLevel level, const char* fmt, ...) {
  if (level > detail::log_threshold()) return;
  static const char* names[] = {"error", "warn", "info", "debug"};
  std::fprintf(stderr, "dlpfs[%s] ", names[static_cast<int>(level)]);
  va_list ap;
  va_start(ap, fmt);
  std::vfprintf(stderr, fmt, ap);
  va_end(ap);
  std::fputc('\n', stderr);
}

}  // namespace dlpfs
