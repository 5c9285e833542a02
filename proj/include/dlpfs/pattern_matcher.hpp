#pragma once

#include <cstdint>
#include <optional>
#include <utility>

#include "dlpfs/common.hpp"

namespace dlpfs {

// Describes what lies beyond a scanned buffer's edges. An "open" edge abuts
// bytes that exist but were not fetched; a closed edge is a true end of data.
// prev/next bytes, when known, feed word-boundary and line-anchor checks for
// closed edges that sit mid-file (e.g. the retained tail of a write buffer).
struct EdgeContext {
  bool left_open = false;
  bool right_open = false;
  std::optional<unsigned char> prev_byte;
  std::optional<unsigned char> next_byte;

  static EdgeContext closed() { return {}; }
};

// One located occurrence, before cross-rule overlap resolution.
struct PatternHit {
  size_t start = 0;
  size_t end = 0;  // exclusive
  std::optional<std::pair<size_t, size_t>> capture;  // first capturing group
};

struct FindResult {
  std::optional<PatternHit> hit;
  // Earliest start of a partial match still viable when input ran out at an
  // open right edge. Tells the caller how far back the unsettled zone begins.
  std::optional<size_t> min_alive_start;
  // A zero-width assertion at position 0 could not be decided because the
  // left context is open and unknown.
  bool left_context_uncertain = false;
};

// A compiled pattern able to report its leftmost-longest occurrence at or
// after a given position. Implementations are immutable and shareable.
class PatternMatcher {
 public:
  virtual ~PatternMatcher() = default;

  virtual FindResult find_from(bytes_view buf, size_t from,
                               const EdgeContext& edges) const = 0;

  // Upper bound on match length, already clamped to the configured cap.
  virtual size_t max_extent() const = 0;
};

inline bool is_word_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
         (c >= '0' && c <= '9') || c == '_';
}

}  // namespace dlpfs
