#pragma once

// Whole-buffer and windowed scanning over a compiled policy.
//
// Overlap resolution across every rule and pattern: leftmost start first,
// then longest, then lowest rule index, then lowest pattern index. The
// emitted spans are disjoint and sorted.
//
// scan_truncated() additionally understands open edges: a window cut out of
// a larger stream. Matches whose existence or extent could be changed by
// unseen neighbouring bytes are withheld, and the unresolved byte counts at
// each edge are reported so the caller can widen the window and rescan.

#include <algorithm>
#include <optional>
#include <vector>

#include "dlpfs/policy.hpp"

namespace dlpfs {

struct MatchSpan {
  size_t start = 0;
  size_t end = 0;  // exclusive
  uint32_t rule_index = 0;
  uint32_t pattern_index = 0;
  std::optional<std::pair<size_t, size_t>> capture;

  friend bool operator==(const MatchSpan& a, const MatchSpan& b) {
    return a.start == b.start && a.end == b.end &&
           a.rule_index == b.rule_index && a.pattern_index == b.pattern_index &&
           a.capture == b.capture;
  }
};

struct ScanResult {
  std::vector<MatchSpan> spans;
  // Byte counts at each edge whose match status could not be settled
  // without seeing more of the stream.
  size_t unresolved_prefix = 0;
  size_t unresolved_suffix = 0;
};

namespace detail {

struct MatcherCursor {
  const PatternMatcher* matcher;
  uint32_t rule_index;
  uint32_t pattern_index;
  std::optional<PatternHit> memo;
  size_t memo_from = 0;
  bool memo_valid = false;
  // Accumulated across queries: a partial match seen alive at the edge in an
  // early query stays relevant even after the cursor advances past it.
  std::optional<size_t> min_alive;
  bool left_uncertain = false;
};

// True if a beats b under leftmost / longest / rule order / pattern order.
inline bool candidate_beats(const MatchSpan& a, const MatchSpan& b) {
  if (a.start != b.start) return a.start < b.start;
  if (a.end != b.end) return a.end > b.end;
  if (a.rule_index != b.rule_index) return a.rule_index < b.rule_index;
  return a.pattern_index < b.pattern_index;
}

}  // namespace detail

inline ScanResult scan_window(bytes_view buf, const PolicySpec& policy,
                              const EdgeContext& edges) {
  ScanResult result;
  if (buf.empty() || policy.rules.empty()) return result;

  std::vector<detail::MatcherCursor> cursors;
  for (uint32_t ri = 0; ri < policy.rules.size(); ++ri) {
    const Rule& rule = policy.rules[ri];
    for (uint32_t pi = 0; pi < rule.patterns.size(); ++pi) {
      cursors.push_back({rule.patterns[pi].compiled.get(), ri, pi,
                         std::nullopt, 0, false, std::nullopt, false});
    }
  }

  const size_t n = buf.size();
  const size_t extent = max_pattern_extent(policy);
  size_t pos = 0;
  size_t unresolved_prefix = 0;
  bool left_uncertain = false;

  while (pos < n) {
    std::optional<MatchSpan> best;
    for (auto& cur : cursors) {
      if (!cur.memo_valid || (cur.memo && cur.memo->start < pos)) {
        FindResult fr = cur.matcher->find_from(buf, pos, edges);
        cur.memo = fr.hit;
        cur.memo_from = pos;
        cur.memo_valid = true;
        if (fr.min_alive_start &&
            (!cur.min_alive || *fr.min_alive_start < *cur.min_alive))
          cur.min_alive = fr.min_alive_start;
        cur.left_uncertain = cur.left_uncertain || fr.left_context_uncertain;
      }
      if (!cur.memo) continue;
      MatchSpan cand{cur.memo->start, cur.memo->end, cur.rule_index,
                     cur.pattern_index, cur.memo->capture};
      if (!best || detail::candidate_beats(cand, *best)) best = cand;
    }
    if (!best) break;

    if (edges.left_open && best->start < extent) {
      // Too close to the unseen left context: a pattern straddling the edge
      // could shadow or absorb this hit. Withhold it and report the zone.
      unresolved_prefix = std::max(unresolved_prefix, best->end);
    } else {
      result.spans.push_back(*best);
    }
    pos = best->end;
  }

  // Right edge: the earliest byte that might belong to a match reaching past
  // the window. Spans crossing that point are withheld too.
  size_t cut = n;
  if (edges.right_open) {
    for (const auto& cur : cursors) {
      if (cur.min_alive) cut = std::min(cut, *cur.min_alive);
      left_uncertain = left_uncertain || cur.left_uncertain;
    }
    while (!result.spans.empty() && result.spans.back().end > cut) {
      cut = std::min(cut, result.spans.back().start);
      result.spans.pop_back();
    }
    result.unresolved_suffix = n - cut;
  } else {
    for (const auto& cur : cursors)
      left_uncertain = left_uncertain || cur.left_uncertain;
  }

  if (edges.left_open && left_uncertain)
    unresolved_prefix = std::max(unresolved_prefix, std::min(extent, n));
  result.unresolved_prefix = std::min(unresolved_prefix, n);
  return result;
}

// Scan a self-contained buffer: both edges are true ends of data.
inline std::vector<MatchSpan> scan(bytes_view buf, const PolicySpec& policy) {
  return scan_window(buf, policy, EdgeContext::closed()).spans;
}

inline ScanResult scan_truncated(bytes_view buf, const PolicySpec& policy,
                                 bool left_open, bool right_open) {
  EdgeContext edges;
  edges.left_open = left_open;
  edges.right_open = right_open;
  return scan_window(buf, policy, edges);
}

}  // namespace dlpfs
