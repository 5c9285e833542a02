#pragma once

// Guard-buffered stream protection.
//
// Reads fetch a window around the requested range (request +/- guard bytes,
// line-aligned for row-oriented formats), scan it with open-edge awareness,
// widen when a match might straddle the window, transform, and serve the
// requested slice. The transformed window is kept per handle: the byte past
// the last committed match is a true synchronisation point (no candidate
// match crosses it), so sequential reads of any granularity reconstruct
// exactly the whole-file transform while scanning each byte once.
//
// Writes are buffered and flushed with a retention window: bytes that could
// still belong to a match spanning a future write stay buffered until enough
// context arrives (or the handle settles), which is what lets a pattern
// assembled from several small writes be caught before it reaches disk.

#include <algorithm>
#include <memory>
#include <optional>
#include <string>

#include "dlpfs/common.hpp"
#include "dlpfs/matcher.hpp"
#include "dlpfs/policy.hpp"
#include "dlpfs/transform.hpp"

namespace dlpfs {

class RandomAccessFile {
 public:
  virtual ~RandomAccessFile() = default;
  // Reads up to n bytes at offset; short only at end of file.
  virtual bytes read_at(uint64_t offset, size_t n) const = 0;
  virtual void write_at(uint64_t offset, bytes_view data) = 0;
  virtual uint64_t size() const = 0;
};

class MemoryFile : public RandomAccessFile {
 public:
  MemoryFile() = default;
  explicit MemoryFile(bytes content) : data_(std::move(content)) {}

  bytes read_at(uint64_t offset, size_t n) const override {
    if (offset >= data_.size()) return {};
    return data_.substr(offset, std::min<uint64_t>(n, data_.size() - offset));
  }

  void write_at(uint64_t offset, bytes_view data) override {
    if (offset + data.size() > data_.size())
      data_.resize(offset + data.size(), '\0');
    data_.replace(offset, data.size(), data);
  }

  uint64_t size() const override { return data_.size(); }

  const bytes& content() const { return data_; }

 private:
  bytes data_;
};

enum class FormatMode { Raw, LineAligned };

struct GuardConfig {
  size_t left_guard = 64;
  size_t right_guard = 64;
  FormatMode format_mode = FormatMode::Raw;

  static constexpr size_t kGuardCap = 1 << 20;  // sanity cap per side

  void clamp_to_cap() {
    left_guard = std::min(left_guard, kGuardCap);
    right_guard = std::min(right_guard, kGuardCap);
  }
};

// A fetched window: requested range plus whatever guard bytes were
// obtainable within the file bounds.
struct GuardedChunk {
  uint64_t file_offset = 0;
  bytes data;
  size_t req_start = 0;  // within data
  size_t req_end = 0;
};

// Parsed policy, resolved knowledge-base tables, and the derived extent
// bound, bundled for sharing across handles. Immutable once built.
struct CompiledPolicy {
  PolicySpec spec;
  TransformTables tables;
  size_t extent = 0;

  static std::shared_ptr<const CompiledPolicy> make(PolicySpec spec,
                                                    TransformTables tables = {}) {
    auto p = std::make_shared<CompiledPolicy>();
    p->spec = std::move(spec);
    p->tables = std::move(tables);
    p->extent = max_pattern_extent(p->spec);
    return p;
  }

  bool protects_read() const { return spec.do_read && !spec.rules.empty(); }
  bool protects_write() const { return spec.do_write && !spec.rules.empty(); }
};

inline std::shared_ptr<const CompiledPolicy> empty_policy() {
  return CompiledPolicy::make(PolicySpec{});
}

// Paper default: guards sized from empirical pattern extent, floor of 64.
inline GuardConfig default_guards(const CompiledPolicy& policy,
                                  FormatMode mode = FormatMode::Raw) {
  GuardConfig g;
  g.left_guard = g.right_guard = std::max<size_t>(64, policy.extent);
  g.format_mode = mode;
  g.clamp_to_cap();
  return g;
}

// Per-open-file protection state machine. One in-flight operation at a time;
// the owner serialises calls.
class ProtectedHandle {
 public:
  ProtectedHandle(std::shared_ptr<RandomAccessFile> file,
                  std::shared_ptr<const CompiledPolicy> policy,
                  GuardConfig guard, uint64_t rng_seed)
      : file_(std::move(file)),
        policy_(std::move(policy)),
        guard_(guard),
        rng_seed_(rng_seed) {
    guard_.clamp_to_cap();
  }

  uint64_t rng_seed() const { return rng_seed_; }
  bool dirty() const { return dirty_; }
  const GuardConfig& guard() const { return guard_; }

  void invalidate_cache() {
    cache_.clear();
    cache_offset_ = 0;
    frontier_prev_.reset();
  }

  bytes read(uint64_t offset, size_t size) {
    if (!wbuf_.empty()) settle();  // read-your-writes within a handle
    // Passthrough avoids even the size lookup; pread clamps at EOF itself.
    if (!policy_->protects_read()) return file_->read_at(offset, size);
    const uint64_t fsize = file_->size();
    if (offset >= fsize || size == 0) return {};
    const uint64_t end = std::min<uint64_t>(offset + size, fsize);

    bytes out;
    out.reserve(end - offset);
    for (uint64_t o = offset; o < end;) {
      uint64_t e = std::min<uint64_t>(o + kMaxWindow, end);
      out += read_chunk(o, e, fsize);
      o = e;
    }
    return out;
  }

  size_t write(uint64_t offset, bytes_view data) {
    if (data.empty()) return 0;
    if (!policy_->protects_write()) {
      file_->write_at(offset, data);
      invalidate_cache();
      return data.size();
    }
    if (!wbuf_.empty() && offset != wbase_ + wbuf_.size()) {
      // Non-sequential write: settle what we have, then restart the run.
      settle();
    }
    if (wbuf_.empty()) {
      wbase_ = offset;
      if (!wprev_ || wprev_offset_ + 1 != offset) {
        wprev_.reset();
        if (offset > 0) {
          // Best-effort context byte; for a fresh sequential stream this is
          // the byte this handle just flushed.
          bytes b = file_->read_at(offset - 1, 1);
          if (b.size() == 1) wprev_ = static_cast<unsigned char>(b[0]);
        }
        wprev_offset_ = offset == 0 ? 0 : offset - 1;
      }
    }
    wbuf_.append(data);
    dirty_ = true;
    invalidate_cache();
    flush_ready(false);
    return data.size();
  }

  // Scans the residual buffer as final text and flushes everything.
  void settle() {
    if (!wbuf_.empty()) flush_ready(true);
    dirty_ = false;
    if (pending_error_) {
      int err = *pending_error_;
      pending_error_.reset();
      throw FsError(err, "deferred write");
    }
  }

 private:
  static constexpr uint64_t kMaxWindow = 4ull << 20;
  static constexpr size_t kMaxCache = 8u << 20;
  static constexpr size_t kMaxWriteBuffer = 4u << 20;

  uint64_t frontier() const { return cache_offset_ + cache_.size(); }

  GuardedChunk fetch_window(uint64_t w0, uint64_t w1) const {
    GuardedChunk chunk;
    chunk.file_offset = w0;
    chunk.data = file_->read_at(w0, w1 - w0);
    return chunk;
  }

  // Start of the line containing p (position after the previous newline).
  uint64_t line_start(uint64_t p) const {
    if (p == 0) return 0;
    uint64_t scanned = 0;
    uint64_t cur = p;
    while (cur > 0 && scanned < GuardConfig::kGuardCap) {
      size_t step = static_cast<size_t>(std::min<uint64_t>(cur, 4096));
      bytes block = file_->read_at(cur - step, step);
      for (size_t i = block.size(); i > 0; --i) {
        if (block[i - 1] == '\n') return cur - step + i;
      }
      cur -= step;
      scanned += step;
    }
    return cur == 0 ? 0 : p;
  }

  // Position just past the newline terminating the line containing p - 1.
  uint64_t line_end(uint64_t p, uint64_t fsize) const {
    if (p >= fsize) return fsize;
    if (p > 0) {
      bytes last = file_->read_at(p - 1, 1);
      if (last.size() == 1 && last[0] == '\n') return p;
    }
    uint64_t scanned = 0;
    uint64_t cur = p;
    while (cur < fsize && scanned < GuardConfig::kGuardCap) {
      size_t step = static_cast<size_t>(std::min<uint64_t>(fsize - cur, 4096));
      bytes block = file_->read_at(cur, step);
      size_t nl = block.find('\n');
      if (nl != bytes::npos) return cur + nl + 1;
      cur += step;
      scanned += step;
    }
    return cur >= fsize ? fsize : p;
  }

  bytes read_chunk(uint64_t o, uint64_t e, uint64_t fsize) {
    if (o >= cache_offset_ && e <= frontier())
      return cache_.substr(o - cache_offset_, e - o);

    const size_t extent = policy_->extent;
    uint64_t w0 = o > guard_.left_guard ? o - guard_.left_guard : 0;
    uint64_t w1 = std::min<uint64_t>(fsize, e + guard_.right_guard);
    if (guard_.format_mode == FormatMode::LineAligned) {
      w0 = line_start(w0);
      w1 = line_end(w1, fsize);
    }

    // Continue from the committed frontier when the window overlaps it:
    // nothing can match across that point, so the scan state is exact.
    uint64_t scan_base = w0;
    bool from_frontier = false;
    if (!cache_.empty() && w0 >= cache_offset_ && w0 <= frontier() &&
        frontier() < w1) {
      scan_base = frontier();
      from_frontier = true;
    }

    // Widening budget: a window may grow by up to the pattern extent per
    // side beyond its guard, but a zero guard means no context acquisition
    // at all (that configuration documents the guard's purpose).
    const uint64_t left_floor =
        guard_.left_guard == 0
            ? scan_base
            : (scan_base > 2 * extent ? scan_base - 2 * extent : 0);
    uint64_t right_ceiling =
        guard_.right_guard == 0
            ? w1
            : std::min<uint64_t>(fsize, w1 + 2 * extent);

    GuardedChunk chunk;
    ScanResult sr;
    EdgeContext edges;
    for (int iter = 0;; ++iter) {
      chunk = fetch_window(scan_base, w1);
      chunk.req_start = static_cast<size_t>(o > scan_base ? o - scan_base : 0);
      chunk.req_end = static_cast<size_t>(std::min<uint64_t>(e, w1) - scan_base);

      edges = EdgeContext{};
      edges.left_open = scan_base > 0 && !(from_frontier && scan_base == frontier());
      if (from_frontier && scan_base == frontier()) edges.prev_byte = frontier_prev_;
      edges.right_open = w1 < fsize;
      sr = scan_window(chunk.data, policy_->spec, edges);

      if (iter >= 4) break;
      bool widened = false;
      // Left: the unresolved prefix may not reach the requested range.
      if (edges.left_open && sr.unresolved_prefix > 0 &&
          scan_base + sr.unresolved_prefix > o && scan_base > left_floor) {
        uint64_t step = std::max<uint64_t>(extent, sr.unresolved_prefix);
        scan_base = scan_base > left_floor + step ? scan_base - step : left_floor;
        if (guard_.format_mode == FormatMode::LineAligned && scan_base > 0)
          scan_base = line_start(scan_base);
        from_frontier = false;  // we backed off behind the frontier
        widened = true;
      }
      // Right: the committed zone must cover the requested range.
      uint64_t cut_abs = scan_base + (chunk.data.size() - sr.unresolved_suffix);
      if (edges.right_open && cut_abs < e && w1 < right_ceiling) {
        uint64_t want = std::max<uint64_t>(extent, e - cut_abs);
        w1 = std::min<uint64_t>(right_ceiling, w1 + want);
        if (guard_.format_mode == FormatMode::LineAligned)
          w1 = line_end(w1, fsize);
        widened = true;
      }
      if (!widened) break;
    }

    TransformContext tctx;
    tctx.rng_seed = rng_seed_;
    tctx.buffer_file_offset = scan_base;
    tctx.tables = &policy_->tables;
    bytes transformed = apply(chunk.data, sr.spans, policy_->spec, tctx);

    // Committed zone of this window. The unresolved prefix is evidence of a
    // possible straddling match and stays out of the cache.
    uint64_t commit_lo = scan_base;
    if (edges.left_open) {
      commit_lo = std::min<uint64_t>(scan_base + sr.unresolved_prefix,
                                     scan_base + chunk.data.size());
    }
    uint64_t commit_hi = scan_base + (chunk.data.size() - sr.unresolved_suffix);

    // Assemble the reply: old cache for the head when continuing from the
    // frontier, then the freshly transformed window.
    bytes out;
    uint64_t p = o;
    if (from_frontier && o < scan_base) {
      out = cache_.substr(o - cache_offset_, scan_base - o);
      p = scan_base;
    }
    if (p < e && p - scan_base < transformed.size())
      out += transformed.substr(p - scan_base, e - p);

    // Advance the committed state only on forward progress.
    if (commit_hi > frontier() || cache_.empty()) {
      if (from_frontier && scan_base == frontier() && !cache_.empty()) {
        cache_ += transformed.substr(0, commit_hi - scan_base);
      } else if (commit_hi > commit_lo) {
        cache_ = transformed.substr(commit_lo - scan_base, commit_hi - commit_lo);
        cache_offset_ = commit_lo;
      } else {
        cache_.clear();
        cache_offset_ = commit_hi;
      }
      if (commit_hi > scan_base) {
        frontier_prev_ =
            static_cast<unsigned char>(chunk.data[commit_hi - scan_base - 1]);
      }
      if (cache_.size() > kMaxCache) {
        size_t drop = cache_.size() - kMaxCache;
        cache_.erase(0, drop);
        cache_offset_ += drop;
      }
    }
    return out;
  }

  // Flushes the settled part of the write buffer. When final, the whole
  // buffer is settled: end of data is a closed edge.
  void flush_ready(bool final) {
    while (!wbuf_.empty()) {
      size_t settled = 0;
      ScanResult sr;
      EdgeContext edges;
      edges.prev_byte = wbase_ > 0 ? wprev_ : std::nullopt;

      if (final) {
        sr = scan_window(wbuf_, policy_->spec, edges);
        settled = wbuf_.size();
      } else if (guard_.format_mode == FormatMode::LineAligned &&
                 wbuf_.size() <= kMaxWriteBuffer) {
        size_t nl = wbuf_.rfind('\n');
        if (nl == bytes::npos) return;  // no complete line yet
        settled = nl + 1;
        sr = scan_window(bytes_view(wbuf_).substr(0, settled), policy_->spec,
                         edges);
      } else {
        // Raw (or an oversized line buffer): flush everything that can no
        // longer be part of a match extending into future writes.
        edges.right_open = true;
        sr = scan_window(wbuf_, policy_->spec, edges);
        settled = wbuf_.size() - sr.unresolved_suffix;
        if (settled == 0) {
          if (wbuf_.size() <= kMaxWriteBuffer) return;
          settled = wbuf_.size() - std::min(wbuf_.size(), policy_->extent);
          if (settled == 0) return;
          sr.spans.erase(
              std::remove_if(sr.spans.begin(), sr.spans.end(),
                             [&](const MatchSpan& s) { return s.end > settled; }),
              sr.spans.end());
        }
      }
      if (settled == 0) return;

      std::vector<MatchSpan> spans;
      for (const MatchSpan& s : sr.spans)
        if (s.end <= settled) spans.push_back(s);

      TransformContext tctx;
      tctx.rng_seed = rng_seed_;
      tctx.buffer_file_offset = wbase_;
      tctx.tables = &policy_->tables;
      bytes chunk = wbuf_.substr(0, settled);
      bytes transformed = apply(chunk, spans, policy_->spec, tctx);
      try {
        file_->write_at(wbase_, transformed);
      } catch (const FsError& e) {
        if (!pending_error_) pending_error_ = e.code();
        logf(LogLevel::Error, "flush at offset %llu failed: %s",
             static_cast<unsigned long long>(wbase_), e.what());
        return;  // keep the buffer; settle() will surface the error
      }
      wprev_ = static_cast<unsigned char>(chunk.back());
      wprev_offset_ = wbase_ + settled - 1;
      wbase_ += settled;
      wbuf_.erase(0, settled);
      if (!final) return;
    }
  }

  std::shared_ptr<RandomAccessFile> file_;
  std::shared_ptr<const CompiledPolicy> policy_;
  GuardConfig guard_;
  uint64_t rng_seed_;

  // Read side: transformed, committed bytes ending at the scan frontier.
  bytes cache_;
  uint64_t cache_offset_ = 0;
  std::optional<unsigned char> frontier_prev_;

  // Write side: contiguous pending run.
  bytes wbuf_;
  uint64_t wbase_ = 0;
  std::optional<unsigned char> wprev_;
  uint64_t wprev_offset_ = 0;
  bool dirty_ = false;
  std::optional<int> pending_error_;
};

}  // namespace dlpfs
