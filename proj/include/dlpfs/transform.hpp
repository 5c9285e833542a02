#pragma once

// Span rewriting. Every replacement is fitted to the original span length
// (truncated, or right-padded with spaces): file size, offsets and seek
// behaviour through the filesystem must not change when content does.
//
// Stochastic transforms (mask, diff_priv) derive their randomness from the
// per-handle seed plus the span's identity, never from shared mutable state,
// so re-reading the same region through one handle yields identical bytes.

#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "dlpfs/common.hpp"
#include "dlpfs/matcher.hpp"
#include "dlpfs/policy.hpp"

namespace dlpfs {

class NotNumericError : public std::runtime_error {
 public:
  explicit NotNumericError(const std::string& what)
      : std::runtime_error("not numeric: " + what) {}
};

struct TransformContext {
  uint64_t rng_seed = 0;
  // Absolute file offset of buffer[0] in apply(); keeps noise stable across
  // windows that slice the file differently.
  uint64_t buffer_file_offset = 0;
  const TransformTables* tables = nullptr;
};

inline bytes fit_to_length(bytes_view replacement, size_t len) {
  bytes out(replacement.substr(0, len));
  out.resize(len, ' ');
  return out;
}

inline bytes redact(bytes_view span_bytes, char ch) {
  return bytes(span_bytes.size(), ch);
}

// Deterministic draw from [0, 1), never exactly 0 or 1.
inline double unit_uniform(uint64_t key) {
  return (static_cast<double>(splitmix64(key) >> 11) + 0.5) * 0x1p-53;
}

// Inverse-CDF Laplace(0, scale) sample, a pure function of the key.
inline double sample_laplace(double scale, uint64_t key) {
  double u = unit_uniform(key) - 0.5;  // (-0.5, 0.5)
  double sign = u < 0 ? -1.0 : 1.0;
  return -scale * sign * std::log(1.0 - 2.0 * std::fabs(u));
}

inline bytes mask(bytes_view span_bytes, const std::string& domain,
                  const TransformContext& ctx) {
  if (!ctx.tables) throw UnknownDomainError(domain);
  auto it = ctx.tables->domains.find(domain);
  if (it == ctx.tables->domains.end() || it->second.empty())
    throw UnknownDomainError(domain);
  const auto& values = it->second;
  // Same value under the same handle maps to the same surrogate.
  uint64_t h = hash_bytes(span_bytes, ctx.rng_seed);
  const std::string& pick = values[h % values.size()];
  return fit_to_length(pick, span_bytes.size());
}

inline bytes generalize(bytes_view span_bytes, const std::string& domain,
                        const TransformContext& ctx) {
  if (!ctx.tables) throw UnknownDomainError(domain);
  auto it = ctx.tables->hierarchies.find(domain);
  if (it == ctx.tables->hierarchies.end() || it->second.empty())
    throw UnknownDomainError(domain);
  auto entry = it->second.find(std::string(span_bytes));
  if (entry == it->second.end()) return redact(span_bytes, '*');
  return fit_to_length(entry->second, span_bytes.size());
}

namespace detail {

struct ParsedNumber {
  double value;
  int decimals;
};

inline std::optional<ParsedNumber> parse_decimal(bytes_view text) {
  if (text.empty()) return std::nullopt;
  size_t i = 0;
  if (text[i] == '+' || text[i] == '-') ++i;
  size_t int_digits = 0;
  while (i < text.size() && text[i] >= '0' && text[i] <= '9') { ++i; ++int_digits; }
  if (int_digits == 0) return std::nullopt;
  int decimals = 0;
  if (i < text.size() && text[i] == '.') {
    ++i;
    size_t frac_digits = 0;
    while (i < text.size() && text[i] >= '0' && text[i] <= '9') { ++i; ++frac_digits; }
    if (frac_digits == 0) return std::nullopt;
    decimals = static_cast<int>(frac_digits);
  }
  if (i != text.size()) return std::nullopt;  // trailing junk
  return ParsedNumber{std::strtod(std::string(text).c_str(), nullptr), decimals};
}

inline bytes format_decimal(double value, int decimals) {
  char buf[64];
  int len = std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  if (len < 0) return "0";
  if (static_cast<size_t>(len) >= sizeof buf) len = sizeof buf - 1;
  return bytes(buf, static_cast<size_t>(len));
}

}  // namespace detail

// Laplace perturbation of a numeric span. Noise scale is sensitivity/epsilon
// with sensitivity taken from the clamp width (1.0 when unclamped); the
// rendering keeps the original number of decimal places. span_file_offset
// identifies the span so that re-reads reproduce the same draw.
inline bytes dp_noise(bytes_view span_bytes, const TransformSpec& spec,
                      const TransformContext& ctx, uint64_t span_file_offset) {
  auto parsed = detail::parse_decimal(span_bytes);
  if (!parsed)
    throw NotNumericError(std::string(span_bytes.substr(0, 32)));
  double value = parsed->value;
  double sensitivity = 1.0;
  if (spec.clamp) {
    value = std::min(std::max(value, spec.clamp->first), spec.clamp->second);
    sensitivity = spec.clamp->second - spec.clamp->first;
  }
  double scale = sensitivity / spec.epsilon;
  uint64_t key = hash_combine(hash_combine(ctx.rng_seed, span_file_offset),
                              hash_bytes(span_bytes, 0x6c61706c61636560ull));
  double noised = value + sample_laplace(scale, key);
  return fit_to_length(detail::format_decimal(noised, parsed->decimals),
                       span_bytes.size());
}

// Rewrites each span per its rule. Spans must be disjoint, sorted, and inside
// the buffer. Output length equals input length; bytes outside the spans are
// untouched. A span whose transform fails is passed through with a warning —
// a read() must not fail because a policy mis-targeted a field.
inline bytes apply(bytes_view buffer, const std::vector<MatchSpan>& spans,
                   const PolicySpec& policy, const TransformContext& ctx) {
  bytes out(buffer);
  for (const MatchSpan& span : spans) {
    if (span.rule_index >= policy.rules.size()) continue;
    const TransformSpec& t = policy.rules[span.rule_index].transformation;
    // diff_priv targets the capture group when the pattern has one (e.g. the
    // numeric amount inside a labelled field); other transforms rewrite the
    // whole detected span.
    size_t tstart = span.start, tend = span.end;
    if (t.kind == TransformKind::DiffPriv && span.capture) {
      tstart = span.capture->first;
      tend = span.capture->second;
    }
    if (tstart >= tend || tend > buffer.size()) continue;
    bytes_view target = buffer.substr(tstart, tend - tstart);
    try {
      bytes replacement;
      switch (t.kind) {
        case TransformKind::Redact:
          replacement = redact(target, t.redact_char);
          break;
        case TransformKind::Mask:
          replacement = mask(target, t.domain, ctx);
          break;
        case TransformKind::Generalize:
          replacement = generalize(target, t.hierarchy, ctx);
          break;
        case TransformKind::DiffPriv:
          replacement = dp_noise(target, t, ctx,
                                 ctx.buffer_file_offset + tstart);
          break;
      }
      out.replace(tstart, tend - tstart, replacement);
    } catch (const NotNumericError& e) {
      logf(LogLevel::Warn, "span at offset %llu left unmodified: %s",
           static_cast<unsigned long long>(ctx.buffer_file_offset + tstart),
           e.what());
    } catch (const UnknownDomainError& e) {
      logf(LogLevel::Warn, "span at offset %llu left unmodified: %s",
           static_cast<unsigned long long>(ctx.buffer_file_offset + tstart),
           e.what());
    }
  }
  return out;
}

// The one-shot whole-buffer transformer: scan everything with both edges
// closed, then apply. Windowed protection is expected to reproduce this
// byte-for-byte whenever guards cover the policy's pattern extent.
inline bytes scrub_bytes(bytes_view content, const PolicySpec& policy,
                         const TransformContext& ctx) {
  std::vector<MatchSpan> spans = scan(content, policy);
  return apply(content, spans, policy, ctx);
}

}  // namespace dlpfs
