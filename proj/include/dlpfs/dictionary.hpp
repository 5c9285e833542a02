#pragma once

// Multi-term lookup-table matcher. All terms of one dictionary pattern are
// compiled into a single Aho-Corasick automaton with failure links resolved
// into direct byte transitions, so scanning stays linear regardless of the
// number of terms.

#include <algorithm>
#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dlpfs/pattern_matcher.hpp"

namespace dlpfs {

class DictionaryError : public std::runtime_error {
 public:
  explicit DictionaryError(const std::string& msg) : std::runtime_error(msg) {}
};

class DictionaryMatcher : public PatternMatcher {
 public:
  // Case-insensitive matching folds ASCII on both build and scan. With
  // word_boundary set, a hit embedded in a longer \w token is discarded.
  DictionaryMatcher(const std::vector<std::string>& terms, bool case_sensitive,
                    bool word_boundary, size_t max_match_bytes)
      : case_sensitive_(case_sensitive), word_boundary_(word_boundary) {
    if (terms.empty()) throw DictionaryError("dictionary has no terms");
    max_term_ = 0;
    for (const auto& t : terms) {
      if (t.empty()) throw DictionaryError("dictionary term is empty");
      if (t.size() > max_match_bytes)
        throw DictionaryError("dictionary term longer than max_match_bytes");
      max_term_ = std::max(max_term_, t.size());
    }
    build(terms);
  }

  FindResult find_from(bytes_view buf, size_t from,
                       const EdgeContext& edges) const override {
    FindResult result;
    const size_t n = buf.size();
    std::optional<PatternHit> best;
    std::optional<size_t> min_alive;

    bool left_uncertain = false;
    int32_t state = 0;
    size_t pos = from;
    for (; pos < n; ++pos) {
      // Past this point no new hit can start at or before best->start.
      if (best && pos > best->start + max_term_) break;
      state = nodes_[state].next[fold(buf[pos])];
      size_t match_len = nodes_[state].longest_match;
      for (int32_t s = state; match_len != 0;) {
        size_t start = pos + 1 - match_len;
        int anchored = boundary_ok(buf, start, pos + 1, edges);
        if (anchored == 1) {
          if (!best || start < best->start ||
              (start == best->start && pos + 1 > best->end)) {
            best = PatternHit{start, pos + 1, std::nullopt};
          }
          break;  // longer hits ending here start earlier; shorter ones lose
        }
        if (anchored == -1) {
          // Boundary depends on an unseen byte past the right edge.
          if (!min_alive || start < *min_alive) min_alive = start;
        } else if (anchored == -2) {
          left_uncertain = true;
        }
        // Try the next shorter hit ending at this position.
        s = nodes_[s].output_link;
        match_len = s >= 0 ? nodes_[s].longest_match : 0;
      }
    }
    if (pos >= n && edges.right_open) {
      // A partial term in progress: its start is pos - depth(state).
      size_t depth = nodes_[state].depth;
      if (depth > 0) {
        size_t start = n - depth;
        if (!min_alive || start < *min_alive) min_alive = start;
      }
    }
    result.hit = best;
    if (edges.right_open) result.min_alive_start = min_alive;
    result.left_context_uncertain = left_uncertain;
    return result;
  }

  size_t max_extent() const override { return max_term_; }

 private:
  struct Node {
    std::array<int32_t, 256> next;
    int32_t output_link = -1;   // nearest suffix state that ends a term
    size_t longest_match = 0;   // term length ending at this state (0 = none)
    size_t depth = 0;
  };

  unsigned char fold(char c) const {
    unsigned char u = static_cast<unsigned char>(c);
    if (!case_sensitive_ && u >= 'A' && u <= 'Z') u = u - 'A' + 'a';
    return u;
  }

  void build(const std::vector<std::string>& terms) {
    // Trie with per-node sparse children first.
    struct TrieNode {
      std::array<int32_t, 256> child;
      size_t term_len = 0;
      TrieNode() { child.fill(-1); }
    };
    std::vector<TrieNode> trie(1);
    for (const auto& term : terms) {
      int32_t cur = 0;
      for (char c : term) {
        unsigned char u = fold(c);
        if (trie[cur].child[u] < 0) {
          trie[cur].child[u] = static_cast<int32_t>(trie.size());
          trie.emplace_back();
          if (trie.size() > (1u << 20))
            throw DictionaryError("dictionary automaton too large");
        }
        cur = trie[cur].child[u];
      }
      trie[cur].term_len = std::max(trie[cur].term_len, term.size());
    }

    // BFS: resolve failure links into full transition tables.
    nodes_.assign(trie.size(), Node{});
    std::vector<int32_t> fail(trie.size(), 0);
    std::vector<int32_t> queue;
    queue.reserve(trie.size());
    for (int c = 0; c < 256; ++c) {
      int32_t ch = trie[0].child[c];
      nodes_[0].next[c] = ch < 0 ? 0 : ch;
      if (ch > 0) {
        fail[ch] = 0;
        nodes_[ch].depth = 1;
        queue.push_back(ch);
      }
    }
    nodes_[0].longest_match = trie[0].term_len;
    for (size_t qi = 0; qi < queue.size(); ++qi) {
      int32_t u = queue[qi];
      int32_t f = fail[u];
      nodes_[u].longest_match = trie[u].term_len;
      nodes_[u].output_link =
          trie[f].term_len != 0 ? f : nodes_[f].output_link;
      for (int c = 0; c < 256; ++c) {
        int32_t ch = trie[u].child[c];
        if (ch < 0) {
          nodes_[u].next[c] = nodes_[f].next[c];
        } else {
          nodes_[u].next[c] = ch;
          fail[ch] = nodes_[f].next[c];
          nodes_[ch].depth = nodes_[u].depth + 1;
          queue.push_back(ch);
        }
      }
    }
  }

  // 1 = boundaries hold (or anchoring off), 0 = embedded in a word,
  // -1 = depends on an unknown byte past the open right edge,
  // -2 = depends on an unknown byte before the open left edge.
  int boundary_ok(bytes_view buf, size_t start, size_t end,
                  const EdgeContext& edges) const {
    if (!word_boundary_) return 1;
    if (start > 0) {
      if (is_word_byte(static_cast<unsigned char>(buf[start - 1]))) return 0;
    } else if (edges.prev_byte) {
      if (is_word_byte(*edges.prev_byte)) return 0;
    } else if (edges.left_open) {
      return -2;
    }
    if (end < buf.size()) {
      if (is_word_byte(static_cast<unsigned char>(buf[end]))) return 0;
    } else if (edges.next_byte) {
      if (is_word_byte(*edges.next_byte)) return 0;
    } else if (edges.right_open) {
      return -1;
    }
    return 1;
  }

  std::vector<Node> nodes_;
  bool case_sensitive_;
  bool word_boundary_;
  size_t max_term_ = 0;
};

}  // namespace dlpfs
