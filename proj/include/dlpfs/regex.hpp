#pragma once

// Regular expression engine with a linear-time matching discipline.
//
// Patterns compile to an NFA program executed by a Pike-style VM: every
// input byte is processed once per live program state, so scanning is
// O(buffer x program) with no backtracking. Constructs that would require
// backtracking (backreferences, lookaround) are rejected at compile time.
//
// Supported syntax: literals, '.', escapes (\d \D \w \W \s \S \n \r \t \f
// \v \0 \xHH, escaped punctuation), character classes with ranges and
// negation, alternation, groups '(...)' and '(?:...)', greedy and lazy
// quantifiers (* + ? {m} {m,} {m,n}), anchors '^' '$' (line-oriented) and
// word boundaries \b \B. Matching is over raw bytes.

#include <bitset>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dlpfs/pattern_matcher.hpp"

namespace dlpfs::re {

class CompileError : public std::runtime_error {
 public:
  explicit CompileError(const std::string& msg) : std::runtime_error(msg) {}
};

using ByteClass = std::bitset<256>;

inline constexpr size_t kUnbounded = std::numeric_limits<size_t>::max();

namespace detail {

inline constexpr size_t kMaxProgramSize = 1 << 16;
inline constexpr size_t kMaxRepeatCount = 1000;

struct Node {
  enum class Kind { Empty, Class, Concat, Alternate, Repeat, Group, Assert };
  Kind kind = Kind::Empty;
  ByteClass cls;
  std::vector<Node> children;
  size_t rep_min = 0, rep_max = 0;
  bool lazy = false;
  int group_index = 0;  // 0 = non-capturing
  char assert_kind = 0; // '^', '$', 'b', 'B'
};

inline ByteClass class_digit() {
  ByteClass c;
  for (int ch = '0'; ch <= '9'; ++ch) c.set(ch);
  return c;
}

inline ByteClass class_word() {
  ByteClass c = class_digit();
  for (int ch = 'a'; ch <= 'z'; ++ch) c.set(ch);
  for (int ch = 'A'; ch <= 'Z'; ++ch) c.set(ch);
  c.set('_');
  return c;
}

inline ByteClass class_space() {
  ByteClass c;
  for (char ch : {' ', '\t', '\n', '\r', '\f', '\v'}) c.set(static_cast<unsigned char>(ch));
  return c;
}

inline ByteClass class_dot() {
  ByteClass c;
  c.set();
  c.reset('\n');
  return c;
}

class Parser {
 public:
  explicit Parser(std::string_view pat) : pat_(pat) {}

  Node parse() {
    Node n = parse_alternate();
    if (pos_ != pat_.size()) fail("unbalanced ')'");
    return n;
  }

  int group_count() const { return group_count_; }

 private:
  std::string_view pat_;
  size_t pos_ = 0;
  int group_count_ = 0;

  [[noreturn]] void fail(const std::string& msg) const {
    throw CompileError(msg + " at offset " + std::to_string(pos_));
  }

  bool eof() const { return pos_ >= pat_.size(); }
  char peek() const { return pat_[pos_]; }
  char take() { return pat_[pos_++]; }

  Node parse_alternate() {
    Node first = parse_concat();
    if (eof() || peek() != '|') return first;
    Node alt;
    alt.kind = Node::Kind::Alternate;
    alt.children.push_back(std::move(first));
    while (!eof() && peek() == '|') {
      take();
      alt.children.push_back(parse_concat());
    }
    return alt;
  }

  Node parse_concat() {
    Node cat;
    cat.kind = Node::Kind::Concat;
    while (!eof() && peek() != '|' && peek() != ')') {
      cat.children.push_back(parse_repeat());
    }
    if (cat.children.empty()) {
      cat.kind = Node::Kind::Empty;
    } else if (cat.children.size() == 1) {
      return std::move(cat.children.front());
    }
    return cat;
  }

  Node parse_repeat() {
    Node atom = parse_atom();
    while (!eof()) {
      char c = peek();
      size_t lo, hi;
      if (c == '*') {
        take(); lo = 0; hi = kUnbounded;
      } else if (c == '+') {
        take(); lo = 1; hi = kUnbounded;
      } else if (c == '?') {
        take(); lo = 0; hi = 1;
      } else if (c == '{') {
        size_t save = pos_;
        if (!parse_brace(lo, hi)) { pos_ = save; break; }
      } else {
        break;
      }
      if (atom.kind == Node::Kind::Assert)
        fail("quantifier applied to assertion");
      Node rep;
      rep.kind = Node::Kind::Repeat;
      rep.rep_min = lo;
      rep.rep_max = hi;
      if (!eof() && peek() == '?') { take(); rep.lazy = true; }
      rep.children.push_back(std::move(atom));
      atom = std::move(rep);
    }
    return atom;
  }

  // "{m}", "{m,}", "{m,n}". Returns false for a brace that is not a
  // quantifier, which is then treated as a literal '{'.
  bool parse_brace(size_t& lo, size_t& hi) {
    take();  // '{'
    if (eof() || !isdigit_(peek())) return false;
    lo = parse_int();
    if (eof()) return false;
    if (peek() == '}') {
      take(); hi = lo;
    } else if (peek() == ',') {
      take();
      if (!eof() && peek() == '}') {
        take(); hi = kUnbounded;
      } else if (!eof() && isdigit_(peek())) {
        hi = parse_int();
        if (eof() || take() != '}') return false;
      } else {
        return false;
      }
    } else {
      return false;
    }
    if (hi != kUnbounded && lo > hi) fail("bad repetition range");
    if (lo > kMaxRepeatCount || (hi != kUnbounded && hi > kMaxRepeatCount))
      fail("repetition count too large");
    return true;
  }

  static bool isdigit_(char c) { return c >= '0' && c <= '9'; }

  size_t parse_int() {
    size_t v = 0;
    while (!eof() && isdigit_(peek())) {
      v = v * 10 + static_cast<size_t>(take() - '0');
      if (v > 1000000) fail("number too large");
    }
    return v;
  }

  Node parse_atom() {
    if (eof()) fail("dangling operator");
    char c = take();
    switch (c) {
      case '(': return parse_group();
      case '[': return parse_class();
      case '.': return class_node(class_dot());
      case '^': return assert_node('^');
      case '$': return assert_node('$');
      case '\\': return parse_escape();
      case '*': case '+': case '?':
        fail("quantifier with nothing to repeat");
      case ')':
        fail("unbalanced ')'");
      default:
        return literal_node(static_cast<unsigned char>(c));
    }
  }

  Node parse_group() {
    bool capturing = true;
    if (!eof() && peek() == '?') {
      take();
      if (eof()) fail("truncated group modifier");
      char m = take();
      if (m == ':') {
        capturing = false;
      } else if (m == '=' || m == '!') {
        fail("lookahead requires backtracking and is not supported");
      } else if (m == '<') {
        fail("lookbehind/named groups are not supported");
      } else if (m == 'P') {
        fail("named groups are not supported");
      } else {
        fail(std::string("unsupported group modifier '?") + m + "'");
      }
    }
    int index = 0;
    if (capturing) index = ++group_count_;
    Node inner = parse_alternate();
    if (eof() || take() != ')') fail("missing ')'");
    Node g;
    g.kind = Node::Kind::Group;
    g.group_index = index;
    g.children.push_back(std::move(inner));
    return g;
  }

  Node parse_class() {
    ByteClass cls;
    bool negate = false;
    if (!eof() && peek() == '^') { take(); negate = true; }
    bool first = true;
    while (true) {
      if (eof()) fail("missing ']'");
      char c = peek();
      if (c == ']' && !first) { take(); break; }
      first = false;
      ByteClass item;
      bool single = false;
      unsigned char lo = 0;
      if (c == '\\') {
        take();
        item = parse_class_escape(single, lo);
      } else {
        take();
        single = true;
        lo = static_cast<unsigned char>(c);
      }
      if (single && !eof() && peek() == '-' && pos_ + 1 < pat_.size() &&
          pat_[pos_ + 1] != ']') {
        take();  // '-'
        char rc = take();
        unsigned char hi;
        if (rc == '\\') {
          bool rsingle = false;
          ByteClass rcls = parse_class_escape(rsingle, hi);
          if (!rsingle) fail("bad character range");
          (void)rcls;
        } else {
          hi = static_cast<unsigned char>(rc);
        }
        if (hi < lo) fail("reversed character range");
        for (unsigned v = lo; v <= hi; ++v) cls.set(v);
      } else if (single) {
        cls.set(lo);
      } else {
        cls |= item;
      }
    }
    if (negate) cls.flip();
    return class_node(cls);
  }

  ByteClass parse_class_escape(bool& single, unsigned char& ch) {
    if (eof()) fail("trailing backslash");
    char c = take();
    single = false;
    switch (c) {
      case 'd': return class_digit();
      case 'D': { auto x = class_digit(); x.flip(); return x; }
      case 'w': return class_word();
      case 'W': { auto x = class_word(); x.flip(); return x; }
      case 's': return class_space();
      case 'S': { auto x = class_space(); x.flip(); return x; }
      default:
        single = true;
        ch = translate_escape_char(c);
        return {};
    }
  }

  unsigned char translate_escape_char(char c) {
    switch (c) {
      case 'n': return '\n';
      case 'r': return '\r';
      case 't': return '\t';
      case 'f': return '\f';
      case 'v': return '\v';
      case '0': return '\0';
      case 'b': return '\b';  // backspace inside a class
      case 'x': {
        if (pos_ + 1 >= pat_.size()) fail("truncated \\x escape");
        auto hex = [this](char h) -> unsigned {
          if (h >= '0' && h <= '9') return static_cast<unsigned>(h - '0');
          if (h >= 'a' && h <= 'f') return static_cast<unsigned>(h - 'a' + 10);
          if (h >= 'A' && h <= 'F') return static_cast<unsigned>(h - 'A' + 10);
          fail("bad hex digit in \\x escape");
        };
        unsigned hi = hex(take());
        unsigned lo = hex(take());
        return static_cast<unsigned char>(hi * 16 + lo);
      }
      default:
        if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
            (c >= '1' && c <= '9')) {
          if (c >= '1' && c <= '9')
            fail("backreferences require backtracking and are not supported");
          fail(std::string("unknown escape '\\") + c + "'");
        }
        return static_cast<unsigned char>(c);
    }
  }

  Node parse_escape() {
    if (eof()) fail("trailing backslash");
    char c = peek();
    switch (c) {
      case 'd': take(); return class_node(class_digit());
      case 'D': { take(); auto x = class_digit(); x.flip(); return class_node(x); }
      case 'w': take(); return class_node(class_word());
      case 'W': { take(); auto x = class_word(); x.flip(); return class_node(x); }
      case 's': take(); return class_node(class_space());
      case 'S': { take(); auto x = class_space(); x.flip(); return class_node(x); }
      case 'b': take(); return assert_node('b');
      case 'B': take(); return assert_node('B');
      default: {
        take();
        return literal_node(translate_escape_char(c));
      }
    }
  }

  static Node class_node(const ByteClass& cls) {
    Node n;
    n.kind = Node::Kind::Class;
    n.cls = cls;
    return n;
  }

  static Node literal_node(unsigned char c) {
    ByteClass cls;
    cls.set(c);
    return class_node(cls);
  }

  static Node assert_node(char kind) {
    Node n;
    n.kind = Node::Kind::Assert;
    n.assert_kind = kind;
    return n;
  }
};

}  // namespace detail

enum class OpCode : uint8_t { Byte, Split, Jump, Save, Assert, Accept };

struct Inst {
  OpCode op;
  uint32_t a = 0;   // primary target / save slot
  uint32_t b = 0;   // secondary target for Split
  uint16_t cls = 0; // class table index for Byte
  char assert_kind = 0;
};

struct Program {
  std::vector<Inst> code;
  std::vector<ByteClass> classes;
  size_t min_len = 0;
  size_t max_len = 0;  // kUnbounded when a quantifier is open-ended
  bool has_capture = false;
  ByteClass participating;  // union of all byte classes
};

namespace detail {

class Emitter {
 public:
  Program emit(const Node& root) {
    // Match spans are bounded by the scan-time cap, so the program itself
    // carries only structure; lengths are computed from the AST.
    emit_node(root);
    push({OpCode::Accept});
    prog_.min_len = length(root, false);
    prog_.max_len = length(root, true);
    for (const auto& c : prog_.classes) prog_.participating |= c;
    return std::move(prog_);
  }

 private:
  Program prog_;

  uint32_t push(Inst inst) {
    if (prog_.code.size() >= kMaxProgramSize)
      throw CompileError("pattern too large after expansion");
    prog_.code.push_back(inst);
    return static_cast<uint32_t>(prog_.code.size() - 1);
  }

  uint16_t intern_class(const ByteClass& cls) {
    for (size_t i = 0; i < prog_.classes.size(); ++i)
      if (prog_.classes[i] == cls) return static_cast<uint16_t>(i);
    prog_.classes.push_back(cls);
    if (prog_.classes.size() > 0xffff) throw CompileError("too many byte classes");
    return static_cast<uint16_t>(prog_.classes.size() - 1);
  }

  void emit_node(const Node& n) {
    switch (n.kind) {
      case Node::Kind::Empty:
        break;
      case Node::Kind::Class: {
        Inst i{OpCode::Byte};
        i.cls = intern_class(n.cls);
        push(i);
        break;
      }
      case Node::Kind::Concat:
        for (const auto& c : n.children) emit_node(c);
        break;
      case Node::Kind::Alternate: {
        // Chain of splits, first alternative highest priority.
        std::vector<uint32_t> jumps;
        for (size_t i = 0; i < n.children.size(); ++i) {
          if (i + 1 < n.children.size()) {
            uint32_t split = push({OpCode::Split});
            prog_.code[split].a = split + 1;
            emit_node(n.children[i]);
            jumps.push_back(push({OpCode::Jump}));
            prog_.code[split].b = static_cast<uint32_t>(prog_.code.size());
          } else {
            emit_node(n.children[i]);
          }
        }
        uint32_t end = static_cast<uint32_t>(prog_.code.size());
        for (uint32_t j : jumps) prog_.code[j].a = end;
        break;
      }
      case Node::Kind::Group: {
        if (n.group_index == 1) {
          prog_.has_capture = true;
          Inst s{OpCode::Save}; s.a = 0; push(s);
          emit_node(n.children[0]);
          Inst e{OpCode::Save}; e.a = 1; push(e);
        } else {
          emit_node(n.children[0]);
        }
        break;
      }
      case Node::Kind::Assert: {
        Inst i{OpCode::Assert};
        i.assert_kind = n.assert_kind;
        push(i);
        break;
      }
      case Node::Kind::Repeat:
        emit_repeat(n);
        break;
    }
  }

  void emit_repeat(const Node& n) {
    const Node& body = n.children[0];
    size_t lo = n.rep_min, hi = n.rep_max;
    // Mandatory copies.
    for (size_t i = 0; i < lo; ++i) emit_node(body);
    if (hi == kUnbounded) {
      // Greedy star: L: Split(body, end); body; Jump L.
      uint32_t l = push({OpCode::Split});
      emit_node(body);
      uint32_t j = push({OpCode::Jump});
      prog_.code[j].a = l;
      uint32_t end = static_cast<uint32_t>(prog_.code.size());
      if (n.lazy) {
        prog_.code[l].a = end;
        prog_.code[l].b = l + 1;
      } else {
        prog_.code[l].a = l + 1;
        prog_.code[l].b = end;
      }
    } else {
      // Nested optionals for the remaining hi - lo copies.
      std::vector<uint32_t> splits;
      for (size_t i = lo; i < hi; ++i) {
        splits.push_back(push({OpCode::Split}));
        emit_node(body);
      }
      uint32_t end = static_cast<uint32_t>(prog_.code.size());
      for (uint32_t s : splits) {
        if (n.lazy) {
          prog_.code[s].a = end;
          prog_.code[s].b = s + 1;
        } else {
          prog_.code[s].a = s + 1;
          prog_.code[s].b = end;
        }
      }
    }
  }

  static size_t length(const Node& n, bool max) {
    switch (n.kind) {
      case Node::Kind::Empty:
      case Node::Kind::Assert:
        return 0;
      case Node::Kind::Class:
        return 1;
      case Node::Kind::Group:
        return length(n.children[0], max);
      case Node::Kind::Concat: {
        size_t total = 0;
        for (const auto& c : n.children) {
          size_t l = length(c, max);
          if (l == kUnbounded) return kUnbounded;
          total += l;
          if (total > (size_t(1) << 40)) return kUnbounded;
        }
        return total;
      }
      case Node::Kind::Alternate: {
        size_t best = max ? 0 : kUnbounded;
        for (const auto& c : n.children) {
          size_t l = length(c, max);
          if (max) {
            if (l == kUnbounded) return kUnbounded;
            best = std::max(best, l);
          } else {
            best = std::min(best, l);
          }
        }
        return best;
      }
      case Node::Kind::Repeat: {
        size_t reps = max ? n.rep_max : n.rep_min;
        if (reps == 0) return 0;
        if (reps == kUnbounded) {
          size_t inner = length(n.children[0], true);
          return inner == 0 ? 0 : kUnbounded;
        }
        size_t inner = length(n.children[0], max);
        if (inner == kUnbounded) return kUnbounded;
        return inner * reps;
      }
    }
    return 0;
  }
};

}  // namespace detail

inline Program compile(std::string_view pattern) {
  detail::Parser parser(pattern);
  detail::Node root = parser.parse();
  detail::Emitter emitter;
  return emitter.emit(root);
}

// Pike VM. Finds the leftmost match starting at or after `from`; among
// matches at the leftmost start, the longest wins. Thread lists are merged
// by program counter so each byte costs at most O(program size).
class Vm {
 public:
  Vm(const Program& prog, size_t max_match_bytes)
      : prog_(prog), cap_(max_match_bytes) {}

  FindResult find(bytes_view buf, size_t from, const EdgeContext& edges) const {
    FindResult result;
    const size_t n = buf.size();
    if (from > n) return result;

    struct Thread {
      uint32_t pc;
      size_t start;
      size_t cap0, cap1;
    };
    std::vector<Thread> clist, nlist;
    std::vector<uint32_t> mark(prog_.code.size(), 0);
    uint32_t stamp = 0;

    std::optional<PatternHit> best;
    std::optional<size_t> min_alive;
    bool left_uncertain = false;

    struct AddFrame { uint32_t pc; size_t cap0, cap1; };
    std::vector<AddFrame> stack;

    auto add_thread = [&](std::vector<Thread>& list, uint32_t pc0, size_t start,
                          size_t c0, size_t c1, size_t pos) {
      if (best && start > best->start) return;
      stack.push_back({pc0, c0, c1});
      while (!stack.empty()) {
        AddFrame f = stack.back();
        stack.pop_back();
        if (mark[f.pc] == stamp) continue;
        mark[f.pc] = stamp;
        const Inst& inst = prog_.code[f.pc];
        switch (inst.op) {
          case OpCode::Jump:
            stack.push_back({inst.a, f.cap0, f.cap1});
            break;
          case OpCode::Split:
            // LIFO: push the low-priority branch first so 'a' pops first.
            stack.push_back({inst.b, f.cap0, f.cap1});
            stack.push_back({inst.a, f.cap0, f.cap1});
            break;
          case OpCode::Save:
            if (inst.a == 0)
              stack.push_back({f.pc + 1, pos, f.cap1});
            else
              stack.push_back({f.pc + 1, f.cap0, pos});
            break;
          case OpCode::Assert: {
            int v = eval_assert(inst.assert_kind, buf, pos, edges);
            if (v == 1) {
              stack.push_back({f.pc + 1, f.cap0, f.cap1});
            } else if (v == -1) {
              // Undecidable against an open edge. Left side: record and
              // fail (such a match is suppressed anyway). Right side:
              // treat the whole thread as still in flight.
              if (pos == 0)
                left_uncertain = true;
              else if (!min_alive || start < *min_alive)
                min_alive = start;
            }
            break;
          }
          case OpCode::Accept: {
            // Zero-length matches are rejected; a match must consume bytes.
            if (pos > start &&
                (!best || start < best->start ||
                 (start == best->start && pos > best->end))) {
              PatternHit hit;
              hit.start = start;
              hit.end = pos;
              if (prog_.has_capture && f.cap0 != kNoCap && f.cap1 != kNoCap &&
                  f.cap0 <= f.cap1)
                hit.capture = std::make_pair(f.cap0, f.cap1);
              best = hit;
            }
            break;
          }
          case OpCode::Byte:
            list.push_back({f.pc, start, f.cap0, f.cap1});
            break;
        }
      }
    };

    size_t pos = from;
    bool inject = true;
    while (true) {
      if (best && pos > best->start) inject = false;
      ++stamp;
      if (inject && pos < n) add_thread(clist, 0, pos, kNoCap, kNoCap, pos);
      if (clist.empty() && (!inject || pos >= n)) break;
      if (pos >= n) {
        // Input exhausted with live threads: a longer or leftmore match may
        // exist past the edge.
        for (const Thread& t : clist) {
          if (!min_alive || t.start < *min_alive) min_alive = t.start;
        }
        break;
      }
      unsigned char c = static_cast<unsigned char>(buf[pos]);
      ++stamp;
      nlist.clear();
      for (const Thread& t : clist) {
        if (best && t.start > best->start) continue;
        const Inst& inst = prog_.code[t.pc];
        // clist holds only Byte instructions.
        if (!prog_.classes[inst.cls].test(c)) continue;
        if (pos + 1 - t.start > cap_) continue;  // span cap
        add_thread(nlist, t.pc + 1, t.start, t.cap0, t.cap1, pos + 1);
      }
      std::swap(clist, nlist);
      ++pos;
    }

    result.hit = best;
    result.left_context_uncertain = left_uncertain;
    if (edges.right_open) result.min_alive_start = min_alive;
    return result;
  }

 private:
  static constexpr size_t kNoCap = std::numeric_limits<size_t>::max();

  // 1 = holds, 0 = fails, -1 = undecidable (open edge, unknown neighbor).
  int eval_assert(char kind, bytes_view buf, size_t pos,
                  const EdgeContext& edges) const {
    const size_t n = buf.size();
    auto prev = [&]() -> std::optional<unsigned char> {
      if (pos > 0) return static_cast<unsigned char>(buf[pos - 1]);
      if (edges.prev_byte) return edges.prev_byte;
      if (edges.left_open) return std::nullopt;
      return std::optional<unsigned char>{};  // true text start: no byte
    };
    auto next = [&]() -> std::optional<unsigned char> {
      if (pos < n) return static_cast<unsigned char>(buf[pos]);
      if (edges.next_byte) return edges.next_byte;
      if (edges.right_open) return std::nullopt;
      return std::optional<unsigned char>{};
    };
    switch (kind) {
      case '^': {
        if (pos > 0) return buf[pos - 1] == '\n' ? 1 : 0;
        if (edges.prev_byte) return *edges.prev_byte == '\n' ? 1 : 0;
        return edges.left_open ? -1 : 1;
      }
      case '$': {
        if (pos < n) return buf[pos] == '\n' ? 1 : 0;
        if (edges.next_byte) return *edges.next_byte == '\n' ? 1 : 0;
        return edges.right_open ? -1 : 1;
      }
      case 'b': case 'B': {
        bool unknown_left = (pos == 0 && !edges.prev_byte && edges.left_open);
        bool unknown_right = (pos == n && !edges.next_byte && edges.right_open);
        if (unknown_left || unknown_right) return -1;
        auto p = prev();
        auto q = next();
        bool pw = p && is_word_byte(*p);
        bool qw = q && is_word_byte(*q);
        bool boundary = pw != qw;
        return (kind == 'b') == boundary ? 1 : 0;
      }
    }
    return 0;
  }

  const Program& prog_;
  size_t cap_;
};

// PatternMatcher adapter.
class RegexMatcher : public PatternMatcher {
 public:
  RegexMatcher(std::string_view pattern, size_t max_match_bytes)
      : prog_(compile(pattern)), vm_(prog_, max_match_bytes) {
    extent_ = prog_.max_len == kUnbounded
                  ? max_match_bytes
                  : std::min(prog_.max_len, max_match_bytes);
  }

  FindResult find_from(bytes_view buf, size_t from,
                       const EdgeContext& edges) const override {
    return vm_.find(buf, from, edges);
  }

  size_t max_extent() const override { return extent_; }

  const Program& program() const { return prog_; }

 private:
  Program prog_;
  Vm vm_;
  size_t extent_;
};

}  // namespace dlpfs::re
