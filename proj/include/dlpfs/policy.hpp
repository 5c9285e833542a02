#pragma once

// Behaviour-specification file handling. The policy is a single JSON object:
//
//   {
//     "do_read":  bool,
//     "do_write": bool,
//     "rules": [{
//       "patterns": [{"type": "re",   "spec": "<regex>"} |
//                    {"type": "dict", "spec": ["term", ...],
//                     "case_sensitive"?: bool, "word_boundary"?: bool}],
//       "transformation":
//            {"type": "redact", "char"?: "<one byte>"}
//          | {"type": "mask", "domain": "<sidecar path>" | ["v", ...]}
//          | {"type": "generalize", "hierarchy": "<sidecar path>" | {...}}
//          | {"type": "diff_priv", "mechanism": "laplace", "e": eps,
//             "d"?: delta, "clamp"?: [lo, hi]}
//     }, ...]
//   }
//
// The schema is strict: a missing, mistyped, or unknown field is an error.
// A typo in a protection policy must fail loudly, not silently no-op.

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dlpfs/common.hpp"
#include "dlpfs/dictionary.hpp"
#include "dlpfs/pattern_matcher.hpp"
#include "dlpfs/regex.hpp"

namespace dlpfs {

class PolicyError : public std::runtime_error {
 public:
  explicit PolicyError(const std::string& msg) : std::runtime_error(msg) {}
};

class PolicySyntaxError : public PolicyError {
 public:
  explicit PolicySyntaxError(const std::string& msg)
      : PolicyError("policy syntax error: " + msg) {}
};

class PolicySchemaError : public PolicyError {
 public:
  PolicySchemaError(const std::string& path, const std::string& msg)
      : PolicyError("policy schema error at " + path + ": " + msg),
        path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

class PolicyPatternError : public PolicyError {
 public:
  PolicyPatternError(size_t rule, size_t pattern, const std::string& msg)
      : PolicyError("policy pattern error at rules[" + std::to_string(rule) +
                    "].patterns[" + std::to_string(pattern) + "]: " + msg),
        rule_(rule), pattern_(pattern) {}
  size_t rule_index() const { return rule_; }
  size_t pattern_index() const { return pattern_; }

 private:
  size_t rule_, pattern_;
};

class UnknownDomainError : public PolicyError {
 public:
  explicit UnknownDomainError(const std::string& domain)
      : PolicyError("unknown or empty domain: " + domain) {}
};

enum class PatternKind { Regex, Dictionary };

struct Pattern {
  PatternKind kind = PatternKind::Regex;
  std::string regex;                   // Regex
  std::vector<std::string> terms;      // Dictionary
  bool case_sensitive = false;         // Dictionary
  bool word_boundary = true;           // Dictionary
  std::shared_ptr<const PatternMatcher> compiled;
};

enum class TransformKind { Redact, Mask, Generalize, DiffPriv };
enum class DpMechanism { Laplace };

struct TransformSpec {
  TransformKind kind = TransformKind::Redact;
  char redact_char = '*';
  // Mask/generalize references are either sidecar file paths or inline
  // tables; inline tables get a synthetic "#rules[i]" key.
  std::string domain;
  std::vector<std::string> domain_inline;
  bool domain_is_inline = false;
  std::string hierarchy;
  std::map<std::string, std::string> hierarchy_inline;
  bool hierarchy_is_inline = false;
  DpMechanism mechanism = DpMechanism::Laplace;
  double epsilon = 0.0;
  double delta = 0.0;
  std::optional<std::pair<double, double>> clamp;
};

struct Rule {
  std::vector<Pattern> patterns;
  TransformSpec transformation;
};

struct PolicySpec {
  bool do_read = false;
  bool do_write = false;
  std::vector<Rule> rules;
  size_t max_match_bytes = 1024;
};

struct ParseOptions {
  // Matches never exceed this many bytes; unbounded quantifiers are capped
  // here, which is what makes guard sizing well defined.
  size_t max_match_bytes = 1024;
};

namespace detail {

using json = nlohmann::json;

inline void require_keys(const json& obj, const std::string& path,
                         std::initializer_list<const char*> required,
                         std::initializer_list<const char*> optional = {}) {
  for (const char* key : required) {
    if (!obj.contains(key))
      throw PolicySchemaError(path, std::string("missing field '") + key + "'");
  }
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* key : required)
      if (it.key() == key) { known = true; break; }
    if (!known)
      for (const char* key : optional)
        if (it.key() == key) { known = true; break; }
    if (!known)
      throw PolicySchemaError(path, "unknown field '" + it.key() + "'");
  }
}

inline bool get_bool(const json& obj, const std::string& path, const char* key) {
  const json& v = obj.at(key);
  if (!v.is_boolean())
    throw PolicySchemaError(path + "." + key, "expected a boolean");
  return v.get<bool>();
}

inline std::string get_string(const json& v, const std::string& path) {
  if (!v.is_string()) throw PolicySchemaError(path, "expected a string");
  return v.get<std::string>();
}

inline double get_number(const json& v, const std::string& path) {
  if (!v.is_number()) throw PolicySchemaError(path, "expected a number");
  return v.get<double>();
}

inline Pattern parse_pattern(const json& p, size_t rule_idx, size_t pat_idx,
                             const ParseOptions& opts) {
  std::string path = "rules[" + std::to_string(rule_idx) + "].patterns[" +
                     std::to_string(pat_idx) + "]";
  if (!p.is_object()) throw PolicySchemaError(path, "expected an object");
  std::string type = get_string(p.count("type") ? p.at("type") : json(),
                                path + ".type");
  Pattern out;
  if (type == "re") {
    require_keys(p, path, {"type", "spec"});
    out.kind = PatternKind::Regex;
    out.regex = get_string(p.at("spec"), path + ".spec");
    try {
      out.compiled = std::make_shared<re::RegexMatcher>(out.regex,
                                                        opts.max_match_bytes);
    } catch (const re::CompileError& e) {
      throw PolicyPatternError(rule_idx, pat_idx, e.what());
    }
  } else if (type == "dict") {
    require_keys(p, path, {"type", "spec"}, {"case_sensitive", "word_boundary"});
    out.kind = PatternKind::Dictionary;
    const json& spec = p.at("spec");
    if (!spec.is_array() || spec.empty())
      throw PolicySchemaError(path + ".spec",
                              "expected a non-empty array of terms");
    for (size_t i = 0; i < spec.size(); ++i) {
      std::string term = get_string(spec[i], path + ".spec[" + std::to_string(i) + "]");
      if (term.empty())
        throw PolicySchemaError(path + ".spec[" + std::to_string(i) + "]",
                                "term must not be empty");
      out.terms.push_back(std::move(term));
    }
    if (p.contains("case_sensitive")) {
      if (!p.at("case_sensitive").is_boolean())
        throw PolicySchemaError(path + ".case_sensitive", "expected a boolean");
      out.case_sensitive = p.at("case_sensitive").get<bool>();
    }
    if (p.contains("word_boundary")) {
      if (!p.at("word_boundary").is_boolean())
        throw PolicySchemaError(path + ".word_boundary", "expected a boolean");
      out.word_boundary = p.at("word_boundary").get<bool>();
    }
    try {
      out.compiled = std::make_shared<DictionaryMatcher>(
          out.terms, out.case_sensitive, out.word_boundary,
          opts.max_match_bytes);
    } catch (const DictionaryError& e) {
      throw PolicyPatternError(rule_idx, pat_idx, e.what());
    }
  } else {
    throw PolicySchemaError(path + ".type",
                            "expected \"re\" or \"dict\", got \"" + type + "\"");
  }
  return out;
}

inline TransformSpec parse_transformation(const json& t, size_t rule_idx) {
  std::string path = "rules[" + std::to_string(rule_idx) + "].transformation";
  if (!t.is_object()) throw PolicySchemaError(path, "expected an object");
  if (!t.contains("type"))
    throw PolicySchemaError(path, "missing field 'type'");
  std::string type = get_string(t.at("type"), path + ".type");
  TransformSpec out;
  if (type == "redact") {
    require_keys(t, path, {"type"}, {"char"});
    out.kind = TransformKind::Redact;
    if (t.contains("char")) {
      std::string c = get_string(t.at("char"), path + ".char");
      if (c.size() != 1)
        throw PolicySchemaError(path + ".char", "expected a single byte");
      out.redact_char = c[0];
    }
  } else if (type == "mask") {
    require_keys(t, path, {"type", "domain"});
    out.kind = TransformKind::Mask;
    const json& d = t.at("domain");
    if (d.is_string()) {
      out.domain = d.get<std::string>();
      if (out.domain.empty())
        throw PolicySchemaError(path + ".domain", "path must not be empty");
    } else if (d.is_array()) {
      if (d.empty())
        throw PolicySchemaError(path + ".domain", "inline domain is empty");
      for (size_t i = 0; i < d.size(); ++i)
        out.domain_inline.push_back(
            get_string(d[i], path + ".domain[" + std::to_string(i) + "]"));
      out.domain_is_inline = true;
      out.domain = "#rules[" + std::to_string(rule_idx) + "].domain";
    } else {
      throw PolicySchemaError(path + ".domain",
                              "expected a sidecar path or an array of values");
    }
  } else if (type == "generalize") {
    require_keys(t, path, {"type", "hierarchy"});
    out.kind = TransformKind::Generalize;
    const json& h = t.at("hierarchy");
    if (h.is_string()) {
      out.hierarchy = h.get<std::string>();
      if (out.hierarchy.empty())
        throw PolicySchemaError(path + ".hierarchy", "path must not be empty");
    } else if (h.is_object()) {
      if (h.empty())
        throw PolicySchemaError(path + ".hierarchy",
                                "hierarchy mapping must not be empty");
      for (auto it = h.begin(); it != h.end(); ++it)
        out.hierarchy_inline[it.key()] =
            get_string(it.value(), path + ".hierarchy." + it.key());
      out.hierarchy_is_inline = true;
      out.hierarchy = "#rules[" + std::to_string(rule_idx) + "].hierarchy";
    } else {
      throw PolicySchemaError(path + ".hierarchy",
                              "expected a sidecar path or a value mapping");
    }
  } else if (type == "diff_priv") {
    require_keys(t, path, {"type", "mechanism", "e"}, {"d", "clamp"});
    out.kind = TransformKind::DiffPriv;
    std::string mech = get_string(t.at("mechanism"), path + ".mechanism");
    if (mech != "laplace")
      throw PolicySchemaError(path + ".mechanism",
                              "expected \"laplace\", got \"" + mech + "\"");
    out.mechanism = DpMechanism::Laplace;
    out.epsilon = get_number(t.at("e"), path + ".e");
    if (!(out.epsilon > 0))
      throw PolicySchemaError(path + ".e", "epsilon must be > 0");
    if (t.contains("d")) {
      out.delta = get_number(t.at("d"), path + ".d");
      if (out.delta < 0 || out.delta >= 1)
        throw PolicySchemaError(path + ".d", "delta must be in [0, 1)");
    }
    if (t.contains("clamp")) {
      const json& c = t.at("clamp");
      if (!c.is_array() || c.size() != 2)
        throw PolicySchemaError(path + ".clamp", "expected [lo, hi]");
      double lo = get_number(c[0], path + ".clamp[0]");
      double hi = get_number(c[1], path + ".clamp[1]");
      if (!(lo < hi))
        throw PolicySchemaError(path + ".clamp", "lo must be < hi");
      out.clamp = std::make_pair(lo, hi);
    }
  } else {
    throw PolicySchemaError(
        path + ".type",
        "expected one of redact/mask/generalize/diff_priv, got \"" + type + "\"");
  }
  return out;
}

}  // namespace detail

inline PolicySpec parse_policy(bytes_view content, ParseOptions opts = {}) {
  using detail::json;
  json doc;
  try {
    doc = json::parse(content);
  } catch (const json::parse_error& e) {
    throw PolicySyntaxError(e.what());
  }
  if (!doc.is_object())
    throw PolicySchemaError("$", "top level must be an object");
  detail::require_keys(doc, "$", {"do_read", "do_write", "rules"});

  PolicySpec spec;
  spec.max_match_bytes = opts.max_match_bytes;
  spec.do_read = detail::get_bool(doc, "$", "do_read");
  spec.do_write = detail::get_bool(doc, "$", "do_write");

  const json& rules = doc.at("rules");
  if (!rules.is_array())
    throw PolicySchemaError("$.rules", "expected an array");
  for (size_t ri = 0; ri < rules.size(); ++ri) {
    const json& r = rules[ri];
    std::string rpath = "rules[" + std::to_string(ri) + "]";
    if (!r.is_object()) throw PolicySchemaError(rpath, "expected an object");
    detail::require_keys(r, rpath, {"patterns", "transformation"});
    Rule rule;
    const json& pats = r.at("patterns");
    if (!pats.is_array() || pats.empty())
      throw PolicySchemaError(rpath + ".patterns",
                              "expected a non-empty array");
    for (size_t pi = 0; pi < pats.size(); ++pi)
      rule.patterns.push_back(detail::parse_pattern(pats[pi], ri, pi, opts));
    rule.transformation = detail::parse_transformation(r.at("transformation"), ri);
    spec.rules.push_back(std::move(rule));
  }
  return spec;
}

inline bytes serialize_policy(const PolicySpec& spec) {
  using detail::json;
  json doc;
  doc["do_read"] = spec.do_read;
  doc["do_write"] = spec.do_write;
  doc["rules"] = json::array();
  for (const Rule& rule : spec.rules) {
    json r;
    r["patterns"] = json::array();
    for (const Pattern& p : rule.patterns) {
      json pj;
      if (p.kind == PatternKind::Regex) {
        pj["type"] = "re";
        pj["spec"] = p.regex;
      } else {
        pj["type"] = "dict";
        pj["spec"] = p.terms;
        if (p.case_sensitive) pj["case_sensitive"] = true;
        if (!p.word_boundary) pj["word_boundary"] = false;
      }
      r["patterns"].push_back(std::move(pj));
    }
    json t;
    const TransformSpec& ts = rule.transformation;
    switch (ts.kind) {
      case TransformKind::Redact:
        t["type"] = "redact";
        if (ts.redact_char != '*') t["char"] = std::string(1, ts.redact_char);
        break;
      case TransformKind::Mask:
        t["type"] = "mask";
        if (ts.domain_is_inline) t["domain"] = ts.domain_inline;
        else t["domain"] = ts.domain;
        break;
      case TransformKind::Generalize:
        t["type"] = "generalize";
        if (ts.hierarchy_is_inline) t["hierarchy"] = ts.hierarchy_inline;
        else t["hierarchy"] = ts.hierarchy;
        break;
      case TransformKind::DiffPriv:
        t["type"] = "diff_priv";
        t["mechanism"] = "laplace";
        t["e"] = ts.epsilon;
        if (ts.delta != 0) t["d"] = ts.delta;
        if (ts.clamp) t["clamp"] = {ts.clamp->first, ts.clamp->second};
        break;
    }
    r["transformation"] = std::move(t);
    doc["rules"].push_back(std::move(r));
  }
  return doc.dump(2);
}

// Upper bound on any single match the policy can produce. Guards and write
// retention windows are sized from this.
inline size_t max_pattern_extent(const PolicySpec& spec) {
  size_t extent = 0;
  for (const Rule& rule : spec.rules)
    for (const Pattern& p : rule.patterns)
      extent = std::max(extent, p.compiled->max_extent());
  return extent;
}

// Surrogate and hierarchy tables, keyed by the reference string used in the
// policy (a sidecar path, or the synthetic key of an inline table).
struct TransformTables {
  std::map<std::string, std::vector<std::string>> domains;
  std::map<std::string, std::map<std::string, std::string>> hierarchies;
};

namespace detail {

inline json load_sidecar(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UnknownDomainError(path.string() + " (cannot open)");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw PolicySyntaxError(path.string() + ": " + e.what());
  }
}

}  // namespace detail

// Resolves every mask domain and generalize hierarchy the policy references.
// Sidecar paths are resolved relative to base_dir (normally the directory
// containing the policy file). Missing or empty tables fail here, at load
// time, not on the data path.
inline TransformTables load_transform_tables(
    const PolicySpec& spec, const std::filesystem::path& base_dir) {
  using detail::json;
  TransformTables tables;
  for (const Rule& rule : spec.rules) {
    const TransformSpec& t = rule.transformation;
    if (t.kind == TransformKind::Mask) {
      if (t.domain_is_inline) {
        tables.domains[t.domain] = t.domain_inline;
      } else if (!tables.domains.count(t.domain)) {
        json v = detail::load_sidecar(base_dir / t.domain);
        if (!v.is_array() || v.empty())
          throw UnknownDomainError(t.domain + " (expected a non-empty array)");
        std::vector<std::string> values;
        for (const auto& item : v)
          values.push_back(detail::get_string(item, t.domain));
        tables.domains[t.domain] = std::move(values);
      }
      if (tables.domains[t.domain].empty()) throw UnknownDomainError(t.domain);
    } else if (t.kind == TransformKind::Generalize) {
      if (t.hierarchy_is_inline) {
        tables.hierarchies[t.hierarchy] = t.hierarchy_inline;
      } else if (!tables.hierarchies.count(t.hierarchy)) {
        json v = detail::load_sidecar(base_dir / t.hierarchy);
        if (!v.is_object() || v.empty())
          throw UnknownDomainError(t.hierarchy + " (expected a non-empty mapping)");
        std::map<std::string, std::string> mapping;
        for (auto it = v.begin(); it != v.end(); ++it)
          mapping[it.key()] = detail::get_string(it.value(), t.hierarchy);
        tables.hierarchies[t.hierarchy] = std::move(mapping);
      }
      if (tables.hierarchies[t.hierarchy].empty())
        throw UnknownDomainError(t.hierarchy);
    }
  }
  return tables;
}

inline bool operator==(const TransformSpec& a, const TransformSpec& b) {
  return a.kind == b.kind && a.redact_char == b.redact_char &&
         a.domain == b.domain && a.domain_inline == b.domain_inline &&
         a.domain_is_inline == b.domain_is_inline &&
         a.hierarchy == b.hierarchy && a.hierarchy_inline == b.hierarchy_inline &&
         a.hierarchy_is_inline == b.hierarchy_is_inline &&
         a.mechanism == b.mechanism && a.epsilon == b.epsilon &&
         a.delta == b.delta && a.clamp == b.clamp;
}

inline bool operator==(const Pattern& a, const Pattern& b) {
  return a.kind == b.kind && a.regex == b.regex && a.terms == b.terms &&
         a.case_sensitive == b.case_sensitive &&
         a.word_boundary == b.word_boundary;
}

inline bool operator==(const Rule& a, const Rule& b) {
  return a.patterns == b.patterns && a.transformation == b.transformation;
}

inline bool operator==(const PolicySpec& a, const PolicySpec& b) {
  return a.do_read == b.do_read && a.do_write == b.do_write &&
         a.rules == b.rules;
}

}  // namespace dlpfs
