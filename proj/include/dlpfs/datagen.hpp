#pragma once

// Synthetic evaluation datasets: id,icd,amount,message rows averaging about
// 100 bytes, with sensitive tokens injected at configurable probabilities.
// Generation is a pure function of the spec: the same seed yields the same
// bytes on every platform (no std::distribution involved).

#include <array>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dlpfs/common.hpp"
#include "dlpfs/matcher.hpp"
#include "dlpfs/policy.hpp"

namespace dlpfs {

struct DatasetSpec {
  uint64_t rows = 0;
  uint64_t seed = 1;
  double p_icd = 0.05;
  double p_kw1 = 0.01;
  double p_kw2 = 0.1;
  double p_email = 0.05;
  std::string kw1 = "RareKeyword";
  std::string kw2 = "FrequentKeyword";
  bool header = false;
};

namespace datagen_detail {

// Static ICD-10 vocabulary; validity here means membership in this list.
inline const std::vector<std::string>& icd_codes() {
  static const std::vector<std::string> codes = {
      "A00.0", "A04.7", "A09.9", "A15.0", "A37.1", "A41.5", "A49.0", "B01.9",
      "B05.4", "B16.9", "B18.1", "B20.3", "B27.0", "B35.6", "B37.0", "B44.9",
      "B58.9", "B86.0", "C00.2", "C00.6", "C02.1", "C15.3", "C18.7", "C22.0",
      "C25.9", "C34.1", "C43.5", "C50.9", "C61.0", "C67.4", "C71.9", "C78.0",
      "C80.1", "C91.0", "D05.1", "D12.6", "D22.5", "D25.9", "D37.0", "D48.5",
      "D50.9", "D51.3", "D57.1", "D64.9", "D68.3", "D70.9", "E03.9", "E05.0",
      "E10.9", "E11.6", "E14.9", "E21.3", "E28.2", "E43.0", "E55.9", "E66.9",
      "E78.5", "E83.5", "E87.6", "F10.2", "F17.2", "F20.9", "F25.0", "F31.6",
      "F32.9", "F33.1", "F40.1", "F41.1", "F43.1", "F50.0", "F60.3", "F71.1",
      "F71.8", "F84.0", "F90.0", "G20.0", "G25.0", "G29.3", "G30.1", "G35.0",
      "G40.9", "G43.9", "G45.9", "G47.3", "G54.0", "G56.0", "G61.0", "G62.9",
      "G80.9", "G93.1", "H10.9", "H25.1", "H35.0", "H40.1", "H52.4", "H61.2",
      "H66.9", "H81.0", "H90.3", "H93.1", "I10.0", "I20.0", "I21.4", "I25.1",
      "I34.0", "I42.0", "I48.0", "I50.9", "I63.9", "I69.4", "I70.2", "I83.9",
      "J02.9", "J06.9", "J18.9", "J20.9", "J30.1", "J32.9", "J44.1", "J45.9",
      "J47.0", "J84.9", "K21.0", "K25.9", "K29.7", "K35.8", "K40.9", "K50.9",
      "K57.3", "K58.9", "K70.3", "K76.0", "K80.2", "K92.2", "L02.4", "L20.9",
      "L30.9", "L40.5", "L50.9", "L70.0", "L72.1", "L89.9", "M06.9", "M10.9",
      "M16.1", "M17.1", "M19.9", "M25.5", "M32.9", "M47.8", "M54.5", "M62.8",
      "M75.1", "M79.6", "M81.0", "M84.4", "N10.0", "N18.3", "N20.0", "N30.0",
      "N39.0", "N40.0", "N63.0", "N80.9", "N92.0", "N95.1", "O21.0", "O26.8",
      "P07.3", "Q21.1", "R05.0", "R07.4", "R10.4", "R11.0", "R42.0", "R50.9",
      "R51.0", "R53.0", "R55.0", "R60.0", "R73.9", "S06.0", "S42.0", "S52.5",
      "S72.0", "S82.6", "T14.9", "T78.4", "Z00.0", "Z23.8", "Z34.9", "Z51.1",
  };
  return codes;
}

inline const std::vector<std::string>& words() {
  static const std::vector<std::string> list = {
      "force",    "food",    "second",   "direction", "note",     "his",
      "finish",   "case",    "carry",    "wish",      "quickly",  "industry",
      "visit",    "politics","mother",   "resource",  "charge",   "fill",
      "that",     "born",    "here",     "health",    "ever",     "nearly",
      "achieved", "role",    "method",   "must",      "late",     "why",
      "hold",     "father",  "go",       "everybody", "big",      "according",
      "he",       "move",    "chance",   "data",      "under",    "line",
      "left",     "nation",  "cut",      "last",      "old",      "such",
      "series",   "stand",   "morning",  "station",   "ground",   "hundred",
      "however",  "product", "economic", "military",  "western",  "support",
      "picture",  "society", "central",  "building",  "thought",  "animal",
      "history",  "market",  "process",  "herself",   "college",  "student",
      "evening",  "manager", "science",  "improve",   "develop",  "company",
      "program",  "problem", "service",  "between",   "special",  "present",
      "measure",  "surface", "partner",  "quality",   "teacher",  "culture",
      "window",   "energy",  "simply",   "growth",    "report",   "policy",
      "effort",   "toward",  "listen",   "travel",    "little",   "whole",
      "world",    "paper",   "media",    "trial",     "bring",    "since",
      "skill",    "place",   "heart",    "water",     "thing",    "which",
  };
  return list;
}

inline const std::vector<std::string>& names() {
  static const std::vector<std::string> list = {
      "vanessa", "cox",     "mata",    "james",   "ortiz",  "harris",
      "brenda",  "walker",  "monica",  "young",   "david",  "garcia",
      "angela",  "lopez",   "steven",  "hall",    "laura",  "king",
      "miller",  "susan",   "clark",   "robert",  "lewis",  "nancy",
      "allen",   "scott",   "maria",   "torres",  "brian",  "reyes",
      "karen",   "morgan",  "ramos",   "amanda",  "wood",   "kelly",
      "patel",   "jordan",  "casey",   "morris",  "diane",  "watson",
      "leslie",  "brooks",  "hayes",   "ross",    "perry",  "wells",
  };
  return list;
}

inline const std::array<const char*, 5>& tlds() {
  static const std::array<const char*, 5> list = {"com", "net", "org", "info",
                                                  "biz"};
  return list;
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(splitmix64(seed ^ 0x8f52c6b1d04a19e3ull)) {}

  uint64_t next() {
    state_ = splitmix64(state_);
    return state_;
  }

  uint64_t below(uint64_t n) { return n ? next() % n : 0; }

  // [0, 1)
  double unit() { return static_cast<double>(next() >> 11) * 0x1p-53; }

  bool chance(double p) { return unit() < p; }

  const std::string& pick(const std::vector<std::string>& v) {
    return v[below(v.size())];
  }

 private:
  uint64_t state_;
};

inline void append_sentence(bytes& out, Rng& rng) {
  uint64_t n = 3 + rng.below(7);  // 3..9 words
  for (uint64_t i = 0; i < n; ++i) {
    std::string w = rng.pick(words());
    if (i == 0) w[0] = static_cast<char>(w[0] - 'a' + 'A');
    if (i) out += ' ';
    out += w;
  }
  out += '.';
}

inline bytes make_email(Rng& rng) {
  bytes e = rng.pick(names());
  if (rng.chance(0.7)) e += std::to_string(rng.below(100));
  e += '@';
  e += rng.pick(names());
  if (rng.chance(0.5)) {
    e += '-';
    e += rng.pick(names());
  }
  e += '.';
  e += tlds()[rng.below(tlds().size())];
  return e;
}

}  // namespace datagen_detail

inline void validate(const DatasetSpec& spec) {
  for (double p : {spec.p_icd, spec.p_kw1, spec.p_kw2, spec.p_email})
    if (p < 0.0 || p > 1.0)
      throw std::invalid_argument("probability out of [0,1]");
}

inline bytes generate(const DatasetSpec& spec) {
  using namespace datagen_detail;
  validate(spec);
  Rng rng(spec.seed);
  bytes out;
  out.reserve(spec.rows * 104 + 32);
  if (spec.header) out += "id,icd,amount,message\n";
  for (uint64_t row = 0; row < spec.rows; ++row) {
    out += std::to_string(row);
    out += ",\"";
    if (rng.chance(spec.p_icd)) out += rng.pick(icd_codes());
    out += "\",\"$";
    uint64_t cents = 100 + rng.below(100000 - 100 + 1);  // $1.00 .. $1000.00
    out += std::to_string(cents / 100);
    out += '.';
    uint64_t frac = cents % 100;
    out += static_cast<char>('0' + frac / 10);
    out += static_cast<char>('0' + frac % 10);
    out += "\",\"";
    append_sentence(out, rng);
    if (rng.chance(spec.p_kw1)) {
      out += ' ';
      out += spec.kw1;
      out += '.';
    }
    if (rng.chance(spec.p_kw2)) {
      out += ' ';
      out += spec.kw2;
      out += '.';
    }
    if (rng.chance(spec.p_email)) {
      out += ' ';
      out += make_email(rng);
    }
    out += ' ';
    append_sentence(out, rng);
    out += "\"\n";
  }
  return out;
}

// Post-generation assessment: how often each rule actually fires on a file.
inline std::vector<uint64_t> measure_match_rate(bytes_view file,
                                                const PolicySpec& policy) {
  std::vector<uint64_t> counts(policy.rules.size(), 0);
  for (const MatchSpan& span : scan(file, policy)) {
    if (span.rule_index < counts.size()) ++counts[span.rule_index];
  }
  return counts;
}

}  // namespace dlpfs
