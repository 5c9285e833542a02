#pragma once

// Evaluation harness: read/write strategies over loopback and protected
// mounts, match-rate scenarios, guard sweeps, repetition with percentile
// reporting, a transformation microbenchmark, and a throughput timeline.
//
// Timing discipline: monotonic clock around open -> I/O -> release, mount
// construction excluded, one warm-up run per cell discarded, cell order
// shuffled. The OS page cache is not dropped (unprivileged); recorded in the
// result metadata.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dlpfs/common.hpp"
#include "dlpfs/datagen.hpp"
#include "dlpfs/engine.hpp"
#include "dlpfs/transform.hpp"
#include "dlpfs/vfs.hpp"

namespace dlpfs {

enum class Strategy {
  ReadDataframe,
  ReadWholeCopy,
  ReadLineByLine,
  Pread10,
  Pread100,
  Pread1000,
  Pread10000,
  WriteWhole,
  WriteRow,
  WriteField,
};

enum class Scenario { EmptyPolicy, NoMatch, FewMatch, ManyMatch, NotOptimised };

inline const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::ReadDataframe: return "read-dataframe";
    case Strategy::ReadWholeCopy: return "read-whole";
    case Strategy::ReadLineByLine: return "read-lines";
    case Strategy::Pread10: return "pread-10";
    case Strategy::Pread100: return "pread-100";
    case Strategy::Pread1000: return "pread-1000";
    case Strategy::Pread10000: return "pread-10000";
    case Strategy::WriteWhole: return "write-whole";
    case Strategy::WriteRow: return "write-row";
    case Strategy::WriteField: return "write-field";
  }
  return "?";
}

inline const char* scenario_name(Scenario s) {
  switch (s) {
    case Scenario::EmptyPolicy: return "empty-policy";
    case Scenario::NoMatch: return "none";
    case Scenario::FewMatch: return "few";
    case Scenario::ManyMatch: return "many";
    case Scenario::NotOptimised: return "not-optimised";
  }
  return "?";
}

inline const char* fs_name(FsType t) {
  return t == FsType::Loopback ? "loopback" : "dlpfs";
}

inline bool is_write_strategy(Strategy s) {
  return s == Strategy::WriteWhole || s == Strategy::WriteRow ||
         s == Strategy::WriteField;
}

inline std::string scenario_policy_json(Scenario s) {
  switch (s) {
    case Scenario::EmptyPolicy:
      return R"json({"do_read": true, "do_write": true, "rules": []})json";
    case Scenario::NoMatch:
      return R"json({"do_read": true, "do_write": true, "rules": [
        {"patterns": [{"type": "re", "spec": "ZXQJVQ\\d{3}"}],
         "transformation": {"type": "redact"}}]})json";
    case Scenario::FewMatch:
      return R"json({"do_read": true, "do_write": true, "rules": [
        {"patterns": [{"type": "re", "spec": "RareKeyword"}],
         "transformation": {"type": "redact"}}]})json";
    case Scenario::ManyMatch:
      return R"json({"do_read": true, "do_write": true, "rules": [
        {"patterns": [{"type": "re", "spec": "FrequentKeyword"}],
         "transformation": {"type": "redact"}}]})json";
    case Scenario::NotOptimised:
      // Unnecessary greedy operators and overlapping alternatives over the
      // same token the many-match scenario hits.
      return R"json({"do_read": true, "do_write": true, "rules": [
        {"patterns": [{"type": "re",
          "spec": "(?:\\w*(?:FrequentK|requentKey|equentKeyw)\\w*|F\\w*Keyword)"}],
         "transformation": {"type": "redact"}}]})json";
  }
  return "{}";
}

struct BenchPlan {
  std::vector<Scenario> scenarios = {Scenario::EmptyPolicy, Scenario::NoMatch,
                                     Scenario::FewMatch, Scenario::ManyMatch};
  std::vector<Strategy> strategies = {
      Strategy::ReadDataframe, Strategy::ReadWholeCopy, Strategy::ReadLineByLine,
      Strategy::Pread10,       Strategy::Pread100,      Strategy::Pread1000,
      Strategy::Pread10000,    Strategy::WriteWhole,    Strategy::WriteRow,
      Strategy::WriteField};
  std::vector<size_t> row_counts = {1, 100, 1000, 20000};
  std::vector<size_t> guard_sizes = {64};
  int repetitions = 30;
  uint64_t seed = 42;
};

struct BenchRecord {
  Scenario scenario;
  Strategy strategy;
  size_t rows = 0;
  size_t guard = 0;
  FsType fs_type = FsType::Loopback;
  int run_index = 0;
  double elapsed = 0.0;  // seconds
};

struct BenchResult {
  std::vector<BenchRecord> records;
  bool aborted = false;
  std::string error;
  std::string metadata;
};

namespace bench_detail {

inline double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

// Keeps strategy loops honest against over-eager optimisers.
inline volatile uint64_t sink = 0;

inline void consume(bytes_view b) {
  uint64_t acc = 0;
  if (!b.empty()) acc = static_cast<unsigned char>(b[0]) + b.size();
  sink += acc;
}

}  // namespace bench_detail

// Executes one read strategy and returns the reconstructed file bytes (all
// strategies must reconstruct identical content over the same mount).
inline bytes run_read_strategy(Vfs& fs, const std::string& path, Strategy s) {
  uint64_t fsize = static_cast<uint64_t>(fs.getattr(path).st_size);
  uint64_t h = fs.open(path, O_RDONLY);
  bytes content;
  content.reserve(fsize);
  switch (s) {
    case Strategy::ReadDataframe: {
      // Whole file into memory, then parsed into columns the way a
      // dataframe loader materialises it.
      content = fs.read(h, 0, fsize);
      std::vector<size_t> field_counts;
      size_t fields = 1;
      for (char c : content) {
        if (c == ',') ++fields;
        if (c == '\n') {
          field_counts.push_back(fields);
          fields = 1;
        }
      }
      bench_detail::sink += field_counts.size();
      break;
    }
    case Strategy::ReadWholeCopy:
      content = fs.read(h, 0, fsize);
      break;
    case Strategy::ReadLineByLine: {
      // Buffered chunk reads with client-side line splitting.
      constexpr size_t kChunk = 64 * 1024;
      uint64_t off = 0;
      size_t lines = 0;
      while (off < fsize) {
        bytes chunk = fs.read(h, off, kChunk);
        if (chunk.empty()) break;
        lines += static_cast<size_t>(
            std::count(chunk.begin(), chunk.end(), '\n'));
        content += chunk;
        off += chunk.size();
      }
      bench_detail::sink += lines;
      break;
    }
    case Strategy::Pread10:
    case Strategy::Pread100:
    case Strategy::Pread1000:
    case Strategy::Pread10000: {
      size_t bufsize = s == Strategy::Pread10      ? 10
                       : s == Strategy::Pread100   ? 100
                       : s == Strategy::Pread1000  ? 1000
                                                   : 10000;
      uint64_t off = 0;
      while (off < fsize) {
        bytes chunk = fs.read(h, off, bufsize);
        if (chunk.empty()) break;
        content += chunk;
        off += chunk.size();
      }
      break;
    }
    default:
      fs.release(h);
      throw std::invalid_argument("not a read strategy");
  }
  fs.release(h);
  bench_detail::consume(content);
  return content;
}

inline void run_write_strategy(Vfs& fs, const std::string& path, Strategy s,
                               bytes_view content) {
  uint64_t h = fs.create(path, O_WRONLY | O_TRUNC, 0644);
  switch (s) {
    case Strategy::WriteWhole:
      fs.write(h, 0, content);
      break;
    case Strategy::WriteRow: {
      uint64_t off = 0;
      size_t start = 0;
      while (start < content.size()) {
        size_t nl = content.find('\n', start);
        size_t end = nl == bytes::npos ? content.size() : nl + 1;
        off += fs.write(h, off, content.substr(start, end - start));
        start = end;
      }
      break;
    }
    case Strategy::WriteField: {
      // Fields and their separators land in separate write calls.
      uint64_t off = 0;
      size_t start = 0;
      for (size_t i = 0; i <= content.size(); ++i) {
        if (i == content.size() || content[i] == ',' || content[i] == '\n') {
          if (i > start)
            off += fs.write(h, off, content.substr(start, i - start));
          if (i < content.size())
            off += fs.write(h, off, content.substr(i, 1));
          start = i + 1;
        }
      }
      break;
    }
    default:
      fs.release(h);
      throw std::invalid_argument("not a write strategy");
  }
  fs.flush(h);
  fs.release(h);
}

namespace bench_detail {

struct Cell {
  Scenario scenario;
  Strategy strategy;
  size_t rows;
  size_t guard;
  FsType fs_type;
};

inline std::string dataset_path(const std::string& dir, size_t rows) {
  return dir + "/data_" + std::to_string(rows) + ".csv";
}

}  // namespace bench_detail

inline BenchResult run_plan(const BenchPlan& plan, const std::string& workdir) {
  namespace fsys = std::filesystem;
  using bench_detail::Cell;

  BenchResult result;
  result.metadata =
      "timer=steady_clock; scope=open+io+release; warmup=1 discarded; "
      "order=shuffled-cells; page_cache_drop=none(unprivileged)";

  std::string data_dir = workdir + "/backing";
  std::string policy_dir = workdir + "/policies";
  fsys::create_directories(data_dir);
  fsys::create_directories(policy_dir);

  // Datasets, one per row count, shared across cells. Write strategies use
  // the same bytes as source content.
  std::map<size_t, bytes> contents;
  for (size_t rows : plan.row_counts) {
    DatasetSpec spec;
    spec.rows = rows;
    spec.seed = plan.seed + rows;
    bytes data = generate(spec);
    std::ofstream(bench_detail::dataset_path(data_dir, rows),
                  std::ios::binary)
        << data;
    contents[rows] = std::move(data);
  }
  std::map<Scenario, std::string> policy_files;
  for (Scenario sc : plan.scenarios) {
    std::string p = policy_dir + "/" + scenario_name(sc) + ".json";
    std::ofstream(p, std::ios::binary) << scenario_policy_json(sc);
    policy_files[sc] = p;
  }

  std::vector<Cell> cells;
  for (Scenario sc : plan.scenarios)
    for (Strategy st : plan.strategies)
      for (size_t rows : plan.row_counts)
        for (size_t guard : plan.guard_sizes)
          for (FsType ft : {FsType::Loopback, FsType::Dlpfs})
            cells.push_back({sc, st, rows, guard, ft});
  std::mt19937_64 shuffler(plan.seed);
  std::shuffle(cells.begin(), cells.end(), shuffler);

  for (const Cell& cell : cells) {
    try {
      MountConfig cfg;
      cfg.fs_type = cell.fs_type;
      cfg.root = data_dir;
      cfg.guard.left_guard = cfg.guard.right_guard = cell.guard;
      cfg.guard_explicit = true;
      cfg.mount_secret = plan.seed | 1;
      if (cell.fs_type == FsType::Dlpfs)
        cfg.policy_path = policy_files.at(cell.scenario);
      Vfs fs(cfg);  // mount setup excluded from timing

      std::string read_name = "data_" + std::to_string(cell.rows) + ".csv";
      std::string write_name = "bench_out_" + std::to_string(cell.rows) + ".csv";
      const bytes& content = contents.at(cell.rows);

      auto one_run = [&]() {
        if (is_write_strategy(cell.strategy))
          run_write_strategy(fs, write_name, cell.strategy, content);
        else
          run_read_strategy(fs, read_name, cell.strategy);
      };
      one_run();  // warm-up, discarded
      for (int rep = 0; rep < plan.repetitions; ++rep) {
        double t0 = bench_detail::now_seconds();
        one_run();
        double elapsed = bench_detail::now_seconds() - t0;
        result.records.push_back({cell.scenario, cell.strategy, cell.rows,
                                  cell.guard, cell.fs_type, rep, elapsed});
      }
      if (is_write_strategy(cell.strategy)) fs.unlink(write_name);
    } catch (const std::exception& e) {
      result.aborted = true;
      result.error = e.what();
      return result;
    }
  }
  return result;
}

// Linear-interpolation percentile over a copy of the values.
inline double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  double rank = q * static_cast<double>(v.size() - 1);
  size_t lo = static_cast<size_t>(rank);
  size_t hi = std::min(lo + 1, v.size() - 1);
  double frac = rank - static_cast<double>(lo);
  return v[lo] + (v[hi] - v[lo]) * frac;
}

inline double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) /
         static_cast<double>(v.size());
}

struct CellStats {
  Scenario scenario;
  Strategy strategy;
  size_t rows = 0;
  size_t guard = 0;
  FsType fs_type = FsType::Loopback;
  size_t n = 0;
  double mean = 0, p10 = 0, p90 = 0;
};

inline std::vector<CellStats> summarize(const std::vector<BenchRecord>& records) {
  std::map<std::tuple<int, int, size_t, size_t, int>, std::vector<double>> groups;
  for (const auto& r : records) {
    groups[{static_cast<int>(r.scenario), static_cast<int>(r.strategy), r.rows,
            r.guard, static_cast<int>(r.fs_type)}]
        .push_back(r.elapsed);
  }
  std::vector<CellStats> out;
  for (auto& [key, vals] : groups) {
    CellStats cs;
    cs.scenario = static_cast<Scenario>(std::get<0>(key));
    cs.strategy = static_cast<Strategy>(std::get<1>(key));
    cs.rows = std::get<2>(key);
    cs.guard = std::get<3>(key);
    cs.fs_type = static_cast<FsType>(std::get<4>(key));
    cs.n = vals.size();
    cs.mean = mean(vals);
    cs.p10 = percentile(vals, 0.10);
    cs.p90 = percentile(vals, 0.90);
    out.push_back(cs);
  }
  return out;
}

inline void write_records_csv(std::ostream& os,
                              const std::vector<BenchRecord>& records) {
  os << "scenario,strategy,rows,guard,fs_type,run_index,elapsed_s\n";
  for (const auto& r : records) {
    os << scenario_name(r.scenario) << ',' << strategy_name(r.strategy) << ','
       << r.rows << ',' << r.guard << ',' << fs_name(r.fs_type) << ','
       << r.run_index << ',' << r.elapsed << '\n';
  }
}

inline std::string format_summary(const std::vector<CellStats>& stats) {
  std::ostringstream os;
  os << "scenario        strategy        rows    guard  fs        n   "
        "mean_s      p10_s       p90_s\n";
  for (const auto& cs : stats) {
    char line[256];
    std::snprintf(line, sizeof line,
                  "%-15s %-15s %-7zu %-6zu %-9s %-3zu %.6f   %.6f   %.6f\n",
                  scenario_name(cs.scenario), strategy_name(cs.strategy),
                  cs.rows, cs.guard, fs_name(cs.fs_type), cs.n, cs.mean,
                  cs.p10, cs.p90);
    os << line;
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Transformation microbenchmark: N numeric values through each transformation
// stage. Only the relative cost ordering is meaningful across hosts.

struct TransformBench {
  // Per-run elapsed seconds for: none, redact, mask, dp_noise.
  std::array<std::vector<double>, 4> runs;
  std::array<double, 4> means() const {
    return {mean(runs[0]), mean(runs[1]), mean(runs[2]), mean(runs[3])};
  }
};

inline TransformBench bench_transforms(size_t value_count = 20000,
                                       int repetitions = 30,
                                       uint64_t seed = 7) {
  datagen_detail::Rng rng(seed);
  bytes buffer;
  std::vector<MatchSpan> spans;
  for (size_t i = 0; i < value_count; ++i) {
    uint64_t cents = 100 + rng.below(99901);
    bytes v = std::to_string(cents / 100) + "." +
              std::to_string(cents % 100 / 10) + std::to_string(cents % 10);
    MatchSpan span;
    span.start = buffer.size();
    span.end = buffer.size() + v.size();
    span.rule_index = 0;
    spans.push_back(span);
    buffer += v;
    buffer += '\n';
  }

  auto make_policy = [](TransformKind kind) {
    PolicySpec spec;
    spec.do_read = true;
    Rule rule;
    Pattern p;
    p.kind = PatternKind::Dictionary;
    p.terms = {"unused"};
    p.compiled = std::make_shared<DictionaryMatcher>(p.terms, false, true, 1024);
    rule.patterns.push_back(std::move(p));
    rule.transformation.kind = kind;
    if (kind == TransformKind::Mask) {
      rule.transformation.domain = "#bench";
      rule.transformation.domain_is_inline = true;
    }
    if (kind == TransformKind::DiffPriv) {
      rule.transformation.epsilon = 0.1;
    }
    spec.rules.push_back(std::move(rule));
    return spec;
  };

  TransformTables tables;
  for (int i = 0; i < 1000; ++i)
    tables.domains["#bench"].push_back(std::to_string(i) + ".00");

  PolicySpec redact_policy = make_policy(TransformKind::Redact);
  PolicySpec mask_policy = make_policy(TransformKind::Mask);
  PolicySpec dp_policy = make_policy(TransformKind::DiffPriv);

  TransformContext ctx;
  ctx.rng_seed = seed;
  ctx.tables = &tables;

  TransformBench result;
  std::vector<MatchSpan> no_spans;
  for (int rep = 0; rep < repetitions + 1; ++rep) {
    struct Case {
      const PolicySpec* policy;
      const std::vector<MatchSpan>* spans;
      int slot;
    };
    const Case cases[4] = {{&redact_policy, &no_spans, 0},
                           {&redact_policy, &spans, 1},
                           {&mask_policy, &spans, 2},
                           {&dp_policy, &spans, 3}};
    for (const Case& c : cases) {
      double t0 = bench_detail::now_seconds();
      bytes out = apply(buffer, *c.spans, *c.policy, ctx);
      double elapsed = bench_detail::now_seconds() - t0;
      bench_detail::consume(out);
      if (rep > 0) result.runs[c.slot].push_back(elapsed);  // rep 0 warms up
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Throughput timeline: a scripted application reads non-sensitive rows tick
// by tick; the window around protected_tick crosses a block dense with
// protected values, then normal operation resumes.

struct TimelineTick {
  int tick = 0;
  size_t bytes_read = 0;
  double elapsed = 0.0;
  double throughput = 0.0;  // bytes/second
};

inline std::vector<TimelineTick> run_timeline(const std::string& workdir,
                                              int ticks = 200,
                                              int protected_tick = 100,
                                              size_t tick_bytes = 64 * 1024,
                                              uint64_t seed = 99) {
  namespace fsys = std::filesystem;
  datagen_detail::Rng rng(seed);

  bytes file;
  file.reserve(static_cast<size_t>(ticks) * tick_bytes);
  std::vector<std::pair<uint64_t, size_t>> ranges;
  for (int t = 0; t < ticks; ++t) {
    uint64_t start = file.size();
    size_t target = (static_cast<size_t>(t) + 1) * tick_bytes;
    bool prot = t == protected_tick;
    uint64_t row = 0;
    while (file.size() < target) {
      file += std::to_string(row++);
      file += ",\"\",\"$1.00\",\"";
      if (prot) {
        for (int k = 0; k < 8; ++k) {
          if (k) file += ' ';
          file += datagen_detail::make_email(rng);
        }
      } else {
        datagen_detail::append_sentence(file, rng);
        file += ' ';
        datagen_detail::append_sentence(file, rng);
      }
      file += "\"\n";
    }
    ranges.emplace_back(start, file.size() - start);
  }

  std::string dir = workdir + "/timeline";
  fsys::create_directories(dir);
  std::ofstream(dir + "/stream.csv", std::ios::binary) << file;
  std::string policy_path = dir + "/policy.json";
  std::ofstream(policy_path, std::ios::binary) << R"json({
    "do_read": true, "do_write": false,
    "rules": [{"patterns": [{"type": "re",
                "spec": "(?:\\w|[.-])+@(?:\\w|[.-])+\\.\\w{2,4}"}],
               "transformation": {"type": "redact"}}]})json";

  MountConfig cfg;
  cfg.fs_type = FsType::Dlpfs;
  cfg.root = dir;
  cfg.policy_path = policy_path;
  cfg.mount_secret = seed | 1;
  Vfs fs(cfg);

  std::vector<TimelineTick> out;
  uint64_t h = fs.open("stream.csv", O_RDONLY);
  for (int t = 0; t < ticks; ++t) {
    double t0 = bench_detail::now_seconds();
    bytes chunk = fs.read(h, ranges[t].first, ranges[t].second);
    double elapsed = std::max(bench_detail::now_seconds() - t0, 1e-9);
    bench_detail::consume(chunk);
    TimelineTick tick;
    tick.tick = t;
    tick.bytes_read = chunk.size();
    tick.elapsed = elapsed;
    tick.throughput = static_cast<double>(chunk.size()) / elapsed;
    out.push_back(tick);
  }
  fs.release(h);
  return out;
}

inline void write_timeline_csv(std::ostream& os,
                               const std::vector<TimelineTick>& ticks) {
  os << "tick,bytes,elapsed_s,throughput_bps\n";
  for (const auto& t : ticks)
    os << t.tick << ',' << t.bytes_read << ',' << t.elapsed << ','
       << t.throughput << '\n';
}

}  // namespace dlpfs
