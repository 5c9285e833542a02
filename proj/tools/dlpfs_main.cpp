// dlpfs command line: mount a protected or loopback filesystem, generate
// synthetic evaluation data, run the benchmark harness, or scrub a file
// in one shot (the whole-file reference transform).

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dlpfs/bench.hpp"
#include "dlpfs/datagen.hpp"
#include "dlpfs/fs_adapter.hpp"
#include "dlpfs/policy.hpp"
#include "dlpfs/transform.hpp"
#include "dlpfs/vfs.hpp"

namespace {

dlpfs::bytes read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, dlpfs::bytes_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

std::vector<dlpfs::Scenario> parse_scenarios(const std::vector<std::string>& names) {
  std::vector<dlpfs::Scenario> out;
  for (const auto& n : names) {
    if (n == "empty-policy") out.push_back(dlpfs::Scenario::EmptyPolicy);
    else if (n == "none") out.push_back(dlpfs::Scenario::NoMatch);
    else if (n == "few") out.push_back(dlpfs::Scenario::FewMatch);
    else if (n == "many") out.push_back(dlpfs::Scenario::ManyMatch);
    else if (n == "not-optimised") out.push_back(dlpfs::Scenario::NotOptimised);
    else throw CLI::ValidationError("unknown scenario: " + n);
  }
  return out;
}

std::vector<dlpfs::Strategy> parse_strategies(const std::vector<std::string>& names) {
  using S = dlpfs::Strategy;
  std::vector<S> out;
  for (const auto& n : names) {
    if (n == "read-dataframe") out.push_back(S::ReadDataframe);
    else if (n == "read-whole") out.push_back(S::ReadWholeCopy);
    else if (n == "read-lines") out.push_back(S::ReadLineByLine);
    else if (n == "pread-10") out.push_back(S::Pread10);
    else if (n == "pread-100") out.push_back(S::Pread100);
    else if (n == "pread-1000") out.push_back(S::Pread1000);
    else if (n == "pread-10000") out.push_back(S::Pread10000);
    else if (n == "write-whole") out.push_back(S::WriteWhole);
    else if (n == "write-row") out.push_back(S::WriteRow);
    else if (n == "write-field") out.push_back(S::WriteField);
    else throw CLI::ValidationError("unknown strategy: " + n);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dlpfs: data leakage prevention filesystem"};
  app.require_subcommand(1);

  // --- mount -------------------------------------------------------------
  auto* mount_cmd = app.add_subcommand(
      "mount", "Serve a root directory at a mountpoint, optionally protected");
  std::string fs_type = "dlpfs", root, mountpoint, policy_path;
  size_t guard = 0, left_guard = 0, right_guard = 0, max_match = 1024;
  std::string format = "auto";
  uint64_t secret = 0;
  dlpfs::AdapterOptions aopts;
  mount_cmd->add_option("-t,--type", fs_type, "filesystem type: dlpfs | loopback");
  mount_cmd->add_option("-r,--root", root, "root directory to mirror")->required();
  mount_cmd->add_option("-m,--mountpoint", mountpoint, "mountpoint")->required();
  mount_cmd->add_option("-s,--spec", policy_path,
                        "behaviour specification file (dlpfs only)");
  mount_cmd->add_option("--guard", guard, "guard bytes on both sides");
  mount_cmd->add_option("--left-guard", left_guard, "left guard bytes");
  mount_cmd->add_option("--right-guard", right_guard, "right guard bytes");
  mount_cmd->add_option("--format", format,
                        "chunking: auto | raw | line (auto picks by suffix)");
  mount_cmd->add_option("--secret", secret, "mount secret for surrogate seeding");
  mount_cmd->add_option("--max-match-bytes", max_match,
                        "cap on a single match (bounds unbounded patterns)");
  mount_cmd->add_flag("-f,--foreground", aopts.foreground, "stay in foreground");
  mount_cmd->add_flag("--allow-other", aopts.allow_other,
                      "allow other users to access the mount");
  mount_cmd->add_flag("--single-threaded", aopts.single_threaded,
                      "serve requests on one thread (debug)");

  // --- gen ---------------------------------------------------------------
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic CSV dataset");
  dlpfs::DatasetSpec dspec;
  std::string gen_out;
  gen_cmd->add_option("--rows", dspec.rows, "row count")->required();
  gen_cmd->add_option("--seed", dspec.seed, "generator seed");
  gen_cmd->add_option("--out", gen_out, "output file (default stdout)");
  gen_cmd->add_option("--p-icd", dspec.p_icd, "ICD code probability");
  gen_cmd->add_option("--p-kw1", dspec.p_kw1, "first keyword probability");
  gen_cmd->add_option("--p-kw2", dspec.p_kw2, "second keyword probability");
  gen_cmd->add_option("--p-email", dspec.p_email, "email probability");
  gen_cmd->add_option("--kw1", dspec.kw1, "first keyword token");
  gen_cmd->add_option("--kw2", dspec.kw2, "second keyword token");
  gen_cmd->add_flag("--header", dspec.header, "emit a header row");

  // --- bench -------------------------------------------------------------
  auto* bench_cmd = app.add_subcommand("bench", "Run the evaluation harness");
  std::string workdir = "bench-work", records_out = "bench_records.csv";
  std::vector<std::string> scenario_names, strategy_names;
  std::vector<size_t> rows_list, guard_list;
  int reps = 30;
  uint64_t bench_seed = 42;
  bool do_summary = true, do_timeline = false, do_transforms = false;
  std::string timeline_out = "timeline.csv";
  bench_cmd->add_option("--workdir", workdir, "scratch directory");
  bench_cmd->add_option("--out", records_out, "records CSV path");
  bench_cmd->add_option("--scenarios", scenario_names,
                        "subset: empty-policy none few many not-optimised");
  bench_cmd->add_option("--strategies", strategy_names,
                        "subset: read-dataframe read-whole read-lines "
                        "pread-10 pread-100 pread-1000 pread-10000 "
                        "write-whole write-row write-field");
  bench_cmd->add_option("--rows", rows_list, "dataset sizes in rows");
  bench_cmd->add_option("--guards", guard_list, "guard sizes in bytes");
  bench_cmd->add_option("--reps", reps, "repetitions per cell");
  bench_cmd->add_option("--seed", bench_seed, "plan seed");
  bench_cmd->add_flag("!--no-summary", do_summary, "skip the summary table");
  bench_cmd->add_flag("--timeline", do_timeline,
                      "also run the throughput timeline");
  bench_cmd->add_option("--timeline-out", timeline_out, "timeline CSV path");
  bench_cmd->add_flag("--transforms", do_transforms,
                      "also run the transformation microbenchmark");

  // --- scrub -------------------------------------------------------------
  auto* scrub_cmd = app.add_subcommand(
      "scrub",
      "Transform a file in one shot (whole-file reference for the mount; "
      "rules are applied regardless of do_read/do_write)");
  std::string scrub_policy, scrub_in, scrub_out;
  uint64_t scrub_seed = 1;
  size_t scrub_max_match = 1024;
  scrub_cmd->add_option("--policy,-s", scrub_policy, "behaviour specification")
      ->required();
  scrub_cmd->add_option("--seed", scrub_seed,
                        "handle seed for mask/diff_priv reproducibility");
  scrub_cmd->add_option("--max-match-bytes", scrub_max_match,
                        "cap on a single match");
  scrub_cmd->add_option("input", scrub_in, "input file")->required();
  scrub_cmd->add_option("output", scrub_out, "output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (mount_cmd->parsed()) {
      if (fs_type != "dlpfs" && fs_type != "loopback") {
        std::cerr << "unknown filesystem type: " << fs_type << "\n";
        return 2;
      }
      dlpfs::MountConfig cfg;
      cfg.fs_type = fs_type == "dlpfs" ? dlpfs::FsType::Dlpfs
                                       : dlpfs::FsType::Loopback;
      cfg.root = root;
      cfg.mountpoint = mountpoint;
      if (!policy_path.empty()) cfg.policy_path = policy_path;
      if (guard || left_guard || right_guard) {
        cfg.guard_explicit = true;
        cfg.guard.left_guard = left_guard ? left_guard : guard;
        cfg.guard.right_guard = right_guard ? right_guard : guard;
      }
      if (format == "raw") {
        cfg.auto_line_mode = false;
        cfg.guard.format_mode = dlpfs::FormatMode::Raw;
      } else if (format == "line") {
        cfg.auto_line_mode = false;
        cfg.guard.format_mode = dlpfs::FormatMode::LineAligned;
      } else if (format != "auto") {
        std::cerr << "unknown format mode: " << format << "\n";
        return 2;
      }
      cfg.mount_secret = secret;
      cfg.max_match_bytes = max_match;
      return dlpfs::mount(cfg, aopts);
    }

    if (gen_cmd->parsed()) {
      dlpfs::bytes data = dlpfs::generate(dspec);
      if (gen_out.empty())
        std::cout.write(data.data(), static_cast<std::streamsize>(data.size()));
      else
        write_file(gen_out, data);
      return 0;
    }

    if (bench_cmd->parsed()) {
      dlpfs::BenchPlan plan;
      if (!scenario_names.empty()) plan.scenarios = parse_scenarios(scenario_names);
      if (!strategy_names.empty()) plan.strategies = parse_strategies(strategy_names);
      if (!rows_list.empty()) plan.row_counts = rows_list;
      if (!guard_list.empty()) plan.guard_sizes = guard_list;
      plan.repetitions = reps;
      plan.seed = bench_seed;

      dlpfs::BenchResult result = dlpfs::run_plan(plan, workdir);
      {
        std::ofstream os(records_out, std::ios::binary);
        dlpfs::write_records_csv(os, result.records);
      }
      std::cerr << "wrote " << result.records.size() << " records to "
                << records_out << "\n# " << result.metadata << "\n";
      if (result.aborted) {
        std::cerr << "aborted with partial results: " << result.error << "\n";
        return 1;
      }
      if (do_summary)
        std::cout << dlpfs::format_summary(dlpfs::summarize(result.records));
      if (do_transforms) {
        auto tb = dlpfs::bench_transforms();
        auto m = tb.means();
        std::printf("transform microbench over 20000 values, mean of %zu runs:\n",
                    tb.runs[0].size());
        std::printf("  none    %.6f s\n  redact  %.6f s\n  mask    %.6f s\n"
                    "  dp      %.6f s\n", m[0], m[1], m[2], m[3]);
      }
      if (do_timeline) {
        auto ticks = dlpfs::run_timeline(workdir);
        std::ofstream os(timeline_out, std::ios::binary);
        dlpfs::write_timeline_csv(os, ticks);
        std::cerr << "wrote timeline to " << timeline_out << "\n";
      }
      return 0;
    }

    if (scrub_cmd->parsed()) {
      dlpfs::bytes policy_bytes = read_file(scrub_policy);
      dlpfs::ParseOptions popts;
      popts.max_match_bytes = scrub_max_match;
      dlpfs::PolicySpec spec = dlpfs::parse_policy(policy_bytes, popts);
      auto base = std::filesystem::path(scrub_policy).parent_path();
      dlpfs::TransformTables tables = dlpfs::load_transform_tables(spec, base);
      dlpfs::bytes input = read_file(scrub_in);
      dlpfs::TransformContext ctx;
      ctx.rng_seed = scrub_seed;
      ctx.tables = &tables;
      write_file(scrub_out, dlpfs::scrub_bytes(input, spec, ctx));
      return 0;
    }
  } catch (const dlpfs::MountUnavailableError& e) {
    std::cerr << "mount: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "dlpfs: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
