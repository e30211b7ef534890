// Copyright 2026 The FeSAIL Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "commands.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "fesail/config.hpp"
#include "fesail/pipeline.hpp"
#include "fesail/stream.hpp"

namespace fesail::cli {
namespace {

namespace fs = std::filesystem;

struct CommonFlags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool dry_run = false;
};

void AddCommonFlags(CLI::App* cmd, CommonFlags& flags, bool config_required) {
  auto* config = cmd->add_option("--config", flags.config, "config file");
  if (config_required) config->required();
  cmd->add_option("--out", flags.out, "output directory");
  cmd->add_option("--seed", flags.seed, "override the configured seed");
  cmd->add_flag("--dry-run", flags.dry_run, "validate and print settings only");
}

std::string Num(double v, int digits = 6) {
  if (std::isnan(v)) return "";
  std::ostringstream s;
  s << std::setprecision(digits) << v;
  return s.str();
}

// Full precision for CSV files, so re-reading recovers the exact value.
std::string Exact(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::ofstream OpenOut(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  return out;
}

void EnsureDir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create " + dir.string() + ": " + ec.message());
}

int CmdGen(const CommonFlags& flags, std::ostream& out) {
  SyntheticSpec spec = LoadSyntheticSpec(flags.config);
  if (flags.seed) spec.seed = *flags.seed;
  if (flags.out.empty()) throw Error(ErrorKind::kConfig, "gen requires --out");
  if (flags.dry_run) {
    out << FormatSyntheticSpec(spec);
    return kExitOk;
  }
  const SyntheticStream stream = GenerateSynthetic(spec);
  const std::vector<fs::path> files = WriteSynthetic(stream, flags.out);
  OpenOut(fs::path(flags.out) / "manifest.ini") << FormatSyntheticSpec(spec);
  out << "wrote " << files.size() << " span files to " << flags.out << "\n";
  return kExitOk;
}

RunConfig ResolveRunConfig(const CommonFlags& flags) {
  RunConfig config = LoadRunConfig(flags.config);
  if (flags.seed) config.pipeline.seed = *flags.seed;
  if (!flags.out.empty()) config.out_dir = fs::absolute(flags.out).lexically_normal();
  ValidateRunConfig(config);
  return config;
}

void WriteRunOutputs(const RunConfig& config, const RunResult& result) {
  const fs::path dir = config.out_dir;
  EnsureDir(dir);
  {
    std::ofstream f = OpenOut(dir / "metrics.csv");
    f << "span,policy,auc,logloss,reservoir_size,covered_weight,drop_ratio,epochs,sample_ms,train_ms\n";
    for (const SpanMetrics& m : result.spans) {
      f << m.span << "," << ToString(config.pipeline.policy) << "," << Exact(m.auc) << ","
        << Exact(m.logloss) << "," << m.reservoir_size << "," << Exact(m.covered_weight) << ","
        << Exact(m.drop_ratio) << "," << m.epochs << "," << Num(m.sample_ms) << "," << Num(m.train_ms) << "\n";
    }
  }
  {
    std::ofstream f = OpenOut(dir / "buckets.csv");
    f << "span,bucket,auc,count\n";
    for (const BucketRow& b : result.buckets) {
      f << b.span << "," << b.bucket << "," << (b.auc ? Exact(*b.auc) : "") << "," << b.count
        << "\n";
    }
  }
  {
    std::ofstream f = OpenOut(dir / "dropratio.csv");
    f << "span,staleness,total,dropped,ratio\n";
    for (const DropRatioRow& d : result.drop_ratios) {
      f << d.span << "," << d.staleness << "," << d.total << "," << d.dropped << ","
        << Exact(d.ratio) << "\n";
    }
  }
  if (config.selection_log) {
    std::ofstream f = OpenOut(dir / "selection.csv");
    f << "span,iteration,candidate,marginal\n";
    for (const SelectionLogRow& r : result.selection_log) {
      f << r.span << "," << r.iteration << "," << r.candidate << "," << Exact(r.marginal)
        << "\n";
    }
  }
  if (config.checkpoint) SaveCheckpoint(result.model, dir / "model.ckpt");
  OpenOut(dir / "manifest.ini") << FormatRunConfig(config);
}

int CmdRun(const CommonFlags& flags, std::ostream& out) {
  const RunConfig config = ResolveRunConfig(flags);
  if (flags.dry_run) {
    out << FormatRunConfig(config);
    return kExitOk;
  }
  const std::vector<fs::path> spans = ListSpanFiles(config.data_dir);
  const RunResult result = RunIncremental(config.pipeline, spans);
  WriteRunOutputs(config, result);
  out << "policy " << ToString(config.pipeline.policy) << ": mean AUC "
      << Num(result.mean_auc) << ", mean logloss " << Num(result.mean_logloss) << " over "
      << result.spans.size() << " spans; outputs in " << config.out_dir.string() << "\n";
  return kExitOk;
}

int CmdSweep(const CommonFlags& flags, const std::string& grid_path, std::ostream& out) {
  const RunConfig config = ResolveRunConfig(flags);
  const SweepGrid grid = grid_path.empty() ? LoadSweepGrid(flags.config)
                                           : LoadSweepGrid(grid_path);
  if (flags.dry_run) {
    out << FormatRunConfig(config) << "\n# grid\n";
    for (const SweepCell& cell : grid.cells) out << ToString(cell) << "\n";
    if (grid.control) out << "# control " << ToString(*grid.control) << "\n";
    return kExitOk;
  }
  const std::vector<fs::path> spans = ListSpanFiles(config.data_dir);
  const SweepResult sweep = RunSweep(config.pipeline, grid.cells, grid.control, spans);
  EnsureDir(config.out_dir);
  {
    std::ofstream f = OpenOut(config.out_dir / "sweep.csv");
    f << "func,bias,mean_auc,jaccard_vs_control,control\n";
    for (const SweepRow& r : sweep.rows) {
      f << ToString(r.cell.func) << "," << Exact(r.cell.bias) << "," << Exact(r.mean_auc) << ","
        << Exact(r.jaccard_vs_control) << "," << (r.is_control ? 1 : 0) << "\n";
    }
  }
  {
    std::ofstream f = OpenOut(config.out_dir / "sweep_jaccard.csv");
    f << "cell_a,cell_b,jaccard\n";
    for (std::size_t i = 0; i < sweep.rows.size(); ++i) {
      for (std::size_t j = 0; j < sweep.rows.size(); ++j) {
        f << ToString(sweep.rows[i].cell) << "," << ToString(sweep.rows[j].cell) << ","
          << Exact(sweep.pairwise_jaccard[i][j]) << "\n";
      }
    }
  }
  OpenOut(config.out_dir / "manifest.ini") << FormatRunConfig(config);
  out << std::left << std::setw(24) << "cell" << std::setw(12) << "mean_auc" << "jaccard\n";
  for (const SweepRow& r : sweep.rows) {
    out << std::setw(24) << (ToString(r.cell) + (r.is_control ? " *" : ""))
        << std::setw(12) << Num(r.mean_auc) << Num(r.jaccard_vs_control) << "\n";
  }
  for (const std::string& w : sweep.warnings) out << "warning: " << w << "\n";
  return kExitOk;
}

// Minimal reader for the CSV files this tool writes (no quoting).
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t Col(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(ErrorKind::kParse, "missing column " + name);
    return static_cast<std::size_t>(it - header.begin());
  }
};

std::vector<std::string> SplitRow(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream s(line);
  std::string cell;
  while (std::getline(s, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::optional<Table> ReadTable(const fs::path& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  Table t;
  std::string line;
  if (!std::getline(in, line)) return t;
  t.header = SplitRow(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    t.rows.push_back(SplitRow(line));
    if (t.rows.back().size() != t.header.size()) {
      throw Error(ErrorKind::kParse, path.string() + ": row width differs from header");
    }
  }
  return t;
}

double ToDouble(const std::string& s) {
  if (s.empty()) return std::nan("");
  return std::stod(s);
}

struct RunSummary {
  std::string name;
  Table metrics;
  std::optional<Table> buckets;
  std::optional<Table> drops;
  double mean_auc = 0.0;
  double mean_logloss = 0.0;
};

RunSummary LoadRun(const fs::path& dir) {
  RunSummary run;
  run.name = dir.filename().empty() ? dir.parent_path().filename().string()
                                    : dir.filename().string();
  auto metrics = ReadTable(dir / "metrics.csv");
  if (!metrics) throw Error(ErrorKind::kConfig, "no metrics.csv in " + dir.string());
  run.metrics = std::move(*metrics);
  run.buckets = ReadTable(dir / "buckets.csv");
  if (!run.buckets) throw Error(ErrorKind::kConfig, "no buckets.csv in " + dir.string());
  run.drops = ReadTable(dir / "dropratio.csv");
  double auc = 0.0, loss = 0.0;
  std::size_t n_auc = 0;
  const std::size_t c_auc = run.metrics.Col("auc"), c_loss = run.metrics.Col("logloss");
  for (const auto& row : run.metrics.rows) {
    const double a = ToDouble(row[c_auc]);
    if (!std::isnan(a)) {
      auc += a;
      ++n_auc;
    }
    loss += ToDouble(row[c_loss]);
  }
  run.mean_auc = n_auc ? auc / static_cast<double>(n_auc) : std::nan("");
  run.mean_logloss = run.metrics.rows.empty()
                         ? std::nan("")
                         : loss / static_cast<double>(run.metrics.rows.size());
  return run;
}

// bucket -> (count-weighted mean AUC over spans where it is defined, samples)
std::map<std::uint32_t, std::pair<double, std::size_t>> BucketSummary(const Table& t) {
  std::map<std::uint32_t, std::pair<double, std::size_t>> sums;
  std::map<std::uint32_t, std::size_t> weights;
  const std::size_t cb = t.Col("bucket"), ca = t.Col("auc"), cc = t.Col("count");
  for (const auto& row : t.rows) {
    const auto bucket = static_cast<std::uint32_t>(std::stoul(row[cb]));
    const auto count = static_cast<std::size_t>(std::stoull(row[cc]));
    auto& [auc_sum, samples] = sums[bucket];
    samples += count;
    const double auc = ToDouble(row[ca]);
    if (!std::isnan(auc)) {
      auc_sum += auc * static_cast<double>(count);
      weights[bucket] += count;
    }
  }
  for (auto& [bucket, entry] : sums) {
    const std::size_t w = weights[bucket];
    entry.first = w ? entry.first / static_cast<double>(w) : std::nan("");
  }
  return sums;
}

void PrintRun(const RunSummary& run, std::ostream& out) {
  out << "== " << run.name << "\n";
  const Table& m = run.metrics;
  const std::size_t cs = m.Col("span"), ca = m.Col("auc"), cl = m.Col("logloss"),
                    cr = m.Col("reservoir_size"), cd = m.Col("drop_ratio");
  out << std::left << std::setw(6) << "span" << std::setw(10) << "auc" << std::setw(10)
      << "logloss" << std::setw(11) << "reservoir" << "drop_ratio\n";
  for (const auto& row : m.rows) {
    out << std::setw(6) << row[cs] << std::setw(10) << Num(ToDouble(row[ca]), 4)
        << std::setw(10) << Num(ToDouble(row[cl]), 4) << std::setw(11) << row[cr]
        << Num(ToDouble(row[cd]), 4) << "\n";
  }
  out << "mean AUC " << Num(run.mean_auc) << ", mean logloss " << Num(run.mean_logloss)
      << " over " << m.rows.size() << " incremental spans\n\n";

  const auto buckets = BucketSummary(*run.buckets);
  out << "bucket AUC\n";
  const bool any_stale = std::any_of(buckets.begin(), buckets.end(),
                                     [](const auto& b) { return b.first > 0; });
  if (!any_stale) {
    out << "no stale samples\n";
  } else {
    out << std::setw(8) << "bucket" << std::setw(10) << "auc" << "samples\n";
    for (const auto& [bucket, entry] : buckets) {
      out << std::setw(8) << bucket << std::setw(10) << Num(entry.first, 4) << entry.second
          << "\n";
    }
  }
  out << "\n";

  if (run.drops && !run.drops->rows.empty()) {
    std::map<std::uint32_t, std::pair<std::size_t, std::size_t>> by_s;
    const Table& d = *run.drops;
    const std::size_t cst = d.Col("staleness"), ct = d.Col("total"), cdr = d.Col("dropped");
    for (const auto& row : d.rows) {
      auto& [total, dropped] = by_s[static_cast<std::uint32_t>(std::stoul(row[cst]))];
      total += std::stoull(row[ct]);
      dropped += std::stoull(row[cdr]);
    }
    out << "drop ratio by staleness\n" << std::setw(11) << "staleness" << std::setw(10)
        << "features" << "drop_ratio\n";
    for (const auto& [s, entry] : by_s) {
      out << std::setw(11) << s << std::setw(10) << entry.first
          << Num(static_cast<double>(entry.second) / static_cast<double>(entry.first), 4)
          << "\n";
    }
    out << "\n";
  }
}

void PrintDelta(const RunSummary& a, const RunSummary& b, std::ostream& out) {
  out << "== delta " << b.name << " - " << a.name << "\n";
  std::map<std::string, double> auc_a;
  for (const auto& row : a.metrics.rows) {
    auc_a[row[a.metrics.Col("span")]] = ToDouble(row[a.metrics.Col("auc")]);
  }
  out << std::left << std::setw(6) << "span" << std::setw(10) << a.name.substr(0, 9)
      << std::setw(10) << b.name.substr(0, 9) << "delta\n";
  for (const auto& row : b.metrics.rows) {
    const std::string span = row[b.metrics.Col("span")];
    const auto it = auc_a.find(span);
    if (it == auc_a.end()) continue;
    const double vb = ToDouble(row[b.metrics.Col("auc")]);
    out << std::setw(6) << span << std::setw(10) << Num(it->second, 4) << std::setw(10)
        << Num(vb, 4) << Num(vb - it->second, 4) << "\n";
  }
  out << "mean AUC delta " << Num(b.mean_auc - a.mean_auc) << "\n";
}

void WriteLongCsv(const std::vector<RunSummary>& runs, const fs::path& path) {
  std::ofstream f = OpenOut(path);
  f << "run,table,span,key,metric,value\n";
  for (const RunSummary& run : runs) {
    const Table& m = run.metrics;
    for (const auto& row : m.rows) {
      for (const char* metric : {"auc", "logloss", "reservoir_size", "drop_ratio"}) {
        f << run.name << ",metrics," << row[m.Col("span")] << ",," << metric << ","
          << row[m.Col(metric)] << "\n";
      }
    }
    const Table& b = *run.buckets;
    for (const auto& row : b.rows) {
      f << run.name << ",buckets," << row[b.Col("span")] << "," << row[b.Col("bucket")]
        << ",auc," << row[b.Col("auc")] << "\n";
      f << run.name << ",buckets," << row[b.Col("span")] << "," << row[b.Col("bucket")]
        << ",count," << row[b.Col("count")] << "\n";
    }
    if (run.drops) {
      const Table& d = *run.drops;
      for (const auto& row : d.rows) {
        f << run.name << ",dropratio," << row[d.Col("span")] << "," << row[d.Col("staleness")]
          << ",ratio," << row[d.Col("ratio")] << "\n";
      }
    }
  }
}

int CmdAnalyze(const std::vector<std::string>& dirs, const std::string& long_csv,
               std::ostream& out) {
  std::vector<RunSummary> runs;
  for (const std::string& dir : dirs) runs.push_back(LoadRun(dir));
  for (const RunSummary& run : runs) PrintRun(run, out);
  if (runs.size() == 2) PrintDelta(runs[0], runs[1], out);
  if (!long_csv.empty()) WriteLongCsv(runs, long_csv);
  return kExitOk;
}

}  // namespace

int ExitCodeFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return kExitUser;
    case ErrorKind::kNumeric: return kExitNumeric;
    default: return kExitData;
  }
}

bool ConfigureLogging() {
  static const bool installed = [] {
    auto logger = spdlog::stderr_color_mt("fesail");
    logger->set_pattern("[%l] %v");
    spdlog::set_default_logger(logger);
    return true;
  }();
  (void)installed;
  const char* env = std::getenv("FESAIL_LOG");
  const std::string level = env ? env : "info";
  if (level == "error") {
    spdlog::set_level(spdlog::level::err);
  } else if (level == "info") {
    spdlog::set_level(spdlog::level::info);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    spdlog::set_level(spdlog::level::info);
    spdlog::warn("FESAIL_LOG='{}' not recognized; use error, info or debug", level);
    return false;
  }
  return true;
}

int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Staleness-aware incremental CTR training"};
  app.require_subcommand(1);

  CommonFlags gen_flags, run_flags, sweep_flags;
  auto* gen = app.add_subcommand("gen", "write a synthetic span stream");
  AddCommonFlags(gen, gen_flags, true);
  auto* run = app.add_subcommand("run", "run one incremental experiment");
  AddCommonFlags(run, run_flags, true);
  auto* sweep = app.add_subcommand("sweep", "run a func/bias grid");
  AddCommonFlags(sweep, sweep_flags, true);
  std::string grid_path;
  sweep->add_option("--grid", grid_path, "grid file (default: [grid] in --config)");
  auto* analyze = app.add_subcommand("analyze", "summarize one or two run directories");
  std::vector<std::string> run_dirs;
  std::string long_csv;
  analyze->add_option("run_dirs", run_dirs, "run directories")->required()->expected(1, 2);
  analyze->add_option("--long-csv", long_csv, "write plot-ready long-format CSV");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUser;
  }

  try {
    if (*gen) return CmdGen(gen_flags, out);
    if (*run) return CmdRun(run_flags, out);
    if (*sweep) return CmdSweep(sweep_flags, grid_path, out);
    if (*analyze) return CmdAnalyze(run_dirs, long_csv, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return ExitCodeFor(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUser;
}

}  // namespace fesail::cli
