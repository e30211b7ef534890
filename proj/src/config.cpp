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

#include "fesail/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "fesail/error.hpp"

namespace fesail {
namespace {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

std::string Trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t");
  if (begin == std::string_view::npos) return "";
  const auto end = s.find_last_not_of(" \t");
  return std::string(s.substr(begin, end - begin + 1));
}

std::vector<std::string> SplitList(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t comma = s.find(',', start);
    if (comma == std::string_view::npos) comma = s.size();
    const std::string item = Trim(s.substr(start, comma - start));
    if (!item.empty()) out.push_back(item);
    start = comma + 1;
  }
  return out;
}

std::string FormatDouble(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

pt::ptree ReadIni(const std::string& text) {
  std::istringstream in(text);
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorKind::kConfig, "config line " + std::to_string(e.line()) + ": " +
                                        e.message());
  }
  return tree;
}

// Key lookup within one section that remembers which keys were read, so
// leftovers can be reported as unknown.
class Section {
 public:
  Section(std::string name, const pt::ptree* node) : name_(std::move(name)), node_(node) {}

  std::optional<std::string> Raw(const std::string& key) {
    seen_.insert(key);
    if (node_ == nullptr) return std::nullopt;
    const auto it = node_->find(key);
    if (it == node_->not_found()) return std::nullopt;
    return Trim(it->second.data());
  }

  template <typename T>
  void Read(const std::string& key, T& out) {
    if (const auto raw = Raw(key)) out = Convert<T>(key, *raw);
  }

  void ReadBool(const std::string& key, bool& out) {
    const auto raw = Raw(key);
    if (!raw) return;
    if (*raw == "true" || *raw == "1") {
      out = true;
    } else if (*raw == "false" || *raw == "0") {
      out = false;
    } else {
      throw Fail(key, "expected true or false, got '" + *raw + "'");
    }
  }

  void RejectUnknown() const {
    if (node_ == nullptr) return;
    for (const auto& [key, child] : *node_) {
      if (!seen_.count(key)) {
        throw Error(ErrorKind::kConfig, "unknown key '" + key + "' in [" + name_ + "]");
      }
    }
  }

  Error Fail(const std::string& key, const std::string& what) const {
    return Error(ErrorKind::kConfig, "[" + name_ + "] " + key + ": " + what);
  }

  template <typename T>
  T Convert(const std::string& key, const std::string& raw) const {
    T value{};
    const char* end = raw.data() + raw.size();
    const auto [ptr, ec] = std::from_chars(raw.data(), end, value);
    if (raw.empty() || ec != std::errc() || ptr != end) {
      throw Fail(key, "cannot parse '" + raw + "'");
    }
    return value;
  }

 private:
  std::string name_;
  const pt::ptree* node_;
  std::set<std::string> seen_;
};

// Splits the tree into named sections; keys outside any section and unknown
// section names are rejected.
std::map<std::string, const pt::ptree*> Sections(const pt::ptree& tree,
                                                 const std::set<std::string>& allowed,
                                                 bool ignore_others) {
  std::map<std::string, const pt::ptree*> out;
  for (const auto& [name, child] : tree) {
    if (child.empty() && !child.data().empty()) {
      throw Error(ErrorKind::kConfig, "key '" + name + "' is outside any section");
    }
    if (!allowed.count(name)) {
      if (ignore_others) continue;
      throw Error(ErrorKind::kConfig, "unknown section [" + name + "]");
    }
    out[name] = &child;
  }
  return out;
}

Section SectionOf(const std::map<std::string, const pt::ptree*>& sections,
                  const std::string& name) {
  const auto it = sections.find(name);
  return Section(name, it == sections.end() ? nullptr : it->second);
}

SweepCell ParseCell(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) {
    throw Error(ErrorKind::kConfig, "grid cell must be func:bias, got '" + text + "'");
  }
  SweepCell cell;
  cell.func = ParseWeightFunction(Trim(text.substr(0, colon)));
  cell.bias = Section("grid", nullptr).Convert<double>("control", Trim(text.substr(colon + 1)));
  return cell;
}

}  // namespace

std::string ReadTextFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kConfig, "cannot open " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

RunConfig ParseRunConfig(const std::string& text, const fs::path& base_dir) {
  const pt::ptree tree = ReadIni(text);
  const auto sections = Sections(
      tree, {"data", "run", "policy", "guard", "model", "train", "grid"}, false);
  RunConfig config;
  PipelineConfig& p = config.pipeline;

  Section data = SectionOf(sections, "data");
  const auto spans = data.Raw("spans");
  if (!spans || spans->empty()) throw Error(ErrorKind::kConfig, "missing [data] spans");
  config.data_dir = fs::absolute(base_dir / *spans).lexically_normal();
  data.RejectUnknown();

  Section run = SectionOf(sections, "run");
  if (const auto policy = run.Raw("policy")) p.policy = ParsePolicy(*policy);
  run.Read("seed", p.seed);
  if (const auto out = run.Raw("out")) {
    config.out_dir = fs::absolute(base_dir / *out).lexically_normal();
  } else {
    config.out_dir = fs::absolute(base_dir / config.out_dir).lexically_normal();
  }
  run.ReadBool("selection_log", config.selection_log);
  run.ReadBool("checkpoint", config.checkpoint);
  run.RejectUnknown();

  Section policy = SectionOf(sections, "policy");
  if (const auto cap = policy.Raw("capacity")) p.capacity = Capacity::Parse(*cap);
  if (const auto func = policy.Raw("func")) p.func = ParseWeightFunction(*func);
  policy.Read("bias", p.bias);
  policy.ReadBool("iu_supplement", p.iu_supplement);
  policy.RejectUnknown();

  Section guard = SectionOf(sections, "guard");
  guard.Read("eta", p.guard.eta);
  guard.Read("lambda", p.guard.lambda);
  guard.Read("epsilon", p.guard.epsilon);
  guard.RejectUnknown();

  Section model = SectionOf(sections, "model");
  model.Read("embedding_dim", p.embedding_dim);
  if (const auto hidden = model.Raw("hidden")) {
    p.hidden.clear();
    for (const std::string& item : SplitList(*hidden)) {
      p.hidden.push_back(model.Convert<std::size_t>("hidden", item));
    }
  }
  model.RejectUnknown();

  Section train = SectionOf(sections, "train");
  train.Read("learning_rate", p.train.adam.learning_rate);
  train.Read("batch_size", p.train.batch_size);
  train.Read("max_epochs", p.train.max_epochs);
  train.Read("patience", p.train.patience);
  train.Read("validation_fraction", p.train.validation_fraction);
  train.Read("bucket_cap", p.bucket_cap);
  train.RejectUnknown();

  if (sections.count("grid")) ParseSweepGrid(text);
  p.Validate();
  return config;
}

RunConfig LoadRunConfig(const fs::path& path) {
  return ParseRunConfig(ReadTextFile(path), fs::absolute(path).parent_path());
}

std::string FormatRunConfig(const RunConfig& config) {
  const PipelineConfig& p = config.pipeline;
  std::ostringstream out;
  out << "[data]\nspans = " << config.data_dir.string() << "\n\n";
  out << "[run]\npolicy = " << ToString(p.policy) << "\nseed = " << p.seed
      << "\nout = " << config.out_dir.string()
      << "\nselection_log = " << (config.selection_log ? "true" : "false")
      << "\ncheckpoint = " << (config.checkpoint ? "true" : "false") << "\n\n";
  out << "[policy]\ncapacity = " << p.capacity.ToString() << "\nfunc = " << ToString(p.func)
      << "\nbias = " << FormatDouble(p.bias)
      << "\niu_supplement = " << (p.iu_supplement ? "true" : "false") << "\n\n";
  out << "[guard]\neta = " << p.guard.eta << "\nlambda = " << FormatDouble(p.guard.lambda)
      << "\nepsilon = " << FormatDouble(p.guard.epsilon) << "\n\n";
  out << "[model]\nembedding_dim = " << p.embedding_dim << "\nhidden = ";
  for (std::size_t i = 0; i < p.hidden.size(); ++i) out << (i ? "," : "") << p.hidden[i];
  out << "\n\n";
  out << "[train]\nlearning_rate = " << FormatDouble(p.train.adam.learning_rate)
      << "\nbatch_size = " << p.train.batch_size << "\nmax_epochs = " << p.train.max_epochs
      << "\npatience = " << p.train.patience
      << "\nvalidation_fraction = " << FormatDouble(p.train.validation_fraction)
      << "\nbucket_cap = " << p.bucket_cap << "\n";
  return out.str();
}

void ValidateRunConfig(const RunConfig& config) {
  config.pipeline.Validate();
  if (!fs::is_directory(config.data_dir)) {
    throw Error(ErrorKind::kConfig, "data directory not found: " + config.data_dir.string());
  }
}

SyntheticSpec ParseSyntheticSpec(const std::string& text) {
  const pt::ptree tree = ReadIni(text);
  const auto sections = Sections(tree, {"synthetic", "schedule"}, false);
  SyntheticSpec spec;
  Section s = SectionOf(sections, "synthetic");
  s.Read("num_spans", spec.num_spans);
  s.Read("samples_per_span", spec.samples_per_span);
  s.Read("num_fields", spec.num_fields);
  s.Read("features_per_field", spec.features_per_field);
  s.Read("noise", spec.noise);
  s.Read("weight_scale", spec.weight_scale);
  s.Read("popularity_skew", spec.popularity_skew);
  s.Read("suppress_fraction", spec.suppress_fraction);
  s.Read("max_gap", spec.max_gap);
  s.Read("gap_end_min", spec.gap_end_min);
  s.ReadBool("gaps_follow_rarity", spec.gaps_follow_rarity);
  s.Read("seed", spec.seed);
  s.RejectUnknown();

  if (const auto it = sections.find("schedule"); it != sections.end()) {
    Section schedule("schedule", it->second);
    for (const auto& [key, child] : *it->second) {
      std::size_t field = 0, feature = 0;
      char tail = 0;
      if (key.size() < 4 || key[0] != 'f' ||
          std::sscanf(key.c_str(), "f%zu_%zu%c", &field, &feature, &tail) != 2) {
        throw Error(ErrorKind::kConfig,
                    "schedule key must look like f<field>_<feature>, got '" + key + "'");
      }
      std::vector<std::size_t>& spans = spec.schedule[{field, feature}];
      for (const std::string& item : SplitList(child.data())) {
        spans.push_back(schedule.Convert<std::size_t>(key, item));
      }
    }
  }
  return spec;
}

SyntheticSpec LoadSyntheticSpec(const fs::path& path) {
  return ParseSyntheticSpec(ReadTextFile(path));
}

std::string FormatSyntheticSpec(const SyntheticSpec& spec) {
  std::ostringstream out;
  out << "[synthetic]\nnum_spans = " << spec.num_spans
      << "\nsamples_per_span = " << spec.samples_per_span
      << "\nnum_fields = " << spec.num_fields
      << "\nfeatures_per_field = " << spec.features_per_field
      << "\nnoise = " << FormatDouble(spec.noise)
      << "\nweight_scale = " << FormatDouble(spec.weight_scale)
      << "\npopularity_skew = " << FormatDouble(spec.popularity_skew)
      << "\nsuppress_fraction = " << FormatDouble(spec.suppress_fraction)
      << "\nmax_gap = " << spec.max_gap << "\ngap_end_min = " << spec.gap_end_min
      << "\ngaps_follow_rarity = " << (spec.gaps_follow_rarity ? "true" : "false")
      << "\nseed = " << spec.seed << "\n";
  if (!spec.schedule.empty()) {
    out << "\n[schedule]\n";
    for (const auto& [key, spans] : spec.schedule) {
      out << "f" << key.first << "_" << key.second << " = ";
      for (std::size_t i = 0; i < spans.size(); ++i) out << (i ? "," : "") << spans[i];
      out << "\n";
    }
  }
  return out.str();
}

SweepGrid ParseSweepGrid(const std::string& text) {
  const pt::ptree tree = ReadIni(text);
  const auto sections = Sections(tree, {"grid"}, true);
  const auto it = sections.find("grid");
  if (it == sections.end()) throw Error(ErrorKind::kConfig, "missing [grid] section");
  Section grid("grid", it->second);
  std::vector<WeightFunction> funcs;
  std::vector<double> biases;
  if (const auto raw = grid.Raw("func")) {
    for (const std::string& item : SplitList(*raw)) funcs.push_back(ParseWeightFunction(item));
  }
  if (const auto raw = grid.Raw("bias")) {
    for (const std::string& item : SplitList(*raw)) {
      biases.push_back(grid.Convert<double>("bias", item));
    }
  }
  SweepGrid out;
  if (const auto raw = grid.Raw("control"); raw && !raw->empty()) out.control = ParseCell(*raw);
  grid.RejectUnknown();
  for (WeightFunction f : funcs) {
    for (double b : biases) out.cells.push_back({f, b});
  }
  if (out.cells.empty()) throw Error(ErrorKind::kConfig, "sweep grid is empty");
  return out;
}

SweepGrid LoadSweepGrid(const fs::path& path) { return ParseSweepGrid(ReadTextFile(path)); }

}  // namespace fesail
