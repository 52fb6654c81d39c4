// Copyright 2026 The calibfw Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// calibfw command-line driver.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "calibfw/dataset.hpp"
#include "calibfw/eval.hpp"
#include "calibfw/incremental.hpp"
#include "calibfw/nn/checkpoint.hpp"
#include "calibfw/nn/training.hpp"
#include "calibfw/overlay.hpp"
#include "calibfw/panorama.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace calibfw;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An option whose value may also come from the config file. Flags given on
// the command line win over the file, the file wins over defaults.
struct Binding {
  std::string key;
  CLI::Option* option = nullptr;
  std::function<void(const json&)> load;
  std::function<json()> dump;
  bool required = false;
  bool from_config = false;
};

class Command {
 public:
  Command(CLI::App& parent, const std::string& name, const std::string& description)
      : app_(parent.add_subcommand(name, description)), name_(name) {
    bind("--seed", "seed", seed, "Random seed");
    bind("--workers", "workers", workers, "Worker threads")->check(CLI::PositiveNumber);
    bind_flag("--deterministic", "deterministic", deterministic,
              "Keep wall-clock data out of outputs (file names, configs)");
    app_->add_option("--config", config_path, "JSON config file (flags take precedence)");
  }
  virtual ~Command() = default;

  CLI::App* app() const { return app_; }
  const std::string& name() const { return name_; }

  template <typename T>
  CLI::Option* bind(const std::string& flag, const std::string& key, T& var, const std::string& desc) {
    CLI::Option* opt = app_->add_option(flag, var, desc)->capture_default_str();
    bindings_.push_back({key, opt, [&var](const json& j) { var = j.get<T>(); }, [&var] { return json(var); }});
    return opt;
  }

  CLI::Option* bind_flag(const std::string& flag, const std::string& key, bool& var, const std::string& desc) {
    CLI::Option* opt = app_->add_flag(flag, var, desc);
    bindings_.push_back({key, opt, [&var](const json& j) { var = j.get<bool>(); }, [&var] { return json(var); }});
    return opt;
  }

  /// Marks an option as required on the command line or in the config file.
  void require(const std::string& key) {
    for (auto& b : bindings_)
      if (b.key == key) b.required = true;
  }

  /// Fills unset options from the config file and returns the resolved config.
  json resolve() {
    if (!config_path.empty()) {
      std::ifstream is(config_path);
      if (!is) throw UsageError("cannot read config file " + config_path);
      json file;
      try {
        is >> file;
      } catch (const json::exception& e) {
        throw UsageError("config file " + config_path + " is not valid JSON");
      }
      if (!file.is_object()) throw UsageError("config file " + config_path + " must hold a JSON object");
      for (const auto& [key, value] : file.items()) {
        if (key == "command" || key == "created") continue;
        auto it = std::find_if(bindings_.begin(), bindings_.end(), [&](const Binding& b) { return b.key == key; });
        if (it == bindings_.end()) throw UsageError("unknown config key '" + key + "' for " + name_);
        if (it->option->count() > 0) continue;
        try {
          it->load(value);
          it->from_config = true;
        } catch (const json::exception&) {
          throw UsageError("config key '" + key + "' has the wrong type");
        }
      }
    }
    for (const auto& b : bindings_)
      if (b.required && b.option->count() == 0 && !b.from_config)
        throw UsageError(b.option->get_name() + " is required");
    json resolved = json::object();
    resolved["command"] = name_;
    for (const auto& b : bindings_) resolved[b.key] = b.dump();
    if (!deterministic) resolved["created"] = timestamp();
    return resolved;
  }

  virtual void run(const json& resolved) = 0;

  static std::string timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
    return buf;
  }

  std::uint64_t seed = 1;
  int workers = 1;
  bool deterministic = false;

 protected:
  CLI::App* app_;
  std::string name_;
  std::string config_path;
  std::vector<Binding> bindings_;
};

// Relative data paths resolve against CALIB_DATA_DIR when it is set.
fs::path data_path(const std::string& p) {
  if (p.empty()) return {};
  fs::path path(p);
  if (path.is_absolute()) return path;
  if (const char* root = std::getenv("CALIB_DATA_DIR"); root && *root) return fs::path(root) / path;
  return path;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << j.dump(2) << '\n';
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

void ensure_parent(const fs::path& file) {
  const fs::path parent = file.parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  fs::create_directories(parent, ec);
  if (ec) throw std::runtime_error("cannot create directory " + parent.string());
}

fs::path sibling(const fs::path& file, const std::string& suffix) {
  fs::path out = file;
  out.replace_extension();
  return out.string() + suffix;
}

DatasetManifest open_dataset(const std::string& dir) {
  if (dir.empty()) throw UsageError("a dataset directory is required");
  const fs::path root = data_path(dir);
  if (!fs::is_directory(root)) throw std::runtime_error("dataset directory " + root.string() + " does not exist");
  return read_manifest(root / kManifestFileName);
}

nn::Checkpoint open_checkpoint(const std::string& path) {
  if (path.empty()) throw UsageError("a checkpoint path is required");
  return nn::load_checkpoint(data_path(path));
}

std::optional<BiCParams> checkpoint_bic(const nn::Checkpoint& ck) {
  if (ck.extra.contains("bic")) return BiCParams::from_json(ck.extra.at("bic"));
  return std::nullopt;
}

// ---------------------------------------------------------------------------

struct GenPanos : Command {
  int count = 0;
  std::string style = "indoor-like";
  int height = 256;
  std::string out;

  explicit GenPanos(CLI::App& app) : Command(app, "gen-panos", "Synthesize procedural panoramas") {
    bind("--count", "count", count, "Number of panoramas");
    require("count");
    bind("--style", "style", style, "indoor-like or outdoor-like");
    bind("--height", "height", height, "Panorama height in pixels (width = 2 x height)");
    bind("--out", "out", out, "Output directory");
    require("out");
  }

  void run(const json& resolved) override {
    if (count < 1) throw UsageError("--count must be >= 1");
    const PanoramaStyle st = parse_style(style);
    if (st == PanoramaStyle::external) throw UsageError("--style must be indoor-like or outdoor-like");
    const fs::path dir = data_path(out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create output directory " + dir.string());
    Rng rng(seed);
    json index = json::array();
    for (int i = 0; i < count; ++i) {
      const std::uint64_t pano_seed = rng.next();
      const Panorama p = synth_panorama(pano_seed, st, height);
      char name[32];
      std::snprintf(name, sizeof name, "pano_%04d.png", i);
      write_png(dir / name, p.image);
      index.push_back({{"file", name}, {"source_id", p.source_id}, {"style", to_string(st)}, {"seed", pano_seed}});
    }
    write_json(dir / "index.json", index);
    write_json(dir / "run_config.json", resolved);
  }
};

struct GenDataset : Command {
  std::string panos;
  std::string out;
  int count = -1;
  int test_count = 0;
  int size = 64;
  int crops_per_panorama = 8;
  double train_fraction = 0.8;
  double test_panorama_fraction = 0.25;
  std::vector<double> focal_px{kFocalMinPx, kFocalMaxPx};
  std::vector<double> pitch_deg{-90.0, 0.0};
  std::vector<double> roll_deg{-45.0, 45.0};

  explicit GenDataset(CLI::App& app) : Command(app, "gen-dataset", "Render a labeled crop dataset") {
    bind("--panos", "panos", panos, "Panorama directory");
    require("panos");
    bind("--out", "out", out, "Dataset directory");
    require("out");
    bind("--count", "count", count, "Train + val crops (-1: crops-per-panorama x panoramas)");
    bind("--test-count", "test_count", test_count, "Crops from held-out panoramas");
    bind("--size", "size", size, "Crop size in pixels");
    bind("--crops-per-panorama", "crops_per_panorama", crops_per_panorama, "Default crops per panorama");
    bind("--train-fraction", "train_fraction", train_fraction, "Share of crops in the train split");
    bind("--test-panorama-fraction", "test_panorama_fraction", test_panorama_fraction,
         "Share of panoramas reserved for the test split");
    bind("--focal-px", "focal_px", focal_px, "Focal range in pixels (lo,hi)")->delimiter(',')->expected(2);
    bind("--pitch-deg", "pitch_deg", pitch_deg, "Pitch range in degrees (lo,hi)")->delimiter(',')->expected(2);
    bind("--roll-deg", "roll_deg", roll_deg, "Roll range in degrees (lo,hi)")->delimiter(',')->expected(2);
  }

  void run(const json& resolved) override {
    if (count == 0) throw UsageError("--count must be positive (or -1 for the default)");
    for (const auto* r : {&focal_px, &pitch_deg, &roll_deg})
      if (r->size() != 2) throw UsageError("parameter ranges take exactly two values");
    const fs::path src = data_path(panos);
    if (!fs::is_directory(src)) throw std::runtime_error("panorama directory " + src.string() + " does not exist");
    DatasetConfig cfg;
    cfg.sampler.seed = seed;
    cfg.sampler.focal_px = {focal_px[0], focal_px[1]};
    cfg.sampler.pitch_deg = {pitch_deg[0], pitch_deg[1]};
    cfg.sampler.roll_deg = {roll_deg[0], roll_deg[1]};
    cfg.sampler.crops_per_panorama = crops_per_panorama;
    cfg.sampler.output_size = size;
    cfg.count = count;
    cfg.test_count = test_count;
    cfg.train_fraction = train_fraction;
    cfg.test_panorama_fraction = test_panorama_fraction;
    cfg.workers = workers;
    const fs::path dir = data_path(out);
    generate_dataset(load_panorama_dir(src), cfg, dir);
    write_json(dir / "run_config.json", resolved);
  }
};

struct Train : Command {
  std::string data;
  std::string arch = "calibnet-tiny";
  std::string head = "affine";
  int epochs = 10;
  int batch = nn::kDefaultBatchSize;
  double lr = nn::kDefaultLearningRate;
  double momentum = 0.0;
  std::string out;

  explicit Train(CLI::App& app) : Command(app, "train", "Train a calibration network") {
    bind("--data", "data", data, "Dataset directory");
    require("data");
    bind("--arch", "arch", arch, "Architecture preset");
    bind("--head", "head", head, "Output head: affine or cosine");
    bind("--epochs", "epochs", epochs, "Training epochs");
    bind("--batch", "batch", batch, "Batch size");
    bind("--lr", "lr", lr, "Initial learning rate");
    bind("--momentum", "momentum", momentum, "SGD momentum");
    bind("--out", "out", out, "Output checkpoint");
    require("out");
  }

  void run(const json& resolved) override {
    if (epochs < 1) throw UsageError("--epochs must be >= 1");
    const nn::HeadKind head_kind = nn::parse_head(head);
    nn::arch_preset(arch, head_kind);
    const DatasetManifest m = open_dataset(data);
    const nn::ArchConfig a = nn::arch_preset(arch, head_kind, m.crop_size);
    const LabeledSet train_set = load_split(m, Split::train, workers);
    const LabeledSet val_set = load_split(m, Split::val, workers);
    if (train_set.empty()) throw std::runtime_error("dataset has no training records");

    Rng rng(seed);
    nn::Network<float> net(a);
    net.initialize(rng);
    nn::OptimizerState opt;
    opt.lr = lr;
    opt.momentum = momentum;
    nn::TrainConfig cfg{epochs, batch, lr, momentum, workers};
    std::vector<json> history;
    nn::train_network(net, opt, rng, train_set, val_set, cfg, [&](const nn::EpochRecord& r) {
      history.push_back(nn::base_history_json(r));
      std::fprintf(stderr, "epoch %d lr %g train_loss %.6f val_muMSE %s\n", r.epoch, r.lr, r.train_loss,
                   r.val_mu_mse_new ? std::to_string(*r.val_mu_mse_new).c_str() : "n/a");
    });
    const fs::path path = data_path(out);
    ensure_parent(path);
    nn::save_checkpoint(path, net, opt, rng.state());
    nn::write_history(sibling(path, ".history.jsonl"), history);
    write_json(sibling(path, ".config.json"), resolved);
  }
};

struct StrategyFlags {
  std::string strategy = "finetune";
  double lambda0 = 1.0;
  double exemplar_pct = 0.0;
  double lambda_dist = 1.0;
  double bic_val_fraction = 0.1;
  bool distill_new_only = false;
  std::string herding = "global";
  int herding_bins = 5;

  void add(Command& c, bool with_pct) {
    c.bind("--strategy", "strategy", strategy, "finetune, lwf, icarl, lucir or bic");
    c.bind("--lambda", "lambda0", lambda0, "Output distillation weight");
    if (with_pct) c.bind("--exemplar-pct", "exemplar_pct", exemplar_pct, "Old training records kept (%)");
    c.bind("--lambda-dist", "lambda_dist", lambda_dist, "Less-forget weight (lucir)");
    c.bind("--bic-val-fraction", "bic_val_fraction", bic_val_fraction, "New-train share held out for bic");
    c.bind_flag("--distill-new-only", "distill_new_only", distill_new_only,
           "Distill on new-data rows only (exemplar strategies)");
    c.bind("--herding", "herding", herding, "Herding mode: global or binned");
    c.bind("--herding-bins", "herding_bins", herding_bins, "Pitch bins for binned herding");
  }

  StrategyConfig config() const {
    StrategyConfig s;
    s.kind = parse_strategy(strategy);
    s.lambda0 = lambda0;
    s.exemplar_pct = exemplar_pct;
    s.lambda_dist = lambda_dist;
    s.bic_val_fraction = bic_val_fraction;
    s.distill_on_exemplars = !distill_new_only;
    s.herding = parse_herding_mode(herding);
    s.herding_bins = herding_bins;
    s.validate();
    return s;
  }
};

struct TrainIncremental : Command {
  std::string base;
  std::string old_data;
  std::string new_data;
  StrategyFlags flags;
  int epochs = 10;
  int batch = nn::kDefaultBatchSize;
  double lr = nn::kDefaultLearningRate;
  double momentum = 0.0;
  int max_steps = 0;
  std::string out;

  explicit TrainIncremental(CLI::App& app)
      : Command(app, "train-incremental", "Update a trained network on a new domain") {
    bind("--base", "base", base, "Base checkpoint");
    require("base");
    bind("--old-data", "old_data", old_data, "Old-domain dataset directory");
    bind("--new-data", "new_data", new_data, "New-domain dataset directory");
    require("new_data");
    flags.add(*this, true);
    bind("--epochs", "epochs", epochs, "Training epochs");
    bind("--batch", "batch", batch, "Batch size");
    bind("--lr", "lr", lr, "Initial learning rate");
    bind("--momentum", "momentum", momentum, "SGD momentum");
    bind("--max-steps", "max_steps", max_steps, "Stop after this many optimizer steps (0: no limit)");
    bind("--out", "out", out, "Output checkpoint");
    require("out");
  }

  void run(const json& resolved) override {
    if (epochs < 1) throw UsageError("--epochs must be >= 1");
    const StrategyConfig s = flags.config();
    const nn::Checkpoint ck = open_checkpoint(base);
    if (s.kind == StrategyKind::lucir && ck.net.arch().head != nn::HeadKind::cosine)
      throw StrategyMismatch("strategy lucir requires a cosine-head base checkpoint; " + base + " has an " +
                             nn::to_string(ck.net.arch().head) + " head");
    if ((s.exemplar_pct > 0.0 || s.kind == StrategyKind::bic) && old_data.empty())
      throw UsageError("--old-data is required when exemplars are kept");
    const DatasetManifest nm = open_dataset(new_data);
    LabeledSet old_train, old_val;
    if (!old_data.empty()) {
      const DatasetManifest om = open_dataset(old_data);
      old_train = load_split(om, Split::train, workers);
      old_val = load_split(om, Split::val, workers);
    }
    const LabeledSet new_train = load_split(nm, Split::train, workers);
    const LabeledSet new_val = load_split(nm, Split::val, workers);

    Rng rng(seed);
    nn::TrainConfig cfg{epochs, batch, lr, momentum, workers};
    std::vector<json> history;
    const auto result = train_incremental(
        ck.net, {old_train, old_val, new_train, new_val}, s, cfg, rng,
        [&](const nn::EpochRecord& r) {
          json line = nn::incremental_history_json(r);
          line["lambda0"] = s.lambda0;
          history.push_back(line);
          std::fprintf(stderr, "epoch %d lr %g train_loss %.6f\n", r.epoch, r.lr, r.train_loss);
        },
        max_steps);
    const fs::path path = data_path(out);
    ensure_parent(path);
    nn::save_checkpoint(path, result.net, result.optimizer, rng.state(), result.checkpoint_extra());
    nn::write_history(sibling(path, ".history.jsonl"), history);
    json cfg_out = resolved;
    cfg_out["equivalent_strategy"] = to_string(s.equivalent_kind());
    if (s.equivalent_kind() != s.kind)
      std::fprintf(stderr, "note: strategy %s with these settings is equivalent to %s\n",
                   to_string(s.kind).c_str(), to_string(s.equivalent_kind()).c_str());
    write_json(sibling(path, ".config.json"), cfg_out);
  }
};

std::string join_names(const std::vector<std::string>& names) {
  std::string out;
  for (const auto& n : names) out += (out.empty() ? "" : "+") + n;
  return out;
}

struct Eval : Command {
  std::vector<std::string> models;
  std::vector<std::string> data;
  std::string split = "val";
  std::string out_dir = ".";
  std::string name;

  explicit Eval(CLI::App& app) : Command(app, "eval", "Evaluate checkpoints on datasets") {
    bind("--model", "model", models, "Checkpoint (repeatable)");
    require("model");
    bind("--data", "data", data, "Dataset directory (repeatable)");
    require("data");
    bind("--split", "split", split, "Split to evaluate: train, val or test");
    bind("--out-dir", "out_dir", out_dir, "Report directory");
    bind("--name", "name", name, "Report file stem (default: {model}_{dataset}_{timestamp})");
  }

  void run(const json& resolved) override {
    const Split sp = parse_split(split);
    std::vector<nn::Checkpoint> cks;
    std::vector<NamedModel> named;
    for (const auto& m : models) cks.push_back(open_checkpoint(m));
    for (std::size_t i = 0; i < models.size(); ++i)
      named.push_back({fs::path(models[i]).stem().string(), &cks[i].net, checkpoint_bic(cks[i])});
    std::vector<LabeledSet> sets;
    std::vector<std::string> set_names;
    for (const auto& d : data) {
      const DatasetManifest m = open_dataset(d);
      sets.push_back(load_split(m, sp, workers));
      if (sets.back().empty()) throw std::runtime_error("dataset " + d + " has no " + split + " records");
      set_names.push_back(fs::path(d).lexically_normal().filename().string() + "-" + split);
    }
    std::vector<NamedSet> named_sets;
    for (std::size_t i = 0; i < sets.size(); ++i) named_sets.push_back({set_names[i], &sets[i]});
    const auto reports = cross_evaluate(named, named_sets, workers);

    std::vector<std::string> model_names;
    for (const auto& m : named) model_names.push_back(m.name);
    std::string stem = name;
    if (stem.empty()) {
      stem = join_names(model_names) + "_" + join_names(set_names);
      if (!deterministic) stem += "_" + timestamp();
    }
    const fs::path dir = data_path(out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    emit_csv(reports, dir / (stem + ".csv"));
    emit_svg(reports, dir / (stem + ".svg"));
    write_json(dir / (stem + ".config.json"), resolved);
    for (const auto& r : reports)
      std::printf("%s on %s: muMSE %.6f (focal %.6f, roll %.6f, pitch %.6f, n=%d)\n", r.model.c_str(),
                  r.dataset.c_str(), r.mu_mse, r.mse_focal, r.mse_roll, r.mse_pitch, r.n);
  }
};

struct Sweep : Command {
  std::string base;
  std::string old_data;
  std::string new_data;
  StrategyFlags flags;
  std::vector<double> pcts{0, 20, 40, 60, 80, 100};
  int epochs = 10;
  int batch = nn::kDefaultBatchSize;
  double lr = nn::kDefaultLearningRate;
  double momentum = 0.0;
  std::string eval_split = "test";
  std::string out_dir = ".";

  explicit Sweep(CLI::App& app)
      : Command(app, "sweep-exemplars", "Incremental runs over exemplar percentages") {
    flags.strategy = "icarl";
    bind("--base", "base", base, "Base checkpoint");
    require("base");
    bind("--old-data", "old_data", old_data, "Old-domain dataset directory");
    require("old_data");
    bind("--new-data", "new_data", new_data, "New-domain dataset directory");
    require("new_data");
    flags.add(*this, false);
    bind("--pcts", "pcts", pcts, "Exemplar percentages")->delimiter(',');
    bind("--epochs", "epochs", epochs, "Training epochs per run");
    bind("--batch", "batch", batch, "Batch size");
    bind("--lr", "lr", lr, "Initial learning rate");
    bind("--momentum", "momentum", momentum, "SGD momentum");
    bind("--eval-split", "eval_split", eval_split, "Split used for the reported errors");
    bind("--out-dir", "out_dir", out_dir, "Report directory");
  }

  void run(const json& resolved) override {
    StrategyConfig s = flags.config();
    if (!s.keeps_exemplars()) throw UsageError("sweep-exemplars needs icarl, lucir or bic");
    const nn::Checkpoint ck = open_checkpoint(base);
    const DatasetManifest om = open_dataset(old_data), nm = open_dataset(new_data);
    const LabeledSet old_train = load_split(om, Split::train, workers), old_val = load_split(om, Split::val, workers);
    const LabeledSet new_train = load_split(nm, Split::train, workers), new_val = load_split(nm, Split::val, workers);
    const Split es = parse_split(eval_split);
    const LabeledSet old_eval = load_split(om, es, workers), new_eval = load_split(nm, es, workers);
    if (old_eval.empty() || new_eval.empty()) throw std::runtime_error("no " + eval_split + " records to evaluate");
    nn::TrainConfig cfg{epochs, batch, lr, momentum, workers};
    const SweepSetup setup{ck.net, {old_train, old_val, new_train, new_val}, old_eval, new_eval};
    const SweepResult res = exemplar_sweep(setup, pcts, s, cfg, seed);
    const fs::path dir = data_path(out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    std::string stem = "sweep_" + to_string(s.kind);
    if (!deterministic) stem += "_" + timestamp();
    emit_sweep_csv(res, dir / (stem + ".csv"));
    emit_sweep_svg(res, dir / (stem + ".svg"), fs::path(old_data).lexically_normal().filename().string(),
                   fs::path(new_data).lexically_normal().filename().string());
    write_json(dir / (stem + ".config.json"), resolved);
    for (const auto& r : res.rows)
      std::printf("%g%%: old muMSE %.6f new muMSE %.6f\n", r.pct, r.mu_mse_old, r.mu_mse_new);
  }
};

struct DrawHorizon : Command {
  std::string model;
  std::string image;
  std::string data;
  std::string split = "test";
  int index = 0;
  std::vector<double> truth;
  int scale = 4;
  std::string out;

  explicit DrawHorizon(CLI::App& app) : Command(app, "draw-horizon", "Overlay predicted horizon lines") {
    bind("--model", "model", model, "Checkpoint");
    require("model");
    bind("--image", "image", image, "Input PNG (alternative to --data)");
    bind("--data", "data", data, "Dataset directory; draws record --index of --split with its ground truth");
    bind("--split", "split", split, "Split for --data");
    bind("--index", "index", index, "Record index within the split");
    bind("--truth", "truth", truth, "Ground truth for --image: focal_px,pitch_deg,roll_deg")
        ->delimiter(',')
        ->expected(3);
    bind("--scale", "scale", scale, "Upscaling factor");
    bind("--out", "out", out, "Output PNG");
    require("out");
  }

  void run(const json& resolved) override {
    if (image.empty() == data.empty()) throw UsageError("give exactly one of --image or --data");
    const nn::Checkpoint ck = open_checkpoint(model);
    RgbImage img;
    std::optional<HorizonParams> gt;
    if (!image.empty()) {
      img = read_png(data_path(image));
      if (!truth.empty()) {
        if (truth.size() != 3) throw UsageError("--truth takes focal_px,pitch_deg,roll_deg");
        gt = HorizonParams{truth[0], truth[1], truth[2]};
      }
    } else {
      const DatasetManifest m = open_dataset(data);
      const Split sp = parse_split(split);
      int seen = 0;
      const ManifestRecord* rec = nullptr;
      for (const auto& r : m.records)
        if (r.split == sp && seen++ == index) rec = &r;
      if (!rec) throw std::runtime_error("no record " + std::to_string(index) + " in split " + split);
      img = read_png(m.root / rec->image);
      gt = HorizonParams{rec->f_px, rec->pitch_deg, rec->roll_deg};
    }
    if (img.width != ck.net.arch().input_size || img.height != ck.net.arch().input_size)
      throw std::runtime_error("image is " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                               ", network expects " + std::to_string(ck.net.arch().input_size) + " px squares");
    LabeledSet one;
    one.image_size = img.width;
    one.images.resize(Eigen::Index(img.width) * img.height, 3);
    one.targets = Eigen::MatrixXd::Zero(1, 3);
    image_to_planes(img, one.images);
    Eigen::MatrixXd pred = nn::predict(ck.net, one, 1);
    if (auto bic = checkpoint_bic(ck)) pred = bic_apply(pred, *bic);
    CalibrationTarget t{std::clamp(pred(0, 0), 1e-3, 1.0), std::clamp(pred(0, 1), -0.999, 0.0),
                        std::clamp(pred(0, 2), -1.0, 1.0)};
    const HorizonParams p = HorizonParams::from_target(t);
    OverlayOptions opt;
    opt.scale = scale;
    const fs::path path = data_path(out);
    ensure_parent(path);
    write_png(path, draw_horizon(img, gt, p, opt));
    write_json(sibling(path, ".config.json"), resolved);
    std::printf("predicted focal %.2f px, pitch %.2f deg, roll %.2f deg; center row %.2f\n", p.f_px,
                p.pitch_deg, p.roll_deg, horizon_center_row(p, img.height));
  }
};

std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"calibfw: camera-calibration datasets, training and incremental learning"};
  app.require_subcommand(1);
  std::vector<std::unique_ptr<Command>> commands;
  commands.push_back(std::make_unique<GenPanos>(app));
  commands.push_back(std::make_unique<GenDataset>(app));
  commands.push_back(std::make_unique<Train>(app));
  commands.push_back(std::make_unique<TrainIncremental>(app));
  commands.push_back(std::make_unique<Eval>(app));
  commands.push_back(std::make_unique<Sweep>(app));
  commands.push_back(std::make_unique<DrawHorizon>(app));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "calibfw: usage error: %s\n", one_line(e.what()).c_str());
    return 2;
  }

  for (auto& c : commands) {
    if (!c->app()->parsed()) continue;
    try {
      const json resolved = c->resolve();
      c->run(resolved);
      return 0;
    } catch (const UsageError& e) {
      std::fprintf(stderr, "calibfw %s: usage error: %s\n", c->name().c_str(), one_line(e.what()).c_str());
      return 2;
    } catch (const std::exception& e) {
      std::fprintf(stderr, "calibfw %s: error: %s\n", c->name().c_str(), one_line(e.what()).c_str());
      return 1;
    }
  }
  return 1;
}
