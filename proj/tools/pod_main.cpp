// pod: goal sets, destruction datasets, training, generation, evaluation.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "pod/binary_io.hpp"
#include "pod/config.hpp"
#include "pod/destruction.hpp"
#include "pod/domain.hpp"
#include "pod/evalkit.hpp"
#include "pod/generation.hpp"
#include "pod/lego.hpp"
#include "pod/policy.hpp"
#include "pod/zelda.hpp"

namespace fs = std::filesystem;
using namespace pod;

namespace {

constexpr const char* kToolVersion = "1.0.0";

enum ExitCode { kOk = 0, kOther = 1, kUsage = 2, kIo = 3, kMismatch = 4, kNumeric = 5 };

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Usage: return kUsage;
    case ErrorKind::Io: return kIo;
    case ErrorKind::Config: return kMismatch;
    case ErrorKind::Numeric: return kNumeric;
    default: return kOther;
  }
}

std::string config_key(const std::string& flag) {
  std::string k = flag;
  for (auto& ch : k) {
    if (ch == '-') ch = '_';
  }
  return k;
}

// Flag storage plus config fallback: a flag given on the command line wins,
// then `[command] key`, then a top-level `key`, then the default.
class Options {
 public:
  Options(CLI::App* app, std::string command) : app_(app), command_(std::move(command)) {}

  void value(const std::string& name, const std::string& help) {
    app_->add_option("--" + name, values_[name], help);
  }
  void list(const std::string& name, const std::string& help) {
    app_->add_option("--" + name, lists_[name], help);
  }
  void flag(const std::string& name, const std::string& help) { app_->add_flag("--" + name, flags_[name], help); }

  void bind(const Config* config) { config_ = config; }

  std::optional<std::string> raw(const std::string& name) {
    std::optional<std::string> v;
    if (app_->count("--" + name) > 0) {
      v = values_.count(name) ? values_[name] : std::string(flags_[name] ? "true" : "false");
    } else if (config_ != nullptr) {
      v = config_->get(command_ + "." + config_key(name));
      if (!v) v = config_->get(config_key(name));
    }
    if (v) resolved_[name] = *v;
    return v;
  }

  std::string str(const std::string& name, const std::string& fallback) {
    auto v = raw(name);
    if (!v) resolved_[name] = fallback;
    return v ? *v : fallback;
  }
  std::string required(const std::string& name) {
    auto v = raw(name);
    if (!v || v->empty()) fail(ErrorKind::Usage, "--" + name + " is required");
    return *v;
  }
  int integer(const std::string& name, int fallback) {
    auto v = raw(name);
    if (!v) resolved_[name] = std::to_string(fallback);
    return v ? parse_int(*v, "--" + name) : fallback;
  }
  double real(const std::string& name, double fallback) {
    auto v = raw(name);
    if (!v) resolved_[name] = std::to_string(fallback);
    return v ? parse_double(*v, "--" + name) : fallback;
  }
  bool boolean(const std::string& name, bool fallback) {
    auto v = raw(name);
    if (!v) resolved_[name] = fallback ? "true" : "false";
    return v ? parse_bool(*v, "--" + name) : fallback;
  }
  std::vector<std::string> strings(const std::string& name) {
    if (app_->count("--" + name) > 0) {
      std::string joined;
      for (const auto& s : lists_[name]) joined += (joined.empty() ? "" : ";") + s;
      resolved_[name] = joined;
      return lists_[name];
    }
    std::vector<std::string> out;
    if (auto v = raw(name)) {
      std::string item;
      for (char ch : *v + ";") {
        if (ch == ';') {
          if (!item.empty()) out.push_back(item);
          item.clear();
        } else {
          item.push_back(ch);
        }
      }
    }
    return out;
  }

  /// --seed, then the config, then POD_SEED, then 0.
  std::uint64_t seed(const std::string& name = "seed") {
    if (auto v = raw(name)) return parse_u64(*v, "--" + name);
    if (const char* env = std::getenv("POD_SEED")) {
      resolved_[name] = env;
      return parse_u64(env, "POD_SEED");
    }
    resolved_[name] = "0";
    return 0;
  }

  const std::map<std::string, std::string>& resolved() const { return resolved_; }
  const std::string& command() const { return command_; }
  std::uint64_t config_digest() const { return config_ != nullptr ? config_->digest() : 0; }

 private:
  CLI::App* app_;
  std::string command_;
  const Config* config_ = nullptr;
  std::map<std::string, std::string> values_;
  std::map<std::string, std::vector<std::string>> lists_;
  std::map<std::string, bool> flags_;
  std::map<std::string, std::string> resolved_;
};

// Every run leaves a manifest of its resolved inputs; no timestamps, so
// identical manifests mean identical outputs.
void write_run_manifest(const std::string& path, const Options& opts, const nlohmann::ordered_json& extra = {}) {
  nlohmann::ordered_json j;
  j["tool"] = "pod";
  j["version"] = kToolVersion;
  j["command"] = opts.command();
  char digest[17];
  std::snprintf(digest, sizeof digest, "%016llx", static_cast<unsigned long long>(opts.config_digest()));
  j["config_digest"] = digest;
  nlohmann::ordered_json o = nlohmann::ordered_json::object();
  for (const auto& [k, v] : opts.resolved()) o[k] = v;
  j["options"] = o;
  if (!extra.is_null()) j["outputs"] = extra;
  write_text_file(path, j.dump(2) + "\n");
}

void ensure_parent(const std::string& path) {
  const auto parent = fs::path(path).parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  fs::create_directories(parent, ec);
  if (ec) fail(ErrorKind::Io, "cannot create directory " + parent.string());
}

// ---------------------------------------------------------------- commands

int cmd_gen_goals(Options& o) {
  const Domain& d = domain_by_name(o.required("domain"));
  const int count = o.integer("count", d.name == "zelda" ? 10 : 15);
  const auto seed = o.seed();
  const std::string out = o.required("out");
  const auto goals = generate_goals(d, count, seed);
  write_goal_dir(d, out, goals);
  write_run_manifest((fs::path(out) / "run.json").string(), o,
                     {{"goals", goals.size()}, {"goal_set_digest", std::to_string(goal_set_digest(goals))}});
  std::cout << "wrote " << goals.size() << " " << d.name << " goals to " << out << "\n";
  return kOk;
}

int cmd_destroy(Options& o) {
  const Domain& d = domain_by_name(o.required("domain"));
  const auto goals = read_goal_dir(d, o.required("goals"));
  DatasetConfig c;
  c.domain = d.name;
  const int size = o.integer("size", 100000);
  if (size < 1) fail(ErrorKind::Config, "--size must be at least 1");
  c.target_size = static_cast<std::uint64_t>(size);
  c.seed = o.seed();
  c.workers = o.integer("workers", 1);
  c.trajectory.epsilon = o.real("epsilon", 0.1);
  c.trajectory.max_steps = o.integer("max-steps", 0);
  c.trajectory.min_steps = o.integer("min-steps", d.trajectory_min_steps);
  const std::string out = o.required("out");
  const std::string destroyer_name = o.str("destroyer", "uniform");
  const auto start = start_distribution(d, goals);
  std::unique_ptr<Destroyer> destroyer;
  if (destroyer_name == "uniform") {
    destroyer = std::make_unique<UniformDestroyer>();
  } else if (destroyer_name == "histogram") {
    destroyer = std::make_unique<HistogramDestroyer>(start);
  } else {
    fail(ErrorKind::Config, "unknown destroyer '" + destroyer_name + "' (expected uniform or histogram)");
  }
  ensure_parent(out);
  const auto m = build_dataset(goals, d.metrics, d.alphabet, start, c, out, destroyer.get());
  const std::string jsonl = o.str("jsonl", "");
  if (!jsonl.empty()) export_dataset_jsonl(read_dataset(out), jsonl);
  write_run_manifest(out + ".run.json", o, {{"records", m.record_count}, {"trajectories", m.trajectory_count}});
  std::cout << "wrote " << m.record_count << " records from " << m.trajectory_count << " trajectories to " << out
            << "\n";
  return kOk;
}

int cmd_train(Options& o) {
  const std::string dataset = o.required("dataset");
  const auto manifest = read_manifest(manifest_path_for(dataset));
  const Domain& d = domain_by_name(o.str("domain", manifest.domain));
  PolicyConfig pc;
  pc.conv1 = o.integer("conv1", pc.conv1);
  pc.conv2 = o.integer("conv2", pc.conv2);
  pc.conv3 = o.integer("conv3", pc.conv3);
  pc.hidden = o.integer("hidden", pc.hidden);
  pc.condition_enabled = o.boolean("condition", true);
  if (o.boolean("no-condition", false)) pc.condition_enabled = false;
  pc.seed = o.seed();
  TrainConfig tc;
  tc.epochs = o.integer("epochs", d.name == "zelda" ? 250 : 40);
  tc.batch_size = o.integer("batch-size", 256);
  tc.seed = derive_seed(pc.seed, 1);
  tc.adam.lr = o.real("lr", tc.adam.lr);
  const std::string out = o.required("out");
  ensure_parent(out);
  tc.checkpoint_path = out;
  tc.report_path = o.str("report", out + ".report.csv");
  const bool quiet = o.boolean("quiet", false);
  tc.on_epoch = [&](const EpochReport& r) {
    if (!quiet) {
      std::cerr << "epoch " << r.epoch << "/" << tc.epochs << " loss " << r.mean_loss << " accuracy " << r.accuracy
                << "\n";
    }
  };
  PolicyModel model(d, pc);
  const auto reports = train_from_file(model, dataset, tc);
  save_model(out, model);
  write_text_file(tc.report_path, report_csv(reports));
  write_run_manifest(out + ".run.json", o, {{"epochs", reports.size()}});
  std::cout << "trained " << reports.size() << " epochs; model written to " << out << "\n";
  return kOk;
}

std::vector<std::vector<int>> parse_targets(const Domain& d, const std::vector<std::string>& specs) {
  std::vector<int> t(d.metrics.size());
  std::vector<bool> seen(d.metrics.size(), false);
  for (const auto& spec : specs) {
    std::string item;
    for (char ch : spec + ",") {
      if (ch != ',') {
        item.push_back(ch);
        continue;
      }
      if (item.empty()) continue;
      const auto eq = item.find('=');
      if (eq == std::string::npos) fail(ErrorKind::Usage, "--target expects name=value, got '" + item + "'");
      const int idx = d.metric_index(item.substr(0, eq));
      t[static_cast<std::size_t>(idx)] = parse_int(item.substr(eq + 1), "--target " + item.substr(0, eq));
      seen[static_cast<std::size_t>(idx)] = true;
      item.clear();
    }
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) fail(ErrorKind::Usage, "missing --target for metric " + d.metrics[i].name);
  }
  return {t};
}

int cmd_generate(Options& o) {
  const std::string agent = o.str("agent", "agent");
  std::optional<PolicyModel> model;
  const Domain* d = nullptr;
  if (agent == "agent") {
    model.emplace(load_model(o.required("model")));
    d = &model->domain();
    if (auto name = o.raw("domain"); name && *name != d->name) {
      fail(ErrorKind::Config, "model domain '" + d->name + "' does not match --domain " + *name);
    }
  } else if (agent == "random") {
    d = &domain_by_name(o.required("domain"));
  } else {
    fail(ErrorKind::Usage, "--agent must be agent or random");
  }

  BatchConfig bc;
  bc.seed = o.seed();
  bc.per_target = o.integer("episodes", 1);
  bc.workers = o.integer("workers", 1);
  bc.run = o.str("run", "run0");
  bc.generation.max_steps = o.integer("max-steps", d->generation_steps);
  bc.generation.early_stop = o.boolean("early-stop", d->early_stop);
  if (o.boolean("no-early-stop", false)) bc.generation.early_stop = false;
  bc.generation.order = parse_sweep_order(o.str("order", "row-major"));
  bc.generation.temperature = o.real("temperature", 0.0);

  std::vector<std::vector<int>> targets;
  const int random_targets = o.integer("random-targets", 0);
  if (random_targets > 0) {
    std::mt19937_64 rng(derive_seed(bc.seed, 0x7a));
    targets = sample_target_grid(*d, random_targets, rng);
  } else {
    targets = parse_targets(*d, o.strings("target"));
  }
  std::vector<std::string> warnings;
  for (auto& t : targets) t = clamp_targets(*d, t, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";

  const std::string out = o.required("out");
  Archive archive;
  if (model) {
    archive = generate_batch(*model, targets, bc);
  } else {
    std::vector<CellGrid> goals;
    if (d->start == StartKind::GoalHistogram) goals = read_goal_dir(*d, o.required("goals"));
    archive = random_batch(*d, start_distribution(*d, goals), targets, bc);
  }
  write_archive(out, archive);
  write_run_manifest((fs::path(out) / "run.json").string(), o, {{"artifacts", archive.entries.size()}});
  std::cout << "wrote " << archive.entries.size() << " artifacts to " << out << "\n";
  return kOk;
}

int cmd_evaluate(Options& o) {
  const std::string dir = o.required("archive");
  const Archive archive = read_archive(dir);
  const Domain& d = domain_by_name(archive.domain);
  std::vector<CellGrid> goals;
  if (auto g = o.raw("goals")) goals = read_goal_dir(d, *g);
  std::optional<Archive> random;
  if (auto r = o.raw("random-archive")) random = read_archive(*r);
  const std::string report = o.str("report", (fs::path(dir) / "report.csv").string());
  ensure_parent(report);
  write_text_file(report, evaluation_report_csv(archive, goals));
  if (auto plot = o.raw("plot-data")) write_plot_data(*plot, archive, random ? &*random : nullptr, goals);
  write_run_manifest(report + ".run.json", o);
  std::cout << evaluation_summary(archive, goals);
  if (random && d.name == "lego" && !goals.empty()) {
    std::cout << "random_mean_similarity: " << mean_similarity(*random, goals) << "\n";
  }
  return kOk;
}

void render_one(const Domain& d, const CellGrid& g, const std::string& out) {
  const auto ext = fs::path(out).extension().string();
  if (ext == ".png") {
    if (d.name != "zelda") fail(ErrorKind::Config, "png rendering is only available for zelda levels");
    zelda::render_png(g, out);
  } else {
    write_text_file(out, format_grid(g, d.chars));
  }
}

int cmd_render(Options& o) {
  const std::string out = o.required("out");
  if (auto dir = o.raw("archive")) {
    const Archive a = read_archive(*dir);
    const Domain& d = domain_by_name(a.domain);
    const std::string ext = o.str("format", d.name == "zelda" ? "png" : "txt");
    std::error_code ec;
    fs::create_directories(out, ec);
    for (const auto& e : a.entries) render_one(d, e.grid, (fs::path(out) / (e.id + "." + ext)).string());
    write_run_manifest((fs::path(out) / "run.json").string(), o, {{"rendered", a.entries.size()}});
    return kOk;
  }
  const Domain& d = domain_by_name(o.required("domain"));
  ensure_parent(out);
  render_one(d, read_artifact(d, o.required("in")), out);
  return kOk;
}

int cmd_export(Options& o) {
  const std::string out = o.required("out");
  const std::string format = o.str("format", "voxel-json");
  if (auto ds = o.raw("dataset")) {
    if (format != "jsonl") fail(ErrorKind::Config, "datasets export as jsonl");
    ensure_parent(out);
    export_dataset_jsonl(read_dataset(*ds), out);
    return kOk;
  }
  const auto fmt = lego::parse_export_format(format);
  const std::string ext = fmt == lego::ExportFormat::VoxelJson ? ".json" : ".ldr";
  if (auto dir = o.raw("archive")) {
    const Archive a = read_archive(*dir);
    if (a.domain != "lego") fail(ErrorKind::Config, "structure export needs a lego archive");
    std::error_code ec;
    fs::create_directories(out, ec);
    for (const auto& e : a.entries) lego::export_structure(e.grid, (fs::path(out) / (e.id + ext)).string(), fmt);
    write_run_manifest((fs::path(out) / "run.json").string(), o, {{"exported", a.entries.size()}});
    return kOk;
  }
  ensure_parent(out);
  lego::export_structure(lego::read_voxel_json_file(o.required("in")), out, fmt);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Controllable generation by learned repair of destroyed artifacts"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "key = value config file; flags override it");
  app.set_version_flag("--version", kToolVersion);

  struct Command {
    CLI::App* app;
    std::unique_ptr<Options> opts;
    int (*run)(Options&);
  };
  std::vector<Command> commands;
  auto add = [&](const std::string& name, const std::string& help, int (*run)(Options&)) -> Options& {
    auto* sub = app.add_subcommand(name, help);
    commands.push_back({sub, std::make_unique<Options>(sub, name), run});
    return *commands.back().opts;
  };

  auto& gg = add("gen-goals", "write a goal set", cmd_gen_goals);
  gg.value("domain", "zelda or lego");
  gg.value("count", "number of goals");
  gg.value("seed", "random seed (falls back to POD_SEED)");
  gg.value("out", "output directory");

  auto& de = add("destroy", "build a destruction dataset from a goal set", cmd_destroy);
  de.value("domain", "zelda or lego");
  de.value("goals", "goal directory");
  de.value("size", "minimum record count");
  de.value("seed", "random seed (falls back to POD_SEED)");
  de.value("out", "dataset file");
  de.value("epsilon", "histogram L1 stop distance");
  de.value("max-steps", "trajectory cap, 0 for twice the cell count");
  de.value("min-steps", "records before the stop test applies");
  de.value("destroyer", "uniform or histogram");
  de.value("workers", "trajectory threads");
  de.value("jsonl", "also export the records as JSON lines");

  auto& tr = add("train", "train a repair policy", cmd_train);
  tr.value("dataset", "dataset file");
  tr.value("domain", "override the dataset's domain");
  tr.value("out", "model checkpoint");
  tr.value("epochs", "training epochs");
  tr.value("batch-size", "mini-batch size");
  tr.value("lr", "Adam learning rate");
  tr.value("seed", "random seed (falls back to POD_SEED)");
  tr.value("conv1", "first conv width");
  tr.value("conv2", "second conv width");
  tr.value("conv3", "third conv width");
  tr.value("hidden", "hidden dense width");
  tr.value("condition", "true to feed condition signals");
  tr.flag("no-condition", "train the unconditioned ablation");
  tr.value("report", "per-epoch CSV report");
  tr.flag("quiet", "no per-epoch progress");

  auto& ge = add("generate", "generate artifacts by iterative repair", cmd_generate);
  ge.value("model", "model checkpoint");
  ge.value("agent", "agent or random");
  ge.value("domain", "domain (required for the random agent)");
  ge.value("goals", "goal directory (random agent start distribution)");
  ge.list("target", "metric=value, repeatable or comma separated");
  ge.value("random-targets", "sample this many stratified target tuples instead");
  ge.value("episodes", "episodes per target");
  ge.value("seed", "random seed (falls back to POD_SEED)");
  ge.value("max-steps", "edit budget per episode");
  ge.value("early-stop", "true or false");
  ge.flag("no-early-stop", "disable early stopping");
  ge.value("order", "row-major or random");
  ge.value("temperature", "0 for argmax, else sampling temperature");
  ge.value("workers", "episode threads");
  ge.value("run", "run label stored in the archive");
  ge.value("out", "archive directory");

  auto& ev = add("evaluate", "evaluate an archive", cmd_evaluate);
  ev.value("archive", "archive directory");
  ev.value("goals", "goal directory");
  ev.value("random-archive", "random-agent archive for similarity comparison");
  ev.value("report", "report CSV");
  ev.value("plot-data", "directory for per-figure CSVs");

  auto& re = add("render", "render a level or an archive", cmd_render);
  re.value("domain", "zelda or lego");
  re.value("in", "artifact file");
  re.value("archive", "archive directory");
  re.value("format", "png or txt for archives");
  re.value("out", "output file or directory");

  auto& ex = add("export", "export structures or datasets", cmd_export);
  ex.value("in", "voxel-json structure");
  ex.value("archive", "lego archive directory");
  ex.value("dataset", "dataset file");
  ex.value("format", "voxel-json, ldraw-text or jsonl");
  ex.value("out", "output file or directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    Config config;
    if (!config_path.empty()) config = Config::load(config_path);
    for (auto& c : commands) {
      if (c.app->parsed()) {
        c.opts->bind(&config);
        return c.run(*c.opts);
      }
    }
    return kUsage;
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kOther;
  }
}
