#include "pod/destruction.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <thread>

#include "json.hpp"

#include "pod/binary_io.hpp"
#include "pod/random.hpp"

namespace pod {

void validate_metrics(std::span<const MetricSpec> metrics) {
  if (metrics.size() > 127) fail(ErrorKind::Config, "too many metrics");
  for (const auto& m : metrics) {
    if (!m.evaluate) fail(ErrorKind::Config, "metric '" + m.name + "' has no evaluator");
    if (m.min > m.max) fail(ErrorKind::Config, "metric '" + m.name + "' has min > max");
    if (m.threshold < 0) fail(ErrorKind::Config, "metric '" + m.name + "' has a negative threshold");
  }
}

std::vector<int> evaluate_metrics(std::span<const MetricSpec> metrics, const CellGrid& state) {
  std::vector<int> out;
  out.reserve(metrics.size());
  for (const auto& m : metrics) out.push_back(m.evaluate(state));
  return out;
}

ConditionSignal condition_signal(std::span<const MetricSpec> metrics, std::span<const int> targets,
                                 const CellGrid& state) {
  if (targets.size() != metrics.size()) fail(ErrorKind::Config, "target count does not match metric count");
  ConditionSignal signal(metrics.size());
  for (std::size_t i = 0; i < metrics.size(); ++i) {
    signal[i] = static_cast<std::int8_t>(condition_sign(targets[i], metrics[i].evaluate(state)));
  }
  return signal;
}

namespace {

DestroyStep overwrite_at(const CellGrid& state, std::size_t index, Category value) {
  DestroyStep step;
  step.cursor = state.cursor_of(index);
  step.repair_action = state[index];
  step.written = value;
  step.state = state;
  step.state.set(index, value);
  return step;
}

}  // namespace

DestroyStep UniformDestroyer::destroy(const CellGrid& state, std::mt19937_64& rng) const {
  const auto index = static_cast<std::size_t>(uniform_index(rng, state.size()));
  const auto value = static_cast<Category>(uniform_index(rng, static_cast<std::uint64_t>(state.categories())));
  return overwrite_at(state, index, value);
}

HistogramDestroyer::HistogramDestroyer(TileHistogram dist)
    : dist_(std::move(dist)), sampler_(dist_.counts) {
  if (dist_.total == 0) fail(ErrorKind::DegenerateInput, "destroyer histogram is empty");
}

DestroyStep HistogramDestroyer::destroy(const CellGrid& state, std::mt19937_64& rng) const {
  if (dist_.counts.size() != static_cast<std::size_t>(state.categories())) {
    fail(ErrorKind::Shape, "destroyer histogram alphabet mismatch");
  }
  const auto index = static_cast<std::size_t>(uniform_index(rng, state.size()));
  return overwrite_at(state, index, static_cast<Category>(sampler_(rng)));
}

DestroyStep destroy_step(const CellGrid& state, std::mt19937_64& rng) {
  return UniformDestroyer{}.destroy(state, rng);
}

int resolved_max_steps(const TrajectoryConfig& config, const CellGrid& goal) {
  return config.max_steps > 0 ? config.max_steps : static_cast<int>(2 * goal.size());
}

std::vector<DatasetRecord> make_trajectory(const CellGrid& goal, std::span<const MetricSpec> metrics,
                                           const TileHistogram& start_dist, const TrajectoryConfig& config,
                                           std::mt19937_64& rng, const Destroyer* destroyer) {
  const UniformDestroyer fallback;
  const Destroyer& d = destroyer != nullptr ? *destroyer : fallback;
  const int max_steps = resolved_max_steps(config, goal);
  const auto goal_values = evaluate_metrics(metrics, goal);
  const auto digest = grid_digest(goal);

  std::vector<DatasetRecord> records;
  records.reserve(static_cast<std::size_t>(max_steps));
  CellGrid current = goal;
  for (int t = 0; t < max_steps; ++t) {
    DestroyStep step = d.destroy(current, rng);
    DatasetRecord rec;
    rec.condition = condition_signal(metrics, goal_values, step.state);
    rec.cursor = step.cursor;
    rec.repair_action = step.repair_action;
    rec.provenance = Provenance{digest, 0, static_cast<std::uint32_t>(t)};
    rec.state = step.state;
    current = std::move(step.state);
    records.push_back(std::move(rec));
    if (static_cast<int>(records.size()) >= config.min_steps &&
        histogram_l1(tile_histogram(current), start_dist) <= config.epsilon) {
      break;
    }
  }
  return records;
}

Dataset::Dataset(Extents extents, int categories, int metric_count)
    : extents_(extents), categories_(categories), metric_count_(metric_count) {}

void Dataset::push_back(const DatasetRecord& record) {
  if (record.state.extents() != extents_) fail(ErrorKind::Shape, "record extents do not match dataset");
  if (record.condition.size() != static_cast<std::size_t>(metric_count_)) {
    fail(ErrorKind::Shape, "record condition width does not match dataset");
  }
  if (record.repair_action >= categories_) fail(ErrorKind::InvalidGrid, "repair action outside alphabet");
  if (!record.state.in_bounds(record.cursor)) fail(ErrorKind::Shape, "record cursor out of bounds");
  cells_.insert(cells_.end(), record.state.cells().begin(), record.state.cells().end());
  cursors_.push_back(record.cursor);
  conditions_.insert(conditions_.end(), record.condition.begin(), record.condition.end());
  actions_.push_back(record.repair_action);
  provenance_.push_back(record.provenance);
}

DatasetRecord Dataset::record(std::size_t i) const {
  auto c = cells(i);
  DatasetRecord r;
  r.state = CellGrid(extents_, categories_, std::vector<Category>(c.begin(), c.end()));
  r.cursor = cursors_.at(i);
  auto cond = condition(i);
  r.condition.assign(cond.begin(), cond.end());
  r.repair_action = actions_[i];
  r.provenance = provenance_[i];
  return r;
}

Dataset generate_dataset(std::span<const CellGrid> goals, std::span<const MetricSpec> metrics,
                         const TileHistogram& start_dist, const DatasetConfig& config,
                         const Destroyer* destroyer, std::uint64_t* trajectory_count) {
  if (goals.empty()) fail(ErrorKind::Config, "goal set is empty");
  if (config.target_size < 1) fail(ErrorKind::Config, "target size must be at least 1");
  if (config.trajectory.max_steps < 0) fail(ErrorKind::Config, "max_steps must be positive");
  validate_metrics(metrics);
  for (const auto& g : goals) {
    if (g.extents() != goals[0].extents() || g.categories() != goals[0].categories()) {
      fail(ErrorKind::Config, "goal grids disagree on extents or alphabet");
    }
  }

  Dataset ds(goals[0].extents(), goals[0].categories(), static_cast<int>(metrics.size()));
  const int workers = std::max(1, config.workers);
  std::uint64_t next = 0;

  auto run_one = [&](std::uint64_t index) {
    std::mt19937_64 rng(derive_seed(config.seed, index));
    const auto& goal = goals[uniform_index(rng, goals.size())];
    auto traj = make_trajectory(goal, metrics, start_dist, config.trajectory, rng, destroyer);
    for (auto& r : traj) r.provenance.trajectory = static_cast<std::uint32_t>(index);
    return traj;
  };

  while (ds.size() < config.target_size) {
    std::vector<std::vector<DatasetRecord>> chunk(static_cast<std::size_t>(workers));
    if (workers == 1) {
      chunk[0] = run_one(next);
    } else {
      std::vector<std::thread> pool;
      for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] { chunk[static_cast<std::size_t>(w)] = run_one(next + static_cast<std::uint64_t>(w)); });
      }
      for (auto& t : pool) t.join();
    }
    // Speculative trajectories past the target are discarded so the result
    // matches a single-worker run.
    for (auto& traj : chunk) {
      if (ds.size() >= config.target_size) break;
      for (const auto& r : traj) ds.push_back(r);
      ++next;
    }
  }
  if (trajectory_count != nullptr) *trajectory_count = next;
  return ds;
}

std::uint64_t goal_set_digest(std::span<const CellGrid> goals) {
  Fnv1a h;
  for (const auto& g : goals) h.add(grid_digest(g));
  return h.value();
}

DatasetManifest build_dataset(std::span<const CellGrid> goals, std::span<const MetricSpec> metrics,
                              const TileAlphabet& alphabet, const TileHistogram& start_dist,
                              const DatasetConfig& config, const std::string& path,
                              const Destroyer* destroyer) {
  if (goals.empty()) fail(ErrorKind::Config, "goal set is empty");
  if (goals[0].categories() != alphabet.size()) fail(ErrorKind::Config, "goal alphabet mismatch");
  std::uint64_t trajectories = 0;
  Dataset ds = generate_dataset(goals, metrics, start_dist, config, destroyer, &trajectories);

  DatasetManifest m;
  m.domain = config.domain;
  m.alphabet = alphabet.names();
  m.extents = ds.extents();
  for (const auto& metric : metrics) m.metric_names.push_back(metric.name);
  m.seed = config.seed;
  m.record_count = ds.size();
  m.trajectory_count = trajectories;
  m.goal_set_digest = goal_set_digest(goals);
  for (const auto& g : goals) m.goal_digests.push_back(grid_digest(g));
  m.epsilon = config.trajectory.epsilon;
  m.max_steps = resolved_max_steps(config.trajectory, goals[0]);
  m.min_steps = config.trajectory.min_steps;
  m.destroyer = destroyer != nullptr ? destroyer->name() : "uniform";
  m.start_distribution = start_dist.counts;

  write_dataset(path, ds, config.seed);
  write_manifest(manifest_path_for(path), m);
  return m;
}

std::size_t dataset_record_width(const Extents& extents, int metric_count, bool with_provenance) {
  return extents.cell_count() + 4 * static_cast<std::size_t>(extents.rank) +
         static_cast<std::size_t>(metric_count) + 1 + (with_provenance ? 16 : 0);
}

void write_dataset(const std::string& path, const Dataset& ds, std::uint64_t seed) {
  const auto& e = ds.extents();
  ByteWriter w;
  w.bytes(kDatasetMagic, sizeof(kDatasetMagic));
  w.u16(kDatasetVersion);
  w.u8(static_cast<std::uint8_t>(e.rank));
  w.u8(static_cast<std::uint8_t>(ds.metric_count()));
  w.u16(static_cast<std::uint16_t>(ds.categories()));
  for (int a = 0; a < 3; ++a) w.u32(static_cast<std::uint32_t>(e.size[a]));
  w.u64(ds.size());
  w.u64(seed);
  w.u8(1);  // flags: provenance present
  w.pad_to(kDatasetHeaderSize);

  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto cells = ds.cells(i);
    w.bytes(cells.data(), cells.size());
    for (int a = 0; a < e.rank; ++a) w.u32(static_cast<std::uint32_t>(ds.cursor(i).coords[a]));
    for (auto c : ds.condition(i)) w.i8(c);
    w.u8(ds.repair_action(i));
    const auto& p = ds.provenance(i);
    w.u64(p.goal_digest);
    w.u32(p.trajectory);
    w.u32(p.step);
  }
  write_file_bytes(path, w.data());
}

Dataset read_dataset(const std::string& path, std::uint64_t* seed) {
  const auto bytes = read_file_bytes(path);
  ByteReader r(bytes.data(), bytes.size());
  char magic[6];
  r.bytes(magic, 6);
  if (std::memcmp(magic, kDatasetMagic, 6) != 0) fail(ErrorKind::Io, path + " is not a PODDS1 dataset");
  const auto version = r.u16();
  if (version != kDatasetVersion) fail(ErrorKind::Io, "unsupported dataset version " + std::to_string(version));
  const int rank = r.u8();
  const int metric_count = r.u8();
  const int categories = r.u16();
  Extents e;
  e.rank = rank;
  for (int a = 0; a < 3; ++a) e.size[a] = static_cast<int>(r.u32());
  const auto count = r.u64();
  const auto base_seed = r.u64();
  const bool with_provenance = (r.u8() & 1) != 0;
  if (seed != nullptr) *seed = base_seed;
  if (rank != 2 && rank != 3) fail(ErrorKind::Io, "dataset header has bad rank");
  r.seek(kDatasetHeaderSize);
  const auto width = dataset_record_width(e, metric_count, with_provenance);
  if (r.remaining() != count * width) fail(ErrorKind::Io, "dataset payload size does not match header count");

  Dataset ds(e, categories, metric_count);
  std::vector<Category> cells(e.cell_count());
  for (std::uint64_t i = 0; i < count; ++i) {
    DatasetRecord rec;
    r.bytes(cells.data(), cells.size());
    rec.state = CellGrid(e, categories, cells);
    for (int a = 0; a < rank; ++a) rec.cursor.coords[a] = static_cast<int>(r.u32());
    rec.condition.resize(static_cast<std::size_t>(metric_count));
    for (auto& c : rec.condition) {
      c = r.i8();
      if (c < -1 || c > 1) fail(ErrorKind::Io, "condition entry outside {-1,0,1}");
    }
    rec.repair_action = r.u8();
    if (with_provenance) {
      rec.provenance.goal_digest = r.u64();
      rec.provenance.trajectory = r.u32();
      rec.provenance.step = r.u32();
    }
    ds.push_back(rec);
  }
  return ds;
}

std::string manifest_path_for(const std::string& dataset_path) { return dataset_path + ".manifest.json"; }

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t parse_hex64(const std::string& s) { return std::stoull(s, nullptr, 16); }

}  // namespace

void write_manifest(const std::string& path, const DatasetManifest& m) {
  nlohmann::ordered_json j;
  j["format"] = "PODDS1";
  j["version"] = kDatasetVersion;
  j["domain"] = m.domain;
  j["alphabet"] = m.alphabet;
  j["dims"] = std::vector<int>(m.extents.size.begin(), m.extents.size.begin() + m.extents.rank);
  j["metrics"] = m.metric_names;
  j["seed"] = m.seed;
  j["record_count"] = m.record_count;
  j["trajectory_count"] = m.trajectory_count;
  j["goal_set_digest"] = hex64(m.goal_set_digest);
  std::vector<std::string> digests;
  for (auto d : m.goal_digests) digests.push_back(hex64(d));
  j["goal_digests"] = digests;
  j["epsilon"] = m.epsilon;
  j["max_steps"] = m.max_steps;
  j["min_steps"] = m.min_steps;
  j["destroyer"] = m.destroyer;
  j["start_distribution"] = m.start_distribution;
  write_text_file(path, j.dump(2) + "\n");
}

DatasetManifest read_manifest(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
    DatasetManifest m;
    m.domain = j.value("domain", "");
    m.alphabet = j.at("alphabet").get<std::vector<std::string>>();
    auto dims = j.at("dims").get<std::vector<int>>();
    m.extents = dims.size() == 3 ? Extents::volume(dims[0], dims[1], dims[2]) : Extents::plane(dims.at(0), dims.at(1));
    m.metric_names = j.at("metrics").get<std::vector<std::string>>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.record_count = j.at("record_count").get<std::uint64_t>();
    m.trajectory_count = j.value("trajectory_count", std::uint64_t{0});
    m.goal_set_digest = parse_hex64(j.at("goal_set_digest").get<std::string>());
    for (const auto& d : j.at("goal_digests")) m.goal_digests.push_back(parse_hex64(d.get<std::string>()));
    m.epsilon = j.value("epsilon", 0.0);
    m.max_steps = j.value("max_steps", 0);
    m.min_steps = j.value("min_steps", 1);
    m.destroyer = j.value("destroyer", "uniform");
    if (j.contains("start_distribution")) {
      m.start_distribution = j.at("start_distribution").get<std::vector<std::uint64_t>>();
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Io, "malformed manifest " + path + ": " + e.what());
  }
}

void export_dataset_jsonl(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write " + path);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    nlohmann::ordered_json j;
    auto cells = ds.cells(i);
    j["state"] = std::vector<int>(cells.begin(), cells.end());
    j["cursor"] = std::vector<int>(ds.cursor(i).coords.begin(), ds.cursor(i).coords.begin() + ds.extents().rank);
    auto cond = ds.condition(i);
    j["condition"] = std::vector<int>(cond.begin(), cond.end());
    j["repair_action"] = ds.repair_action(i);
    j["goal"] = hex64(ds.provenance(i).goal_digest);
    j["trajectory"] = ds.provenance(i).trajectory;
    j["step"] = ds.provenance(i).step;
    out << j.dump() << '\n';
  }
  if (!out) fail(ErrorKind::Io, "write failed for " + path);
}

}  // namespace pod
