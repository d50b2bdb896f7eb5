#include "pod/generation.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "pod/binary_io.hpp"
#include "pod/lego.hpp"
#include "pod/random.hpp"
#include "pod/zelda.hpp"

namespace pod {

namespace fs = std::filesystem;

SweepOrder parse_sweep_order(const std::string& name) {
  if (name == "row-major" || name == "rowmajor" || name == "scanline") return SweepOrder::RowMajor;
  if (name == "random") return SweepOrder::Random;
  fail(ErrorKind::Config, "unknown sweep order '" + name + "' (expected row-major or random)");
}

std::vector<int> clamp_targets(const Domain& domain, std::span<const int> targets, std::vector<std::string>* warnings) {
  if (targets.size() != domain.metrics.size()) {
    fail(ErrorKind::Config, "expected " + std::to_string(domain.metrics.size()) + " targets, got " +
                                std::to_string(targets.size()));
  }
  std::vector<int> out(targets.begin(), targets.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& m = domain.metrics[i];
    const int clamped = std::clamp(out[i], m.min, m.max);
    if (clamped != out[i] && warnings != nullptr) {
      warnings->push_back("target " + m.name + "=" + std::to_string(out[i]) + " outside [" + std::to_string(m.min) +
                          "," + std::to_string(m.max) + "], clamped to " + std::to_string(clamped));
    }
    out[i] = clamped;
  }
  return out;
}

bool targets_met(const Domain& domain, const CellGrid& grid, std::span<const int> targets) {
  if (domain.is_valid && !domain.is_valid(grid)) return false;
  for (std::size_t i = 0; i < domain.metrics.size(); ++i) {
    const auto& m = domain.metrics[i];
    if (std::abs(m.evaluate(grid) - targets[i]) > m.threshold) return false;
  }
  return true;
}

CellGrid sample_start(const Domain& domain, const TileHistogram& start, std::mt19937_64& rng) {
  if (start.counts.size() != static_cast<std::size_t>(domain.alphabet.size())) {
    fail(ErrorKind::Config, "start distribution does not match the domain alphabet");
  }
  return sample_iid_grid(start, domain.extents, rng);
}

Artifact run_sweep(const Domain& domain, CellGrid start, std::span<const int> targets, const GenerationConfig& config,
                   std::mt19937_64& rng, const RepairFn& repair) {
  const auto goal = clamp_targets(domain, targets);
  const int max_steps = config.max_steps < 0 ? domain.generation_steps : config.max_steps;
  Artifact a;
  a.start = start;
  a.targets = goal;
  CellGrid current = std::move(start);
  const std::size_t cells = current.size();
  std::vector<std::size_t> order(cells);
  for (std::size_t i = 0; i < cells; ++i) order[i] = i;

  for (int t = 0; t < max_steps; ++t) {
    if (config.early_stop && targets_met(domain, current, goal)) {
      a.stopped_early = true;
      break;
    }
    const std::size_t k = static_cast<std::size_t>(t) % cells;
    if (config.order == SweepOrder::Random && k == 0) shuffle_in_place(order, rng);
    const Cursor cursor = current.cursor_of(order[k]);
    StepLog s;
    s.cursor = cursor;
    s.condition = condition_signal(domain.metrics, goal, current);
    s.before = current.at(cursor);
    s.after = repair(current, cursor, s.condition);
    current.set(cursor, s.after);
    a.log.push_back(std::move(s));
    ++a.steps;
  }
  a.achieved = evaluate_metrics(domain.metrics, current);
  a.grid = std::move(current);
  return a;
}

Artifact generate_artifact(const PolicyModel& model, std::span<const int> targets, const GenerationConfig& config,
                           std::mt19937_64& rng) {
  const Domain& domain = model.domain();
  CellGrid start = sample_start(domain, model.start_distribution(), rng);
  return run_sweep(domain, std::move(start), targets, config, rng,
                   [&](const CellGrid& state, const Cursor& cursor, std::span<const std::int8_t> signal) {
                     return predict_repair(model, state, cursor, signal, config.temperature, &rng).action;
                   });
}

Artifact random_agent_generate(const Domain& domain, const TileHistogram& start, std::span<const int> targets,
                               const GenerationConfig& config, std::mt19937_64& rng) {
  CellGrid s = sample_start(domain, start, rng);
  const auto k = static_cast<std::uint64_t>(domain.alphabet.size());
  return run_sweep(domain, std::move(s), targets, config, rng,
                   [&](const CellGrid&, const Cursor&, std::span<const std::int8_t>) {
                     return static_cast<Category>(uniform_index(rng, k));
                   });
}

std::vector<CellGrid> Archive::grids() const {
  std::vector<CellGrid> g;
  g.reserve(entries.size());
  for (const auto& e : entries) g.push_back(e.grid);
  return g;
}

std::string artifact_verdict(const Domain& domain, const CellGrid& grid, std::span<const int> targets) {
  if (domain.name == "zelda") return zelda::is_playable(grid) ? "playable" : "unplayable";
  if (domain.name == "lego") return lego::to_string(lego::classify_success(grid, targets.empty() ? 0 : targets[0]).verdict);
  return domain.is_valid && domain.is_valid(grid) ? "valid" : "invalid";
}

std::vector<std::vector<int>> sample_target_grid(const Domain& domain, int n, std::mt19937_64& rng) {
  if (n < 1) fail(ErrorKind::Config, "target grid size must be at least 1");
  std::vector<std::vector<int>> columns;
  for (const auto& m : domain.metrics) {
    std::vector<int> v(static_cast<std::size_t>(n));
    const long long span = m.max - m.min + 1;
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = m.min + static_cast<int>(i * span / n);
    shuffle_in_place(v, rng);
    columns.push_back(std::move(v));
  }
  std::vector<std::vector<int>> grid(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    for (const auto& c : columns) grid[static_cast<std::size_t>(i)].push_back(c[static_cast<std::size_t>(i)]);
  }
  return grid;
}

Archive run_batch(const Domain& domain, std::span<const std::vector<int>> target_grid, const BatchConfig& config,
                  const std::string& agent, const EpisodeFn& episode) {
  if (target_grid.empty()) fail(ErrorKind::Config, "target grid is empty");
  if (config.per_target < 1) fail(ErrorKind::Config, "per-target count must be at least 1");
  const std::size_t total = target_grid.size() * static_cast<std::size_t>(config.per_target);
  std::vector<ArchiveEntry> entries(total);

  auto run_one = [&](std::size_t idx) {
    const auto& targets = target_grid[idx / static_cast<std::size_t>(config.per_target)];
    const std::uint64_t seed = derive_seed(config.seed, idx);
    std::mt19937_64 rng(seed);
    Artifact a = episode(targets, rng);
    ArchiveEntry& e = entries[idx];
    char id[64];
    std::snprintf(id, sizeof id, "%s_%s_%05zu", agent.c_str(), config.run.c_str(), idx);
    e.id = id;
    e.run = config.run;
    e.agent = agent;
    e.seed = seed;
    e.targets = a.targets;
    e.achieved = a.achieved;
    e.steps = a.steps;
    e.stopped_early = a.stopped_early;
    e.verdict = artifact_verdict(domain, a.grid, a.targets);
    e.grid = std::move(a.grid);
  };

  const int workers = std::max(1, std::min<int>(config.workers, static_cast<int>(total)));
  if (workers == 1) {
    for (std::size_t i = 0; i < total; ++i) run_one(i);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = static_cast<std::size_t>(w); i < total; i += static_cast<std::size_t>(workers)) run_one(i);
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  Archive archive;
  archive.domain = domain.name;
  for (const auto& m : domain.metrics) archive.metric_names.push_back(m.name);
  archive.entries = std::move(entries);
  return archive;
}

Archive generate_batch(const PolicyModel& model, std::span<const std::vector<int>> target_grid,
                       const BatchConfig& config) {
  return run_batch(model.domain(), target_grid, config, "agent", [&](std::span<const int> t, std::mt19937_64& rng) {
    return generate_artifact(model, t, config.generation, rng);
  });
}

Archive random_batch(const Domain& domain, const TileHistogram& start, std::span<const std::vector<int>> target_grid,
                     const BatchConfig& config) {
  return run_batch(domain, target_grid, config, "random", [&](std::span<const int> t, std::mt19937_64& rng) {
    return random_agent_generate(domain, start, t, config.generation, rng);
  });
}

Archive merge_archives(std::span<const Archive> archives) {
  if (archives.empty()) fail(ErrorKind::Config, "nothing to merge");
  Archive out;
  out.domain = archives[0].domain;
  out.metric_names = archives[0].metric_names;
  for (const auto& a : archives) {
    if (a.domain != out.domain || a.metric_names != out.metric_names) {
      fail(ErrorKind::Config, "cannot merge archives from different domains");
    }
    out.entries.insert(out.entries.end(), a.entries.begin(), a.entries.end());
  }
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

void write_archive(const std::string& dir, const Archive& archive) {
  const Domain& domain = domain_by_name(archive.domain);
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "grids", ec);
  if (ec) fail(ErrorKind::Io, "cannot create archive directory " + dir + ": " + ec.message());

  std::set<std::string> ids;
  std::ostringstream csv;
  csv << "id,run,agent,seed";
  for (const auto& m : archive.metric_names) csv << ",target_" << m;
  for (const auto& m : archive.metric_names) csv << ",achieved_" << m;
  csv << ",steps,stopped_early,verdict\n";
  for (const auto& e : archive.entries) {
    if (!ids.insert(e.id).second) fail(ErrorKind::Config, "duplicate archive id " + e.id);
    csv << e.id << ',' << e.run << ',' << e.agent << ',' << e.seed;
    for (int t : e.targets) csv << ',' << t;
    for (int v : e.achieved) csv << ',' << v;
    csv << ',' << e.steps << ',' << (e.stopped_early ? 1 : 0) << ',' << e.verdict << '\n';
    write_artifact(domain, (fs::path(dir) / "grids" / (e.id + artifact_extension(domain))).string(), e.grid);
  }
  write_text_file((fs::path(dir) / "index.csv").string(), csv.str());

  nlohmann::ordered_json j;
  j["domain"] = archive.domain;
  j["metrics"] = archive.metric_names;
  j["count"] = archive.entries.size();
  write_text_file((fs::path(dir) / "archive.json").string(), j.dump(2) + "\n");
}

Archive read_archive(const std::string& dir) {
  Archive a;
  try {
    const auto j = nlohmann::json::parse(read_text_file((fs::path(dir) / "archive.json").string()));
    a.domain = j.at("domain").get<std::string>();
    a.metric_names = j.at("metrics").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Io, "malformed archive.json in " + dir + ": " + e.what());
  }
  const Domain& domain = domain_by_name(a.domain);
  const std::size_t m = a.metric_names.size();
  std::istringstream csv(read_text_file((fs::path(dir) / "index.csv").string()));
  std::string line;
  std::getline(csv, line);
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 4 + 2 * m + 3) fail(ErrorKind::Io, "index.csv row has the wrong number of fields");
    ArchiveEntry e;
    try {
      e.id = f[0];
      e.run = f[1];
      e.agent = f[2];
      e.seed = std::stoull(f[3]);
      for (std::size_t i = 0; i < m; ++i) e.targets.push_back(std::stoi(f[4 + i]));
      for (std::size_t i = 0; i < m; ++i) e.achieved.push_back(std::stoi(f[4 + m + i]));
      e.steps = std::stoi(f[4 + 2 * m]);
      e.stopped_early = f[5 + 2 * m] == "1";
    } catch (const std::logic_error&) {
      fail(ErrorKind::Io, "index.csv has a malformed number in row " + f[0]);
    }
    e.verdict = f[6 + 2 * m];
    e.grid = read_artifact(domain, (fs::path(dir) / "grids" / (e.id + artifact_extension(domain))).string());
    a.entries.push_back(std::move(e));
  }
  return a;
}

}  // namespace pod
