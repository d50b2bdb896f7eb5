#include "pod/domain.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>

#include "pod/binary_io.hpp"
#include "pod/lego.hpp"
#include "pod/zelda.hpp"

namespace pod {

namespace fs = std::filesystem;

int Domain::metric_index(const std::string& metric) const {
  for (std::size_t i = 0; i < metrics.size(); ++i) {
    if (metrics[i].name == metric) return static_cast<int>(i);
  }
  fail(ErrorKind::Config, "domain '" + name + "' has no metric '" + metric + "'");
}

const Domain& zelda_domain() {
  static const Domain d = [] {
    Domain z;
    z.name = "zelda";
    z.alphabet = zelda::alphabet();
    z.chars = zelda::char_table();
    z.extents = zelda::level_extents();
    z.metrics = zelda::metrics();
    z.pad = zelda::kSolid;
    z.observation_mode = ObservationMode::Centered;
    z.observation = Extents::plane(zelda::kObservationSize, zelda::kObservationSize);
    z.generation_steps = zelda::kGenerationSteps;
    z.early_stop = true;
    z.start = StartKind::GoalHistogram;
    // Goals already sit within epsilon of their own tile histogram, so the
    // stop test only starts after one write per cell on average.
    z.trajectory_min_steps = static_cast<int>(z.extents.cell_count());
    z.is_valid = zelda::is_playable;
    return z;
  }();
  return d;
}

const Domain& lego_domain() {
  static const Domain d = [] {
    Domain l;
    l.name = "lego";
    l.alphabet = lego::alphabet();
    l.chars = lego::char_table();
    l.extents = lego::structure_extents();
    l.metrics = lego::metrics();
    l.pad = 0;
    l.observation_mode = ObservationMode::Full;
    l.observation = lego::structure_extents();
    l.generation_steps = lego::kGenerationSteps;
    l.early_stop = false;
    l.start = StartKind::Uniform;
    l.trajectory_min_steps = 1;
    l.is_valid = [](const CellGrid& s) { return lego::wheel_count(s) >= 4; };
    return l;
  }();
  return d;
}

const Domain& domain_by_name(const std::string& name) {
  if (name == "zelda") return zelda_domain();
  if (name == "lego") return lego_domain();
  fail(ErrorKind::Config, "unknown domain '" + name + "' (expected zelda or lego)");
}

TileHistogram start_distribution(const Domain& domain, std::span<const CellGrid> goals) {
  if (domain.start == StartKind::Uniform) return uniform_histogram(domain.alphabet.size());
  if (goals.empty()) fail(ErrorKind::Config, "start distribution needs a non-empty goal set");
  return merge_histograms(goals);
}

std::string artifact_extension(const Domain& domain) { return domain.extents.rank == 3 ? ".json" : ".txt"; }

std::string format_artifact(const Domain& domain, const CellGrid& grid) {
  if (domain.extents.rank == 3) return lego::to_voxel_json(grid);
  return format_grid(grid, domain.chars);
}

CellGrid parse_artifact(const Domain& domain, const std::string& text) {
  CellGrid g = domain.extents.rank == 3 ? lego::from_voxel_json(text) : parse_grid(text, domain.chars);
  if (g.extents() != domain.extents) {
    fail(ErrorKind::InvalidGrid, "artifact extents do not match domain '" + domain.name + "'");
  }
  if (g.categories() != domain.alphabet.size()) {
    g = CellGrid(g.extents(), domain.alphabet.size(), std::vector<Category>(g.cells().begin(), g.cells().end()));
  }
  return g;
}

CellGrid read_artifact(const Domain& domain, const std::string& path) {
  return parse_artifact(domain, read_text_file(path));
}

void write_artifact(const Domain& domain, const std::string& path, const CellGrid& grid) {
  write_text_file(path, format_artifact(domain, grid));
}

void write_goal_dir(const Domain& domain, const std::string& dir, std::span<const CellGrid> goals) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create directory " + dir + ": " + ec.message());
  for (std::size_t i = 0; i < goals.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "goal_%03zu", i);
    write_artifact(domain, (fs::path(dir) / (name + artifact_extension(domain))).string(), goals[i]);
  }
}

std::vector<CellGrid> read_goal_dir(const Domain& domain, const std::string& dir) {
  if (!fs::is_directory(dir)) fail(ErrorKind::Io, "goal directory not found: " + dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    // run.json is the gen-goals manifest, not a structure.
    if (entry.path().filename() == "run.json") continue;
    if (entry.is_regular_file() && entry.path().extension() == artifact_extension(domain)) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) fail(ErrorKind::Config, "no goal files in " + dir);
  std::vector<CellGrid> goals;
  for (const auto& f : files) goals.push_back(read_artifact(domain, f.string()));
  return goals;
}

std::vector<CellGrid> generate_goals(const Domain& domain, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  if (domain.name == "zelda") return zelda::generate_goal_set(n, rng);
  return lego::build_goal_cars(n, rng);
}

}  // namespace pod
