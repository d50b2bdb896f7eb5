#include "pod/lego.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"

#include "pod/binary_io.hpp"
#include "pod/random.hpp"

namespace pod::lego {

namespace {

struct BlockType {
  const char* name;
  char symbol;
  const char* part;
  int color;
};

// Index 0 is air; 1-4 are the wheel class.
constexpr BlockType kBlockTable[kBlockTypes] = {
    {"air", '.', "", 0},
    {"tire", 'T', "3641.dat", 0},
    {"tire_wide", 'W', "6015.dat", 0},
    {"hubcap", 'H', "4624.dat", 71},
    {"hubcap_small", 'h', "6014.dat", 71},
    {"brick_1x1", 'a', "3005.dat", 4},
    {"brick_1x2", 'b', "3004.dat", 4},
    {"brick_1x3", 'c', "3622.dat", 1},
    {"brick_1x4", 'd', "3010.dat", 1},
    {"brick_1x6", 'e', "3009.dat", 14},
    {"brick_2x2", 'f', "3003.dat", 14},
    {"brick_2x3", 'g', "3002.dat", 15},
    {"brick_2x4", 'i', "3001.dat", 15},
    {"plate_1x1", 'j', "3024.dat", 72},
    {"plate_1x2", 'k', "3023.dat", 72},
    {"plate_1x3", 'l', "3623.dat", 71},
    {"plate_1x4", 'm', "3710.dat", 71},
    {"plate_1x6", 'n', "3666.dat", 0},
    {"plate_2x2", 'p', "3022.dat", 0},
    {"plate_2x3", 'q', "3021.dat", 7},
    {"plate_2x4", 'r', "3020.dat", 7},
    {"plate_2x6", 's', "3795.dat", 7},
    {"tile_1x1", 'u', "3070b.dat", 15},
    {"tile_1x2", 'v', "3069b.dat", 15},
    {"tile_2x2", 'w', "3068b.dat", 15},
    {"slope_45_2x1", 'x', "3040.dat", 4},
    {"slope_45_2x2", 'y', "3039.dat", 4},
    {"slope_30_1x2", 'z', "85984.dat", 1},
    {"slope_inverted_2x2", 'A', "3660.dat", 1},
    {"windscreen_2x4", 'B', "3823.dat", 47},
    {"windscreen_2x6", 'C', "4176.dat", 47},
    {"steering_wheel", 'D', "3829c01.dat", 0},
    {"seat", 'E', "4079.dat", 14},
    {"headlight", 'F', "4070.dat", 15},
    {"grille", 'G', "2412b.dat", 72},
    {"mudguard", 'M', "3788.dat", 4},
    {"spoiler", 'S', "2513.dat", 0},
};

}  // namespace

const TileAlphabet& alphabet() {
  static const TileAlphabet a = [] {
    std::vector<std::string> names;
    for (const auto& b : kBlockTable) names.emplace_back(b.name);
    return TileAlphabet(std::move(names));
  }();
  return a;
}

const CharTable& char_table() {
  static const CharTable t = [] {
    std::string s;
    for (const auto& b : kBlockTable) s.push_back(b.symbol);
    return CharTable(s);
  }();
  return t;
}

const std::vector<Category>& wheel_categories() {
  static const std::vector<Category> w{1, 2, 3, 4};
  return w;
}

bool is_wheel_class(Category c) { return c >= 1 && c <= 4; }

int block_count(const CellGrid& s) {
  return static_cast<int>(std::count_if(s.cells().begin(), s.cells().end(), [](Category c) { return c != 0; }));
}

int wheel_count(const CellGrid& s) {
  return static_cast<int>(std::count_if(s.cells().begin(), s.cells().end(), is_wheel_class));
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Success: return "success";
    case Verdict::Partial: return "partial";
    case Verdict::Failure: return "failure";
  }
  return "failure";
}

CarVerdict classify_success(const CellGrid& s, int target_blocks) {
  if (target_blocks < 0) fail(ErrorKind::Config, "target block count must be non-negative");
  CarVerdict v;
  v.wheels = wheel_count(s);
  v.blocks = block_count(s);
  if (v.wheels >= 4) {
    v.verdict = std::abs(v.blocks - target_blocks) <= kSuccessTolerance ? Verdict::Success : Verdict::Partial;
  }
  return v;
}

Similarity similarity_to_goals(const CellGrid& s, std::span<const CellGrid> goals) {
  if (goals.empty()) fail(ErrorKind::Config, "similarity needs at least one goal");
  Similarity best;
  best.best = -1.0;
  for (std::size_t i = 0; i < goals.size(); ++i) {
    const double sim = 1.0 - hamming_distance(s, goals[i]).fraction;
    if (sim > best.best) {
      best.best = sim;
      best.goal_index = i;
    }
  }
  return best;
}

std::vector<MetricSpec> metrics() {
  return {{"blocks", block_count, kMinTargetBlocks, kMaxTargetBlocks, kSuccessTolerance}};
}

std::vector<CellGrid> build_goal_cars(int n, std::mt19937_64& rng) {
  if (n < 1) fail(ErrorKind::Config, "goal car count must be at least 1");
  std::vector<int> targets(static_cast<std::size_t>(n));
  const int span = kMaxTargetBlocks - kMinTargetBlocks + 1;
  for (int i = 0; i < n; ++i) targets[static_cast<std::size_t>(i)] = kMinTargetBlocks + (i * span) / n;
  shuffle_in_place(targets, rng);

  struct Footprint {
    int length, width;
  };
  const std::vector<Footprint> footprints{{4, 2}, {5, 2}, {6, 2}, {4, 3}, {5, 3}, {6, 3}, {4, 4}, {5, 4}, {6, 4}};
  const std::vector<Category> chassis_types{13, 14, 16, 18, 19, 20, 21};  // plates
  const std::vector<Category> cabin_types{5, 6, 7, 8, 10, 11, 12, 22, 23, 25, 26, 27, 29, 32, 33, 34, 35, 36};

  std::vector<CellGrid> cars;
  for (int target : targets) {
    std::vector<Footprint> feasible;
    for (const auto& f : footprints) {
      const int area = f.length * f.width;
      const int cabin = target - 4 - area;
      if (cabin >= 0 && cabin <= 2 * area) feasible.push_back(f);
    }
    const Footprint fp = feasible[uniform_index(rng, feasible.size())];
    const int x0 = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(kSize - fp.length + 1)));
    const int z0 = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(kSize - fp.width + 1)));

    CellGrid car(structure_extents(), kBlockTypes, 0);
    const int x1 = x0 + fp.length - 1, z1 = z0 + fp.width - 1;
    for (int wx : {x0, x1}) {
      for (int wz : {z0, z1}) {
        car.set(Cursor{{wx, 0, wz}}, wheel_categories()[uniform_index(rng, wheel_categories().size())]);
      }
    }
    const Category chassis = chassis_types[uniform_index(rng, chassis_types.size())];
    for (int x = x0; x <= x1; ++x) {
      for (int z = z0; z <= z1; ++z) car.set(Cursor{{x, 1, z}}, chassis);
    }

    // Cabin cells fill from the chassis centre outwards, lower layer first.
    int cabin = target - 4 - fp.length * fp.width;
    const double cx = (x0 + x1) / 2.0, cz = (z0 + z1) / 2.0;
    const Category body = cabin_types[uniform_index(rng, cabin_types.size())];
    const Category accent = cabin_types[uniform_index(rng, cabin_types.size())];
    for (int y = 2; y <= 3 && cabin > 0; ++y) {
      std::vector<std::pair<double, Cursor>> cells;
      for (int x = x0; x <= x1; ++x) {
        for (int z = z0; z <= z1; ++z) {
          const double jitter = 0.01 * uniform01(rng);
          cells.push_back({std::abs(x - cx) + std::abs(z - cz) + jitter, Cursor{{x, y, z}}});
        }
      }
      std::sort(cells.begin(), cells.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
      for (const auto& [dist, cur] : cells) {
        if (cabin == 0) break;
        car.set(cur, cur.x() == x1 ? accent : body);
        --cabin;
      }
    }
    cars.push_back(std::move(car));
  }
  return cars;
}

const std::vector<PartEntry>& part_table() {
  static const std::vector<PartEntry> t = [] {
    std::vector<PartEntry> v;
    for (const auto& b : kBlockTable) v.push_back({b.part, b.color});
    return v;
  }();
  return t;
}

std::string to_voxel_json(const CellGrid& s) {
  if (s.extents().rank != 3) fail(ErrorKind::Shape, "voxel-json needs a 3D grid");
  nlohmann::ordered_json j;
  j["dims"] = {s.extents().x(), s.extents().y(), s.extents().z()};
  auto blocks = nlohmann::ordered_json::array();
  // Row-major storage order is already (z, y, x).
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == 0) continue;
    const auto c = s.cursor_of(i);
    nlohmann::ordered_json b;
    b["x"] = c.x();
    b["y"] = c.y();
    b["z"] = c.z();
    b["type"] = static_cast<int>(s[i]);
    blocks.push_back(b);
  }
  j["blocks"] = blocks;
  return j.dump(1) + "\n";
}

CellGrid from_voxel_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    const auto dims = j.at("dims").get<std::vector<int>>();
    if (dims.size() != 3) fail(ErrorKind::InvalidGrid, "voxel-json dims must have three entries");
    CellGrid s(Extents::volume(dims[0], dims[1], dims[2]), kBlockTypes, 0);
    for (const auto& b : j.at("blocks")) {
      const Cursor c{{b.at("x").get<int>(), b.at("y").get<int>(), b.at("z").get<int>()}};
      const int type = b.at("type").get<int>();
      if (type < 0 || type >= kBlockTypes) fail(ErrorKind::InvalidGrid, "voxel-json block type out of range");
      if (!s.in_bounds(c)) fail(ErrorKind::InvalidGrid, "voxel-json block out of bounds");
      s.set(c, static_cast<Category>(type));
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidGrid, std::string("malformed voxel-json: ") + e.what());
  }
}

std::string to_ldraw(const CellGrid& s) {
  std::ostringstream out;
  const auto& parts = part_table();
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == 0) continue;
    const auto c = s.cursor_of(i);
    const auto& p = parts.at(s[i]);
    out << "1 " << p.color << ' ' << c.x() * 20 << ' ' << c.y() * -24 << ' ' << c.z() * 20
        << " 1 0 0 0 1 0 0 0 1 " << p.part << '\n';
  }
  return out.str();
}

ExportFormat parse_export_format(const std::string& name) {
  if (name == "voxel-json" || name == "json") return ExportFormat::VoxelJson;
  if (name == "ldraw-text" || name == "ldraw") return ExportFormat::LdrawText;
  fail(ErrorKind::Config, "unknown export format '" + name + "'");
}

void export_structure(const CellGrid& s, const std::string& path, ExportFormat format) {
  write_text_file(path, format == ExportFormat::VoxelJson ? to_voxel_json(s) : to_ldraw(s));
}

CellGrid read_voxel_json_file(const std::string& path) { return from_voxel_json(read_text_file(path)); }

}  // namespace pod::lego
