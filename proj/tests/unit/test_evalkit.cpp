#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "oracles.hpp"
#include "pod/evalkit.hpp"
#include "pod/lego.hpp"
#include "pod/zelda.hpp"

using namespace pod;

namespace {

ArchiveEntry entry(const std::string& id, const std::string& run, const CellGrid& g, std::vector<int> targets,
                   std::vector<int> achieved, const std::string& verdict) {
  ArchiveEntry e;
  e.id = id;
  e.run = run;
  e.agent = "agent";
  e.grid = g;
  e.targets = std::move(targets);
  e.achieved = std::move(achieved);
  e.verdict = verdict;
  return e;
}

Archive zelda_archive(const std::vector<CellGrid>& grids, const std::vector<std::string>& runs) {
  Archive a;
  a.domain = "zelda";
  a.metric_names = {"enemies", "nearest_enemy", "solution_length"};
  for (std::size_t i = 0; i < grids.size(); ++i) {
    const auto& g = grids[i];
    a.entries.push_back(entry("e" + std::to_string(i), runs[i % runs.size()], g, {0, 0, 10},
                              {zelda::count_enemies(g), zelda::nearest_enemy_distance(g), zelda::solution_length(g)},
                              zelda::is_playable(g) ? "playable" : "unplayable"));
  }
  return a;
}

// Copies of `base` with exactly `edits` cells changed.
CellGrid perturb(const CellGrid& base, int edits, std::mt19937_64& rng) {
  auto g = base;
  std::vector<std::size_t> idx(g.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  shuffle_in_place(idx, rng);
  for (int k = 0; k < edits; ++k) {
    const auto i = idx[static_cast<std::size_t>(k)];
    g.set(i, static_cast<Category>((g[i] + 1 + uniform_index(rng, static_cast<std::uint64_t>(g.categories() - 1))) %
                                   static_cast<std::uint64_t>(g.categories())));
  }
  return g;
}

// Two-sided Student-t tail by Simpson integration of the density.
double t_two_sided(double t, double dof) {
  const double c = std::exp(std::lgamma((dof + 1) / 2) - std::lgamma(dof / 2)) / std::sqrt(dof * M_PI);
  auto f = [&](double x) { return c * std::pow(1 + x * x / dof, -(dof + 1) / 2); };
  const int n = 20000;
  const double h = std::abs(t) / n;
  double s = f(0) + f(std::abs(t));
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4 : 2) * f(i * h);
  return 1.0 - 2.0 * s * h / 3.0;
}

}  // namespace

TEST_CASE("playability and run aggregation") {
  const auto goals = generate_goals(zelda_domain(), 4, 1);
  const CellGrid blank(zelda::level_extents(), zelda::kTileCount);
  CHECK(playability_rate(zelda_archive(goals, {"r0"})).mean == 1.0);
  CHECK(playability_rate(zelda_archive({blank, blank}, {"r0"})).mean == 0.0);
  CHECK(playability_rate(zelda_archive({goals[0], goals[1], goals[2], blank}, {"r0"})).mean == 0.75);

  // Runs r0: {1, 1}, r1: {1, 0} -> per-run 1.0 and 0.5.
  const auto r = playability_rate(zelda_archive({goals[0], goals[1], goals[2], blank}, {"r0", "r1"}));
  REQUIRE(r.per_run.size() == 2);
  CHECK(r.per_run[0].second == 1.0);
  CHECK(r.per_run[1].second == 0.5);
  CHECK(r.mean == 0.75);
  CHECK(r.stddev == doctest::Approx(std::sqrt(0.125)));
  CHECK_THROWS_AS(playability_rate(zelda_archive({}, {"r0"})), Error);
}

TEST_CASE("inter diversity") {
  std::mt19937_64 rng(2);
  const auto goals = generate_goals(zelda_domain(), 5, 2);
  CHECK(inter_diversity(goals, goals).unique_fraction == 0.0);
  std::vector<CellGrid> far;
  for (int k = 0; k < 4; ++k) far.push_back(perturb(goals[0], 77, rng));
  CHECK(inter_diversity(far, std::vector<CellGrid>{goals[0]}).unique_fraction == 1.0);

  // 7 of 77 cells is 9.1% (< 10%, duplicate); 8 is 10.4% (kept).
  std::vector<CellGrid> edge{perturb(goals[0], 7, rng), perturb(goals[0], 8, rng)};
  const std::vector<CellGrid> one_goal{goals[0]};
  CHECK(inter_diversity(edge, one_goal).survivors == std::vector<std::size_t>{1});
  CHECK_THROWS_AS(inter_diversity(edge, std::vector<CellGrid>{}), Error);

  for (int t = 0; t < 20; ++t) {
    std::vector<CellGrid> items;
    for (int i = 0; i < 25; ++i) items.push_back(perturb(goals[uniform_index(rng, 5)], static_cast<int>(uniform_index(rng, 16)), rng));
    CHECK(inter_diversity(items, goals).survivors == oracle::inter_survivors(items, goals, 0.10));
  }
}

TEST_CASE("intra and total diversity") {
  std::mt19937_64 rng(3);
  const auto goals = generate_goals(zelda_domain(), 5, 3);
  const std::vector<CellGrid> twins{goals[0], goals[0]};
  CHECK(intra_diversity(twins).unique_fraction == 0.5);
  CHECK(intra_diversity(goals).unique_fraction == 1.0);

  CHECK(total_diversity(goals, goals).unique_fraction == 0.0);

  SUBCASE("random corpora against the oracle") {
    for (int t = 0; t < 20; ++t) {
      std::vector<CellGrid> items;
      const auto base = perturb(goals[0], 40, rng);
      for (int i = 0; i < 30; ++i) items.push_back(perturb(i % 2 ? base : goals[1], static_cast<int>(uniform_index(rng, 20)), rng));
      std::vector<std::size_t> all(items.size());
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
      CHECK(intra_diversity(items).survivors == oracle::intra_survivors(items, all, 0.10));
      const auto inter = oracle::inter_survivors(items, goals, 0.10);
      const auto total = oracle::intra_survivors(items, inter, 0.10);
      const auto got = total_diversity(items, goals);
      CHECK(got.survivors == total);
      CHECK(got.unique_fraction == doctest::Approx(static_cast<double>(total.size()) / 30.0));
      CHECK(got.unique_fraction <= inter_diversity(items, goals).unique_fraction);
      CHECK(got.unique_fraction <= intra_diversity(items).unique_fraction + 1e-12);
    }
  }
  SUBCASE("hand-composed 10-grid corpus") {
    // Items 0-3 copy goals (inter drops them); 4/5 and 7/8 are near twins
    // (intra keeps the first of each pair); 6 and 9 are unrelated.
    const auto a = perturb(goals[4], 50, rng), b = perturb(goals[2], 50, rng);
    const std::vector<CellGrid> corpus{goals[0], goals[1], perturb(goals[2], 3, rng), goals[3],
                                       a,        perturb(a, 2, rng), perturb(goals[1], 60, rng),
                                       b,        perturb(b, 5, rng), perturb(goals[3], 70, rng)};
    const std::vector<CellGrid> goal_set(goals.begin(), goals.end());
    const auto r = total_diversity(corpus, goal_set);
    CHECK(r.survivors == std::vector<std::size_t>{4, 6, 7, 9});
    CHECK(r.unique_fraction == 0.4);
  }
  SUBCASE("scan order changes identity, not necessarily count") {
    const auto base = perturb(goals[0], 40, rng);
    std::vector<CellGrid> items{base, perturb(base, 6, rng), perturb(base, 12, rng)};
    std::vector<CellGrid> reversed(items.rbegin(), items.rend());
    const auto f = intra_diversity(items), r = intra_diversity(reversed);
    MESSAGE("forward survivors " << f.survivors.size() << ", reversed " << r.survivors.size());
    CHECK(f.survivors.front() == 0);
    CHECK(r.survivors.front() == 0);
  }
}

TEST_CASE("spearman") {
  const std::vector<double> x{1, 2, 3, 4, 5, 6};
  CHECK(spearman(x, x).rho == doctest::Approx(1.0));
  const std::vector<double> flat(6, 2.0);
  const auto c = spearman(x, flat);
  CHECK(c.defined);
  CHECK(c.rho == 0.0);
  CHECK_FALSE(spearman(flat, x).defined);
  const std::vector<double> two{1, 2};
  CHECK_FALSE(spearman(two, two).defined);

  CHECK(average_ranks(std::vector<double>{10, 20, 20, 5}) == std::vector<double>{2, 3.5, 3.5, 1});

  std::mt19937_64 rng(4);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 5 + uniform_index(rng, 60);
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = static_cast<double>(uniform_index(rng, 8));
      b[i] = a[i] * 0.3 + static_cast<double>(uniform_index(rng, 6));
    }
    if (std::set<double>(a.begin(), a.end()).size() < 2) continue;
    const auto got = spearman(a, b);
    const double rho = oracle::spearman_rho(a, b);
    CHECK(got.rho == doctest::Approx(rho).epsilon(1e-10));
    if (std::abs(rho) < 1) {
      const double tstat = rho * std::sqrt((static_cast<double>(n) - 2) / (1 - rho * rho));
      CHECK(got.p_value == doctest::Approx(t_two_sided(tstat, static_cast<double>(n) - 2)).epsilon(1e-6));
    }
  }
}

TEST_CASE("controllability table") {
  Archive a = zelda_archive({}, {"r0"});
  const CellGrid g(zelda::level_extents(), 6);
  const int pairs[][2] = {{1, 1}, {1, 2}, {3, 3}, {3, 5}, {5, 4}};
  int i = 0;
  for (const auto& p : pairs) a.entries.push_back(entry("e" + std::to_string(i++), "r0", g, {p[0], 0, 10}, {p[1], 0, 10}, "unplayable"));
  const auto t = controllability_table(a, "enemies");
  REQUIRE(t.rows.size() == 3);
  CHECK(t.rows[0].target == 1);
  CHECK(t.rows[0].mean == 1.5);
  CHECK(t.rows[0].n == 2);
  CHECK(t.rows[1].mean == 4.0);
  CHECK(t.rows[1].stddev == doctest::Approx(std::sqrt(2.0)));
  CHECK(t.rows[2].stddev == 0.0);
  CHECK(t.correlation.rho ==
        doctest::Approx(oracle::spearman_rho({1, 1, 3, 3, 5}, {1, 2, 3, 5, 4})).epsilon(1e-12));
  const auto csv = control_table_csv(t);
  CHECK(csv.rfind("target,mean_achieved,stddev,n", 0) == 0);

  Archive single = zelda_archive({}, {"r0"});
  for (int k = 0; k < 4; ++k) single.entries.push_back(entry("s" + std::to_string(k), "r0", g, {2, 0, 10}, {k, 0, 10}, "unplayable"));
  CHECK_FALSE(controllability_table(single, "enemies").correlation.defined);
  CHECK_THROWS_AS(controllability_table(a, "walls"), Error);
}

TEST_CASE("lego rates and similarity") {
  std::mt19937_64 rng(5);
  const auto cars = lego::build_goal_cars(4, rng);
  const CellGrid air(lego::structure_extents(), lego::kBlockTypes);
  auto archive_of = [](const std::vector<CellGrid>& grids, const std::string& agent) {
    Archive a;
    a.domain = "lego";
    a.metric_names = {"blocks"};
    for (std::size_t i = 0; i < grids.size(); ++i) {
      auto e = entry(agent + std::to_string(i), "r0", grids[i], {15 + static_cast<int>(i % 2)}, {lego::block_count(grids[i])},
                     lego::to_string(lego::classify_success(grids[i], 15).verdict));
      e.agent = agent;
      a.entries.push_back(e);
    }
    return a;
  };
  CHECK(four_wheel_rate(archive_of(cars, "agent")).mean == 1.0);
  CHECK(four_wheel_rate(archive_of({air, air}, "agent")).mean == 0.0);
  CHECK(four_wheel_rate(archive_of({cars[0], air, cars[1]}, "agent")).mean == doctest::Approx(2.0 / 3.0));

  CHECK(mean_similarity(archive_of(cars, "agent"), cars) == 1.0);
  // All-air vs the goals: similarity is the air share of the closest goal.
  double best = 0;
  for (const auto& c : cars) best = std::max(best, 1.0 - static_cast<double>(lego::block_count(c)) / 216.0);
  CHECK(mean_similarity(archive_of({air}, "agent"), cars) == doctest::Approx(best));

  const auto agent = archive_of(cars, "agent");
  const auto random = archive_of({air, air, air, air}, "random");
  const auto rows = repair_similarity_report(agent, &random, cars);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].target == 15);
  CHECK(rows[0].agent.mean == 1.0);
  CHECK(rows[0].random.mean == doctest::Approx(best));
  CHECK(similarity_csv(rows).find("target") == 0);

  const auto dir = std::filesystem::temp_directory_path() / "pod_test_evalkit_plots";
  std::filesystem::remove_all(dir);
  const auto files = write_plot_data(dir.string(), agent, &random, cars);
  CHECK(files.size() == 2);
  for (const auto& f : files) CHECK(std::filesystem::exists(dir / f));
}

TEST_CASE("evaluation report") {
  const auto goals = generate_goals(zelda_domain(), 4, 6);
  std::mt19937_64 rng(6);
  std::vector<CellGrid> items;
  for (const auto& g : goals) items.push_back(perturb(g, 20, rng));
  const auto a = zelda_archive(items, {"r0"});
  const auto csv = evaluation_report_csv(a, goals);
  const auto header = csv.substr(0, csv.find('\n'));
  CHECK(header.find("playability") != std::string::npos);
  CHECK(header.find("inter_unique") != std::string::npos);
  CHECK(header.find("total_unique") != std::string::npos);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
  CHECK_FALSE(evaluation_summary(a, goals).empty());
}
