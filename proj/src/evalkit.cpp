#include "pod/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#include "pod/binary_io.hpp"
#include "pod/lego.hpp"
#include "pod/zelda.hpp"

namespace pod {

namespace fs = std::filesystem;

namespace {

GroupStat group_stat(int target, std::span<const double> values) {
  GroupStat g;
  g.target = target;
  g.n = values.size();
  if (values.empty()) return g;
  g.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - g.mean) * (v - g.mean);
    g.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return g;
}

}  // namespace

RunRate rate_by_run(const Archive& archive, const std::function<bool(const ArchiveEntry&)>& predicate) {
  if (archive.entries.empty()) fail(ErrorKind::DegenerateInput, "archive is empty");
  std::vector<std::string> runs;
  std::map<std::string, std::pair<std::size_t, std::size_t>> counts;
  for (const auto& e : archive.entries) {
    if (counts.find(e.run) == counts.end()) runs.push_back(e.run);
    auto& c = counts[e.run];
    ++c.second;
    if (predicate(e)) ++c.first;
  }
  RunRate r;
  r.count = archive.entries.size();
  std::vector<double> rates;
  for (const auto& run : runs) {
    const auto& c = counts[run];
    const double rate = static_cast<double>(c.first) / static_cast<double>(c.second);
    r.per_run.emplace_back(run, rate);
    rates.push_back(rate);
  }
  const auto g = group_stat(0, rates);
  r.mean = g.mean;
  r.stddev = g.stddev;
  return r;
}

RunRate playability_rate(const Archive& archive) {
  if (archive.domain != "zelda") fail(ErrorKind::Config, "playability needs a zelda archive");
  return rate_by_run(archive, [](const ArchiveEntry& e) { return zelda::is_playable(e.grid); });
}

RunRate four_wheel_rate(const Archive& archive) {
  if (archive.domain != "lego") fail(ErrorKind::Config, "four-wheel rate needs a lego archive");
  return rate_by_run(archive, [](const ArchiveEntry& e) { return lego::wheel_count(e.grid) >= 4; });
}

DedupResult inter_diversity(std::span<const CellGrid> artifacts, std::span<const CellGrid> goals, double threshold) {
  if (goals.empty()) fail(ErrorKind::Config, "goal set is empty");
  DedupResult r;
  for (std::size_t i = 0; i < artifacts.size(); ++i) {
    bool duplicate = false;
    for (const auto& g : goals) {
      if (hamming_distance(artifacts[i], g).fraction < threshold) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) r.survivors.push_back(i);
  }
  r.unique_fraction = artifacts.empty() ? 0.0 : static_cast<double>(r.survivors.size()) / artifacts.size();
  return r;
}

DedupResult intra_diversity(std::span<const CellGrid> artifacts, double threshold) {
  DedupResult r;
  for (std::size_t i = 0; i < artifacts.size(); ++i) {
    bool duplicate = false;
    for (std::size_t k : r.survivors) {
      if (hamming_distance(artifacts[i], artifacts[k]).fraction < threshold) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) r.survivors.push_back(i);
  }
  r.unique_fraction = artifacts.empty() ? 0.0 : static_cast<double>(r.survivors.size()) / artifacts.size();
  return r;
}

DedupResult total_diversity(std::span<const CellGrid> artifacts, std::span<const CellGrid> goals, double threshold) {
  const auto inter = inter_diversity(artifacts, goals, threshold);
  std::vector<CellGrid> kept;
  for (std::size_t i : inter.survivors) kept.push_back(artifacts[i]);
  const auto intra = intra_diversity(kept, threshold);
  DedupResult r;
  for (std::size_t k : intra.survivors) r.survivors.push_back(inter.survivors[k]);
  r.unique_fraction = artifacts.empty() ? 0.0 : static_cast<double>(r.survivors.size()) / artifacts.size();
  return r;
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && values[idx[j + 1]] == values[idx[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

Correlation spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) fail(ErrorKind::Shape, "correlation inputs differ in length");
  Correlation c;
  c.n = x.size();
  const bool x_constant = std::adjacent_find(x.begin(), x.end(), std::not_equal_to<>()) == x.end();
  if (c.n < 3 || x_constant) return c;
  c.defined = true;
  const bool y_constant = std::adjacent_find(y.begin(), y.end(), std::not_equal_to<>()) == y.end();
  if (y_constant) {
    c.rho = 0.0;
    c.p_value = 1.0;
    return c;
  }
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(c.n);
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < c.n; ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  c.rho = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  if (std::abs(c.rho) >= 1.0) {
    c.p_value = 0.0;
  } else {
    const double df = n - 2.0;
    const double t = c.rho * std::sqrt(df / (1.0 - c.rho * c.rho));
    boost::math::students_t dist(df);
    c.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  }
  return c;
}

ControlTable controllability_table(const Archive& archive, const std::string& metric) {
  const auto it = std::find(archive.metric_names.begin(), archive.metric_names.end(), metric);
  if (it == archive.metric_names.end()) fail(ErrorKind::Config, "archive has no metric '" + metric + "'");
  const auto m = static_cast<std::size_t>(it - archive.metric_names.begin());
  ControlTable t;
  t.metric = metric;
  std::map<int, std::vector<double>> groups;
  std::vector<double> xs, ys;
  for (const auto& e : archive.entries) {
    groups[e.targets.at(m)].push_back(e.achieved.at(m));
    xs.push_back(e.targets[m]);
    ys.push_back(e.achieved[m]);
  }
  for (const auto& [target, values] : groups) t.rows.push_back(group_stat(target, values));
  t.correlation = spearman(xs, ys);
  return t;
}

std::string control_table_csv(const ControlTable& t) {
  std::ostringstream out;
  out.precision(6);
  out << "target,mean_achieved,stddev,n\n";
  for (const auto& r : t.rows) out << r.target << ',' << r.mean << ',' << r.stddev << ',' << r.n << '\n';
  return out.str();
}

namespace {

std::map<int, std::vector<double>> similarity_by_target(const Archive& a, std::span<const CellGrid> goals) {
  std::map<int, std::vector<double>> groups;
  for (const auto& e : a.entries) {
    groups[e.targets.empty() ? 0 : e.targets[0]].push_back(lego::similarity_to_goals(e.grid, goals).best);
  }
  return groups;
}

}  // namespace

std::vector<SimilarityRow> repair_similarity_report(const Archive& agent, const Archive* random,
                                                    std::span<const CellGrid> goals) {
  if (agent.entries.empty()) fail(ErrorKind::DegenerateInput, "archive is empty");
  if (goals.empty()) fail(ErrorKind::Config, "goal set is empty");
  const auto a = similarity_by_target(agent, goals);
  std::map<int, std::vector<double>> r;
  if (random != nullptr) r = similarity_by_target(*random, goals);
  std::vector<SimilarityRow> rows;
  std::map<int, bool> targets;
  for (const auto& [t, v] : a) targets[t] = true;
  for (const auto& [t, v] : r) targets[t] = true;
  for (const auto& [t, unused] : targets) {
    SimilarityRow row;
    row.target = t;
    row.agent = group_stat(t, a.count(t) ? a.at(t) : std::vector<double>{});
    row.random = group_stat(t, r.count(t) ? r.at(t) : std::vector<double>{});
    rows.push_back(row);
  }
  return rows;
}

std::string similarity_csv(std::span<const SimilarityRow> rows) {
  std::ostringstream out;
  out.precision(6);
  out << "target,agent_mean,agent_stddev,agent_n,random_mean,random_stddev,random_n\n";
  for (const auto& r : rows) {
    out << r.target << ',' << r.agent.mean << ',' << r.agent.stddev << ',' << r.agent.n << ',' << r.random.mean << ','
        << r.random.stddev << ',' << r.random.n << '\n';
  }
  return out.str();
}

double mean_similarity(const Archive& archive, std::span<const CellGrid> goals) {
  if (archive.entries.empty()) fail(ErrorKind::DegenerateInput, "archive is empty");
  double sum = 0.0;
  for (const auto& e : archive.entries) sum += lego::similarity_to_goals(e.grid, goals).best;
  return sum / static_cast<double>(archive.entries.size());
}

namespace {

struct SummaryField {
  std::string name;
  std::string value;
};

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(6);
  out << v;
  return out.str();
}

std::vector<SummaryField> summary_fields(const Archive& archive, std::span<const CellGrid> goals) {
  std::vector<SummaryField> f;
  f.push_back({"domain", archive.domain});
  f.push_back({"artifacts", std::to_string(archive.entries.size())});
  if (archive.domain == "zelda") {
    const auto p = playability_rate(archive);
    f.push_back({"playability_mean", fmt(p.mean)});
    f.push_back({"playability_stddev", fmt(p.stddev)});
  } else if (archive.domain == "lego") {
    const auto w = four_wheel_rate(archive);
    f.push_back({"four_wheel_mean", fmt(w.mean)});
    f.push_back({"four_wheel_stddev", fmt(w.stddev)});
    const auto s = rate_by_run(archive, [](const ArchiveEntry& e) {
      return lego::classify_success(e.grid, e.targets.empty() ? 0 : e.targets[0]).verdict == lego::Verdict::Success;
    });
    f.push_back({"success_mean", fmt(s.mean)});
    f.push_back({"success_stddev", fmt(s.stddev)});
    if (!goals.empty()) f.push_back({"mean_similarity", fmt(mean_similarity(archive, goals))});
  }
  const auto grids = archive.grids();
  if (!goals.empty()) {
    f.push_back({"inter_unique", fmt(inter_diversity(grids, goals).unique_fraction)});
    f.push_back({"intra_unique", fmt(intra_diversity(grids).unique_fraction)});
    f.push_back({"total_unique", fmt(total_diversity(grids, goals).unique_fraction)});
  } else {
    f.push_back({"intra_unique", fmt(intra_diversity(grids).unique_fraction)});
  }
  for (const auto& m : archive.metric_names) {
    const auto t = controllability_table(archive, m);
    f.push_back({"spearman_" + m, t.correlation.defined ? fmt(t.correlation.rho) : "undefined"});
    f.push_back({"p_value_" + m, t.correlation.defined ? fmt(t.correlation.p_value) : "undefined"});
  }
  return f;
}

}  // namespace

std::string evaluation_report_csv(const Archive& archive, std::span<const CellGrid> goals) {
  const auto f = summary_fields(archive, goals);
  std::ostringstream out;
  for (std::size_t i = 0; i < f.size(); ++i) out << (i ? "," : "") << f[i].name;
  out << '\n';
  for (std::size_t i = 0; i < f.size(); ++i) out << (i ? "," : "") << f[i].value;
  out << '\n';
  return out.str();
}

std::string evaluation_summary(const Archive& archive, std::span<const CellGrid> goals) {
  std::ostringstream out;
  for (const auto& f : summary_fields(archive, goals)) out << f.name << ": " << f.value << '\n';
  out << "intra-diversity scan order: archive index order\n";
  return out.str();
}

std::vector<std::string> write_plot_data(const std::string& dir, const Archive& archive, const Archive* random,
                                         std::span<const CellGrid> goals) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create plot directory " + dir + ": " + ec.message());
  std::vector<std::string> files;
  for (const auto& m : archive.metric_names) {
    const std::string name = "controllability_" + m + ".csv";
    write_text_file((fs::path(dir) / name).string(), control_table_csv(controllability_table(archive, m)));
    files.push_back(name);
  }
  if (archive.domain == "lego" && !goals.empty()) {
    const auto rows = repair_similarity_report(archive, random, goals);
    write_text_file((fs::path(dir) / "similarity.csv").string(), similarity_csv(rows));
    files.push_back("similarity.csv");
  }
  return files;
}

}  // namespace pod
