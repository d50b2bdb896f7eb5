#include "pod/policy.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <sstream>

#include "json.hpp"

#include "pod/binary_io.hpp"
#include "pod/random.hpp"

namespace pod {

ObservationSpec observation_spec(const Domain& domain) {
  ObservationSpec s;
  s.grid = domain.extents;
  s.window = domain.observation_mode == ObservationMode::Full ? domain.extents : domain.observation;
  s.mode = domain.observation_mode;
  s.pad = domain.pad;
  s.categories = domain.alphabet.size();
  return s;
}

void write_observation(const ObservationSpec& spec, std::span<const Category> cells, const Cursor& cursor, float* out) {
  const auto& g = spec.grid;
  const auto& w = spec.window;
  if (w.x() < 1 || w.y() < 1 || w.z() < 1) fail(ErrorKind::Config, "observation extents must be at least 1");
  if (cells.size() != g.cell_count()) fail(ErrorKind::Shape, "observation grid size mismatch");
  for (int a = 0; a < 3; ++a) {
    if (cursor.coords[a] < 0 || cursor.coords[a] >= g.size[a]) fail(ErrorKind::Shape, "cursor out of bounds");
  }
  std::array<int, 3> offset{0, 0, 0};
  if (spec.mode == ObservationMode::Centered) {
    for (int a = 0; a < 3; ++a) offset[a] = cursor.coords[a] - w.size[a] / 2;
  }
  const std::size_t plane = w.cell_count();
  std::memset(out, 0, sizeof(float) * spec.floats());
  std::size_t i = 0;
  for (int z = 0; z < w.z(); ++z) {
    const int gz = z + offset[2];
    for (int y = 0; y < w.y(); ++y) {
      const int gy = y + offset[1];
      for (int x = 0; x < w.x(); ++x, ++i) {
        const int gx = x + offset[0];
        const bool inside = gx >= 0 && gx < g.x() && gy >= 0 && gy < g.y() && gz >= 0 && gz < g.z();
        const Category c = inside ? cells[(static_cast<std::size_t>(gz) * g.y() + gy) * g.x() + gx] : spec.pad;
        out[static_cast<std::size_t>(c) * plane + i] = 1.0f;
      }
    }
  }
  const int cx = cursor.x() - offset[0], cy = cursor.y() - offset[1], cz = cursor.z() - offset[2];
  if (cx >= 0 && cx < w.x() && cy >= 0 && cy < w.y() && cz >= 0 && cz < w.z()) {
    out[static_cast<std::size_t>(spec.categories) * plane + (static_cast<std::size_t>(cz) * w.y() + cy) * w.x() + cx] =
        1.0f;
  }
}

nn::Tensor<float> build_observation(const ObservationSpec& spec, const CellGrid& state, const Cursor& cursor) {
  if (state.extents() != spec.grid) fail(ErrorKind::Shape, "state extents do not match the observation spec");
  nn::Tensor<float> t(spec.shape());
  write_observation(spec, state.cells(), cursor, t.ptr());
  return t;
}

std::vector<float> encode_condition(std::span<const std::int8_t> signal) {
  std::vector<float> out(3 * signal.size(), 0.0f);
  for (std::size_t i = 0; i < signal.size(); ++i) {
    if (signal[i] < -1 || signal[i] > 1) fail(ErrorKind::Config, "condition entries must be -1, 0 or +1");
    out[3 * i + static_cast<std::size_t>(signal[i] + 1)] = 1.0f;
  }
  return out;
}

ConditionSignal decode_condition(std::span<const float> encoded) {
  if (encoded.size() % 3 != 0) fail(ErrorKind::Shape, "encoded condition width must be a multiple of 3");
  ConditionSignal s(encoded.size() / 3);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const int k = nn::argmax<float>(encoded.subspan(3 * i, 3));
    s[i] = static_cast<std::int8_t>(k - 1);
  }
  return s;
}

std::vector<nn::LayerSpec> policy_layers(const Domain& domain, const PolicyConfig& c) {
  using nn::LayerSpec;
  const int d = domain.spatial_dims();
  return {
      LayerSpec::conv(d, c.conv1, c.kernel), LayerSpec::relu(), LayerSpec::maxpool(d),
      LayerSpec::conv(d, c.conv2, c.kernel), LayerSpec::relu(),
      LayerSpec::conv(d, c.conv3, c.kernel), LayerSpec::relu(),
      LayerSpec::flatten(), LayerSpec::concat_condition(),
      LayerSpec::dense(c.hidden), LayerSpec::relu(),
      LayerSpec::dense(domain.alphabet.size()), LayerSpec::softmax(),
  };
}

PolicyModel::PolicyModel(const Domain& domain, PolicyConfig config)
    : domain_(&domain),
      config_(config),
      obs_(observation_spec(domain)),
      net_(obs_.shape(), config.condition_enabled ? 3 * static_cast<int>(domain.metrics.size()) : 0,
           policy_layers(domain, config), config.seed),
      start_(uniform_histogram(domain.alphabet.size())) {}

RepairPrediction predict_repair(const PolicyModel& model, const CellGrid& state, const Cursor& cursor,
                                std::span<const std::int8_t> signal, double temperature, std::mt19937_64* rng) {
  if (state.extents() != model.observation().grid || state.categories() != model.alphabet_size()) {
    fail(ErrorKind::Shape, "state does not match the model's domain");
  }
  if (signal.size() != static_cast<std::size_t>(model.metric_count())) {
    fail(ErrorKind::Shape, "condition signal length does not match the model's metric count");
  }
  auto shape = model.observation().shape();
  shape.insert(shape.begin(), 1);
  nn::Tensor<float> x(shape);
  write_observation(model.observation(), state.cells(), cursor, x.ptr());

  nn::Tensor<float> side;
  if (model.condition_width() > 0) {
    side = nn::Tensor<float>({1, model.condition_width()});
    const auto enc = encode_condition(signal);
    std::copy(enc.begin(), enc.end(), side.data.begin());
  }
  auto probs = model.network().forward(x, model.condition_width() > 0 ? &side : nullptr);

  RepairPrediction p;
  p.probabilities = std::move(probs.data);
  if (temperature > 0.0) {
    if (rng == nullptr) fail(ErrorKind::Usage, "sampling needs a random generator");
    std::vector<double> w(p.probabilities.size());
    double total = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      w[k] = std::pow(static_cast<double>(p.probabilities[k]), 1.0 / temperature);
      total += w[k];
    }
    double u = uniform01(*rng) * total;
    p.action = static_cast<Category>(w.size() - 1);
    for (std::size_t k = 0; k < w.size(); ++k) {
      if (u < w[k]) {
        p.action = static_cast<Category>(k);
        break;
      }
      u -= w[k];
    }
  } else {
    p.action = static_cast<Category>(nn::argmax<float>(p.probabilities));
  }
  return p;
}

namespace {

void fill_batch(const PolicyModel& model, const Dataset& ds, std::span<const std::size_t> rows, nn::Tensor<float>& x,
                nn::Tensor<float>& side, std::vector<int>& targets) {
  const auto& spec = model.observation();
  const int n = static_cast<int>(rows.size());
  auto shape = spec.shape();
  shape.insert(shape.begin(), n);
  if (x.shape != shape) x = nn::Tensor<float>(shape);
  const int cw = model.condition_width();
  if (cw > 0 && (side.rank() != 2 || side.dim(0) != n)) side = nn::Tensor<float>({n, cw});
  targets.resize(rows.size());
  for (int i = 0; i < n; ++i) {
    const std::size_t r = rows[static_cast<std::size_t>(i)];
    write_observation(spec, ds.cells(r), ds.cursor(r), x.ptr() + static_cast<std::size_t>(i) * spec.floats());
    if (cw > 0) {
      const auto enc = encode_condition(ds.condition(r));
      std::copy(enc.begin(), enc.end(), side.ptr() + static_cast<std::size_t>(i) * cw);
    }
    targets[static_cast<std::size_t>(i)] = ds.repair_action(r);
  }
}

}  // namespace

std::vector<EpochReport> train(PolicyModel& model, const Dataset& ds, const TrainConfig& config) {
  if (config.epochs < 0) fail(ErrorKind::Config, "epochs must be non-negative");
  if (config.batch_size < 1) fail(ErrorKind::Config, "batch size must be at least 1");
  if (ds.extents() != model.observation().grid || ds.categories() != model.alphabet_size() ||
      ds.metric_count() != model.metric_count()) {
    fail(ErrorKind::Config, "dataset does not match the model's domain");
  }
  std::vector<EpochReport> reports;
  if (config.epochs == 0 || ds.size() == 0) return reports;

  auto& net = model.network();
  auto params = net.parameters();
  nn::AdamState<float> adam;
  adam.config = config.adam;
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(ds.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  nn::Tensor<float> x, side;
  std::vector<int> targets;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    shuffle_in_place(order, rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), order.size() - b);
      fill_batch(model, ds, std::span<const std::size_t>(order).subspan(b, n), x, side, targets);
      nn::Tape<float> tape;
      net.zero_grad();
      const auto logits = net.forward_logits(x, model.condition_width() > 0 ? &side : nullptr, &tape);
      nn::BatchLoss<float> loss;
      try {
        loss = nn::softmax_cross_entropy_batch<float>(logits, targets);
      } catch (const Error& e) {
        fail(ErrorKind::Numeric, "training diverged at epoch " + std::to_string(epoch) + ", batch offset " +
                                     std::to_string(b) + ": " + e.what());
      }
      if (!std::isfinite(loss.mean_loss)) {
        fail(ErrorKind::Numeric, "non-finite loss at epoch " + std::to_string(epoch) + ", batch offset " +
                                     std::to_string(b));
      }
      net.backward(tape, loss.grad_logits);
      nn::adam_step<float>(params, adam);
      loss_sum += loss.mean_loss * static_cast<double>(n);
      correct += static_cast<std::size_t>(loss.correct);
    }
    EpochReport r;
    r.epoch = epoch;
    r.mean_loss = loss_sum / static_cast<double>(ds.size());
    r.accuracy = static_cast<double>(correct) / static_cast<double>(ds.size());
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    reports.push_back(r);
    if (!config.checkpoint_path.empty()) save_model(config.checkpoint_path, model);
    if (!config.report_path.empty()) write_text_file(config.report_path, report_csv(reports));
    if (config.on_epoch) config.on_epoch(r);
  }
  return reports;
}

void check_compatible(const PolicyModel& model, const DatasetManifest& m) {
  const auto& d = model.domain();
  if (!m.domain.empty() && m.domain != d.name) {
    fail(ErrorKind::Config, "dataset domain '" + m.domain + "' does not match model domain '" + d.name + "'");
  }
  if (m.alphabet != d.alphabet.names()) fail(ErrorKind::Config, "dataset alphabet does not match the model");
  if (m.extents != d.extents) fail(ErrorKind::Config, "dataset extents do not match the model");
  std::vector<std::string> names;
  for (const auto& metric : d.metrics) names.push_back(metric.name);
  if (m.metric_names != names) fail(ErrorKind::Config, "dataset metrics do not match the model");
}

std::vector<EpochReport> train_from_file(PolicyModel& model, const std::string& dataset_path,
                                         const TrainConfig& config) {
  const auto manifest = read_manifest(manifest_path_for(dataset_path));
  check_compatible(model, manifest);
  const Dataset ds = read_dataset(dataset_path);
  if (ds.size() != manifest.record_count) fail(ErrorKind::Config, "dataset record count disagrees with manifest");
  if (manifest.start_distribution.size() == static_cast<std::size_t>(model.alphabet_size())) {
    TileHistogram h;
    h.counts = manifest.start_distribution;
    for (auto c : h.counts) h.total += c;
    model.set_start_distribution(h);
  }
  return train(model, ds, config);
}

std::string report_csv(std::span<const EpochReport> reports) {
  std::ostringstream out;
  out << "epoch,mean_loss,accuracy,wall_seconds\n";
  out.precision(8);
  for (const auto& r : reports) {
    out << r.epoch << ',' << r.mean_loss << ',' << r.accuracy << ',' << r.wall_seconds << '\n';
  }
  return out.str();
}

std::string model_sidecar_path(const std::string& path) { return path + ".json"; }

void save_model(const std::string& path, const PolicyModel& model) {
  nn::save_checkpoint(path, model.network());
  const auto& c = model.config();
  nlohmann::ordered_json j;
  j["domain"] = model.domain().name;
  j["conv1"] = c.conv1;
  j["conv2"] = c.conv2;
  j["conv3"] = c.conv3;
  j["hidden"] = c.hidden;
  j["kernel"] = c.kernel;
  j["condition_enabled"] = c.condition_enabled;
  j["seed"] = c.seed;
  j["start_distribution"] = model.start_distribution().counts;
  write_text_file(model_sidecar_path(path), j.dump(2) + "\n");
}

PolicyModel load_model(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(model_sidecar_path(path)));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Io, "malformed model sidecar for " + path + ": " + e.what());
  }
  PolicyConfig c;
  c.conv1 = j.value("conv1", c.conv1);
  c.conv2 = j.value("conv2", c.conv2);
  c.conv3 = j.value("conv3", c.conv3);
  c.hidden = j.value("hidden", c.hidden);
  c.kernel = j.value("kernel", c.kernel);
  c.condition_enabled = j.value("condition_enabled", true);
  c.seed = j.value("seed", std::uint64_t{0});
  PolicyModel model(domain_by_name(j.value("domain", "")), c);
  nn::load_checkpoint(path, model.network());
  if (j.contains("start_distribution")) {
    TileHistogram h;
    h.counts = j.at("start_distribution").get<std::vector<std::uint64_t>>();
    for (auto v : h.counts) h.total += v;
    if (h.counts.size() != static_cast<std::size_t>(model.alphabet_size()) || h.total == 0) {
      fail(ErrorKind::Config, "model start distribution does not match its alphabet");
    }
    model.set_start_distribution(h);
  }
  return model;
}

}  // namespace pod
