#include "prcorr/net.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>

#include "json.hpp"
#include "prcorr/ingest.hpp"

namespace prcorr {

MlpModel MlpModel::init(int hidden_width, int hidden_layers, std::uint64_t seed) {
  if (hidden_width < 1 || hidden_layers < 1) {
    throw NetError("model dimensions must be positive");
  }
  MlpModel m;
  m.hidden_width = hidden_width;
  m.hidden_layers = hidden_layers;
  std::mt19937_64 rng(seed);
  auto make_layer = [&](int out, int in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Eigen::MatrixXd w(out, in);
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = dist(rng);
    }
    Eigen::VectorXd b(out);
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = dist(rng);
    m.weights.push_back(std::move(w));
    m.biases.push_back(std::move(b));
  };
  make_layer(hidden_width, m.input_dim);
  for (int l = 1; l < hidden_layers; ++l) make_layer(hidden_width, hidden_width);
  make_layer(1, hidden_width);
  return m;
}

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    n += static_cast<std::size_t>(weights[l].size()) + static_cast<std::size_t>(biases[l].size());
  }
  return n;
}

namespace {

void check_dims(const MlpModel& m) {
  if (m.weights.size() != static_cast<std::size_t>(m.hidden_layers + 1) ||
      m.biases.size() != m.weights.size()) {
    throw NetError("model layer count mismatch");
  }
  Eigen::Index in = m.input_dim;
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    const Eigen::Index out = (l + 1 == m.weights.size()) ? 1 : m.hidden_width;
    if (m.weights[l].rows() != out || m.weights[l].cols() != in ||
        m.biases[l].size() != out) {
      throw NetError("model layer " + std::to_string(l) + " dimension mismatch");
    }
    in = out;
  }
}

// Batched forward over stacked visible rows; keeps activations for backward.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> acts;  // acts[0] = inputs, acts[l] = hidden outputs
  Eigen::VectorXd out;
};

ForwardCache forward_rows(const MlpModel& m, const Eigen::MatrixXd& x) {
  ForwardCache c;
  c.acts.reserve(m.weights.size());
  c.acts.push_back(x);
  Eigen::MatrixXd a = x;
  for (int l = 0; l < m.hidden_layers; ++l) {
    a = ((a * m.weights[static_cast<std::size_t>(l)].transpose()).rowwise() +
         m.biases[static_cast<std::size_t>(l)].transpose())
            .cwiseMax(0.0);
    c.acts.push_back(a);
  }
  c.out = a * m.weights.back().transpose().col(0);
  c.out.array() += m.biases.back()(0);
  return c;
}

struct SampleView {
  std::vector<int> slots;    // visible slot indices, ascending
  Eigen::VectorXd h;         // h-row over visible slots
  Eigen::VectorXd label;
};

SampleView view_of(const FeatureSample& s) {
  SampleView v;
  for (int i = 0; i < kSlots; ++i) {
    if (s.mask[static_cast<std::size_t>(i)]) v.slots.push_back(i);
  }
  const Eigen::Index m = static_cast<Eigen::Index>(v.slots.size());
  v.h.resize(m);
  v.label.resize(m);
  for (Eigen::Index n = 0; n < m; ++n) {
    v.h(n) = s.h_slots[static_cast<std::size_t>(v.slots[static_cast<std::size_t>(n)])];
    v.label(n) = s.labels[static_cast<std::size_t>(v.slots[static_cast<std::size_t>(n)])];
  }
  return v;
}

}  // namespace

Eigen::Matrix<double, kSlots, 1> forward(const MlpModel& model, const FeatureSample& sample) {
  check_dims(model);
  Eigen::Matrix<double, kSlots, 1> out = Eigen::Matrix<double, kSlots, 1>::Zero();
  const SampleView v = view_of(sample);
  if (v.slots.empty()) return out;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(v.slots.size()), model.input_dim);
  for (std::size_t n = 0; n < v.slots.size(); ++n) {
    const auto& f = sample.slots[static_cast<std::size_t>(v.slots[n])];
    for (int k = 0; k < kFeatureDim; ++k) {
      x(static_cast<Eigen::Index>(n), k) = f[static_cast<std::size_t>(k)];
    }
  }
  const ForwardCache c = forward_rows(model, x);
  for (std::size_t n = 0; n < v.slots.size(); ++n) {
    out(v.slots[n]) = c.out(static_cast<Eigen::Index>(n));
  }
  return out;
}

double loss(const Eigen::Matrix<double, kSlots, 1>& predictions, const FeatureSample& sample) {
  const SampleView v = view_of(sample);
  if (v.slots.empty()) return 0.0;
  Eigen::VectorXd mu(static_cast<Eigen::Index>(v.slots.size()));
  for (std::size_t n = 0; n < v.slots.size(); ++n) {
    mu(static_cast<Eigen::Index>(n)) = predictions(v.slots[n]);
  }
  const double clk_residual = v.h.dot(mu);
  const Eigen::VectorXd t = mu.array() - clk_residual - v.label.array();
  return t.squaredNorm();
}

std::pair<double, Gradients> gradients(const MlpModel& model,
                                       const std::vector<FeatureSample>& batch) {
  check_dims(model);
  if (batch.empty()) throw NetError("gradients: empty batch");

  // Stack all visible rows of the batch.
  std::vector<SampleView> views;
  views.reserve(batch.size());
  Eigen::Index total = 0;
  for (const auto& s : batch) {
    views.push_back(view_of(s));
    total += static_cast<Eigen::Index>(views.back().slots.size());
  }
  Eigen::MatrixXd x(total, model.input_dim);
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (int slot : views[i].slots) {
      const auto& f = batch[i].slots[static_cast<std::size_t>(slot)];
      for (int k = 0; k < kFeatureDim; ++k) x(row, k) = f[static_cast<std::size_t>(k)];
      ++row;
    }
  }

  const ForwardCache c = forward_rows(model, x);

  // Per-sample loss terms and the gradient at the network output. The
  // clock-residual term couples all visible satellites of a sample:
  //   dL/dmu_m = 2 t_m - 2 (sum_n t_n) h_m
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  double total_loss = 0.0;
  Eigen::VectorXd dout(total);
  row = 0;
  for (const auto& v : views) {
    const Eigen::Index m = static_cast<Eigen::Index>(v.slots.size());
    if (m == 0) continue;
    const Eigen::VectorXd mu = c.out.segment(row, m);
    const double clk_residual = v.h.dot(mu);
    const Eigen::VectorXd t = mu.array() - clk_residual - v.label.array();
    total_loss += t.squaredNorm();
    dout.segment(row, m) = inv_b * (2.0 * t.array() - 2.0 * t.sum() * v.h.array());
    row += m;
  }
  total_loss *= inv_b;

  Gradients g;
  g.weights.resize(model.weights.size());
  g.biases.resize(model.biases.size());

  // Output layer.
  const std::size_t last = model.weights.size() - 1;
  g.weights[last] = dout.transpose() * c.acts.back();
  g.biases[last] = Eigen::VectorXd::Constant(1, dout.sum());

  Eigen::MatrixXd delta = dout * model.weights[last];  // total x H
  for (std::size_t l = last; l-- > 0;) {
    // acts[l+1] is this layer's rectified output.
    delta = (c.acts[l + 1].array() > 0.0).cast<double>() * delta.array();
    g.weights[l] = delta.transpose() * c.acts[l];
    g.biases[l] = delta.colwise().sum().transpose();
    if (l > 0) delta = (delta * model.weights[l]).eval();
  }
  return {total_loss, g};
}

double learning_rate(const TrainConfig& config, int iter) {
  if (config.max_iters <= 1) return config.lr_start;
  const double frac = static_cast<double>(iter) / static_cast<double>(config.max_iters - 1);
  return config.lr_start * std::pow(config.lr_end / config.lr_start, frac);
}

TrainResult train(const std::vector<FeatureSample>& dataset, const TrainConfig& config) {
  std::vector<FeatureSample> usable;
  for (const auto& s : dataset) {
    for (bool m : s.mask) {
      if (m) {
        usable.push_back(s);
        break;
      }
    }
  }
  if (usable.empty()) throw NetError("train: empty dataset");
  if (config.lr_end >= config.lr_start) throw NetError("train: lr_end must be < lr_start");
  if (config.max_iters < 1 || config.batch_size < 1) {
    throw NetError("train: max_iters and batch_size must be positive");
  }

  TrainResult result;
  result.model = MlpModel::init(config.hidden_width, config.hidden_layers, config.seed);
  MlpModel& model = result.model;

  // Adam state.
  std::vector<Eigen::MatrixXd> mw, vw;
  std::vector<Eigen::VectorXd> mb, vb;
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    mw.push_back(Eigen::MatrixXd::Zero(model.weights[l].rows(), model.weights[l].cols()));
    vw.push_back(Eigen::MatrixXd::Zero(model.weights[l].rows(), model.weights[l].cols()));
    mb.push_back(Eigen::VectorXd::Zero(model.biases[l].size()));
    vb.push_back(Eigen::VectorXd::Zero(model.biases[l].size()));
  }

  std::mt19937_64 rng(config.seed + 1);
  std::vector<std::size_t> order(usable.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t cursor = 0;

  result.curve.reserve(static_cast<std::size_t>(config.max_iters));
  for (int iter = 0; iter < config.max_iters; ++iter) {
    std::vector<FeatureSample> batch;
    const std::size_t bs = std::min<std::size_t>(static_cast<std::size_t>(config.batch_size),
                                                 usable.size());
    batch.reserve(bs);
    for (std::size_t k = 0; k < bs; ++k) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      batch.push_back(usable[order[cursor++]]);
    }

    const auto [batch_loss, g] = gradients(model, batch);
    const double lr = learning_rate(config, iter);
    const double t = static_cast<double>(iter + 1);
    const double bc1 = 1.0 - std::pow(config.adam_beta1, t);
    const double bc2 = 1.0 - std::pow(config.adam_beta2, t);
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
      mw[l] = config.adam_beta1 * mw[l] + (1.0 - config.adam_beta1) * g.weights[l];
      vw[l] = config.adam_beta2 * vw[l] +
              (1.0 - config.adam_beta2) * g.weights[l].cwiseProduct(g.weights[l]);
      model.weights[l].array() -=
          lr * (mw[l].array() / bc1) / ((vw[l].array() / bc2).sqrt() + config.adam_eps);
      mb[l] = config.adam_beta1 * mb[l] + (1.0 - config.adam_beta1) * g.biases[l];
      vb[l] = config.adam_beta2 * vb[l] +
              (1.0 - config.adam_beta2) * g.biases[l].cwiseProduct(g.biases[l]);
      model.biases[l].array() -=
          lr * (mb[l].array() / bc1) / ((vb[l].array() / bc2).sqrt() + config.adam_eps);
    }
    result.curve.push_back({static_cast<double>(iter), batch_loss, lr});
  }
  return result;
}

MeasurementSet correct_pseudoranges(const MeasurementSet& epoch, const MlpModel& model,
                                    const EpochFeatures& features) {
  if (features.time_ms != epoch.time_ms || features.svids.size() != epoch.obs.size()) {
    throw NetError("correct_pseudoranges: feature/epoch mismatch");
  }
  FeatureSample s;
  s.time_ms = features.time_ms;
  for (std::size_t n = 0; n < features.svids.size(); ++n) {
    if (features.svids[n] != epoch.obs[n].svid) {
      throw NetError("correct_pseudoranges: svid order mismatch");
    }
    const int slot = features.svids[n] - 1;
    s.slots[static_cast<std::size_t>(slot)] = features.features[n];
    s.mask[static_cast<std::size_t>(slot)] = true;
  }
  const auto mu = forward(model, s);
  MeasurementSet out = epoch;
  for (auto& o : out.obs) {
    o.pr_m -= mu(o.svid - 1);
  }
  return out;
}

void save_model(const MlpModel& model, const std::string& path) {
  check_dims(model);
  nlohmann::json j;
  j["schema"] = "pr-bias-mlp/1";
  j["input_dim"] = model.input_dim;
  j["hidden_width"] = model.hidden_width;
  j["hidden_layers"] = model.hidden_layers;
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    nlohmann::json layer;
    layer["rows"] = model.weights[l].rows();
    layer["cols"] = model.weights[l].cols();
    std::vector<double> w;  // row-major
    for (Eigen::Index i = 0; i < model.weights[l].rows(); ++i) {
      for (Eigen::Index jj = 0; jj < model.weights[l].cols(); ++jj) {
        w.push_back(model.weights[l](i, jj));
      }
    }
    layer["weights"] = w;
    layer["biases"] = std::vector<double>(model.biases[l].data(),
                                          model.biases[l].data() + model.biases[l].size());
    layers.push_back(layer);
  }
  j["layers"] = layers;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw NetError("cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
}

MlpModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NetError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw NetError("model file parse error: " + std::string(e.what()));
  }
  if (!j.contains("schema") || j["schema"] != "pr-bias-mlp/1") {
    throw NetError("model schema mismatch");
  }
  MlpModel m;
  m.input_dim = j.at("input_dim").get<int>();
  m.hidden_width = j.at("hidden_width").get<int>();
  m.hidden_layers = j.at("hidden_layers").get<int>();
  if (m.input_dim != kFeatureDim) {
    throw NetError("model input_dim " + std::to_string(m.input_dim) + " != " +
                   std::to_string(kFeatureDim));
  }
  for (const auto& layer : j.at("layers")) {
    const Eigen::Index rows = layer.at("rows").get<Eigen::Index>();
    const Eigen::Index cols = layer.at("cols").get<Eigen::Index>();
    const auto w = layer.at("weights").get<std::vector<double>>();
    const auto b = layer.at("biases").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(w.size()) != rows * cols ||
        static_cast<Eigen::Index>(b.size()) != rows) {
      throw NetError("model layer array size mismatch");
    }
    Eigen::MatrixXd wm(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index jj = 0; jj < cols; ++jj) {
        wm(i, jj) = w[static_cast<std::size_t>(i * cols + jj)];
      }
    }
    m.weights.push_back(std::move(wm));
    m.biases.push_back(Eigen::Map<const Eigen::VectorXd>(b.data(), rows));
  }
  check_dims(m);
  return m;
}

void write_loss_curve_csv(std::ostream& out, const std::vector<std::array<double, 3>>& curve) {
  out << "iter,loss,lr\n";
  for (const auto& row : curve) {
    out << static_cast<long long>(row[0]) << ',' << format_double(row[1]) << ','
        << format_double(row[2]) << '\n';
  }
}

}  // namespace prcorr
