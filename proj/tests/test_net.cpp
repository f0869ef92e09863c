#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "prcorr/net.hpp"

using namespace prcorr;

namespace {

// Synthetic sample with `visible` slots, normalized h, and labels from a fixed
// linear map of the features (a learnable target).
FeatureSample make_sample(std::mt19937_64& rng, int visible) {
  std::uniform_real_distribution<double> feat(-1.0, 1.0);
  std::uniform_real_distribution<double> hraw(0.1, 1.0);
  std::vector<int> slots(kSlots);
  std::iota(slots.begin(), slots.end(), 0);
  std::shuffle(slots.begin(), slots.end(), rng);
  slots.resize(static_cast<std::size_t>(visible));
  std::sort(slots.begin(), slots.end());

  FeatureSample s;
  double h_sum = 0.0;
  for (int slot : slots) {
    const auto i = static_cast<std::size_t>(slot);
    s.mask[i] = true;
    for (int k = 0; k < kFeatureDim; ++k) {
      s.slots[i][static_cast<std::size_t>(k)] = feat(rng);
    }
    s.labels[i] = 3.0 * s.slots[i][0] + 2.0 * s.slots[i][1] - s.slots[i][10];
    s.h_slots[i] = hraw(rng);
    h_sum += s.h_slots[i];
  }
  for (int slot : slots) s.h_slots[static_cast<std::size_t>(slot)] /= h_sum;
  return s;
}

MlpModel zero_model(int width, int layers) {
  MlpModel m = MlpModel::init(width, layers, 0);
  for (auto& w : m.weights) w.setZero();
  for (auto& b : m.biases) b.setZero();
  return m;
}

double flat_loss(const MlpModel& m, const std::vector<FeatureSample>& batch) {
  double total = 0.0;
  for (const auto& s : batch) total += loss(forward(m, s), s);
  return total / static_cast<double>(batch.size());
}

}  // namespace

TEST_CASE("default architecture has the documented parameter count") {
  const MlpModel m = MlpModel::init(40, 20, 3);
  // 16*40+40 + 19*(40*40+40) + 40+1 = 31881
  CHECK(m.parameter_count() == 31881);
  CHECK(m.weights.size() == 21);
}

TEST_CASE("zero model predicts zero and non-visible slots stay zero") {
  const MlpModel m = zero_model(8, 3);
  std::mt19937_64 rng(41);
  const FeatureSample s = make_sample(rng, 6);
  const auto out = forward(m, s);
  for (int slot = 0; slot < kSlots; ++slot) {
    CHECK(out(slot) == 0.0);
  }
}

TEST_CASE("the network is shared across satellite slots") {
  const MlpModel m = MlpModel::init(10, 4, 7);
  std::mt19937_64 rng(42);
  const FeatureSample a = make_sample(rng, 5);

  // Move each visible feature vector to a different slot; outputs follow.
  FeatureSample b;
  b.time_ms = a.time_ms;
  std::vector<int> a_slots, b_slots;
  for (int slot = 0; slot < kSlots; ++slot) {
    if (a.mask[static_cast<std::size_t>(slot)]) a_slots.push_back(slot);
  }
  for (std::size_t n = 0; n < a_slots.size(); ++n) {
    const int dst = (a_slots[n] + 11) % kSlots;
    b_slots.push_back(dst);
    b.mask[static_cast<std::size_t>(dst)] = true;
    b.slots[static_cast<std::size_t>(dst)] = a.slots[static_cast<std::size_t>(a_slots[n])];
  }
  const auto out_a = forward(m, a);
  const auto out_b = forward(m, b);
  for (std::size_t n = 0; n < a_slots.size(); ++n) {
    CHECK(out_a(a_slots[n]) == out_b(b_slots[n]));
  }
}

TEST_CASE("loss arithmetic on a single visible satellite") {
  // t = mu - h*mu - label; with mu = 2, h = 0.25, label = 1: t = 0.5.
  FeatureSample s;
  s.mask[4] = true;
  s.labels[4] = 1.0;
  s.h_slots[4] = 0.25;
  Eigen::Matrix<double, kSlots, 1> mu = Eigen::Matrix<double, kSlots, 1>::Zero();
  mu(4) = 2.0;
  CHECK(loss(mu, s) == doctest::Approx(0.25).epsilon(1e-12));

  // All-false mask contributes zero loss.
  CHECK(loss(mu, FeatureSample{}) == 0.0);
}

TEST_CASE("loss ignores a shared constant added to all visible predictions") {
  std::mt19937_64 rng(43);
  const FeatureSample s = make_sample(rng, 9);
  const MlpModel m = MlpModel::init(12, 3, 9);
  auto mu = forward(m, s);
  const double base = loss(mu, s);
  for (int slot = 0; slot < kSlots; ++slot) {
    if (s.mask[static_cast<std::size_t>(slot)]) mu(slot) += 42.0;
  }
  CHECK(loss(mu, s) == doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("fuzzing non-visible slots changes nothing, bit for bit") {
  const MlpModel m = MlpModel::init(16, 5, 11);
  std::mt19937_64 rng(44);
  std::vector<FeatureSample> batch;
  for (int i = 0; i < 4; ++i) batch.push_back(make_sample(rng, 4 + i * 2));

  const auto [loss0, g0] = gradients(m, batch);
  auto fuzzed = batch;
  std::uniform_real_distribution<double> junk(-100.0, 100.0);
  for (auto& s : fuzzed) {
    for (int slot = 0; slot < kSlots; ++slot) {
      const auto i = static_cast<std::size_t>(slot);
      if (!s.mask[i]) {
        for (int k = 0; k < kFeatureDim; ++k) {
          s.slots[i][static_cast<std::size_t>(k)] = junk(rng);
        }
        s.labels[i] = junk(rng);
        s.h_slots[i] = junk(rng);
      }
    }
  }
  const auto [loss1, g1] = gradients(m, fuzzed);
  CHECK(loss0 == loss1);
  for (std::size_t l = 0; l < g0.weights.size(); ++l) {
    CHECK((g0.weights[l] - g1.weights[l]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((g0.biases[l] - g1.biases[l]).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("analytic gradients match central finite differences") {
  MlpModel m = MlpModel::init(12, 4, 13);
  std::mt19937_64 rng(45);
  std::vector<FeatureSample> batch;
  for (int i = 0; i < 5; ++i) batch.push_back(make_sample(rng, 4 + (i * 2) % 9));

  const auto [base_loss, g] = gradients(m, batch);
  CHECK(base_loss == doctest::Approx(flat_loss(m, batch)).epsilon(1e-12));

  const double eps = 1e-6;
  std::uniform_int_distribution<std::size_t> pick_layer(0, m.weights.size() - 1);
  int checked = 0;
  while (checked < 60) {
    const std::size_t l = pick_layer(rng);
    std::uniform_int_distribution<Eigen::Index> pi(0, m.weights[l].rows() - 1);
    std::uniform_int_distribution<Eigen::Index> pj(0, m.weights[l].cols() - 1);
    const Eigen::Index i = pi(rng), j = pj(rng);

    const double saved = m.weights[l](i, j);
    m.weights[l](i, j) = saved + eps;
    const double up = flat_loss(m, batch);
    m.weights[l](i, j) = saved - eps;
    const double dn = flat_loss(m, batch);
    m.weights[l](i, j) = saved;

    const double numeric = (up - dn) / (2.0 * eps);
    const double analytic = g.weights[l](i, j);
    const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
    CHECK(std::abs(numeric - analytic) / scale < 1e-4);
    ++checked;
  }

  // Bias gradients too.
  for (std::size_t l = 0; l < m.biases.size(); ++l) {
    const Eigen::Index i = m.biases[l].size() / 2;
    const double saved = m.biases[l](i);
    m.biases[l](i) = saved + eps;
    const double up = flat_loss(m, batch);
    m.biases[l](i) = saved - eps;
    const double dn = flat_loss(m, batch);
    m.biases[l](i) = saved;
    const double numeric = (up - dn) / (2.0 * eps);
    const double analytic = g.biases[l](i);
    const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
    CHECK(std::abs(numeric - analytic) / scale < 1e-4);
  }
}

TEST_CASE("learning rate decays exponentially between the endpoints") {
  TrainConfig cfg;
  cfg.max_iters = 5000;
  CHECK(learning_rate(cfg, 0) == doctest::Approx(1e-2).epsilon(1e-12));
  CHECK(learning_rate(cfg, 4999) == doctest::Approx(1e-7).epsilon(1e-9));
  // Geometric midpoint at the middle iteration (odd count, exact midpoint).
  const double mid = learning_rate(cfg, 2499);
  const double next = learning_rate(cfg, 2500);
  CHECK(mid / next == doctest::Approx(learning_rate(cfg, 0) / learning_rate(cfg, 1)));
  CHECK(mid > 1e-7);
  CHECK(mid < 1e-2);
}

TEST_CASE("training reduces the loss on a learnable dataset") {
  std::mt19937_64 rng(46);
  std::vector<FeatureSample> data;
  for (int i = 0; i < 64; ++i) data.push_back(make_sample(rng, 4 + i % 9));

  TrainConfig cfg;
  cfg.hidden_width = 16;
  cfg.hidden_layers = 3;
  cfg.max_iters = 400;
  cfg.batch_size = 16;
  cfg.lr_start = 1e-2;
  cfg.lr_end = 1e-4;
  cfg.seed = 5;
  const TrainResult r = train(data, cfg);
  REQUIRE(r.curve.size() == 400);
  const double first = r.curve.front()[1];
  const double final_loss = flat_loss(r.model, data);
  CHECK(final_loss < 0.25 * first);

  // Same seed reruns bit-identically.
  const TrainResult r2 = train(data, cfg);
  for (std::size_t l = 0; l < r.model.weights.size(); ++l) {
    CHECK((r.model.weights[l] - r2.model.weights[l]).cwiseAbs().maxCoeff() == 0.0);
  }
  for (std::size_t i = 0; i < r.curve.size(); ++i) {
    CHECK(r.curve[i][1] == r2.curve[i][1]);
  }
}

TEST_CASE("training input validation") {
  std::mt19937_64 rng(47);
  std::vector<FeatureSample> data{make_sample(rng, 5)};
  TrainConfig cfg;
  cfg.lr_end = cfg.lr_start;
  CHECK_THROWS_AS(static_cast<void>(train(data, cfg)), NetError);
  cfg = TrainConfig{};
  cfg.max_iters = 0;
  CHECK_THROWS_AS(static_cast<void>(train(data, cfg)), NetError);
  CHECK_THROWS_AS(static_cast<void>(train({FeatureSample{}}, TrainConfig{})), NetError);
  CHECK_THROWS_AS(static_cast<void>(gradients(MlpModel::init(4, 2, 0), {})), NetError);
}

TEST_CASE("model save and load round trip") {
  const MlpModel m = MlpModel::init(14, 6, 48);
  const std::string path = "test_model_roundtrip.json";
  save_model(m, path);
  const MlpModel loaded = load_model(path);
  CHECK(loaded.hidden_width == 14);
  CHECK(loaded.hidden_layers == 6);
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    CHECK((m.weights[l] - loaded.weights[l]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((m.biases[l] - loaded.biases[l]).cwiseAbs().maxCoeff() == 0.0);
  }
  std::remove(path.c_str());
}

TEST_CASE("model loading rejects damaged files") {
  const std::string path = "test_model_bad.json";
  {
    std::ofstream out(path);
    out << "{\"schema\": \"pr-bias-mlp/1\", \"input_dim\": 16, \"hid";  // truncated
  }
  CHECK_THROWS_AS(static_cast<void>(load_model(path)), NetError);
  {
    std::ofstream out(path);
    out << "{\"schema\": \"other/9\"}";
  }
  CHECK_THROWS_AS(static_cast<void>(load_model(path)), NetError);
  {
    std::ofstream out(path);
    out << R"({"schema": "pr-bias-mlp/1", "input_dim": 12, "hidden_width": 4,
               "hidden_layers": 1, "layers": []})";
  }
  CHECK_THROWS_AS(static_cast<void>(load_model(path)), NetError);
  std::remove(path.c_str());
  CHECK_THROWS_AS(static_cast<void>(load_model("no_such_file.json")), NetError);
}

TEST_CASE("pseudorange correction subtracts the predicted bias") {
  MeasurementSet epoch;
  epoch.time_ms = 5000;
  EpochFeatures ef;
  ef.time_ms = 5000;
  std::mt19937_64 rng(49);
  std::uniform_real_distribution<double> feat(-1.0, 1.0);
  for (int svid : {3, 9, 17, 28}) {
    SatObservation o;
    o.svid = svid;
    o.pr_m = 2.2e7 + svid;
    epoch.obs.push_back(o);
    ef.svids.push_back(svid);
    FeatureVector f{};
    for (int k = 0; k < kFeatureDim; ++k) f[static_cast<std::size_t>(k)] = feat(rng);
    ef.features.push_back(f);
  }

  // Zero weights with output bias c predict a constant bias c everywhere.
  MlpModel m = zero_model(6, 2);
  m.biases.back()(0) = 2.5;
  const MeasurementSet corrected = correct_pseudoranges(epoch, m, ef);
  REQUIRE(corrected.obs.size() == 4);
  for (std::size_t n = 0; n < corrected.obs.size(); ++n) {
    CHECK(corrected.obs[n].pr_m == epoch.obs[n].pr_m - 2.5);
  }

  // Mismatched features are rejected.
  EpochFeatures wrong = ef;
  wrong.time_ms = 6000;
  CHECK_THROWS_AS(static_cast<void>(correct_pseudoranges(epoch, m, wrong)), NetError);
  wrong = ef;
  std::swap(wrong.svids[0], wrong.svids[1]);
  CHECK_THROWS_AS(static_cast<void>(correct_pseudoranges(epoch, m, wrong)), NetError);
}

TEST_CASE("loss curve csv") {
  std::ostringstream out;
  write_loss_curve_csv(out, {{0.0, 1.5, 1e-2}, {1.0, 1.25, 9e-3}});
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "iter,loss,lr");
  std::getline(in, line);
  CHECK(line.substr(0, 6) == "0,1.5,");
}
