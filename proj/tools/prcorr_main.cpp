#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "prcorr/estimators.hpp"
#include "prcorr/eval.hpp"
#include "prcorr/features.hpp"
#include "prcorr/ingest.hpp"
#include "prcorr/labeling.hpp"
#include "prcorr/net.hpp"
#include "prcorr/simulator.hpp"
#include "prcorr/solver.hpp"

namespace fs = std::filesystem;
using namespace prcorr;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open " + path + " for writing");
  out << content;
}

EstimatorConfig parse_estimator_config(const std::string& path) {
  EstimatorConfig cfg;
  if (path.empty()) return cfg;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("estimator config parse error: " + std::string(e.what()));
  }
  cfg.process_noise_vel = j.value("process_noise_vel", cfg.process_noise_vel);
  cfg.process_noise_clk = j.value("process_noise_clk", cfg.process_noise_clk);
  cfg.mhe_window = j.value("mhe_window", cfg.mhe_window);
  cfg.init_pos_sigma_m = j.value("init_pos_sigma_m", cfg.init_pos_sigma_m);
  return cfg;
}

TrainConfig parse_train_config(const std::string& path) {
  TrainConfig cfg;
  if (path.empty()) return cfg;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("train config parse error: " + std::string(e.what()));
  }
  cfg.lr_start = j.value("lr_start", cfg.lr_start);
  cfg.lr_end = j.value("lr_end", cfg.lr_end);
  cfg.max_iters = j.value("max_iters", cfg.max_iters);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.hidden_width = j.value("hidden_width", cfg.hidden_width);
  cfg.hidden_layers = j.value("hidden_layers", cfg.hidden_layers);
  return cfg;
}

std::vector<TrackPoint> solve_track(const std::vector<MeasurementSet>& epochs,
                                    const std::string& engine,
                                    const EstimatorConfig& cfg) {
  std::vector<TrackPoint> track;
  if (engine == "wls") {
    NavSolution prev;
    for (const auto& e : epochs) {
      const auto [nav, geom] = wls_solve(e, prev);
      prev = nav;
      track.push_back({e.time_ms, ecef_to_geodetic(nav.pos), nav.clock_bias_m});
    }
  } else if (engine == "ekf") {
    for (const auto& s : ekf_forward(epochs, cfg).states()) {
      track.push_back({s.time_ms, ecef_to_geodetic(EcefPoint::from(s.state.head<3>())),
                       s.state(6)});
    }
  } else if (engine == "rts") {
    for (const auto& p : rts_smooth(ekf_forward(epochs, cfg), cfg).points) {
      track.push_back({p.time_ms, ecef_to_geodetic(p.pos), p.clock_bias_m});
    }
  } else if (engine == "mhe") {
    const auto sols = mhe_solve(epochs, cfg.mhe_window, cfg);
    for (std::size_t i = 0; i < sols.size(); ++i) {
      track.push_back({epochs[i].time_ms, ecef_to_geodetic(sols[i].pos),
                       sols[i].clock_bias_m});
    }
  } else {
    throw ParseError("unknown engine: " + engine + " (expected wls|ekf|mhe|rts)");
  }
  return track;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pseudorange correction and positioning toolkit"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic scenario");
  std::string sim_config, sim_out;
  std::int64_t sim_seed = -1;
  sim->add_option("--config", sim_config, "scenario JSON")->required();
  sim->add_option("--out", sim_out, "output directory")->required();
  sim->add_option("--seed", sim_seed, "override scenario seed");

  // solve
  auto* solve = app.add_subcommand("solve", "Run a localization engine over a trace");
  std::string solve_engine, solve_epochs, solve_config, solve_out;
  solve->add_option("--engine", solve_engine, "wls|ekf|mhe|rts")->required();
  solve->add_option("--epochs", solve_epochs, "epochs CSV")->required();
  solve->add_option("--config", solve_config, "estimator config JSON");
  solve->add_option("--out", solve_out, "output track CSV")->required();

  // label
  auto* label = app.add_subcommand("label", "Derive smoothed pseudorange-bias labels");
  std::string label_epochs, label_truth, label_out, label_config;
  int label_discard = 120;
  std::int64_t label_tol = 500;
  label->add_option("--epochs", label_epochs)->required();
  label->add_option("--truth", label_truth)->required();
  label->add_option("--out", label_out, "output directory")->required();
  label->add_option("--config", label_config, "estimator config JSON");
  label->add_option("--discard", label_discard, "smoother warm-up epochs to drop");
  label->add_option("--tolerance-ms", label_tol, "truth alignment tolerance");

  // features
  auto* feats = app.add_subcommand("features", "Extract per-satellite input features");
  std::string feat_epochs, feat_out;
  feats->add_option("--epochs", feat_epochs)->required();
  feats->add_option("--out", feat_out, "output features CSV")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "Train the bias regression model");
  std::string train_features, train_labels, train_config, train_out;
  std::int64_t train_seed = -1;
  train_cmd->add_option("--features", train_features)->required();
  train_cmd->add_option("--labels", train_labels, "labels directory")->required();
  train_cmd->add_option("--config", train_config, "train config JSON");
  train_cmd->add_option("--out", train_out, "output model JSON")->required();
  train_cmd->add_option("--seed", train_seed, "override train seed");

  // correct
  auto* correct = app.add_subcommand("correct", "Subtract predicted bias from pseudoranges");
  std::string corr_epochs, corr_model, corr_out;
  correct->add_option("--epochs", corr_epochs)->required();
  correct->add_option("--model", corr_model)->required();
  correct->add_option("--out", corr_out, "corrected epochs CSV")->required();

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Horizontal errors, percentiles, ECDF");
  std::string eval_track, eval_truth, eval_out;
  eval_cmd->add_option("--track", eval_track)->required();
  eval_cmd->add_option("--truth", eval_truth)->required();
  eval_cmd->add_option("--out", eval_out, "report JSON")->required();

  try {
    app.parse(argc, argv);

    if (*sim) {
      ScenarioConfig cfg = parse_scenario_json(read_file(sim_config));
      if (sim_seed >= 0) cfg.seed = static_cast<std::uint64_t>(sim_seed);
      const SimulatedTrace trace = simulate_trace(cfg);
      fs::create_directories(sim_out);
      {
        std::ofstream out(fs::path(sim_out) / "epochs.csv", std::ios::binary);
        write_epochs_csv(out, trace.epochs);
      }
      {
        std::ofstream out(fs::path(sim_out) / "truth.csv", std::ios::binary);
        write_ground_truth_csv(out, trace.truth);
      }
      {
        std::ofstream out(fs::path(sim_out) / "truth_sidecar.csv", std::ios::binary);
        write_truth_sidecar_csv(out, trace.sidecar);
      }
    } else if (*solve) {
      const auto epochs = load_epochs_csv(solve_epochs);
      const auto cfg = parse_estimator_config(solve_config);
      const auto track = solve_track(epochs, solve_engine, cfg);
      std::ofstream out(solve_out, std::ios::binary);
      if (!out) throw ParseError("cannot open " + solve_out + " for writing");
      write_track_csv(out, track);
    } else if (*label) {
      const auto epochs = load_epochs_csv(label_epochs);
      const auto truth = load_ground_truth_csv(label_truth);
      const auto cfg = parse_estimator_config(label_config);
      const auto aligned = align_truth(epochs, truth, label_tol);
      if (aligned.dropped > 0) {
        std::cerr << "{\"note\":\"dropped " << aligned.dropped
                  << " epochs outside truth tolerance\"}\n";
      }
      std::vector<MeasurementSet> paired;
      for (const auto& p : aligned.pairs) paired.push_back(p.epoch);
      const auto smoothed = rts_smooth(ekf_forward(paired, cfg), cfg);
      const auto records = build_label_dataset(aligned.pairs, smoothed, label_discard);
      fs::create_directories(label_out);
      {
        std::ofstream out(fs::path(label_out) / "labels.csv", std::ios::binary);
        write_label_csv(out, records);
      }
      {
        std::ofstream out(fs::path(label_out) / "h_rows.csv", std::ios::binary);
        write_hrow_csv(out, records);
      }
    } else if (*feats) {
      const auto epochs = load_epochs_csv(feat_epochs);
      const auto features = extract_trace_features(epochs);
      std::ofstream out(feat_out, std::ios::binary);
      if (!out) throw ParseError("cannot open " + feat_out + " for writing");
      write_features_csv(out, features);
    } else if (*train_cmd) {
      std::ifstream fin(train_features, std::ios::binary);
      if (!fin) throw ParseError("cannot open " + train_features);
      const auto features = read_features_csv(fin);
      std::ifstream lin(fs::path(train_labels) / "labels.csv", std::ios::binary);
      std::ifstream hin(fs::path(train_labels) / "h_rows.csv", std::ios::binary);
      if (!lin || !hin) throw ParseError("labels directory must contain labels.csv and h_rows.csv");
      const auto records = read_label_dataset(lin, hin);
      // Only labeled epochs enter training.
      std::vector<EpochFeatures> labeled;
      {
        std::set<std::int64_t> times;
        for (const auto& r : records) times.insert(r.time_ms);
        for (const auto& ef : features) {
          if (times.count(ef.time_ms)) labeled.push_back(ef);
        }
      }
      const auto samples = assemble_samples(labeled, records);
      TrainConfig cfg = parse_train_config(train_config);
      if (train_seed >= 0) cfg.seed = static_cast<std::uint64_t>(train_seed);
      const auto result = prcorr::train(samples, cfg);
      save_model(result.model, train_out);
      std::ofstream curve(train_out + ".curve.csv", std::ios::binary);
      write_loss_curve_csv(curve, result.curve);
    } else if (*correct) {
      const auto epochs = load_epochs_csv(corr_epochs);
      const auto model = load_model(corr_model);
      const auto features = extract_trace_features(epochs);
      std::vector<MeasurementSet> corrected;
      corrected.reserve(epochs.size());
      for (std::size_t i = 0; i < epochs.size(); ++i) {
        corrected.push_back(correct_pseudoranges(epochs[i], model, features[i]));
      }
      std::ofstream out(corr_out, std::ios::binary);
      if (!out) throw ParseError("cannot open " + corr_out + " for writing");
      write_epochs_csv(out, corrected);
    } else if (*eval_cmd) {
      std::ifstream tin(eval_track, std::ios::binary);
      if (!tin) throw ParseError("cannot open " + eval_track);
      const auto track = parse_track_csv(tin);
      const auto truth = load_ground_truth_csv(eval_truth);
      const auto report = evaluate(track, truth);
      write_file(eval_out, report_json(report));
    }
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return 0;  // --help
    std::cerr << "{\"error\":" << nlohmann::json(std::string(e.what())).dump() << "}\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "{\"error\":" << nlohmann::json(std::string(e.what())).dump() << "}\n";
    return 2;
  }
  return 0;
}
