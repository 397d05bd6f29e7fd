#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "deepstop/bias_lab.hpp"
#include "deepstop/bounds.hpp"
#include "deepstop/checkpoint.hpp"
#include "deepstop/config.hpp"
#include "deepstop/csv.hpp"
#include "deepstop/lattice.hpp"
#include "deepstop/trainer.hpp"
#include "deepstop/version.hpp"

namespace fs = std::filesystem;
using namespace deepstop;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string preset;
  std::uint64_t seed = 0;
  int threads = 0;
  std::string out;
  std::string paths;  // "NL" or "NL,NU"
  int fine_grid = 0;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_path, "config file (flat key = value)");
  cmd->add_option("--preset", o.preset, "preset name");
  cmd->add_option("--seed", o.seed, "override the experiment seed");
  cmd->add_option("--threads", o.threads, "worker cap (default 1)");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--paths", o.paths, "override sample counts: N_L or N_L,N_U");
  cmd->add_option("--fine-grid", o.fine_grid, "Brownian substeps J for the upper bound");
}

ExperimentConfig resolve_config(const CommonOpts& o) {
  ExperimentConfig cfg;
  if (!o.config_path.empty()) {
    std::ifstream f(o.config_path);
    if (!f) throw Error(ErrorCode::UnknownPreset, "cannot read config file " + o.config_path);
    std::stringstream ss;
    ss << f.rdbuf();
    if (!o.preset.empty()) {
      const ExperimentConfig base = make_preset(o.preset);
      cfg = parse_config_text(ss.str(), &base);
      if (cfg.preset.empty()) cfg.preset = o.preset;
    } else {
      cfg = parse_config_text(ss.str());
    }
  } else if (!o.preset.empty()) {
    cfg = make_preset(o.preset);
  } else {
    throw Error(ErrorCode::ValidationError, "give --preset or --config");
  }
  if (o.seed) cfg.seed = o.seed;
  if (o.threads) cfg.threads = o.threads;
  if (!o.out.empty()) cfg.out_dir = o.out;
  if (o.fine_grid) cfg.grid.substeps = o.fine_grid;
  if (!o.paths.empty()) {
    const auto comma = o.paths.find(',');
    cfg.lower_samples = std::stoull(o.paths.substr(0, comma));
    if (comma != std::string::npos) cfg.upper_samples = std::stoull(o.paths.substr(comma + 1));
  }
  validate_config(cfg);
  return cfg;
}

std::string provenance(const ExperimentConfig& cfg) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "version=%s config_hash=%016llx seed=%llu", kVersion,
                static_cast<unsigned long long>(config_hash(cfg)),
                static_cast<unsigned long long>(cfg.seed));
  return buf;
}

std::string tag_of(const ExperimentConfig& cfg) { return cfg.preset.empty() ? "config" : cfg.preset; }

fs::path out_file(const ExperimentConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.out_dir);
  return fs::path(cfg.out_dir) / (tag_of(cfg) + "-" + name);
}

void write_bound_row(CsvWriter& csv, const ExperimentConfig& cfg, const BoundEstimate& e, int j,
                     double wall_ms) {
  csv.row({tag_of(cfg), to_string(e.kind), CsvWriter::num(e.value), CsvWriter::num(e.stddev),
           CsvWriter::num(e.halfwidth), std::to_string(e.count), std::to_string(j),
           std::to_string(cfg.seed), CsvWriter::num(wall_ms)});
}

std::vector<std::string> kResultHeader = {"preset", "kind", "estimate",  "std", "halfwidth",
                                          "n",      "J",    "seed",      "wall_ms"};

double run_train(const ExperimentConfig& cfg, const std::string& ckpt_name = "checkpoint.bin") {
  const TrainResult tr = train_all(cfg);
  save_checkpoint(tr.checkpoint, out_file(cfg, ckpt_name).string());
  CsvWriter csv(out_file(cfg, "training.csv").string(),
                {"k", "epoch", "step", "loss", "learning_rate", "wall_ms"}, provenance(cfg));
  for (const auto& r : tr.report)
    csv.row({std::to_string(r.k), std::to_string(r.epoch), std::to_string(r.step),
             CsvWriter::num(r.loss), CsvWriter::num(r.learning_rate), CsvWriter::num(r.wall_ms)});
  if (!tr.note.empty()) std::cout << "note: " << tr.note << "\n";
  std::cout << "trained " << tr.checkpoint.nets.size() << " steps in " << tr.train_seconds << " s -> "
            << out_file(cfg, ckpt_name).string() << "\n";
  return tr.train_seconds;
}

Checkpoint load_or_fail(const ExperimentConfig& cfg, const std::string& explicit_path) {
  const std::string path =
      explicit_path.empty() ? out_file(cfg, "checkpoint.bin").string() : explicit_path;
  if (!fs::exists(path)) throw Error(ErrorCode::IoError, "checkpoint missing: " + path);
  return load_checkpoint(path);
}

int dispatch(const std::string& cmd, const CommonOpts& opts, const std::string& ckpt_path,
             int delta_step, std::size_t delta_points, std::size_t replications,
             std::size_t gradvar_samples) {
  using clock = std::chrono::steady_clock;

  if (cmd == "biaslab") {
    ExperimentConfig cfg;  // bias lab has fixed instances; only out/seed/threads matter
    cfg.preset = "biaslab";
    if (!opts.out.empty()) cfg.out_dir = opts.out;
    if (opts.seed) cfg.seed = opts.seed;
    fs::create_directories(cfg.out_dir);

    const auto inst = ThreeDateInstance::bermudan_put();
    const std::string prov =
        std::string("version=") + kVersion + " seed=" + std::to_string(cfg.seed);
    CsvWriter csv((fs::path(cfg.out_dir) / "bias_report.csv").string(),
                  {"experiment", "eta", "replications", "mean_bias", "halfwidth", "sign_test_p"},
                  prov);
    for (double eta : {0.1, 0.5, 1.0}) {
      const NoisyExpectationOracle oracle{eta, cfg.seed};
      const BiasResult vi = bias_experiment_value_iteration(inst, oracle, replications);
      const BiasResult st = bias_experiment_stopping_time(inst, oracle, replications);
      csv.row({"value-iteration", CsvWriter::num(eta), std::to_string(vi.replications),
               CsvWriter::num(vi.mean_bias), CsvWriter::num(vi.halfwidth),
               CsvWriter::num(vi.sign_test_p)});
      csv.row({"stopping-time", CsvWriter::num(eta), std::to_string(st.replications),
               CsvWriter::num(st.mean_bias), CsvWriter::num(st.halfwidth),
               CsvWriter::num(st.sign_test_p)});
      std::cout << "eta=" << eta << "  value-iteration bias " << vi.mean_bias << " (+-" << vi.halfwidth
                << ")  stopping-time bias " << st.mean_bias << " (+-" << st.halfwidth << ")\n";
    }

    // Gradient-variance study on the one-dimensional put.
    const double s0 = 100.0, strike = 100.0, sigma = 0.25, rate = 0.05;
    const Payoff1D put{false, strike, rate};
    CsvWriter gcsv((fs::path(cfg.out_dir) / "gradient_variance.csv").string(),
                   {"dt", "samples", "moment_ls", "moment_bsde", "ratio"}, prov);
    for (int steps : {25, 50}) {
      const double horizon = 0.5;
      LatticeModel lm{s0, sigma, rate, 0.0, horizon, steps, 2000 / steps};
      auto lat = std::make_shared<LatticeOracle>(lm, put, ExerciseStyle::Bermudan);
      const int k_measure = steps / 25;  // physical time 0.02
      const auto gv = gradient_variance_experiment(s0, sigma, rate, 0.0, put, steps, horizon,
                                                   make_lattice_oracle(lat), k_measure,
                                                   gradvar_samples, cfg.seed);
      gcsv.row({CsvWriter::num(gv.dt), std::to_string(gv.samples), CsvWriter::num(gv.moment_ls),
                CsvWriter::num(gv.moment_bsde), CsvWriter::num(gv.ratio)});
      std::cout << "dt=" << gv.dt << "  E[G_ls^2]=" << gv.moment_ls << "  E[G_bsde^2]=" << gv.moment_bsde
                << "  ratio=" << gv.ratio << "\n";
    }
    return 0;
  }

  ExperimentConfig cfg = resolve_config(opts);

  if (cmd == "simulate") {
    const std::size_t n = std::min<std::size_t>(cfg.lower_samples, 1u << 16);
    const PathEnsemble e = simulate(cfg.model, cfg.grid, n, {cfg.seed, "train"},
                                    cfg.grid.substeps > 1, 0, cfg.threads);
    const auto path = out_file(cfg, "paths.bin");
    dump_paths(e, path.string());
    std::cout << "wrote " << e.count << " paths (" << (e.has_fine ? "fine" : "coarse") << ") -> "
              << path.string() << "\n";
    return 0;
  }
  if (cmd == "train") {
    run_train(cfg);
    return 0;
  }
  if (cmd == "bound-lower") {
    const Checkpoint ckpt = load_or_fail(cfg, ckpt_path);
    const auto t0 = clock::now();
    const LowerBoundResult lb = lower_bound(ckpt, cfg, cfg.lower_samples);
    const double ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    CsvWriter csv(out_file(cfg, "results-lower.csv").string(), kResultHeader, provenance(cfg));
    write_bound_row(csv, cfg, lb.estimate, 1, ms);
    std::cout << "lower " << lb.estimate.value << " (+-" << lb.estimate.halfwidth << ")  n="
              << lb.estimate.count << "  early-stop " << lb.early_stop_fraction << "\n";
    return 0;
  }
  if (cmd == "bound-upper") {
    const Checkpoint ckpt = load_or_fail(cfg, ckpt_path);
    const auto t0 = clock::now();
    const BoundEstimate ub = upper_bound(ckpt, cfg, cfg.upper_samples, cfg.grid.substeps);
    const double ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    CsvWriter csv(out_file(cfg, "results-upper.csv").string(), kResultHeader, provenance(cfg));
    write_bound_row(csv, cfg, ub, cfg.grid.substeps, ms);
    std::cout << "upper " << ub.value << " (+-" << ub.halfwidth << ")  n=" << ub.count << "\n";
    return 0;
  }
  if (cmd == "delta") {
    const Checkpoint ckpt = load_or_fail(cfg, ckpt_path);
    const int k = delta_step > 0 ? delta_step : cfg.grid.steps / 2;
    TimeGrid coarse = cfg.grid;
    coarse.substeps = 1;
    const PathEnsemble e =
        simulate(cfg.model, coarse, delta_points, {cfg.seed, "delta"}, false, 0, cfg.threads);
    Matrix states(delta_points, cfg.model.dim);
    for (std::size_t i = 0; i < delta_points; ++i) {
      const auto x = e.state(k, i);
      std::copy(x.begin(), x.end(), states.row(i).begin());
    }
    const DeltaResult dr = project_delta(ckpt, cfg, k, states);
    CsvWriter csv(out_file(cfg, "delta.csv").string(), {"basket_level", "projected_delta", "region"},
                  provenance(cfg));
    for (std::size_t i = 0; i < delta_points; ++i)
      csv.row({CsvWriter::num(dr.basket_level[i]), CsvWriter::num(dr.delta[i]),
               dr.stopped[i] ? "stop" : "continue"});
    std::cout << "wrote " << delta_points << " delta samples at step " << k << "\n";
    return 0;
  }
  if (cmd == "reference") {
    if (cfg.payoff.kind != PayoffKind::GeometricBasketCall)
      throw Error(ErrorCode::WrongPayoffKind, "the lattice reference covers geometric baskets only");
    const LatticeModel lm = reduce_basket(cfg.model, cfg.grid.horizon, cfg.grid.steps, 40);
    const Payoff1D call{true, cfg.payoff.strike, cfg.payoff.rate};
    const LatticeResult lr = lattice_price(lm, call, ExerciseStyle::Bermudan);
    std::cout << "lattice reference (" << lm.dates << " dates, " << lm.dates * lm.steps_per_date
              << " tree steps): " << lr.price << "\n";
    return 0;
  }
  if (cmd == "run-experiment") {
    const double train_s = run_train(cfg);
    const Checkpoint ckpt = load_or_fail(cfg, "");
    auto t0 = clock::now();
    const LowerBoundResult lb = lower_bound(ckpt, cfg, cfg.lower_samples);
    const double lower_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    t0 = clock::now();
    const BoundEstimate ub = upper_bound(ckpt, cfg, cfg.upper_samples, cfg.grid.substeps);
    const double upper_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    CsvWriter csv(out_file(cfg, "results.csv").string(), kResultHeader, provenance(cfg));
    write_bound_row(csv, cfg, lb.estimate, 1, lower_ms);
    write_bound_row(csv, cfg, ub, cfg.grid.substeps, upper_ms);
    std::printf("%-22s train %7.1fs   lower %.4f (+-%.4f)   upper %.4f (+-%.4f)\n", tag_of(cfg).c_str(),
                train_s, lb.estimate.value, lb.estimate.halfwidth, ub.value, ub.halfwidth);
    return 0;
  }
  throw Error(ErrorCode::ValidationError, "unknown subcommand " + cmd);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Primal-dual optimal stopping solver"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string ckpt_path;
  int delta_step = 0;
  std::size_t delta_points = 500;
  std::size_t replications = 100000;
  std::size_t gradvar_samples = 1000000;

  const std::pair<const char*, const char*> names[] = {
      {"simulate", "simulate paths and write a binary dump"},
      {"train", "train the per-step networks and write a checkpoint"},
      {"bound-lower", "evaluate the stopping-rule lower bound"},
      {"bound-upper", "evaluate the dual upper bound"},
      {"delta", "dump projected hedging ratios for plotting"},
      {"reference", "one-dimensional lattice reference price"},
      {"biaslab", "bias-sign and gradient-variance studies"},
      {"run-experiment", "train plus both bounds, printing a summary row"}};
  for (const auto& [n, desc] : names) {
    CLI::App* sub = app.add_subcommand(n, desc);
    add_common(sub, opts);
    if (std::string(n) == "bound-lower" || std::string(n) == "bound-upper" ||
        std::string(n) == "delta") {
      sub->add_option("--checkpoint", ckpt_path, "trained checkpoint file");
    }
    if (std::string(n) == "delta") {
      sub->add_option("--step", delta_step, "time-step index (default N/2)");
      sub->add_option("--points", delta_points, "sample count");
    }
    if (std::string(n) == "biaslab") {
      sub->add_option("--replications", replications, "bias-experiment replications");
      sub->add_option("--samples", gradvar_samples, "gradient-variance sample count");
    }
  }

  CLI11_PARSE(app, argc, argv);

  try {
    return dispatch(app.get_subcommands().front()->get_name(), opts, ckpt_path, delta_step,
                    delta_points, replications, gradvar_samples);
  } catch (const Error& e) {
    nlohmann::json j = {{"error", to_string(e.code())}, {"message", e.what()}};
    std::cerr << j.dump() << "\n";
    return e.is_config_error() ? 2 : 3;
  } catch (const std::exception& e) {
    nlohmann::json j = {{"error", "Unhandled"}, {"message", e.what()}};
    std::cerr << j.dump() << "\n";
    return 3;
  }
}
