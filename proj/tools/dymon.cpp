// dymon: command-line pipelines for simulating systems, building transition
// datasets, training models, generating chains and evaluating results.
//
// Exit codes: 0 success, 2 config/validation, 3 I/O, 4 numeric failure,
// 5 assertion failure.

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dymon/benchmarks.hpp"
#include "dymon/config.hpp"
#include "dymon/csv.hpp"
#include "dymon/matrix.hpp"
#include "dymon/mmd.hpp"
#include "dymon/model.hpp"
#include "dymon/systems.hpp"
#include "dymon/train.hpp"
#include "dymon/transitions.hpp"

namespace {

using namespace dymon;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitAssert = 5;

struct CliArgs {
  std::string subcommand;
  std::string config_path;
  std::optional<double> assert_below;
  std::set<std::string> skip;
  std::string method = "backprop";
};

ExperimentConfig load_config(const std::string& path) {
  return ExperimentConfig::parse(detail::read_text_file(path));
}

std::vector<double> column(const Matrix& m, std::size_t col) {
  std::vector<double> out(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) out[i] = m(i, col);
  return out;
}

const std::set<std::string> kCommonKeys = {"seed"};

std::set<std::string> with_common(std::set<std::string> keys) {
  keys.insert(kCommonKeys.begin(), kCommonKeys.end());
  return keys;
}

int cmd_simulate(const ExperimentConfig& cfg) {
  cfg.validate_keys(
      with_common({"system", "output", "steps", "dt", "theta0", "omega0",
                   "theta1", "theta2", "omega1", "omega2", "g", "length",
                   "length1", "length2", "mass1", "mass2", "n", "proposal_std",
                   "burn_in", "image_px", "frames"}),
      {"system", "output"});
  const std::string system = cfg.get_string("system");
  const std::uint64_t seed = cfg.get_count("seed", 0);
  Trajectory traj;
  if (system == "pendulum") {
    traj = simulate_pendulum(cfg.get_double("theta0", 2.0),
                             cfg.get_double("omega0", 0.0),
                             cfg.get_double("g", 9.81),
                             cfg.get_double("length", 1.0),
                             cfg.get_double("dt", 0.01),
                             cfg.get_count("steps", 1000));
  } else if (system == "double_pendulum") {
    DoublePendulumParams p;
    p.m1 = cfg.get_double("mass1", 1.0);
    p.m2 = cfg.get_double("mass2", 1.0);
    p.l1 = cfg.get_double("length1", 1.0);
    p.l2 = cfg.get_double("length2", 1.0);
    p.g = cfg.get_double("g", 9.81);
    traj = simulate_double_pendulum(cfg.get_double("theta1", 2.0),
                                    cfg.get_double("theta2", 1.0),
                                    cfg.get_double("omega1", 0.0),
                                    cfg.get_double("omega2", 0.0), p,
                                    cfg.get_double("dt", 0.005),
                                    cfg.get_count("steps", 1000));
  } else if (system == "gmm_mcmc") {
    traj = sample_gmm_metropolis(GmmSpec::three_mode(),
                                 cfg.get_count("n", 50000),
                                 cfg.get_double("proposal_std", 2.0),
                                 cfg.get_count("burn_in", 1000), seed);
  } else if (system == "rotating") {
    traj = generate_rotating_sequence(cfg.get_count("image_px", 16),
                                      cfg.get_count("frames", 400));
  } else {
    throw config_error("simulate: unknown system '" + system +
                       "', valid options: pendulum, double_pendulum, "
                       "gmm_mcmc, rotating");
  }
  write_trajectory_csv(traj, cfg.get_string("output"));
  std::cout << "simulate: system=" << system << " length="
            << traj.states.rows() << " dims=" << traj.states.cols()
            << " seed=" << seed << "\n";
  return kExitOk;
}

int cmd_build_transitions(const ExperimentConfig& cfg) {
  cfg.validate_keys(
      with_common({"mode", "input", "labels", "output", "step_size",
                   "step_jitter", "order", "neighbor_k", "sigma", "knn_k",
                   "smoothing_k"}),
      {"input", "output"});
  const std::string mode = cfg.get_string("mode", "trajectory");
  TransitionDataset ds;
  if (mode == "trajectory") {
    const Trajectory traj = read_trajectory_csv(cfg.get_string("input"));
    StepSpec step;
    step.mean = cfg.get_count("step_size", 1);
    step.jitter = cfg.get_count("step_jitter", 0);
    ds = transitions_from_trajectory(traj, step, cfg.get_count("order", 1),
                                     cfg.get_count("seed", 0));
    ds = augment_targets_with_neighbors(ds, cfg.get_count("neighbor_k", 0));
  } else if (mode == "directed") {
    TimePointCloud cloud;
    cloud.points = read_trajectory_csv(cfg.get_string("input")).states;
    const Matrix labels =
        read_trajectory_csv(cfg.get_string("labels")).states;
    if (labels.cols() != 1 || labels.rows() != cloud.points.rows())
      throw config_error("build-transitions: labels must be a 1-column file "
                         "matching the input point count");
    cloud.time_labels = column(labels, 0);
    ds = directed_diffusion_transitions(cloud, cfg.get_double("sigma", 1.0),
                                        cfg.get_count("knn_k", 10),
                                        cfg.get_count("smoothing_k", 5));
  } else {
    throw config_error("build-transitions: unknown mode '" + mode +
                       "', valid options: trajectory, directed");
  }
  write_transitions_csv(ds, cfg.get_string("output"));
  double mean_targets = 0.0;
  for (const auto& g : ds.groups)
    mean_targets += static_cast<double>(g.targets.rows());
  mean_targets /= static_cast<double>(ds.groups.size());
  std::cout << "build-transitions: groups=" << ds.groups.size()
            << " mean_targets=" << mean_targets << "\n";
  return kExitOk;
}

ArchSpec arch_spec_from_config(const ExperimentConfig& cfg) {
  ArchSpec spec;
  const long long arch = cfg.get_int("arch", 1);
  if (arch < 1 || arch > 3)
    throw config_error("train: arch must be 1, 2 or 3");
  spec.arch = static_cast<Architecture>(arch);
  spec.transition_hidden = cfg.get_count_list("hidden");
  if (spec.arch != Architecture::ambient) {
    spec.encoder_hidden = cfg.get_count_list("encoder_hidden");
    spec.latent_dim = cfg.get_count("latent_dim");
  }
  if (cfg.has("noise_dim"))
    spec.noise_dim = cfg.get_count("noise_dim");
  return spec;
}

TrainConfig train_config_from_config(const ExperimentConfig& cfg) {
  TrainConfig tc;
  tc.epochs = cfg.get_count("epochs");
  if (tc.epochs == 0) throw config_error("train: epochs must be >= 1");
  tc.batch_groups = cfg.get_count("batch_groups", 32);
  tc.m_generated = cfg.get_count("m_generated", 0);
  tc.corruption_std = cfg.get_double("corruption_std", 0.05);
  tc.learning_rate = cfg.get_double("learning_rate", 1e-3);
  tc.seed = cfg.get_count("seed", 0);
  return tc;
}

int cmd_train(const ExperimentConfig& cfg) {
  cfg.validate_keys(
      with_common({"transitions", "output_model", "output_loss", "arch",
                   "hidden", "encoder_hidden", "latent_dim", "noise_dim",
                   "epochs", "batch_groups", "m_generated", "corruption_std",
                   "learning_rate", "max_groups"}),
      {"transitions", "output_model", "epochs", "hidden"});
  TransitionDataset ds = read_transitions_csv(cfg.get_string("transitions"));
  ds = subsample_groups(ds, cfg.get_count("max_groups", 0));
  const auto [model, curve] =
      train_dymon(ds, arch_spec_from_config(cfg), train_config_from_config(cfg));
  save_model(model, cfg.get_string("output_model"));
  if (cfg.has("output_loss")) {
    std::ostringstream os;
    os << "epoch,mean_mmd2,seconds\n";
    for (std::size_t e = 0; e < curve.mean_mmd2.size(); ++e)
      os << e << ',' << detail::fmt17(curve.mean_mmd2[e]) << ','
         << detail::fmt17(curve.epoch_seconds[e]) << '\n';
    detail::write_text_file(cfg.get_string("output_loss"), os.str());
  }
  std::cout << "train: epochs=" << curve.mean_mmd2.size()
            << " final_loss=" << curve.mean_mmd2.back() << "\n";
  return kExitOk;
}

Matrix init_history_from_config(const ExperimentConfig& cfg,
                                const DymonModel& model) {
  if (cfg.has("init")) {
    // inline: order*d comma-separated values, oldest state first
    const std::string v = cfg.get_string("init");
    std::vector<double> vals;
    std::string cur;
    std::istringstream iss(v);
    while (std::getline(iss, cur, ','))
      vals.push_back(detail::parse_field_double(cur, 0));
    if (vals.size() != model.order * model.state_dim)
      throw config_error("generate: init must have order*state_dim values");
    return Matrix(model.order, model.state_dim, std::move(vals));
  }
  if (cfg.has("init_from")) {
    const Trajectory traj = read_trajectory_csv(cfg.get_string("init_from"));
    const std::size_t idx = cfg.get_count("init_index", 0);
    if (idx + model.order > traj.states.rows())
      throw config_error("generate: init_index out of range");
    Matrix hist(model.order, model.state_dim);
    for (std::size_t h = 0; h < model.order; ++h)
      for (std::size_t k = 0; k < model.state_dim; ++k)
        hist(h, k) = traj.states(idx + h, k);
    return hist;
  }
  throw config_error("generate: need 'init' or 'init_from'");
}

int cmd_generate(const ExperimentConfig& cfg) {
  cfg.validate_keys(
      with_common({"model", "output", "steps", "init", "init_from",
                   "init_index"}),
      {"model", "output", "steps"});
  const DymonModel model = load_model(cfg.get_string("model"));
  const Matrix hist = init_history_from_config(cfg, model);
  Rng rng(cfg.get_count("seed", 0));
  const ChainResult res =
      generate_chain(model, hist, cfg.get_count("steps"), rng);
  write_trajectory_csv(res.trajectory, cfg.get_string("output"));
  std::cout << "generate: length=" << res.trajectory.states.rows()
            << (res.truncated ? " (truncated on non-finite state)" : "")
            << "\n";
  return kExitOk;
}

int cmd_eval(const ExperimentConfig& cfg, std::optional<double> assert_below) {
  cfg.validate_keys(
      with_common({"metric", "a", "b", "output", "model"}),
      {"metric", "a"});
  const std::string metric = cfg.get_string("metric");
  std::ostringstream os;
  os << "metric,value\n";
  double primary_value = 0.0;
  if (metric == "emd") {
    const Matrix a = read_trajectory_csv(cfg.get_string("a")).states;
    const Matrix b = read_trajectory_csv(cfg.get_string("b")).states;
    if (a.cols() != 1 || b.cols() != 1)
      throw config_error("eval: emd needs 1-D sample files");
    primary_value =
        emd_1d(column(a, 0), column(b, 0), cfg.get_count("seed", 0));
    os << "emd," << detail::fmt17(primary_value) << '\n';
  } else if (metric == "mse") {
    const Matrix a = read_trajectory_csv(cfg.get_string("a")).states;
    const Matrix b = read_trajectory_csv(cfg.get_string("b")).states;
    primary_value = mse(a, b);
    os << "mse," << detail::fmt17(primary_value) << '\n';
  } else if (metric == "cycle") {
    Matrix latent = read_trajectory_csv(cfg.get_string("a")).states;
    if (cfg.has("model")) {
      // encode ambient states through the model's autoencoder first
      const DymonModel model = load_model(cfg.get_string("model"));
      if (!model.has_autoencoder())
        throw config_error("eval: cycle with 'model' needs architecture 2/3");
      latent = mlp_forward(*model.encoder,
                           model.standardizer.standardize(latent));
    }
    const CycleReport rep = latent_cycle_report(latent);
    os << "is_single_cycle," << (rep.is_single_cycle ? 1 : 0) << '\n';
    os << "residual," << detail::fmt17(rep.residual) << '\n';
    for (std::size_t deg = 0; deg < rep.degree_histogram.size(); ++deg)
      os << "degree" << deg << ',' << rep.degree_histogram[deg] << '\n';
    primary_value = rep.residual;
  } else {
    throw config_error("eval: unknown metric '" + metric +
                       "', valid options: emd, mse, cycle");
  }
  if (cfg.has("output"))
    detail::write_text_file(cfg.get_string("output"), os.str());
  std::cout << os.str();
  if (assert_below && !(primary_value < *assert_below)) {
    std::cerr << "eval: value " << primary_value << " not below "
              << *assert_below << "\n";
    return kExitAssert;
  }
  return kExitOk;
}

int cmd_jacobian(const ExperimentConfig& cfg, const std::string& method) {
  cfg.validate_keys(
      with_common({"model", "input", "indices", "output", "fd_step"}),
      {"model", "input", "output"});
  const DymonModel model = load_model(cfg.get_string("model"));
  const Trajectory traj = read_trajectory_csv(cfg.get_string("input"));
  std::vector<std::size_t> indices;
  if (cfg.has("indices")) {
    for (std::size_t v : cfg.get_count_list("indices")) indices.push_back(v);
  } else {
    indices.push_back(model.order - 1);
  }
  const std::size_t d = model.state_dim;
  std::ostringstream os;
  os << "point,row";
  for (std::size_t k = 0; k < d; ++k) os << ",c" << k;
  os << '\n';
  for (std::size_t pi = 0; pi < indices.size(); ++pi) {
    const std::size_t idx = indices[pi];
    if (idx + 1 < model.order || idx >= traj.states.rows())
      throw config_error("jacobian: index " + std::to_string(idx) +
                         " out of range for model order");
    Matrix hist(model.order, d);
    for (std::size_t h = 0; h < model.order; ++h)
      for (std::size_t k = 0; k < d; ++k)
        hist(h, k) = traj.states(idx - (model.order - 1) + h, k);
    Matrix jac;
    if (method == "fd") {
      // central finite differences on the velocity, in standardized units
      const double h_std = cfg.get_double("fd_step", 1e-5);
      jac = Matrix(d, d);
      const std::vector<double> eps(model.noise_dim, 0.0);
      for (std::size_t j = 0; j < d; ++j) {
        const double h_amb = h_std * model.standardizer.scale[j];
        Matrix hp = hist, hm = hist;
        hp(model.order - 1, j) += h_amb;
        hm(model.order - 1, j) -= h_amb;
        const auto fp = dymon_forward(model, hp, eps);
        const auto fm = dymon_forward(model, hm, eps);
        for (std::size_t i = 0; i < d; ++i) {
          const double dnext = (fp[i] - fm[i]) / (2.0 * h_amb);
          jac(i, j) = dnext - (i == j ? 1.0 : 0.0);
        }
      }
    } else {
      jac = jacobian(model, hist);
    }
    for (std::size_t i = 0; i < d; ++i) {
      os << idx << ',' << i;
      for (std::size_t k = 0; k < d; ++k)
        os << ',' << detail::fmt17(jac(i, k));
      os << '\n';
    }
  }
  detail::write_text_file(cfg.get_string("output"), os.str());
  std::cout << "jacobian: points=" << indices.size() << " dim=" << d << "\n";
  return kExitOk;
}

int cmd_compare_gmm(const ExperimentConfig& cfg,
                    const std::set<std::string>& skip) {
  cfg.validate_keys(
      with_common({"output", "n_train", "n_eval", "epochs", "max_groups",
                   "batch_groups", "neighbor_k", "step_size", "step_jitter",
                   "hmm_states", "hmm_iters", "kf_iters", "learning_rate"}),
      {"output"});
  const std::uint64_t seed = cfg.get_count("seed", 0);
  const std::size_t n_train = cfg.get_count("n_train", 50000);
  const std::size_t n_eval = cfg.get_count("n_eval", 5000);
  const GmmSpec spec = GmmSpec::three_mode();

  const Trajectory train_chain =
      sample_gmm_metropolis(spec, n_train, 2.0, 1000, seed);
  const Trajectory held_out =
      sample_gmm_metropolis(spec, n_eval, 2.0, 1000, seed + 1);
  const std::vector<double> reference = column(held_out.states, 0);

  std::ostringstream os;
  os << "method,emd,train_seconds,sample_seconds\n";
  auto bench = [&](const std::string& name, auto&& train_fn,
                   auto&& sample_fn) {
    if (skip.count(name)) return;
    const auto t0 = std::chrono::steady_clock::now();
    auto fitted = train_fn();
    const auto t1 = std::chrono::steady_clock::now();
    const std::vector<double> samples = sample_fn(fitted);
    const auto t2 = std::chrono::steady_clock::now();
    const double emd = emd_1d(samples, reference, seed + 2);
    os << name << ',' << detail::fmt17(emd) << ','
       << detail::fmt17(std::chrono::duration<double>(t1 - t0).count()) << ','
       << detail::fmt17(std::chrono::duration<double>(t2 - t1).count())
       << '\n';
  };

  bench(
      "dymon",
      [&]() {
        StepSpec step;
        step.mean = cfg.get_count("step_size", 20);
        step.jitter = cfg.get_count("step_jitter", 10);
        TransitionDataset ds =
            transitions_from_trajectory(train_chain, step, 1, seed);
        ds = augment_targets_with_neighbors(ds,
                                            cfg.get_count("neighbor_k", 5));
        ds = subsample_groups(ds, cfg.get_count("max_groups", 1000));
        ArchSpec arch;
        arch.transition_hidden = {64, 64, 64};
        arch.noise_dim = 1;
        TrainConfig tc;
        tc.epochs = cfg.get_count("epochs", 300);
        tc.batch_groups = cfg.get_count("batch_groups", 25);
        tc.learning_rate = cfg.get_double("learning_rate", 3e-3);
        tc.seed = seed;
        return train_dymon(ds, arch, tc).first;
      },
      [&](const DymonModel& model) {
        Matrix init(1, 1);
        init(0, 0) = train_chain.states(0, 0);
        Rng rng(seed + 3);
        const ChainResult chain = generate_chain(model, init, n_eval, rng);
        std::vector<double> out = column(chain.trajectory.states, 0);
        out.erase(out.begin());  // drop the init state
        return out;
      });
  bench(
      "hmm",
      [&]() {
        return hmm_fit(column(train_chain.states, 0),
                       cfg.get_count("hmm_states", 4),
                       cfg.get_count("hmm_iters", 50), seed);
      },
      [&](const GaussianHmm& hmm) { return hmm_sample(hmm, n_eval, seed + 3); });
  bench(
      "kf",
      [&]() {
        // EM cost is quadratic in chain length; a deterministic subsample
        // of the training chain is plenty for a linear-Gaussian fit
        const std::size_t cap = 5000;
        const std::size_t n = std::min<std::size_t>(cap, n_train);
        Matrix data(n, 1);
        for (std::size_t i = 0; i < n; ++i)
          data(i, 0) = train_chain.states(i * n_train / n, 0);
        return kalman_fit_em(data, 1, cfg.get_count("kf_iters", 20));
      },
      [&](const KalmanModel& km) {
        return column(kalman_sample(km, n_eval, seed + 3), 0);
      });

  detail::write_text_file(cfg.get_string("output"), os.str());
  std::cout << os.str();
  return kExitOk;
}

int run(const CliArgs& args) {
  if (const char* threads = std::getenv("DYMON_THREADS")) {
    try {
      if (std::stoll(threads) < 1) throw std::invalid_argument("bad");
    } catch (const std::exception&) {
      throw config_error("DYMON_THREADS must be a positive integer");
    }
  }
  const ExperimentConfig cfg = load_config(args.config_path);
  if (args.subcommand == "simulate") return cmd_simulate(cfg);
  if (args.subcommand == "build-transitions") return cmd_build_transitions(cfg);
  if (args.subcommand == "train") return cmd_train(cfg);
  if (args.subcommand == "generate") return cmd_generate(cfg);
  if (args.subcommand == "eval") return cmd_eval(cfg, args.assert_below);
  if (args.subcommand == "jacobian") return cmd_jacobian(cfg, args.method);
  if (args.subcommand == "compare-gmm") return cmd_compare_gmm(cfg, args.skip);
  throw config_error("unknown subcommand '" + args.subcommand +
                     "', valid: simulate, build-transitions, train, generate, "
                     "eval, jacobian, compare-gmm");
}

}  // namespace

int main(int argc, char** argv) {
  CliArgs args;
  if (argc < 3) {
    std::cerr << "usage: dymon <subcommand> <config> [--assert-below X] "
                 "[--skip NAME] [--method backprop|fd]\n";
    return kExitConfig;
  }
  args.subcommand = argv[1];
  args.config_path = argv[2];
  for (int i = 3; i < argc; ++i) {
    const std::string flag = argv[i];
    auto next = [&]() -> std::string {
      if (i + 1 >= argc) {
        std::cerr << "dymon: flag " << flag << " needs a value\n";
        std::exit(kExitConfig);
      }
      return argv[++i];
    };
    if (flag == "--assert-below") {
      args.assert_below = std::stod(next());
    } else if (flag == "--skip") {
      args.skip.insert(next());
    } else if (flag == "--method") {
      args.method = next();
    } else {
      std::cerr << "dymon: unknown flag " << flag << "\n";
      return kExitConfig;
    }
  }
  try {
    return run(args);
  } catch (const dymon::config_error& e) {
    std::cerr << "dymon: " << e.what() << "\n";
    return kExitConfig;
  } catch (const dymon::dimension_error& e) {
    std::cerr << "dymon: " << e.what() << "\n";
    return kExitConfig;
  } catch (const dymon::parse_error& e) {
    std::cerr << "dymon: " << e.what() << "\n";
    return kExitConfig;
  } catch (const dymon::io_error& e) {
    std::cerr << "dymon: " << e.what() << "\n";
    return kExitIo;
  } catch (const dymon::numeric_error& e) {
    std::cerr << "dymon: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "dymon: " << e.what() << "\n";
    return kExitNumeric;
  }
}
