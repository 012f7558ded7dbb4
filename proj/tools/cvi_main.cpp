// cvi: learns and runs convex inference of univariate marginals.
//
// Exit codes: 0 success, 1 computational failure, 2 usage error.
// No environment variables are consumed; all behavior comes from flags and
// files. Metrics go to stdout as machine-parseable key=value lines.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "cvi/data_bench.hpp"
#include "cvi/loss.hpp"
#include "cvi/model.hpp"
#include "cvi/model_io.hpp"
#include "cvi/oracle.hpp"
#include "cvi/polytope.hpp"
#include "cvi/rng.hpp"
#include "cvi/sensitivity.hpp"
#include "cvi/solver.hpp"
#include "cvi/trainer.hpp"

namespace {

using namespace cvi;

ImageSet load_images_flag(const std::string& path, const std::string& format_flag,
                          double threshold) {
  const ImageFormat fmt =
      format_flag.empty()
          ? image_format_from_path(path)
          : (format_flag == "idx"   ? ImageFormat::idx
             : format_flag == "pbm" ? ImageFormat::pbm
             : format_flag == "csv" ? ImageFormat::csv
                                    : throw CLI::ValidationError("--format", "unknown format"));
  return load_images(path, fmt, threshold);
}

void print_kv(const std::string& key, double value) {
  std::printf("%s=%.17g\n", key.c_str(), value);
}

void print_kv(const std::string& key, const std::string& value) {
  std::printf("%s=%s\n", key.c_str(), value.c_str());
}

// Writes via a temporary name and renames, so no partial file survives.
void write_text_file_atomic(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << contents;
    if (!out) throw std::runtime_error("write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw std::runtime_error("cannot rename " + tmp + " to " + path);
  }
}

struct TrainFlags {
  std::string data, format, out = "model.txt", trace;
  double noise_rate = 0.0, inner_tol = 1e-10, binarize_threshold = 0.5;
  std::string loss;
  std::uint64_t seed = 0;
  int stage1_iters = 100, stage2_iters = 100, workers = 0, lbfgs_memory = 10;
};

int cmd_train(const TrainFlags& fl) {
  const ImageSet clean = load_images_flag(fl.data, fl.format, fl.binarize_threshold);
  if (clean.count() == 0) throw std::runtime_error("dataset is empty: " + fl.data);
  const ImageSet noisy = corrupt(clean, fl.noise_rate, fl.seed);

  TrainConfig config;
  config.loss = loss_kind_from_string(fl.loss);
  config.stage1_iters = fl.stage1_iters;
  config.stage2_iters = fl.stage2_iters;
  config.inner_tol = fl.inner_tol;
  config.lbfgs_memory = fl.lbfgs_memory;
  config.seed = fl.seed;
  config.workers = fl.workers;

  const RegionGraph graph = build_grid_model(clean.height, clean.width, 2, 2);
  const ConstraintSystem system = build_constraints(graph);
  const std::vector<Sample> samples = make_denoising_samples(clean, noisy);

  auto [params, trace] = train(samples, graph, system, config);

  save_model_file(graph, params, fl.out);
  const std::string trace_path = fl.trace.empty() ? fl.out + ".trace.csv" : fl.trace;
  {
    std::ostringstream ss;
    write_trace_csv(trace, ss);
    write_text_file_atomic(trace_path, ss.str());
  }
  std::printf("trained %zu samples on a %dx%d grid (%zu outer iterations)\n", samples.size(),
              clean.height, clean.width, trace.rows.size());
  print_kv("model", fl.out);
  print_kv("trace", trace_path);
  print_kv("samples", static_cast<double>(samples.size()));
  print_kv("initial_risk", trace.initial_risk);
  print_kv("final_risk", trace.final_risk);
  print_kv("outer_iterations", static_cast<double>(trace.rows.size()));
  print_kv("stop_reason", trace.stop_reason);
  return 0;
}

struct InferFlags {
  std::string model, input, format, out = "beliefs.csv";
  double tol = 1e-10, binarize_threshold = 0.5;
};

int cmd_infer(const InferFlags& fl) {
  auto [graph, params] = load_model_file(fl.model);
  const ImageSet images = load_images_flag(fl.input, fl.format, fl.binarize_threshold);
  if (images.count() == 0) throw std::runtime_error("input holds no image");
  if (images.pixels() != graph.num_observed)
    throw std::runtime_error("input image dimensions do not match the model grid");
  const ConstraintSystem system = build_constraints(graph);

  bool all_converged = true;
  std::vector<std::vector<double>> dumps;
  double worst_residual = 0.0;
  int total_iterations = 0;
  for (int n = 0; n < images.count(); ++n) {
    ObservedAssignment y(images.images[n].begin(), images.images[n].end());
    InferenceResult res = infer(graph, params, system, y, fl.tol);
    all_converged = all_converged && res.converged;
    worst_residual = std::max(worst_residual, res.kkt_residual);
    total_iterations += res.iterations;
    std::vector<double> probs(graph.num_hidden);
    for (int i = 0; i < graph.num_hidden; ++i)
      probs[i] = res.beliefs[graph.belief_offsets[graph.singleton_of_hidden[i]] + 1];
    dumps.push_back(std::move(probs));
  }
  write_belief_dump(dumps, images.height, images.width, fl.out, all_converged);
  std::printf("inferred %d image(s) on a %dx%d grid\n", images.count(), images.height,
              images.width);
  print_kv("beliefs", fl.out);
  print_kv("kkt_residual", worst_residual);
  print_kv("iterations", static_cast<double>(total_iterations));
  print_kv("converged", all_converged ? "true" : "false");
  if (!all_converged) {
    std::fprintf(stderr, "inference did not converge (worst KKT residual %.3g)\n",
                 worst_residual);
    return 1;
  }
  return 0;
}

struct EvalFlags {
  std::string model, data, format, out;
  double noise_rate = 0.0, tol = 1e-10, binarize_threshold = 0.5;
  std::uint64_t seed = 0;
  int workers = 0;
};

int cmd_eval(const EvalFlags& fl) {
  auto [graph, params] = load_model_file(fl.model);
  const ImageSet clean = load_images_flag(fl.data, fl.format, fl.binarize_threshold);
  if (clean.pixels() != graph.num_observed)
    throw std::runtime_error("data image dimensions do not match the model grid");
  const ImageSet noisy = corrupt(clean, fl.noise_rate, fl.seed);
  const ConstraintSystem system = build_constraints(graph);
  const std::vector<Sample> samples = make_denoising_samples(clean, noisy);
  const MetricRecord m = evaluate(samples, graph, system, params, fl.tol, fl.workers);

  std::printf("per-pixel metrics over %ld masked pixels\n", m.masked_count);
  print_kv("classif", m.classification);
  print_kv("regress", m.regression);
  print_kv("l_log", m.l_log);
  print_kv("l_quad", m.l_quad);
  if (!fl.out.empty()) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "method,classif,regress,l_log,l_quad\neval,%.17g,%.17g,%.17g,%.17g\n",
                  m.classification, m.regression, m.l_log, m.l_quad);
    write_text_file_atomic(fl.out, buf);
    print_kv("report", fl.out);
  }
  return 0;
}

struct GradcheckFlags {
  std::string grid = "3x3";
  std::uint64_t seed = 0;
  double h = 1e-5, inner_tol = 1e-12, threshold = 1e-4;
};

int cmd_gradcheck(const GradcheckFlags& fl) {
  int height = 0, width = 0;
  if (std::sscanf(fl.grid.c_str(), "%dx%d", &height, &width) != 2 || height < 1 || width < 1)
    throw CLI::ValidationError("--grid", "expected HxW, e.g. 3x3");

  const RegionGraph graph = build_grid_model(height, width, 2, 2);
  const ConstraintSystem system = build_constraints(graph);
  ParameterSet params = init_parameters(graph);
  SeededRng rng(fl.seed);
  Eigen::VectorXd theta = params.to_flat();
  for (int j = 0; j < params.num_params(); ++j) {
    const auto a = params.decode(j);
    theta[j] = params.family[a.f].positive_weights ? rng.uniform(-1.0, 1.0)
                                                   : rng.uniform(-2.0, 2.0);
  }
  params.from_flat(theta);
  ObservedAssignment y(graph.num_observed);
  for (int& v : y) v = rng.coin();

  InferenceResult res = infer(graph, params, system, y, fl.inner_tol);
  if (!res.converged) throw std::runtime_error("inference did not converge");
  SensitivitySolver sens(res, graph, params, system, y);
  const std::vector<Eigen::VectorXd> fd =
      oracle::finite_diff_belief_jacobian(graph, params, system, y, fl.h, fl.inner_tol);

  double scale = 1.0;
  for (const auto& col : fd) scale = std::max(scale, col.cwiseAbs().maxCoeff());
  double worst = 0.0;
  int worst_param = -1;
  for (int j = 0; j < params.num_params(); ++j) {
    const double dis = (sens.dbeliefs_dtheta(j) - fd[j]).cwiseAbs().maxCoeff() / scale;
    if (dis > worst) {
      worst = dis;
      worst_param = j;
    }
  }
  std::printf("compared implicit and finite-difference belief gradients on a %dx%d grid\n",
              height, width);
  print_kv("parameters", static_cast<double>(params.num_params()));
  print_kv("h", fl.h);
  print_kv("max_rel_disagreement", worst);
  print_kv("worst_parameter", static_cast<double>(worst_param));
  print_kv("threshold", fl.threshold);
  if (worst > fl.threshold) {
    std::fprintf(stderr, "gradient check failed: %.3g > %.3g\n", worst, fl.threshold);
    return 1;
  }
  return 0;
}

int cmd_selftest(bool inject_fault) {
  int failures = 0;
  auto report = [&failures](const std::string& name, bool ok) {
    std::printf("check=%s status=%s\n", name.c_str(), ok ? "pass" : "fail");
    if (!ok) ++failures;
  };

  report("claim1_toy", oracle::claim1_toy_check());

  // Oracle exactness on the 2-node single-clique model.
  {
    const RegionGraph graph = build_grid_model(1, 2, 2, 2);
    const ConstraintSystem system = build_constraints(graph);
    ParameterSet params = init_parameters(graph);
    SeededRng rng(7);
    oracle::EnergyTableModel etm;
    etm.num_hidden = 2;
    etm.num_observed = 2;
    etm.cliques.push_back({{0, 1}, {0, 1}, Eigen::MatrixXd(4, 4)});
    for (int xc = 0; xc < 4; ++xc)
      for (int yc = 0; yc < 4; ++yc) etm.cliques[0].energy(xc, yc) = rng.uniform(-2.0, 2.0);
    // edge linear weights = -E (Eq-24-style average energy), tiny node entropy
    for (int xc = 0; xc < 4; ++xc)
      for (int yc = 0; yc < 4; ++yc)
        params.raw[kLinearFunction][1][xc * 4 + yc] = -etm.cliques[0].energy(xc, yc);
    params.raw[kEntropyFunction][0].setConstant(std::log(1e-6));
    bool ok = true;
    for (int y1 = 0; y1 < 2 && ok; ++y1)
      for (int y2 = 0; y2 < 2 && ok; ++y2) {
        const ObservedAssignment y = {y1, y2};
        InferenceResult res = infer(graph, params, system, y);
        const auto truth = oracle::brute_force_conditional_marginals(etm, y);
        if (!res.converged) ok = false;
        for (int i = 0; i < 2 && ok; ++i)
          for (int x = 0; x < 2; ++x) {
            const double bi = res.beliefs[graph.belief_offsets[graph.singleton_of_hidden[i]] + x];
            if (std::abs(bi - truth[i][x]) > 1e-4) ok = false;
          }
      }
    report("oracle_exactness_2node", ok);
  }

  // X identities on a 2x2 grid, optionally with a corrupted constraint row.
  {
    const RegionGraph graph = build_grid_model(2, 2, 2, 2);
    ConstraintSystem system = build_constraints(graph);
    ParameterSet params = init_parameters(graph);
    SeededRng rng(11);
    Eigen::VectorXd theta = params.to_flat();
    for (int j = 0; j < theta.size(); ++j) theta[j] = rng.uniform(-0.5, 0.5);
    params.from_flat(theta);
    const ObservedAssignment y = {0, 1, 1, 0};
    InferenceResult res = infer(graph, params, system, y);
    SensitivitySolver sens(res, graph, params, system, y);
    if (inject_fault) {
      // Fault-injection hook: corrupt one marginalization coefficient after
      // the factorization so the identity checks must notice.
      system.A.coeffRef(system.rows() - 1, 0) += 1.0;
    }
    bool ok = res.converged;
    for (int trial = 0; trial < 5 && ok; ++trial) {
      Eigen::VectorXd v(graph.total_beliefs);
      for (int k = 0; k < v.size(); ++k) v[k] = rng.uniform(-1.0, 1.0);
      if ((system.A * sens.apply_X(v)).cwiseAbs().maxCoeff() > 1e-8) ok = false;
    }
    report("x_identity", ok);
  }

  // Loss identities at uniform beliefs.
  {
    const RegionGraph graph = build_grid_model(2, 2, 2, 2);
    const BeliefVector b = uniform_beliefs(graph);
    const Sample s = make_full_sample({0, 1, 0, 1}, {0, 0, 0, 0});
    const bool ok = std::abs(log_loss(graph, b, s) - 4.0 * std::log(2.0)) < 1e-12 &&
                    std::abs(quad_loss(graph, b, s) + 2.0) < 1e-12;
    report("loss_identities", ok);
  }

  if (failures > 0) {
    std::fprintf(stderr, "%d self-test check(s) failed\n", failures);
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"convex inference of marginals: train, infer, evaluate"};
  app.require_subcommand(1);

  TrainFlags train_flags;
  CLI::App* train_cmd = app.add_subcommand("train", "learn parameters on a denoising dataset");
  train_cmd->add_option("--data", train_flags.data, "training images (idx|pbm|csv)")->required();
  train_cmd->add_option("--noise-rate", train_flags.noise_rate, "corruption rate in [0,1]")
      ->required()
      ->check(CLI::Range(0.0, 1.0));
  train_cmd->add_option("--loss", train_flags.loss, "loss kind")
      ->required()
      ->check(CLI::IsMember({"log", "quad"}));
  train_cmd->add_option("--seed", train_flags.seed, "corruption seed");
  train_cmd->add_option("--stage1-iters", train_flags.stage1_iters)->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--stage2-iters", train_flags.stage2_iters)->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--inner-tol", train_flags.inner_tol)->check(CLI::PositiveNumber);
  train_cmd->add_option("--lbfgs-memory", train_flags.lbfgs_memory)->check(CLI::PositiveNumber);
  train_cmd->add_option("--out", train_flags.out, "model file path");
  train_cmd->add_option("--trace", train_flags.trace, "trace CSV path (default <out>.trace.csv)");
  train_cmd->add_option("--workers", train_flags.workers, "sample-level workers (0 = all cores)");
  train_cmd->add_option("--format", train_flags.format, "override format detection");
  train_cmd->add_option("--binarize-threshold", train_flags.binarize_threshold,
                        "grayscale binarization threshold (required for idx)");

  InferFlags infer_flags;
  CLI::App* infer_cmd = app.add_subcommand("infer", "run inference on one observation file");
  infer_cmd->add_option("--model", infer_flags.model, "model file")->required();
  infer_cmd->add_option("--input", infer_flags.input, "observed image file")->required();
  infer_cmd->add_option("--tol", infer_flags.tol)->check(CLI::PositiveNumber);
  infer_cmd->add_option("--out", infer_flags.out, "belief dump path");
  infer_cmd->add_option("--format", infer_flags.format, "override format detection");
  infer_cmd->add_option("--binarize-threshold", infer_flags.binarize_threshold);

  EvalFlags eval_flags;
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate per-pixel metrics on a dataset");
  eval_cmd->add_option("--model", eval_flags.model)->required();
  eval_cmd->add_option("--data", eval_flags.data)->required();
  eval_cmd->add_option("--noise-rate", eval_flags.noise_rate)
      ->required()
      ->check(CLI::Range(0.0, 1.0));
  eval_cmd->add_option("--seed", eval_flags.seed)->required();
  eval_cmd->add_option("--tol", eval_flags.tol)->check(CLI::PositiveNumber);
  eval_cmd->add_option("--out", eval_flags.out, "metrics CSV path");
  eval_cmd->add_option("--workers", eval_flags.workers);
  eval_cmd->add_option("--format", eval_flags.format);
  eval_cmd->add_option("--binarize-threshold", eval_flags.binarize_threshold);

  GradcheckFlags grad_flags;
  CLI::App* grad_cmd =
      app.add_subcommand("gradcheck", "implicit vs finite-difference belief gradients");
  grad_cmd->set_help_flag("--help", "print help");  // frees -h for the step flag
  grad_cmd->add_option("--grid", grad_flags.grid, "grid HxW (default 3x3)")
      ->check([](const std::string& s) -> std::string {
        int h = 0, w = 0;
        return std::sscanf(s.c_str(), "%dx%d", &h, &w) == 2 && h > 0 && w > 0
                   ? ""
                   : "expected HxW, e.g. 3x3";
      });
  grad_cmd->add_option("--seed", grad_flags.seed);
  grad_cmd->add_option("--h", grad_flags.h, "finite-difference step")->check(CLI::PositiveNumber);
  grad_cmd->add_option("--inner-tol", grad_flags.inner_tol)->check(CLI::PositiveNumber);

  bool inject_fault = false;
  CLI::App* self_cmd = app.add_subcommand("selftest", "built-in correctness checks");
  self_cmd->add_flag("--inject-fault", inject_fault,
                     "corrupt a constraint row first (fault-injection hook)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << std::flush;
    return 2;
  }

  try {
    if (app.got_subcommand(train_cmd)) return cmd_train(train_flags);
    if (app.got_subcommand(infer_cmd)) return cmd_infer(infer_flags);
    if (app.got_subcommand(eval_cmd)) return cmd_eval(eval_flags);
    if (app.got_subcommand(grad_cmd)) return cmd_gradcheck(grad_flags);
    if (app.got_subcommand(self_cmd)) return cmd_selftest(inject_fault);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
