// Benchmarks the OpenMP-parallel empirical-risk kernel against the serial
// reference on a synthetic denoising dataset, and checks that every worker
// count reproduces the serial result bit for bit.

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <vector>

#include "cvi/data_bench.hpp"
#include "cvi/loss.hpp"
#include "cvi/polytope.hpp"
#include "cvi/trainer.hpp"

using namespace cvi;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"empirical-risk kernel benchmark: serial reference vs OpenMP"};
  int side = 6, samples = 32, repeats = 3;
  std::vector<int> worker_counts = {1, 2, 4};
  app.add_option("--side", side, "grid side length");
  app.add_option("--samples", samples, "dataset size");
  app.add_option("--repeats", repeats, "timing repeats");
  app.add_option("--workers", worker_counts, "worker counts to time");
  CLI11_PARSE(app, argc, argv);

  const ImageSet clean = make_shape_images(samples, side, side, 1);
  const ImageSet noisy = corrupt(clean, 0.3, 2);
  const RegionGraph graph = build_grid_model(side, side, 2, 2);
  const ConstraintSystem system = build_constraints(graph);
  const std::vector<Sample> dataset = make_denoising_samples(clean, noisy);
  const ParameterSet params = init_parameters(graph);

  std::printf("grid %dx%d, %d samples, %d parameters, %d beliefs\n", side, side, samples,
              params.num_params(), graph.total_beliefs);

  auto t0 = std::chrono::steady_clock::now();
  RiskResult ref;
  for (int r = 0; r < repeats; ++r)
    ref = empirical_risk_serial(dataset, graph, params, system, LossKind::log, 1e-10);
  const double serial_s = seconds_since(t0) / repeats;
  std::printf("%-22s %8.4f s   risk=%.12g\n", "serial reference", serial_s, ref.risk);

  bool all_identical = true;
  for (int workers : worker_counts) {
    t0 = std::chrono::steady_clock::now();
    RiskResult par;
    for (int r = 0; r < repeats; ++r)
      par = empirical_risk(dataset, graph, params, system, LossKind::log, 1e-10, workers);
    const double par_s = seconds_since(t0) / repeats;
    const bool identical = par.risk == ref.risk && (par.gradient.array() == ref.gradient.array()).all();
    all_identical = all_identical && identical;
    std::printf("openmp workers=%-6d %8.4f s   speedup=%.2fx   bitwise=%s\n", workers, par_s,
                serial_s / par_s, identical ? "identical" : "DIFFERS");
  }
  return all_identical ? 0 : 1;
}
