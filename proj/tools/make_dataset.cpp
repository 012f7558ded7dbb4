// Generates synthetic binary shape datasets as CSV image files.

#include <CLI11.hpp>
#include <cstdio>

#include "cvi/data_bench.hpp"

int main(int argc, char** argv) {
  CLI::App app{"synthetic binary shape dataset generator"};
  std::string out = "shapes.csv";
  int count = 100, height = 8, width = 8;
  std::uint64_t seed = 1;
  app.add_option("--out", out, "output CSV path");
  app.add_option("--count", count)->check(CLI::PositiveNumber);
  app.add_option("--height", height)->check(CLI::PositiveNumber);
  app.add_option("--width", width)->check(CLI::PositiveNumber);
  app.add_option("--seed", seed);
  CLI11_PARSE(app, argc, argv);

  try {
    cvi::write_images_csv(cvi::make_shape_images(count, height, width, seed), out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  std::printf("images=%d height=%d width=%d seed=%llu out=%s\n", count, height, width,
              static_cast<unsigned long long>(seed), out.c_str());
  return 0;
}
