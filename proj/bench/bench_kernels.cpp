// Times the OpenMP kernels against the serial reference: batch backprop on
// the default autoencoder and AE scoring over a test set.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <random>

#include "itd/ae.hpp"
#include "itd/features.hpp"
#include "itd/nn.hpp"

using namespace itd;
using Clock = std::chrono::steady_clock;

namespace {

template <typename F> double best_of(int reps, F &&fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = Clock::now();
    fn();
    best = std::min(best, std::chrono::duration<double>(Clock::now() - t0).count());
  }
  return best;
}

Samples random_inputs(std::size_t rows, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  std::bernoulli_distribution coin(0.06);
  Samples s(rows, dim);
  for (std::size_t i = 0; i < rows; ++i) {
    for (auto &x : s.row(i)) x = coin(rng) ? 1.0 : 0.0;
  }
  return s;
}

} // namespace

int main(int argc, char **argv) {
  const std::size_t batch = argc > 1 ? std::stoul(argv[1]) : 256;
  const int reps = 5;
  ae::AeModel model = ae::build_ae(kDefaultPadTo, 0, 1);
  model.trained = true;
  const Samples x = random_inputs(batch, model.input_dim, 2);

  std::printf("threads: %d, batch: %zu, params: %zu\n", omp_get_max_threads(), batch,
              model.net.param_count());

  const double serial = best_of(reps, [&] { (void)nn::reference::backprop(model.net, x, x, nn::Loss::Bce); });
  const double parallel = best_of(reps, [&] { (void)nn::backprop(model.net, x, x, nn::Loss::Bce); });
  std::printf("backprop  serial %8.3f ms  parallel %8.3f ms  speedup %.2fx\n", serial * 1e3,
              parallel * 1e3, serial / parallel);

  const Samples test = random_inputs(batch * 16, model.input_dim, 3);
  const double score_serial = best_of(reps, [&] {
    std::vector<double> s(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) s[i] = ae::reconstruction_error(model, test.row(i));
  });
  const double score_parallel = best_of(reps, [&] { (void)ae::score_all(model, test); });
  std::printf("scoring   serial %8.3f ms  parallel %8.3f ms  speedup %.2fx\n", score_serial * 1e3,
              score_parallel * 1e3, score_serial / score_parallel);
  return 0;
}
