// Times the serial reference implementations against their OpenMP versions
// and checks that both produce identical bits.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

#include <Eigen/Dense>

#include "avm/forest.hpp"
#include "avm/kernels.hpp"
#include "avm/parallel.hpp"
#include "avm/rng.hpp"
#include "avm/synth.hpp"

using namespace avm;
using clock_type = std::chrono::steady_clock;

namespace {

double time_ms(const std::function<void()>& fn, int reps = 3) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = clock_type::now();
    fn();
    const auto t1 = clock_type::now();
    best = std::min(best,
                    std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

Eigen::MatrixXd random_matrix(int n, int p, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd X(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) X(i, j) = rng.normal();
  return X;
}

void report(const char* name, double serial_ms, double parallel_ms,
            bool identical) {
  std::printf("%-22s serial %9.1f ms   parallel %9.1f ms   speedup %5.2fx   %s\n",
              name, serial_ms, parallel_ms, serial_ms / parallel_ms,
              identical ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  const int threads = argc > 1 ? std::atoi(argv[1]) : 0;
  if (threads > 0) set_thread_count(threads);
  std::printf("threads: %d\n\n", thread_count());

  {
    const Eigen::MatrixXd X = random_matrix(4000, 400, 1);
    Eigen::MatrixXd a, b;
    const double ts = time_ms([&] { a = kernels::crossprod_serial(X); });
    const double tp = time_ms([&] { b = kernels::crossprod(X); });
    report("crossprod 4000x400", ts, tp, (a - b).cwiseAbs().maxCoeff() == 0);
  }
  {
    const Eigen::MatrixXd pts = random_matrix(20000, 2, 2) * 1e5;
    const Eigen::MatrixXd knots = random_matrix(400, 2, 3) * 1e5;
    Eigen::MatrixXd a, b;
    const double ts =
        time_ms([&] { a = kernels::matern_design_serial(pts, knots, 5e4); });
    const double tp =
        time_ms([&] { b = kernels::matern_design(pts, knots, 5e4); });
    report("matern 20000x400", ts, tp, (a - b).cwiseAbs().maxCoeff() == 0);
  }
  {
    Eigen::MatrixXd A = random_matrix(800, 800, 4);
    A = A * A.transpose() + 800.0 * Eigen::MatrixXd::Identity(800, 800);
    const Eigen::MatrixXd L = A.llt().matrixL();
    const Eigen::MatrixXd B = random_matrix(800, 800, 5);
    Eigen::MatrixXd a, b;
    const double ts =
        time_ms([&] { a = kernels::forward_solve_multi_serial(L, B); });
    const double tp = time_ms([&] { b = kernels::forward_solve_multi(L, B); });
    report("trsm 800x800", ts, tp, (a - b).cwiseAbs().maxCoeff() == 0);
  }
  {
    const Eigen::MatrixXd coords = random_matrix(8000, 2, 6) * 1e5;
    kernels::KnnResult a, b;
    const double ts = time_ms([&] { a = kernels::knn_serial(coords, 20); }, 1);
    const double tp = time_ms([&] { b = kernels::knn(coords, 20); }, 1);
    report("knn 8000 k=20", ts, tp, a.index == b.index);
  }
  {
    synth::SynthConfig cfg = synth::SynthConfig::defaults();
    cfg.n = 4000;
    cfg.num_regions = 24;
    auto data = synth::simulate_dataset(cfg);
    forest::ForestConfig fc;
    fc.n_trees = 100;
    fc.seed = 7;
    forest::Forest fa, fb;
    const double tp =
        time_ms([&] { fa = grow_forest(data.records, fc, 24); }, 1);
    set_thread_count(1);
    const double ts =
        time_ms([&] { fb = grow_forest(data.records, fc, 24); }, 1);
    if (threads > 0) set_thread_count(threads);
    else set_thread_count(0);
    bool same = fa.trees.size() == fb.trees.size();
    for (std::size_t t = 0; same && t < fa.trees.size(); ++t)
      same = fa.trees[t].nodes.size() == fb.trees[t].nodes.size();
    report("forest 4000x100", ts, tp, same);
  }
  return 0;
}
