#include <random>

#include <benchmark/benchmark.h>

#include "geonmpc/integrator.hpp"
#include "geonmpc/qp.hpp"
#include "geonmpc/shooting.hpp"
#include "geonmpc/simulation.hpp"

namespace {

using namespace geonmpc;

RigidState tilted_state()
{
  RigidState x;
  x.R     = cayley(Vec3(0.3, -0.2, 0.1));
  x.xi    = Vec3(1.0, -2.0, 3.0);
  x.v     = Vec3(0.5, 0.1, -0.3);
  x.omega = Vec3(0.4, -0.6, 0.2);
  return x;
}

void BM_StepPredictor(benchmark::State & state)
{
  const QuadrotorParams q;
  const StepSpec dt(0.01);
  RigidState x         = tilted_state();
  const ControlInput u = {q.body.hover_thrust(), Vec3(0.01, 0.0, -0.01)};
  for (auto _ : state) {
    x = step_predictor(x, u, q.body, dt);
    benchmark::DoNotOptimize(x);
  }
}
BENCHMARK(BM_StepPredictor);

void BM_LinearizePredictor(benchmark::State & state)
{
  const QuadrotorParams q;
  const RigidState x   = tilted_state();
  const ControlInput u = {q.body.hover_thrust(), Vec3(0.01, 0.0, -0.01)};
  for (auto _ : state) { benchmark::DoNotOptimize(linearize_predictor(x, u, q.body, StepSpec(0.01))); }
}
BENCHMARK(BM_LinearizePredictor);

void BM_Condense(benchmark::State & state)
{
  OcpSpec spec;
  spec.horizon = static_cast<int>(state.range(0));
  const ShootingProblem prob = transcribe(tilted_state(), spec, QuadrotorParams{});
  ShootingSolver solver;
  for (auto _ : state) { benchmark::DoNotOptimize(solver.condense(prob).Gamma.data()); }
}
BENCHMARK(BM_Condense)->Arg(10)->Arg(40)->Unit(benchmark::kMicrosecond);

void BM_BoxQp(benchmark::State & state)
{
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(5);
  std::normal_distribution<double> d(0.0, 1.0);
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) { a(i, j) = d(rng); }
  }
  BoxQpProblem qp{a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n), Eigen::VectorXd::Zero(n),
                  -Eigen::VectorXd::Ones(n), Eigen::VectorXd::Ones(n)};
  for (int i = 0; i < n; ++i) { qp.g(i) = 10.0 * d(rng); }
  BoxQpSolver solver;
  for (auto _ : state) { benchmark::DoNotOptimize(solver.solve(qp).x.data()); }
}
BENCHMARK(BM_BoxQp)->Arg(40)->Arg(160)->Unit(benchmark::kMicrosecond);

void BM_ColdSolve(benchmark::State & state)
{
  const QuadrotorParams q;
  const Scenario sc = paper_scenario(0, Scheme::Fmnmpc);
  for (auto _ : state) {
    ShootingProblem prob = transcribe(sc.x0, sc.effective_spec(), q);
    benchmark::DoNotOptimize(solve(prob).objective);
  }
}
BENCHMARK(BM_ColdSolve)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
