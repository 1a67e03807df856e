#include <random>

#include <benchmark/benchmark.h>

#include "smokecorr/correction_net.hpp"
#include "smokecorr/interpolation_net.hpp"
#include "smokecorr/losses.hpp"
#include "smokecorr/solver.hpp"

using namespace smokecorr;

namespace {

VectorField random_velocity(const GridSpec &g, std::uint64_t seed) {
	std::mt19937_64 rng(seed);
	std::uniform_real_distribution<float> u(-1.0f, 1.0f);
	VectorField v(g);
	for (auto &x : v.values()) x = u(rng);
	return v;
}

ScalarField random_density(const GridSpec &g, std::uint64_t seed) {
	std::mt19937_64 rng(seed);
	std::uniform_real_distribution<float> u(0.0f, 1.0f);
	ScalarField f(g);
	for (auto &x : f.values()) x = u(rng);
	return f;
}

GridSpec square(const benchmark::State &state) {
	const int n = static_cast<int>(state.range(0));
	return GridSpec(n, n);
}

} // namespace

static void BM_Advect(benchmark::State &state) {
	const GridSpec g = square(state);
	ScalarField rho = random_density(g, 1);
	VectorField vel = random_velocity(g, 2);
	for (auto _ : state) benchmark::DoNotOptimize(advect(rho, vel, 0.5));
	state.SetItemsProcessed(state.iterations() * static_cast<long long>(g.cells()));
}
BENCHMARK(BM_Advect)->Arg(64)->Arg(128);

static void BM_PressureProject(benchmark::State &state) {
	const GridSpec g = square(state);
	const ObstacleMask mask(g);
	VectorField vel = enforce_boundaries(random_velocity(g, 3), mask);
	for (auto _ : state) benchmark::DoNotOptimize(pressure_project(vel, mask, 500, 1e-3));
}
BENCHMARK(BM_PressureProject)->Arg(64)->Unit(benchmark::kMillisecond);

static void BM_SolverStep(benchmark::State &state) {
	const SceneConfig scene = make_scene(SceneKind::plume2d, GridSpec(64, 64), 1);
	const Solver solver(scene);
	SimState s = solver.initial_state();
	for (int i = 0; i < 8; ++i) s = solver.step(s, scene.dt_small);
	const double dt = state.range(0) == 0 ? scene.dt_small : scene.dt_large;
	for (auto _ : state) benchmark::DoNotOptimize(solver.step(s, dt));
}
BENCHMARK(BM_SolverStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

static void BM_Warp(benchmark::State &state) {
	const GridSpec g = square(state);
	ScalarField rho = random_density(g, 4);
	FlowField flow = random_velocity(g, 5);
	for (auto _ : state) benchmark::DoNotOptimize(warp(rho, flow));
}
BENCHMARK(BM_Warp)->Arg(64)->Arg(128);

static void BM_CorrectionForward(benchmark::State &state) {
	const GridSpec g(64, 64);
	CorrectionConfig cfg;
	cfg.velocity_rms = 0.3;
	CorrectionNet<float> net(cfg, g);
	SimState prev{random_density(g, 6), random_velocity(g, 7), 0};
	SimState big{random_density(g, 8), random_velocity(g, 9), 8};
	for (auto _ : state) benchmark::DoNotOptimize(correct(big, prev, net));
}
BENCHMARK(BM_CorrectionForward)->Unit(benchmark::kMillisecond);

static void BM_Interpolate(benchmark::State &state) {
	const GridSpec g(64, 64);
	InterpolationModels m(InterpConfig{}, g);
	ScalarField a = random_density(g, 10), b = random_density(g, 11);
	VectorField v = random_velocity(g, 12);
	const bool second = state.range(0) == 1;
	for (auto _ : state) {
		if (second) benchmark::DoNotOptimize(second_step_interpolate(m.second, a, v, b, 3, 8, 0.5));
		else benchmark::DoNotOptimize(first_step_interpolate(m.first, a, b, 0.375));
	}
}
BENCHMARK(BM_Interpolate)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

static void BM_CorrectionTrainStep(benchmark::State &state) {
	const GridSpec g(64, 64);
	CorrectionConfig cfg;
	CorrectionNet<float> net(cfg, g);
	using namespace nn;
	const int batch = static_cast<int>(state.range(0));
	std::vector<Tensor<float>> r, v;
	for (int i = 0; i < batch; ++i) {
		r.push_back(to_tensor<float>(random_density(g, 20 + i)));
		v.push_back(to_tensor<float>(random_velocity(g, 40 + i)));
	}
	auto rho = constant(stack_batch(r));
	auto vel = constant(stack_batch(v));
	for (auto _ : state) {
		net.params().zero_grad();
		auto heads = net.forward(rho, vel, rho, vel);
		backward(add(mean_abs(sub(net.fuse(rho, heads), rho)), mean_abs(sub(heads.v_hat, vel))));
	}
}
BENCHMARK(BM_CorrectionTrainStep)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);

static void BM_Perceptual2D(benchmark::State &state) {
	const GridSpec g = square(state);
	auto phi = Vgg16Features::random(7);
	ScalarField a = random_density(g, 13), b = random_density(g, 14);
	for (auto _ : state) benchmark::DoNotOptimize(perceptual_loss_2d(a, b, *phi));
}
BENCHMARK(BM_Perceptual2D)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
