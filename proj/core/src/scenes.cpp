#include <cmath>
#include <numbers>
#include <random>

#include "smokecorr/solver.hpp"

// Seeded scene parameters. Every draw is uniform over the documented range
// so that train and test trajectories differ:
//   source center x      W * (0.5 +- 0.125)   (and z for 3D)
//   source half width    W * [0.06, 0.10]
//   source height        H * [0.04, 0.07], starting at H * 0.06
//   inflow speed (up)    [0.2, 0.5] cells / time unit
//   buoyancy             [0.3, 0.6]
//   initial velocity     smooth 4-mode perturbation, amplitude 0.1
//   obstacle (circle2d)  center (W * (0.5 +- 0.1), H * [0.45, 0.6]),
//                        radius W * [0.07, 0.10]

namespace smokecorr {

namespace {

double uniform(std::mt19937_64 &rng, double lo, double hi) {
	return std::uniform_real_distribution<double>(lo, hi)(rng);
}

} // namespace

SceneConfig make_scene(SceneKind kind, const GridSpec &grid, std::uint64_t seed, double dt_small, double dt_large,
	int num_steps) {
	SceneConfig scene;
	scene.kind = kind;
	scene.grid = grid;
	scene.seed = seed;
	scene.dt_small = dt_small;
	scene.dt_large = dt_large;
	scene.num_steps = num_steps;

	std::mt19937_64 rng(seed);
	const double w = grid.nx();
	const double h = grid.ny();
	const double depth = grid.d() == 3 ? grid.nz() : 1.0;

	const double cx = w * (0.5 + uniform(rng, -0.125, 0.125));
	const double half = w * uniform(rng, 0.06, 0.10);
	const double y0 = std::max(1.0, std::round(h * 0.06));
	const double height = std::max(1.0, h * uniform(rng, 0.04, 0.07));
	scene.source.lo = {cx - half, y0, 0.0};
	scene.source.hi = {cx + half, y0 + height, 1.0};
	if (grid.d() == 3) {
		const double cz = depth * (0.5 + uniform(rng, -0.125, 0.125));
		scene.source.lo[2] = cz - half;
		scene.source.hi[2] = cz + half;
	}
	scene.inflow_velocity = {0.0, uniform(rng, 0.2, 0.5), 0.0};
	scene.buoyancy = uniform(rng, 0.3, 0.6);
	scene.initial_velocity_noise = 0.1;
	scene.emission_rate = 1.0;

	if (kind == SceneKind::circle2d) {
		Obstacle o;
		o.center = {w * (0.5 + uniform(rng, -0.1, 0.1)), h * uniform(rng, 0.45, 0.6), 0.0};
		o.radius = w * uniform(rng, 0.07, 0.10);
		scene.obstacle = o;
	}
	scene.validate();
	return scene;
}

SimState Solver::initial_state() const {
	const GridSpec &g = scene_.grid;
	SimState state = SimState::empty(g);
	if (scene_.initial_velocity_noise > 0.0) {
		// Separate stream from the scene draws so scene edits do not shift it.
		std::mt19937_64 rng(scene_.seed ^ 0x9e3779b97f4a7c15ull);
		constexpr int modes = 4;
		const double two_pi = 2.0 * std::numbers::pi;
		for (int c = 0; c < g.d(); ++c) {
			auto plane = state.vel.component(c);
			for (int m = 0; m < modes; ++m) {
				std::array<double, 3> freq{};
				std::array<double, 3> phase{};
				for (int a = 0; a < 3; ++a) {
					freq[static_cast<std::size_t>(a)] = std::uniform_int_distribution<int>(1, 3)(rng);
					phase[static_cast<std::size_t>(a)] = uniform(rng, 0.0, two_pi);
				}
				const double amp = scene_.initial_velocity_noise * uniform(rng, -1.0, 1.0) / modes;
				for (int z = 0; z < g.nz(); ++z)
					for (int y = 0; y < g.ny(); ++y)
						for (int x = 0; x < g.nx(); ++x) {
							double v = std::sin(two_pi * freq[0] * x / g.nx() + phase[0]) *
								std::sin(two_pi * freq[1] * y / g.ny() + phase[1]);
							if (g.d() == 3) v *= std::sin(two_pi * freq[2] * z / g.nz() + phase[2]);
							plane[g.index(x, y, z)] += static_cast<float>(amp * v);
						}
			}
		}
		state.vel = enforce_boundaries(state.vel, mask_);
		state.vel = pressure_project(state.vel, mask_, scene_.projection_iterations, scene_.projection_tolerance).vel;
	}
	return state;
}

} // namespace smokecorr
