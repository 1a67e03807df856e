#include "smokecorr/solver.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace smokecorr {

SceneKind parse_scene_kind(const std::string &name) {
	if (name == "plume2d") return SceneKind::plume2d;
	if (name == "circle2d") return SceneKind::circle2d;
	if (name == "inflow3d") return SceneKind::inflow3d;
	throw std::invalid_argument("unknown scene '" + name + "' (expected plume2d, circle2d or inflow3d)");
}

std::string scene_kind_name(SceneKind kind) {
	switch (kind) {
	case SceneKind::plume2d: return "plume2d";
	case SceneKind::circle2d: return "circle2d";
	case SceneKind::inflow3d: return "inflow3d";
	}
	return "unknown";
}

int SceneConfig::k() const {
	return static_cast<int>(std::lround(dt_large / dt_small));
}

void SceneConfig::validate() const {
	grid.require_simulation_extent();
	if (!(dt_small > 0.0) || !(dt_large > 0.0)) {
		throw std::invalid_argument("time-steps must be positive");
	}
	const double ratio = dt_large / dt_small;
	if (std::abs(ratio - std::round(ratio)) > 1e-9 || std::round(ratio) < 1.0) {
		throw std::invalid_argument("dt_large / dt_small must be a positive integer");
	}
	if (num_steps < 0 || num_steps % k() != 0) {
		throw std::invalid_argument("num_steps must be a non-negative multiple of k = " + std::to_string(k()));
	}
	if (projection_iterations < 1) {
		throw std::invalid_argument("projection iteration cap must be >= 1");
	}
	if ((kind == SceneKind::inflow3d) != (grid.d() == 3)) {
		throw std::invalid_argument("scene " + scene_kind_name(kind) + " does not match a " +
			std::to_string(grid.d()) + "D grid");
	}
}

ObstacleMask::ObstacleMask(GridSpec spec) : spec_(spec), solid_(spec.cells(), 0) {}

ObstacleMask ObstacleMask::from_scene(const SceneConfig &scene) {
	ObstacleMask mask(scene.grid);
	if (!scene.obstacle) return mask;
	const Obstacle &o = *scene.obstacle;
	const GridSpec &g = scene.grid;
	for (int z = 0; z < g.nz(); ++z)
		for (int y = 0; y < g.ny(); ++y)
			for (int x = 0; x < g.nx(); ++x) {
				const double dx = x - o.center[0];
				const double dy = y - o.center[1];
				const double dz = g.d() == 3 ? z - o.center[2] : 0.0;
				if (dx * dx + dy * dy + dz * dz <= o.radius * o.radius) mask.set_solid(x, y, z);
			}
	return mask;
}

std::size_t ObstacleMask::count() const {
	return static_cast<std::size_t>(std::count(solid_.begin(), solid_.end(), std::uint8_t{1}));
}

SimState SimState::empty(const GridSpec &grid) {
	return SimState{ScalarField(grid), VectorField(grid), 0};
}

SolverDivergence::SolverDivergence(int frame_index, const std::string &what)
	: std::runtime_error("frame " + std::to_string(frame_index) + ": " + what), frame_index_(frame_index) {}

namespace {

template <typename Fn>
void for_each_cell(const GridSpec &g, Fn &&fn) {
	for (int z = 0; z < g.nz(); ++z)
		for (int y = 0; y < g.ny(); ++y)
			for (int x = 0; x < g.nx(); ++x) fn(x, y, z);
}

void backtrace_into(const ScalarField &src, const VectorField &vel, double dt, std::span<float> dst) {
	const GridSpec &g = src.spec();
	const bool three = g.d() == 3;
	for_each_cell(g, [&](int x, int y, int z) {
		const double px = x - dt * vel(0, x, y, z);
		const double py = y - dt * vel(1, x, y, z);
		const double pz = three ? z - dt * vel(2, x, y, z) : 0.0;
		dst[g.index(x, y, z)] = sample(src, px, py, pz);
	});
}

bool on_wall(const GridSpec &g, int axis, int x, int y, int z) {
	const int c = axis == 0 ? x : axis == 1 ? y : z;
	return c == 0 || c == g.extent(axis) - 1;
}

bool interior(const GridSpec &g, int x, int y, int z) {
	for (int a = 0; a < g.d(); ++a) {
		if (on_wall(g, a, x, y, z)) return false;
	}
	return true;
}

} // namespace

ScalarField advect(const ScalarField &field, const VectorField &vel, double dt) {
	require_same_grid(field.spec(), vel.spec(), "advect");
	ScalarField out(field.spec());
	backtrace_into(field, vel, dt, out.values());
	return out;
}

VectorField advect(const VectorField &field, const VectorField &vel, double dt) {
	require_same_grid(field.spec(), vel.spec(), "advect");
	VectorField out(field.spec());
	for (int c = 0; c < field.components(); ++c) {
		backtrace_into(field.component_field(c), vel, dt, out.component(c));
	}
	return out;
}

VectorField apply_buoyancy(const VectorField &vel, const ScalarField &rho, double buoyancy, double dt) {
	require_same_grid(vel.spec(), rho.spec(), "apply_buoyancy");
	VectorField out = vel;
	auto up = out.component(1);
	const auto r = rho.values();
	for (std::size_t i = 0; i < up.size(); ++i) {
		up[i] = static_cast<float>(up[i] + dt * buoyancy * r[i]);
	}
	return out;
}

SimState add_source(const SimState &state, const SceneConfig &scene) {
	SimState out = state;
	const GridSpec &g = state.rho.spec();
	const int d = g.d();
	const auto rate = static_cast<float>(scene.emission_rate);
	for_each_cell(g, [&](int x, int y, int z) {
		if (!scene.source.contains(x, y, d == 3 ? z : 0)) return;
		out.rho(x, y, z) = std::max(out.rho(x, y, z), rate);
		for (int c = 0; c < d; ++c) out.vel(c, x, y, z) = static_cast<float>(scene.inflow_velocity[static_cast<std::size_t>(c)]);
	});
	return out;
}

VectorField enforce_boundaries(const VectorField &vel, const ObstacleMask &mask) {
	require_same_grid(vel.spec(), mask.spec(), "enforce_boundaries");
	const GridSpec &g = vel.spec();
	VectorField out = vel;
	for_each_cell(g, [&](int x, int y, int z) {
		const bool solid = mask.solid(x, y, z);
		for (int a = 0; a < g.d(); ++a) {
			if (solid || on_wall(g, a, x, y, z)) out(a, x, y, z) = 0.0f;
		}
	});
	return out;
}

double max_interior_divergence(const VectorField &vel, const ObstacleMask &mask) {
	const GridSpec &g = vel.spec();
	const ScalarField div = divergence(vel);
	double worst = 0.0;
	for_each_cell(g, [&](int x, int y, int z) {
		if (interior(g, x, y, z) && !mask.solid(x, y, z)) {
			worst = std::max(worst, static_cast<double>(std::abs(div(x, y, z))));
		}
	});
	return worst;
}

// The discrete operator is built so that projection is an exact Hodge
// split for the central-difference divergence used everywhere else:
//   G  : pressure -> velocity, central differences with p = 0 off the
//        unknown set (interior fluid cells),
//   M  : zeroes the constrained components (wall normals, solid cells),
//   D  : central divergence at interior fluid cells = -(G)^T.
// A = D M G is symmetric negative semi-definite and D v* lies in its range,
// so the Jacobi iteration drives the interior divergence of v* - M G p to zero.
ProjectionResult pressure_project(const VectorField &vel, const ObstacleMask &mask, int iterations,
	double tolerance) {
	require_same_grid(vel.spec(), mask.spec(), "pressure_project");
	if (iterations < 1) throw std::invalid_argument("pressure_project needs at least one iteration");

	const GridSpec &g = vel.spec();
	const int d = g.d();
	const std::size_t n = g.cells();
	std::array<std::ptrdiff_t, 3> stride{1, g.nx(), static_cast<std::ptrdiff_t>(g.nx()) * g.ny()};

	std::vector<std::uint8_t> unknown(n, 0);
	std::vector<std::uint8_t> free_comp(n * static_cast<std::size_t>(d), 0);
	for_each_cell(g, [&](int x, int y, int z) {
		const std::size_t c = g.index(x, y, z);
		const bool solid = mask.solid(c);
		unknown[c] = interior(g, x, y, z) && !solid;
		for (int a = 0; a < d; ++a) {
			free_comp[static_cast<std::size_t>(a) * n + c] = !solid && !on_wall(g, a, x, y, z);
		}
	});

	// Unknown cells never touch the outer ring, so +-stride stays in range.
	std::vector<double> diag(n, 0.0);
	std::vector<double> rhs(n, 0.0);
	for (std::size_t c = 0; c < n; ++c) {
		if (!unknown[c]) continue;
		double dg = 0.0;
		double b = 0.0;
		for (int a = 0; a < d; ++a) {
			const std::size_t plane = static_cast<std::size_t>(a) * n;
			const std::size_t up = c + static_cast<std::size_t>(stride[static_cast<std::size_t>(a)]);
			const std::size_t dn = c - static_cast<std::size_t>(stride[static_cast<std::size_t>(a)]);
			dg -= 0.25 * (free_comp[plane + up] + free_comp[plane + dn]);
			b += 0.5 * (static_cast<double>(vel.values()[plane + up]) - vel.values()[plane + dn]);
		}
		diag[c] = dg;
		rhs[c] = b;
	}

	std::vector<double> p(n, 0.0);
	std::vector<double> grad(n * static_cast<std::size_t>(d), 0.0);
	std::vector<double> residual(n, 0.0);

	auto apply_gradient = [&]() {
		for (int a = 0; a < d; ++a) {
			const std::size_t plane = static_cast<std::size_t>(a) * n;
			const auto s = stride[static_cast<std::size_t>(a)];
			for (std::size_t c = 0; c < n; ++c) {
				if (!free_comp[plane + c]) {
					grad[plane + c] = 0.0;
					continue;
				}
				// Free components live on non-wall cells along axis a.
				grad[plane + c] = 0.5 * (p[c + static_cast<std::size_t>(s)] - p[c - static_cast<std::size_t>(s)]);
			}
		}
	};
	auto compute_residual = [&]() {
		double worst = 0.0;
		for (std::size_t c = 0; c < n; ++c) {
			if (!unknown[c]) continue;
			double ap = 0.0;
			for (int a = 0; a < d; ++a) {
				const std::size_t plane = static_cast<std::size_t>(a) * n;
				const auto s = static_cast<std::size_t>(stride[static_cast<std::size_t>(a)]);
				ap += 0.5 * (grad[plane + c + s] - grad[plane + c - s]);
			}
			residual[c] = rhs[c] - ap;
			worst = std::max(worst, std::abs(residual[c]));
		}
		return worst;
	};

	// Chebyshev acceleration of the Jacobi sweep. D^-1 A has its spectrum
	// in [0, 2] (Gershgorin); the lower bound is a safe under-estimate of
	// the smallest Dirichlet mode of one checkerboard sub-grid.
	int longest = 1;
	for (int a = 0; a < d; ++a) longest = std::max(longest, g.extent(a));
	const double lo = 0.5 * (1.0 - std::cos(std::numbers::pi / (0.5 * longest + 1.0)));
	const double hi = 2.0;
	const double theta = 0.5 * (hi + lo);
	const double delta = 0.5 * (hi - lo);
	const double sigma = theta / delta;
	double rho_k = 1.0 / sigma;
	std::vector<double> dir(n, 0.0);

	ProjectionResult result;
	apply_gradient();
	double worst = compute_residual();
	for (std::size_t c = 0; c < n; ++c) {
		if (unknown[c] && diag[c] != 0.0) dir[c] = residual[c] / diag[c] / theta;
	}
	int it = 0;
	while (it < iterations && worst >= tolerance) {
		for (std::size_t c = 0; c < n; ++c) p[c] += dir[c];
		apply_gradient();
		worst = compute_residual();
		const double rho_next = 1.0 / (2.0 * sigma - rho_k);
		for (std::size_t c = 0; c < n; ++c) {
			if (unknown[c] && diag[c] != 0.0) {
				dir[c] = rho_next * rho_k * dir[c] + 2.0 * rho_next / delta * residual[c] / diag[c];
			}
		}
		rho_k = rho_next;
		++it;
	}

	result.vel = vel;
	auto out = result.vel.values();
	for (std::size_t i = 0; i < out.size(); ++i) {
		out[i] = static_cast<float>(out[i] - grad[i]);
	}
	result.iterations = it;
	result.residual = max_interior_divergence(result.vel, mask);
	return result;
}

Solver::Solver(SceneConfig scene) : scene_(std::move(scene)), mask_(ObstacleMask::from_scene(scene_)) {
	scene_.validate();
}

SimState Solver::step(const SimState &state, double dt) const {
	if (!(dt > 0.0)) throw std::invalid_argument("step needs dt > 0");
	require_same_grid(state.rho.spec(), scene_.grid, "step");
	require_same_grid(state.vel.spec(), scene_.grid, "step");

	const int next_frame = state.frame_index + static_cast<int>(std::lround(dt / scene_.dt_small));
	SimState s = add_source(state, scene_);
	VectorField vel = advect(s.vel, s.vel, dt);
	vel = apply_buoyancy(vel, s.rho, scene_.buoyancy, dt);
	vel = enforce_boundaries(vel, mask_);
	vel = pressure_project(vel, mask_, scene_.projection_iterations, scene_.projection_tolerance).vel;

	SimState out{advect(s.rho, vel, dt), std::move(vel), next_frame};
	auto rho = out.rho.values();
	for (std::size_t c = 0; c < rho.size(); ++c) {
		if (mask_.solid(c) || rho[c] < 0.0f) rho[c] = 0.0f;
	}
	if (!out.rho.all_finite() || !out.vel.all_finite()) {
		throw SolverDivergence(next_frame, "non-finite values in solver output");
	}
	return out;
}

SimState step(const SimState &state, double dt, const SceneConfig &scene) {
	return Solver(scene).step(state, dt);
}

} // namespace smokecorr
