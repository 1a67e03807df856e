#pragma once

/// \file
/// Semi-Lagrangian smoke solver on a collocated grid.
///
/// One step applies, in order: source emission, velocity self-advection,
/// buoyancy, free-slip boundaries, Jacobi pressure projection, density
/// advection and a clamp of density to >= 0. Velocities are in cells per
/// time unit, so a backtrace moves by dt * v cells.

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "smokecorr/fields.hpp"

namespace smokecorr {

enum class SceneKind { plume2d, circle2d, inflow3d };

SceneKind parse_scene_kind(const std::string &name);
std::string scene_kind_name(SceneKind kind);

/// Cells whose centers lie in [lo, hi) on every axis.
struct Box {
	std::array<double, 3> lo{0, 0, 0};
	std::array<double, 3> hi{0, 0, 0};
	bool contains(int x, int y, int z) const {
		return x >= lo[0] && x < hi[0] && y >= lo[1] && y < hi[1] && z >= lo[2] && z < hi[2];
	}
};

/// Circle (2D) or sphere (3D).
struct Obstacle {
	std::array<double, 3> center{0, 0, 0};
	double radius = 0.0;
};

struct SceneConfig {
	SceneKind kind = SceneKind::plume2d;
	GridSpec grid;
	Box source;
	/// Density written into the source box on every step.
	double emission_rate = 1.0;
	std::array<double, 3> inflow_velocity{0, 0, 0};
	/// Upward force per unit density.
	double buoyancy = 0.0;
	/// Amplitude of the smooth seeded velocity perturbation in the initial
	/// state (cells per time unit).
	double initial_velocity_noise = 0.0;
	std::optional<Obstacle> obstacle;
	std::uint64_t seed = 0;
	double dt_small = 0.5;
	double dt_large = 4.0;
	int num_steps = 64;
	int projection_iterations = 500;
	double projection_tolerance = 1e-3;

	/// dt_large / dt_small.
	int k() const;
	/// Throws std::invalid_argument on a broken invariant.
	void validate() const;
};

/// Per-cell solid flag.
class ObstacleMask {
public:
	explicit ObstacleMask(GridSpec spec);
	static ObstacleMask from_scene(const SceneConfig &scene);

	const GridSpec &spec() const { return spec_; }
	bool solid(std::size_t cell) const { return solid_[cell] != 0; }
	bool solid(int x, int y, int z = 0) const { return solid_[spec_.index(x, y, z)] != 0; }
	void set_solid(int x, int y, int z = 0) { solid_[spec_.index(x, y, z)] = 1; }
	std::size_t count() const;

private:
	GridSpec spec_;
	std::vector<std::uint8_t> solid_;
};

struct SimState {
	ScalarField rho;
	VectorField vel;
	/// In small-step units.
	int frame_index = 0;

	static SimState empty(const GridSpec &grid);
};

/// Non-finite values appeared; carries the frame being produced.
class SolverDivergence : public std::runtime_error {
public:
	SolverDivergence(int frame_index, const std::string &what);
	int frame_index() const { return frame_index_; }

private:
	int frame_index_;
};

struct ProjectionResult {
	VectorField vel;
	int iterations = 0;
	/// Max |divergence| over interior fluid cells after the update.
	double residual = 0.0;
};

ScalarField advect(const ScalarField &field, const VectorField &vel, double dt);
VectorField advect(const VectorField &field, const VectorField &vel, double dt);

/// Jacobi solve of the collocated pressure Poisson problem, stopping at
/// `iterations` or when the max interior residual drops below `tolerance`.
ProjectionResult pressure_project(const VectorField &vel, const ObstacleMask &mask, int iterations,
	double tolerance);

VectorField apply_buoyancy(const VectorField &vel, const ScalarField &rho, double buoyancy, double dt);
SimState add_source(const SimState &state, const SceneConfig &scene);
/// Zero normal velocity at domain walls, zero velocity in solids.
VectorField enforce_boundaries(const VectorField &vel, const ObstacleMask &mask);

/// Max |divergence| over interior fluid cells (the cells the projection
/// constrains).
double max_interior_divergence(const VectorField &vel, const ObstacleMask &mask);

class Solver {
public:
	explicit Solver(SceneConfig scene);

	const SceneConfig &scene() const { return scene_; }
	const ObstacleMask &mask() const { return mask_; }

	/// Advances by `dt`; frame_index moves by dt / dt_small.
	SimState step(const SimState &state, double dt) const;
	/// The initial state of the scene (seeded).
	SimState initial_state() const;

private:
	SceneConfig scene_;
	ObstacleMask mask_;
};

/// Free-function form of Solver::step.
SimState step(const SimState &state, double dt, const SceneConfig &scene);

/// Seeded scene with documented parameter ranges (see scenes.cpp).
SceneConfig make_scene(SceneKind kind, const GridSpec &grid, std::uint64_t seed, double dt_small = 0.5,
	double dt_large = 4.0, int num_steps = 64);

} // namespace smokecorr
