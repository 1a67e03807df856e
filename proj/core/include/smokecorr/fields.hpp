#pragma once

/// \file
/// Cell-centered grid fields and the pure operators shared by the solver,
/// the networks and the losses.
///
/// Cell (x, y, z) sits at integer coordinates; the cell size is one grid
/// unit. Storage is row-major with x fastest. Vector fields hold `d`
/// contiguous component planes (x plane, then y, then z).

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace smokecorr {

/// Thrown when two fields that must share a grid do not.
class GridMismatch : public std::invalid_argument {
public:
	using std::invalid_argument::invalid_argument;
};

enum class Axis { x = 0, y = 1, z = 2 };

Axis parse_axis(const std::string &name);
const char *axis_name(Axis axis);

class GridSpec {
public:
	GridSpec() = default;
	/// 2 or 3 extents, each >= 1.
	explicit GridSpec(std::vector<int> dims);
	GridSpec(int nx, int ny);
	GridSpec(int nx, int ny, int nz);

	int d() const { return d_; }
	int nx() const { return dims_[0]; }
	int ny() const { return dims_[1]; }
	int nz() const { return dims_[2]; }
	int extent(int axis) const { return dims_[static_cast<std::size_t>(axis)]; }
	std::vector<int> dims() const;
	std::size_t cells() const {
		return static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2];
	}
	std::size_t index(int x, int y, int z = 0) const {
		return static_cast<std::size_t>(x) +
			static_cast<std::size_t>(dims_[0]) * (static_cast<std::size_t>(y) +
			static_cast<std::size_t>(dims_[1]) * static_cast<std::size_t>(z));
	}
	/// Simulation grids need every extent >= 8.
	void require_simulation_extent() const;
	std::string to_string() const;

	friend bool operator==(const GridSpec &, const GridSpec &) = default;

private:
	int d_ = 0;
	/// Unused trailing axes are 1.
	std::array<int, 3> dims_{1, 1, 1};
};

void require_same_grid(const GridSpec &a, const GridSpec &b, const char *what);

class ScalarField {
public:
	ScalarField() = default;
	explicit ScalarField(GridSpec spec, float fill = 0.0f);
	ScalarField(GridSpec spec, std::vector<float> values);

	const GridSpec &spec() const { return spec_; }
	std::span<const float> values() const { return values_; }
	std::span<float> values() { return values_; }
	std::size_t size() const { return values_.size(); }

	float operator()(int x, int y, int z = 0) const { return values_[spec_.index(x, y, z)]; }
	float &operator()(int x, int y, int z = 0) { return values_[spec_.index(x, y, z)]; }
	float operator[](std::size_t i) const { return values_[i]; }
	float &operator[](std::size_t i) { return values_[i]; }

	bool all_finite() const;
	double sum() const;

private:
	GridSpec spec_;
	std::vector<float> values_;
};

class VectorField {
public:
	VectorField() = default;
	explicit VectorField(GridSpec spec, float fill = 0.0f);
	VectorField(GridSpec spec, std::vector<float> values);

	const GridSpec &spec() const { return spec_; }
	int components() const { return spec_.d(); }
	std::span<const float> values() const { return values_; }
	std::span<float> values() { return values_; }
	std::span<const float> component(int c) const;
	std::span<float> component(int c);
	ScalarField component_field(int c) const;
	void set_component(int c, const ScalarField &plane);

	float operator()(int c, int x, int y, int z = 0) const {
		return values_[static_cast<std::size_t>(c) * spec_.cells() + spec_.index(x, y, z)];
	}
	float &operator()(int c, int x, int y, int z = 0) {
		return values_[static_cast<std::size_t>(c) * spec_.cells() + spec_.index(x, y, z)];
	}

	bool all_finite() const;

private:
	GridSpec spec_;
	std::vector<float> values_;
};

/// Per-cell displacement in grid-cell units.
using FlowField = VectorField;

/// Per-cell Jacobian; plane `i * d + j` holds dv_i / dx_j.
struct Jacobian {
	GridSpec spec;
	std::vector<float> values;

	float operator()(int i, int j, int x, int y, int z = 0) const {
		return values[static_cast<std::size_t>(i * spec.d() + j) * spec.cells() + spec.index(x, y, z)];
	}
};

/// Bilinear / trilinear interpolation with clamp-to-edge.
/// `position` holds d coordinates in cell units.
float sample(const ScalarField &field, std::span<const double> position);
float sample(const ScalarField &field, double x, double y, double z = 0.0);

/// Backward warp: out(x) = sample(rho, x - flow(x)).
ScalarField warp(const ScalarField &rho, const FlowField &flow);

/// Central differences inside, one-sided at the boundary cells.
Jacobian gradient(const VectorField &field);
ScalarField divergence(const VectorField &vel);

/// Axis mean of a 3D field. The remaining axes keep their order, the
/// lower one fastest: z -> (x, y), y -> (x, z), x -> (y, z).
ScalarField project_mean(const ScalarField &field, Axis axis);

/// Finite time difference of the two-frame concatenation, i.e. b - a.
ScalarField time_concat_diff(const ScalarField &a, const ScalarField &b);
VectorField time_concat_diff(const VectorField &a, const VectorField &b);

} // namespace smokecorr
