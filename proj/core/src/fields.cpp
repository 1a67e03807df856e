#include "smokecorr/fields.hpp"

#include <cmath>
#include <sstream>

#include "smokecorr/detail/interp.hpp"

namespace smokecorr {

Axis parse_axis(const std::string &name) {
	if (name == "x") return Axis::x;
	if (name == "y") return Axis::y;
	if (name == "z") return Axis::z;
	throw std::invalid_argument("unknown axis '" + name + "' (expected x, y or z)");
}

const char *axis_name(Axis axis) {
	switch (axis) {
	case Axis::x: return "x";
	case Axis::y: return "y";
	case Axis::z: return "z";
	}
	return "?";
}

GridSpec::GridSpec(std::vector<int> dims) {
	if (dims.size() != 2 && dims.size() != 3) {
		throw std::invalid_argument("grid must have 2 or 3 extents, got " + std::to_string(dims.size()));
	}
	d_ = static_cast<int>(dims.size());
	for (std::size_t a = 0; a < dims.size(); ++a) {
		if (dims[a] < 1) {
			throw std::invalid_argument("grid extent must be positive");
		}
		dims_[a] = dims[a];
	}
}

GridSpec::GridSpec(int nx, int ny) : GridSpec(std::vector<int>{nx, ny}) {}
GridSpec::GridSpec(int nx, int ny, int nz) : GridSpec(std::vector<int>{nx, ny, nz}) {}

std::vector<int> GridSpec::dims() const {
	return std::vector<int>(dims_.begin(), dims_.begin() + d_);
}

void GridSpec::require_simulation_extent() const {
	for (int a = 0; a < d_; ++a) {
		if (dims_[static_cast<std::size_t>(a)] < 8) {
			throw std::invalid_argument("simulation grid " + to_string() + " has an extent below 8");
		}
	}
}

std::string GridSpec::to_string() const {
	std::ostringstream out;
	for (int a = 0; a < d_; ++a) {
		out << (a ? "x" : "") << dims_[static_cast<std::size_t>(a)];
	}
	return out.str();
}

void require_same_grid(const GridSpec &a, const GridSpec &b, const char *what) {
	if (!(a == b)) {
		throw GridMismatch(std::string(what) + ": incompatible grids " + a.to_string() + " and " + b.to_string());
	}
}

namespace {

bool finite_span(std::span<const float> v) {
	for (float x : v) {
		if (!std::isfinite(x)) return false;
	}
	return true;
}

} // namespace

ScalarField::ScalarField(GridSpec spec, float fill) : spec_(spec), values_(spec.cells(), fill) {}

ScalarField::ScalarField(GridSpec spec, std::vector<float> values) : spec_(spec), values_(std::move(values)) {
	if (values_.size() != spec_.cells()) {
		throw std::invalid_argument("scalar field value count does not match grid " + spec_.to_string());
	}
}

bool ScalarField::all_finite() const { return finite_span(values_); }

double ScalarField::sum() const {
	double s = 0.0;
	for (float v : values_) s += v;
	return s;
}

VectorField::VectorField(GridSpec spec, float fill) : spec_(spec), values_(spec.cells() * spec.d(), fill) {}

VectorField::VectorField(GridSpec spec, std::vector<float> values) : spec_(spec), values_(std::move(values)) {
	if (values_.size() != spec_.cells() * static_cast<std::size_t>(spec_.d())) {
		throw std::invalid_argument("vector field value count does not match grid " + spec_.to_string());
	}
}

std::span<const float> VectorField::component(int c) const {
	return std::span<const float>(values_).subspan(static_cast<std::size_t>(c) * spec_.cells(), spec_.cells());
}

std::span<float> VectorField::component(int c) {
	return std::span<float>(values_).subspan(static_cast<std::size_t>(c) * spec_.cells(), spec_.cells());
}

ScalarField VectorField::component_field(int c) const {
	auto plane = component(c);
	return ScalarField(spec_, std::vector<float>(plane.begin(), plane.end()));
}

void VectorField::set_component(int c, const ScalarField &plane) {
	require_same_grid(spec_, plane.spec(), "set_component");
	std::copy(plane.values().begin(), plane.values().end(), component(c).begin());
}

bool VectorField::all_finite() const { return finite_span(values_); }

float sample(const ScalarField &field, double x, double y, double z) {
	const GridSpec &g = field.spec();
	const auto sx = detail::lerp_stencil(x, g.nx());
	const auto sy = detail::lerp_stencil(y, g.ny());
	auto lerp = [](double a, double b, double t) { return a * (1.0 - t) + b * t; };
	auto plane = [&](int iz) {
		const double a = lerp(field(sx.i0, sy.i0, iz), field(sx.i1, sy.i0, iz), sx.frac);
		const double b = lerp(field(sx.i0, sy.i1, iz), field(sx.i1, sy.i1, iz), sx.frac);
		return lerp(a, b, sy.frac);
	};
	if (g.d() == 2) {
		return static_cast<float>(plane(0));
	}
	const auto sz = detail::lerp_stencil(z, g.nz());
	return static_cast<float>(lerp(plane(sz.i0), plane(sz.i1), sz.frac));
}

float sample(const ScalarField &field, std::span<const double> position) {
	if (static_cast<int>(position.size()) != field.spec().d()) {
		throw std::invalid_argument("sample position has the wrong number of coordinates");
	}
	return sample(field, position[0], position[1], position.size() > 2 ? position[2] : 0.0);
}

ScalarField warp(const ScalarField &rho, const FlowField &flow) {
	require_same_grid(rho.spec(), flow.spec(), "warp");
	const GridSpec &g = rho.spec();
	ScalarField out(g);
	const bool three = g.d() == 3;
	for (int z = 0; z < g.nz(); ++z) {
		for (int y = 0; y < g.ny(); ++y) {
			for (int x = 0; x < g.nx(); ++x) {
				const double px = x - static_cast<double>(flow(0, x, y, z));
				const double py = y - static_cast<double>(flow(1, x, y, z));
				const double pz = three ? z - static_cast<double>(flow(2, x, y, z)) : 0.0;
				out(x, y, z) = sample(rho, px, py, pz);
			}
		}
	}
	return out;
}

namespace {

/// Derivative of `plane` along `axis` at (x, y, z).
float axis_derivative(std::span<const float> plane, const GridSpec &g, int axis, int x, int y, int z) {
	const int n = g.extent(axis);
	if (n < 2) return 0.0f;
	std::array<int, 3> c{x, y, z};
	const int i = c[static_cast<std::size_t>(axis)];
	auto at = [&](int k) {
		auto p = c;
		p[static_cast<std::size_t>(axis)] = k;
		return plane[g.index(p[0], p[1], p[2])];
	};
	if (i == 0) return at(1) - at(0);
	if (i == n - 1) return at(n - 1) - at(n - 2);
	return 0.5f * (at(i + 1) - at(i - 1));
}

} // namespace

Jacobian gradient(const VectorField &field) {
	const GridSpec &g = field.spec();
	const int d = g.d();
	Jacobian jac{g, std::vector<float>(g.cells() * static_cast<std::size_t>(d * d))};
	for (int i = 0; i < d; ++i) {
		auto plane = field.component(i);
		for (int j = 0; j < d; ++j) {
			float *dst = jac.values.data() + static_cast<std::size_t>(i * d + j) * g.cells();
			for (int z = 0; z < g.nz(); ++z)
				for (int y = 0; y < g.ny(); ++y)
					for (int x = 0; x < g.nx(); ++x)
						dst[g.index(x, y, z)] = axis_derivative(plane, g, j, x, y, z);
		}
	}
	return jac;
}

ScalarField divergence(const VectorField &vel) {
	const GridSpec &g = vel.spec();
	ScalarField out(g);
	for (int a = 0; a < g.d(); ++a) {
		auto plane = vel.component(a);
		for (int z = 0; z < g.nz(); ++z)
			for (int y = 0; y < g.ny(); ++y)
				for (int x = 0; x < g.nx(); ++x)
					out(x, y, z) += axis_derivative(plane, g, a, x, y, z);
	}
	return out;
}

ScalarField project_mean(const ScalarField &field, Axis axis) {
	const GridSpec &g = field.spec();
	if (g.d() != 3) {
		throw std::invalid_argument("project_mean needs a 3D field, got " + g.to_string());
	}
	const int a = static_cast<int>(axis);
	const int n = g.extent(a);
	// (u, v) are the remaining axes, u fastest.
	const int ua = a == 0 ? 1 : 0;
	const int va = a == 2 ? 1 : 2;
	GridSpec out_spec(g.extent(ua), g.extent(va));
	ScalarField out(out_spec);
	for (int v = 0; v < g.extent(va); ++v) {
		for (int u = 0; u < g.extent(ua); ++u) {
			double s = 0.0;
			for (int i = 0; i < n; ++i) {
				std::array<int, 3> c{};
				c[static_cast<std::size_t>(a)] = i;
				c[static_cast<std::size_t>(ua)] = u;
				c[static_cast<std::size_t>(va)] = v;
				s += field(c[0], c[1], c[2]);
			}
			out(u, v) = static_cast<float>(s / n);
		}
	}
	return out;
}

ScalarField time_concat_diff(const ScalarField &a, const ScalarField &b) {
	require_same_grid(a.spec(), b.spec(), "time_concat_diff");
	ScalarField out(a.spec());
	for (std::size_t i = 0; i < out.size(); ++i) out[i] = b[i] - a[i];
	return out;
}

VectorField time_concat_diff(const VectorField &a, const VectorField &b) {
	require_same_grid(a.spec(), b.spec(), "time_concat_diff");
	VectorField out(a.spec());
	auto av = a.values();
	auto bv = b.values();
	auto ov = out.values();
	for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = bv[i] - av[i];
	return out;
}

} // namespace smokecorr
