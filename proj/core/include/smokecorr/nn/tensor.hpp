#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "smokecorr/fields.hpp"

namespace smokecorr::nn {

/// Batch x channels x (depth) x height x width. 2D tensors keep depth = 1.
struct Shape {
	int n = 1;
	int c = 1;
	int d = 1;
	int h = 1;
	int w = 1;
	/// Number of spatial axes (2 or 3).
	int rank = 2;

	std::size_t spatial() const { return static_cast<std::size_t>(d) * h * w; }
	std::size_t per_sample() const { return static_cast<std::size_t>(c) * spatial(); }
	std::size_t size() const { return static_cast<std::size_t>(n) * per_sample(); }
	/// Extent of spatial axis `a` in field order (x, y, z).
	int axis_extent(int a) const { return a == 0 ? w : a == 1 ? h : d; }
	Shape with_channels(int channels) const {
		Shape s = *this;
		s.c = channels;
		return s;
	}
	std::string to_string() const;

	friend bool operator==(const Shape &, const Shape &) = default;
};

/// Shape of an n-sample batch of `channels`-channel tensors on `grid`.
Shape shape_for(const GridSpec &grid, int channels, int n = 1);

template <typename T>
struct Tensor {
	Shape shape;
	std::vector<T> data;

	Tensor() = default;
	explicit Tensor(Shape s, T fill = T(0)) : shape(s), data(s.size(), fill) {}
	Tensor(Shape s, std::vector<T> values);

	std::size_t size() const { return data.size(); }
	T *sample(int i) { return data.data() + static_cast<std::size_t>(i) * shape.per_sample(); }
	const T *sample(int i) const { return data.data() + static_cast<std::size_t>(i) * shape.per_sample(); }
	T *channel(int i, int ch) { return sample(i) + static_cast<std::size_t>(ch) * shape.spatial(); }
	const T *channel(int i, int ch) const { return sample(i) + static_cast<std::size_t>(ch) * shape.spatial(); }
};

/// Field <-> tensor conversion. A scalar field becomes one channel, a vector
/// field d channels (component planes), both with n = 1.
template <typename T>
Tensor<T> to_tensor(const ScalarField &field);
template <typename T>
Tensor<T> to_tensor(const VectorField &field);
/// Stacks `items` (each n = 1) along the batch axis.
template <typename T>
Tensor<T> stack_batch(const std::vector<Tensor<T>> &items);

template <typename T>
ScalarField to_scalar_field(const Tensor<T> &t, const GridSpec &grid, int sample = 0, int channel = 0);
template <typename T>
VectorField to_vector_field(const Tensor<T> &t, const GridSpec &grid, int sample = 0, int first_channel = 0);

} // namespace smokecorr::nn
