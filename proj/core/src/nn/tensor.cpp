#include "smokecorr/nn/tensor.hpp"

#include <sstream>
#include <stdexcept>

namespace smokecorr::nn {

std::string Shape::to_string() const {
	std::ostringstream out;
	out << "[" << n << ", " << c << ", ";
	if (rank == 3) out << d << ", ";
	out << h << ", " << w << "]";
	return out.str();
}

Shape shape_for(const GridSpec &grid, int channels, int n) {
	Shape s;
	s.n = n;
	s.c = channels;
	s.w = grid.nx();
	s.h = grid.ny();
	s.d = grid.d() == 3 ? grid.nz() : 1;
	s.rank = grid.d();
	return s;
}

template <typename T>
Tensor<T>::Tensor(Shape s, std::vector<T> values) : shape(s), data(std::move(values)) {
	if (data.size() != shape.size()) {
		throw std::invalid_argument("tensor data does not match shape " + shape.to_string());
	}
}

template <typename T>
Tensor<T> to_tensor(const ScalarField &field) {
	Tensor<T> t(shape_for(field.spec(), 1));
	auto v = field.values();
	for (std::size_t i = 0; i < v.size(); ++i) t.data[i] = static_cast<T>(v[i]);
	return t;
}

template <typename T>
Tensor<T> to_tensor(const VectorField &field) {
	Tensor<T> t(shape_for(field.spec(), field.components()));
	auto v = field.values();
	for (std::size_t i = 0; i < v.size(); ++i) t.data[i] = static_cast<T>(v[i]);
	return t;
}

template <typename T>
Tensor<T> stack_batch(const std::vector<Tensor<T>> &items) {
	if (items.empty()) throw std::invalid_argument("stack_batch of nothing");
	Shape s = items.front().shape;
	if (s.n != 1) throw std::invalid_argument("stack_batch expects single-sample tensors");
	s.n = static_cast<int>(items.size());
	Tensor<T> out(s);
	for (std::size_t i = 0; i < items.size(); ++i) {
		Shape si = items[i].shape;
		if (!(si == items.front().shape)) throw std::invalid_argument("stack_batch shape mismatch");
		std::copy(items[i].data.begin(), items[i].data.end(), out.sample(static_cast<int>(i)));
	}
	return out;
}

namespace {

void check_grid(const Shape &s, const GridSpec &grid) {
	if (s.rank != grid.d() || s.w != grid.nx() || s.h != grid.ny() || (grid.d() == 3 && s.d != grid.nz())) {
		throw GridMismatch("tensor " + s.to_string() + " does not match grid " + grid.to_string());
	}
}

} // namespace

template <typename T>
ScalarField to_scalar_field(const Tensor<T> &t, const GridSpec &grid, int sample, int channel) {
	check_grid(t.shape, grid);
	ScalarField out(grid);
	const T *src = t.channel(sample, channel);
	auto dst = out.values();
	for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<float>(src[i]);
	return out;
}

template <typename T>
VectorField to_vector_field(const Tensor<T> &t, const GridSpec &grid, int sample, int first_channel) {
	check_grid(t.shape, grid);
	if (first_channel + grid.d() > t.shape.c) throw std::invalid_argument("not enough channels for a vector field");
	VectorField out(grid);
	const T *src = t.channel(sample, first_channel);
	auto dst = out.values();
	for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<float>(src[i]);
	return out;
}

#define SMOKECORR_INSTANTIATE(T)                                                                      \
	template struct Tensor<T>;                                                                        \
	template Tensor<T> to_tensor<T>(const ScalarField &);                                             \
	template Tensor<T> to_tensor<T>(const VectorField &);                                             \
	template Tensor<T> stack_batch<T>(const std::vector<Tensor<T>> &);                                \
	template ScalarField to_scalar_field<T>(const Tensor<T> &, const GridSpec &, int, int);           \
	template VectorField to_vector_field<T>(const Tensor<T> &, const GridSpec &, int, int);

SMOKECORR_INSTANTIATE(float)
SMOKECORR_INSTANTIATE(double)

} // namespace smokecorr::nn
