#pragma once

/// \file
/// Tape-free reverse-mode differentiation over Tensor values.
///
/// Every op returns a new node holding its value and, when gradients are
/// enabled and an input requires them, a closure that pushes the output
/// gradient back to its parents. `backward(loss)` walks the graph in
/// reverse topological order. Graphs are released with the last Var that
/// references them; parameters never reference their consumers.

#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "smokecorr/fields.hpp"
#include "smokecorr/nn/tensor.hpp"

namespace smokecorr::nn {

template <typename T>
struct Node {
	Tensor<T> value;
	/// Empty until a gradient is accumulated.
	std::vector<T> grad;
	bool requires_grad = false;
	std::vector<std::shared_ptr<Node>> parents;
	std::function<void(Node &)> backward_fn;

	const Shape &shape() const { return value.shape; }
	std::vector<T> &grad_buffer() {
		if (grad.empty()) grad.assign(value.size(), T(0));
		return grad;
	}
};

template <typename T>
using Var = std::shared_ptr<Node<T>>;

bool grad_enabled();

/// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
public:
	NoGradGuard();
	~NoGradGuard();
	NoGradGuard(const NoGradGuard &) = delete;
	NoGradGuard &operator=(const NoGradGuard &) = delete;

private:
	bool previous_;
};

template <typename T>
Var<T> constant(Tensor<T> value);
template <typename T>
Var<T> parameter(Tensor<T> value);

/// `root` must hold a single value.
template <typename T>
void backward(const Var<T> &root);

// Elementwise, shapes must match exactly.
template <typename T> Var<T> add(const Var<T> &a, const Var<T> &b);
template <typename T> Var<T> sub(const Var<T> &a, const Var<T> &b);
template <typename T> Var<T> mul(const Var<T> &a, const Var<T> &b);
template <typename T> Var<T> div(const Var<T> &a, const Var<T> &b);
template <typename T> Var<T> scale(const Var<T> &a, T s);
template <typename T> Var<T> add_scalar(const Var<T> &a, T s);
/// Multiplies every value of sample i by s[i].
template <typename T> Var<T> scale_per_sample(const Var<T> &a, const std::vector<T> &s);
/// x * scale[c] + shift[c] per channel.
template <typename T>
Var<T> channel_affine(const Var<T> &a, const std::vector<T> &scale, const std::vector<T> &shift);

template <typename T> Var<T> leaky_relu(const Var<T> &a, T slope);
template <typename T> Var<T> sigmoid(const Var<T> &a);
/// Gradient passes only where lo < x < hi.
template <typename T> Var<T> clamp(const Var<T> &a, T lo, T hi);

/// Stride-1 convolution with zero "same" padding. `weight` has shape
/// (n = out channels, c = in channels, d, h, w = odd kernel extents).
template <typename T> Var<T> conv(const Var<T> &x, const Var<T> &weight, const Var<T> &bias);
/// 2x2 (2D) or 2x2x2 (3D) max pooling; spatial extents must be even.
template <typename T> Var<T> max_pool2(const Var<T> &x);
/// Nearest-neighbour up-sampling by 2 per spatial axis.
template <typename T> Var<T> upsample2(const Var<T> &x);

template <typename T> Var<T> concat_channels(const std::vector<Var<T>> &parts);
template <typename T> Var<T> slice_channels(const Var<T> &x, int first, int count);

/// Backward warp with clamp-to-edge linear sampling:
/// out(x) = img(x - flow(x)). `flow` has `rank` channels in x, y, z order.
template <typename T> Var<T> warp(const Var<T> &img, const Var<T> &flow);
/// Central differences inside, one-sided at the boundary. Output channel
/// c * rank + a holds d(channel c) / d(axis a).
template <typename T> Var<T> spatial_gradient(const Var<T> &x);
/// Mean over one axis of a rank-3 tensor; see smokecorr::project_mean for
/// the layout of the remaining axes.
template <typename T> Var<T> project_mean(const Var<T> &x, Axis axis);

template <typename T> Var<T> mean(const Var<T> &x);
template <typename T> Var<T> mean_abs(const Var<T> &x);
template <typename T> Var<T> mean_square(const Var<T> &x);

template <typename T>
T scalar_value(const Var<T> &v) {
	return v->value.data.at(0);
}

} // namespace smokecorr::nn
