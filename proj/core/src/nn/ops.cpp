#include <algorithm>
#include <cblas.h>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <unordered_set>

#include "smokecorr/detail/interp.hpp"
#include "smokecorr/nn/autograd.hpp"

namespace smokecorr::nn {

namespace {

thread_local bool g_grad_enabled = true;

void gemm(bool ta, bool tb, int m, int n, int k, float alpha, const float *a, int lda, const float *b, int ldb,
	float beta, float *c, int ldc) {
	cblas_sgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, m, n, k, alpha, a,
		lda, b, ldb, beta, c, ldc);
}

void gemm(bool ta, bool tb, int m, int n, int k, double alpha, const double *a, int lda, const double *b, int ldb,
	double beta, double *c, int ldc) {
	cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, m, n, k, alpha, a,
		lda, b, ldb, beta, c, ldc);
}

void require_same_shape(const Shape &a, const Shape &b, const char *op) {
	if (!(a == b)) {
		throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.to_string() + " vs " + b.to_string());
	}
}

/// Wraps `value` into a node; records the closure only when some parent
/// needs a gradient.
template <typename T>
Var<T> make_node(Tensor<T> value, std::vector<Var<T>> parents, std::function<void(Node<T> &)> fn) {
	auto node = std::make_shared<Node<T>>();
	node->value = std::move(value);
	if (!g_grad_enabled) return node;
	const bool needs = std::any_of(parents.begin(), parents.end(), [](const Var<T> &p) { return p->requires_grad; });
	if (!needs) return node;
	node->requires_grad = true;
	node->parents = std::move(parents);
	node->backward_fn = std::move(fn);
	return node;
}

template <typename T>
Tensor<T> scalar_tensor(T v) {
	Shape s;
	s.n = s.c = s.d = s.h = s.w = 1;
	return Tensor<T>(s, std::vector<T>{v});
}

} // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

template <typename T>
Var<T> constant(Tensor<T> value) {
	auto node = std::make_shared<Node<T>>();
	node->value = std::move(value);
	return node;
}

template <typename T>
Var<T> parameter(Tensor<T> value) {
	auto node = std::make_shared<Node<T>>();
	node->value = std::move(value);
	node->requires_grad = true;
	return node;
}

template <typename T>
void backward(const Var<T> &root) {
	if (root->value.size() != 1) throw std::invalid_argument("backward needs a scalar root");
	if (!root->requires_grad) return;

	std::vector<Node<T> *> order;
	std::unordered_set<Node<T> *> seen;
	std::vector<std::pair<Node<T> *, std::size_t>> stack{{root.get(), 0}};
	seen.insert(root.get());
	while (!stack.empty()) {
		auto &[node, next] = stack.back();
		if (next < node->parents.size()) {
			Node<T> *p = node->parents[next++].get();
			if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
		} else {
			order.push_back(node);
			stack.pop_back();
		}
	}
	root->grad_buffer()[0] += T(1);
	for (auto it = order.rbegin(); it != order.rend(); ++it) {
		Node<T> *node = *it;
		if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
	}
}

// ---------------------------------------------------------------- elementwise

template <typename T>
Var<T> add(const Var<T> &a, const Var<T> &b) {
	require_same_shape(a->shape(), b->shape(), "add");
	Tensor<T> out(a->shape());
	for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = a->value.data[i] + b->value.data[i];
	return make_node<T>(std::move(out), {a, b}, [](Node<T> &self) {
		for (auto &p : self.parents) {
			if (!p->requires_grad) continue;
			auto &g = p->grad_buffer();
			for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
		}
	});
}

template <typename T>
Var<T> sub(const Var<T> &a, const Var<T> &b) {
	require_same_shape(a->shape(), b->shape(), "sub");
	Tensor<T> out(a->shape());
	for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = a->value.data[i] - b->value.data[i];
	return make_node<T>(std::move(out), {a, b}, [](Node<T> &self) {
		if (self.parents[0]->requires_grad) {
			auto &g = self.parents[0]->grad_buffer();
			for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
		}
		if (self.parents[1]->requires_grad) {
			auto &g = self.parents[1]->grad_buffer();
			for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
		}
	});
}

template <typename T>
Var<T> mul(const Var<T> &a, const Var<T> &b) {
	require_same_shape(a->shape(), b->shape(), "mul");
	Tensor<T> out(a->shape());
	for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = a->value.data[i] * b->value.data[i];
	return make_node<T>(std::move(out), {a, b}, [](Node<T> &self) {
		auto &pa = self.parents[0];
		auto &pb = self.parents[1];
		if (pa->requires_grad) {
			auto &g = pa->grad_buffer();
			for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb->value.data[i];
		}
		if (pb->requires_grad) {
			auto &g = pb->grad_buffer();
			for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa->value.data[i];
		}
	});
}

template <typename T>
Var<T> div(const Var<T> &a, const Var<T> &b) {
	require_same_shape(a->shape(), b->shape(), "div");
	Tensor<T> out(a->shape());
	for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = a->value.data[i] / b->value.data[i];
	return make_node<T>(std::move(out), {a, b}, [](Node<T> &self) {
		auto &pa = self.parents[0];
		auto &pb = self.parents[1];
		if (pa->requires_grad) {
			auto &g = pa->grad_buffer();
			for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] / pb->value.data[i];
		}
		if (pb->requires_grad) {
			auto &g = pb->grad_buffer();
			for (std::size_t i = 0; i < g.size(); ++i) {
				const T q = self.value.data[i] / pb->value.data[i];
				g[i] -= self.grad[i] * q;
			}
		}
	});
}

template <typename T>
Var<T> scale(const Var<T> &a, T s) {
	Tensor<T> out(a->shape());
	for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = a->value.data[i] * s;
	return make_node<T>(std::move(out), {a}, [s](Node<T> &self) {
		auto &g = self.parents[0]->grad_buffer();
		for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * s;
	});
}

template <typename T>
Var<T> add_scalar(const Var<T> &a, T s) {
	Tensor<T> out(a->shape());
	for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = a->value.data[i] + s;
	return make_node<T>(std::move(out), {a}, [](Node<T> &self) {
		auto &g = self.parents[0]->grad_buffer();
		for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
	});
}

template <typename T>
Var<T> scale_per_sample(const Var<T> &a, const std::vector<T> &s) {
	const Shape &sh = a->shape();
	if (static_cast<int>(s.size()) != sh.n) throw std::invalid_argument("scale_per_sample: one factor per sample");
	Tensor<T> out(sh);
	const std::size_t per = sh.per_sample();
	for (int n = 0; n < sh.n; ++n)
		for (std::size_t i = 0; i < per; ++i) out.data[n * per + i] = a->value.data[n * per + i] * s[n];
	return make_node<T>(std::move(out), {a}, [s, per](Node<T> &self) {
		auto &g = self.parents[0]->grad_buffer();
		for (std::size_t n = 0; n < s.size(); ++n)
			for (std::size_t i = 0; i < per; ++i) g[n * per + i] += self.grad[n * per + i] * s[n];
	});
}

template <typename T>
Var<T> channel_affine(const Var<T> &a, const std::vector<T> &scale_c, const std::vector<T> &shift_c) {
	const Shape &sh = a->shape();
	if (static_cast<int>(scale_c.size()) != sh.c || static_cast<int>(shift_c.size()) != sh.c) {
		throw std::invalid_argument("channel_affine: one scale/shift per channel");
	}
	Tensor<T> out(sh);
	const std::size_t sp = sh.spatial();
	for (int n = 0; n < sh.n; ++n)
		for (int c = 0; c < sh.c; ++c) {
			const T *src = a->value.channel(n, c);
			T *dst = out.channel(n, c);
			for (std::size_t i = 0; i < sp; ++i) dst[i] = src[i] * scale_c[c] + shift_c[c];
		}
	return make_node<T>(std::move(out), {a}, [scale_c, sp](Node<T> &self) {
		auto &g = self.parents[0]->grad_buffer();
		const Shape &s = self.shape();
		for (int n = 0; n < s.n; ++n)
			for (int c = 0; c < s.c; ++c) {
				const std::size_t base = (static_cast<std::size_t>(n) * s.c + c) * sp;
				for (std::size_t i = 0; i < sp; ++i) g[base + i] += self.grad[base + i] * scale_c[c];
			}
	});
}

template <typename T>
Var<T> leaky_relu(const Var<T> &a, T slope) {
	Tensor<T> out(a->shape());
	for (std::size_t i = 0; i < out.size(); ++i) {
		const T v = a->value.data[i];
		out.data[i] = v > T(0) ? v : v * slope;
	}
	return make_node<T>(std::move(out), {a}, [slope](Node<T> &self) {
		auto &p = self.parents[0];
		auto &g = p->grad_buffer();
		for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * (p->value.data[i] > T(0) ? T(1) : slope);
	});
}

template <typename T>
Var<T> sigmoid(const Var<T> &a) {
	Tensor<T> out(a->shape());
	for (std::size_t i = 0; i < out.size(); ++i) {
		const T v = a->value.data[i];
		// Split by sign to avoid overflow in exp.
		if (v >= T(0)) {
			out.data[i] = T(1) / (T(1) + std::exp(-v));
		} else {
			const T e = std::exp(v);
			out.data[i] = e / (T(1) + e);
		}
	}
	return make_node<T>(std::move(out), {a}, [](Node<T> &self) {
		auto &g = self.parents[0]->grad_buffer();
		for (std::size_t i = 0; i < g.size(); ++i) {
			const T s = self.value.data[i];
			g[i] += self.grad[i] * s * (T(1) - s);
		}
	});
}

template <typename T>
Var<T> clamp(const Var<T> &a, T lo, T hi) {
	Tensor<T> out(a->shape());
	for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = std::clamp(a->value.data[i], lo, hi);
	return make_node<T>(std::move(out), {a}, [lo, hi](Node<T> &self) {
		auto &p = self.parents[0];
		auto &g = p->grad_buffer();
		for (std::size_t i = 0; i < g.size(); ++i) {
			const T v = p->value.data[i];
			if (v > lo && v < hi) g[i] += self.grad[i];
		}
	});
}

// ---------------------------------------------------------------- convolution

namespace {

struct ConvGeometry {
	int cin, d, h, w, kd, kh, kw;
	int pd() const { return kd / 2; }
	int ph() const { return kh / 2; }
	int pw() const { return kw / 2; }
	std::size_t spatial() const { return static_cast<std::size_t>(d) * h * w; }
	std::size_t rows() const { return static_cast<std::size_t>(cin) * kd * kh * kw; }
	bool pointwise() const { return kd == 1 && kh == 1 && kw == 1; }
};

template <typename T>
void im2col(const T *in, const ConvGeometry &g, T *cols) {
	const std::size_t sp = g.spatial();
	std::size_t row = 0;
	for (int ci = 0; ci < g.cin; ++ci) {
		const T *plane = in + static_cast<std::size_t>(ci) * sp;
		for (int kz = 0; kz < g.kd; ++kz)
			for (int ky = 0; ky < g.kh; ++ky)
				for (int kx = 0; kx < g.kw; ++kx, ++row) {
					T *dst = cols + row * sp;
					const int oz = kz - g.pd(), oy = ky - g.ph(), ox = kx - g.pw();
					const int x0 = std::max(0, -ox), x1 = std::min(g.w, g.w - ox);
					for (int z = 0; z < g.d; ++z) {
						const int sz = z + oz;
						for (int y = 0; y < g.h; ++y) {
							T *out_row = dst + (static_cast<std::size_t>(z) * g.h + y) * g.w;
							const int sy = y + oy;
							if (sz < 0 || sz >= g.d || sy < 0 || sy >= g.h || x0 >= x1) {
								std::fill(out_row, out_row + g.w, T(0));
								continue;
							}
							const T *src = plane + (static_cast<std::size_t>(sz) * g.h + sy) * g.w;
							std::fill(out_row, out_row + x0, T(0));
							for (int x = x0; x < x1; ++x) out_row[x] = src[x + ox];
							std::fill(out_row + x1, out_row + g.w, T(0));
						}
					}
				}
	}
}

template <typename T>
void col2im_add(const T *cols, const ConvGeometry &g, T *in_grad) {
	const std::size_t sp = g.spatial();
	std::size_t row = 0;
	for (int ci = 0; ci < g.cin; ++ci) {
		T *plane = in_grad + static_cast<std::size_t>(ci) * sp;
		for (int kz = 0; kz < g.kd; ++kz)
			for (int ky = 0; ky < g.kh; ++ky)
				for (int kx = 0; kx < g.kw; ++kx, ++row) {
					const T *src_cols = cols + row * sp;
					const int oz = kz - g.pd(), oy = ky - g.ph(), ox = kx - g.pw();
					const int x0 = std::max(0, -ox), x1 = std::min(g.w, g.w - ox);
					for (int z = 0; z < g.d; ++z) {
						const int sz = z + oz;
						if (sz < 0 || sz >= g.d) continue;
						for (int y = 0; y < g.h; ++y) {
							const int sy = y + oy;
							if (sy < 0 || sy >= g.h) continue;
							const T *c_row = src_cols + (static_cast<std::size_t>(z) * g.h + y) * g.w;
							T *dst = plane + (static_cast<std::size_t>(sz) * g.h + sy) * g.w;
							for (int x = x0; x < x1; ++x) dst[x + ox] += c_row[x];
						}
					}
				}
	}
}

} // namespace

template <typename T>
Var<T> conv(const Var<T> &x, const Var<T> &weight, const Var<T> &bias) {
	const Shape &xs = x->shape();
	const Shape &ws = weight->shape();
	if (ws.c != xs.c) {
		throw std::invalid_argument("conv: weight expects " + std::to_string(ws.c) + " input channels, got " +
			std::to_string(xs.c));
	}
	if (ws.h % 2 == 0 || ws.w % 2 == 0 || ws.d % 2 == 0 || (xs.rank == 2 && ws.d != 1)) {
		throw std::invalid_argument("conv: kernel extents must be odd (and depth 1 in 2D)");
	}
	if (static_cast<int>(bias->value.size()) != ws.n) throw std::invalid_argument("conv: bias size mismatch");

	const ConvGeometry g{xs.c, xs.d, xs.h, xs.w, ws.d, ws.h, ws.w};
	const int cout = ws.n;
	const int rows = static_cast<int>(g.rows());
	const int sp = static_cast<int>(g.spatial());
	Shape os = xs.with_channels(cout);
	Tensor<T> out(os);
	std::vector<T> cols(g.pointwise() ? 0 : g.rows() * g.spatial());
	for (int n = 0; n < xs.n; ++n) {
		const T *in = x->value.sample(n);
		const T *b_mat = in;
		if (!g.pointwise()) {
			im2col(in, g, cols.data());
			b_mat = cols.data();
		}
		T *dst = out.sample(n);
		for (int co = 0; co < cout; ++co) std::fill(dst + static_cast<std::size_t>(co) * sp, dst + static_cast<std::size_t>(co + 1) * sp, bias->value.data[co]);
		gemm(false, false, cout, sp, rows, T(1), weight->value.data.data(), rows, b_mat, sp, T(1), dst, sp);
	}
	return make_node<T>(std::move(out), {x, weight, bias}, [g, cout, rows, sp](Node<T> &self) {
		auto &px = self.parents[0];
		auto &pw = self.parents[1];
		auto &pb = self.parents[2];
		const int batch = self.shape().n;
		std::vector<T> cols(g.pointwise() ? 0 : g.rows() * g.spatial());
		std::vector<T> dcols(g.rows() * g.spatial());
		for (int n = 0; n < batch; ++n) {
			const T *dy = self.grad.data() + static_cast<std::size_t>(n) * cout * sp;
			if (pw->requires_grad) {
				const T *in = px->value.sample(n);
				const T *b_mat = in;
				if (!g.pointwise()) {
					im2col(in, g, cols.data());
					b_mat = cols.data();
				}
				gemm(false, true, cout, rows, sp, T(1), dy, sp, b_mat, sp, T(1), pw->grad_buffer().data(), rows);
			}
			if (pb->requires_grad) {
				auto &gb = pb->grad_buffer();
				for (int co = 0; co < cout; ++co) {
					T s = 0;
					const T *row = dy + static_cast<std::size_t>(co) * sp;
					for (int i = 0; i < sp; ++i) s += row[i];
					gb[co] += s;
				}
			}
			if (px->requires_grad) {
				T *dx = px->grad_buffer().data() + static_cast<std::size_t>(n) * g.cin * sp;
				if (g.pointwise()) {
					gemm(true, false, rows, sp, cout, T(1), pw->value.data.data(), rows, dy, sp, T(1), dx, sp);
				} else {
					gemm(true, false, rows, sp, cout, T(1), pw->value.data.data(), rows, dy, sp, T(0), dcols.data(), sp);
					col2im_add(dcols.data(), g, dx);
				}
			}
		}
	});
}

// ---------------------------------------------------------------- resampling

template <typename T>
Var<T> max_pool2(const Var<T> &x) {
	const Shape &xs = x->shape();
	const bool three = xs.rank == 3;
	if (xs.h % 2 || xs.w % 2 || (three && xs.d % 2)) {
		throw std::invalid_argument("max_pool2: spatial extents must be even, got " + xs.to_string());
	}
	Shape os = xs;
	os.h /= 2;
	os.w /= 2;
	if (three) os.d /= 2;
	Tensor<T> out(os);
	std::vector<std::uint32_t> argmax(os.size());
	const int kd = three ? 2 : 1;
	std::size_t o = 0;
	for (int n = 0; n < xs.n; ++n)
		for (int c = 0; c < xs.c; ++c) {
			const T *src = x->value.channel(n, c);
			const std::size_t base = (static_cast<std::size_t>(n) * xs.c + c) * xs.spatial();
			for (int z = 0; z < os.d; ++z)
				for (int y = 0; y < os.h; ++y)
					for (int xx = 0; xx < os.w; ++xx, ++o) {
						std::size_t best = 0;
						T best_v = -std::numeric_limits<T>::infinity();
						for (int dz = 0; dz < kd; ++dz)
							for (int dy = 0; dy < 2; ++dy)
								for (int dx = 0; dx < 2; ++dx) {
									const std::size_t i =
										(static_cast<std::size_t>(z * kd + dz) * xs.h + (y * 2 + dy)) * xs.w + (xx * 2 + dx);
									if (src[i] > best_v) {
										best_v = src[i];
										best = i;
									}
								}
						out.data[o] = best_v;
						argmax[o] = static_cast<std::uint32_t>(base + best);
					}
		}
	return make_node<T>(std::move(out), {x}, [argmax = std::move(argmax)](Node<T> &self) {
		auto &g = self.parents[0]->grad_buffer();
		for (std::size_t i = 0; i < argmax.size(); ++i) g[argmax[i]] += self.grad[i];
	});
}

template <typename T>
Var<T> upsample2(const Var<T> &x) {
	const Shape &xs = x->shape();
	const bool three = xs.rank == 3;
	Shape os = xs;
	os.h *= 2;
	os.w *= 2;
	if (three) os.d *= 2;
	Tensor<T> out(os);
	const int fz = three ? 2 : 1;
	for (int n = 0; n < xs.n; ++n)
		for (int c = 0; c < xs.c; ++c) {
			const T *src = x->value.channel(n, c);
			T *dst = out.channel(n, c);
			for (int z = 0; z < os.d; ++z)
				for (int y = 0; y < os.h; ++y)
					for (int xx = 0; xx < os.w; ++xx)
						dst[(static_cast<std::size_t>(z) * os.h + y) * os.w + xx] =
							src[(static_cast<std::size_t>(z / fz) * xs.h + y / 2) * xs.w + xx / 2];
		}
	return make_node<T>(std::move(out), {x}, [fz](Node<T> &self) {
		auto &p = self.parents[0];
		auto &g = p->grad_buffer();
		const Shape &is = p->shape();
		const Shape &os = self.shape();
		for (int n = 0; n < os.n; ++n)
			for (int c = 0; c < os.c; ++c) {
				const T *src = self.grad.data() + (static_cast<std::size_t>(n) * os.c + c) * os.spatial();
				T *dst = g.data() + (static_cast<std::size_t>(n) * is.c + c) * is.spatial();
				for (int z = 0; z < os.d; ++z)
					for (int y = 0; y < os.h; ++y)
						for (int xx = 0; xx < os.w; ++xx)
							dst[(static_cast<std::size_t>(z / fz) * is.h + y / 2) * is.w + xx / 2] +=
								src[(static_cast<std::size_t>(z) * os.h + y) * os.w + xx];
			}
	});
}

template <typename T>
Var<T> concat_channels(const std::vector<Var<T>> &parts) {
	if (parts.empty()) throw std::invalid_argument("concat_channels of nothing");
	Shape os = parts.front()->shape();
	int total = 0;
	for (const auto &p : parts) {
		Shape s = p->shape();
		if (s.n != os.n || s.d != os.d || s.h != os.h || s.w != os.w || s.rank != os.rank) {
			throw std::invalid_argument("concat_channels: mismatched " + s.to_string() + " vs " + os.to_string());
		}
		total += s.c;
	}
	os.c = total;
	Tensor<T> out(os);
	const std::size_t sp = os.spatial();
	for (int n = 0; n < os.n; ++n) {
		T *dst = out.sample(n);
		for (const auto &p : parts) {
			const std::size_t len = static_cast<std::size_t>(p->shape().c) * sp;
			std::copy(p->value.sample(n), p->value.sample(n) + len, dst);
			dst += len;
		}
	}
	return make_node<T>(std::move(out), parts, [sp](Node<T> &self) {
		const Shape &os = self.shape();
		for (int n = 0; n < os.n; ++n) {
			const T *src = self.grad.data() + static_cast<std::size_t>(n) * os.per_sample();
			for (auto &p : self.parents) {
				const std::size_t len = static_cast<std::size_t>(p->shape().c) * sp;
				if (p->requires_grad) {
					T *dst = p->grad_buffer().data() + static_cast<std::size_t>(n) * len;
					for (std::size_t i = 0; i < len; ++i) dst[i] += src[i];
				}
				src += len;
			}
		}
	});
}

template <typename T>
Var<T> slice_channels(const Var<T> &x, int first, int count) {
	const Shape &xs = x->shape();
	if (first < 0 || count < 1 || first + count > xs.c) throw std::invalid_argument("slice_channels out of range");
	Shape os = xs.with_channels(count);
	Tensor<T> out(os);
	const std::size_t sp = xs.spatial();
	for (int n = 0; n < xs.n; ++n) {
		const T *src = x->value.channel(n, first);
		std::copy(src, src + count * sp, out.sample(n));
	}
	return make_node<T>(std::move(out), {x}, [first, count, sp](Node<T> &self) {
		auto &p = self.parents[0];
		auto &g = p->grad_buffer();
		const Shape &is = p->shape();
		for (int n = 0; n < is.n; ++n) {
			T *dst = g.data() + (static_cast<std::size_t>(n) * is.c + first) * sp;
			const T *src = self.grad.data() + static_cast<std::size_t>(n) * count * sp;
			for (std::size_t i = 0; i < count * sp; ++i) dst[i] += src[i];
		}
	});
}

// ---------------------------------------------------------------- warping

namespace {

/// Corner weights and per-axis derivative weights of one linear sample.
template <typename T>
struct SampleStencil {
	std::array<std::size_t, 8> index{};
	std::array<T, 8> weight{};
	/// d weight / d position along x, y, z (zero where clamped).
	std::array<std::array<T, 8>, 3> dweight{};
	int corners = 4;
};

template <typename T>
SampleStencil<T> make_stencil(const Shape &s, double px, double py, double pz) {
	SampleStencil<T> st;
	const auto sx = detail::lerp_stencil(px, s.w);
	const auto sy = detail::lerp_stencil(py, s.h);
	const auto sz = s.rank == 3 ? detail::lerp_stencil(pz, s.d) : detail::LerpStencil{};
	st.corners = s.rank == 3 ? 8 : 4;
	for (int k = 0; k < st.corners; ++k) {
		const int bx = k & 1, by = (k >> 1) & 1, bz = (k >> 2) & 1;
		const int ix = bx ? sx.i1 : sx.i0;
		const int iy = by ? sy.i1 : sy.i0;
		const int iz = bz ? sz.i1 : sz.i0;
		const double wx = bx ? sx.frac : 1.0 - sx.frac;
		const double wy = by ? sy.frac : 1.0 - sy.frac;
		const double wz = s.rank == 3 ? (bz ? sz.frac : 1.0 - sz.frac) : 1.0;
		const double dx = sx.inside ? (bx ? 1.0 : -1.0) : 0.0;
		const double dy = sy.inside ? (by ? 1.0 : -1.0) : 0.0;
		const double dz = s.rank == 3 && sz.inside ? (bz ? 1.0 : -1.0) : 0.0;
		st.index[static_cast<std::size_t>(k)] = (static_cast<std::size_t>(iz) * s.h + iy) * s.w + ix;
		st.weight[static_cast<std::size_t>(k)] = static_cast<T>(wx * wy * wz);
		st.dweight[0][static_cast<std::size_t>(k)] = static_cast<T>(dx * wy * wz);
		st.dweight[1][static_cast<std::size_t>(k)] = static_cast<T>(wx * dy * wz);
		st.dweight[2][static_cast<std::size_t>(k)] = static_cast<T>(wx * wy * dz);
	}
	return st;
}

} // namespace

template <typename T>
Var<T> warp(const Var<T> &img, const Var<T> &flow) {
	const Shape &is = img->shape();
	const Shape &fs = flow->shape();
	if (fs.c != is.rank || fs.n != is.n || fs.d != is.d || fs.h != is.h || fs.w != is.w) {
		throw GridMismatch("warp: flow " + fs.to_string() + " does not match image " + is.to_string());
	}
	Tensor<T> out(is);
	const std::size_t sp = is.spatial();
	for (int n = 0; n < is.n; ++n) {
		const T *f = flow->value.sample(n);
		for (int z = 0; z < is.d; ++z)
			for (int y = 0; y < is.h; ++y)
				for (int x = 0; x < is.w; ++x) {
					const std::size_t cell = (static_cast<std::size_t>(z) * is.h + y) * is.w + x;
					const double px = x - static_cast<double>(f[cell]);
					const double py = y - static_cast<double>(f[sp + cell]);
					const double pz = is.rank == 3 ? z - static_cast<double>(f[2 * sp + cell]) : 0.0;
					const auto st = make_stencil<T>(is, px, py, pz);
					for (int c = 0; c < is.c; ++c) {
						const T *src = img->value.channel(n, c);
						double acc = 0.0;
						for (int k = 0; k < st.corners; ++k) {
							acc += static_cast<double>(st.weight[static_cast<std::size_t>(k)]) * src[st.index[static_cast<std::size_t>(k)]];
						}
						const T v = static_cast<T>(acc);
						out.channel(n, c)[cell] = v;
					}
				}
	}
	return make_node<T>(std::move(out), {img, flow}, [sp](Node<T> &self) {
		auto &pi = self.parents[0];
		auto &pf = self.parents[1];
		const Shape &is = pi->shape();
		for (int n = 0; n < is.n; ++n) {
			const T *f = pf->value.sample(n);
			for (int z = 0; z < is.d; ++z)
				for (int y = 0; y < is.h; ++y)
					for (int x = 0; x < is.w; ++x) {
						const std::size_t cell = (static_cast<std::size_t>(z) * is.h + y) * is.w + x;
						const double px = x - static_cast<double>(f[cell]);
						const double py = y - static_cast<double>(f[sp + cell]);
						const double pz = is.rank == 3 ? z - static_cast<double>(f[2 * sp + cell]) : 0.0;
						const auto st = make_stencil<T>(is, px, py, pz);
						std::array<T, 3> dpos{0, 0, 0};
						for (int c = 0; c < is.c; ++c) {
							const T go = self.grad[(static_cast<std::size_t>(n) * is.c + c) * sp + cell];
							if (go == T(0)) continue;
							const T *src = pi->value.channel(n, c);
							if (pi->requires_grad) {
								T *gi = pi->grad_buffer().data() + (static_cast<std::size_t>(n) * is.c + c) * sp;
								for (int k = 0; k < st.corners; ++k) gi[st.index[static_cast<std::size_t>(k)]] += go * st.weight[static_cast<std::size_t>(k)];
							}
							for (int a = 0; a < is.rank; ++a)
								for (int k = 0; k < st.corners; ++k)
									dpos[static_cast<std::size_t>(a)] += go * st.dweight[static_cast<std::size_t>(a)][static_cast<std::size_t>(k)] * src[st.index[static_cast<std::size_t>(k)]];
						}
						if (pf->requires_grad) {
							T *gf = pf->grad_buffer().data() + static_cast<std::size_t>(n) * is.rank * sp;
							// position = x - flow
							for (int a = 0; a < is.rank; ++a) gf[static_cast<std::size_t>(a) * sp + cell] -= dpos[static_cast<std::size_t>(a)];
						}
					}
		}
	});
}

// ---------------------------------------------------------------- derivatives

namespace {

/// Visits every (cell, neighbour, coefficient) of the axis-`a` derivative stencil.
template <typename F>
void for_derivative_stencil(const Shape &s, int a, F &&f) {
	const int n = s.axis_extent(a);
	const std::size_t stride = a == 0 ? 1 : a == 1 ? static_cast<std::size_t>(s.w) : static_cast<std::size_t>(s.w) * s.h;
	if (n < 2) return;
	for (int z = 0; z < s.d; ++z)
		for (int y = 0; y < s.h; ++y)
			for (int x = 0; x < s.w; ++x) {
				const std::size_t cell = (static_cast<std::size_t>(z) * s.h + y) * s.w + x;
				const int i = a == 0 ? x : a == 1 ? y : z;
				if (i == 0) {
					f(cell, cell + stride, 1.0);
					f(cell, cell, -1.0);
				} else if (i == n - 1) {
					f(cell, cell, 1.0);
					f(cell, cell - stride, -1.0);
				} else {
					f(cell, cell + stride, 0.5);
					f(cell, cell - stride, -0.5);
				}
			}
}

} // namespace

template <typename T>
Var<T> spatial_gradient(const Var<T> &x) {
	const Shape &xs = x->shape();
	const int r = xs.rank;
	Tensor<T> out(xs.with_channels(xs.c * r));
	for (int n = 0; n < xs.n; ++n)
		for (int c = 0; c < xs.c; ++c) {
			const T *src = x->value.channel(n, c);
			for (int a = 0; a < r; ++a) {
				T *dst = out.channel(n, c * r + a);
				for_derivative_stencil(xs, a, [&](std::size_t cell, std::size_t nb, double k) {
					dst[cell] += static_cast<T>(k) * src[nb];
				});
			}
		}
	return make_node<T>(std::move(out), {x}, [r](Node<T> &self) {
		auto &p = self.parents[0];
		const Shape &xs = p->shape();
		auto &g = p->grad_buffer();
		const std::size_t sp = xs.spatial();
		for (int n = 0; n < xs.n; ++n)
			for (int c = 0; c < xs.c; ++c) {
				T *dst = g.data() + (static_cast<std::size_t>(n) * xs.c + c) * sp;
				for (int a = 0; a < r; ++a) {
					const T *go = self.grad.data() + (static_cast<std::size_t>(n) * xs.c * r + c * r + a) * sp;
					for_derivative_stencil(xs, a, [&](std::size_t cell, std::size_t nb, double k) {
						dst[nb] += static_cast<T>(k) * go[cell];
					});
				}
			}
	});
}

template <typename T>
Var<T> project_mean(const Var<T> &x, Axis axis) {
	const Shape &xs = x->shape();
	if (xs.rank != 3) throw std::invalid_argument("project_mean needs a rank-3 tensor");
	// Output (u, v) axes: z -> (x, y), y -> (x, z), x -> (y, z).
	Shape os = xs;
	os.rank = 2;
	os.d = 1;
	int len = 0;
	switch (axis) {
	case Axis::z: os.w = xs.w; os.h = xs.h; len = xs.d; break;
	case Axis::y: os.w = xs.w; os.h = xs.d; len = xs.h; break;
	case Axis::x: os.w = xs.h; os.h = xs.d; len = xs.w; break;
	}
	auto out_index = [axis, os](int x, int y, int z) -> std::size_t {
		switch (axis) {
		case Axis::z: return static_cast<std::size_t>(y) * os.w + x;
		case Axis::y: return static_cast<std::size_t>(z) * os.w + x;
		default: return static_cast<std::size_t>(z) * os.w + y;
		}
	};
	Tensor<T> out(os);
	const T inv = T(1) / static_cast<T>(len);
	for (int n = 0; n < xs.n; ++n)
		for (int c = 0; c < xs.c; ++c) {
			const T *src = x->value.channel(n, c);
			T *dst = out.channel(n, c);
			for (int z = 0; z < xs.d; ++z)
				for (int y = 0; y < xs.h; ++y)
					for (int xx = 0; xx < xs.w; ++xx)
						dst[out_index(xx, y, z)] += src[(static_cast<std::size_t>(z) * xs.h + y) * xs.w + xx] * inv;
		}
	return make_node<T>(std::move(out), {x}, [out_index, inv](Node<T> &self) {
		auto &p = self.parents[0];
		const Shape &xs = p->shape();
		const Shape &os = self.shape();
		auto &g = p->grad_buffer();
		for (int n = 0; n < xs.n; ++n)
			for (int c = 0; c < xs.c; ++c) {
				const T *go = self.grad.data() + (static_cast<std::size_t>(n) * os.c + c) * os.spatial();
				T *dst = g.data() + (static_cast<std::size_t>(n) * xs.c + c) * xs.spatial();
				for (int z = 0; z < xs.d; ++z)
					for (int y = 0; y < xs.h; ++y)
						for (int xx = 0; xx < xs.w; ++xx)
							dst[(static_cast<std::size_t>(z) * xs.h + y) * xs.w + xx] += go[out_index(xx, y, z)] * inv;
			}
	});
}

// ---------------------------------------------------------------- reductions

template <typename T>
Var<T> mean(const Var<T> &x) {
	double s = 0.0;
	for (T v : x->value.data) s += v;
	const std::size_t count = x->value.size();
	return make_node<T>(scalar_tensor<T>(static_cast<T>(s / static_cast<double>(count))), {x}, [count](Node<T> &self) {
		auto &g = self.parents[0]->grad_buffer();
		const T go = self.grad[0] / static_cast<T>(count);
		for (auto &v : g) v += go;
	});
}

template <typename T>
Var<T> mean_abs(const Var<T> &x) {
	double s = 0.0;
	for (T v : x->value.data) s += std::abs(static_cast<double>(v));
	const std::size_t count = x->value.size();
	return make_node<T>(scalar_tensor<T>(static_cast<T>(s / static_cast<double>(count))), {x}, [count](Node<T> &self) {
		auto &p = self.parents[0];
		auto &g = p->grad_buffer();
		const T go = self.grad[0] / static_cast<T>(count);
		for (std::size_t i = 0; i < g.size(); ++i) {
			const T v = p->value.data[i];
			g[i] += v > T(0) ? go : v < T(0) ? -go : T(0);
		}
	});
}

template <typename T>
Var<T> mean_square(const Var<T> &x) {
	double s = 0.0;
	for (T v : x->value.data) s += static_cast<double>(v) * v;
	const std::size_t count = x->value.size();
	return make_node<T>(scalar_tensor<T>(static_cast<T>(s / static_cast<double>(count))), {x}, [count](Node<T> &self) {
		auto &p = self.parents[0];
		auto &g = p->grad_buffer();
		const T go = T(2) * self.grad[0] / static_cast<T>(count);
		for (std::size_t i = 0; i < g.size(); ++i) g[i] += go * p->value.data[i];
	});
}

#define SMOKECORR_INSTANTIATE(T)                                                                       \
	template Var<T> constant<T>(Tensor<T>);                                                            \
	template Var<T> parameter<T>(Tensor<T>);                                                           \
	template void backward<T>(const Var<T> &);                                                         \
	template Var<T> add<T>(const Var<T> &, const Var<T> &);                                            \
	template Var<T> sub<T>(const Var<T> &, const Var<T> &);                                            \
	template Var<T> mul<T>(const Var<T> &, const Var<T> &);                                            \
	template Var<T> div<T>(const Var<T> &, const Var<T> &);                                            \
	template Var<T> scale<T>(const Var<T> &, T);                                                       \
	template Var<T> add_scalar<T>(const Var<T> &, T);                                                  \
	template Var<T> scale_per_sample<T>(const Var<T> &, const std::vector<T> &);                       \
	template Var<T> channel_affine<T>(const Var<T> &, const std::vector<T> &, const std::vector<T> &);  \
	template Var<T> leaky_relu<T>(const Var<T> &, T);                                                  \
	template Var<T> sigmoid<T>(const Var<T> &);                                                        \
	template Var<T> clamp<T>(const Var<T> &, T, T);                                                    \
	template Var<T> conv<T>(const Var<T> &, const Var<T> &, const Var<T> &);                           \
	template Var<T> max_pool2<T>(const Var<T> &);                                                      \
	template Var<T> upsample2<T>(const Var<T> &);                                                      \
	template Var<T> concat_channels<T>(const std::vector<Var<T>> &);                                   \
	template Var<T> slice_channels<T>(const Var<T> &, int, int);                                       \
	template Var<T> warp<T>(const Var<T> &, const Var<T> &);                                           \
	template Var<T> spatial_gradient<T>(const Var<T> &);                                               \
	template Var<T> project_mean<T>(const Var<T> &, Axis);                                             \
	template Var<T> mean<T>(const Var<T> &);                                                           \
	template Var<T> mean_abs<T>(const Var<T> &);                                                       \
	template Var<T> mean_square<T>(const Var<T> &);

SMOKECORR_INSTANTIATE(float)
SMOKECORR_INSTANTIATE(double)

} // namespace smokecorr::nn
