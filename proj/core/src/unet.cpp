#include "smokecorr/unet.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace smokecorr {

using nn::Var;

void UNetConfig::validate() const {
	if (depth < 1) throw std::invalid_argument("unet depth must be >= 1");
	if (static_cast<int>(encoder_kernels.size()) != depth || static_cast<int>(channels.size()) != depth) {
		throw std::invalid_argument("unet depth " + std::to_string(depth) + " needs as many kernels (" +
			std::to_string(encoder_kernels.size()) + ") and channels (" + std::to_string(channels.size()) + ")");
	}
	for (int k : encoder_kernels)
		if (k < 1 || k % 2 == 0) throw std::invalid_argument("unet kernels must be odd and positive");
	if (decoder_kernel < 1 || decoder_kernel % 2 == 0) throw std::invalid_argument("decoder kernel must be odd");
	for (int c : channels)
		if (c < 1) throw std::invalid_argument("unet channel counts must be positive");
	if (in_channels < 1 || out_channels < 1) throw std::invalid_argument("unet needs input and output channels");
	if (leaky_slope < 0.0) throw std::invalid_argument("leaky slope must be >= 0");
}

UNetConfig UNetConfig::fitted_to(const GridSpec &grid) const {
	UNetConfig out = *this;
	int smallest = grid.extent(0);
	for (int a = 1; a < grid.d(); ++a) smallest = std::min(smallest, grid.extent(a));
	while (out.depth > 1 && out.downsample_factor() > smallest) {
		--out.depth;
		out.encoder_kernels.pop_back();
		out.channels.pop_back();
	}
	return out;
}

nlohmann::json UNetConfig::to_json() const {
	return {{"depth", depth}, {"encoder_kernels", encoder_kernels}, {"decoder_kernel", decoder_kernel},
		{"channels", channels}, {"leaky_slope", leaky_slope}, {"in_channels", in_channels},
		{"out_channels", out_channels}};
}

UNetConfig UNetConfig::from_json(const nlohmann::json &j) {
	UNetConfig c;
	c.depth = j.value("depth", c.depth);
	c.encoder_kernels = j.value("encoder_kernels", c.encoder_kernels);
	c.decoder_kernel = j.value("decoder_kernel", c.decoder_kernel);
	c.channels = j.value("channels", c.channels);
	c.leaky_slope = j.value("leaky_slope", c.leaky_slope);
	c.in_channels = j.value("in_channels", c.in_channels);
	c.out_channels = j.value("out_channels", c.out_channels);
	c.validate();
	return c;
}

nn::Shape conv_weight_shape(int cout, int cin, int kernel, int rank) {
	nn::Shape s;
	s.n = cout;
	s.c = cin;
	s.h = s.w = kernel;
	s.d = rank == 3 ? kernel : 1;
	s.rank = rank;
	return s;
}

template <typename T>
UNet<T>::UNet(UNetConfig cfg, std::string prefix, int rank) : cfg_(std::move(cfg)), prefix_(std::move(prefix)), rank_(rank) {
	cfg_.validate();
	if (rank != 2 && rank != 3) throw std::invalid_argument("unet rank must be 2 or 3");
}

namespace {

template <typename T>
void add_conv(nn::ParamSet<T> &params, const std::string &name, int cout, int cin, int kernel, int rank, double bound,
	std::mt19937_64 &rng) {
	nn::Tensor<T> w(conv_weight_shape(cout, cin, kernel, rank));
	std::uniform_real_distribution<double> dist(-bound, bound);
	for (auto &v : w.data) v = static_cast<T>(dist(rng));
	nn::Shape bs;
	bs.w = cout;
	params.add(name + ".w", std::move(w));
	params.add(name + ".b", nn::Tensor<T>(bs));
}

double fan_in(int cin, int kernel, int rank) { return cin * std::pow(kernel, rank); }

} // namespace

template <typename T>
void UNet<T>::init_params(nn::ParamSet<T> &params, std::uint64_t seed, double head_scale) const {
	std::mt19937_64 rng(seed);
	const double gain = 2.0 / (1.0 + cfg_.leaky_slope * cfg_.leaky_slope);
	auto kaiming = [&](int cin, int k) { return std::sqrt(3.0 * gain / fan_in(cin, k, rank_)); };
	const auto &ch = cfg_.channels;
	int cin = cfg_.in_channels;
	for (int i = 0; i < cfg_.depth; ++i) {
		const int k = cfg_.encoder_kernels[static_cast<std::size_t>(i)];
		add_conv(params, prefix_ + "enc" + std::to_string(i), ch[static_cast<std::size_t>(i)], cin, k, rank_,
			kaiming(cin, k), rng);
		cin = ch[static_cast<std::size_t>(i)];
	}
	const int kd = cfg_.decoder_kernel;
	for (int j = 0; j + 1 < cfg_.depth; ++j) {
		const auto skip = static_cast<std::size_t>(cfg_.depth - 2 - j);
		const int in = cin + ch[skip];
		add_conv(params, prefix_ + "dec" + std::to_string(j), ch[skip], in, kd, rank_, kaiming(in, kd), rng);
		cin = ch[skip];
	}
	add_conv(params, prefix_ + "dec" + std::to_string(cfg_.depth - 1), ch[0], cin, kd, rank_, kaiming(cin, kd), rng);
	add_conv(params, prefix_ + "head", cfg_.out_channels, ch[0], 1, rank_, head_scale * std::sqrt(3.0 / ch[0]), rng);
}

template <typename T>
Var<T> UNet<T>::block(const nn::ParamSet<T> &params, const std::string &name, const Var<T> &x) const {
	auto y = nn::conv(x, params.get(prefix_ + name + ".w"), params.get(prefix_ + name + ".b"));
	return nn::leaky_relu(y, static_cast<T>(cfg_.leaky_slope));
}

template <typename T>
Var<T> UNet<T>::forward(const nn::ParamSet<T> &params, const Var<T> &x) const {
	const nn::Shape &s = x->shape();
	if (s.rank != rank_ || s.c != cfg_.in_channels) {
		throw std::invalid_argument("unet " + prefix_ + " expects rank " + std::to_string(rank_) + " with " +
			std::to_string(cfg_.in_channels) + " channels, got " + s.to_string());
	}
	const int f = cfg_.downsample_factor();
	for (int a = 0; a < rank_; ++a) {
		if (s.axis_extent(a) % f != 0) {
			throw std::invalid_argument("unet " + prefix_ + ": extent " + std::to_string(s.axis_extent(a)) +
				" is not divisible by " + std::to_string(f));
		}
	}
	std::vector<Var<T>> skips;
	Var<T> h = x;
	for (int i = 0; i < cfg_.depth; ++i) {
		h = block(params, "enc" + std::to_string(i), h);
		if (i + 1 < cfg_.depth) {
			skips.push_back(h);
			h = nn::max_pool2(h);
		}
	}
	for (int j = 0; j + 1 < cfg_.depth; ++j) {
		h = nn::upsample2(h);
		h = nn::concat_channels<T>({h, skips[static_cast<std::size_t>(cfg_.depth - 2 - j)]});
		h = block(params, "dec" + std::to_string(j), h);
	}
	h = block(params, "dec" + std::to_string(cfg_.depth - 1), h);
	return nn::conv(h, params.get(head_weight_name()), params.get(head_bias_name()));
}

template class UNet<float>;
template class UNet<double>;

} // namespace smokecorr
