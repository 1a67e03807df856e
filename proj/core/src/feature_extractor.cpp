#include "smokecorr/feature_extractor.hpp"

#include <cmath>
#include <random>

#include "smokecorr/unet.hpp"

namespace smokecorr {

const std::vector<Vgg16Features::Layer> &Vgg16Features::layers() {
	static const std::vector<Layer> table{
		{"conv1_1", 3, 64, false},
		{"conv1_2", 64, 64, true},
		{"conv2_1", 64, 128, false},
		{"conv2_2", 128, 128, true},
		{"conv3_1", 128, 256, false},
		{"conv3_2", 256, 256, false},
		{"conv3_3", 256, 256, true},
		{"conv4_1", 256, 512, false},
		{"conv4_2", 512, 512, false},
		{"conv4_3", 512, 512, false},
	};
	return table;
}

nn::ParamSet<float> Vgg16Features::empty_params() {
	nn::ParamSet<float> p;
	for (const auto &l : layers()) {
		nn::Shape bs;
		bs.w = l.out_channels;
		p.add(l.name + ".w", nn::Tensor<float>(conv_weight_shape(l.out_channels, l.in_channels, 3, 2)));
		p.add(l.name + ".b", nn::Tensor<float>(bs));
	}
	p.set_trainable(false);
	return p;
}

std::shared_ptr<const Vgg16Features> Vgg16Features::random(std::uint64_t seed) {
	std::shared_ptr<Vgg16Features> out(new Vgg16Features);
	out->params_ = empty_params();
	std::mt19937_64 rng(seed);
	for (const auto &l : layers()) {
		const double bound = std::sqrt(6.0 / (l.in_channels * 9.0));
		std::uniform_real_distribution<double> dist(-bound, bound);
		for (auto &v : out->params_.get(l.name + ".w")->value.data) v = static_cast<float>(dist(rng));
	}
	out->description_ = "vgg16-conv4_3 random seed " + std::to_string(seed);
	return out;
}

std::shared_ptr<const Vgg16Features> Vgg16Features::load(const std::filesystem::path &dir) {
	std::shared_ptr<Vgg16Features> out(new Vgg16Features);
	out->params_ = empty_params();
	nn::load_checkpoint(out->params_, dir);
	out->params_.set_trainable(false);
	out->description_ = "vgg16-conv4_3 " + dir.string();
	return out;
}

void Vgg16Features::save(const std::filesystem::path &dir) const {
	nn::save_checkpoint(params_, {{"kind", "vgg16-conv4_3"}}, dir);
}

template <typename T>
nn::Var<T> Vgg16Features::run(const nn::ParamSet<T> &params, const nn::Var<T> &rgb) const {
	if (rgb->shape().c != 3 || rgb->shape().rank != 2) {
		throw std::invalid_argument("feature extractor expects 3-channel 2D input, got " + rgb->shape().to_string());
	}
	nn::Var<T> h = rgb;
	for (const auto &l : layers()) {
		h = nn::leaky_relu(nn::conv(h, params.get(l.name + ".w"), params.get(l.name + ".b")), T(0));
		if (l.pool_after) h = nn::max_pool2(h);
	}
	return h;
}

nn::Var<float> Vgg16Features::features(const nn::Var<float> &rgb) const { return run(params_, rgb); }

nn::Var<double> Vgg16Features::features(const nn::Var<double> &rgb) const {
	std::call_once(double_once_, [this] {
		params_double_ = params_.cast<double>();
		params_double_.set_trainable(false);
	});
	return run(params_double_, rgb);
}

} // namespace smokecorr
