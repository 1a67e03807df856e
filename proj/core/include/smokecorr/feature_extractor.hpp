#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "smokecorr/nn/params.hpp"

namespace smokecorr {

/// Fixed (never trained) mapping from normalized 3-channel 2D images to a
/// feature map. Instances are immutable and shareable across threads.
class FeatureExtractor {
public:
	virtual ~FeatureExtractor() = default;
	virtual nn::Var<float> features(const nn::Var<float> &rgb) const = 0;
	virtual nn::Var<double> features(const nn::Var<double> &rgb) const = 0;
	virtual std::string describe() const = 0;
};

/// The 16-layer VGG topology truncated after relu(conv4_3). Layer names are
/// conv1_1 ... conv4_3, each with `.w` (out, in, 1, 3, 3) and `.b` (out).
class Vgg16Features final : public FeatureExtractor {
public:
	struct Layer {
		std::string name;
		int in_channels;
		int out_channels;
		/// A 2x2 max-pool follows this layer.
		bool pool_after;
	};
	static const std::vector<Layer> &layers();

	/// Seeded fan-in scaled random weights.
	static std::shared_ptr<const Vgg16Features> random(std::uint64_t seed);
	/// Weights converted from the published network, in checkpoint format.
	static std::shared_ptr<const Vgg16Features> load(const std::filesystem::path &dir);
	void save(const std::filesystem::path &dir) const;

	nn::Var<float> features(const nn::Var<float> &rgb) const override;
	nn::Var<double> features(const nn::Var<double> &rgb) const override;
	std::string describe() const override { return description_; }

	Vgg16Features(const Vgg16Features &) = delete;
	Vgg16Features &operator=(const Vgg16Features &) = delete;

private:
	Vgg16Features() = default;
	template <typename T>
	nn::Var<T> run(const nn::ParamSet<T> &params, const nn::Var<T> &rgb) const;
	static nn::ParamSet<float> empty_params();

	nn::ParamSet<float> params_;
	mutable std::once_flag double_once_;
	mutable nn::ParamSet<double> params_double_;
	std::string description_;
};

/// Per-channel normalization the published extractor expects.
inline constexpr float kImageMean[3] = {0.485f, 0.456f, 0.406f};
inline constexpr float kImageStd[3] = {0.229f, 0.224f, 0.225f};

} // namespace smokecorr
