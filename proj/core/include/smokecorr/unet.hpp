#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smokecorr/nn/params.hpp"

namespace smokecorr {

struct UNetConfig {
	int depth = 7;
	std::vector<int> encoder_kernels{7, 5, 3, 3, 3, 3, 3};
	int decoder_kernel = 3;
	std::vector<int> channels{16, 32, 64, 128, 256, 512, 512};
	double leaky_slope = 0.2;
	int in_channels = 6;
	int out_channels = 6;

	/// Throws std::invalid_argument on inconsistent settings.
	void validate() const;
	/// Spatial extents must be divisible by this.
	int downsample_factor() const { return 1 << (depth - 1); }
	/// Drops trailing blocks until every extent of `grid` admits the pooling.
	UNetConfig fitted_to(const GridSpec &grid) const;

	nlohmann::json to_json() const;
	static UNetConfig from_json(const nlohmann::json &j);

	friend bool operator==(const UNetConfig &, const UNetConfig &) = default;
};

/// Encoder/decoder with skip concatenation. Parameters live in a ParamSet
/// under `prefix`; the network itself is stateless.
template <typename T>
class UNet {
public:
	UNet(UNetConfig cfg, std::string prefix, int rank);

	/// Registers freshly initialized parameters. `head_scale` shrinks the
	/// final 1x1 layer (0 gives an all-zero output).
	void init_params(nn::ParamSet<T> &params, std::uint64_t seed, double head_scale = 1.0) const;
	nn::Var<T> forward(const nn::ParamSet<T> &params, const nn::Var<T> &x) const;

	const UNetConfig &config() const { return cfg_; }
	const std::string &prefix() const { return prefix_; }
	std::string head_weight_name() const { return prefix_ + "head.w"; }
	std::string head_bias_name() const { return prefix_ + "head.b"; }

private:
	nn::Var<T> block(const nn::ParamSet<T> &params, const std::string &name, const nn::Var<T> &x) const;

	UNetConfig cfg_;
	std::string prefix_;
	int rank_;
};

/// Weight tensor shape for a conv layer of the given rank.
nn::Shape conv_weight_shape(int cout, int cin, int kernel, int rank);

} // namespace smokecorr
