#pragma once

/// \file
/// Flow-based synthesis of intermediate density frames.
///
/// A flow U-Net maps (rho_a, rho_b) to the two directional flows, which are
/// combined into flows from time t back to each endpoint. A refinement U-Net
/// sees the endpoints, those flows and both warped endpoints and returns a
/// flow residual plus two visibility logits. The output is the
/// visibility- and time-weighted blend of the two warped endpoints.

#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "smokecorr/solver.hpp"
#include "smokecorr/unet.hpp"

namespace smokecorr {

struct InterpConfig {
	UNetConfig flow_unet;
	UNetConfig refine_unet;
	/// Frames up to this fraction of the rollout use the second step.
	double switch_fraction = 0.5;
	std::uint64_t seed = 2;
	double head_scale = 0.1;

	void validate() const;
	nlohmann::json to_json() const;
	static InterpConfig from_json(const nlohmann::json &j);
};

enum class InterpStep { first, second };

const char *interp_step_name(InterpStep step);

/// Second step while frame_index <= fraction * n, first afterwards.
InterpStep choose_step(int frame_index, int n, double fraction);

/// One synthesis parameter set (flow and refinement networks).
template <typename T>
class InterpNet {
public:
	InterpNet(const InterpConfig &cfg, const GridSpec &grid, std::uint64_t seed);

	/// Batched synthesis; `t[i]` is the time of sample i, strictly in (0, 1).
	nn::Var<T> synthesize(const nn::Var<T> &rho_a, const nn::Var<T> &rho_b, const std::vector<T> &t) const;

	nn::ParamSet<T> &params() { return params_; }
	const nn::ParamSet<T> &params() const { return params_; }
	const GridSpec &grid() const { return grid_; }
	const UNet<T> &flow_net() const { return flow_; }
	const UNet<T> &refine_net() const { return refine_; }

private:
	GridSpec grid_;
	UNet<T> flow_;
	UNet<T> refine_;
	nn::ParamSet<T> params_;
};

/// The first-step and second-step parameter sets with their shared config.
struct InterpolationModels {
	InterpConfig config;
	GridSpec grid;
	InterpNet<float> first;
	InterpNet<float> second;

	InterpolationModels(const InterpConfig &cfg, const GridSpec &grid);

	/// Writes `dir/first` and `dir/second` checkpoints.
	void save(const std::filesystem::path &dir, const nlohmann::json &extra = {}) const;
	static InterpolationModels load(const std::filesystem::path &dir);
};

/// rho_a advected `j` times by the frozen velocity vel_a at dt_small.
ScalarField advect_frozen(const ScalarField &rho_a, const VectorField &vel_a, int j, double dt_small);

/// t = 0 and t = 1 return the endpoints without running the networks.
ScalarField first_step_interpolate(const InterpNet<float> &net, const ScalarField &rho_a, const ScalarField &rho_b,
	double t);
ScalarField second_step_interpolate(const InterpNet<float> &net, const ScalarField &rho_a, const VectorField &vel_a,
	const ScalarField &rho_hat_b, int j, int k, double dt_small);

} // namespace smokecorr
