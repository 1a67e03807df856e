#pragma once

/// \file
/// Large-step correction model. The U-Net consumes
/// [rho0, vel0 / rms, rho_big, vel_big / rms] and produces 2d + 2 channels
/// split into velocity, flow, residual density and blend-weight heads.

#include <cstdint>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "smokecorr/solver.hpp"
#include "smokecorr/unet.hpp"

namespace smokecorr {

struct CorrectionConfig {
	UNetConfig unet;
	/// Dataset velocity RMS used to normalize velocities.
	double velocity_rms = 1.0;
	std::uint64_t seed = 1;
	/// Initial scale of the output layer relative to fan-in scaling.
	double head_scale = 0.1;

	nlohmann::json to_json() const;
	static CorrectionConfig from_json(const nlohmann::json &j);
};

template <typename T>
struct HeadVars {
	nn::Var<T> v_hat;
	nn::Var<T> flow;
	nn::Var<T> rho_tilde;
	nn::Var<T> alpha;
};

template <typename T>
class CorrectionNet {
public:
	/// Fits the U-Net depth to `grid` and initializes parameters from cfg.seed.
	CorrectionNet(const CorrectionConfig &cfg, const GridSpec &grid);

	/// Batched tensors: densities have 1 channel, velocities d channels.
	HeadVars<T> forward(const nn::Var<T> &rho0, const nn::Var<T> &vel0, const nn::Var<T> &rho_big,
		const nn::Var<T> &vel_big) const;
	/// warp(rho_big, F) + alpha * rho_tilde, without clamping.
	nn::Var<T> fuse(const nn::Var<T> &rho_big, const HeadVars<T> &heads) const;

	nn::ParamSet<T> &params() { return params_; }
	const nn::ParamSet<T> &params() const { return params_; }
	const CorrectionConfig &config() const { return cfg_; }
	const UNet<T> &unet() const { return unet_; }
	const GridSpec &grid() const { return grid_; }

	void save(const std::filesystem::path &dir, const nlohmann::json &extra = {}) const;
	/// Rebuilds the model from a checkpoint directory.
	static CorrectionNet load(const std::filesystem::path &dir);
	/// Loads weights into this model; names and shapes must match.
	nlohmann::json load_weights(const std::filesystem::path &dir);

private:
	CorrectionConfig cfg_;
	GridSpec grid_;
	UNet<T> unet_;
	nn::ParamSet<T> params_;
};

struct CorrectionHeads {
	VectorField v_hat;
	FlowField flow;
	ScalarField rho_tilde;
	ScalarField alpha;
};

CorrectionHeads predict_heads(const CorrectionNet<float> &net, const ScalarField &rho0, const VectorField &vel0,
	const ScalarField &rho_big, const VectorField &vel_big);

/// warp(rho_big, flow) + alpha * rho_tilde per cell, before clamping.
ScalarField fuse_density(const ScalarField &rho_big, const FlowField &flow, const ScalarField &rho_tilde,
	const ScalarField &alpha);

/// Corrected state: fused density clamped to >= 0, v_hat as velocity,
/// frame index of `state_big`.
SimState correct(const SimState &state_big, const SimState &state_prev, const CorrectionNet<float> &net);

} // namespace smokecorr
