#pragma once

/// \file
/// Production loop: one large solver step, correction, then synthesis of the
/// k - 1 intermediate density frames; the corrected state seeds the next
/// interval.

#include <filesystem>
#include <memory>
#include <vector>

#include <nlohmann/json.hpp>

#include "smokecorr/correction_net.hpp"
#include "smokecorr/interpolation_net.hpp"

namespace smokecorr {

class Corrector {
public:
	virtual ~Corrector() = default;
	/// `big` is the large-step result from `prev`.
	virtual SimState correct(const SimState &big, const SimState &prev) const = 0;
};

class Interpolator {
public:
	virtual ~Interpolator() = default;
	/// Density at frame a.frame_index + j between the interval endpoints.
	virtual ScalarField interpolate(const SimState &a, const SimState &b, int j, int k, InterpStep step,
		double dt_small) const = 0;
};

/// Returns the large-step result unchanged.
class PassThroughCorrector final : public Corrector {
public:
	SimState correct(const SimState &big, const SimState &) const override { return big; }
};

class NetworkCorrector final : public Corrector {
public:
	explicit NetworkCorrector(std::shared_ptr<const CorrectionNet<float>> net) : net_(std::move(net)) {}
	SimState correct(const SimState &big, const SimState &prev) const override;

private:
	std::shared_ptr<const CorrectionNet<float>> net_;
};

class NetworkInterpolator final : public Interpolator {
public:
	explicit NetworkInterpolator(std::shared_ptr<const InterpolationModels> models) : models_(std::move(models)) {}
	ScalarField interpolate(const SimState &a, const SimState &b, int j, int k, InterpStep step,
		double dt_small) const override;

private:
	std::shared_ptr<const InterpolationModels> models_;
};

/// (1 - t) * rho_a + t * rho_b; no learned parameters.
class CrossFadeInterpolator final : public Interpolator {
public:
	ScalarField interpolate(const SimState &a, const SimState &b, int j, int k, InterpStep step,
		double dt_small) const override;
};

struct RolloutConfig {
	SceneConfig scene;
	/// Final frame index; a multiple of k.
	int n = 64;
	double switch_fraction = 0.5;

	int k() const { return scene.k(); }
	void validate() const;
	nlohmann::json to_json() const;
};

struct RolloutCounters {
	int solver_calls = 0;
	int corrections = 0;
	int interpolations = 0;
};

struct RolloutTimings {
	double solver_s = 0.0;
	double correction_s = 0.0;
	double interpolation_s = 0.0;
	double total_s = 0.0;

	nlohmann::json to_json() const;
};

struct RolloutResult {
	/// Density of frames 1..n (index i holds frame i + 1).
	std::vector<ScalarField> frames;
	/// Corrected states at frames k, 2k, ..., n.
	std::vector<SimState> endpoints;
	RolloutCounters counters;
	RolloutTimings timings;
};

RolloutResult run(const SimState &initial, const RolloutConfig &cfg, const Corrector &corrector,
	const Interpolator &interpolator);
/// Same loop with the correction replaced by the identity.
RolloutResult run_uncorrected(const SimState &initial, const RolloutConfig &cfg, const Interpolator &interpolator);

/// Writes frames 0..n in the dataset layout (velocity only at interval
/// endpoints), `timings.json` and `counters.json`.
void write_rollout(const std::filesystem::path &dir, const SimState &initial, const RolloutResult &result,
	const RolloutConfig &cfg);

} // namespace smokecorr
