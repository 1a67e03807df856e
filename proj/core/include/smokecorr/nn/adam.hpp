#pragma once

#include <vector>

#include "smokecorr/nn/params.hpp"

namespace smokecorr::nn {

struct AdamConfig {
	double lr = 1e-3;
	double beta1 = 0.9;
	double beta2 = 0.999;
	double eps = 1e-8;
};

/// Adam with bias correction. Parameters without an accumulated gradient
/// are left untouched (their moments do not decay either).
template <typename T>
class Adam {
public:
	Adam(ParamSet<T> &params, AdamConfig cfg);

	/// Applies one update from the current gradients, then clears them.
	void step();
	long long steps() const { return t_; }
	const AdamConfig &config() const { return cfg_; }

private:
	ParamSet<T> *params_;
	AdamConfig cfg_;
	std::vector<std::vector<double>> m_;
	std::vector<std::vector<double>> v_;
	long long t_ = 0;
};

} // namespace smokecorr::nn
