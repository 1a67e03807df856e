#include "smokecorr/rollout.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "smokecorr/datagen.hpp"
#include "smokecorr/field_io.hpp"

namespace smokecorr {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void write_json(const std::filesystem::path &path, const nlohmann::json &j) {
	std::ofstream out(path);
	out << j.dump(2) << '\n';
	if (!out) throw std::runtime_error("failed to write " + path.string());
}

} // namespace

SimState NetworkCorrector::correct(const SimState &big, const SimState &prev) const {
	return smokecorr::correct(big, prev, *net_);
}

ScalarField NetworkInterpolator::interpolate(const SimState &a, const SimState &b, int j, int k, InterpStep step,
	double dt_small) const {
	if (step == InterpStep::second) return second_step_interpolate(models_->second, a.rho, a.vel, b.rho, j, k, dt_small);
	return first_step_interpolate(models_->first, a.rho, b.rho, static_cast<double>(j) / k);
}

ScalarField CrossFadeInterpolator::interpolate(const SimState &a, const SimState &b, int j, int k, InterpStep,
	double) const {
	const float t = static_cast<float>(j) / static_cast<float>(k);
	ScalarField out(a.rho.spec());
	for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0f - t) * a.rho[i] + t * b.rho[i];
	return out;
}

void RolloutConfig::validate() const {
	scene.validate();
	if (n < 0 || n % k() != 0) throw std::invalid_argument("rollout length must be a multiple of k = " + std::to_string(k()));
	if (!(switch_fraction >= 0.0 && switch_fraction <= 1.0)) throw std::invalid_argument("switch_fraction must be in [0, 1]");
}

nlohmann::json RolloutConfig::to_json() const {
	return {{"scene", scene_kind_name(scene.kind)}, {"dims", scene.grid.dims()}, {"seed", scene.seed},
		{"dt_small", scene.dt_small}, {"dt_large", scene.dt_large}, {"n", n}, {"switch_fraction", switch_fraction}};
}

nlohmann::json RolloutTimings::to_json() const {
	return {{"solver_s", solver_s}, {"correction_s", correction_s}, {"interpolation_s", interpolation_s},
		{"total_s", total_s}};
}

RolloutResult run(const SimState &initial, const RolloutConfig &cfg, const Corrector &corrector,
	const Interpolator &interpolator) {
	cfg.validate();
	if (initial.frame_index != 0) throw std::invalid_argument("rollout must start from frame 0");
	const auto t_start = Clock::now();
	const Solver solver(cfg.scene);
	const int k = cfg.k();
	RolloutResult r;
	SimState current = initial;
	for (int i0 = 0; i0 < cfg.n; i0 += k) {
		auto t0 = Clock::now();
		SimState big = solver.step(current, cfg.scene.dt_large);
		r.timings.solver_s += seconds_since(t0);
		++r.counters.solver_calls;

		t0 = Clock::now();
		SimState corrected = corrector.correct(big, current);
		r.timings.correction_s += seconds_since(t0);
		++r.counters.corrections;
		corrected.frame_index = i0 + k;
		if (!corrected.rho.all_finite() || !corrected.vel.all_finite()) {
			throw SolverDivergence(corrected.frame_index, "correction produced non-finite values");
		}

		t0 = Clock::now();
		for (int j = 1; j < k; ++j) {
			const InterpStep step = choose_step(i0 + j, cfg.n, cfg.switch_fraction);
			ScalarField f = interpolator.interpolate(current, corrected, j, k, step, cfg.scene.dt_small);
			if (!f.all_finite()) throw SolverDivergence(i0 + j, "interpolation produced non-finite values");
			r.frames.push_back(std::move(f));
			++r.counters.interpolations;
		}
		r.timings.interpolation_s += seconds_since(t0);

		r.frames.push_back(corrected.rho);
		r.endpoints.push_back(corrected);
		current = std::move(corrected);
	}
	r.timings.total_s = seconds_since(t_start);
	return r;
}

RolloutResult run_uncorrected(const SimState &initial, const RolloutConfig &cfg, const Interpolator &interpolator) {
	return run(initial, cfg, PassThroughCorrector{}, interpolator);
}

void write_rollout(const std::filesystem::path &dir, const SimState &initial, const RolloutResult &result,
	const RolloutConfig &cfg) {
	std::filesystem::create_directories(dir);
	const int k = cfg.k();
	ArchiveManifest m;
	m.scene = scene_kind_name(cfg.scene.kind);
	m.seed = cfg.scene.seed;
	m.d = cfg.scene.grid.d();
	m.dims = cfg.scene.grid.dims();
	m.dt_small = cfg.scene.dt_small;
	m.dt_large = cfg.scene.dt_large;
	m.num_steps = static_cast<int>(result.frames.size());
	write_state(dir, 0, initial);
	double sum_sq = 0.0;
	std::size_t count = 0;
	for (std::size_t i = 0; i < result.frames.size(); ++i) write_field(dir / state_file("rho", static_cast<int>(i) + 1), result.frames[i]);
	for (const auto &s : result.endpoints) {
		write_field(dir / state_file("vel", s.frame_index), s.vel);
		for (float v : s.vel.values()) sum_sq += static_cast<double>(v) * v;
		count += s.vel.values().size();
	}
	m.velocity_rms = count ? std::sqrt(sum_sq / static_cast<double>(count)) : 0.0;
	m.complete = true;
	nlohmann::json mj = m.to_json();
	mj["velocity_frames"] = "every " + std::to_string(k);
	write_json(dir / "manifest.json", mj);
	write_json(dir / "timings.json", result.timings.to_json());
	write_json(dir / "counters.json", {{"solver_calls", result.counters.solver_calls},
		{"corrections", result.counters.corrections}, {"interpolations", result.counters.interpolations}});
}

} // namespace smokecorr
