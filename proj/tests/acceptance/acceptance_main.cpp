// Acceptance runner: one PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <set>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "smokecorr/config.hpp"
#include "smokecorr/field_io.hpp"
#include "smokecorr/metrics.hpp"
#include "smokecorr/rollout.hpp"
#include "smokecorr/training.hpp"

using namespace smokecorr;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
	bool pass = false;
	std::string detail;
};

bool same_bits(std::span<const float> a, std::span<const float> b) {
	return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

std::string slurp(const fs::path &p) {
	std::ifstream in(p, std::ios::binary);
	return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string fmt(const char *f, auto... args) {
	char buf[512];
	std::snprintf(buf, sizeof buf, f, args...);
	return buf;
}

VectorField random_velocity(const GridSpec &g, std::uint64_t seed) {
	std::mt19937_64 rng(seed);
	std::uniform_real_distribution<float> u(-1.0f, 1.0f);
	VectorField v(g);
	for (auto &x : v.values()) x = u(rng);
	return v;
}

ScalarField random_density(const GridSpec &g, std::uint64_t seed) {
	std::mt19937_64 rng(seed);
	std::uniform_real_distribution<float> u(0.0f, 1.0f);
	ScalarField f(g);
	for (auto &x : f.values()) x = u(rng);
	return f;
}

// ---------------------------------------------------------------------------

Outcome solver_correctness() {
	const GridSpec g(64, 64);
	const ObstacleMask mask(g);
	double worst = 0.0, slowest = 0.0;
	int max_iters = 0;
	for (std::uint64_t seed = 0; seed < 5; ++seed) {
		VectorField v = enforce_boundaries(random_velocity(g, 100 + seed), mask);
		auto t0 = Clock::now();
		ProjectionResult r = pressure_project(v, mask, 500, 1e-3);
		slowest = std::max(slowest, since(t0));
		worst = std::max(worst, max_interior_divergence(r.vel, mask));
		max_iters = std::max(max_iters, r.iterations);
	}
	ScalarField ramp(g);
	for (int y = 0; y < 64; ++y)
		for (int x = 0; x < 64; ++x) ramp(x, y) = 0.25f + 0.5f * static_cast<float>(x) / 64.0f;
	VectorField u(g);
	for (auto &c : u.component(0)) c = 0.75f;
	const double dt = 2.0;
	ScalarField adv = advect(ramp, u, dt);
	double ramp_err = 0.0;
	for (int y = 1; y < 63; ++y)
		for (int x = 2; x < 63; ++x) {
			const double exact = 0.25 + 0.5 * (x - 0.75 * dt) / 64.0;
			ramp_err = std::max(ramp_err, std::abs(adv(x, y) - exact));
		}
	Outcome o;
	o.pass = worst <= 1e-3 && max_iters <= 500 && slowest < 1.0 && ramp_err <= 1e-6;
	o.detail = fmt("max |div| %.3g after <= %d iterations, slowest %.3f s; ramp error %.3g", worst, max_iters, slowest,
		ramp_err);
	return o;
}

Outcome property_suite(const FeatureExtractor &phi) {
	auto t0 = Clock::now();
	std::vector<std::string> failures;
	auto check = [&](bool ok, const std::string &what) {
		if (!ok) failures.push_back(what);
	};

	const GridSpec g2(32, 32);
	ScalarField rho = random_density(g2, 1);
	check(same_bits(warp(rho, FlowField(g2)).values(), rho.values()), "warp identity");

	const GridSpec g3(12, 10, 8);
	ScalarField vol = random_density(g3, 2);
	double pm_err = 0.0;
	for (Axis axis : {Axis::x, Axis::y, Axis::z}) {
		ScalarField p = project_mean(vol, axis);
		const int a = static_cast<int>(axis);
		const int n = g3.dims()[a];
		for (std::size_t i = 0; i < p.spec().cells(); ++i) {
			// p's (u, v) are the two remaining axes in order.
			const int nu = p.spec().nx();
			const int pu = static_cast<int>(i) % nu, pv = static_cast<int>(i) / nu;
			double sum = 0.0;
			for (int t = 0; t < n; ++t) {
				int c[3];
				int other = 0;
				for (int k = 0; k < 3; ++k) c[k] = k == a ? t : (other++ == 0 ? pu : pv);
				sum += vol(c[0], c[1], c[2]);
			}
			const double want = sum / n;
			pm_err = std::max(pm_err, std::abs(p[i] - want) / std::max(std::abs(want), 1e-12));
		}
	}
	check(pm_err <= 1e-5, fmt("project_mean rel error %.3g", pm_err));

	VectorField vel = random_velocity(g2, 3);
	ScalarField other = random_density(g2, 4);
	VectorField vel2 = random_velocity(g2, 5);
	std::mt19937_64 rng(6);
	check(l1_reconstruction(rho, rho) == 0.0 && l1_reconstruction(rho, other) > 0.0, "density L1");
	check(l1_reconstruction(vel, vel) == 0.0 && l1_reconstruction(vel, vel2) > 0.0, "velocity L1");
	check(gradient_loss(vel, vel) == 0.0 && gradient_loss(vel, vel2) > 0.0, "gradient loss");
	check(temporal_coherence_loss(other, rho, rho) == 0.0 && temporal_coherence_loss(other, rho, other) > 0.0,
		"density temporal loss");
	check(temporal_coherence_loss(vel2, vel, vel) == 0.0 && temporal_coherence_loss(vel2, vel, vel2) > 0.0,
		"velocity temporal loss");
	check(perceptual_loss_2d(rho, rho, phi) == 0.0 && perceptual_loss_2d(rho, other, phi) > 0.0,
		"density perceptual");
	check(perceptual_loss_2d(vel, vel, 0.5, phi) == 0.0 && perceptual_loss_2d(vel, vel2, 0.5, phi) > 0.0,
		"velocity perceptual");
	const GridSpec g16(16, 16, 16);
	ScalarField v3 = random_density(g16, 7), w3 = random_density(g16, 8);
	check(perceptual_loss_3d(v3, v3, phi, rng) == 0.0 && perceptual_loss_3d(v3, w3, phi, rng) > 0.0,
		"3D perceptual");

	LossTerms unit;
	unit.rv = unit.g = unit.pv = unit.tv = unit.rrho = unit.interp = unit.prho = unit.trho = 1.0;
	const LossWeights w2 = LossWeights::for_dim(2);
	check(velocity_loss(w2, unit) == 20.0 + 50.0 + w2.p + 20.0, "L_v arithmetic");
	check(std::abs(velocity_loss(w2, unit) - 90.1) < 1e-12, "L_v = 90.1");
	check(density_loss(w2, unit) == 50.0 + 1.0 + w2.p + 50.0, "L_rho arithmetic");
	check(total_loss(w2, unit) == velocity_loss(w2, unit) + density_loss(w2, unit), "total arithmetic");
	LossTerms mixed;
	mixed.rv = 0.5;
	mixed.g = 0.25;
	mixed.pv = 2.0;
	mixed.tv = 0.125;
	mixed.rrho = 1.5;
	mixed.interp = 4.0;
	mixed.prho = 0.75;
	mixed.trho = 0.0625;
	const double expect = 20 * 0.5 + 50 * 0.25 + w2.p * 2.0 + 20 * 0.125 + 50 * 1.5 + 1 * 4.0 + w2.p * 0.75 +
		50 * 0.0625;
	check(std::abs(total_loss(w2, mixed) - expect) <= 1e-12 * expect, "weighted total");

	const GridSpec g8(8, 8);
	ScalarField fused = fuse_density(ScalarField(g8, 0.375f), FlowField(g8), ScalarField(g8, 0.25f),
		ScalarField(g8, 0.5f));
	check(std::all_of(fused.values().begin(), fused.values().end(), [](float v) { return v == 0.5f; }), "fuse");
	FlowField shift(g8);
	for (auto &c : shift.component(0)) c = 1.0f;
	ScalarField ramp(g8);
	for (int y = 0; y < 8; ++y)
		for (int x = 0; x < 8; ++x) ramp(x, y) = static_cast<float>(x) / 8.0f;
	ScalarField fs2 = fuse_density(ramp, shift, ScalarField(g8, 0.5f), ScalarField(g8, 0.25f));
	bool shift_ok = true;
	for (int y = 0; y < 8; ++y)
		for (int x = 1; x < 8; ++x) shift_ok &= fs2(x, y) == static_cast<float>(x - 1) / 8.0f + 0.125f;
	check(shift_ok, "fuse with shift");

	const double secs = since(t0);
	check(secs < 60.0, fmt("runtime %.1f s", secs));
	Outcome o;
	o.pass = failures.empty();
	o.detail = fmt("%.1f s", secs);
	for (const auto &f : failures) o.detail += "; failed: " + f;
	return o;
}

Outcome differentiability(const fs::path &work, const FeatureExtractor &phi) {
	auto t0 = Clock::now();
	const fs::path dir = work / "c3_sim";
	fs::remove_all(dir);
	const GridSpec g(8, 8);
	auto archive = std::make_shared<const SimulationArchive>(
		generate_simulation(make_scene(SceneKind::plume2d, g, 3, 0.5, 4.0, 8), dir));
	const auto samples = build_pairs(archive, 8);
	TrainingPair pair = make_training_pair(samples.at(0), 0.5);

	CorrectionConfig cfg;
	cfg.unet.depth = 2;
	cfg.unet.encoder_kernels = {3, 3};
	cfg.unet.channels = {4, 8};
	cfg.velocity_rms = 0.5;
	cfg.head_scale = 1.0;
	CorrectionNet<double> net(cfg, g);
	InterpConfig icfg;
	icfg.flow_unet = cfg.unet;
	icfg.refine_unet = cfg.unet;
	InterpNet<double> second(icfg, g, 11);
	second.params().set_trainable(false);

	LossWeights w = LossWeights::for_dim(2);
	const std::vector<const TrainingPair *> batch{&pair};
	const std::vector<int> js{3};
	auto loss = [&] {
		std::mt19937_64 rng(0);
		return correction_objective(net, &second, batch, js, w, phi, rng).total;
	};
	net.params().zero_grad();
	nn::backward(loss());

	std::mt19937_64 pick(5);
	double diff2 = 0.0, ref2 = 0.0;
	int checked = 0;
	for (const auto &p : net.params().items()) {
		auto &vals = p.var->value.data;
		const int draws = std::min<int>(8, static_cast<int>(vals.size()));
		for (int s = 0; s < draws; ++s) {
			const std::size_t i = std::uniform_int_distribution<std::size_t>(0, vals.size() - 1)(pick);
			const double analytic = p.var->grad.empty() ? 0.0 : p.var->grad[i];
			nn::NoGradGuard guard;
			const double keep = vals[i], h = 1e-6;
			vals[i] = keep + h;
			const double up = nn::scalar_value(loss());
			vals[i] = keep - h;
			const double down = nn::scalar_value(loss());
			vals[i] = keep;
			const double numeric = (up - down) / (2.0 * h);
			diff2 += (analytic - numeric) * (analytic - numeric);
			ref2 += numeric * numeric;
			++checked;
		}
	}
	const double rel = std::sqrt(diff2 / std::max(ref2, 1e-300));
	const double secs = since(t0);
	Outcome o;
	o.pass = rel <= 1e-2 && secs < 120.0 && ref2 > 0.0;
	o.detail = fmt("relative error %.3g over %d parameters, %.1f s", rel, checked, secs);
	return o;
}

Outcome dataset_protocol(const fs::path &work) {
	const fs::path a = work / "c4_a", b = work / "c4_b";
	fs::remove_all(a);
	fs::remove_all(b);
	SceneConfig s = make_scene(SceneKind::plume2d, GridSpec(64, 64), 42, 0.5, 4.0, 200);
	auto archive = std::make_shared<const SimulationArchive>(generate_simulation(s, a / "sim"));
	generate_simulation(s, b / "sim");
	const auto pairs = build_pairs(archive, 8);
	int files = 0, mismatched = 0;
	for (const auto &e : fs::directory_iterator(a / "sim")) {
		++files;
		if (slurp(e.path()) != slurp(b / "sim" / e.path().filename())) ++mismatched;
	}
	int files_b = static_cast<int>(std::distance(fs::directory_iterator(b / "sim"), fs::directory_iterator{}));
	Outcome o;
	o.pass = pairs.size() == 25 && pair_count(200, 8) == 25 && mismatched == 0 && files == files_b && files > 0;
	o.detail = fmt("%zu pairs; %d files, %d differ", pairs.size(), files, mismatched);
	fs::remove_all(a);
	fs::remove_all(b);
	return o;
}

struct Trained {
	std::shared_ptr<InterpolationModels> interp;
	std::shared_ptr<CorrectionNet<float>> correction;
	Splits splits;
	fs::path corpus;
};

struct TrainabilityResult {
	Outcome outcome;
	std::optional<Trained> models;
};

TrainabilityResult trainability(const fs::path &work, const FeatureExtractor &phi, int sims, int interp_epochs,
	int correction_epochs, bool reuse) {
	auto t0 = Clock::now();
	PipelineConfig pc;
	pc.corpus.count = sims;
	pc.corpus.seed = 2024;
	const fs::path corpus = work / "corpus";
	const nlohmann::json stamp = corpus_to_json(pc.corpus);
	const bool have = fs::exists(corpus / "splits.json") && fs::exists(corpus / "corpus.json") &&
		nlohmann::json::parse(slurp(corpus / "corpus.json")) == stamp;
	if (!have) {
		fs::remove_all(corpus);
		std::printf("generating %d simulations\n", sims);
		std::fflush(stdout);
		generate_corpus(pc.corpus, corpus);
		std::ofstream(corpus / "corpus.json") << stamp.dump(2);
	}
	const double gen_s = since(t0);
	const Splits splits = Splits::read(corpus);
	const DatasetStats stats = dataset_stats(corpus);
	std::printf("corpus: %d train / %d val / %d test simulations, %d train pairs, rms %.4f (%.0f s)\n",
		stats.train_simulations, stats.val_simulations, stats.test_simulations, stats.train_pairs, stats.velocity_rms,
		gen_s);
	std::fflush(stdout);

	const auto train = load_training_pairs(corpus, splits.train);
	const auto val = load_training_pairs(corpus, splits.val);
	const GridSpec grid(pc.corpus.dims);

	auto t_train = Clock::now();
	auto interp = std::make_shared<InterpolationModels>(pc.interpolation, grid);
	const fs::path interp_dir = work / "interp";
	TrainConfig ti = pc.train_interp;
	ti.epochs = interp_epochs;
	if (reuse && fs::exists(interp_dir / "second" / "weights.f32")) {
		interp = std::make_shared<InterpolationModels>(InterpolationModels::load(interp_dir));
	} else {
		train_interpolation(*interp, train, val, ti, phi, interp_dir, [&](const EpochRecord &r) {
			std::printf("interp epoch %d train %.5f val %.5f (%.0f s)\n", r.epoch, r.train_loss, r.val_loss,
				since(t_train));
			std::fflush(stdout);
		});
	}

	CorrectionConfig cc = pc.correction;
	cc.velocity_rms = stats.velocity_rms;
	auto net = std::make_shared<CorrectionNet<float>>(cc, grid);
	const fs::path corr_dir = work / "correct";
	TrainConfig tc = pc.train_correct;
	tc.epochs = correction_epochs;
	if (reuse && fs::exists(corr_dir / "weights.f32")) {
		net = std::make_shared<CorrectionNet<float>>(CorrectionNet<float>::load(corr_dir));
	} else {
		train_correction(*net, interp.get(), train, val, tc, phi, corr_dir, [&](const EpochRecord &r) {
			std::printf("correction epoch %d train %.5f val %.5f (%.0f s)\n", r.epoch, r.train_loss, r.val_loss,
				since(t_train));
			std::fflush(stdout);
		});
	}
	const double train_s = since(t_train);

	std::vector<PairSample> test;
	for (const auto &a : open_split(corpus, splits.test)) {
		auto p = build_pairs(a, 8);
		test.insert(test.end(), p.begin(), p.end());
	}
	const CorrectionEffect e = correction_effect(*net, test);
	write_table2_csv(work / "table2.csv", e);
	TrainabilityResult r;
	const bool scale_ok = stats.train_simulations >= 30 && stats.test_simulations >= 5 && interp_epochs <= 20 &&
		correction_epochs <= 30;
	const double total_s = since(t0);
	r.outcome.pass = scale_ok && e.density_reduction() >= 50.0 && e.velocity_reduction() >= 50.0 && total_s <= 4 * 3600.0;
	r.outcome.detail = fmt("density MSE %.3g -> %.3g (%.1f%%), velocity MSE %.3g -> %.3g (%.1f%%) on %d held-out "
						   "pairs; %d+%d epochs, %.0f min total",
		e.density_before, e.density_after, e.density_reduction(), e.velocity_before, e.velocity_after,
		e.velocity_reduction(), e.pairs, interp_epochs, correction_epochs, total_s / 60.0);
	r.models = Trained{interp, net, splits, corpus};
	return r;
}

Outcome rollout_ordering(const Trained &m, const fs::path &work) {
	const NetworkCorrector corrector(m.correction);
	const NetworkInterpolator interpolator(m.interp);
	double corrected_sum = 0.0, raw_sum = 0.0;
	std::string per_scene;
	std::vector<NamedSeries> curves;
	for (const auto &name : m.splits.test) {
		const SimulationArchive a = SimulationArchive::open(m.corpus / name);
		RolloutConfig cfg;
		cfg.scene = a.manifest().scene_config();
		cfg.n = 64;
		const SimState s0 = a.read_state(0);
		const RolloutResult corrected = run(s0, cfg, corrector, interpolator);
		const RolloutResult raw = run_uncorrected(s0, cfg, interpolator);
		std::vector<ScalarField> gt;
		for (int i = 1; i <= 64; ++i) gt.push_back(a.read_density(i));
		const auto c_curve = per_frame_curve(corrected.frames, gt);
		const auto r_curve = per_frame_curve(raw.frames, gt);
		double c = 0.0, r = 0.0;
		for (std::size_t i = 0; i < c_curve.size(); ++i) {
			c += c_curve[i];
			r += r_curve[i];
		}
		c /= 64.0;
		r /= 64.0;
		corrected_sum += c;
		raw_sum += r;
		per_scene += fmt(" %s %.3f", name.c_str(), c / r);
		curves.push_back({name + "_corrected", c_curve});
		curves.push_back({name + "_uncorrected", r_curve});
	}
	write_curve_csv(work / "rollout_curves.csv", curves);
	const double ratio = corrected_sum / raw_sum;
	Outcome o;
	o.pass = ratio <= 0.8;
	o.detail = fmt("mean per-frame density MSE %.3g corrected vs %.3g uncorrected, ratio %.3f (per scene:%s)",
		corrected_sum / m.splits.test.size(), raw_sum / m.splits.test.size(), ratio, per_scene.c_str());
	return o;
}

Outcome interpolation_contracts(const InterpolationModels &models) {
	const GridSpec &g = models.grid;
	ScalarField a = random_density(g, 21), b = random_density(g, 22);
	VectorField v = random_velocity(g, 23);
	double end_err = 0.0;
	for (const auto *net : {&models.first, &models.second}) {
		ScalarField s0 = first_step_interpolate(*net, a, b, 0.0), s1 = first_step_interpolate(*net, a, b, 1.0);
		for (std::size_t i = 0; i < g.cells(); ++i) {
			end_err = std::max({end_err, std::abs(static_cast<double>(s0[i]) - a[i]),
				std::abs(static_cast<double>(s1[i]) - b[i])});
		}
	}
	const int k = 8;
	std::vector<ScalarField> fwd(k), perm(k);
	for (int j = 1; j < k; ++j) fwd[j] = second_step_interpolate(models.second, a, v, b, j, k, 0.5);
	std::vector<int> order{5, 2, 7, 1, 4, 6, 3};
	for (int j : order) perm[j] = second_step_interpolate(models.second, a, v, b, j, k, 0.5);
	int differing = 0;
	for (int j = 1; j < k; ++j) differing += !same_bits(fwd[j].values(), perm[j].values());
	std::vector<ScalarField> f1(k), f2(k);
	for (int j = 1; j < k; ++j) f1[j] = first_step_interpolate(models.first, a, b, static_cast<double>(j) / k);
	for (int j : order) f2[j] = first_step_interpolate(models.first, a, b, static_cast<double>(j) / k);
	for (int j = 1; j < k; ++j) differing += !same_bits(f1[j].values(), f2[j].values());
	Outcome o;
	o.pass = end_err <= 1e-5 && differing == 0;
	o.detail = fmt("endpoint error %.3g; %d of 14 frames depend on evaluation order", end_err, differing);
	return o;
}

Outcome rollout_accounting(const Trained *m, const fs::path &work) {
	const GridSpec g(64, 64);
	std::shared_ptr<const InterpolationModels> interp;
	std::shared_ptr<const CorrectionNet<float>> net;
	if (m) {
		interp = m->interp;
		net = m->correction;
	} else {
		interp = std::make_shared<InterpolationModels>(InterpConfig{}, g);
		net = std::make_shared<CorrectionNet<float>>(CorrectionConfig{}, g);
	}
	RolloutConfig cfg;
	cfg.scene = make_scene(SceneKind::plume2d, g, 77, 0.5, 4.0, 16);
	cfg.n = 16;
	const SimState s0 = Solver(cfg.scene).initial_state();
	const RolloutResult r = run(s0, cfg, NetworkCorrector(net), NetworkInterpolator(interp));
	const fs::path dir = work / "c8_rollout";
	fs::remove_all(dir);
	write_rollout(dir, s0, r, cfg);
	const auto counters = nlohmann::json::parse(slurp(dir / "counters.json"));
	const auto timings = nlohmann::json::parse(slurp(dir / "timings.json"));
	const int solver_calls = counters.at("solver_calls"), corrections = counters.at("corrections"),
			  interpolations = counters.at("interpolations");
	const double ct = timings.at("correction_s"), it = timings.at("interpolation_s");
	Outcome o;
	o.pass = solver_calls == 2 && corrections == 2 && interpolations == 14 && r.frames.size() == 16 && ct < it;
	o.detail = fmt("%d solver calls, %d corrections, %d interpolations; correction %.3f s vs interpolation %.3f s",
		solver_calls, corrections, interpolations, ct, it);
	return o;
}

Outcome perceptual_projection(const FeatureExtractor &phi) {
	const GridSpec g(16, 16, 16);
	ScalarField a = random_density(g, 31), b(g);
	// A smooth blob against noise keeps the three axis values distinct.
	for (int z = 0; z < 16; ++z)
		for (int y = 0; y < 16; ++y)
			for (int x = 0; x < 16; ++x) {
				const double r2 = (x - 5.0) * (x - 5.0) + (y - 9.0) * (y - 9.0) * 0.5 + (z - 8.0) * (z - 8.0) * 2.0;
				b(x, y, z) = static_cast<float>(std::exp(-r2 / 20.0));
			}
	double axis_mean = 0.0;
	std::string per_axis;
	for (Axis axis : {Axis::x, Axis::y, Axis::z}) {
		const double v = perceptual_loss_2d(project_mean(a, axis), project_mean(b, axis), phi);
		axis_mean += v / 3.0;
		per_axis += fmt(" %.4g", v);
	}
	std::mt19937_64 rng(99);
	double mc = 0.0;
	const int draws = 3000;
	for (int i = 0; i < draws; ++i) mc += perceptual_loss_3d(a, b, phi, rng);
	mc /= draws;
	const double rel = std::abs(mc - axis_mean) / axis_mean;
	Outcome o;
	o.pass = rel <= 0.05;
	o.detail = fmt("Monte-Carlo mean %.5g vs axis mean %.5g (axes:%s), relative difference %.3g", mc, axis_mean,
		per_axis.c_str(), rel);
	return o;
}

} // namespace

int main(int argc, char **argv) {
	CLI::App app{"smokecorr acceptance checks"};
	fs::path work = "acceptance_work";
	std::vector<int> only;
	int sims = 40, interp_epochs = 20, correction_epochs = 30;
	bool reuse = false;
	app.add_option("--work", work, "Scratch directory");
	app.add_option("--only", only, "Run only these criteria")->check(CLI::Range(1, 9));
	app.add_option("--sims", sims, "Simulations in the training corpus");
	app.add_option("--interp-epochs", interp_epochs, "Interpolation epochs");
	app.add_option("--correction-epochs", correction_epochs, "Correction epochs");
	app.add_flag("--reuse", reuse, "Reuse trained checkpoints found in the work directory");
	CLI11_PARSE(app, argc, argv);

	fs::create_directories(work);
	const std::set<int> selected = only.empty() ? std::set<int>{1, 2, 3, 4, 5, 6, 7, 8, 9}
											   : std::set<int>(only.begin(), only.end());
	const auto phi = Vgg16Features::random(TrainConfig{}.extractor_seed);
	std::optional<Trained> trained;
	int failed = 0;

	auto report = [&](int n, const std::function<Outcome()> &fn) {
		if (!selected.contains(n)) return;
		auto t0 = Clock::now();
		Outcome o;
		try {
			o = fn();
		} catch (const std::exception &e) {
			o.pass = false;
			o.detail = std::string("exception: ") + e.what();
		}
		std::printf("%s criterion %d: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", n, o.detail.c_str(), since(t0));
		std::fflush(stdout);
		failed += !o.pass;
	};

	report(1, [] { return solver_correctness(); });
	report(2, [&] { return property_suite(*phi); });
	report(3, [&] { return differentiability(work, *phi); });
	report(4, [&] { return dataset_protocol(work); });
	const bool need_training = selected.contains(5) || selected.contains(6);
	if (need_training) {
		report(5, [&] {
			auto r = trainability(work, *phi, sims, interp_epochs, correction_epochs, reuse);
			trained = r.models;
			return r.outcome;
		});
		if (!selected.contains(5)) {
			auto r = trainability(work, *phi, sims, interp_epochs, correction_epochs, true);
			trained = r.models;
		}
	}
	report(6, [&] {
		if (!trained) throw std::runtime_error("training did not complete");
		return rollout_ordering(*trained, work);
	});
	report(7, [&] {
		if (trained) return interpolation_contracts(*trained->interp);
		return interpolation_contracts(InterpolationModels(InterpConfig{}, GridSpec(64, 64)));
	});
	report(8, [&] { return rollout_accounting(trained ? &*trained : nullptr, work); });
	report(9, [&] { return perceptual_projection(*phi); });

	std::printf("%d of %zu criteria failed\n", failed, selected.size());
	return failed == 0 ? 0 : 1;
}
