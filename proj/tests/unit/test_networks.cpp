#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "smokecorr/correction_net.hpp"
#include "smokecorr/interpolation_net.hpp"
#include "smokecorr/solver.hpp"

using namespace smokecorr;
namespace fs = std::filesystem;

namespace {

UNetConfig tiny_unet() {
	UNetConfig u;
	u.depth = 2;
	u.encoder_kernels = {3, 3};
	u.channels = {4, 8};
	return u;
}

CorrectionConfig tiny_correction(double head_scale = 0.1) {
	CorrectionConfig c;
	c.unet = tiny_unet();
	c.velocity_rms = 0.5;
	c.head_scale = head_scale;
	return c;
}

InterpConfig tiny_interp(double head_scale = 0.1) {
	InterpConfig c;
	c.flow_unet = tiny_unet();
	c.refine_unet = tiny_unet();
	c.head_scale = head_scale;
	return c;
}

ScalarField random_scalar(const GridSpec &g, std::uint64_t seed) {
	std::mt19937_64 rng(seed);
	ScalarField f(g);
	for (auto &v : f.values()) v = std::uniform_real_distribution<float>(0.0f, 1.0f)(rng);
	return f;
}

VectorField random_vector(const GridSpec &g, std::uint64_t seed, float amp = 1.0f) {
	std::mt19937_64 rng(seed);
	VectorField f(g);
	for (auto &v : f.values()) v = std::uniform_real_distribution<float>(-amp, amp)(rng);
	return f;
}

bool bitwise_equal(std::span<const float> a, std::span<const float> b) {
	return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

fs::path temp_dir(const std::string &name) {
	auto p = fs::temp_directory_path() / ("smokecorr_test_" + name);
	fs::remove_all(p);
	return p;
}

} // namespace

TEST(UNetConfig, Defaults) {
	UNetConfig u;
	EXPECT_EQ(u.depth, 7);
	EXPECT_EQ(u.encoder_kernels, (std::vector<int>{7, 5, 3, 3, 3, 3, 3}));
	EXPECT_EQ(u.channels, (std::vector<int>{16, 32, 64, 128, 256, 512, 512}));
	EXPECT_EQ(u.decoder_kernel, 3);
	EXPECT_EQ(u.leaky_slope, 0.2);
	EXPECT_EQ(u.downsample_factor(), 64);
	EXPECT_NO_THROW(u.validate());
}

TEST(UNetConfig, FittedToSmallGrids) {
	UNetConfig u;
	EXPECT_EQ(u.fitted_to(GridSpec(64, 64)).depth, 7);
	UNetConfig f = u.fitted_to(GridSpec(16, 16));
	EXPECT_EQ(f.depth, 5);
	EXPECT_EQ(f.channels.size(), 5u);
	EXPECT_EQ(f.encoder_kernels.size(), 5u);
	EXPECT_EQ(u.fitted_to(GridSpec(8, 8)).depth, 4);
	EXPECT_EQ(UNetConfig::from_json(u.to_json()), u);
	UNetConfig bad = u;
	bad.channels.pop_back();
	EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(CorrectionNet, HeadShapesAndAlphaRange) {
	GridSpec g(64, 64);
	CorrectionConfig cfg;
	cfg.velocity_rms = 0.3;
	CorrectionNet<float> net(cfg, g);
	EXPECT_EQ(net.unet().config().depth, 7);
	CorrectionHeads h = predict_heads(net, random_scalar(g, 1), random_vector(g, 2), random_scalar(g, 3),
		random_vector(g, 4));
	EXPECT_EQ(h.v_hat.components(), 2);
	EXPECT_EQ(h.flow.components(), 2);
	EXPECT_EQ(h.rho_tilde.spec(), g);
	EXPECT_EQ(h.alpha.spec(), g);
	for (float a : h.alpha.values()) {
		EXPECT_GE(a, 0.0f);
		EXPECT_LE(a, 1.0f);
	}
}

TEST(CorrectionNet, AlphaBoundedForExtremeInputs) {
	GridSpec g(16, 16);
	CorrectionNet<float> net(tiny_correction(5.0), g);
	ScalarField big(g, 1e4f);
	CorrectionHeads h = predict_heads(net, big, random_vector(g, 5, 1e3f), big, random_vector(g, 6, 1e3f));
	for (float a : h.alpha.values()) {
		EXPECT_GE(a, 0.0f);
		EXPECT_LE(a, 1.0f);
	}
}

TEST(CorrectionNet, DeterministicForward) {
	GridSpec g(16, 16);
	CorrectionNet<float> a(tiny_correction(), g), b(tiny_correction(), g);
	auto r0 = random_scalar(g, 1), rb = random_scalar(g, 2);
	auto v0 = random_vector(g, 3), vb = random_vector(g, 4);
	CorrectionHeads h1 = predict_heads(a, r0, v0, rb, vb);
	CorrectionHeads h2 = predict_heads(a, r0, v0, rb, vb);
	CorrectionHeads h3 = predict_heads(b, r0, v0, rb, vb);
	EXPECT_TRUE(bitwise_equal(h1.v_hat.values(), h2.v_hat.values()));
	EXPECT_TRUE(bitwise_equal(h1.flow.values(), h3.flow.values()));
	EXPECT_TRUE(bitwise_equal(h1.alpha.values(), h3.alpha.values()));
}

TEST(CorrectionNet, IndivisibleExtentRejected) {
	GridSpec g(16, 16);
	CorrectionNet<float> net(tiny_correction(), g);
	using namespace nn;
	GridSpec odd(15, 16);
	auto r = constant(to_tensor<float>(ScalarField(odd)));
	auto v = constant(to_tensor<float>(VectorField(odd)));
	EXPECT_THROW(net.forward(r, v, r, v), std::invalid_argument);
	ParamSet<float> ps;
	UNetConfig c = tiny_unet();
	c.in_channels = 1;
	UNet<float> u1(c, "", 2);
	u1.init_params(ps, 1);
	EXPECT_THROW(u1.forward(ps, constant(Tensor<float>(shape_for(odd, 1)))), std::invalid_argument);
}

TEST(CorrectionNet, ParameterCountAtDefaultDepth) {
	CorrectionConfig cfg;
	CorrectionNet<float> net(cfg, GridSpec(64, 64));
	EXPECT_GT(net.params().value_count(), 10'000'000u);
}

TEST(FuseDensity, Arithmetic) {
	GridSpec g(8, 8);
	ScalarField rho_big(g, 0.3f), tilde(g, 0.2f), alpha(g, 0.5f);
	ScalarField out = fuse_density(rho_big, FlowField(g), tilde, alpha);
	for (float v : out.values()) EXPECT_FLOAT_EQ(v, 0.4f);
}

TEST(FuseDensity, ZeroAlphaIsPureWarp) {
	GridSpec g(12, 10);
	ScalarField rho = random_scalar(g, 7);
	FlowField flow = random_vector(g, 8, 2.0f);
	ScalarField out = fuse_density(rho, flow, random_scalar(g, 9), ScalarField(g, 0.0f));
	EXPECT_TRUE(bitwise_equal(out.values(), warp(rho, flow).values()));
}

TEST(FuseDensity, ZeroFlowUnitAlphaAdds) {
	GridSpec g(12, 10);
	ScalarField rho = random_scalar(g, 10), tilde = random_scalar(g, 11);
	ScalarField out = fuse_density(rho, FlowField(g), tilde, ScalarField(g, 1.0f));
	for (std::size_t i = 0; i < g.cells(); ++i) EXPECT_EQ(out[i], rho[i] + tilde[i]);
}

TEST(FuseDensity, LinearInResidual) {
	GridSpec g(8, 8);
	std::mt19937_64 rng(12);
	// Dyadic values keep every sum exact in float.
	auto dyadic = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng) / 64.0f; };
	ScalarField rho(g), t1(g), t2(g), alpha(g), sum(g);
	for (std::size_t i = 0; i < g.cells(); ++i) {
		rho[i] = dyadic(0, 64);
		t1[i] = dyadic(-64, 64);
		t2[i] = dyadic(-64, 64);
		alpha[i] = dyadic(0, 64);
		sum[i] = t1[i] + t2[i];
	}
	FlowField flow(g);
	for (auto &v : flow.values()) v = dyadic(-64, 64);
	ScalarField f12 = fuse_density(rho, flow, sum, alpha), f1 = fuse_density(rho, flow, t1, alpha);
	for (std::size_t i = 0; i < g.cells(); ++i) EXPECT_EQ(f12[i] - f1[i], alpha[i] * t2[i]);
}

TEST(FuseDensity, GridMismatch) {
	GridSpec g(8, 8), h(8, 9);
	EXPECT_THROW(fuse_density(ScalarField(g), FlowField(g), ScalarField(h), ScalarField(g)), GridMismatch);
}

TEST(Correct, ZeroHeadIsIdentityAndClamps) {
	GridSpec g(16, 16);
	CorrectionNet<float> net(tiny_correction(0.0), g);
	SimState prev{random_scalar(g, 1), random_vector(g, 2), 8};
	SimState big{random_scalar(g, 3), random_vector(g, 4), 16};
	SimState out = correct(big, prev, net);
	EXPECT_TRUE(bitwise_equal(out.rho.values(), big.rho.values()));
	for (std::size_t i = 0; i < out.vel.values().size(); ++i) EXPECT_NEAR(out.vel.values()[i], big.vel.values()[i], 1e-6);
	EXPECT_EQ(out.frame_index, 16);

	CorrectionNet<float> noisy(tiny_correction(20.0), g);
	SimState c = correct(big, prev, noisy);
	for (float v : c.rho.values()) EXPECT_GE(v, 0.0f);
	EXPECT_EQ(c.frame_index, 16);
}

TEST(CorrectionNet, CheckpointRoundTrip) {
	GridSpec g(16, 16);
	CorrectionNet<float> net(tiny_correction(), g);
	auto dir = temp_dir("corr_ckpt");
	net.save(dir, {{"epoch", 4}});
	CorrectionNet<float> loaded = CorrectionNet<float>::load(dir);
	ASSERT_EQ(loaded.params().items().size(), net.params().items().size());
	for (std::size_t i = 0; i < net.params().items().size(); ++i) {
		const auto &a = net.params().items()[i].var->value.data;
		const auto &b = loaded.params().items()[i].var->value.data;
		EXPECT_TRUE(bitwise_equal(a, b));
	}
	EXPECT_EQ(loaded.config().velocity_rms, 0.5);
	EXPECT_TRUE(fs::exists(dir / "manifest.json"));
	EXPECT_TRUE(fs::exists(dir / "weights.f32"));

	CorrectionConfig other = tiny_correction();
	other.unet.channels = {4, 16};
	CorrectionNet<float> mismatched(other, g);
	EXPECT_THROW(mismatched.load_weights(dir), nn::CheckpointError);
	EXPECT_THROW(CorrectionNet<float>::load(dir / "missing"), nn::CheckpointError);
}

TEST(CorrectionNet, GradientCheckDouble) {
	using namespace nn;
	GridSpec g(8, 8);
	CorrectionNet<double> net(tiny_correction(1.0), g);
	auto r0 = constant(to_tensor<double>(random_scalar(g, 1)));
	auto v0 = constant(to_tensor<double>(random_vector(g, 2, 0.5f)));
	auto rb = constant(to_tensor<double>(random_scalar(g, 3)));
	auto vb = constant(to_tensor<double>(random_vector(g, 4, 0.5f)));
	auto target = constant(to_tensor<double>(random_scalar(g, 5)));
	auto loss = [&] {
		auto h = net.forward(r0, v0, rb, vb);
		return add(mean_square(sub(net.fuse(rb, h), target)), mean_square(h.v_hat));
	};
	net.params().zero_grad();
	backward(loss());
	std::mt19937_64 rng(6);
	int checked = 0;
	for (const auto &p : net.params().items()) {
		auto &vals = p.var->value.data;
		for (int s = 0; s < 3; ++s) {
			const std::size_t i = std::uniform_int_distribution<std::size_t>(0, vals.size() - 1)(rng);
			const double analytic = p.var->grad.empty() ? 0.0 : p.var->grad[i];
			NoGradGuard guard;
			const double keep = vals[i], h = 1e-6;
			vals[i] = keep + h;
			const double up = scalar_value(loss());
			vals[i] = keep - h;
			const double down = scalar_value(loss());
			vals[i] = keep;
			const double numeric = (up - down) / (2 * h);
			const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
			EXPECT_LE(std::abs(analytic - numeric) / scale, 1e-2) << p.name << "[" << i << "]";
			++checked;
		}
	}
	EXPECT_GT(checked, 10);
}

TEST(ChooseStep, Policy) {
	EXPECT_EQ(choose_step(10, 100, 0.5), InterpStep::second);
	EXPECT_EQ(choose_step(50, 100, 0.5), InterpStep::second);
	EXPECT_EQ(choose_step(60, 100, 0.5), InterpStep::first);
	for (int f = 1; f <= 100; ++f) EXPECT_EQ(choose_step(f, 100, 0.0), InterpStep::first);
	EXPECT_EQ(choose_step(100, 100, 1.0), InterpStep::second);
}

TEST(Interpolation, EndpointsExact) {
	GridSpec g(16, 16);
	InterpolationModels m(tiny_interp(), g);
	ScalarField a = random_scalar(g, 1), b = random_scalar(g, 2);
	EXPECT_TRUE(bitwise_equal(first_step_interpolate(m.first, a, b, 0.0).values(), a.values()));
	EXPECT_TRUE(bitwise_equal(first_step_interpolate(m.first, a, b, 1.0).values(), b.values()));
	EXPECT_THROW(first_step_interpolate(m.first, a, b, 1.5), std::invalid_argument);
}

TEST(Interpolation, ZeroNetworksCrossFade) {
	GridSpec g(16, 16);
	InterpolationModels m(tiny_interp(0.0), g);
	ScalarField a = random_scalar(g, 3), b = random_scalar(g, 4);
	for (double t : {0.125, 0.5, 0.875}) {
		ScalarField out = first_step_interpolate(m.first, a, b, t);
		for (std::size_t i = 0; i < g.cells(); ++i) EXPECT_NEAR(out[i], (1 - t) * a[i] + t * b[i], 1e-6);
	}
}

TEST(Interpolation, NonNegativeForNonNegativeInputs) {
	GridSpec g(16, 16);
	InterpolationModels m(tiny_interp(3.0), g);
	ScalarField a = random_scalar(g, 5), b = random_scalar(g, 6);
	const auto out = first_step_interpolate(m.first, a, b, 0.375);
	for (float v : out.values()) EXPECT_GE(v, 0.0f);
}

TEST(Interpolation, SecondStepWithZeroVelocityMatchesFirstStepForm) {
	GridSpec g(16, 16);
	InterpolationModels m(tiny_interp(), g);
	ScalarField a = random_scalar(g, 7), b = random_scalar(g, 8);
	ScalarField second = second_step_interpolate(m.second, a, VectorField(g), b, 3, 8, 0.5);
	ScalarField direct = first_step_interpolate(m.second, a, b, 3.0 / 8.0);
	EXPECT_TRUE(bitwise_equal(second.values(), direct.values()));
	ScalarField last = second_step_interpolate(m.second, a, VectorField(g), b, 7, 8, 0.5);
	EXPECT_EQ(last.spec(), g);
	EXPECT_THROW(second_step_interpolate(m.second, a, VectorField(g), b, 0, 8, 0.5), std::invalid_argument);
	EXPECT_THROW(second_step_interpolate(m.second, a, VectorField(g), b, 8, 8, 0.5), std::invalid_argument);
}

TEST(Interpolation, FrozenAdvectionTranslates) {
	GridSpec g(16, 16);
	ScalarField a = random_scalar(g, 9);
	VectorField v(g);
	for (auto &c : v.component(0)) c = 1.0f;
	// Whole-cell displacements per step keep the semi-Lagrangian shift exact.
	ScalarField adv = advect_frozen(a, v, 2, 1.0);
	for (int y = 0; y < 16; ++y)
		for (int x = 2; x < 16; ++x) EXPECT_NEAR(adv(x, y), a(x - 2, y), 1e-6);

	InterpolationModels m(tiny_interp(0.0), g);
	ScalarField b = random_scalar(g, 10);
	ScalarField out = second_step_interpolate(m.second, a, v, b, 2, 8, 1.0);
	for (int y = 0; y < 16; ++y)
		for (int x = 2; x < 16; ++x) EXPECT_NEAR(out(x, y), 0.75 * a(x - 2, y) + 0.25 * b(x, y), 1e-6);
}

TEST(Interpolation, FramesIndependentOfEvaluationOrder) {
	GridSpec g(16, 16);
	InterpolationModels m(tiny_interp(), g);
	ScalarField a = random_scalar(g, 11), b = random_scalar(g, 12);
	VectorField v = random_vector(g, 13, 0.5f);
	std::vector<ScalarField> forward(8), backward(8);
	for (int j = 1; j < 8; ++j) forward[j] = second_step_interpolate(m.second, a, v, b, j, 8, 0.5);
	for (int j = 7; j >= 1; --j) backward[j] = second_step_interpolate(m.second, a, v, b, j, 8, 0.5);
	for (int j = 1; j < 8; ++j) EXPECT_TRUE(bitwise_equal(forward[j].values(), backward[j].values())) << j;
}

TEST(Interpolation, SeparateParameterSetsAndCheckpoints) {
	GridSpec g(16, 16);
	InterpolationModels m(tiny_interp(), g);
	EXPECT_FALSE(bitwise_equal(m.first.params().items().front().var->value.data,
		m.second.params().items().front().var->value.data));
	auto dir = temp_dir("interp_ckpt");
	m.save(dir);
	EXPECT_TRUE(fs::exists(dir / "first" / "manifest.json"));
	EXPECT_TRUE(fs::exists(dir / "second" / "weights.f32"));
	InterpolationModels loaded = InterpolationModels::load(dir);
	ScalarField a = random_scalar(g, 14), b = random_scalar(g, 15);
	EXPECT_TRUE(bitwise_equal(first_step_interpolate(m.first, a, b, 0.25).values(),
		first_step_interpolate(loaded.first, a, b, 0.25).values()));
	EXPECT_TRUE(bitwise_equal(first_step_interpolate(m.second, a, b, 0.25).values(),
		first_step_interpolate(loaded.second, a, b, 0.25).values()));
	EXPECT_THROW(InterpolationModels::load(dir / "missing"), nn::CheckpointError);
}

TEST(Interpolation, ThreeDimensionalShapes) {
	GridSpec g(8, 8, 8);
	InterpolationModels m(tiny_interp(), g);
	ScalarField out = first_step_interpolate(m.first, random_scalar(g, 16), random_scalar(g, 17), 0.5);
	EXPECT_EQ(out.spec(), g);
	EXPECT_TRUE(out.all_finite());
}
