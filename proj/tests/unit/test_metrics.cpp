#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "smokecorr/metrics.hpp"

using namespace smokecorr;
namespace fs = std::filesystem;

namespace {

ScalarField random_scalar(const GridSpec &g, std::uint64_t seed) {
	std::mt19937_64 rng(seed);
	ScalarField f(g);
	for (auto &v : f.values()) v = std::uniform_real_distribution<float>(0.0f, 1.0f)(rng);
	return f;
}

std::string slurp(const fs::path &p) {
	std::ifstream in(p);
	std::stringstream s;
	s << in.rdbuf();
	return s.str();
}

const FeatureExtractor &phi() {
	static auto f = Vgg16Features::random(7);
	return *f;
}

} // namespace

TEST(Mse, Examples) {
	GridSpec g(2, 2);
	ScalarField a(g, std::vector<float>{0, 1, 2, 3}), b(g, std::vector<float>{1, 1, 2, 5});
	EXPECT_DOUBLE_EQ(mse(a, b), (1.0 + 0.0 + 0.0 + 4.0) / 4.0);
	EXPECT_EQ(mse(a, a), 0.0);
	VectorField u(g), v(g);
	u.component(0)[0] = 2.0f;
	v.component(1)[3] = -2.0f;
	EXPECT_DOUBLE_EQ(mse(u, v), 8.0 / 8.0);
	EXPECT_THROW(mse(a, ScalarField(GridSpec(2, 3))), GridMismatch);
}

TEST(ReductionRate, Examples) {
	EXPECT_DOUBLE_EQ(reduction_rate(2.0, 1.0), 50.0);
	EXPECT_DOUBLE_EQ(reduction_rate(1.0, 0.0), 100.0);
	EXPECT_DOUBLE_EQ(reduction_rate(1.0, 1.5), -50.0);
	EXPECT_THROW(reduction_rate(0.0, 1.0), std::invalid_argument);
}

TEST(Ssim, IdenticalIsOne) {
	ScalarField a = random_scalar(GridSpec(32, 32), 1);
	EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
}

TEST(Ssim, ConstantFieldsClosedForm) {
	GridSpec g(16, 16);
	const double x = 0.2, y = 0.6, c1 = 1e-4;
	const double expected = (2 * x * y + c1) / (x * x + y * y + c1);
	EXPECT_NEAR(ssim(ScalarField(g, 0.2f), ScalarField(g, 0.6f)), expected, 1e-6);
}

TEST(Ssim, SymmetricAndBelowOneForNoise) {
	GridSpec g(24, 24);
	ScalarField a = random_scalar(g, 2), b = random_scalar(g, 3);
	const double s = ssim(a, b);
	EXPECT_LT(s, 0.5);
	EXPECT_NEAR(s, ssim(b, a), 1e-12);
}

TEST(Ssim, RejectsSmallAnd3D) {
	EXPECT_THROW(ssim(ScalarField(GridSpec(8, 8)), ScalarField(GridSpec(8, 8))), std::invalid_argument);
	EXPECT_THROW(ssim(ScalarField(GridSpec(16, 16, 16)), ScalarField(GridSpec(16, 16, 16))), std::invalid_argument);
}

TEST(PerceptualDistance, ZeroAndSymmetric) {
	GridSpec g(16, 16);
	ScalarField a = random_scalar(g, 4), b = random_scalar(g, 5);
	EXPECT_EQ(perceptual_distance(a, a, phi()), 0.0);
	EXPECT_GT(perceptual_distance(a, b, phi()), 0.0);
	EXPECT_NEAR(perceptual_distance(a, b, phi()), perceptual_distance(b, a, phi()), 1e-9);
	GridSpec g3(16, 16, 16);
	ScalarField c = random_scalar(g3, 6);
	EXPECT_EQ(perceptual_distance(c, c, phi()), 0.0);
}

TEST(Curve, PerFrameAndCsv) {
	GridSpec g(4, 4);
	std::vector<ScalarField> pred{ScalarField(g, 1.0f), ScalarField(g, 2.0f)};
	std::vector<ScalarField> gt{ScalarField(g, 1.0f), ScalarField(g, 0.0f)};
	auto c = per_frame_curve(pred, gt);
	ASSERT_EQ(c.size(), 2u);
	EXPECT_EQ(c[0], 0.0);
	EXPECT_EQ(c[1], 4.0);
	EXPECT_THROW(per_frame_curve(pred, {gt[0]}), std::invalid_argument);

	auto dir = fs::temp_directory_path() / "smokecorr_test_metrics";
	fs::create_directories(dir);
	write_curve_csv(dir / "curve.csv", {{"a", {0.5, 1.0}}, {"b", {2.0}}});
	EXPECT_EQ(slurp(dir / "curve.csv"), "frame,a,b\n1,0.5,2\n2,1,\n");
}

TEST(Tables, CsvLayout) {
	auto dir = fs::temp_directory_path() / "smokecorr_test_tables";
	fs::create_directories(dir);
	CorrectionEffect e;
	e.density_before = 4.0;
	e.density_after = 1.0;
	e.velocity_before = 2.0;
	e.velocity_after = 1.0;
	EXPECT_DOUBLE_EQ(e.density_reduction(), 75.0);
	EXPECT_DOUBLE_EQ(e.velocity_reduction(), 50.0);
	write_table2_csv(dir / "t.csv", e);
	EXPECT_EQ(slurp(dir / "t.csv"), "field,before,after,reduced_percent\ndensity,4,1,75\nvelocity,2,1,50\n");
	write_ablation_csv(dir / "a.csv", {{"full", 0.25, 0.5, 1.5}});
	EXPECT_EQ(slurp(dir / "a.csv"), "method,mse,ssim,perceptual_distance\nfull,0.25,0.5,1.5\n");
}

TEST(CorrectionEffect, IdentityNetworkChangesNothing) {
	auto dir = fs::temp_directory_path() / "smokecorr_test_effect";
	fs::remove_all(dir);
	fs::create_directories(dir);
	auto archive = std::make_shared<const SimulationArchive>(
		generate_simulation(make_scene(SceneKind::plume2d, GridSpec(16, 16), 4, 0.5, 4.0, 16), dir / "sim"));
	auto pairs = build_pairs(archive, 8);
	CorrectionConfig cfg;
	cfg.unet.depth = 2;
	cfg.unet.encoder_kernels = {3, 3};
	cfg.unet.channels = {4, 8};
	cfg.head_scale = 0.0;
	CorrectionNet<float> net(cfg, GridSpec(16, 16));
	CorrectionEffect e = correction_effect(net, pairs);
	EXPECT_EQ(e.pairs, 2);
	double before = 0.0;
	for (const auto &p : pairs) before += mse(p.big.rho, p.gt.rho);
	EXPECT_NEAR(e.density_before, before / 2.0, 1e-12);
	EXPECT_GT(e.density_before, 0.0);
	EXPECT_EQ(e.density_after, e.density_before);
	EXPECT_NEAR(e.velocity_after, e.velocity_before, 1e-6 * e.velocity_before + 1e-12);
	EXPECT_THROW(correction_effect(net, {}), std::invalid_argument);
}
