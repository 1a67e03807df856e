#include <cmath>
#include <fstream>
#include <cstring>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "smokecorr/field_io.hpp"
#include "smokecorr/fields.hpp"

using namespace smokecorr;

namespace {

ScalarField random_scalar(const GridSpec &g, std::uint64_t seed) {
	std::mt19937_64 rng(seed);
	std::uniform_real_distribution<float> u(-1.0f, 1.0f);
	ScalarField f(g);
	for (auto &v : f.values()) v = u(rng);
	return f;
}

VectorField random_vector(const GridSpec &g, std::uint64_t seed) {
	std::mt19937_64 rng(seed);
	std::uniform_real_distribution<float> u(-1.0f, 1.0f);
	VectorField f(g);
	for (auto &v : f.values()) v = u(rng);
	return f;
}

std::filesystem::path temp_dir(const std::string &name) {
	auto p = std::filesystem::temp_directory_path() / ("smokecorr_test_" + name);
	std::filesystem::remove_all(p);
	std::filesystem::create_directories(p);
	return p;
}

} // namespace

TEST(GridSpec, IndexIsXFastest) {
	GridSpec g(4, 3, 2);
	EXPECT_EQ(g.index(1, 0, 0), 1u);
	EXPECT_EQ(g.index(0, 1, 0), 4u);
	EXPECT_EQ(g.index(0, 0, 1), 12u);
	EXPECT_EQ(g.cells(), 24u);
}

TEST(GridSpec, RejectsBadDimensionality) {
	EXPECT_THROW(GridSpec(std::vector<int>{8}), std::invalid_argument);
	EXPECT_THROW(GridSpec(std::vector<int>{8, 8, 8, 8}), std::invalid_argument);
	EXPECT_THROW(GridSpec(0, 8), std::invalid_argument);
}

TEST(GridSpec, SimulationExtentAtLeastEight) {
	EXPECT_NO_THROW(GridSpec(8, 8).require_simulation_extent());
	EXPECT_THROW(GridSpec(8, 7).require_simulation_extent(), std::invalid_argument);
}

TEST(Sample, ConstantFieldAnywhere) {
	ScalarField f(GridSpec(8, 8), 2.5f);
	EXPECT_FLOAT_EQ(sample(f, 3.3, 4.7), 2.5f);
	EXPECT_FLOAT_EQ(sample(f, -10.0, 100.0), 2.5f);
}

TEST(Sample, MidwayBetweenCells) {
	ScalarField f(GridSpec(4, 4));
	f(1, 2) = 1.0f;
	EXPECT_FLOAT_EQ(sample(f, 0.5, 2.0), 0.5f);
}

TEST(Sample, FarOutsideClampsToEdgeCell) {
	ScalarField f = random_scalar(GridSpec(6, 5), 3);
	EXPECT_FLOAT_EQ(sample(f, -50.0, -50.0), f(0, 0));
	EXPECT_FLOAT_EQ(sample(f, 50.0, 2.0), f(5, 2));
	EXPECT_FLOAT_EQ(sample(f, 3.0, 99.0), f(3, 4));
}

TEST(Sample, LinearFieldReproducedInRange) {
	GridSpec g(9, 7, 5);
	ScalarField f(g);
	for (int z = 0; z < 5; ++z)
		for (int y = 0; y < 7; ++y)
			for (int x = 0; x < 9; ++x) f(x, y, z) = 0.3f * x - 0.2f * y + 0.1f * z + 1.0f;
	std::mt19937_64 rng(11);
	for (int i = 0; i < 200; ++i) {
		double x = std::uniform_real_distribution<double>(0, 8)(rng);
		double y = std::uniform_real_distribution<double>(0, 6)(rng);
		double z = std::uniform_real_distribution<double>(0, 4)(rng);
		EXPECT_NEAR(sample(f, x, y, z), 0.3 * x - 0.2 * y + 0.1 * z + 1.0, 1e-6);
	}
}

TEST(Warp, ZeroFlowIsBitwiseIdentity) {
	for (GridSpec g : {GridSpec(16, 12), GridSpec(8, 6, 5)}) {
		ScalarField rho = random_scalar(g, 5);
		ScalarField out = warp(rho, FlowField(g));
		ASSERT_EQ(std::memcmp(out.values().data(), rho.values().data(), rho.size() * sizeof(float)), 0);
	}
}

TEST(Warp, IntegerShiftMovesCell) {
	GridSpec g(4, 4);
	ScalarField rho(g);
	rho(2, 1) = 1.0f;
	FlowField flow(g);
	for (auto &v : flow.component(0)) v = 1.0f;
	ScalarField out = warp(rho, flow);
	for (int y = 1; y < 3; ++y)
		for (int x = 1; x < 3; ++x) EXPECT_EQ(out(x, y), 0.0f) << x << "," << y;
	EXPECT_EQ(out(3, 1), 1.0f);
}

TEST(Warp, ConstantStaysConstant) {
	GridSpec g(10, 8);
	ScalarField rho(g, 0.75f);
	ScalarField out = warp(rho, random_vector(g, 9));
	for (float v : out.values()) EXPECT_FLOAT_EQ(v, 0.75f);
}

TEST(Warp, GridMismatchIsAnError) {
	EXPECT_THROW(warp(ScalarField(GridSpec(8, 8)), FlowField(GridSpec(8, 9))), GridMismatch);
}

TEST(Gradient, ConstantFieldHasZeroJacobian) {
	VectorField v(GridSpec(8, 8), 3.0f);
	for (float x : gradient(v).values) EXPECT_EQ(x, 0.0f);
}

TEST(Gradient, RampInterior) {
	GridSpec g(8, 8);
	VectorField v(g);
	for (int y = 0; y < 8; ++y)
		for (int x = 0; x < 8; ++x) v(0, x, y) = static_cast<float>(x);
	Jacobian j = gradient(v);
	for (int y = 1; y < 7; ++y)
		for (int x = 1; x < 7; ++x) {
			EXPECT_FLOAT_EQ(j(0, 0, x, y), 1.0f);
			EXPECT_FLOAT_EQ(j(0, 1, x, y), 0.0f);
			EXPECT_FLOAT_EQ(j(1, 0, x, y), 0.0f);
			EXPECT_FLOAT_EQ(j(1, 1, x, y), 0.0f);
		}
	// One-sided at the boundary still sees slope 1 on a ramp.
	EXPECT_FLOAT_EQ(j(0, 0, 0, 3), 1.0f);
	EXPECT_FLOAT_EQ(j(0, 0, 7, 3), 1.0f);
}

TEST(Gradient, ConstantOffsetGivesIdenticalJacobian) {
	GridSpec g(9, 7, 6);
	VectorField a = random_vector(g, 2);
	VectorField b = a;
	// Dyadic offset keeps the shifted values exact.
	for (auto &v : b.values()) v += 4.0f;
	Jacobian ja = gradient(a), jb = gradient(b);
	for (std::size_t i = 0; i < ja.values.size(); ++i) {
		EXPECT_NEAR(ja.values[i], jb.values[i], 1e-6f);
	}
}

TEST(Divergence, ConstantVelocityIsZero) {
	VectorField v(GridSpec(8, 8), 1.5f);
	const auto div = divergence(v);
	for (float x : div.values()) EXPECT_EQ(x, 0.0f);
}

TEST(Divergence, LinearExpansionIsTwo) {
	GridSpec g(8, 8);
	VectorField v(g);
	for (int y = 0; y < 8; ++y)
		for (int x = 0; x < 8; ++x) {
			v(0, x, y) = static_cast<float>(x);
			v(1, x, y) = static_cast<float>(y);
		}
	ScalarField d = divergence(v);
	for (int y = 1; y < 7; ++y)
		for (int x = 1; x < 7; ++x) EXPECT_FLOAT_EQ(d(x, y), 2.0f);
}

TEST(Divergence, RotationIsZeroInside) {
	GridSpec g(8, 8);
	VectorField v(g);
	for (int y = 0; y < 8; ++y)
		for (int x = 0; x < 8; ++x) {
			v(0, x, y) = static_cast<float>(y);
			v(1, x, y) = static_cast<float>(-x);
		}
	ScalarField d = divergence(v);
	for (int y = 1; y < 7; ++y)
		for (int x = 1; x < 7; ++x) EXPECT_EQ(d(x, y), 0.0f);
}

TEST(ProjectMean, TwoLayerAverage) {
	GridSpec g(2, 2, 2);
	ScalarField f(g);
	for (int y = 0; y < 2; ++y)
		for (int x = 0; x < 2; ++x) f(x, y, 1) = 2.0f;
	ScalarField p = project_mean(f, Axis::z);
	EXPECT_EQ(p.spec(), GridSpec(2, 2));
	for (float v : p.values()) EXPECT_FLOAT_EQ(v, 1.0f);
}

TEST(ProjectMean, ConstantAnyAxis) {
	ScalarField f(GridSpec(4, 5, 6), 0.3f);
	for (Axis a : {Axis::x, Axis::y, Axis::z}) {
		const auto plane = project_mean(f, a);
		for (float v : plane.values()) EXPECT_FLOAT_EQ(v, 0.3f);
	}
}

TEST(ProjectMean, MatchesBruteForceSum) {
	for (int n : {4, 8}) {
		GridSpec g(n, n, n);
		ScalarField f = random_scalar(g, 100 + n);
		for (Axis axis : {Axis::x, Axis::y, Axis::z}) {
			ScalarField p = project_mean(f, axis);
			for (int b = 0; b < n; ++b)
				for (int a = 0; a < n; ++a) {
					double sum = 0.0;
					for (int t = 0; t < n; ++t) {
						if (axis == Axis::z) sum += f(a, b, t);
						else if (axis == Axis::y) sum += f(a, t, b);
						else sum += f(t, a, b);
					}
					const double got = static_cast<double>(p(a, b)) * n;
					EXPECT_LE(std::abs(got - sum), 1e-5 * std::max(1.0, std::abs(sum)));
				}
		}
	}
}

TEST(ProjectMean, RejectsTwoDimensionalInput) {
	EXPECT_THROW(project_mean(ScalarField(GridSpec(8, 8)), Axis::z), std::invalid_argument);
}

TEST(TimeConcatDiff, Examples) {
	GridSpec g(8, 8);
	ScalarField a = random_scalar(g, 1);
	const auto same = time_concat_diff(a, a);
	for (float v : same.values()) EXPECT_EQ(v, 0.0f);
	const auto up = time_concat_diff(ScalarField(g, 0.0f), ScalarField(g, 2.0f));
	for (float v : up.values()) EXPECT_EQ(v, 2.0f);
	const auto down = time_concat_diff(ScalarField(g, 1.0f), ScalarField(g, 0.0f));
	for (float v : down.values()) EXPECT_EQ(v, -1.0f);
	EXPECT_THROW(time_concat_diff(ScalarField(g), ScalarField(GridSpec(8, 9))), GridMismatch);
	VectorField va = random_vector(g, 4);
	const auto same_vec = time_concat_diff(va, va);
	for (float v : same_vec.values()) EXPECT_EQ(v, 0.0f);
}

TEST(FieldIo, RoundTripIsBitwise) {
	auto dir = temp_dir("field_io");
	GridSpec g(12, 9, 3);
	ScalarField s = random_scalar(g, 21);
	VectorField v = random_vector(g, 22);
	write_field(dir / "s.f32", s);
	write_field(dir / "v.f32", v);
	ScalarField s2 = read_scalar_field(dir / "s.f32", g);
	VectorField v2 = read_vector_field(dir / "v.f32", g);
	EXPECT_EQ(std::memcmp(s.values().data(), s2.values().data(), s.size() * 4), 0);
	EXPECT_EQ(std::memcmp(v.values().data(), v2.values().data(), v.values().size() * 4), 0);
	EXPECT_EQ(std::filesystem::file_size(dir / "s.f32"), g.cells() * 4);
}

TEST(FieldIo, LittleEndianLayout) {
	auto dir = temp_dir("field_le");
	ScalarField s(GridSpec(2, 1));
	s(0, 0) = 1.0f;
	write_field(dir / "s.f32", s);
	std::ifstream in(dir / "s.f32", std::ios::binary);
	unsigned char bytes[8];
	in.read(reinterpret_cast<char *>(bytes), 8);
	// 1.0f = 0x3f800000
	EXPECT_EQ(bytes[0], 0x00);
	EXPECT_EQ(bytes[2], 0x80);
	EXPECT_EQ(bytes[3], 0x3f);
}

TEST(FieldIo, WrongLengthNamesFile) {
	auto dir = temp_dir("field_bad");
	write_f32(dir / "short.f32", std::vector<float>(10, 1.0f));
	try {
		read_scalar_field(dir / "short.f32", GridSpec(4, 4));
		FAIL() << "expected an error";
	} catch (const FieldIoError &e) {
		EXPECT_NE(std::string(e.what()).find("short.f32"), std::string::npos);
	}
	EXPECT_THROW(read_scalar_field(dir / "missing.f32", GridSpec(4, 4)), FieldIoError);
}
