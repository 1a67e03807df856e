#include "smokecorr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "smokecorr/losses.hpp"

namespace smokecorr {

namespace {

template <typename F>
double mse_values(const F &a, const F &b, const char *what) {
	require_same_grid(a.spec(), b.spec(), what);
	auto va = a.values();
	auto vb = b.values();
	if (va.empty()) return 0.0;
	double s = 0.0;
	for (std::size_t i = 0; i < va.size(); ++i) {
		const double d = static_cast<double>(va[i]) - vb[i];
		s += d * d;
	}
	return s / static_cast<double>(va.size());
}

std::ofstream open_csv(const std::filesystem::path &path) {
	if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
	std::ofstream out(path);
	if (!out) throw std::runtime_error("cannot write " + path.string());
	out.precision(10);
	return out;
}

} // namespace

double mse(const ScalarField &a, const ScalarField &b) { return mse_values(a, b, "mse"); }
double mse(const VectorField &a, const VectorField &b) { return mse_values(a, b, "mse"); }

double reduction_rate(double before, double after) {
	if (!(before > 0.0)) throw std::invalid_argument("reduction_rate needs before > 0");
	return 100.0 * (before - after) / before;
}

double ssim(const ScalarField &a, const ScalarField &b, const SsimOptions &opt) {
	require_same_grid(a.spec(), b.spec(), "ssim");
	const GridSpec &g = a.spec();
	if (g.d() != 2) throw std::invalid_argument("ssim is defined for 2D fields only");
	const int w = opt.window;
	if (g.nx() < w || g.ny() < w) throw std::invalid_argument("ssim window larger than the field");

	std::vector<double> kernel(static_cast<std::size_t>(w) * w);
	double ksum = 0.0;
	const double c = (w - 1) / 2.0;
	for (int y = 0; y < w; ++y)
		for (int x = 0; x < w; ++x) {
			const double v = std::exp(-((x - c) * (x - c) + (y - c) * (y - c)) / (2.0 * opt.sigma * opt.sigma));
			kernel[static_cast<std::size_t>(y * w + x)] = v;
			ksum += v;
		}
	for (auto &v : kernel) v /= ksum;

	const double c1 = std::pow(0.01 * opt.dynamic_range, 2);
	const double c2 = std::pow(0.03 * opt.dynamic_range, 2);
	double total = 0.0;
	int count = 0;
	for (int y0 = 0; y0 + w <= g.ny(); ++y0)
		for (int x0 = 0; x0 + w <= g.nx(); ++x0) {
			double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
			for (int y = 0; y < w; ++y)
				for (int x = 0; x < w; ++x) {
					const double k = kernel[static_cast<std::size_t>(y * w + x)];
					const double va = a(x0 + x, y0 + y);
					const double vb = b(x0 + x, y0 + y);
					ma += k * va;
					mb += k * vb;
					saa += k * va * va;
					sbb += k * vb * vb;
					sab += k * va * vb;
				}
			const double var_a = saa - ma * ma;
			const double var_b = sbb - mb * mb;
			const double cov = sab - ma * mb;
			total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
			++count;
		}
	return total / count;
}

double perceptual_distance(const ScalarField &a, const ScalarField &b, const FeatureExtractor &phi) {
	if (a.spec().d() == 2) return perceptual_loss_2d(a, b, phi);
	require_same_grid(a.spec(), b.spec(), "perceptual_distance");
	// Mean over the three axis projections.
	double s = 0.0;
	for (Axis axis : {Axis::x, Axis::y, Axis::z}) s += perceptual_loss_2d(project_mean(a, axis), project_mean(b, axis), phi);
	return s / 3.0;
}

std::vector<double> per_frame_curve(const std::vector<ScalarField> &pred, const std::vector<ScalarField> &gt) {
	if (pred.size() != gt.size()) {
		throw std::invalid_argument("per_frame_curve: " + std::to_string(pred.size()) + " predicted vs " +
			std::to_string(gt.size()) + " reference frames");
	}
	std::vector<double> out;
	for (std::size_t i = 0; i < pred.size(); ++i) out.push_back(mse(pred[i], gt[i]));
	return out;
}

void write_curve_csv(const std::filesystem::path &path, const std::vector<NamedSeries> &series, int first_frame) {
	auto out = open_csv(path);
	out << "frame";
	std::size_t len = 0;
	for (const auto &[name, v] : series) {
		out << ',' << name;
		len = std::max(len, v.size());
	}
	out << '\n';
	for (std::size_t i = 0; i < len; ++i) {
		out << first_frame + static_cast<int>(i);
		for (const auto &[name, v] : series) {
			out << ',';
			if (i < v.size()) out << v[i];
		}
		out << '\n';
	}
}

CorrectionEffect correction_effect(const CorrectionNet<float> &net, const std::vector<PairSample> &pairs) {
	if (pairs.empty()) throw std::invalid_argument("correction_effect needs at least one pair");
	CorrectionEffect e;
	for (const auto &p : pairs) {
		const SimState c = correct(p.big, p.start, net);
		e.density_before += mse(p.big.rho, p.gt.rho);
		e.density_after += mse(c.rho, p.gt.rho);
		e.velocity_before += mse(p.big.vel, p.gt.vel);
		e.velocity_after += mse(c.vel, p.gt.vel);
	}
	e.pairs = static_cast<int>(pairs.size());
	e.density_before /= e.pairs;
	e.density_after /= e.pairs;
	e.velocity_before /= e.pairs;
	e.velocity_after /= e.pairs;
	return e;
}

void write_table2_csv(const std::filesystem::path &path, const CorrectionEffect &e) {
	auto out = open_csv(path);
	out << "field,before,after,reduced_percent\n";
	out << "density," << e.density_before << ',' << e.density_after << ',' << e.density_reduction() << '\n';
	out << "velocity," << e.velocity_before << ',' << e.velocity_after << ',' << e.velocity_reduction() << '\n';
}

void write_ablation_csv(const std::filesystem::path &path, const std::vector<AblationRow> &rows) {
	auto out = open_csv(path);
	out << "method,mse,ssim,perceptual_distance\n";
	for (const auto &r : rows) out << r.method << ',' << r.mse << ',' << r.ssim << ',' << r.perceptual << '\n';
}

} // namespace smokecorr
