#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "smokecorr/correction_net.hpp"
#include "smokecorr/datagen.hpp"
#include "smokecorr/feature_extractor.hpp"

namespace smokecorr {

double mse(const ScalarField &a, const ScalarField &b);
/// Averaged over cells and components.
double mse(const VectorField &a, const VectorField &b);

/// 100 * (before - after) / before; `before` must be > 0.
double reduction_rate(double before, double after);

struct SsimOptions {
	int window = 11;
	double sigma = 1.5;
	double dynamic_range = 1.0;
};

/// Mean SSIM over all fully contained Gaussian windows. 2D only.
double ssim(const ScalarField &a, const ScalarField &b, const SsimOptions &opt = {});

/// Feature-space distance under `phi` (densities mapped as in the
/// perceptual loss). Not a calibrated LPIPS value.
double perceptual_distance(const ScalarField &a, const ScalarField &b, const FeatureExtractor &phi);

/// MSE per frame; the sequences must have equal length.
std::vector<double> per_frame_curve(const std::vector<ScalarField> &pred, const std::vector<ScalarField> &gt);

using NamedSeries = std::pair<std::string, std::vector<double>>;
/// `frame,<name>...` with frames numbered from `first_frame`.
void write_curve_csv(const std::filesystem::path &path, const std::vector<NamedSeries> &series, int first_frame = 1);

struct CorrectionEffect {
	double density_before = 0.0;
	double density_after = 0.0;
	double velocity_before = 0.0;
	double velocity_after = 0.0;
	int pairs = 0;

	double density_reduction() const { return reduction_rate(density_before, density_after); }
	double velocity_reduction() const { return reduction_rate(velocity_before, velocity_after); }
};

/// Single-step MSE of the raw large-step result and of its correction
/// against the small-step ground truth, averaged over `pairs`.
CorrectionEffect correction_effect(const CorrectionNet<float> &net, const std::vector<PairSample> &pairs);
void write_table2_csv(const std::filesystem::path &path, const CorrectionEffect &effect);

struct AblationRow {
	std::string method;
	double mse = 0.0;
	double ssim = 0.0;
	double perceptual = 0.0;
};
void write_ablation_csv(const std::filesystem::path &path, const std::vector<AblationRow> &rows);

} // namespace smokecorr
