#pragma once

#include <random>

#include <nlohmann/json.hpp>

#include "smokecorr/feature_extractor.hpp"
#include "smokecorr/fields.hpp"
#include "smokecorr/nn/autograd.hpp"

namespace smokecorr {

struct LossWeights {
	double rv = 20.0;
	double tv = 20.0;
	double rrho = 50.0;
	double trho = 50.0;
	double g = 50.0;
	double interp = 1.0;
	double p = 0.1;

	/// Published weights; the perceptual weight depends on dimensionality.
	static LossWeights for_dim(int d);
	void validate() const;
	nlohmann::json to_json() const;
	static LossWeights from_json(const nlohmann::json &j, int d);
};

/// Unweighted loss components of one evaluation.
struct LossTerms {
	double rv = 0, g = 0, pv = 0, tv = 0;
	double rrho = 0, interp = 0, prho = 0, trho = 0;
};

double velocity_loss(const LossWeights &w, const LossTerms &t);
double density_loss(const LossWeights &w, const LossTerms &t);
double total_loss(const LossWeights &w, const LossTerms &t);

/// Maps density/velocity tensors to the 3-channel normalized image space of
/// the feature extractor (see README for the scaling).
template <typename T>
nn::Var<T> density_to_image(const nn::Var<T> &rho);
template <typename T>
nn::Var<T> velocity_to_image(const nn::Var<T> &vel, double velocity_rms);

// Differentiable terms; all are mean-reduced over batch, channels and cells.
template <typename T>
nn::Var<T> l1_reconstruction(const nn::Var<T> &pred, const nn::Var<T> &gt);
/// Mean over every cell and every one of the d*d Jacobian entries.
template <typename T>
nn::Var<T> gradient_loss(const nn::Var<T> &pred, const nn::Var<T> &gt);
template <typename T>
nn::Var<T> temporal_coherence_loss(const nn::Var<T> &base, const nn::Var<T> &pred_next, const nn::Var<T> &gt_next);

enum class FieldKind { density, velocity };

/// Mean squared feature difference of two already-mapped images.
template <typename T>
nn::Var<T> perceptual_images(const nn::Var<T> &pred_img, const nn::Var<T> &gt_img, const FeatureExtractor &phi);
/// Perceptual loss for 2D tensors of either field kind.
template <typename T>
nn::Var<T> perceptual_loss_2d(const nn::Var<T> &pred, const nn::Var<T> &gt, FieldKind kind, double velocity_rms,
	const FeatureExtractor &phi);
/// Projects along one uniformly drawn axis, then applies the 2D loss.
/// `axis_out` receives the drawn axis when non-null.
template <typename T>
nn::Var<T> perceptual_loss_3d(const nn::Var<T> &pred, const nn::Var<T> &gt, FieldKind kind, double velocity_rms,
	const FeatureExtractor &phi, std::mt19937_64 &rng, Axis *axis_out = nullptr);
/// Features of a 2D target, computed without recording gradients, so that a
/// fixed target can be reused across steps.
template <typename T>
nn::Tensor<T> target_features(const nn::Var<T> &gt, FieldKind kind, double velocity_rms, const FeatureExtractor &phi);
/// 2D perceptual loss against precomputed target features.
template <typename T>
nn::Var<T> perceptual_against(const nn::Var<T> &pred, const nn::Var<T> &gt_features, FieldKind kind,
	double velocity_rms, const FeatureExtractor &phi);
/// Picks the 2D or 3D variant from the tensor rank.
template <typename T>
nn::Var<T> perceptual_loss(const nn::Var<T> &pred, const nn::Var<T> &gt, FieldKind kind, double velocity_rms,
	const FeatureExtractor &phi, std::mt19937_64 &rng);

// Field-level conveniences.
double l1_reconstruction(const ScalarField &pred, const ScalarField &gt);
double l1_reconstruction(const VectorField &pred, const VectorField &gt);
double gradient_loss(const VectorField &pred, const VectorField &gt);
double temporal_coherence_loss(const ScalarField &base, const ScalarField &pred_next, const ScalarField &gt_next);
double temporal_coherence_loss(const VectorField &base, const VectorField &pred_next, const VectorField &gt_next);
double perceptual_loss_2d(const ScalarField &pred, const ScalarField &gt, const FeatureExtractor &phi);
double perceptual_loss_2d(const VectorField &pred, const VectorField &gt, double velocity_rms, const FeatureExtractor &phi);
double perceptual_loss_3d(const ScalarField &pred, const ScalarField &gt, const FeatureExtractor &phi, std::mt19937_64 &rng,
	Axis *axis_out = nullptr);
double perceptual_loss_3d(const VectorField &pred, const VectorField &gt, double velocity_rms,
	const FeatureExtractor &phi, std::mt19937_64 &rng, Axis *axis_out = nullptr);

} // namespace smokecorr
