#include "smokecorr/losses.hpp"

#include <stdexcept>

namespace smokecorr {

using nn::Var;

LossWeights LossWeights::for_dim(int d) {
	LossWeights w;
	w.p = d == 3 ? 1e-6 : 0.1;
	return w;
}

void LossWeights::validate() const {
	for (double v : {rv, tv, rrho, trho, g, interp, p})
		if (!(v >= 0.0)) throw std::invalid_argument("loss weights must be >= 0");
}

nlohmann::json LossWeights::to_json() const {
	return {{"rv", rv}, {"tv", tv}, {"rrho", rrho}, {"trho", trho}, {"g", g}, {"interp", interp}, {"p", p}};
}

LossWeights LossWeights::from_json(const nlohmann::json &j, int d) {
	LossWeights w = for_dim(d);
	w.rv = j.value("rv", w.rv);
	w.tv = j.value("tv", w.tv);
	w.rrho = j.value("rrho", w.rrho);
	w.trho = j.value("trho", w.trho);
	w.g = j.value("g", w.g);
	w.interp = j.value("interp", w.interp);
	w.p = j.value("p", w.p);
	w.validate();
	return w;
}

double velocity_loss(const LossWeights &w, const LossTerms &t) {
	return w.rv * t.rv + w.g * t.g + w.p * t.pv + w.tv * t.tv;
}

double density_loss(const LossWeights &w, const LossTerms &t) {
	return w.rrho * t.rrho + w.interp * t.interp + w.p * t.prho + w.trho * t.trho;
}

double total_loss(const LossWeights &w, const LossTerms &t) { return velocity_loss(w, t) + density_loss(w, t); }

namespace {

template <typename T>
Var<T> normalize_image(const Var<T> &img) {
	std::vector<T> scale(3), shift(3);
	for (int c = 0; c < 3; ++c) {
		scale[static_cast<std::size_t>(c)] = static_cast<T>(1.0 / kImageStd[c]);
		shift[static_cast<std::size_t>(c)] = static_cast<T>(-static_cast<double>(kImageMean[c]) / kImageStd[c]);
	}
	return nn::channel_affine(img, scale, shift);
}

} // namespace

template <typename T>
Var<T> density_to_image(const Var<T> &rho) {
	if (rho->shape().c != 1) throw std::invalid_argument("density image needs one channel");
	auto c = nn::clamp(rho, T(0), T(1));
	return normalize_image(nn::concat_channels<T>({c, c, c}));
}

template <typename T>
Var<T> velocity_to_image(const Var<T> &vel, double velocity_rms) {
	const nn::Shape &s = vel->shape();
	if (s.c != 2 && s.c != 3) throw std::invalid_argument("velocity image needs 2 or 3 channels");
	if (!(velocity_rms > 0.0)) throw std::invalid_argument("velocity image needs a positive velocity_rms");
	Var<T> v3 = vel;
	if (s.c == 2) v3 = nn::concat_channels<T>({vel, nn::constant(nn::Tensor<T>(s.with_channels(1)))});
	const T k = static_cast<T>(1.0 / (2.0 * 3.0 * velocity_rms));
	auto mapped = nn::channel_affine(v3, std::vector<T>(3, k), std::vector<T>(3, T(0.5)));
	return normalize_image(nn::clamp(mapped, T(0), T(1)));
}

template <typename T>
Var<T> l1_reconstruction(const Var<T> &pred, const Var<T> &gt) {
	return nn::mean_abs(nn::sub(pred, gt));
}

template <typename T>
Var<T> gradient_loss(const Var<T> &pred, const Var<T> &gt) {
	// The difference operator is linear, so grad(pred) - grad(gt) = grad(pred - gt).
	return nn::mean_abs(nn::spatial_gradient(nn::sub(pred, gt)));
}

template <typename T>
Var<T> temporal_coherence_loss(const Var<T> &base, const Var<T> &pred_next, const Var<T> &gt_next) {
	return nn::mean_abs(nn::sub(nn::sub(gt_next, base), nn::sub(pred_next, base)));
}

template <typename T>
Var<T> perceptual_images(const Var<T> &pred_img, const Var<T> &gt_img, const FeatureExtractor &phi) {
	Var<T> gt_features;
	{
		nn::NoGradGuard guard;
		gt_features = phi.features(gt_img);
	}
	return nn::mean_square(nn::sub(phi.features(pred_img), gt_features));
}

template <typename T>
Var<T> perceptual_loss_2d(const Var<T> &pred, const Var<T> &gt, FieldKind kind, double velocity_rms,
	const FeatureExtractor &phi) {
	if (pred->shape().rank != 2) throw std::invalid_argument("perceptual_loss_2d needs 2D fields; use the 3D variant");
	if (!(pred->shape() == gt->shape())) throw GridMismatch("perceptual loss: prediction and target differ in shape");
	if (kind == FieldKind::density) return perceptual_images(density_to_image(pred), density_to_image(gt), phi);
	return perceptual_images(velocity_to_image(pred, velocity_rms), velocity_to_image(gt, velocity_rms), phi);
}

namespace {

template <typename T>
Var<T> to_image(const Var<T> &x, FieldKind kind, double velocity_rms) {
	return kind == FieldKind::density ? density_to_image(x) : velocity_to_image(x, velocity_rms);
}

} // namespace

template <typename T>
nn::Tensor<T> target_features(const Var<T> &gt, FieldKind kind, double velocity_rms, const FeatureExtractor &phi) {
	if (gt->shape().rank != 2) throw std::invalid_argument("target_features needs a 2D field");
	nn::NoGradGuard guard;
	return phi.features(to_image(gt, kind, velocity_rms))->value;
}

template <typename T>
Var<T> perceptual_against(const Var<T> &pred, const Var<T> &gt_features, FieldKind kind, double velocity_rms,
	const FeatureExtractor &phi) {
	if (pred->shape().rank != 2) throw std::invalid_argument("perceptual_against needs a 2D field");
	return nn::mean_square(nn::sub(phi.features(to_image(pred, kind, velocity_rms)), gt_features));
}

template <typename T>
Var<T> perceptual_loss_3d(const Var<T> &pred, const Var<T> &gt, FieldKind kind, double velocity_rms,
	const FeatureExtractor &phi, std::mt19937_64 &rng, Axis *axis_out) {
	if (pred->shape().rank != 3) throw std::invalid_argument("perceptual_loss_3d needs 3D fields");
	const auto axis = static_cast<Axis>(std::uniform_int_distribution<int>(0, 2)(rng));
	if (axis_out) *axis_out = axis;
	return perceptual_loss_2d(nn::project_mean(pred, axis), nn::project_mean(gt, axis), kind, velocity_rms, phi);
}

template <typename T>
Var<T> perceptual_loss(const Var<T> &pred, const Var<T> &gt, FieldKind kind, double velocity_rms,
	const FeatureExtractor &phi, std::mt19937_64 &rng) {
	if (pred->shape().rank == 3) return perceptual_loss_3d(pred, gt, kind, velocity_rms, phi, rng);
	return perceptual_loss_2d(pred, gt, kind, velocity_rms, phi);
}

namespace {

template <typename F>
Var<double> as_var(const F &field) {
	return nn::constant(nn::to_tensor<double>(field));
}

template <typename F>
void require_match(const F &a, const F &b, const char *what) {
	require_same_grid(a.spec(), b.spec(), what);
}

} // namespace

double l1_reconstruction(const ScalarField &pred, const ScalarField &gt) {
	require_match(pred, gt, "l1_reconstruction");
	return nn::scalar_value(l1_reconstruction(as_var(pred), as_var(gt)));
}

double l1_reconstruction(const VectorField &pred, const VectorField &gt) {
	require_match(pred, gt, "l1_reconstruction");
	return nn::scalar_value(l1_reconstruction(as_var(pred), as_var(gt)));
}

double gradient_loss(const VectorField &pred, const VectorField &gt) {
	require_match(pred, gt, "gradient_loss");
	return nn::scalar_value(gradient_loss(as_var(pred), as_var(gt)));
}

double temporal_coherence_loss(const ScalarField &base, const ScalarField &pred_next, const ScalarField &gt_next) {
	require_match(base, pred_next, "temporal_coherence_loss");
	require_match(base, gt_next, "temporal_coherence_loss");
	return nn::scalar_value(temporal_coherence_loss(as_var(base), as_var(pred_next), as_var(gt_next)));
}

double temporal_coherence_loss(const VectorField &base, const VectorField &pred_next, const VectorField &gt_next) {
	require_match(base, pred_next, "temporal_coherence_loss");
	require_match(base, gt_next, "temporal_coherence_loss");
	return nn::scalar_value(temporal_coherence_loss(as_var(base), as_var(pred_next), as_var(gt_next)));
}

double perceptual_loss_2d(const ScalarField &pred, const ScalarField &gt, const FeatureExtractor &phi) {
	require_match(pred, gt, "perceptual_loss_2d");
	nn::NoGradGuard guard;
	return nn::scalar_value(
		perceptual_loss_2d(nn::constant(nn::to_tensor<float>(pred)), nn::constant(nn::to_tensor<float>(gt)),
			FieldKind::density, 1.0, phi));
}

double perceptual_loss_2d(const VectorField &pred, const VectorField &gt, double velocity_rms,
	const FeatureExtractor &phi) {
	require_match(pred, gt, "perceptual_loss_2d");
	nn::NoGradGuard guard;
	return nn::scalar_value(
		perceptual_loss_2d(nn::constant(nn::to_tensor<float>(pred)), nn::constant(nn::to_tensor<float>(gt)),
			FieldKind::velocity, velocity_rms, phi));
}

double perceptual_loss_3d(const ScalarField &pred, const ScalarField &gt, const FeatureExtractor &phi,
	std::mt19937_64 &rng, Axis *axis_out) {
	require_match(pred, gt, "perceptual_loss_3d");
	nn::NoGradGuard guard;
	return nn::scalar_value(perceptual_loss_3d(nn::constant(nn::to_tensor<float>(pred)),
		nn::constant(nn::to_tensor<float>(gt)), FieldKind::density, 1.0, phi, rng, axis_out));
}

double perceptual_loss_3d(const VectorField &pred, const VectorField &gt, double velocity_rms,
	const FeatureExtractor &phi, std::mt19937_64 &rng, Axis *axis_out) {
	require_match(pred, gt, "perceptual_loss_3d");
	nn::NoGradGuard guard;
	return nn::scalar_value(perceptual_loss_3d(nn::constant(nn::to_tensor<float>(pred)),
		nn::constant(nn::to_tensor<float>(gt)), FieldKind::velocity, velocity_rms, phi, rng, axis_out));
}

#define SMOKECORR_INSTANTIATE(T)                                                                                   \
	template Var<T> density_to_image<T>(const Var<T> &);                                                           \
	template Var<T> velocity_to_image<T>(const Var<T> &, double);                                                  \
	template Var<T> l1_reconstruction<T>(const Var<T> &, const Var<T> &);                                          \
	template Var<T> gradient_loss<T>(const Var<T> &, const Var<T> &);                                              \
	template Var<T> temporal_coherence_loss<T>(const Var<T> &, const Var<T> &, const Var<T> &);                    \
	template Var<T> perceptual_images<T>(const Var<T> &, const Var<T> &, const FeatureExtractor &);                \
	template Var<T> perceptual_loss_2d<T>(const Var<T> &, const Var<T> &, FieldKind, double,                       \
		const FeatureExtractor &);                                                                                 \
	template nn::Tensor<T> target_features<T>(const Var<T> &, FieldKind, double, const FeatureExtractor &);          \
	template Var<T> perceptual_against<T>(const Var<T> &, const Var<T> &, FieldKind, double,                         \
		const FeatureExtractor &);                                                                                 \
	template Var<T> perceptual_loss_3d<T>(const Var<T> &, const Var<T> &, FieldKind, double,                       \
		const FeatureExtractor &, std::mt19937_64 &, Axis *);                                                      \
	template Var<T> perceptual_loss<T>(const Var<T> &, const Var<T> &, FieldKind, double, const FeatureExtractor &, \
		std::mt19937_64 &);

SMOKECORR_INSTANTIATE(float)
SMOKECORR_INSTANTIATE(double)

} // namespace smokecorr
