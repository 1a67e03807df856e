#include "smokecorr/correction_net.hpp"

#include <algorithm>

namespace smokecorr {

using nn::Var;

nlohmann::json CorrectionConfig::to_json() const {
	return {{"unet", unet.to_json()}, {"velocity_rms", velocity_rms}, {"seed", seed}, {"head_scale", head_scale}};
}

CorrectionConfig CorrectionConfig::from_json(const nlohmann::json &j) {
	CorrectionConfig c;
	if (j.contains("unet")) c.unet = UNetConfig::from_json(j.at("unet"));
	c.velocity_rms = j.value("velocity_rms", c.velocity_rms);
	c.seed = j.value("seed", c.seed);
	c.head_scale = j.value("head_scale", c.head_scale);
	return c;
}

namespace {

UNetConfig correction_unet(const CorrectionConfig &cfg, const GridSpec &grid) {
	UNetConfig u = cfg.unet;
	u.in_channels = 2 * (grid.d() + 1);
	u.out_channels = 2 * grid.d() + 2;
	return u.fitted_to(grid);
}

} // namespace

template <typename T>
CorrectionNet<T>::CorrectionNet(const CorrectionConfig &cfg, const GridSpec &grid)
	: cfg_(cfg), grid_(grid), unet_(correction_unet(cfg, grid), "", grid.d()) {
	if (!(cfg.velocity_rms > 0.0)) throw std::invalid_argument("correction net needs velocity_rms > 0");
	cfg_.unet = unet_.config();
	unet_.init_params(params_, cfg.seed, cfg.head_scale);
}

template <typename T>
HeadVars<T> CorrectionNet<T>::forward(const Var<T> &rho0, const Var<T> &vel0, const Var<T> &rho_big,
	const Var<T> &vel_big) const {
	const int d = grid_.d();
	const nn::Shape expect = nn::shape_for(grid_, 1, rho0->shape().n);
	auto check = [&](const Var<T> &v, int channels, const char *what) {
		if (!(v->shape() == expect.with_channels(channels))) {
			throw GridMismatch(std::string("correction input ") + what + " has shape " + v->shape().to_string() +
				", expected " + expect.with_channels(channels).to_string());
		}
	};
	check(rho0, 1, "rho0");
	check(vel0, d, "vel0");
	check(rho_big, 1, "rho_big");
	check(vel_big, d, "vel_big");

	const T inv = static_cast<T>(1.0 / cfg_.velocity_rms);
	auto input = nn::concat_channels<T>({rho0, nn::scale(vel0, inv), rho_big, nn::scale(vel_big, inv)});
	auto out = unet_.forward(params_, input);

	HeadVars<T> h;
	h.v_hat = nn::add(vel_big, nn::scale(nn::slice_channels(out, 0, d), static_cast<T>(cfg_.velocity_rms)));
	h.flow = nn::slice_channels(out, d, d);
	h.rho_tilde = nn::slice_channels(out, 2 * d, 1);
	h.alpha = nn::sigmoid(nn::slice_channels(out, 2 * d + 1, 1));
	return h;
}

template <typename T>
Var<T> CorrectionNet<T>::fuse(const Var<T> &rho_big, const HeadVars<T> &heads) const {
	return nn::add(nn::warp(rho_big, heads.flow), nn::mul(heads.alpha, heads.rho_tilde));
}

template <typename T>
void CorrectionNet<T>::save(const std::filesystem::path &dir, const nlohmann::json &extra) const {
	nlohmann::json meta = extra.is_object() ? extra : nlohmann::json::object();
	meta["model"] = "correction";
	meta["config"] = cfg_.to_json();
	meta["grid"] = grid_.dims();
	meta["velocity_rms"] = cfg_.velocity_rms;
	nn::save_checkpoint(params_, meta, dir);
}

template <typename T>
CorrectionNet<T> CorrectionNet<T>::load(const std::filesystem::path &dir) {
	const auto meta = nn::read_checkpoint_metadata(dir);
	if (meta.value("model", "") != "correction") throw nn::CheckpointError(dir.string() + " is not a correction checkpoint");
	CorrectionNet net(CorrectionConfig::from_json(meta.at("config")), GridSpec(meta.at("grid").get<std::vector<int>>()));
	net.load_weights(dir);
	return net;
}

template <typename T>
nlohmann::json CorrectionNet<T>::load_weights(const std::filesystem::path &dir) {
	return nn::load_checkpoint(params_, dir);
}

template class CorrectionNet<float>;
template class CorrectionNet<double>;

CorrectionHeads predict_heads(const CorrectionNet<float> &net, const ScalarField &rho0, const VectorField &vel0,
	const ScalarField &rho_big, const VectorField &vel_big) {
	nn::NoGradGuard guard;
	auto h = net.forward(nn::constant(nn::to_tensor<float>(rho0)), nn::constant(nn::to_tensor<float>(vel0)),
		nn::constant(nn::to_tensor<float>(rho_big)), nn::constant(nn::to_tensor<float>(vel_big)));
	const GridSpec &g = rho0.spec();
	return {nn::to_vector_field(h.v_hat->value, g), nn::to_vector_field(h.flow->value, g),
		nn::to_scalar_field(h.rho_tilde->value, g), nn::to_scalar_field(h.alpha->value, g)};
}

ScalarField fuse_density(const ScalarField &rho_big, const FlowField &flow, const ScalarField &rho_tilde,
	const ScalarField &alpha) {
	require_same_grid(rho_big.spec(), rho_tilde.spec(), "fuse_density");
	require_same_grid(rho_big.spec(), alpha.spec(), "fuse_density");
	ScalarField out = warp(rho_big, flow);
	for (std::size_t i = 0; i < out.size(); ++i) out[i] += alpha[i] * rho_tilde[i];
	return out;
}

SimState correct(const SimState &state_big, const SimState &state_prev, const CorrectionNet<float> &net) {
	auto heads = predict_heads(net, state_prev.rho, state_prev.vel, state_big.rho, state_big.vel);
	SimState out;
	out.rho = fuse_density(state_big.rho, heads.flow, heads.rho_tilde, heads.alpha);
	for (auto &v : out.rho.values()) v = std::max(v, 0.0f);
	out.vel = std::move(heads.v_hat);
	out.frame_index = state_big.frame_index;
	return out;
}

} // namespace smokecorr
