#include "smokecorr/interpolation_net.hpp"

#include <stdexcept>

namespace smokecorr {

using nn::Var;

void InterpConfig::validate() const {
	flow_unet.validate();
	refine_unet.validate();
	if (!(switch_fraction >= 0.0 && switch_fraction <= 1.0)) throw std::invalid_argument("switch_fraction must be in [0, 1]");
}

nlohmann::json InterpConfig::to_json() const {
	return {{"flow_unet", flow_unet.to_json()}, {"refine_unet", refine_unet.to_json()},
		{"switch_fraction", switch_fraction}, {"seed", seed}, {"head_scale", head_scale}};
}

InterpConfig InterpConfig::from_json(const nlohmann::json &j) {
	InterpConfig c;
	if (j.contains("flow_unet")) c.flow_unet = UNetConfig::from_json(j.at("flow_unet"));
	if (j.contains("refine_unet")) c.refine_unet = UNetConfig::from_json(j.at("refine_unet"));
	c.switch_fraction = j.value("switch_fraction", c.switch_fraction);
	c.seed = j.value("seed", c.seed);
	c.head_scale = j.value("head_scale", c.head_scale);
	c.validate();
	return c;
}

const char *interp_step_name(InterpStep step) { return step == InterpStep::first ? "first" : "second"; }

InterpStep choose_step(int frame_index, int n, double fraction) {
	return frame_index <= fraction * n ? InterpStep::second : InterpStep::first;
}

namespace {

UNetConfig with_io(UNetConfig u, int in, int out, const GridSpec &grid) {
	u.in_channels = in;
	u.out_channels = out;
	return u.fitted_to(grid);
}

} // namespace

template <typename T>
InterpNet<T>::InterpNet(const InterpConfig &cfg, const GridSpec &grid, std::uint64_t seed)
	: grid_(grid),
	  flow_(with_io(cfg.flow_unet, 2, 2 * grid.d(), grid), "flow.", grid.d()),
	  refine_(with_io(cfg.refine_unet, 2 + 2 * grid.d() + 2, grid.d() + 2, grid), "refine.", grid.d()) {
	flow_.init_params(params_, seed, cfg.head_scale);
	refine_.init_params(params_, seed + 1, cfg.head_scale);
}

template <typename T>
Var<T> InterpNet<T>::synthesize(const Var<T> &rho_a, const Var<T> &rho_b, const std::vector<T> &t) const {
	const int d = grid_.d();
	const nn::Shape expect = nn::shape_for(grid_, 1, rho_a->shape().n);
	if (!(rho_a->shape() == expect) || !(rho_b->shape() == expect)) {
		throw GridMismatch("interpolation endpoints must be " + expect.to_string());
	}
	if (static_cast<int>(t.size()) != expect.n) throw std::invalid_argument("one interpolation time per sample");
	for (T ti : t)
		if (!(ti > T(0) && ti < T(1))) throw std::invalid_argument("interpolation time must lie in (0, 1)");

	std::vector<T> c_aa(t.size()), c_ab(t.size()), c_ba(t.size()), c_bb(t.size()), w_a(t.size()), w_b(t.size());
	for (std::size_t i = 0; i < t.size(); ++i) {
		const T s = t[i];
		c_aa[i] = -(T(1) - s) * s;
		c_ab[i] = s * s;
		c_ba[i] = (T(1) - s) * (T(1) - s);
		c_bb[i] = -s * (T(1) - s);
		w_a[i] = T(1) - s;
		w_b[i] = s;
	}

	auto flows = flow_.forward(params_, nn::concat_channels<T>({rho_a, rho_b}));
	auto f_ab = nn::slice_channels(flows, 0, d);
	auto f_ba = nn::slice_channels(flows, d, d);
	auto f_ta = nn::add(nn::scale_per_sample(f_ab, c_aa), nn::scale_per_sample(f_ba, c_ab));
	auto f_tb = nn::add(nn::scale_per_sample(f_ab, c_ba), nn::scale_per_sample(f_ba, c_bb));

	auto refine_in =
		nn::concat_channels<T>({rho_a, rho_b, f_ta, f_tb, nn::warp(rho_a, f_ta), nn::warp(rho_b, f_tb)});
	auto refined = refine_.forward(params_, refine_in);
	auto delta = nn::slice_channels(refined, 0, d);
	auto logit_a = nn::slice_channels(refined, d, 1);
	auto logit_b = nn::slice_channels(refined, d + 1, 1);

	auto warped_a = nn::warp(rho_a, nn::add(f_ta, delta));
	auto warped_b = nn::warp(rho_b, nn::add(f_tb, delta));
	// Two-way softmax of the logits.
	auto vis_a = nn::sigmoid(nn::sub(logit_a, logit_b));
	auto vis_b = nn::add_scalar(nn::scale(vis_a, T(-1)), T(1));
	auto wa = nn::scale_per_sample(vis_a, w_a);
	auto wb = nn::scale_per_sample(vis_b, w_b);
	auto num = nn::add(nn::mul(wa, warped_a), nn::mul(wb, warped_b));
	return nn::div(num, nn::add(wa, wb));
}

template class InterpNet<float>;
template class InterpNet<double>;

InterpolationModels::InterpolationModels(const InterpConfig &cfg, const GridSpec &g)
	: config(cfg), grid(g), first(cfg, g, cfg.seed), second(cfg, g, cfg.seed + 100) {
	config.validate();
}

void InterpolationModels::save(const std::filesystem::path &dir, const nlohmann::json &extra) const {
	nlohmann::json meta = extra.is_object() ? extra : nlohmann::json::object();
	meta["config"] = config.to_json();
	meta["grid"] = grid.dims();
	meta["model"] = "interpolation-first";
	nn::save_checkpoint(first.params(), meta, dir / "first");
	meta["model"] = "interpolation-second";
	nn::save_checkpoint(second.params(), meta, dir / "second");
}

InterpolationModels InterpolationModels::load(const std::filesystem::path &dir) {
	const auto meta = nn::read_checkpoint_metadata(dir / "first");
	if (meta.value("model", "") != "interpolation-first") {
		throw nn::CheckpointError((dir / "first").string() + " is not an interpolation checkpoint");
	}
	InterpolationModels m(InterpConfig::from_json(meta.at("config")), GridSpec(meta.at("grid").get<std::vector<int>>()));
	nn::load_checkpoint(m.first.params(), dir / "first");
	nn::load_checkpoint(m.second.params(), dir / "second");
	return m;
}

ScalarField advect_frozen(const ScalarField &rho_a, const VectorField &vel_a, int j, double dt_small) {
	if (j < 0) throw std::invalid_argument("advect_frozen: negative step count");
	ScalarField out = rho_a;
	for (int i = 0; i < j; ++i) out = advect(out, vel_a, dt_small);
	return out;
}

ScalarField first_step_interpolate(const InterpNet<float> &net, const ScalarField &rho_a, const ScalarField &rho_b,
	double t) {
	require_same_grid(rho_a.spec(), rho_b.spec(), "interpolate");
	if (t < 0.0 || t > 1.0) throw std::invalid_argument("interpolation time must lie in [0, 1]");
	if (t == 0.0) return rho_a;
	if (t == 1.0) return rho_b;
	nn::NoGradGuard guard;
	auto out = net.synthesize(nn::constant(nn::to_tensor<float>(rho_a)), nn::constant(nn::to_tensor<float>(rho_b)),
		{static_cast<float>(t)});
	return nn::to_scalar_field(out->value, rho_a.spec());
}

ScalarField second_step_interpolate(const InterpNet<float> &net, const ScalarField &rho_a, const VectorField &vel_a,
	const ScalarField &rho_hat_b, int j, int k, double dt_small) {
	if (k < 2 || j < 1 || j > k - 1) {
		throw std::invalid_argument("second step needs 1 <= j <= k-1, got j=" + std::to_string(j) + ", k=" + std::to_string(k));
	}
	return first_step_interpolate(net, advect_frozen(rho_a, vel_a, j, dt_small), rho_hat_b,
		static_cast<double>(j) / k);
}

} // namespace smokecorr
