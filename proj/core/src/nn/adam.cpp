#include "smokecorr/nn/adam.hpp"

#include <cmath>

namespace smokecorr::nn {

template <typename T>
Adam<T>::Adam(ParamSet<T> &params, AdamConfig cfg) : params_(&params), cfg_(cfg) {
	for (const auto &p : params.items()) {
		m_.emplace_back(p.var->value.size(), 0.0);
		v_.emplace_back(p.var->value.size(), 0.0);
	}
}

template <typename T>
void Adam<T>::step() {
	++t_;
	const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
	const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
	const auto &items = params_->items();
	for (std::size_t k = 0; k < items.size(); ++k) {
		auto &node = *items[k].var;
		if (node.grad.empty()) continue;
		auto &m = m_[k];
		auto &v = v_[k];
		for (std::size_t i = 0; i < m.size(); ++i) {
			const double g = node.grad[i];
			m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
			v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
			const double step = cfg_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.eps);
			node.value.data[i] = static_cast<T>(node.value.data[i] - step);
		}
	}
	params_->zero_grad();
}

template class Adam<float>;
template class Adam<double>;

} // namespace smokecorr::nn
