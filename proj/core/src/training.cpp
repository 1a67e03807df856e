#include "smokecorr/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <type_traits>

namespace smokecorr {

namespace fs = std::filesystem;
using nn::Var;

void TrainConfig::validate() const {
	if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be > 0");
	if (batch < 1) throw std::invalid_argument("batch must be >= 1");
	if (accumulation < 1) throw std::invalid_argument("accumulation must be >= 1");
	if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
	if (device != "cpu") throw std::invalid_argument("device '" + device + "' is not available (only cpu)");
	if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw std::invalid_argument("val_fraction must be in [0, 1)");
	weights.validate();
}

nlohmann::json TrainConfig::to_json() const {
	return {{"lr", lr}, {"batch", batch}, {"epochs", epochs}, {"accumulation", accumulation}, {"seed", seed},
		{"device", device}, {"weights", weights.to_json()}, {"val_fraction", val_fraction}, {"extractor", extractor},
		{"extractor_seed", extractor_seed}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json &j, int d) {
	TrainConfig c;
	c.weights = LossWeights::for_dim(d);
	c.lr = j.value("lr", c.lr);
	c.batch = j.value("batch", c.batch);
	c.epochs = j.value("epochs", c.epochs);
	c.accumulation = j.value("accumulation", c.accumulation);
	c.seed = j.value("seed", c.seed);
	c.device = j.value("device", c.device);
	if (j.contains("weights")) c.weights = LossWeights::from_json(j.at("weights"), d);
	c.val_fraction = j.value("val_fraction", c.val_fraction);
	c.extractor = j.value("extractor", c.extractor);
	c.extractor_seed = j.value("extractor_seed", c.extractor_seed);
	c.validate();
	return c;
}

std::shared_ptr<const FeatureExtractor> make_extractor(const TrainConfig &cfg) {
	if (cfg.extractor == "random") return Vgg16Features::random(cfg.extractor_seed);
	return Vgg16Features::load(cfg.extractor);
}

TrainingPair make_training_pair(const PairSample &p, double dt_small) {
	TrainingPair t;
	t.k = p.k;
	t.rho0 = nn::to_tensor<float>(p.start.rho);
	t.vel0 = nn::to_tensor<float>(p.start.vel);
	t.rho_big = nn::to_tensor<float>(p.big.rho);
	t.vel_big = nn::to_tensor<float>(p.big.vel);
	t.rho_gt = nn::to_tensor<float>(p.gt.rho);
	t.vel_gt = nn::to_tensor<float>(p.gt.vel);
	ScalarField adv = p.start.rho;
	for (int j = 1; j < p.k; ++j) {
		t.intermediates.push_back(nn::to_tensor<float>(p.intermediate(j)));
		adv = advect(adv, p.start.vel, dt_small);
		t.advected.push_back(nn::to_tensor<float>(adv));
	}
	return t;
}

std::vector<TrainingPair> load_training_pairs(const fs::path &corpus_root, const std::vector<std::string> &names) {
	std::vector<TrainingPair> out;
	for (const auto &a : open_split(corpus_root, names)) {
		for (const auto &p : build_pairs(a, a->manifest().k())) out.push_back(make_training_pair(p, a->manifest().dt_small));
	}
	return out;
}

const nn::Tensor<float> &FeatureCache::lookup(const TrainingPair &p, int slot, const nn::Tensor<float> &gt,
	FieldKind kind) {
	auto key = std::make_pair(&p, slot);
	auto it = entries_.find(key);
	if (it == entries_.end()) it = entries_.emplace(key, target_features(nn::constant(gt), kind, rms_, *phi_)).first;
	return it->second;
}

const nn::Tensor<float> &FeatureCache::rho_gt(const TrainingPair &p) {
	return lookup(p, -1, p.rho_gt, FieldKind::density);
}

const nn::Tensor<float> &FeatureCache::vel_gt(const TrainingPair &p) {
	return lookup(p, -2, p.vel_gt, FieldKind::velocity);
}

const nn::Tensor<float> &FeatureCache::intermediate(const TrainingPair &p, int j) {
	if (j < 1 || j >= p.k) throw std::out_of_range("intermediate index out of range");
	// Intermediate densities map to the image with a unit rms that is never used.
	return lookup(p, j, p.intermediates[static_cast<std::size_t>(j - 1)], FieldKind::density);
}

long long steps_per_epoch(std::size_t samples, const TrainConfig &cfg) {
	const long long micro = (static_cast<long long>(samples) + cfg.batch - 1) / cfg.batch;
	return (micro + cfg.accumulation - 1) / cfg.accumulation;
}

int best_epoch(const std::vector<EpochRecord> &history) {
	if (history.empty()) return -1;
	std::size_t best = 0;
	for (std::size_t i = 1; i < history.size(); ++i)
		if (history[i].val_loss < history[best].val_loss) best = i;
	return history[best].epoch;
}

void write_training_log(const fs::path &path, const std::vector<EpochRecord> &history) {
	std::ofstream out(path);
	out << "epoch,train_loss,val_loss";
	if (!history.empty())
		for (const auto &[name, v] : history.front().terms) out << ',' << name;
	out << '\n';
	out.precision(9);
	for (const auto &r : history) {
		out << r.epoch << ',' << r.train_loss << ',' << r.val_loss;
		for (const auto &[name, v] : r.terms) out << ',' << v;
		out << '\n';
	}
	if (!out) throw TrainingError("failed to write " + path.string());
}

namespace {

template <typename T, typename Get>
Var<T> stack(const std::vector<const TrainingPair *> &batch, Get get) {
	std::vector<nn::Tensor<T>> items;
	items.reserve(batch.size());
	for (const auto *p : batch) {
		const nn::Tensor<float> &src = get(*p);
		nn::Tensor<T> t(src.shape);
		std::copy(src.data.begin(), src.data.end(), t.data.begin());
		items.push_back(std::move(t));
	}
	return nn::constant(nn::stack_batch(items));
}

template <typename Get>
Var<float> stack_features(const std::vector<const TrainingPair *> &batch, Get get) {
	std::vector<nn::Tensor<float>> items;
	items.reserve(batch.size());
	for (std::size_t i = 0; i < batch.size(); ++i) items.push_back(get(i));
	return nn::constant(nn::stack_batch(items));
}

/// Accumulates weighted terms into one scalar graph.
template <typename T>
struct Sum {
	Var<T> total;
	void add(const Var<T> &term, double w) {
		if (w == 0.0) return;
		auto s = nn::scale(term, static_cast<T>(w));
		total = total ? nn::add(total, s) : s;
	}
};

/// Micro-batches of one epoch as index lists over a permutation.
std::vector<std::vector<std::size_t>> micro_batches(std::size_t n, int batch, std::mt19937_64 *rng) {
	std::vector<std::size_t> order(n);
	std::iota(order.begin(), order.end(), 0);
	if (rng) std::shuffle(order.begin(), order.end(), *rng);
	std::vector<std::vector<std::size_t>> out;
	for (std::size_t i = 0; i < n; i += static_cast<std::size_t>(batch)) {
		out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
			order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + static_cast<std::size_t>(batch))));
	}
	return out;
}

/// Intermediate index j of every validation sample, fixed by the seed.
std::vector<int> validation_js(const std::vector<TrainingPair> &pairs, std::uint64_t seed) {
	std::mt19937_64 rng(seed ^ 0x7a11d47eull);
	std::vector<int> js;
	for (const auto &p : pairs) js.push_back(std::uniform_int_distribution<int>(1, p.k - 1)(rng));
	return js;
}

void check_finite(double v, int epoch, long long step) {
	if (!std::isfinite(v)) {
		throw TrainingDivergence("non-finite loss at epoch " + std::to_string(epoch) + ", step " + std::to_string(step));
	}
}

template <typename T>
struct InterpLoss {
	Var<T> total;
	double l1_first = 0, l1_second = 0, p_first = 0, p_second = 0;
};

/// Density objective for one interpolation network's synthesized frames.
template <typename T>
void add_interp_terms(Sum<T> &sum, const Var<T> &out, const Var<T> &gt, const Var<T> &gt_features, const Var<T> &base,
	const LossWeights &w, const FeatureExtractor &phi, std::mt19937_64 &rng, double &l1, double &p) {
	auto rec = l1_reconstruction(out, gt);
	sum.add(rec, w.rrho);
	sum.add(temporal_coherence_loss(base, out, gt), w.trho);
	l1 = nn::scalar_value(rec);
	if (w.p != 0.0) {
		auto perc = gt_features ? perceptual_against(out, gt_features, FieldKind::density, 1.0, phi)
								: perceptual_loss(out, gt, FieldKind::density, 1.0, phi, rng);
		sum.add(perc, w.p);
		p = nn::scalar_value(perc);
	}
}

InterpLoss<float> interpolation_objective(const InterpolationModels &m, const std::vector<const TrainingPair *> &batch,
	const std::vector<int> &js, const LossWeights &w, const FeatureExtractor &phi, std::mt19937_64 &rng,
	FeatureCache *cache) {
	std::vector<float> t;
	std::vector<nn::Tensor<float>> gt, adv;
	for (std::size_t i = 0; i < batch.size(); ++i) {
		const int j = js[i];
		t.push_back(static_cast<float>(j) / static_cast<float>(batch[i]->k));
		gt.push_back(batch[i]->intermediates[static_cast<std::size_t>(j - 1)]);
		adv.push_back(batch[i]->advected[static_cast<std::size_t>(j - 1)]);
	}
	auto rho_a = stack<float>(batch, [](const TrainingPair &p) -> const nn::Tensor<float> & { return p.rho0; });
	auto rho_b = stack<float>(batch, [](const TrainingPair &p) -> const nn::Tensor<float> & { return p.rho_gt; });
	auto target = nn::constant(nn::stack_batch(gt));
	auto advected = nn::constant(nn::stack_batch(adv));
	Var<float> features;
	if (cache && w.p != 0.0 && m.grid.d() == 2) {
		features = stack_features(batch, [&](std::size_t i) { return cache->intermediate(*batch[i], js[i]); });
	}

	InterpLoss<float> out;
	Sum<float> sum;
	add_interp_terms(sum, m.first.synthesize(rho_a, rho_b, t), target, features, rho_a, w, phi, rng, out.l1_first,
		out.p_first);
	add_interp_terms(sum, m.second.synthesize(advected, rho_b, t), target, features, rho_a, w, phi, rng,
		out.l1_second, out.p_second);
	out.total = sum.total;
	return out;
}

/// Shared epoch loop: `objective(batch, js, rng)` returns (loss graph, terms).
template <typename Params, typename Objective, typename Validate, typename Save>
TrainResult run_training(std::vector<Params *> params, const std::vector<TrainingPair> &train, const TrainConfig &cfg,
	Objective objective, Validate validate, Save save, const EpochCallback &on_epoch) {
	cfg.validate();
	if (train.empty()) throw TrainingError("training split is empty");
	std::vector<nn::Adam<float>> opts;
	nn::AdamConfig ac;
	ac.lr = cfg.lr;
	for (auto *p : params) opts.emplace_back(*p, ac);

	std::mt19937_64 rng(cfg.seed);
	TrainResult result;
	std::vector<nn::ParamSet<float>> best;
	long long step = 0;
	for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
		auto batches = micro_batches(train.size(), cfg.batch, &rng);
		double loss_sum = 0.0;
		std::vector<std::pair<std::string, double>> term_sums;
		std::size_t seen = 0;
		for (std::size_t b0 = 0; b0 < batches.size(); b0 += static_cast<std::size_t>(cfg.accumulation)) {
			const std::size_t b1 = std::min(batches.size(), b0 + static_cast<std::size_t>(cfg.accumulation));
			std::size_t group = 0;
			for (std::size_t b = b0; b < b1; ++b) group += batches[b].size();
			for (std::size_t b = b0; b < b1; ++b) {
				std::vector<const TrainingPair *> batch;
				std::vector<int> js;
				for (std::size_t i : batches[b]) {
					batch.push_back(&train[i]);
					js.push_back(std::uniform_int_distribution<int>(1, train[i].k - 1)(rng));
				}
				auto [loss, terms] = objective(batch, js, rng);
				const double value = nn::scalar_value(loss);
				check_finite(value, epoch, step);
				// Mean over the whole accumulation group.
				const float share = static_cast<float>(batches[b].size()) / static_cast<float>(group);
				nn::backward(nn::scale(loss, share));
				loss_sum += value * static_cast<double>(batch.size());
				if (term_sums.empty()) {
					term_sums = terms;
					for (auto &t : term_sums) t.second = 0.0;
				}
				for (std::size_t t = 0; t < terms.size(); ++t) {
					term_sums[t].second += terms[t].second * static_cast<double>(batch.size());
				}
				seen += batch.size();
			}
			for (auto &o : opts) o.step();
			++step;
		}
		EpochRecord rec;
		rec.epoch = epoch;
		rec.train_loss = loss_sum / static_cast<double>(seen);
		rec.val_loss = validate();
		check_finite(rec.val_loss, epoch, step);
		for (auto &t : term_sums) t.second /= static_cast<double>(seen);
		rec.terms = term_sums;
		result.history.push_back(rec);
		if (best.empty() || rec.val_loss < result.best_val_loss) {
			result.best_val_loss = rec.val_loss;
			result.best_epoch = epoch;
			best.clear();
			for (auto *p : params) best.push_back(p->clone());
			save(rec);
		}
		if (on_epoch) on_epoch(rec);
	}
	result.optimizer_steps = step;
	// Restore the best epoch's parameters.
	for (std::size_t i = 0; i < best.size(); ++i) {
		const auto &src = best[i].items();
		const auto &dst = params[i]->items();
		for (std::size_t k = 0; k < src.size(); ++k) dst[k].var->value = src[k].var->value;
	}
	return result;
}

} // namespace

template <typename T>
CorrectionLoss<T> correction_objective(const CorrectionNet<T> &net, const InterpNet<T> *second,
	const std::vector<const TrainingPair *> &batch, const std::vector<int> &js, const LossWeights &w,
	const FeatureExtractor &phi, std::mt19937_64 &rng, FeatureCache *cache) {
	using G = const nn::Tensor<float> &;
	auto rho0 = stack<T>(batch, [](const TrainingPair &p) -> G { return p.rho0; });
	auto vel0 = stack<T>(batch, [](const TrainingPair &p) -> G { return p.vel0; });
	auto rho_big = stack<T>(batch, [](const TrainingPair &p) -> G { return p.rho_big; });
	auto vel_big = stack<T>(batch, [](const TrainingPair &p) -> G { return p.vel_big; });
	auto rho_gt = stack<T>(batch, [](const TrainingPair &p) -> G { return p.rho_gt; });
	auto vel_gt = stack<T>(batch, [](const TrainingPair &p) -> G { return p.vel_gt; });

	auto heads = net.forward(rho0, vel0, rho_big, vel_big);
	auto rho_hat = net.fuse(rho_big, heads);
	const double rms = net.config().velocity_rms;

	CorrectionLoss<T> out;
	Sum<T> sum;
	auto term = [&](const Var<T> &v, double weight, double &slot) {
		slot = static_cast<double>(nn::scalar_value(v));
		sum.add(v, weight);
	};
	term(l1_reconstruction(heads.v_hat, vel_gt), w.rv, out.terms.rv);
	term(gradient_loss(heads.v_hat, vel_gt), w.g, out.terms.g);
	term(temporal_coherence_loss(vel0, heads.v_hat, vel_gt), w.tv, out.terms.tv);
	term(l1_reconstruction(rho_hat, rho_gt), w.rrho, out.terms.rrho);
	term(temporal_coherence_loss(rho0, rho_hat, rho_gt), w.trho, out.terms.trho);
	if (w.p != 0.0 && cache && std::is_same_v<T, float> && net.grid().d() == 2) {
		if constexpr (std::is_same_v<T, float>) {
			auto fv = stack_features(batch, [&](std::size_t i) { return cache->vel_gt(*batch[i]); });
			auto fr = stack_features(batch, [&](std::size_t i) { return cache->rho_gt(*batch[i]); });
			term(perceptual_against(heads.v_hat, fv, FieldKind::velocity, rms, phi), w.p, out.terms.pv);
			term(perceptual_against(rho_hat, fr, FieldKind::density, rms, phi), w.p, out.terms.prho);
		}
	} else if (w.p != 0.0) {
		term(perceptual_loss(heads.v_hat, vel_gt, FieldKind::velocity, rms, phi, rng), w.p, out.terms.pv);
		term(perceptual_loss(rho_hat, rho_gt, FieldKind::density, rms, phi, rng), w.p, out.terms.prho);
	}
	if (w.interp != 0.0) {
		if (!second) throw TrainingError("interpolation term requested without an interpolation model");
		std::vector<T> t;
		std::vector<nn::Tensor<T>> adv, gt;
		for (std::size_t i = 0; i < batch.size(); ++i) {
			const auto j = static_cast<std::size_t>(js[i]);
			t.push_back(static_cast<T>(js[i]) / static_cast<T>(batch[i]->k));
			const auto &a = batch[i]->advected[j - 1];
			const auto &g = batch[i]->intermediates[j - 1];
			adv.emplace_back(a.shape, std::vector<T>(a.data.begin(), a.data.end()));
			gt.emplace_back(g.shape, std::vector<T>(g.data.begin(), g.data.end()));
		}
		auto synth = second->synthesize(nn::constant(nn::stack_batch(adv)), rho_hat, t);
		term(l1_reconstruction(synth, nn::constant(nn::stack_batch(gt))), w.interp, out.terms.interp);
	}
	out.total = sum.total ? sum.total : nn::constant(nn::Tensor<T>(nn::Shape{}));
	return out;
}

template CorrectionLoss<float> correction_objective<float>(const CorrectionNet<float> &, const InterpNet<float> *,
	const std::vector<const TrainingPair *> &, const std::vector<int> &, const LossWeights &, const FeatureExtractor &,
	std::mt19937_64 &, FeatureCache *);
template CorrectionLoss<double> correction_objective<double>(const CorrectionNet<double> &, const InterpNet<double> *,
	const std::vector<const TrainingPair *> &, const std::vector<int> &, const LossWeights &, const FeatureExtractor &,
	std::mt19937_64 &, FeatureCache *);

namespace {

std::vector<std::pair<std::string, double>> term_list(const LossTerms &t) {
	return {{"rv", t.rv}, {"g", t.g}, {"pv", t.pv}, {"tv", t.tv}, {"rrho", t.rrho}, {"interp", t.interp},
		{"prho", t.prho}, {"trho", t.trho}};
}

template <typename F>
double mean_over(const std::vector<TrainingPair> &pairs, int batch, F eval) {
	if (pairs.empty()) throw TrainingError("validation split is empty");
	double sum = 0.0;
	for (const auto &idx : micro_batches(pairs.size(), batch, nullptr)) sum += eval(idx) * static_cast<double>(idx.size());
	return sum / static_cast<double>(pairs.size());
}

} // namespace

double validate_correction(const CorrectionNet<float> &net, const InterpolationModels *interp,
	const std::vector<TrainingPair> &pairs, const TrainConfig &cfg, const FeatureExtractor &phi, FeatureCache *cache) {
	nn::NoGradGuard guard;
	const auto js = validation_js(pairs, cfg.seed);
	std::mt19937_64 rng(cfg.seed ^ 0xa11ce5ull);
	const InterpNet<float> *second = interp ? &interp->second : nullptr;
	return mean_over(pairs, cfg.batch, [&](const std::vector<std::size_t> &idx) {
		std::vector<const TrainingPair *> b;
		std::vector<int> bj;
		for (auto i : idx) {
			b.push_back(&pairs[i]);
			bj.push_back(js[i]);
		}
		return static_cast<double>(nn::scalar_value(correction_objective(net, second, b, bj, cfg.weights, phi, rng, cache).total));
	});
}

double validate_interpolation(const InterpolationModels &models, const std::vector<TrainingPair> &pairs,
	const TrainConfig &cfg, const FeatureExtractor &phi, FeatureCache *cache) {
	nn::NoGradGuard guard;
	const auto js = validation_js(pairs, cfg.seed);
	std::mt19937_64 rng(cfg.seed ^ 0xa11ce5ull);
	return mean_over(pairs, cfg.batch, [&](const std::vector<std::size_t> &idx) {
		std::vector<const TrainingPair *> b;
		std::vector<int> bj;
		for (auto i : idx) {
			b.push_back(&pairs[i]);
			bj.push_back(js[i]);
		}
		return static_cast<double>(nn::scalar_value(interpolation_objective(models, b, bj, cfg.weights, phi, rng, cache).total));
	});
}

TrainResult train_interpolation(InterpolationModels &models, const std::vector<TrainingPair> &train,
	const std::vector<TrainingPair> &val, const TrainConfig &cfg, const FeatureExtractor &phi,
	const std::optional<fs::path> &out_dir, const EpochCallback &on_epoch) {
	FeatureCache cache(phi, 1.0);
	auto objective = [&](const std::vector<const TrainingPair *> &batch, const std::vector<int> &js, std::mt19937_64 &rng) {
		auto l = interpolation_objective(models, batch, js, cfg.weights, phi, rng, &cache);
		std::vector<std::pair<std::string, double>> terms{{"first_l1", l.l1_first}, {"second_l1", l.l1_second},
			{"first_perceptual", l.p_first}, {"second_perceptual", l.p_second}};
		return std::make_pair(l.total, terms);
	};
	std::vector<EpochRecord> history;
	auto save = [&](const EpochRecord &rec) {
		if (out_dir) models.save(*out_dir, {{"epoch", rec.epoch}, {"val_loss", rec.val_loss}, {"train", cfg.to_json()}});
	};
	auto validate = [&] { return validate_interpolation(models, val.empty() ? train : val, cfg, phi, &cache); };
	TrainResult r = run_training(std::vector<nn::ParamSet<float> *>{&models.first.params(), &models.second.params()},
		train, cfg, objective, validate, save, [&](const EpochRecord &rec) {
			history.push_back(rec);
			if (out_dir) write_training_log(*out_dir / "train_log.csv", history);
			if (on_epoch) on_epoch(rec);
		});
	return r;
}

TrainResult train_correction(CorrectionNet<float> &net, const InterpolationModels *interp,
	const std::vector<TrainingPair> &train, const std::vector<TrainingPair> &val, const TrainConfig &cfg,
	const FeatureExtractor &phi, const std::optional<fs::path> &out_dir, const EpochCallback &on_epoch) {
	if (cfg.weights.interp != 0.0 && !interp) {
		throw TrainingError("interpolation weight is non-zero but no interpolation model was given");
	}
	// The interpolation model is read-only here.
	std::optional<InterpolationModels> frozen;
	if (interp && cfg.weights.interp != 0.0) {
		frozen.emplace(*interp);
		frozen->first.params() = interp->first.params().clone();
		frozen->second.params() = interp->second.params().clone();
		frozen->first.params().set_trainable(false);
		frozen->second.params().set_trainable(false);
	}
	const InterpolationModels *use = frozen ? &*frozen : nullptr;
	const InterpNet<float> *second = use ? &use->second : nullptr;
	FeatureCache cache(phi, net.config().velocity_rms);
	auto objective = [&](const std::vector<const TrainingPair *> &batch, const std::vector<int> &js, std::mt19937_64 &rng) {
		auto l = correction_objective(net, second, batch, js, cfg.weights, phi, rng, &cache);
		return std::make_pair(l.total, term_list(l.terms));
	};
	std::vector<EpochRecord> history;
	auto save = [&](const EpochRecord &rec) {
		if (out_dir) net.save(*out_dir, {{"epoch", rec.epoch}, {"val_loss", rec.val_loss}, {"train", cfg.to_json()}});
	};
	auto validate = [&] { return validate_correction(net, use, val.empty() ? train : val, cfg, phi, &cache); };
	return run_training(std::vector<nn::ParamSet<float> *>{&net.params()}, train, cfg, objective, validate, save,
		[&](const EpochRecord &rec) {
			history.push_back(rec);
			if (out_dir) write_training_log(*out_dir / "train_log.csv", history);
			if (on_epoch) on_epoch(rec);
		});
}

} // namespace smokecorr
