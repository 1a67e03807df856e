#include "smokecorr/config.hpp"

#include <fstream>

namespace smokecorr {

nlohmann::json corpus_to_json(const CorpusConfig &c) {
	return {{"kind", scene_kind_name(c.scene)}, {"dims", c.dims}, {"num_steps", c.num_steps}, {"count", c.count},
		{"test_count", c.test_count}, {"val_fraction", c.val_fraction}, {"seed", c.seed}, {"dt_small", c.dt_small},
		{"dt_large", c.dt_large}, {"jobs", c.jobs}};
}

CorpusConfig corpus_from_json(const nlohmann::json &j) {
	CorpusConfig c;
	if (j.contains("kind")) c.scene = parse_scene_kind(j.at("kind").get<std::string>());
	c.dims = j.value("dims", c.dims);
	c.num_steps = j.value("num_steps", c.num_steps);
	c.count = j.value("count", c.count);
	c.test_count = j.value("test_count", c.test_count);
	c.val_fraction = j.value("val_fraction", c.val_fraction);
	c.seed = j.value("seed", c.seed);
	c.dt_small = j.value("dt_small", c.dt_small);
	c.dt_large = j.value("dt_large", c.dt_large);
	c.jobs = j.value("jobs", c.jobs);
	return c;
}

PipelineConfig::PipelineConfig() {
	train_interp.epochs = 20;
	train_correct.epochs = 30;
}

nlohmann::json PipelineConfig::to_json() const {
	return {{"scene", corpus_to_json(corpus)}, {"correction", correction.to_json()},
		{"interpolation", interpolation.to_json()}, {"train_interp", train_interp.to_json()},
		{"train_correct", train_correct.to_json()},
		{"rollout", {{"n", rollout.n}, {"switch_fraction", rollout.switch_fraction}}}};
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json &j) {
	if (!j.is_object()) throw ConfigError("config must be a JSON object");
	for (const auto &[key, value] : j.items()) {
		static const char *known[] = {"scene", "correction", "interpolation", "train_interp", "train_correct", "rollout"};
		if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
			throw ConfigError("unknown config section '" + key + "'");
		}
	}
	PipelineConfig c;
	try {
		if (j.contains("scene")) c.corpus = corpus_from_json(j.at("scene"));
		const int d = c.d();
		c.train_interp.weights = LossWeights::for_dim(d);
		c.train_correct.weights = LossWeights::for_dim(d);
		if (j.contains("correction")) c.correction = CorrectionConfig::from_json(j.at("correction"));
		if (j.contains("interpolation")) c.interpolation = InterpConfig::from_json(j.at("interpolation"));
		if (j.contains("train_interp")) {
			auto t = j.at("train_interp");
			if (!t.contains("epochs")) t["epochs"] = c.train_interp.epochs;
			c.train_interp = TrainConfig::from_json(t, d);
		}
		if (j.contains("train_correct")) {
			auto t = j.at("train_correct");
			if (!t.contains("epochs")) t["epochs"] = c.train_correct.epochs;
			c.train_correct = TrainConfig::from_json(t, d);
		}
		if (j.contains("rollout")) {
			c.rollout.n = j.at("rollout").value("n", c.rollout.n);
			c.rollout.switch_fraction = j.at("rollout").value("switch_fraction", c.rollout.switch_fraction);
		}
		GridSpec(c.corpus.dims).require_simulation_extent();
	} catch (const nlohmann::json::exception &e) {
		throw ConfigError(std::string("invalid config: ") + e.what());
	} catch (const std::invalid_argument &e) {
		throw ConfigError(std::string("invalid config: ") + e.what());
	}
	return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path &path) {
	std::ifstream in(path);
	if (!in) throw ConfigError("cannot open config " + path.string());
	nlohmann::json j;
	try {
		j = nlohmann::json::parse(in);
	} catch (const nlohmann::json::exception &e) {
		throw ConfigError("malformed config " + path.string() + ": " + e.what());
	}
	return from_json(j);
}

void PipelineConfig::save(const std::filesystem::path &path) const {
	if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
	std::ofstream out(path);
	out << to_json().dump(2) << '\n';
	if (!out) throw ConfigError("failed to write " + path.string());
}

} // namespace smokecorr
