#pragma once

/// \file
/// Pipeline configuration file (JSON). Every section is optional; missing
/// keys keep their defaults. The schema is documented in README.md.

#include <filesystem>

#include <nlohmann/json.hpp>

#include "smokecorr/correction_net.hpp"
#include "smokecorr/datagen.hpp"
#include "smokecorr/interpolation_net.hpp"
#include "smokecorr/training.hpp"

namespace smokecorr {

class ConfigError : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

nlohmann::json corpus_to_json(const CorpusConfig &c);
CorpusConfig corpus_from_json(const nlohmann::json &j);

struct RolloutSettings {
	int n = 64;
	double switch_fraction = 0.5;
};

struct PipelineConfig {
	CorpusConfig corpus;
	CorrectionConfig correction;
	InterpConfig interpolation;
	TrainConfig train_interp;
	TrainConfig train_correct;
	RolloutSettings rollout;

	PipelineConfig();
	int d() const { return static_cast<int>(corpus.dims.size()); }

	nlohmann::json to_json() const;
	/// Throws ConfigError on unknown sections or invalid values.
	static PipelineConfig from_json(const nlohmann::json &j);
	static PipelineConfig load(const std::filesystem::path &path);
	void save(const std::filesystem::path &path) const;
};

} // namespace smokecorr
