#pragma once

/// \file
/// Simulation corpora on disk.
///
/// One directory per simulation holds `manifest.json`, the small-step states
/// `rho_XXXXX.f32` / `vel_XXXXX.f32` for frames 0..F and the cached
/// large-step results `big_rho_XXXXX.f32` / `big_vel_XXXXX.f32`, indexed by
/// their target frame k*n + k. A corpus root adds `splits.json`.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smokecorr/solver.hpp"

namespace smokecorr {

class DatasetError : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

struct ArchiveManifest {
	int schema_version = 1;
	std::string scene;
	std::uint64_t seed = 0;
	int d = 2;
	std::vector<int> dims;
	double dt_small = 0.5;
	double dt_large = 4.0;
	int num_steps = 0;
	double velocity_rms = 0.0;
	bool complete = false;

	int k() const;
	GridSpec grid() const { return GridSpec(dims); }
	/// Scene regenerated from (scene, dims, seed, time-steps).
	SceneConfig scene_config() const;

	nlohmann::json to_json() const;
	static ArchiveManifest from_json(const nlohmann::json &j);
};

std::string state_file(const char *prefix, int index);

class SimulationArchive {
public:
	/// Opens a complete archive; incomplete or malformed ones are errors.
	static SimulationArchive open(const std::filesystem::path &dir);

	const ArchiveManifest &manifest() const { return manifest_; }
	const std::filesystem::path &dir() const { return dir_; }
	GridSpec grid() const { return manifest_.grid(); }
	int num_states() const { return manifest_.num_steps + 1; }

	/// Small-step state 0..F.
	SimState read_state(int index) const;
	ScalarField read_density(int index) const;
	/// Cached large-step result whose target frame is `target_frame`.
	SimState read_big(int target_frame) const;
	bool has_big(int target_frame) const;

private:
	std::filesystem::path dir_;
	ArchiveManifest manifest_;
};

/// Writes (rho, vel) of frame `index` with the given file prefixes.
void write_state(const std::filesystem::path &dir, int index, const SimState &state, const char *rho_prefix = "rho",
	const char *vel_prefix = "vel");

/// Runs F small steps from the scene's initial state, caches one large step
/// from every frame k*n with k*n + k <= F, and marks the manifest complete.
SimulationArchive generate_simulation(const SceneConfig &scene, const std::filesystem::path &out);

/// Number of pairs an archive with F steps yields for ratio k.
int pair_count(int num_steps, int k);

struct PairSample {
	int n = 0;
	int k = 0;
	SimState start;
	SimState big;
	SimState gt;
	std::shared_ptr<const SimulationArchive> archive;

	/// Ground-truth density at frame k*n + j, read on demand.
	ScalarField intermediate(int j) const;
};

std::vector<PairSample> build_pairs(const std::shared_ptr<const SimulationArchive> &archive, int k);

struct Splits {
	std::vector<std::string> train;
	std::vector<std::string> val;
	std::vector<std::string> test;

	nlohmann::json to_json() const;
	static Splits from_json(const nlohmann::json &j);
	static Splits read(const std::filesystem::path &corpus_root);
	void write(const std::filesystem::path &corpus_root) const;
};

/// Seeded shuffle of `names` into test / validation / training lists.
/// `val_fraction` applies to the non-test simulations.
Splits make_splits(std::vector<std::string> names, int test_count, double val_fraction, std::uint64_t seed);

struct CorpusConfig {
	SceneKind scene = SceneKind::plume2d;
	std::vector<int> dims{64, 64};
	int num_steps = 64;
	int count = 40;
	int test_count = 5;
	double val_fraction = 0.1;
	std::uint64_t seed = 0;
	double dt_small = 0.5;
	double dt_large = 4.0;
	int jobs = 1;
};

/// Seed of simulation `index` in a corpus with base seed `seed`.
std::uint64_t simulation_seed(std::uint64_t seed, int index);
std::string simulation_name(int index);

/// Generates every simulation (in parallel across `jobs` threads) and the
/// split file. Returns the split.
Splits generate_corpus(const CorpusConfig &cfg, const std::filesystem::path &root);

struct DatasetStats {
	int train_simulations = 0;
	int val_simulations = 0;
	int test_simulations = 0;
	int train_pairs = 0;
	int val_pairs = 0;
	int test_pairs = 0;
	/// Pooled over the training simulations.
	double velocity_rms = 0.0;

	nlohmann::json to_json() const;
};

DatasetStats dataset_stats(const std::filesystem::path &corpus_root);

/// Opens every archive of one split.
std::vector<std::shared_ptr<const SimulationArchive>> open_split(const std::filesystem::path &corpus_root,
	const std::vector<std::string> &names);

} // namespace smokecorr
