#pragma once

/// \file
/// Optimization loops. Interpolation networks are trained first; the
/// correction network is then trained against the full objective with the
/// second-step interpolation model frozen.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smokecorr/correction_net.hpp"
#include "smokecorr/datagen.hpp"
#include "smokecorr/interpolation_net.hpp"
#include "smokecorr/losses.hpp"
#include "smokecorr/nn/adam.hpp"

namespace smokecorr {

class TrainingError : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

/// A loss became NaN or infinite.
class TrainingDivergence : public TrainingError {
public:
	using TrainingError::TrainingError;
};

struct TrainConfig {
	double lr = 1e-3;
	/// Samples per micro-batch.
	int batch = 8;
	int epochs = 30;
	/// Micro-batches per optimizer update.
	int accumulation = 1;
	std::uint64_t seed = 0;
	/// Only "cpu" is available.
	std::string device = "cpu";
	LossWeights weights;
	double val_fraction = 0.1;
	/// "random" or a directory with converted extractor weights.
	std::string extractor = "random";
	std::uint64_t extractor_seed = 7;

	void validate() const;
	nlohmann::json to_json() const;
	static TrainConfig from_json(const nlohmann::json &j, int d);
};

std::shared_ptr<const FeatureExtractor> make_extractor(const TrainConfig &cfg);

/// One pair held in memory as single-sample tensors.
struct TrainingPair {
	nn::Tensor<float> rho0, vel0, rho_big, vel_big, rho_gt, vel_gt;
	/// Ground-truth densities at j = 1..k-1 (index j - 1).
	std::vector<nn::Tensor<float>> intermediates;
	/// rho0 advected j small steps by the frozen vel0 (index j - 1).
	std::vector<nn::Tensor<float>> advected;
	int k = 0;
};

TrainingPair make_training_pair(const PairSample &p, double dt_small);
/// Every pair of the named simulations of a corpus.
std::vector<TrainingPair> load_training_pairs(const std::filesystem::path &corpus_root,
	const std::vector<std::string> &names);

/// Lazily computed perceptual target features of 2D pairs. The ground truth
/// never changes during training, so each target goes through the
/// extractor once.
class FeatureCache {
public:
	FeatureCache(const FeatureExtractor &phi, double velocity_rms) : phi_(&phi), rms_(velocity_rms) {}

	const nn::Tensor<float> &rho_gt(const TrainingPair &p);
	const nn::Tensor<float> &vel_gt(const TrainingPair &p);
	/// Features of intermediate j (1..k-1).
	const nn::Tensor<float> &intermediate(const TrainingPair &p, int j);
	std::size_t size() const { return entries_.size(); }

private:
	const nn::Tensor<float> &lookup(const TrainingPair &p, int slot, const nn::Tensor<float> &gt, FieldKind kind);

	const FeatureExtractor *phi_;
	double rms_;
	std::map<std::pair<const TrainingPair *, int>, nn::Tensor<float>> entries_;
};

struct EpochRecord {
	int epoch = 0;
	double train_loss = 0.0;
	double val_loss = 0.0;
	/// Mean of each unweighted term over the epoch's training samples.
	std::vector<std::pair<std::string, double>> terms;
};

struct TrainResult {
	std::vector<EpochRecord> history;
	int best_epoch = -1;
	double best_val_loss = 0.0;
	long long optimizer_steps = 0;
};

using EpochCallback = std::function<void(const EpochRecord &)>;

/// Number of optimizer updates one epoch of `samples` performs.
long long steps_per_epoch(std::size_t samples, const TrainConfig &cfg);

/// Index of the minimum validation loss (first on ties).
int best_epoch(const std::vector<EpochRecord> &history);

/// Writes the CSV training log.
void write_training_log(const std::filesystem::path &path, const std::vector<EpochRecord> &history);

/// Trains both interpolation parameter sets in place. When `out_dir` is set,
/// the best checkpoints and the log are written there. The returned models
/// hold the best-epoch parameters.
TrainResult train_interpolation(InterpolationModels &models, const std::vector<TrainingPair> &train,
	const std::vector<TrainingPair> &val, const TrainConfig &cfg, const FeatureExtractor &phi,
	const std::optional<std::filesystem::path> &out_dir = std::nullopt, const EpochCallback &on_epoch = {});

/// Trains the correction network in place. `interp` may be null, in which
/// case the interpolation weight must be 0.
TrainResult train_correction(CorrectionNet<float> &net, const InterpolationModels *interp,
	const std::vector<TrainingPair> &train, const std::vector<TrainingPair> &val, const TrainConfig &cfg,
	const FeatureExtractor &phi, const std::optional<std::filesystem::path> &out_dir = std::nullopt,
	const EpochCallback &on_epoch = {});

/// Mean total loss over `pairs` with seeded intermediate indices; no updates.
double validate_correction(const CorrectionNet<float> &net, const InterpolationModels *interp,
	const std::vector<TrainingPair> &pairs, const TrainConfig &cfg, const FeatureExtractor &phi,
	FeatureCache *cache = nullptr);
double validate_interpolation(const InterpolationModels &models, const std::vector<TrainingPair> &pairs,
	const TrainConfig &cfg, const FeatureExtractor &phi, FeatureCache *cache = nullptr);

/// Differentiable correction objective over a batch of pairs. `js[i]` is the
/// intermediate index used for the interpolation term of sample i. With a
/// cache, 2D float perceptual targets come from it.
template <typename T>
struct CorrectionLoss {
	nn::Var<T> total;
	LossTerms terms;
};

template <typename T>
CorrectionLoss<T> correction_objective(const CorrectionNet<T> &net, const InterpNet<T> *second,
	const std::vector<const TrainingPair *> &batch, const std::vector<int> &js, const LossWeights &w,
	const FeatureExtractor &phi, std::mt19937_64 &rng, FeatureCache *cache = nullptr);

} // namespace smokecorr
