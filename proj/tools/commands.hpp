#pragma once

#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

namespace smokecorr::cli {

enum ExitCode { ok = 0, bad_arguments = 2, divergence = 3, missing_assets = 4 };

struct GenDataOptions {
	std::string config;
	std::optional<std::string> scene;
	std::optional<std::string> grid;
	std::optional<int> steps;
	std::optional<int> count;
	std::optional<int> test_count;
	std::optional<std::uint64_t> seed;
	std::optional<double> dt_small;
	std::optional<double> dt_large;
	std::optional<int> jobs;
	std::string out;
};

struct TrainOptions {
	std::string data;
	std::string config;
	std::string out;
	std::string interp;
	std::optional<int> epochs;
	std::optional<double> lr;
	std::optional<int> batch;
	std::optional<std::uint64_t> seed;
	std::optional<std::string> extractor;
};

struct RolloutOptions {
	std::string init;
	std::string correct_ckpt;
	std::string interp_ckpt;
	std::string config;
	std::optional<int> n;
	std::string out;
	bool baseline = false;
};

struct EvalOptions {
	std::vector<std::string> pred;
	std::string gt;
	std::string out;
	std::string metrics = "mse,ssim,perceptual";
	std::string extractor = "random";
	std::uint64_t extractor_seed = 7;
	std::string correct_ckpt;
	std::string data;
};

struct RenderOptions {
	std::string frames;
	std::string out;
	std::string axis = "z";
};

int gen_data(const GenDataOptions &o);
int train_interp(const TrainOptions &o);
int train_correct(const TrainOptions &o);
int rollout(const RolloutOptions &o);
int eval(const EvalOptions &o);
int render(const RenderOptions &o);

/// Parses "64x64", "64,64" or "32x32x32".
std::vector<int> parse_grid(const std::string &text);

} // namespace smokecorr::cli
