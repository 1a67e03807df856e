#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>

#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "smokecorr/config.hpp"
#include "smokecorr/field_io.hpp"
#include "smokecorr/training.hpp"

using namespace smokecorr;
using namespace smokecorr::cli;

namespace {

/// Maps library exceptions onto exit codes.
int guarded(const std::function<int()> &body) {
	try {
		return body();
	} catch (const SolverDivergence &e) {
		std::cerr << "error: " << e.what() << '\n';
		return cli::divergence;
	} catch (const TrainingDivergence &e) {
		std::cerr << "error: " << e.what() << '\n';
		return cli::divergence;
	} catch (const ConfigError &e) {
		std::cerr << "error: " << e.what() << '\n';
		return bad_arguments;
	} catch (const DatasetError &e) {
		std::cerr << "error: " << e.what() << '\n';
		return missing_assets;
	} catch (const nn::CheckpointError &e) {
		std::cerr << "error: " << e.what() << '\n';
		return missing_assets;
	} catch (const FieldIoError &e) {
		std::cerr << "error: " << e.what() << '\n';
		return missing_assets;
	} catch (const std::filesystem::filesystem_error &e) {
		std::cerr << "error: " << e.what() << '\n';
		return missing_assets;
	} catch (const std::invalid_argument &e) {
		std::cerr << "error: " << e.what() << '\n';
		return bad_arguments;
	} catch (const nlohmann::json::exception &e) {
		std::cerr << "error: " << e.what() << '\n';
		return bad_arguments;
	} catch (const std::exception &e) {
		std::cerr << "error: " << e.what() << '\n';
		return 1;
	}
}

void add_train_options(CLI::App *cmd, TrainOptions &o) {
	cmd->add_option("--data", o.data, "corpus root")->required();
	cmd->add_option("--config", o.config, "pipeline config JSON");
	cmd->add_option("--out", o.out, "checkpoint directory")->required();
	cmd->add_option("--epochs", o.epochs);
	cmd->add_option("--lr", o.lr);
	cmd->add_option("--batch", o.batch);
	cmd->add_option("--seed", o.seed);
	cmd->add_option("--extractor", o.extractor, "\"random\" or a converted weight directory");
}

} // namespace

int main(int argc, char **argv) {
	CLI::App app{"smokecorr: large-step smoke simulation with learned correction and interpolation"};
	app.require_subcommand(1);

	GenDataOptions gen;
	auto *g = app.add_subcommand("gen-data", "simulate a training corpus");
	g->add_option("--config", gen.config, "pipeline config JSON");
	g->add_option("--scene", gen.scene, "plume2d, circle2d or inflow3d");
	g->add_option("--grid", gen.grid, "e.g. 64x64 or 32x32x32");
	g->add_option("--steps", gen.steps, "small steps per simulation");
	g->add_option("--count", gen.count, "number of simulations");
	g->add_option("--test-count", gen.test_count);
	g->add_option("--seed", gen.seed);
	g->add_option("--dt-small", gen.dt_small);
	g->add_option("--dt-large", gen.dt_large);
	g->add_option("--jobs", gen.jobs);
	g->add_option("--out", gen.out)->required();

	TrainOptions ti;
	auto *t1 = app.add_subcommand("train-interp", "train both interpolation networks");
	add_train_options(t1, ti);

	TrainOptions tc;
	auto *t2 = app.add_subcommand("train-correct", "train the correction network");
	add_train_options(t2, tc);
	t2->add_option("--interp", tc.interp, "interpolation checkpoint (needed unless the interp weight is 0)");

	RolloutOptions ro;
	auto *r = app.add_subcommand("rollout", "run the large-step pipeline from a simulation's first frame");
	r->add_option("--init", ro.init, "simulation archive providing frame 0 and the scene")->required();
	r->add_option("--correct-ckpt", ro.correct_ckpt);
	r->add_option("--interp-ckpt", ro.interp_ckpt);
	r->add_option("--config", ro.config);
	r->add_option("--n", ro.n, "last frame, a multiple of k");
	r->add_option("--out", ro.out)->required();
	r->add_flag("--baseline", ro.baseline, "skip the correction network");

	EvalOptions ev;
	auto *e = app.add_subcommand("eval", "compare rollouts against ground truth");
	e->add_option("--pred", ev.pred, "rollout directory (repeatable)")->required();
	e->add_option("--gt", ev.gt, "ground-truth simulation archive")->required();
	e->add_option("--out", ev.out)->required();
	e->add_option("--metrics", ev.metrics, "comma list of mse, ssim, perceptual");
	e->add_option("--extractor", ev.extractor);
	e->add_option("--extractor-seed", ev.extractor_seed);
	e->add_option("--correct-ckpt", ev.correct_ckpt, "also write table2.csv for this checkpoint");
	e->add_option("--data", ev.data, "corpus whose test split table2.csv uses");

	RenderOptions re;
	auto *p = app.add_subcommand("render", "write grayscale PNGs of density frames");
	p->add_option("--frames", re.frames, "archive directory")->required();
	p->add_option("--out", re.out)->required();
	p->add_option("--axis", re.axis, "projection axis for 3D (x, y or z)");

	try {
		app.parse(argc, argv);
	} catch (const CLI::ParseError &err) {
		const int code = app.exit(err);
		return code == 0 ? ok : bad_arguments;
	}

	if (*g) return guarded([&] { return gen_data(gen); });
	if (*t1) return guarded([&] { return train_interp(ti); });
	if (*t2) return guarded([&] { return train_correct(tc); });
	if (*r) return guarded([&] { return rollout(ro); });
	if (*e) return guarded([&] { return eval(ev); });
	if (*p) return guarded([&] { return render(re); });
	return bad_arguments;
}
