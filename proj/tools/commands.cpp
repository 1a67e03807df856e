#include "commands.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <sstream>

#include "smokecorr/config.hpp"
#include "smokecorr/metrics.hpp"
#include "smokecorr/render.hpp"
#include "smokecorr/rollout.hpp"

namespace smokecorr::cli {

namespace fs = std::filesystem;

namespace {

PipelineConfig load_config(const std::string &path) {
	if (path.empty()) return PipelineConfig{};
	if (!fs::exists(path)) throw ConfigError("config file not found: " + path);
	return PipelineConfig::load(path);
}

void write_json_file(const fs::path &path, const nlohmann::json &j) {
	std::ofstream out(path);
	out << j.dump(2) << '\n';
	if (!out) throw std::runtime_error("failed to write " + path.string());
}

std::vector<std::string> split_list(const std::string &text) {
	std::vector<std::string> out;
	std::stringstream in(text);
	for (std::string item; std::getline(in, item, ',');)
		if (!item.empty()) out.push_back(item);
	return out;
}

void apply(TrainConfig &t, const TrainOptions &o) {
	if (o.epochs) t.epochs = *o.epochs;
	if (o.lr) t.lr = *o.lr;
	if (o.batch) t.batch = *o.batch;
	if (o.seed) t.seed = *o.seed;
	if (o.extractor) t.extractor = *o.extractor;
	try {
		t.validate();
	} catch (const std::invalid_argument &e) {
		throw ConfigError(e.what());
	}
}

/// Grid of the corpus, read from its first training archive.
GridSpec corpus_grid(const fs::path &root, const Splits &splits) {
	if (splits.train.empty()) throw DatasetError("corpus has no training simulations: " + root.string());
	return SimulationArchive::open(root / splits.train.front()).grid();
}

EpochCallback print_epoch(const char *what) {
	return [what](const EpochRecord &r) {
		std::cout << what << " epoch " << r.epoch << " train " << r.train_loss << " val " << r.val_loss << std::endl;
	};
}

void require_dir(const std::string &path, const char *what) {
	if (!fs::is_directory(path)) throw DatasetError(std::string(what) + " not found: " + path);
}

} // namespace

std::vector<int> parse_grid(const std::string &text) {
	std::vector<int> dims;
	std::string token;
	auto flush = [&] {
		if (token.empty()) throw std::invalid_argument("malformed grid '" + text + "'");
		std::size_t used = 0;
		int v = 0;
		try {
			v = std::stoi(token, &used);
		} catch (const std::exception &) {
			used = 0;
		}
		if (used != token.size() || v <= 0) throw std::invalid_argument("malformed grid '" + text + "'");
		dims.push_back(v);
		token.clear();
	};
	for (char c : text) {
		if (c == 'x' || c == 'X' || c == ',') flush();
		else token += c;
	}
	flush();
	if (dims.size() != 2 && dims.size() != 3) throw std::invalid_argument("grid needs 2 or 3 extents: '" + text + "'");
	return dims;
}

int gen_data(const GenDataOptions &o) {
	PipelineConfig cfg = load_config(o.config);
	CorpusConfig &c = cfg.corpus;
	if (o.scene) c.scene = parse_scene_kind(*o.scene);
	if (o.grid) c.dims = parse_grid(*o.grid);
	if (o.steps) c.num_steps = *o.steps;
	if (o.count) c.count = *o.count;
	if (o.test_count) c.test_count = *o.test_count;
	if (o.seed) c.seed = *o.seed;
	if (o.dt_small) c.dt_small = *o.dt_small;
	if (o.dt_large) c.dt_large = *o.dt_large;
	if (o.jobs) c.jobs = *o.jobs;
	// Round-trip to validate the merged values.
	cfg = PipelineConfig::from_json(cfg.to_json());

	fs::create_directories(o.out);
	const Splits splits = generate_corpus(cfg.corpus, o.out);
	cfg.save(fs::path(o.out) / "config.json");
	std::cout << "wrote " << cfg.corpus.count << " simulations (" << splits.train.size() << " train, "
			  << splits.val.size() << " val, " << splits.test.size() << " test) to " << o.out << '\n';
	return ok;
}

int train_interp(const TrainOptions &o) {
	PipelineConfig cfg = load_config(o.config);
	apply(cfg.train_interp, o);
	require_dir(o.data, "corpus");
	const Splits splits = Splits::read(o.data);
	const GridSpec grid = corpus_grid(o.data, splits);

	auto train = load_training_pairs(o.data, splits.train);
	auto val = load_training_pairs(o.data, splits.val);
	auto phi = make_extractor(cfg.train_interp);
	InterpolationModels models(cfg.interpolation, grid);

	fs::create_directories(o.out);
	cfg.corpus.dims = grid.dims();
	cfg.save(fs::path(o.out) / "config.json");
	const TrainResult r = train_interpolation(models, train, val, cfg.train_interp, *phi, fs::path(o.out),
		print_epoch("interp"));
	std::cout << "best epoch " << r.best_epoch << " val " << r.best_val_loss << '\n';
	return ok;
}

int train_correct(const TrainOptions &o) {
	PipelineConfig cfg = load_config(o.config);
	apply(cfg.train_correct, o);
	require_dir(o.data, "corpus");
	const Splits splits = Splits::read(o.data);
	const GridSpec grid = corpus_grid(o.data, splits);

	std::unique_ptr<InterpolationModels> interp;
	if (!o.interp.empty()) {
		require_dir(o.interp, "interpolation checkpoint");
		interp = std::make_unique<InterpolationModels>(InterpolationModels::load(o.interp));
	} else if (cfg.train_correct.weights.interp != 0.0) {
		throw ConfigError("--interp is required while the interpolation loss weight is non-zero");
	}

	cfg.correction.velocity_rms = dataset_stats(o.data).velocity_rms;
	auto train = load_training_pairs(o.data, splits.train);
	auto val = load_training_pairs(o.data, splits.val);
	auto phi = make_extractor(cfg.train_correct);
	CorrectionNet<float> net(cfg.correction, grid);

	fs::create_directories(o.out);
	cfg.corpus.dims = grid.dims();
	cfg.save(fs::path(o.out) / "config.json");
	const TrainResult r = train_correction(net, interp.get(), train, val, cfg.train_correct, *phi, fs::path(o.out),
		print_epoch("correct"));
	std::cout << "best epoch " << r.best_epoch << " val " << r.best_val_loss << '\n';
	return ok;
}

int rollout(const RolloutOptions &o) {
	PipelineConfig cfg = load_config(o.config);
	require_dir(o.init, "initial archive");
	const SimulationArchive archive = SimulationArchive::open(o.init);

	RolloutConfig rc;
	rc.scene = archive.manifest().scene_config();
	rc.n = o.n ? *o.n : cfg.rollout.n;
	rc.switch_fraction = cfg.rollout.switch_fraction;
	try {
		rc.validate();
	} catch (const std::invalid_argument &e) {
		throw ConfigError(e.what());
	}

	std::unique_ptr<Interpolator> interp;
	if (!o.interp_ckpt.empty()) {
		require_dir(o.interp_ckpt, "interpolation checkpoint");
		interp = std::make_unique<NetworkInterpolator>(
			std::make_shared<const InterpolationModels>(InterpolationModels::load(o.interp_ckpt)));
	} else {
		interp = std::make_unique<CrossFadeInterpolator>();
	}

	const SimState initial = archive.read_state(0);
	RolloutResult result;
	if (o.baseline) {
		result = run_uncorrected(initial, rc, *interp);
	} else {
		if (o.correct_ckpt.empty()) throw ConfigError("--correct-ckpt is required unless --baseline is given");
		require_dir(o.correct_ckpt, "correction checkpoint");
		auto net = std::make_shared<const CorrectionNet<float>>(CorrectionNet<float>::load(o.correct_ckpt));
		result = run(initial, rc, NetworkCorrector(net), *interp);
	}
	write_rollout(o.out, initial, result, rc);
	write_json_file(fs::path(o.out) / "config.json",
		{{"rollout", rc.to_json()}, {"init", o.init}, {"correct_ckpt", o.correct_ckpt}, {"interp_ckpt", o.interp_ckpt},
			{"baseline", o.baseline}});
	std::cout << "wrote " << result.frames.size() << " frames to " << o.out << " in " << result.timings.total_s
			  << " s\n";
	return ok;
}

int eval(const EvalOptions &o) {
	const auto metrics = split_list(o.metrics);
	bool want_mse = false, want_ssim = false, want_perc = false;
	for (const auto &m : metrics) {
		if (m == "mse") want_mse = true;
		else if (m == "ssim") want_ssim = true;
		else if (m == "perceptual") want_perc = true;
		else throw ConfigError("unknown metric '" + m + "'");
	}
	require_dir(o.gt, "ground-truth archive");
	const SimulationArchive gt = SimulationArchive::open(o.gt);

	std::shared_ptr<const FeatureExtractor> phi;
	if (want_perc) {
		TrainConfig tc;
		tc.extractor = o.extractor;
		tc.extractor_seed = o.extractor_seed;
		phi = make_extractor(tc);
	}

	fs::create_directories(o.out);
	std::vector<NamedSeries> curves;
	std::vector<AblationRow> rows;
	const double nan = std::numeric_limits<double>::quiet_NaN();
	for (const auto &dir : o.pred) {
		require_dir(dir, "prediction archive");
		const SimulationArchive pred = SimulationArchive::open(dir);
		if (!(pred.grid() == gt.grid())) throw ConfigError("grid of " + dir + " differs from the ground truth");
		const int n = pred.manifest().num_steps;
		if (n > gt.manifest().num_steps) throw ConfigError(dir + " has more frames than the ground truth");

		std::vector<ScalarField> p, g;
		for (int i = 1; i <= n; ++i) {
			p.push_back(pred.read_density(i));
			g.push_back(gt.read_density(i));
		}
		AblationRow row;
		row.method = fs::path(dir).filename().string();
		if (row.method.empty()) row.method = fs::path(dir).parent_path().filename().string();
		row.mse = row.ssim = row.perceptual = nan;
		const auto curve = per_frame_curve(p, g);
		if (want_mse) {
			double s = 0.0;
			for (double v : curve) s += v;
			row.mse = n ? s / n : 0.0;
		}
		if (want_ssim && gt.grid().d() == 2) {
			double s = 0.0;
			for (int i = 0; i < n; ++i) s += ssim(p[static_cast<std::size_t>(i)], g[static_cast<std::size_t>(i)]);
			row.ssim = n ? s / n : 0.0;
		}
		if (want_perc) {
			double s = 0.0;
			for (int i = 0; i < n; ++i)
				s += perceptual_distance(p[static_cast<std::size_t>(i)], g[static_cast<std::size_t>(i)], *phi);
			row.perceptual = n ? s / n : 0.0;
		}
		curves.emplace_back(row.method, curve);
		rows.push_back(row);
	}
	write_curve_csv(fs::path(o.out) / "curve.csv", curves);
	write_ablation_csv(fs::path(o.out) / "ablation.csv", rows);

	if (!o.correct_ckpt.empty()) {
		if (o.data.empty()) throw ConfigError("--correct-ckpt needs --data for the test split");
		require_dir(o.correct_ckpt, "correction checkpoint");
		require_dir(o.data, "corpus");
		const auto net = CorrectionNet<float>::load(o.correct_ckpt);
		std::vector<PairSample> pairs;
		for (const auto &a : open_split(o.data, Splits::read(o.data).test))
			for (auto &s : build_pairs(a, a->manifest().k())) pairs.push_back(std::move(s));
		const CorrectionEffect effect = correction_effect(net, pairs);
		write_table2_csv(fs::path(o.out) / "table2.csv", effect);
		std::cout << "density reduction " << effect.density_reduction() << "%, velocity reduction "
				  << effect.velocity_reduction() << "%\n";
	}
	write_json_file(fs::path(o.out) / "config.json",
		{{"pred", o.pred}, {"gt", o.gt}, {"metrics", metrics}, {"extractor", o.extractor},
			{"extractor_seed", o.extractor_seed}, {"correct_ckpt", o.correct_ckpt}, {"data", o.data}});
	for (const auto &r : rows)
		std::cout << r.method << ": mse " << r.mse << " ssim " << r.ssim << " perceptual distance " << r.perceptual
				  << '\n';
	return ok;
}

int render(const RenderOptions &o) {
	require_dir(o.frames, "frame archive");
	const int count = render_archive(o.frames, o.out, parse_axis(o.axis));
	std::cout << "wrote " << count << " images to " << o.out << '\n';
	return ok;
}

} // namespace smokecorr::cli
