#include "smokecorr/datagen.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <random>
#include <thread>

#include "smokecorr/field_io.hpp"

namespace smokecorr {

namespace fs = std::filesystem;

int ArchiveManifest::k() const { return static_cast<int>(std::lround(dt_large / dt_small)); }

SceneConfig ArchiveManifest::scene_config() const {
	return make_scene(parse_scene_kind(scene), grid(), seed, dt_small, dt_large, num_steps);
}

nlohmann::json ArchiveManifest::to_json() const {
	return {{"schema_version", schema_version}, {"scene", scene}, {"seed", seed}, {"d", d}, {"dims", dims},
		{"dt_small", dt_small}, {"dt_large", dt_large}, {"num_steps", num_steps}, {"velocity_rms", velocity_rms},
		{"complete", complete}};
}

ArchiveManifest ArchiveManifest::from_json(const nlohmann::json &j) {
	ArchiveManifest m;
	m.schema_version = j.at("schema_version");
	if (m.schema_version != 1) throw DatasetError("unsupported schema_version " + std::to_string(m.schema_version));
	m.scene = j.at("scene");
	m.seed = j.at("seed");
	m.d = j.at("d");
	m.dims = j.at("dims").get<std::vector<int>>();
	m.dt_small = j.at("dt_small");
	m.dt_large = j.at("dt_large");
	m.num_steps = j.at("num_steps");
	m.velocity_rms = j.at("velocity_rms");
	m.complete = j.at("complete");
	if (static_cast<int>(m.dims.size()) != m.d) throw DatasetError("manifest dims do not match d");
	return m;
}

std::string state_file(const char *prefix, int index) {
	char buf[64];
	std::snprintf(buf, sizeof buf, "%s_%05d.f32", prefix, index);
	return buf;
}

namespace {

void write_manifest(const fs::path &dir, const ArchiveManifest &m) {
	const fs::path tmp = dir / "manifest.json.tmp";
	{
		std::ofstream out(tmp);
		out << m.to_json().dump(2) << '\n';
		if (!out) throw DatasetError("failed to write " + tmp.string());
	}
	fs::rename(tmp, dir / "manifest.json");
}

nlohmann::json read_json(const fs::path &path) {
	std::ifstream in(path);
	if (!in) throw DatasetError("cannot open " + path.string());
	try {
		return nlohmann::json::parse(in);
	} catch (const nlohmann::json::exception &e) {
		throw DatasetError("malformed " + path.string() + ": " + e.what());
	}
}

void write_json(const fs::path &path, const nlohmann::json &j) {
	std::ofstream out(path);
	out << j.dump(2) << '\n';
	if (!out) throw DatasetError("failed to write " + path.string());
}

} // namespace

SimulationArchive SimulationArchive::open(const fs::path &dir) {
	SimulationArchive a;
	a.dir_ = dir;
	try {
		a.manifest_ = ArchiveManifest::from_json(read_json(dir / "manifest.json"));
	} catch (const nlohmann::json::exception &e) {
		throw DatasetError("bad manifest in " + dir.string() + ": " + e.what());
	}
	if (!a.manifest_.complete) throw DatasetError("archive " + dir.string() + " is incomplete");
	return a;
}

SimState SimulationArchive::read_state(int index) const {
	if (index < 0 || index > manifest_.num_steps) {
		throw DatasetError("state " + std::to_string(index) + " outside 0.." + std::to_string(manifest_.num_steps) +
			" in " + dir_.string());
	}
	const GridSpec g = grid();
	return {read_scalar_field(dir_ / state_file("rho", index), g), read_vector_field(dir_ / state_file("vel", index), g),
		index};
}

ScalarField SimulationArchive::read_density(int index) const {
	if (index < 0 || index > manifest_.num_steps) {
		throw DatasetError("state " + std::to_string(index) + " outside 0.." + std::to_string(manifest_.num_steps));
	}
	return read_scalar_field(dir_ / state_file("rho", index), grid());
}

bool SimulationArchive::has_big(int target_frame) const {
	return fs::exists(dir_ / state_file("big_rho", target_frame)) && fs::exists(dir_ / state_file("big_vel", target_frame));
}

SimState SimulationArchive::read_big(int target_frame) const {
	if (!has_big(target_frame)) {
		throw DatasetError("missing cached large-step result for target frame " + std::to_string(target_frame) +
			" (n = " + std::to_string((target_frame - manifest_.k()) / manifest_.k()) + ") in " + dir_.string());
	}
	const GridSpec g = grid();
	return {read_scalar_field(dir_ / state_file("big_rho", target_frame), g),
		read_vector_field(dir_ / state_file("big_vel", target_frame), g), target_frame};
}

void write_state(const fs::path &dir, int index, const SimState &state, const char *rho_prefix, const char *vel_prefix) {
	write_field(dir / state_file(rho_prefix, index), state.rho);
	write_field(dir / state_file(vel_prefix, index), state.vel);
}

int pair_count(int num_steps, int k) {
	if (k < 1) throw std::invalid_argument("k must be >= 1");
	return num_steps >= k ? (num_steps - k) / k + 1 : 0;
}

SimulationArchive generate_simulation(const SceneConfig &scene, const fs::path &out) {
	scene.validate();
	fs::create_directories(out);
	ArchiveManifest m;
	m.scene = scene_kind_name(scene.kind);
	m.seed = scene.seed;
	m.d = scene.grid.d();
	m.dims = scene.grid.dims();
	m.dt_small = scene.dt_small;
	m.dt_large = scene.dt_large;
	m.num_steps = scene.num_steps;
	write_manifest(out, m);

	const Solver solver(scene);
	const int k = scene.k();
	SimState state = solver.initial_state();
	double sum_sq = 0.0;
	std::size_t count = 0;
	for (int i = 0;; ++i) {
		write_state(out, i, state);
		for (float v : state.vel.values()) sum_sq += static_cast<double>(v) * v;
		count += state.vel.values().size();
		if (i % k == 0 && i + k <= scene.num_steps) {
			write_state(out, i + k, solver.step(state, scene.dt_large), "big_rho", "big_vel");
		}
		if (i == scene.num_steps) break;
		state = solver.step(state, scene.dt_small);
	}
	m.velocity_rms = std::sqrt(sum_sq / static_cast<double>(count));
	m.complete = true;
	write_manifest(out, m);
	return SimulationArchive::open(out);
}

ScalarField PairSample::intermediate(int j) const {
	if (j < 1 || j > k - 1) throw std::invalid_argument("intermediate index must be in 1..k-1");
	return archive->read_density(k * n + j);
}

std::vector<PairSample> build_pairs(const std::shared_ptr<const SimulationArchive> &archive, int k) {
	std::vector<PairSample> out;
	const int count = pair_count(archive->manifest().num_steps, k);
	for (int n = 0; n < count; ++n) {
		PairSample p;
		p.n = n;
		p.k = k;
		p.start = archive->read_state(k * n);
		p.big = archive->read_big(k * n + k);
		p.gt = archive->read_state(k * n + k);
		p.archive = archive;
		out.push_back(std::move(p));
	}
	return out;
}

nlohmann::json Splits::to_json() const { return {{"train", train}, {"val", val}, {"test", test}}; }

Splits Splits::from_json(const nlohmann::json &j) {
	Splits s;
	s.train = j.at("train").get<std::vector<std::string>>();
	s.val = j.value("val", std::vector<std::string>{});
	s.test = j.value("test", std::vector<std::string>{});
	return s;
}

Splits Splits::read(const fs::path &corpus_root) {
	try {
		return from_json(read_json(corpus_root / "splits.json"));
	} catch (const nlohmann::json::exception &e) {
		throw DatasetError("bad splits.json in " + corpus_root.string() + ": " + e.what());
	}
}

void Splits::write(const fs::path &corpus_root) const { write_json(corpus_root / "splits.json", to_json()); }

Splits make_splits(std::vector<std::string> names, int test_count, double val_fraction, std::uint64_t seed) {
	if (test_count < 0 || test_count > static_cast<int>(names.size())) throw std::invalid_argument("bad test count");
	if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw std::invalid_argument("val_fraction must be in [0, 1)");
	std::mt19937_64 rng(seed ^ 0x5eedf00dull);
	std::shuffle(names.begin(), names.end(), rng);
	Splits s;
	s.test.assign(names.begin(), names.begin() + test_count);
	const int rest = static_cast<int>(names.size()) - test_count;
	int val = static_cast<int>(std::lround(val_fraction * rest));
	if (val_fraction > 0.0 && rest >= 2) val = std::max(val, 1);
	s.val.assign(names.begin() + test_count, names.begin() + test_count + val);
	s.train.assign(names.begin() + test_count + val, names.end());
	std::sort(s.test.begin(), s.test.end());
	std::sort(s.val.begin(), s.val.end());
	std::sort(s.train.begin(), s.train.end());
	return s;
}

std::uint64_t simulation_seed(std::uint64_t seed, int index) {
	// splitmix64 of (seed, index)
	std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (static_cast<std::uint64_t>(index) + 1);
	z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
	z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
	return z ^ (z >> 31);
}

std::string simulation_name(int index) {
	char buf[32];
	std::snprintf(buf, sizeof buf, "sim_%05d", index);
	return buf;
}

Splits generate_corpus(const CorpusConfig &cfg, const fs::path &root) {
	if (cfg.count < 1) throw std::invalid_argument("corpus needs at least one simulation");
	fs::create_directories(root);
	std::vector<SceneConfig> scenes;
	for (int i = 0; i < cfg.count; ++i) {
		scenes.push_back(make_scene(cfg.scene, GridSpec(cfg.dims), simulation_seed(cfg.seed, i), cfg.dt_small,
			cfg.dt_large, cfg.num_steps));
	}
	std::atomic<int> next{0};
	std::exception_ptr failure;
	std::mutex failure_mutex;
	auto worker = [&] {
		for (int i = next++; i < cfg.count; i = next++) {
			try {
				generate_simulation(scenes[static_cast<std::size_t>(i)], root / simulation_name(i));
			} catch (...) {
				std::lock_guard lock(failure_mutex);
				if (!failure) failure = std::current_exception();
			}
		}
	};
	const int jobs = std::clamp(cfg.jobs, 1, cfg.count);
	std::vector<std::thread> pool;
	for (int t = 1; t < jobs; ++t) pool.emplace_back(worker);
	worker();
	for (auto &t : pool) t.join();
	if (failure) std::rethrow_exception(failure);

	std::vector<std::string> names;
	for (int i = 0; i < cfg.count; ++i) names.push_back(simulation_name(i));
	Splits s = make_splits(names, cfg.test_count, cfg.val_fraction, cfg.seed);
	s.write(root);
	return s;
}

nlohmann::json DatasetStats::to_json() const {
	return {{"simulations", {{"train", train_simulations}, {"val", val_simulations}, {"test", test_simulations}}},
		{"pairs", {{"train", train_pairs}, {"val", val_pairs}, {"test", test_pairs}}}, {"velocity_rms", velocity_rms}};
}

std::vector<std::shared_ptr<const SimulationArchive>> open_split(const fs::path &corpus_root,
	const std::vector<std::string> &names) {
	std::vector<std::shared_ptr<const SimulationArchive>> out;
	for (const auto &n : names) out.push_back(std::make_shared<const SimulationArchive>(SimulationArchive::open(corpus_root / n)));
	return out;
}

DatasetStats dataset_stats(const fs::path &corpus_root) {
	const Splits s = Splits::read(corpus_root);
	if (s.train.empty() && s.val.empty() && s.test.empty()) throw DatasetError("corpus " + corpus_root.string() + " is empty");
	DatasetStats st;
	auto count = [&](const std::vector<std::string> &names, int &sims, int &pairs, bool pool_rms, double &sum_ms) {
		for (const auto &n : names) {
			const auto a = SimulationArchive::open(corpus_root / n);
			++sims;
			pairs += pair_count(a.manifest().num_steps, a.manifest().k());
			if (pool_rms) sum_ms += a.manifest().velocity_rms * a.manifest().velocity_rms;
		}
	};
	double sum_ms = 0.0;
	count(s.train, st.train_simulations, st.train_pairs, true, sum_ms);
	count(s.val, st.val_simulations, st.val_pairs, false, sum_ms);
	count(s.test, st.test_simulations, st.test_pairs, false, sum_ms);
	if (st.train_simulations == 0) throw DatasetError("corpus " + corpus_root.string() + " has no training simulations");
	st.velocity_rms = std::sqrt(sum_ms / st.train_simulations);
	if (!(st.velocity_rms > 0.0)) {
		throw DatasetError("velocity RMS of " + corpus_root.string() + " is 0; cannot normalize network inputs");
	}
	return st;
}

} // namespace smokecorr
