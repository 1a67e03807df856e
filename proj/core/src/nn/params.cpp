#include "smokecorr/nn/params.hpp"

#include <fstream>

#include "smokecorr/field_io.hpp"

namespace smokecorr::nn {

namespace fs = std::filesystem;

template <typename T>
Var<T> ParamSet<T>::add(const std::string &name, Tensor<T> value) {
	if (index_.contains(name)) throw std::invalid_argument("duplicate parameter name " + name);
	index_.emplace(name, items_.size());
	items_.push_back({name, parameter(std::move(value))});
	return items_.back().var;
}

template <typename T>
const Var<T> &ParamSet<T>::get(const std::string &name) const {
	auto it = index_.find(name);
	if (it == index_.end()) throw std::out_of_range("unknown parameter " + name);
	return items_[it->second].var;
}

template <typename T>
std::size_t ParamSet<T>::value_count() const {
	std::size_t n = 0;
	for (const auto &p : items_) n += p.var->value.size();
	return n;
}

template <typename T>
void ParamSet<T>::zero_grad() {
	for (auto &p : items_) p.var->grad.clear();
}

template <typename T>
void ParamSet<T>::set_trainable(bool trainable) {
	for (auto &p : items_) p.var->requires_grad = trainable;
}

template <typename T>
ParamSet<T> ParamSet<T>::clone() const {
	ParamSet out;
	for (const auto &p : items_) {
		auto v = out.add(p.name, p.var->value);
		v->requires_grad = p.var->requires_grad;
	}
	return out;
}

namespace {

nlohmann::json read_manifest(const fs::path &dir) {
	const fs::path path = dir / "manifest.json";
	std::ifstream in(path);
	if (!in) throw CheckpointError("cannot open checkpoint manifest " + path.string());
	try {
		return nlohmann::json::parse(in);
	} catch (const nlohmann::json::exception &e) {
		throw CheckpointError("malformed checkpoint manifest " + path.string() + ": " + e.what());
	}
}

nlohmann::json shape_json(const Shape &s) {
	return {{"n", s.n}, {"c", s.c}, {"d", s.d}, {"h", s.h}, {"w", s.w}, {"rank", s.rank}};
}

} // namespace

template <typename T>
void save_checkpoint(const ParamSet<T> &params, const nlohmann::json &metadata, const fs::path &dir) {
	fs::create_directories(dir);
	nlohmann::json tensors = nlohmann::json::array();
	std::vector<float> flat;
	flat.reserve(params.value_count());
	for (const auto &p : params.items()) {
		tensors.push_back({{"name", p.name},
			{"shape", shape_json(p.var->value.shape)},
			{"offset", flat.size() * sizeof(float)},
			{"count", p.var->value.size()}});
		for (T v : p.var->value.data) flat.push_back(static_cast<float>(v));
	}
	write_f32(dir / "weights.f32", flat);
	nlohmann::json manifest{{"format", "smokecorr-checkpoint"}, {"version", 1}, {"tensors", tensors},
		{"metadata", metadata.is_null() ? nlohmann::json::object() : metadata}};
	std::ofstream out(dir / "manifest.json");
	out << manifest.dump(2) << '\n';
	if (!out) throw CheckpointError("failed to write " + (dir / "manifest.json").string());
}

template <typename T>
nlohmann::json load_checkpoint(ParamSet<T> &params, const fs::path &dir) {
	const nlohmann::json manifest = read_manifest(dir);
	const auto &tensors = manifest.at("tensors");
	if (tensors.size() != params.items().size()) {
		throw CheckpointError(dir.string() + ": checkpoint holds " + std::to_string(tensors.size()) +
			" tensors, model expects " + std::to_string(params.items().size()));
	}
	std::vector<float> flat;
	try {
		flat = read_f32(dir / "weights.f32");
	} catch (const std::exception &e) {
		throw CheckpointError(e.what());
	}
	for (const auto &entry : tensors) {
		const std::string name = entry.at("name");
		if (!params.contains(name)) throw CheckpointError(dir.string() + ": unexpected tensor " + name);
		auto &var = params.get(name);
		if (entry.at("shape") != shape_json(var->value.shape)) {
			throw CheckpointError(dir.string() + ": shape mismatch for " + name + ", stored " + entry.at("shape").dump() +
				", model " + var->value.shape.to_string());
		}
		const std::size_t offset = entry.at("offset").get<std::size_t>() / sizeof(float);
		const std::size_t count = entry.at("count");
		if (count != var->value.size() || offset + count > flat.size()) {
			throw CheckpointError(dir.string() + ": weights.f32 too short for " + name);
		}
		for (std::size_t i = 0; i < count; ++i) var->value.data[i] = static_cast<T>(flat[offset + i]);
	}
	return manifest.value("metadata", nlohmann::json::object());
}

nlohmann::json read_checkpoint_metadata(const fs::path &dir) {
	return read_manifest(dir).value("metadata", nlohmann::json::object());
}

template class ParamSet<float>;
template class ParamSet<double>;
template void save_checkpoint<float>(const ParamSet<float> &, const nlohmann::json &, const fs::path &);
template void save_checkpoint<double>(const ParamSet<double> &, const nlohmann::json &, const fs::path &);
template nlohmann::json load_checkpoint<float>(ParamSet<float> &, const fs::path &);
template nlohmann::json load_checkpoint<double>(ParamSet<double> &, const fs::path &);

} // namespace smokecorr::nn
