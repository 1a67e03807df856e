#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "smokecorr/nn/autograd.hpp"

namespace smokecorr::nn {

/// Raised for unreadable, inconsistent or mismatched checkpoints.
class CheckpointError : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

template <typename T>
struct NamedParam {
	std::string name;
	Var<T> var;
};

/// Ordered collection of named trainable tensors.
template <typename T>
class ParamSet {
public:
	/// Registers a new trainable tensor; names must be unique.
	Var<T> add(const std::string &name, Tensor<T> value);
	const Var<T> &get(const std::string &name) const;
	bool contains(const std::string &name) const { return index_.contains(name); }

	const std::vector<NamedParam<T>> &items() const { return items_; }
	std::size_t value_count() const;
	void zero_grad();
	/// Stops (or resumes) gradient accumulation into every parameter.
	void set_trainable(bool trainable);

	/// Deep copy with independent storage.
	ParamSet clone() const;
	/// Values converted to another precision, names and order preserved.
	template <typename U>
	ParamSet<U> cast() const {
		ParamSet<U> out;
		for (const auto &p : items_) {
			Tensor<U> t(p.var->value.shape);
			for (std::size_t i = 0; i < t.size(); ++i) t.data[i] = static_cast<U>(p.var->value.data[i]);
			out.add(p.name, std::move(t));
		}
		return out;
	}

private:
	std::vector<NamedParam<T>> items_;
	std::unordered_map<std::string, std::size_t> index_;
};

/// Writes `dir/manifest.json` and `dir/weights.f32`.
template <typename T>
void save_checkpoint(const ParamSet<T> &params, const nlohmann::json &metadata, const std::filesystem::path &dir);

/// Loads values into an already-shaped ParamSet. Names and shapes must match
/// exactly. Returns the stored metadata.
template <typename T>
nlohmann::json load_checkpoint(ParamSet<T> &params, const std::filesystem::path &dir);

/// Metadata of a checkpoint without touching its weights.
nlohmann::json read_checkpoint_metadata(const std::filesystem::path &dir);

} // namespace smokecorr::nn
