#pragma once

/// \file
/// Raw field files: 32-bit IEEE-754 little-endian values, scalar fields
/// row-major with x fastest, vector fields as d component planes.

#include <filesystem>
#include <stdexcept>
#include <vector>

#include "smokecorr/fields.hpp"

namespace smokecorr {

/// I/O failure; the message names the offending file.
class FieldIoError : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

void write_f32(const std::filesystem::path &path, std::span<const float> values);
/// Reads exactly `count` values; a file of any other length is an error.
std::vector<float> read_f32(const std::filesystem::path &path, std::size_t count);
/// Reads a whole file of float32 values.
std::vector<float> read_f32(const std::filesystem::path &path);

void write_field(const std::filesystem::path &path, const ScalarField &field);
void write_field(const std::filesystem::path &path, const VectorField &field);
ScalarField read_scalar_field(const std::filesystem::path &path, const GridSpec &spec);
VectorField read_vector_field(const std::filesystem::path &path, const GridSpec &spec);

} // namespace smokecorr
