#include "smokecorr/field_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace smokecorr {

namespace {

static_assert(sizeof(float) == 4);

void to_little_endian(std::vector<char> &bytes) {
	if constexpr (std::endian::native == std::endian::big) {
		for (std::size_t i = 0; i + 3 < bytes.size(); i += 4) {
			std::swap(bytes[i], bytes[i + 3]);
			std::swap(bytes[i + 1], bytes[i + 2]);
		}
	}
}

} // namespace

void write_f32(const std::filesystem::path &path, std::span<const float> values) {
	std::vector<char> bytes(values.size() * 4);
	std::memcpy(bytes.data(), values.data(), bytes.size());
	to_little_endian(bytes);
	std::ofstream out(path, std::ios::binary | std::ios::trunc);
	if (!out) throw FieldIoError("cannot open " + path.string() + " for writing");
	out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
	if (!out) throw FieldIoError("write failed for " + path.string());
}

std::vector<float> read_f32(const std::filesystem::path &path) {
	std::ifstream in(path, std::ios::binary);
	if (!in) throw FieldIoError("cannot open " + path.string());
	std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
	if (bytes.size() % 4 != 0) {
		throw FieldIoError(path.string() + ": byte length " + std::to_string(bytes.size()) + " is not a multiple of 4");
	}
	to_little_endian(bytes);
	std::vector<float> values(bytes.size() / 4);
	std::memcpy(values.data(), bytes.data(), bytes.size());
	return values;
}

std::vector<float> read_f32(const std::filesystem::path &path, std::size_t count) {
	std::error_code ec;
	const auto size = std::filesystem::file_size(path, ec);
	if (ec) throw FieldIoError("cannot open " + path.string());
	if (size != count * 4) {
		throw FieldIoError(path.string() + ": expected " + std::to_string(count * 4) + " bytes, found " +
			std::to_string(size));
	}
	return read_f32(path);
}

void write_field(const std::filesystem::path &path, const ScalarField &field) {
	write_f32(path, field.values());
}

void write_field(const std::filesystem::path &path, const VectorField &field) {
	write_f32(path, field.values());
}

ScalarField read_scalar_field(const std::filesystem::path &path, const GridSpec &spec) {
	return ScalarField(spec, read_f32(path, spec.cells()));
}

VectorField read_vector_field(const std::filesystem::path &path, const GridSpec &spec) {
	return VectorField(spec, read_f32(path, spec.cells() * static_cast<std::size_t>(spec.d())));
}

} // namespace smokecorr
