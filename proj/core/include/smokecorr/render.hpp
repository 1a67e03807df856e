#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "smokecorr/fields.hpp"

namespace smokecorr {

struct GrayImage {
	int width = 0;
	int height = 0;
	/// Row-major, top row first.
	std::vector<std::uint8_t> pixels;
};

/// Maps [0, max] linearly to [0, 255]; 3D fields are first averaged along
/// `axis`. The highest y row becomes the top image row.
GrayImage render_density(const ScalarField &rho, Axis axis = Axis::z);

void write_png(const std::filesystem::path &path, const GrayImage &image);
GrayImage read_png(const std::filesystem::path &path);

/// Renders every `rho_XXXXX.f32` of an archive directory to `out/rho_XXXXX.png`.
/// Returns the number of images written.
int render_archive(const std::filesystem::path &archive_dir, const std::filesystem::path &out, Axis axis = Axis::z);

} // namespace smokecorr
