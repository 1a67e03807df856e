#include "smokecorr/render.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "smokecorr/datagen.hpp"

namespace smokecorr {

GrayImage render_density(const ScalarField &rho, Axis axis) {
	const ScalarField plane = rho.spec().d() == 3 ? project_mean(rho, axis) : rho;
	const GridSpec &g = plane.spec();
	GrayImage img;
	img.width = g.nx();
	img.height = g.ny();
	img.pixels.assign(static_cast<std::size_t>(img.width) * img.height, 0);
	float top = 0.0f;
	for (float v : plane.values())
		if (std::isfinite(v)) top = std::max(top, v);
	if (top <= 0.0f) return img;
	for (int y = 0; y < g.ny(); ++y)
		for (int x = 0; x < g.nx(); ++x) {
			const double v = std::clamp(static_cast<double>(plane(x, y)) / top, 0.0, 1.0);
			img.pixels[static_cast<std::size_t>(g.ny() - 1 - y) * img.width + x] =
				static_cast<std::uint8_t>(std::lround(v * 255.0));
		}
	return img;
}

void write_png(const std::filesystem::path &path, const GrayImage &image) {
	png_image desc{};
	desc.version = PNG_IMAGE_VERSION;
	desc.width = static_cast<png_uint_32>(image.width);
	desc.height = static_cast<png_uint_32>(image.height);
	desc.format = PNG_FORMAT_GRAY;
	if (!png_image_write_to_file(&desc, path.c_str(), 0, image.pixels.data(), 0, nullptr)) {
		throw std::runtime_error("cannot write " + path.string() + ": " + desc.message);
	}
}

GrayImage read_png(const std::filesystem::path &path) {
	png_image desc{};
	desc.version = PNG_IMAGE_VERSION;
	if (!png_image_begin_read_from_file(&desc, path.c_str())) throw std::runtime_error("cannot read " + path.string());
	desc.format = PNG_FORMAT_GRAY;
	GrayImage img;
	img.width = static_cast<int>(desc.width);
	img.height = static_cast<int>(desc.height);
	img.pixels.resize(PNG_IMAGE_SIZE(desc));
	if (!png_image_finish_read(&desc, nullptr, img.pixels.data(), 0, nullptr)) {
		png_image_free(&desc);
		throw std::runtime_error("cannot decode " + path.string());
	}
	return img;
}

int render_archive(const std::filesystem::path &archive_dir, const std::filesystem::path &out, Axis axis) {
	const auto archive = SimulationArchive::open(archive_dir);
	std::filesystem::create_directories(out);
	int written = 0;
	for (int i = 0; i < archive.num_states(); ++i) {
		if (!std::filesystem::exists(archive_dir / state_file("rho", i))) continue;
		auto name = state_file("rho", i);
		name.replace(name.size() - 4, 4, ".png");
		write_png(out / name, render_density(archive.read_density(i), axis));
		++written;
	}
	return written;
}

} // namespace smokecorr
