#include "splat/bench.hpp"

#include "splat/error.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

namespace splat {

void write_png(const std::string& path, const Image& image) {
    std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(path.c_str(), "wb"), &std::fclose);
    if (!file) throw Error(Errc::FileError, "cannot open " + path + " for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw Error(Errc::FileError, "libpng initialisation failed");
    png_infop info = png_create_info_struct(png);
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error(Errc::FileError, "failed writing " + path);
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, image.width, image.height, 8, PNG_COLOR_TYPE_RGBA, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_byte> row(static_cast<std::size_t>(image.width) * 4);
    for (std::uint32_t y = 0; y < image.height; ++y) {
        for (std::uint32_t x = 0; x < image.width; ++x) {
            const std::uint32_t p = image.at(x, y);
            for (int c = 0; c < 4; ++c) row[4 * x + c] = static_cast<png_byte>((p >> (8 * c)) & 0xFFu);
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

void write_float_dump(const std::string& path, const reference::ReferenceImage& image) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::FileError, "cannot open " + path + " for writing");
    const std::uint32_t header[2] = {image.width, image.height};
    out.write("SPLF", 4);
    out.write(reinterpret_cast<const char*>(header), sizeof header);
    out.write(reinterpret_cast<const char*>(image.rgba.data()),
              static_cast<std::streamsize>(image.rgba.size() * sizeof(float)));
    if (!out) throw Error(Errc::FileError, "failed writing " + path);
}

} // namespace splat
