#include "f2r/core/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <vector>

#include "f2r/core/errors.hpp"

namespace f2r {

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

std::string lower_ext(const std::string& path) {
    const auto dot = path.find_last_of('.');
    if (dot == std::string::npos) return "";
    std::string e = path.substr(dot + 1);
    std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
    return e;
}

Tensor read_png_file(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (!png || !info) throw IoError("libpng init failed");
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("png decode failed: " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    int depth = png_get_bit_depth(png, info);
    const int ctype = png_get_color_type(png, info);

    if (ctype == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (ctype == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (ctype & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (depth == 16) png_set_swap(png);  // files are big-endian
    png_read_update_info(png, info);

    depth = png_get_bit_depth(png, info);
    const int ch = static_cast<int>(png_get_channels(png, info));
    if (ch != 1 && ch != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("unsupported channel count in " + path);
    }
    const std::size_t stride = png_get_rowbytes(png, info);
    std::vector<unsigned char> raw(static_cast<std::size_t>(h) * stride);
    std::vector<png_bytep> rows(static_cast<std::size_t>(h));
    for (int y = 0; y < h; ++y) rows[static_cast<std::size_t>(y)] = raw.data() + y * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Tensor out({ch, h, w});
    const float scale = depth == 16 ? 1.0f / 65535.0f : 1.0f / 255.0f;
    for (int y = 0; y < h; ++y) {
        const unsigned char* row = raw.data() + static_cast<std::size_t>(y) * stride;
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < ch; ++c) {
                if (depth == 16) {
                    uint16_t v;
                    std::memcpy(&v, row + (static_cast<std::size_t>(x) * ch + c) * 2, 2);
                    out.at(c, y, x) = v * scale;
                } else {
                    out.at(c, y, x) = row[static_cast<std::size_t>(x) * ch + c] * scale;
                }
            }
    }
    return out;
}

void write_png_file(const std::string& path, const Tensor& frame, int bit_depth) {
    const int ch = frame.dim(0), h = frame.dim(1), w = frame.dim(2);
    if (ch != 1 && ch != 3) throw IoError("write_image: only 1- or 3-channel frames");
    if (bit_depth != 8 && bit_depth != 16) throw IoError("write_image: bit depth must be 8 or 16");
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot open for write: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (!png || !info) throw IoError("libpng init failed");
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("png encode failed: " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), bit_depth,
                 ch == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    if (bit_depth == 16) png_set_swap(png);

    const int maxv = bit_depth == 16 ? 65535 : 255;
    const std::size_t stride = static_cast<std::size_t>(w) * ch * (bit_depth / 8);
    std::vector<unsigned char> row(stride);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < ch; ++c) {
                const double v = std::min(std::max(static_cast<double>(frame.at(c, y, x)), 0.0), 1.0);
                const long q = std::lround(v * maxv);
                if (bit_depth == 16) {
                    const uint16_t u = static_cast<uint16_t>(q);
                    std::memcpy(row.data() + (static_cast<std::size_t>(x) * ch + c) * 2, &u, 2);
                } else {
                    row[static_cast<std::size_t>(x) * ch + c] = static_cast<unsigned char>(q);
                }
            }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Tensor read_pnm_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    std::string magic;
    is >> magic;
    if (magic != "P5" && magic != "P6") throw IoError("unsupported PNM magic in " + path);
    const int ch = magic == "P6" ? 3 : 1;
    auto next_int = [&is, &path]() {
        int v;
        // skip comments
        while (is >> std::ws && is.peek() == '#') is.ignore(1 << 16, '\n');
        if (!(is >> v)) throw IoError("bad PNM header in " + path);
        return v;
    };
    const int w = next_int(), h = next_int(), maxv = next_int();
    is.ignore(1);  // single whitespace before raster
    const int bytes = maxv > 255 ? 2 : 1;
    std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * ch * bytes);
    is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!is) throw IoError("truncated PNM raster in " + path);
    Tensor out({ch, h, w});
    const float scale = 1.0f / static_cast<float>(maxv);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < ch; ++c) {
                const std::size_t i = (static_cast<std::size_t>(y) * w + x) * ch + c;
                // PNM 16-bit is big-endian
                const int v = bytes == 2 ? (raw[i * 2] << 8 | raw[i * 2 + 1]) : raw[i];
                out.at(c, y, x) = v * scale;
            }
    return out;
}

}  // namespace

Tensor read_image(const std::string& path) {
    const std::string ext = lower_ext(path);
    if (ext == "png") return read_png_file(path);
    if (ext == "pgm" || ext == "ppm" || ext == "pnm") return read_pnm_file(path);
    if (ext == "tif" || ext == "tiff")
        throw IoError("TIFF is not supported by this build, use PNG: " + path);
    throw IoError("unsupported image format: " + path);
}

void write_image(const std::string& path, const Tensor& frame, int bit_depth) {
    if (frame.ndim() != 3) throw IoError("write_image: expects [Ch,H,W]");
    const std::string ext = lower_ext(path);
    if (ext == "png") return write_png_file(path, frame, bit_depth);
    throw IoError("unsupported output format: " + path);
}

Tensor read_flo(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    float magic;
    int32_t w, h;
    is.read(reinterpret_cast<char*>(&magic), 4);
    is.read(reinterpret_cast<char*>(&w), 4);
    is.read(reinterpret_cast<char*>(&h), 4);
    if (!is || magic != 202021.25f) throw IoError("bad .flo header in " + path);
    Tensor out({2, h, w});
    std::vector<float> row(static_cast<std::size_t>(w) * 2);
    for (int y = 0; y < h; ++y) {
        is.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size() * 4));
        if (!is) throw IoError("truncated .flo in " + path);
        for (int x = 0; x < w; ++x) {
            out.at(0, y, x) = row[static_cast<std::size_t>(x) * 2];
            out.at(1, y, x) = row[static_cast<std::size_t>(x) * 2 + 1];
        }
    }
    return out;
}

void write_flo(const std::string& path, const Tensor& flow) {
    if (flow.ndim() != 3 || flow.dim(0) != 2) throw IoError("write_flo: expects [2,H,W]");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for write: " + path);
    const float magic = 202021.25f;
    const int32_t w = flow.dim(2), h = flow.dim(1);
    os.write(reinterpret_cast<const char*>(&magic), 4);
    os.write(reinterpret_cast<const char*>(&w), 4);
    os.write(reinterpret_cast<const char*>(&h), 4);
    std::vector<float> row(static_cast<std::size_t>(w) * 2);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            row[static_cast<std::size_t>(x) * 2] = flow.at(0, y, x);
            row[static_cast<std::size_t>(x) * 2 + 1] = flow.at(1, y, x);
        }
        os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * 4));
    }
    if (!os) throw IoError("failed writing " + path);
}

}  // namespace f2r
