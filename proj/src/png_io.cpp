#include "mapnn/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace mapnn::io {

namespace {

struct ReadCursor {
    const std::string* bytes;
    std::size_t pos;
};

void read_from_string(png_structp png, png_bytep out, png_size_t n) {
    auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
    if (cur->bytes->size() - cur->pos < n) png_error(png, "unexpected end of data");
    std::memcpy(out, cur->bytes->data() + cur->pos, n);
    cur->pos += n;
}

void write_to_string(png_structp png, png_bytep data, png_size_t n) {
    static_cast<std::string*>(png_get_io_ptr(png))->append(reinterpret_cast<const char*>(data), n);
}

void flush_noop(png_structp) {}

[[noreturn]] void on_error(png_structp png, png_const_charp msg) {
    *static_cast<std::string*>(png_get_error_ptr(png)) = msg;
    png_longjmp(png, 1);
}

void on_warning(png_structp, png_const_charp) {}

}  // namespace

std::string encode_png(const GrayImage& img) {
    if (img.bit_depth != 8 && img.bit_depth != 16) throw InvalidArgument("encode_png: bit depth must be 8 or 16");
    if (img.rows < 1 || img.cols < 1 || static_cast<Index>(img.pixels.size()) != img.rows * img.cols) {
        throw InvalidArgument("encode_png: pixel count does not match dimensions");
    }
    std::string message;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, on_error, on_warning);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("encode_png: out of memory");
    }
    std::string out;
    const volatile std::size_t bytes_per = img.bit_depth == 16 ? 2 : 1;
    std::vector<png_byte> row(static_cast<std::size_t>(img.cols) * bytes_per);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("encode_png: " + message);
    }
    png_set_write_fn(png, &out, write_to_string, flush_noop);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.cols), static_cast<png_uint_32>(img.rows), img.bit_depth,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (Index r = 0; r < img.rows; ++r) {
        const std::uint16_t* src = img.pixels.data() + r * img.cols;
        for (Index c = 0; c < img.cols; ++c) {
            if (bytes_per == 2) {
                row[2 * c] = static_cast<png_byte>(src[c] >> 8);  // PNG is big-endian
                row[2 * c + 1] = static_cast<png_byte>(src[c] & 0xff);
            } else {
                row[c] = static_cast<png_byte>(std::min<std::uint16_t>(src[c], 255));
            }
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

GrayImage decode_png(const std::string& bytes) {
    if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0) {
        throw FormatError("decode_png: not a PNG file");
    }
    std::string message;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, on_error, on_warning);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("decode_png: out of memory");
    }
    ReadCursor cursor{&bytes, 0};
    GrayImage img;
    std::vector<png_byte> row;
    std::string format_problem;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("decode_png: " + (format_problem.empty() ? message : format_problem));
    }
    png_set_read_fn(png, &cursor, read_from_string);
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (color != PNG_COLOR_TYPE_GRAY || (depth != 8 && depth != 16) ||
        png_get_interlace_type(png, info) != PNG_INTERLACE_NONE) {
        format_problem = "expected non-interlaced 8- or 16-bit grayscale, got color type " + std::to_string(color) +
                         " at " + std::to_string(depth) + " bits";
        png_error(png, format_problem.c_str());
    }
    img.rows = png_get_image_height(png, info);
    img.cols = png_get_image_width(png, info);
    img.bit_depth = depth;
    img.pixels.resize(static_cast<std::size_t>(img.rows * img.cols));
    row.resize(png_get_rowbytes(png, info));
    for (Index r = 0; r < img.rows; ++r) {
        png_read_row(png, row.data(), nullptr);
        std::uint16_t* dst = img.pixels.data() + r * img.cols;
        for (Index c = 0; c < img.cols; ++c) {
            dst[c] = depth == 16 ? static_cast<std::uint16_t>((row[2 * c] << 8) | row[2 * c + 1]) : row[c];
        }
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void write_png(const std::filesystem::path& path, const GrayImage& img) {
    const std::string bytes = encode_png(img);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("write_png: cannot open " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write_png: write failed for " + path.string());
}

GrayImage read_png(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        if (!std::filesystem::exists(path)) throw FileNotFound("read_png: no such file " + path.string());
        throw IoError("read_png: cannot open " + path.string());
    }
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return decode_png(bytes);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

GrayImage hu_to_png16(const ct::Image& hu) {
    GrayImage img;
    img.rows = hu.rows();
    img.cols = hu.cols();
    img.bit_depth = 16;
    img.pixels.resize(static_cast<std::size_t>(hu.size()));
    for (Index i = 0; i < hu.size(); ++i) {
        img.pixels[static_cast<std::size_t>(i)] =
            static_cast<std::uint16_t>(std::clamp(std::round(hu.data()[i] + kHuOffset), 0.0, 65535.0));
    }
    return img;
}

ct::Image png16_to_hu(const GrayImage& img) {
    if (img.bit_depth != 16) {
        throw FormatError("expected a 16-bit slice, got " + std::to_string(img.bit_depth) + "-bit");
    }
    ct::Image hu(img.rows, img.cols);
    for (Index i = 0; i < hu.size(); ++i) hu.data()[i] = static_cast<double>(img.pixels[static_cast<std::size_t>(i)]) - kHuOffset;
    return hu;
}

GrayImage display_png8(const ct::Image& unit) {
    GrayImage img;
    img.rows = unit.rows();
    img.cols = unit.cols();
    img.bit_depth = 8;
    img.pixels.resize(static_cast<std::size_t>(unit.size()));
    for (Index i = 0; i < unit.size(); ++i) {
        img.pixels[static_cast<std::size_t>(i)] =
            static_cast<std::uint16_t>(std::clamp(std::round(255.0 * unit.data()[i]), 0.0, 255.0));
    }
    return img;
}

}  // namespace mapnn::io
