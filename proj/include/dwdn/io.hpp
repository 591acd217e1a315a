#pragma once

// Image and kernel files. PNG (8/16-bit) goes through libpng; binary PGM/PPM
// is handled here. Samples map to [0,1] by dividing by the max code value and
// are re-quantized with round-half-up on write.

#include <png.h>

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dwdn/error.hpp"
#include "dwdn/image.hpp"

namespace dwdn {

namespace fs = std::filesystem;

/// Write via a sibling temporary file and rename so readers never see partial output.
template <typename Writer>
void write_atomically(const fs::path& path, Writer&& writer)
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::random_device rd;
    fs::path tmp = path;
    tmp += ".tmp" + std::to_string(rd());
    try {
        writer(tmp);
        fs::rename(tmp, path);
    } catch (...) {
        std::error_code ec;
        fs::remove(tmp, ec);
        throw;
    }
}

inline void write_text_file(const fs::path& path, const std::string& text)
{
    write_atomically(path, [&](const fs::path& tmp) {
        std::ofstream out(tmp, std::ios::binary);
        out << text;
        if (!out)
            throw IoError("cannot write " + tmp.string());
    });
}

inline std::string read_text_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace detail {

inline unsigned quantize(double v, unsigned max_code)
{
    if (!std::isfinite(v))
        v = 0.0;
    const double q = std::floor(v * max_code + 0.5);
    if (q <= 0.0)
        return 0;
    if (q >= max_code)
        return max_code;
    return static_cast<unsigned>(q);
}

struct FileCloser {
    void operator()(std::FILE* f) const
    {
        if (f)
            std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline Image read_png(const fs::path& path)
{
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f)
        throw IoError("cannot open " + path.string());
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("libpng initialization failed");
    }
    std::vector<png_bytep> rows;
    std::vector<unsigned char> buffer;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("malformed PNG " + path.string());
    }
    png_init_io(png, f.get());
    png_read_info(png, info);
    int bit_depth = png_get_bit_depth(png, info);
    const int color = png_get_color_type(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE)
        png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && bit_depth < 8)
        png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA)
        png_set_strip_alpha(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS))
        png_set_strip_alpha(png);
    if (bit_depth == 16)
        png_set_swap(png); // little-endian host order
    png_read_update_info(png, info);

    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    const int ch = png_get_channels(png, info);
    bit_depth = png_get_bit_depth(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    buffer.resize(rowbytes * h);
    rows.resize(h);
    for (int y = 0; y < h; ++y)
        rows[y] = buffer.data() + rowbytes * y;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    if (ch != 1 && ch != 3)
        throw FormatError("unsupported PNG channel layout in " + path.string());
    Image img(h, w, ch);
    const double scale = bit_depth == 16 ? 65535.0 : 255.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < ch; ++c) {
                const std::size_t i = static_cast<std::size_t>(x) * ch + c;
                unsigned code;
                if (bit_depth == 16) {
                    const auto* p = reinterpret_cast<const std::uint16_t*>(rows[y]);
                    code = p[i];
                } else {
                    code = rows[y][i];
                }
                img(c, y, x) = code / scale;
            }
    return img;
}

inline void write_png(const fs::path& path, const Image& img, int bit_depth)
{
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f)
        throw IoError("cannot create " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("libpng initialization failed");
    }
    const int ch = img.channels();
    const int bytes = bit_depth / 8;
    const unsigned max_code = bit_depth == 16 ? 65535u : 255u;
    std::vector<unsigned char> row(static_cast<std::size_t>(img.width()) * ch * bytes);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG encoding failed for " + path.string());
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, img.width(), img.height(), bit_depth, ch == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x)
            for (int c = 0; c < ch; ++c) {
                const unsigned q = quantize(img(c, y, x), max_code);
                const std::size_t i = (static_cast<std::size_t>(x) * ch + c) * bytes;
                if (bytes == 2) {
                    row[i] = static_cast<unsigned char>(q >> 8); // PNG stores big-endian
                    row[i + 1] = static_cast<unsigned char>(q & 0xff);
                } else {
                    row[i] = static_cast<unsigned char>(q);
                }
            }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    if (std::fflush(f.get()) != 0)
        throw IoError("cannot flush " + path.string());
}

inline std::string next_pnm_token(std::istream& in)
{
    std::string tok;
    char c;
    while (in.get(c)) {
        if (c == '#') {
            std::string skip;
            std::getline(in, skip);
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!tok.empty())
                return tok;
            continue;
        }
        tok.push_back(c);
    }
    return tok;
}

inline Image read_pnm(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());
    const std::string magic = next_pnm_token(in);
    if (magic != "P5" && magic != "P6")
        throw FormatError("only binary PGM (P5) / PPM (P6) are supported: " + path.string());
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(next_pnm_token(in));
        h = std::stoi(next_pnm_token(in));
        maxval = std::stoi(next_pnm_token(in));
    } catch (const std::exception&) {
        throw FormatError("malformed PNM header in " + path.string());
    }
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535)
        throw FormatError("invalid PNM header in " + path.string());
    const int ch = magic == "P6" ? 3 : 1;
    const int bytes = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * ch * bytes);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size()))
        throw FormatError("truncated PNM payload in " + path.string());
    Image img(h, w, ch);
    std::size_t i = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < ch; ++c) {
                unsigned code = raw[i++];
                if (bytes == 2)
                    code = (code << 8) | raw[i++];
                img(c, y, x) = static_cast<double>(code) / maxval;
            }
    return img;
}

inline void write_pnm(const fs::path& path, const Image& img, int bit_depth)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot create " + path.string());
    const unsigned max_code = bit_depth == 16 ? 65535u : 255u;
    out << (img.channels() == 3 ? "P6" : "P5") << '\n' << img.width() << ' ' << img.height() << '\n' << max_code << '\n';
    std::vector<unsigned char> raw;
    raw.reserve(img.data().size() * (bit_depth / 8));
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            for (int c = 0; c < img.channels(); ++c) {
                const unsigned q = quantize(img(c, y, x), max_code);
                if (bit_depth == 16)
                    raw.push_back(static_cast<unsigned char>(q >> 8));
                raw.push_back(static_cast<unsigned char>(q & 0xff));
            }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out)
        throw IoError("cannot write " + path.string());
}

inline std::string lower_extension(const fs::path& p)
{
    std::string ext = p.extension().string();
    for (auto& c : ext)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return ext;
}

} // namespace detail

inline Image read_image(const fs::path& path)
{
    if (!fs::exists(path))
        throw IoError("no such file: " + path.string());
    const std::string ext = detail::lower_extension(path);
    if (ext == ".png")
        return detail::read_png(path);
    if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm")
        return detail::read_pnm(path);
    throw FormatError("unsupported image format: " + path.string());
}

/// bit_depth is 8 or 16; the format follows the file extension.
inline void write_image(const fs::path& path, const Image& img, int bit_depth = 8)
{
    if (bit_depth != 8 && bit_depth != 16)
        throw ParameterError("bit depth must be 8 or 16");
    const std::string ext = detail::lower_extension(path);
    const bool png = ext == ".png";
    if (!png && ext != ".pgm" && ext != ".ppm" && ext != ".pnm")
        throw FormatError("unsupported image format: " + path.string());
    if (ext == ".pgm" && img.channels() != 1)
        throw FormatError("PGM holds a single channel");
    if (ext == ".ppm" && img.channels() != 3)
        throw FormatError("PPM holds three channels");
    write_atomically(path, [&](const fs::path& tmp) {
        png ? detail::write_png(tmp, img, bit_depth) : detail::write_pnm(tmp, img, bit_depth);
    });
}

/// Plain-text kernel: "kh kw" then kh rows of kw taps. Normalized on load.
inline Kernel parse_kernel(const std::string& text)
{
    std::istringstream in(text);
    int kh = 0, kw = 0;
    if (!(in >> kh >> kw))
        throw FormatError("kernel header must be 'kh kw'");
    if (kh <= 0 || kw <= 0 || kh > 1001 || kw > 1001)
        throw FormatError("kernel extents out of range");
    std::vector<double> taps(static_cast<std::size_t>(kh) * kw);
    for (auto& t : taps)
        if (!(in >> t))
            throw FormatError("kernel file has fewer taps than declared");
    std::string extra;
    if (in >> extra)
        throw FormatError("kernel file has trailing data");
    for (double t : taps)
        if (t < 0.0)
            throw FormatError("kernel taps must be non-negative");
    try {
        return Kernel::normalized(kh, kw, std::move(taps));
    } catch (const ParameterError& e) {
        throw FormatError(e.what());
    }
}

inline Kernel read_kernel(const fs::path& path) { return parse_kernel(read_text_file(path)); }

inline std::string format_kernel(const Kernel& k)
{
    std::ostringstream out;
    out << k.height() << ' ' << k.width() << '\n' << std::setprecision(17);
    for (int y = 0; y < k.height(); ++y) {
        for (int x = 0; x < k.width(); ++x)
            out << (x ? " " : "") << k(y, x);
        out << '\n';
    }
    return out.str();
}

inline void write_kernel(const fs::path& path, const Kernel& k) { write_text_file(path, format_kernel(k)); }

} // namespace dwdn
