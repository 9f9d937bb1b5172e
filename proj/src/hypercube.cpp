#include "xrumap/hypercube.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "xrumap/errors.hpp"

namespace xrumap {

namespace {

constexpr char kMagic[4] = {'H', 'S', 'C', '1'};
constexpr float kTransmittanceSlack = 1e-6f;

std::string dim_string(const HyperCube& c) {
    std::ostringstream os;
    os << c.height << "x" << c.width << "x" << c.bands;
    return os.str();
}

void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) |
           (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void validate(const HyperCube& cube) {
    if (cube.height == 0 || cube.width == 0 || cube.bands == 0)
        throw DataError("cube has a zero-sized dimension (" + dim_string(cube) +
                        ")");
    if (cube.data.size() != cube.size())
        throw DataError("cube data length " + std::to_string(cube.data.size()) +
                        " does not match dimensions " + dim_string(cube));
    for (std::size_t i = 0; i < cube.data.size(); ++i) {
        const float v = cube.data[i];
        if (!std::isfinite(v) || v < 0.0f)
            throw DataError("cube value at offset " + std::to_string(i) +
                            " is negative or non-finite");
        if (cube.transmittance && v > 1.0f + kTransmittanceSlack)
            throw DataError("transmittance cube value at offset " +
                            std::to_string(i) + " exceeds 1");
    }
}

void validate(const WhiteReference& ref) {
    if (ref.width == 0 || ref.bands == 0)
        throw DataError("white reference has a zero-sized dimension");
    if (ref.data.size() != ref.width * ref.bands)
        throw DataError("white reference data length does not match shape");
    for (std::size_t i = 0; i < ref.data.size(); ++i) {
        const float v = ref.data[i];
        if (!std::isfinite(v) || v <= 0.0f)
            throw DataError("white reference value at offset " +
                            std::to_string(i) + " is not strictly positive");
    }
}

HyperCube load_cube(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw DataError("cannot open cube file: " + path.string());

    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw DataError("bad magic in cube file: " + path.string());

    HyperCube cube;
    cube.height = read_u32(is);
    cube.width = read_u32(is);
    cube.bands = read_u32(is);
    char flag = 0;
    is.get(flag);
    if (!is)
        throw DataError("truncated header in cube file: " + path.string());
    if (flag != 0 && flag != 1)
        throw DataError("unknown unit flag in cube file: " + path.string());
    cube.transmittance = (flag == 1);

    const std::size_t n = cube.size();
    cube.data.resize(n);
    static_assert(sizeof(float) == 4);
    is.read(reinterpret_cast<char*>(cube.data.data()),
            static_cast<std::streamsize>(n * 4));
    if (static_cast<std::size_t>(is.gcount()) != n * 4)
        throw DataError("truncated payload in cube file " + path.string() +
                        ": expected " + std::to_string(n) + " values, got " +
                        std::to_string(static_cast<std::size_t>(is.gcount()) / 4));
    validate(cube);
    return cube;
}

void save_cube(const HyperCube& cube, const std::filesystem::path& path) {
    validate(cube);
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os)
        throw DataError("cannot open cube file for writing: " + path.string());
    os.write(kMagic, 4);
    write_u32(os, static_cast<std::uint32_t>(cube.height));
    write_u32(os, static_cast<std::uint32_t>(cube.width));
    write_u32(os, static_cast<std::uint32_t>(cube.bands));
    os.put(cube.transmittance ? 1 : 0);
    os.write(reinterpret_cast<const char*>(cube.data.data()),
             static_cast<std::streamsize>(cube.data.size() * 4));
    if (!os)
        throw DataError("write failure on cube file: " + path.string());
}

HyperCube white_normalize(const HyperCube& cube, const WhiteReference& ref,
                          std::size_t* clamped) {
    validate(cube);
    validate(ref);
    if (cube.transmittance)
        throw DataError("white_normalize expects a cube in intensity units");
    if (ref.width != cube.width || ref.bands != cube.bands)
        throw DataError("white reference shape does not match cube");

    HyperCube out(cube.height, cube.width, cube.bands, 0.0f, true);
    std::size_t clipped = 0;
    for (std::size_t h = 0; h < cube.height; ++h)
        for (std::size_t w = 0; w < cube.width; ++w)
            for (std::size_t c = 0; c < cube.bands; ++c) {
                float v = cube.at(h, w, c) / ref.at(w, c);
                if (v > 1.0f) {
                    v = 1.0f;
                    ++clipped;
                }
                out.at(h, w, c) = v;
            }
    if (clamped) *clamped = clipped;
    validate(out);
    return out;
}

HyperCube fuse_beer_lambert(const HyperCube& a, const HyperCube& b) {
    validate(a);
    validate(b);
    if (!a.transmittance || !b.transmittance)
        throw DataError("fuse_beer_lambert expects transmittance cubes");
    if (a.height != b.height || a.width != b.width || a.bands != b.bands)
        throw DataError("fuse_beer_lambert shape mismatch: " + dim_string(a) +
                        " vs " + dim_string(b));
    HyperCube out(a.height, a.width, a.bands, 0.0f, true);
    for (std::size_t i = 0; i < a.data.size(); ++i)
        out.data[i] = a.data[i] * b.data[i];
    validate(out);
    return out;
}

HyperCube avg_pool2d(const HyperCube& cube, std::size_t out_h,
                     std::size_t out_w) {
    validate(cube);
    if (out_h == 0 || out_w == 0)
        throw DataError("avg_pool2d target dimension is zero");
    if (out_h > cube.height || out_w > cube.width)
        throw DataError("avg_pool2d target exceeds input spatial size");

    HyperCube out(out_h, out_w, cube.bands, 0.0f, cube.transmittance);
    for (std::size_t i = 0; i < out_h; ++i) {
        const std::size_t r0 = (i * cube.height) / out_h;
        const std::size_t r1 = ((i + 1) * cube.height + out_h - 1) / out_h;
        for (std::size_t j = 0; j < out_w; ++j) {
            const std::size_t c0 = (j * cube.width) / out_w;
            const std::size_t c1 = ((j + 1) * cube.width + out_w - 1) / out_w;
            const double inv = 1.0 / static_cast<double>((r1 - r0) * (c1 - c0));
            for (std::size_t b = 0; b < cube.bands; ++b) {
                double sum = 0.0;
                for (std::size_t r = r0; r < r1; ++r)
                    for (std::size_t c = c0; c < c1; ++c)
                        sum += cube.at(r, c, b);
                out.at(i, j, b) = static_cast<float>(sum * inv);
            }
        }
    }
    validate(out);
    return out;
}

Matrix flatten_pixels(const HyperCube& cube, const HyperCube* mask) {
    validate(cube);
    if (mask) {
        validate(*mask);
        if (mask->height != cube.height || mask->width != cube.width ||
            mask->bands != 1)
            throw DataError("mask shape does not match cube spatial grid");
    }

    std::size_t n = 0;
    if (mask) {
        for (std::size_t i = 0; i < mask->data.size(); ++i)
            if (mask->data[i] != 0.0f) ++n;
        if (n == 0) throw DataError("mask selects no pixels");
    } else {
        n = cube.height * cube.width;
    }

    Matrix out(n, cube.bands);
    std::size_t row = 0;
    for (std::size_t h = 0; h < cube.height; ++h)
        for (std::size_t w = 0; w < cube.width; ++w) {
            if (mask && mask->at(h, w, 0) == 0.0f) continue;
            for (std::size_t c = 0; c < cube.bands; ++c)
                out(row, c) = cube.at(h, w, c);
            ++row;
        }
    return out;
}

HyperCube reshape_pixels(const Matrix& pixels, std::size_t height,
                         std::size_t width, bool transmittance_tag) {
    if (pixels.rows() != height * width)
        throw DataError("reshape_pixels: row count does not match H*W");
    HyperCube out(height, width, pixels.cols(), 0.0f, transmittance_tag);
    std::size_t row = 0;
    for (std::size_t h = 0; h < height; ++h)
        for (std::size_t w = 0; w < width; ++w) {
            for (std::size_t c = 0; c < pixels.cols(); ++c)
                out.at(h, w, c) = static_cast<float>(pixels(row, c));
            ++row;
        }
    validate(out);
    return out;
}

}  // namespace xrumap
