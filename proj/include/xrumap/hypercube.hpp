#ifndef XRUMAP_HYPERCUBE_HPP
#define XRUMAP_HYPERCUBE_HPP

#include <cstddef>
#include <filesystem>
#include <optional>
#include <vector>

#include "xrumap/matrix.hpp"

namespace xrumap {

// Hyperspectral cube [H, W, C]: H rows (time axis), W columns (detector
// pixels), C energy bands. Row-major storage, non-negative finite values.
// A transmittance-tagged cube additionally keeps every value <= 1.
struct HyperCube {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t bands = 0;
    bool transmittance = false;
    std::vector<float> data;  // [H][W][C]

    HyperCube() = default;
    HyperCube(std::size_t h, std::size_t w, std::size_t c, float fill = 0.0f,
              bool transmittance_tag = false)
        : height(h), width(w), bands(c), transmittance(transmittance_tag),
          data(h * w * c, fill) {}

    float& at(std::size_t h, std::size_t w, std::size_t c) {
        return data[(h * width + w) * bands + c];
    }
    float at(std::size_t h, std::size_t w, std::size_t c) const {
        return data[(h * width + w) * bands + c];
    }
    std::size_t size() const { return height * width * bands; }
};

// Open-beam intensity per (detector pixel, band), strictly positive.
struct WhiteReference {
    std::size_t width = 0;
    std::size_t bands = 0;
    std::vector<float> data;  // [W][C]

    WhiteReference() = default;
    WhiteReference(std::size_t w, std::size_t c, float fill = 1.0f)
        : width(w), bands(c), data(w * c, fill) {}

    float& at(std::size_t w, std::size_t c) { return data[w * bands + c]; }
    float at(std::size_t w, std::size_t c) const { return data[w * bands + c]; }
};

// Throws DataError naming the first offending entry when an invariant fails.
void validate(const HyperCube& cube);
void validate(const WhiteReference& ref);

// .hsc container: "HSC1", u32le H W C, u8 flag (0 intensity, 1 transmittance),
// then H*W*C IEEE-754 f32le values in row-major [H][W][C] order.
HyperCube load_cube(const std::filesystem::path& path);
void save_cube(const HyperCube& cube, const std::filesystem::path& path);

// output[h][w][c] = clamp(cube[h][w][c] / ref[w][c], 0, 1), tagged
// transmittance. Values clamped at the top are counted into *clamped.
HyperCube white_normalize(const HyperCube& cube, const WhiteReference& ref,
                          std::size_t* clamped = nullptr);

// Beer-Lambert fusion: elementwise product of two transmittance cubes.
HyperCube fuse_beer_lambert(const HyperCube& a, const HyperCube& b);

// Adaptive average pooling over the spatial axes; bands pass through.
// Window for output cell (i, j): rows [floor(i*H/oh), ceil((i+1)*H/oh)) x
// cols [floor(j*W/ow), ceil((j+1)*W/ow)). Window sums run sequentially.
HyperCube avg_pool2d(const HyperCube& cube, std::size_t out_h,
                     std::size_t out_w);

// Pixels-as-rows matrix (N x C) in row-major scan order. A mask, when given,
// is a C=1 cube over the same spatial grid; rows are kept where mask != 0.
Matrix flatten_pixels(const HyperCube& cube, const HyperCube* mask = nullptr);

// Inverse of mask-free flatten_pixels: rows back to an [H, W, D] cube.
HyperCube reshape_pixels(const Matrix& pixels, std::size_t height,
                         std::size_t width, bool transmittance_tag = false);

}  // namespace xrumap

#endif
