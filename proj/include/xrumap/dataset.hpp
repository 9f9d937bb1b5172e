#ifndef XRUMAP_DATASET_HPP
#define XRUMAP_DATASET_HPP

#include <string>
#include <vector>

#include "xrumap/hypercube.hpp"
#include "xrumap/matrix.hpp"

namespace xrumap {

// A set of cubes with per-cube references: binary masks for segmentation and
// per-cube regression targets (mass and component concentrations).
struct SampleSet {
    std::vector<HyperCube> cubes;
    std::vector<HyperCube> masks;  // C = 1, values in {0, 1}
    Matrix targets;                // [n_cubes][M]; empty for pure segmentation
    std::vector<std::string> target_names;

    std::size_t size() const { return cubes.size(); }
};

}  // namespace xrumap

#endif
