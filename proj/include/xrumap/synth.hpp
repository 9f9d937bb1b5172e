#ifndef XRUMAP_SYNTH_HPP
#define XRUMAP_SYNTH_HPP

#include <cstdint>
#include <filesystem>
#include <string>

#include "xrumap/dataset.hpp"

namespace xrumap {

// Phantom generator settings. Segmentation mode composes container cubes
// (random soft objects over three background materials) with an optional
// insert carrying a narrow absorption feature, fused by Beer-Lambert.
// Regression mode produces single two-component stones with known mass and
// concentrations.
struct SynthParams {
    std::string task = "segmentation";  // or "regression"
    std::size_t n_train = 20;
    std::size_t n_test = 6;
    std::size_t height = 24;
    std::size_t width = 24;
    std::size_t bands = 16;
    double photons = 2500.0;   // open-beam count scale for Poisson-like noise
    double insert_prob = 0.75; // fraction of positive segmentation samples
    std::uint64_t seed = 0;
};

struct SynthDataset {
    SampleSet train, test;
    SynthParams params;
};

SynthDataset synth_dataset(const SynthParams& params);

// Directory layout: manifest.json plus train/ and test/ with cube_NNN.hsc and
// mask_NNN.hsc pairs; regression targets live in the manifest.
void write_dataset(const SynthDataset& dataset,
                   const std::filesystem::path& dir);
SynthDataset load_dataset(const std::filesystem::path& dir);

}  // namespace xrumap

#endif
