#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "xrumap/model_io.hpp"
#include "xrumap/rng.hpp"
#include "xrumap/synth.hpp"

using namespace xrumap;

namespace {

std::filesystem::path io_dir() {
    const auto dir = std::filesystem::temp_directory_path() / "xrumap_io";
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("pca model JSON round trip") {
    Rng rng(1);
    Matrix x(40, 5);
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    const PcaModel model = pca_fit(x, 3);
    const auto path = io_dir() / "pca.json";
    save_pca(model, path);
    const PcaModel loaded = load_pca(path);
    CHECK(loaded.mean == model.mean);
    CHECK(loaded.scale == model.scale);
    CHECK(loaded.components == model.components);
    CHECK(loaded.explained_variance_ratio == model.explained_variance_ratio);
    CHECK(model_kind(path) == "pca");
}

TEST_CASE("nmf model JSON round trip") {
    Rng rng(2);
    Matrix x(30, 6);
    for (std::size_t i = 0; i < x.size(); ++i)
        x.data()[i] = rng.uniform(0.0, 1.0);
    const NmfFit fit = nmf_fit(x, 2, 50, 7);
    const auto path = io_dir() / "nmf.json";
    save_nmf(fit.model, path);
    const NmfModel loaded = load_nmf(path);
    CHECK(loaded.basis == fit.model.basis);
    CHECK(loaded.rank == fit.model.rank);
    CHECK(loaded.reconstruction_error == fit.model.reconstruction_error);
    CHECK(loaded.error_trace == fit.model.error_trace);
}

TEST_CASE("umap model with sidecar reproduces transforms exactly") {
    Rng rng(3);
    Matrix x(60, 4);
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    UmapParams params;
    params.n_neighbors = 6;
    params.target_dim = 2;
    params.n_epochs = 40;
    params.seed = 11;
    const UmapModel model = umap_fit(x, params);

    const auto path = io_dir() / "umap.json";
    save_umap(model, path);
    const UmapModel loaded = load_umap(path);
    CHECK(loaded.train_data == model.train_data);
    CHECK(loaded.embedding == model.embedding);
    CHECK(loaded.graph.indices == model.graph.indices);
    CHECK(loaded.graph.sigma == model.graph.sigma);
    CHECK(loaded.curve_a == model.curve_a);
    CHECK(loaded.params.n_neighbors == params.n_neighbors);

    Matrix probe(5, 4);
    for (std::size_t i = 0; i < probe.size(); ++i)
        probe.data()[i] = rng.uniform(-1.0, 1.0);
    CHECK(umap_transform(loaded, probe, 10, 3) ==
          umap_transform(model, probe, 10, 3));
}

TEST_CASE("encoder model with sidecar reproduces forwards exactly") {
    const EncoderNet net = encoder_init({6, 8, 3}, 21);
    const auto path = io_dir() / "encoder.json";
    save_encoder(net, 1.577, 0.895, path);
    const LoadedEncoder loaded = load_encoder(path);
    CHECK(loaded.curve_a == 1.577);
    CHECK(loaded.net.layer_sizes == net.layer_sizes);

    Rng rng(22);
    Matrix x(7, 6);
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    CHECK(encoder_forward(loaded.net, x) == encoder_forward(net, x));
}

TEST_CASE("dataset write/load round trip") {
    SynthParams params;
    params.task = "regression";
    params.n_train = 3;
    params.n_test = 2;
    params.height = 8;
    params.width = 8;
    params.bands = 5;
    params.seed = 4;
    const SynthDataset data = synth_dataset(params);
    const auto dir = io_dir() / "dataset";
    write_dataset(data, dir);
    const SynthDataset loaded = load_dataset(dir);
    CHECK(loaded.params.task == "regression");
    CHECK(loaded.train.size() == 3);
    CHECK(loaded.test.size() == 2);
    CHECK(loaded.train.cubes[0].data == data.train.cubes[0].data);
    CHECK(loaded.train.masks[2].data == data.train.masks[2].data);
    CHECK(loaded.test.targets == data.test.targets);
    CHECK(loaded.train.target_names == data.train.target_names);
}

TEST_CASE("synth determinism and negative samples") {
    SynthParams params;
    params.task = "segmentation";
    params.n_train = 4;
    params.n_test = 2;
    params.height = 8;
    params.width = 8;
    params.bands = 5;
    params.seed = 123;
    const SynthDataset a = synth_dataset(params);
    const SynthDataset b = synth_dataset(params);
    for (std::size_t i = 0; i < a.train.size(); ++i)
        CHECK(a.train.cubes[i].data == b.train.cubes[i].data);

    params.insert_prob = 0.0;
    const SynthDataset negatives = synth_dataset(params);
    for (const HyperCube& mask : negatives.train.masks)
        for (float v : mask.data) CHECK(v == 0.0f);
}

TEST_CASE("synth cubes are valid transmittance with sane masks") {
    SynthParams params;
    params.n_train = 3;
    params.n_test = 1;
    params.height = 12;
    params.width = 12;
    params.bands = 8;
    params.seed = 5;
    params.insert_prob = 1.0;
    const SynthDataset data = synth_dataset(params);
    for (const HyperCube& cube : data.train.cubes) {
        CHECK(cube.transmittance);
        validate(cube);
    }
    bool any_mask = false;
    for (const HyperCube& mask : data.train.masks)
        for (float v : mask.data)
            if (v != 0.0f) any_mask = true;
    CHECK(any_mask);
}
