#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "xrumap/errors.hpp"
#include "xrumap/synth.hpp"

namespace xrumap {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string padded(std::size_t i) {
    std::ostringstream os;
    os << std::setw(3) << std::setfill('0') << i;
    return os.str();
}

ordered_json targets_to_json(const Matrix& targets) {
    ordered_json rows = ordered_json::array();
    for (std::size_t i = 0; i < targets.rows(); ++i) {
        ordered_json row = ordered_json::array();
        for (std::size_t j = 0; j < targets.cols(); ++j)
            row.push_back(targets(i, j));
        rows.push_back(row);
    }
    return rows;
}

Matrix targets_from_json(const ordered_json& rows, std::size_t n_targets) {
    Matrix out(rows.size(), n_targets);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < n_targets; ++j)
            out(i, j) = rows[i][j].get<double>();
    return out;
}

void write_split(const SampleSet& set, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (std::size_t i = 0; i < set.size(); ++i) {
        save_cube(set.cubes[i], dir / ("cube_" + padded(i) + ".hsc"));
        save_cube(set.masks[i], dir / ("mask_" + padded(i) + ".hsc"));
    }
}

SampleSet load_split(const std::filesystem::path& dir, std::size_t count) {
    SampleSet set;
    for (std::size_t i = 0; i < count; ++i) {
        set.cubes.push_back(load_cube(dir / ("cube_" + padded(i) + ".hsc")));
        set.masks.push_back(load_cube(dir / ("mask_" + padded(i) + ".hsc")));
    }
    return set;
}

}  // namespace

void write_dataset(const SynthDataset& dataset,
                   const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_split(dataset.train, dir / "train");
    write_split(dataset.test, dir / "test");

    ordered_json j;
    j["kind"] = "dataset";
    j["task"] = dataset.params.task;
    j["n_train"] = dataset.params.n_train;
    j["n_test"] = dataset.params.n_test;
    j["height"] = dataset.params.height;
    j["width"] = dataset.params.width;
    j["bands"] = dataset.params.bands;
    j["photons"] = dataset.params.photons;
    j["insert_prob"] = dataset.params.insert_prob;
    j["seed"] = dataset.params.seed;
    j["target_names"] = dataset.train.target_names;
    j["targets_train"] = targets_to_json(dataset.train.targets);
    j["targets_test"] = targets_to_json(dataset.test.targets);

    std::ofstream os(dir / "manifest.json", std::ios::trunc);
    if (!os)
        throw DataError("cannot write manifest in " + dir.string());
    os << j.dump(2) << "\n";
}

SynthDataset load_dataset(const std::filesystem::path& dir) {
    std::ifstream is(dir / "manifest.json");
    if (!is)
        throw DataError("no manifest.json in " + dir.string());
    ordered_json j;
    try {
        is >> j;
    } catch (const std::exception& e) {
        throw DataError("malformed manifest in " + dir.string() + ": " +
                        e.what());
    }
    if (!j.contains("kind") || j.at("kind") != "dataset")
        throw DataError(dir.string() + " does not hold a dataset manifest");

    SynthDataset out;
    out.params.task = j.at("task").get<std::string>();
    out.params.n_train = j.at("n_train").get<std::size_t>();
    out.params.n_test = j.at("n_test").get<std::size_t>();
    out.params.height = j.at("height").get<std::size_t>();
    out.params.width = j.at("width").get<std::size_t>();
    out.params.bands = j.at("bands").get<std::size_t>();
    out.params.photons = j.at("photons").get<double>();
    out.params.insert_prob = j.at("insert_prob").get<double>();
    out.params.seed = j.at("seed").get<std::uint64_t>();

    const auto names = j.at("target_names").get<std::vector<std::string>>();
    out.train = load_split(dir / "train", out.params.n_train);
    out.test = load_split(dir / "test", out.params.n_test);
    out.train.target_names = names;
    out.test.target_names = names;
    out.train.targets = targets_from_json(j.at("targets_train"), names.size());
    out.test.targets = targets_from_json(j.at("targets_test"), names.size());
    return out;
}

}  // namespace xrumap
