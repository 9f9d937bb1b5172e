#ifndef XRUMAP_MODEL_IO_HPP
#define XRUMAP_MODEL_IO_HPP

#include <filesystem>
#include <string>

#include "xrumap/baselines.hpp"
#include "xrumap/eval.hpp"
#include "xrumap/manifold.hpp"
#include "xrumap/parametric.hpp"

namespace xrumap {

// Small models (PCA, NMF) are single JSON documents with base64 payloads.
void save_pca(const PcaModel& model, const std::filesystem::path& path);
PcaModel load_pca(const std::filesystem::path& path);

void save_nmf(const NmfModel& model, const std::filesystem::path& path);
NmfModel load_nmf(const std::filesystem::path& path);

// UMAP and encoder models use a JSON descriptor plus a .bin sidecar next to
// it holding the raw arrays (training spectra, coordinates, graph, layers).
void save_umap(const UmapModel& model, const std::filesystem::path& json_path);
UmapModel load_umap(const std::filesystem::path& json_path);

void save_encoder(const EncoderNet& net, double curve_a, double curve_b,
                  const std::filesystem::path& json_path);
struct LoadedEncoder {
    EncoderNet net;
    double curve_a = 0.0, curve_b = 0.0;
};
LoadedEncoder load_encoder(const std::filesystem::path& json_path);

// Generic reducer-model probe: returns the "kind" field of a model JSON.
std::string model_kind(const std::filesystem::path& json_path);

void save_report_json(const EvalReport& report,
                      const std::filesystem::path& path);
EvalReport load_report_json(const std::filesystem::path& path);
void save_report_csv(const EvalReport& report,
                     const std::filesystem::path& path);

void save_compare_csv(const CompareResult& result,
                      const std::filesystem::path& path);
void save_compare_json(const CompareResult& result,
                       const std::filesystem::path& path);

}  // namespace xrumap

#endif
