#ifndef PROXYFAIR_REPORT_HPP
#define PROXYFAIR_REPORT_HPP

#include "proxyfair/dbscan.hpp"
#include "proxyfair/fairness.hpp"
#include "proxyfair/types.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace proxyfair {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kReportSchemaVersion = 1;

using Json = nlohmann::ordered_json;

struct InputDigest {
    std::string role;
    std::string path;
    std::string digest;
};

/// FNV-1a 64-bit content hash, rendered "fnv1a64:<16 hex digits>".
std::string file_digest(const std::filesystem::path& path);

struct RunManifest {
    std::string command;
    Json parameters = Json::object();
    std::vector<InputDigest> inputs;
    std::vector<std::uint64_t> seeds;
    std::string started;
    std::string finished;

    void add_input(std::string role, const std::filesystem::path& path);

    /// Timestamps are left out of the embedded form so metric outputs stay
    /// byte-identical across reruns; the sidecar file keeps them.
    Json to_json(bool with_timestamps) const;
};

/// ISO-8601 UTC timestamp of the current time.
std::string utc_timestamp();

/// Writes `<output>.manifest.json` next to an emitted artefact.
void write_manifest_sidecar(const RunManifest& manifest, const std::filesystem::path& output);

struct NamedSubset {
    std::string name;
    std::vector<std::string> ids;
};

struct EvaluateOptions {
    std::string dataset = "dataset";
    /// Subset every other subset is compared against.
    std::string baseline = "random";
    std::vector<std::size_t> age_edges{std::begin(kDefaultAgeBins), std::end(kDefaultAgeBins)};
    std::size_t kde_grid = 512;
};

/// One age-distribution curve for a (dataset, method, gender) facet.
struct KdeSeries {
    std::string dataset;
    std::string method;
    std::string gender;
    std::size_t samples = 0;
    KdeCurve curve;

    std::string file_name() const;
};

struct Evaluation {
    Json report;
    std::vector<KdeSeries> kde;
    /// No usable gender attribute: gender sections were left out.
    bool degraded = false;
};

/**
 * Assembles the evaluation report: cluster compositions, subset gender
 * representation with gaps and improvements against the baseline, fairness
 * gaps over proxy clusters and true gender when labels and predictions
 * exist, and age KDE curves per subset and gender. The full population is
 * always included as the subset "population".
 */
Evaluation evaluate(const ClusterAssignment& assignment, const MetadataTable& table,
                    std::span<const NamedSubset> subsets, const EvaluateOptions& options, const Json& manifest);

Json to_json(const GapResult& gap);
Json to_json(const GroupOutcome& g);
Json to_json(const ClusterComposition& c, bool with_gender);
Json to_json(const Representation& r);

/// Line chart of KDE curves, one polyline per series.
std::string render_kde_svg(std::span<const KdeSeries> series, const std::string& title);

/// Stacked female/male bars per cluster.
std::string render_composition_svg(std::span<const ClusterComposition> compositions, const std::string& title);

} // namespace proxyfair

#endif
