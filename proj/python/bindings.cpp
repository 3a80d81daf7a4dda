#include "proxyfair/cli.hpp"
#include "proxyfair/dbscan.hpp"
#include "proxyfair/fairness.hpp"
#include "proxyfair/io.hpp"
#include "proxyfair/report.hpp"
#include "proxyfair/sampler.hpp"
#include "proxyfair/synth.hpp"
#include "proxyfair/tsne.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

namespace py = pybind11;
using namespace proxyfair;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<std::string> default_ids(std::size_t n) {
    std::vector<std::string> ids;
    ids.reserve(n);
    for (std::size_t i = 0; i < n; ++i) ids.push_back(std::to_string(i));
    return ids;
}

EmbeddingMatrix to_matrix(const Array& a, std::optional<std::vector<std::string>> ids) {
    if (a.ndim() != 2) throw ParameterError("embeddings", "expected a 2-D array");
    const auto n = static_cast<std::size_t>(a.shape(0));
    const auto d = static_cast<std::size_t>(a.shape(1));
    std::vector<double> values(a.data(), a.data() + n * d);
    return EmbeddingMatrix(ids ? std::move(*ids) : default_ids(n), std::move(values), d);
}

Array from_matrix(const EmbeddingMatrix& m) {
    Array out({m.rows(), m.dim()});
    std::copy(m.values().begin(), m.values().end(), out.mutable_data());
    return out;
}

std::vector<Point2> to_points(const Array& a) {
    if (a.ndim() != 2 || a.shape(1) != 2) throw ParameterError("coords", "expected an (n, 2) array");
    std::vector<Point2> pts(static_cast<std::size_t>(a.shape(0)));
    for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = {a.data()[2 * i], a.data()[2 * i + 1]};
    return pts;
}

Array from_points(std::span<const Point2> pts) {
    Array out({pts.size(), std::size_t{2}});
    auto* p = out.mutable_data();
    for (std::size_t i = 0; i < pts.size(); ++i) {
        p[2 * i] = pts[i].x;
        p[2 * i + 1] = pts[i].y;
    }
    return out;
}

std::optional<Gender> parse_gender(const std::optional<std::string>& g) {
    if (!g) return std::nullopt;
    if (*g == "F") return Gender::Female;
    if (*g == "M") return Gender::Male;
    throw ParameterError("gender", "expected F, M or None, got '" + *g + "'");
}

template <typename T>
py::array_t<T> to_array(const std::vector<T>& v) {
    py::array_t<T> out(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

py::dict gap_dict(const GapResult& g) {
    py::dict d;
    d["gap"] = g.value;
    d["compared"] = g.compared;
    d["excluded"] = g.excluded;
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Proxy demographic groups from embeddings: t-SNE, DBSCAN, balanced sampling, fairness gaps.";

    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<ParameterError>(m, "ParameterError", PyExc_ValueError);

    m.def(
        "calibrate_bandwidth",
        [](std::vector<double> distances, double perplexity) {
            const auto r = calibrate_bandwidth(distances, perplexity);
            py::dict d;
            d["sigma"] = r.sigma;
            d["probabilities"] = r.probabilities;
            d["entropy"] = r.entropy;
            d["converged"] = r.converged;
            return d;
        },
        py::arg("distances"), py::arg("perplexity"));

    m.def(
        "tsne",
        [](const Array& x, double perplexity, int iterations, double theta, std::uint64_t seed,
           std::optional<double> learning_rate, int early_exaggeration_iters, double early_exaggeration,
           std::string init) {
            TsneParams p;
            p.perplexity = perplexity;
            p.iterations = iterations;
            p.theta = theta;
            p.seed = seed;
            p.learning_rate = learning_rate;
            p.early_exaggeration_iters = early_exaggeration_iters;
            p.early_exaggeration = early_exaggeration;
            p.trace_every = 0;
            if (init == "random") {
                p.init = TsneInit::Random;
            } else if (init != "pca") {
                throw ParameterError("init", "expected 'pca' or 'random'");
            }
            const auto matrix = to_matrix(x, std::nullopt);
            std::optional<TsneResult> r;
            {
                py::gil_scoped_release release;
                r.emplace(run_tsne(matrix, p));
            }
            return from_points(r->coords.coords());
        },
        py::arg("embeddings"), py::arg("perplexity") = 30.0, py::arg("iterations") = 1000, py::arg("theta") = 0.5,
        py::arg("seed") = 0, py::arg("learning_rate") = py::none(), py::arg("early_exaggeration_iters") = 250,
        py::arg("early_exaggeration") = 12.0, py::arg("init") = "pca");

    m.def(
        "dbscan",
        [](const Array& coords, double eps, std::size_t min_samples) {
            const auto labels = dbscan_labels(to_points(coords), {eps, min_samples});
            return to_array(labels);
        },
        py::arg("coords"), py::arg("eps"), py::arg("min_samples"));

    m.def(
        "tune_dbscan",
        [](const Array& coords, std::vector<double> eps_grid, std::vector<std::size_t> min_samples_grid,
           std::size_t k_min, std::size_t k_max) {
            const auto pts = to_points(coords);
            const ReducedCoordinates rc(default_ids(pts.size()), pts);
            const auto r = tune_dbscan(rc, eps_grid, min_samples_grid, k_min, k_max);
            py::list rows;
            for (const auto& e : r.entries) {
                py::dict d;
                d["eps"] = e.eps;
                d["min_samples"] = e.min_samples;
                d["k"] = e.clusters;
                d["noise"] = e.noise;
                rows.append(d);
            }
            return py::make_tuple(rows, r.chosen);
        },
        py::arg("coords"), py::arg("eps_grid"), py::arg("min_samples_grid"), py::arg("k_min"), py::arg("k_max"));

    m.def("target_total", &target_total, py::arg("fraction"), py::arg("n_total"));

    m.def(
        "allocate_quotas",
        [](std::map<int, std::size_t> sizes, std::size_t target) {
            std::map<int, std::size_t> out;
            for (const auto& q : allocate_quotas({sizes.begin(), sizes.end()}, target)) out[q.cluster] = q.take;
            return out;
        },
        py::arg("cluster_sizes"), py::arg("target"));

    m.def(
        "cluster_balanced_sample",
        [](std::vector<std::string> ids, std::vector<int> labels, double fraction, std::uint64_t seed,
           bool include_noise) {
            const ClusterAssignment a(std::move(ids), std::move(labels));
            const auto s = cluster_balanced_sample(a, {fraction, seed, include_noise});
            return py::make_tuple(s.selected_ids, s.shortfall);
        },
        py::arg("ids"), py::arg("labels"), py::arg("fraction") = 0.3, py::arg("seed") = 0,
        py::arg("include_noise") = false);

    m.def(
        "random_sample",
        [](std::vector<std::string> ids, double fraction, std::uint64_t seed) {
            return random_sample(ids, {fraction, seed, false}).selected_ids;
        },
        py::arg("ids"), py::arg("fraction") = 0.3, py::arg("seed") = 0);

    m.def(
        "fairness_gaps",
        [](std::vector<std::string> groups, std::vector<std::optional<int>> labels,
           std::vector<std::optional<int>> predictions) {
            if (labels.size() != groups.size() || predictions.size() != groups.size()) {
                throw ParameterError("groups", "groups, labels and predictions must have equal length");
            }
            std::vector<MetadataRecord> records(groups.size());
            std::vector<const MetadataRecord*> ptrs;
            for (std::size_t i = 0; i < groups.size(); ++i) {
                records[i].label = labels[i];
                records[i].prediction = predictions[i];
                ptrs.push_back(&records[i]);
            }
            const auto g = group_outcomes(groups, ptrs);
            const auto eo = equalized_odds_gap(g);
            py::dict d;
            d["demographic_parity"] = gap_dict(demographic_parity_gap(g));
            d["tpr"] = gap_dict(eo.tpr);
            d["fpr"] = gap_dict(eo.fpr);
            d["predictive_parity"] = gap_dict(predictive_parity_gap(g));
            return d;
        },
        py::arg("groups"), py::arg("labels"), py::arg("predictions"));

    m.def(
        "representation_gap",
        [](std::vector<std::optional<std::string>> genders) {
            std::vector<MetadataRecord> records(genders.size());
            for (std::size_t i = 0; i < genders.size(); ++i) records[i].gender = parse_gender(genders[i]);
            const auto ids = default_ids(genders.size());
            const MetadataTable t(ids, std::move(records), {true, false, false, false, false});
            return representation_gap(t, ids, Attribute::Gender);
        },
        py::arg("genders"));

    m.def("proportion_gap", &proportion_gap, py::arg("a"), py::arg("b"));
    m.def("gap_improvement", &gap_improvement, py::arg("gap_baseline"), py::arg("gap_method"));
    m.def("silverman_bandwidth", [](std::vector<double> v) { return silverman_bandwidth(v); }, py::arg("values"));

    m.def(
        "kde",
        [](std::vector<double> values, std::optional<double> bandwidth, std::size_t grid_size) {
            const auto c = kde(values, bandwidth, grid_size);
            return py::make_tuple(to_array(c.grid), to_array(c.density), c.bandwidth);
        },
        py::arg("values"), py::arg("bandwidth") = py::none(), py::arg("grid_size") = 512);

    m.def(
        "synthesize",
        [](std::size_t samples, std::size_t modes, std::size_t dim, double female_fraction, double purity,
           double separation, std::uint64_t seed) {
            SynthParams p;
            p.samples = samples;
            p.modes = modes;
            p.dim = dim;
            p.female_fraction = female_fraction;
            p.purity = purity;
            p.separation = separation;
            p.seed = seed;
            const auto s = synthesize(p);
            std::vector<std::optional<std::string>> genders;
            std::vector<std::optional<int>> ages;
            for (const auto& r : s.metadata.records()) {
                genders.push_back(r.gender ? std::optional<std::string>(to_string(*r.gender)) : std::nullopt);
                ages.push_back(r.age);
            }
            py::dict d;
            d["ids"] = s.embeddings.ids();
            d["embeddings"] = from_matrix(s.embeddings);
            d["gender"] = genders;
            d["age"] = ages;
            d["modes"] = s.modes;
            return d;
        },
        py::arg("samples") = 10000, py::arg("modes") = 20, py::arg("dim") = 32, py::arg("female_fraction") = 0.3,
        py::arg("purity") = 0.95, py::arg("separation") = 10.0, py::arg("seed") = 0);

    m.def(
        "load_embeddings",
        [](const std::filesystem::path& path) {
            const auto e = load_embeddings(path, format_from_path(path));
            return py::make_tuple(e.ids(), from_matrix(e));
        },
        py::arg("path"));

    m.def(
        "save_embeddings",
        [](const std::filesystem::path& path, std::vector<std::string> ids, const Array& x) {
            save_embeddings(to_matrix(x, std::move(ids)), path, format_from_path(path));
        },
        py::arg("path"), py::arg("ids"), py::arg("embeddings"));

    m.def(
        "run_cli",
        [](std::vector<std::string> args) {
            args.insert(args.begin(), "proxyfair");
            std::ostringstream out, err;
            const int code = run_cli(args, out, err);
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"));

    m.attr("__version__") = kToolVersion;
}
