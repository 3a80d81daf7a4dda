#include "proxyfair/cli.hpp"

#include "proxyfair/dbscan.hpp"
#include "proxyfair/fairness.hpp"
#include "proxyfair/io.hpp"
#include "proxyfair/report.hpp"
#include "proxyfair/sampler.hpp"
#include "proxyfair/synth.hpp"
#include "proxyfair/tsne.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>

namespace proxyfair {

namespace {

namespace fs = std::filesystem;

struct ReduceArgs {
    std::string input;
    std::string format = "auto";
    std::string out;
    std::string trace;
    std::string init = "pca";
    double learning_rate = 0;
    TsneParams params;
};

struct ClusterArgs {
    std::string coords;
    std::string out;
    double eps = 0;
    std::size_t min_samples = 0;
};

struct TuneArgs {
    std::string coords;
    std::string out;
    std::string assignment_out;
    std::vector<double> eps_grid;
    std::vector<std::size_t> min_samples_grid;
    std::size_t k_min = 15;
    std::size_t k_max = 25;
};

struct SampleArgs {
    std::string method = "cluster";
    std::string assignment;
    std::string input;
    std::string out;
    SamplingPlan plan;
};

struct EvaluateArgs {
    std::string assignment;
    std::string metadata;
    std::vector<std::string> subsets;
    std::string out;
    std::string kde_dir;
    std::string svg_dir;
    std::vector<std::size_t> age_bins;
    EvaluateOptions options;
};

struct SynthArgs {
    std::string out_embeddings;
    std::string out_metadata;
    std::string out_modes;
    std::string composition = "skewed";
    SynthParams params;
};

EmbeddingFormat resolve_format(const std::string& format, const std::string& path) {
    if (format == "csv") {
        return EmbeddingFormat::Csv;
    }
    if (format == "femb") {
        return EmbeddingFormat::Femb;
    }
    if (format != "auto") {
        throw ParameterError("format", "must be auto, csv or femb");
    }
    return format_from_path(path);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) {
        throw DataError(ErrorKind::Io, "cannot write " + path.string());
    }
}

int cmd_reduce(ReduceArgs& a, std::ostream& out, std::ostream& err) {
    RunManifest manifest;
    manifest.command = "reduce";
    manifest.started = utc_timestamp();
    if (a.learning_rate != 0) {
        a.params.learning_rate = a.learning_rate;
    }
    if (a.init == "pca") {
        a.params.init = TsneInit::Pca;
    } else if (a.init == "random") {
        a.params.init = TsneInit::Random;
    } else {
        throw ParameterError("init", "must be pca or random");
    }
    const auto m = load_embeddings(a.input, resolve_format(a.format, a.input));
    validate(a.params, m.rows());
    manifest.add_input("embeddings", a.input);

    const auto result = run_tsne(m, a.params);
    save_coordinates(result.coords, a.out);
    const std::string trace_path = a.trace.empty() ? a.out + ".trace.csv" : a.trace;
    std::vector<double> iters, kls;
    for (const auto& t : result.trace) {
        iters.push_back(t.iteration);
        kls.push_back(t.kl);
    }
    save_numeric_csv(trace_path, {"iter", "kl"}, {iters, kls});
    if (result.unconverged_bandwidths > 0) {
        err << "warning: " << result.unconverged_bandwidths
            << " points did not reach the perplexity target during bandwidth search\n";
    }

    const auto& p = a.params;
    manifest.parameters = {{"input", a.input},
                           {"out", a.out},
                           {"trace", trace_path},
                           {"perplexity", p.perplexity},
                           {"iterations", p.iterations},
                           {"early_exaggeration", p.early_exaggeration},
                           {"early_exaggeration_iters", p.early_exaggeration_iters},
                           {"learning_rate", resolved_learning_rate(p, m.rows())},
                           {"momentum_initial", p.momentum_initial},
                           {"momentum_final", p.momentum_final},
                           {"momentum_switch_iter", p.momentum_switch_iter},
                           {"theta", p.theta},
                           {"init", a.init}};
    manifest.seeds = {p.seed};
    manifest.finished = utc_timestamp();
    write_manifest_sidecar(manifest, a.out);
    out << "reduced " << m.rows() << " x " << m.dim() << " -> " << a.out << '\n';
    return kExitOk;
}

int cmd_cluster(const ClusterArgs& a, std::ostream& out, std::ostream&) {
    RunManifest manifest;
    manifest.command = "cluster";
    manifest.started = utc_timestamp();
    const ClusterParams params{a.eps, a.min_samples};
    validate(params);
    const auto coords = load_coordinates(a.coords);
    manifest.add_input("coordinates", a.coords);
    const auto assignment = dbscan(coords, params);
    save_assignment(assignment, a.out);
    manifest.parameters = {{"coords", a.coords}, {"out", a.out}, {"eps", a.eps}, {"min_samples", a.min_samples}};
    manifest.finished = utc_timestamp();
    write_manifest_sidecar(manifest, a.out);
    out << "clusters " << assignment.cluster_count() << ", noise " << assignment.noise_count() << '\n';
    return kExitOk;
}

int cmd_tune(const TuneArgs& a, std::ostream& out, std::ostream& err) {
    RunManifest manifest;
    manifest.command = "tune";
    manifest.started = utc_timestamp();
    if (a.eps_grid.empty()) {
        throw ParameterError("eps-grid", "must not be empty");
    }
    if (a.min_samples_grid.empty()) {
        throw ParameterError("min-samples-grid", "must not be empty");
    }
    const auto coords = load_coordinates(a.coords);
    manifest.add_input("coordinates", a.coords);
    const auto result = tune_dbscan(coords, a.eps_grid, a.min_samples_grid, a.k_min, a.k_max);

    std::vector<double> eps, ms, k, noise;
    for (const auto& e : result.entries) {
        eps.push_back(e.eps);
        ms.push_back(static_cast<double>(e.min_samples));
        k.push_back(static_cast<double>(e.clusters));
        noise.push_back(static_cast<double>(e.noise));
    }
    save_numeric_csv(a.out, {"eps", "min_samples", "k", "noise"}, {eps, ms, k, noise});
    manifest.parameters = {{"coords", a.coords},         {"out", a.out},     {"eps_grid", a.eps_grid},
                           {"min_samples_grid", a.min_samples_grid}, {"k_min", a.k_min}, {"k_max", a.k_max}};
    if (result.feasible()) {
        const auto& best = result.entries[*result.chosen];
        manifest.parameters["chosen"] = {{"eps", best.eps}, {"min_samples", best.min_samples}};
    }
    manifest.finished = utc_timestamp();
    write_manifest_sidecar(manifest, a.out);

    if (!result.feasible()) {
        err << "error: no grid entry yields between " << a.k_min << " and " << a.k_max << " clusters\n";
        return kExitDegraded;
    }
    const auto& best = result.entries[*result.chosen];
    out << "chosen eps " << format_double(best.eps) << ", min_samples " << best.min_samples << ": " << best.clusters
        << " clusters, " << best.noise << " noise\n";
    if (!a.assignment_out.empty()) {
        save_assignment(dbscan(coords, {best.eps, best.min_samples}), a.assignment_out);
        write_manifest_sidecar(manifest, a.assignment_out);
    }
    return kExitOk;
}

int cmd_sample(const SampleArgs& a, std::ostream& out, std::ostream& err) {
    RunManifest manifest;
    manifest.command = "sample";
    manifest.started = utc_timestamp();
    validate(a.plan);
    SubsetSelection selection;
    if (a.method == "cluster") {
        if (a.assignment.empty()) {
            throw ParameterError("assignment", "required for --method cluster");
        }
        const auto assignment = load_assignment(a.assignment);
        manifest.add_input("assignment", a.assignment);
        selection = cluster_balanced_sample(assignment, a.plan);
    } else if (a.method == "random") {
        if (!a.assignment.empty()) {
            const auto assignment = load_assignment(a.assignment);
            manifest.add_input("assignment", a.assignment);
            selection = random_sample(assignment.ids(), a.plan, assignment.labels());
        } else if (!a.input.empty()) {
            const auto m = load_embeddings(a.input, format_from_path(a.input));
            manifest.add_input("embeddings", a.input);
            selection = random_sample(m.ids(), a.plan);
        } else {
            throw ParameterError("assignment", "random sampling needs --assignment or --input for the id list");
        }
    } else {
        throw ParameterError("method", "must be cluster or random");
    }
    save_subset(selection, a.out);

    Json takes = Json::object();
    for (const auto& [cluster, take] : selection.per_cluster_take) {
        takes[std::to_string(cluster)] = take;
    }
    manifest.parameters = {{"method", a.method},
                           {"fraction", a.plan.fraction},
                           {"include_noise", a.plan.include_noise},
                           {"out", a.out},
                           {"target_total", selection.target_total},
                           {"selected", selection.selected_ids.size()},
                           {"per_cluster_take", takes},
                           {"shortfall", selection.shortfall}};
    manifest.seeds = {a.plan.seed};
    manifest.finished = utc_timestamp();
    write_manifest_sidecar(manifest, a.out);

    out << "selected " << selection.selected_ids.size() << " of target " << selection.target_total << '\n';
    if (selection.shortfall) {
        err << "warning: target " << selection.target_total << " exceeds the sampled population; took all "
            << selection.selected_ids.size() << '\n';
        return kExitDegraded;
    }
    return kExitOk;
}

int cmd_evaluate(EvaluateArgs& a, std::ostream& out, std::ostream& err) {
    RunManifest manifest;
    manifest.command = "evaluate";
    manifest.started = utc_timestamp();
    const auto assignment = load_assignment(a.assignment);
    const auto table = load_metadata(a.metadata);
    manifest.add_input("assignment", a.assignment);
    manifest.add_input("metadata", a.metadata);

    std::vector<NamedSubset> subsets;
    for (const auto& spec : a.subsets) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
            throw ParameterError("subset", "expected NAME=PATH, got '" + spec + "'");
        }
        const auto name = spec.substr(0, eq);
        const auto path = spec.substr(eq + 1);
        subsets.push_back({name, load_subset_ids(path)});
        manifest.add_input("subset:" + name, path);
    }
    if (!a.age_bins.empty()) {
        a.options.age_edges = a.age_bins;
    }
    manifest.parameters = {{"out", a.out},
                           {"dataset", a.options.dataset},
                           {"baseline", a.options.baseline},
                           {"age_bins", a.options.age_edges},
                           {"kde_grid", a.options.kde_grid}};

    const auto ev = evaluate(assignment, table, subsets, a.options, manifest.to_json(false));
    write_text(a.out, ev.report.dump(2) + "\n");

    const fs::path kde_dir = a.kde_dir.empty() ? fs::path(a.out).parent_path() : fs::path(a.kde_dir);
    if (!kde_dir.empty()) {
        fs::create_directories(kde_dir);
    }
    for (const auto& s : ev.kde) {
        save_numeric_csv(kde_dir / s.file_name(), {"x", "density"}, {s.curve.grid, s.curve.density});
    }
    if (!a.svg_dir.empty()) {
        fs::create_directories(a.svg_dir);
        const auto compositions = cluster_composition(assignment, table, a.options.age_edges);
        write_text(fs::path(a.svg_dir) / ("composition_" + a.options.dataset + ".svg"),
                   render_composition_svg(compositions, a.options.dataset + ": gender share per cluster"));
        for (const std::string gender : {"F", "M", "all"}) {
            std::vector<KdeSeries> facet;
            for (const auto& s : ev.kde) {
                if (s.gender == gender) {
                    facet.push_back(s);
                }
            }
            if (!facet.empty()) {
                write_text(fs::path(a.svg_dir) / ("kde_" + a.options.dataset + "_" + gender + ".svg"),
                           render_kde_svg(facet, a.options.dataset + ": age density, gender " + gender));
            }
        }
    }
    manifest.finished = utc_timestamp();
    write_manifest_sidecar(manifest, a.out);

    for (const auto& w : ev.report["warnings"]) {
        err << "warning: " << w.get<std::string>() << '\n';
    }
    out << "report -> " << a.out << '\n';
    return ev.degraded ? kExitDegraded : kExitOk;
}

int cmd_synth(SynthArgs& a, std::ostream& out, std::ostream&) {
    RunManifest manifest;
    manifest.command = "synth";
    manifest.started = utc_timestamp();
    if (a.composition == "skewed") {
        a.params.composition = SynthComposition::Skewed;
    } else if (a.composition == "mixed") {
        a.params.composition = SynthComposition::Mixed;
    } else {
        throw ParameterError("composition", "must be skewed or mixed");
    }
    const auto data = synthesize(a.params);
    save_embeddings(data.embeddings, a.out_embeddings, format_from_path(a.out_embeddings));
    save_metadata(data.metadata, a.out_metadata);
    if (!a.out_modes.empty()) {
        save_assignment(ClusterAssignment(data.embeddings.ids(), data.modes), a.out_modes);
    }
    const auto& p = a.params;
    manifest.parameters = {{"samples", p.samples},
                           {"modes", p.modes},
                           {"dim", p.dim},
                           {"female_fraction", p.female_fraction},
                           {"purity", p.purity},
                           {"composition", a.composition},
                           {"separation", p.separation},
                           {"out_embeddings", a.out_embeddings},
                           {"out_metadata", a.out_metadata}};
    manifest.seeds = {p.seed};
    manifest.finished = utc_timestamp();
    write_manifest_sidecar(manifest, a.out_embeddings);
    out << "synthesized " << p.samples << " samples in " << p.modes << " modes\n";
    return kExitOk;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Proxy demographic groups from image embeddings: reduce, cluster, sample, evaluate"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    ReduceArgs reduce;
    auto* r = app.add_subcommand("reduce", "t-SNE reduction of an embedding file to 2-D coordinates");
    r->add_option("--input", reduce.input, "Embedding file (.csv or .femb)")->required();
    r->add_option("--format", reduce.format, "auto, csv or femb")->capture_default_str();
    r->add_option("--out", reduce.out, "Coordinates CSV (id,x,y)")->required();
    r->add_option("--trace", reduce.trace, "Objective trace CSV (default <out>.trace.csv)");
    r->add_option("--perplexity", reduce.params.perplexity)->capture_default_str();
    r->add_option("--iterations", reduce.params.iterations)->capture_default_str();
    r->add_option("--early-exaggeration", reduce.params.early_exaggeration)->capture_default_str();
    r->add_option("--early-exaggeration-iters", reduce.params.early_exaggeration_iters)->capture_default_str();
    r->add_option("--learning-rate", reduce.learning_rate, "Default max(n/12, 50)");
    r->add_option("--momentum-initial", reduce.params.momentum_initial)->capture_default_str();
    r->add_option("--momentum-final", reduce.params.momentum_final)->capture_default_str();
    r->add_option("--momentum-switch-iter", reduce.params.momentum_switch_iter)->capture_default_str();
    r->add_option("--theta", reduce.params.theta, "Barnes-Hut accuracy, 0 = exact")->capture_default_str();
    r->add_option("--init", reduce.init, "pca or random")->capture_default_str();
    r->add_option("--trace-every", reduce.params.trace_every)->capture_default_str();
    r->add_option("--threads", reduce.params.threads, "0 = all cores")->capture_default_str();
    r->add_option("--seed", reduce.params.seed)->capture_default_str();

    ClusterArgs cluster;
    auto* c = app.add_subcommand("cluster", "DBSCAN over reduced coordinates");
    c->add_option("--coords", cluster.coords)->required();
    c->add_option("--eps", cluster.eps)->required();
    c->add_option("--min-samples", cluster.min_samples)->required();
    c->add_option("--out", cluster.out, "Assignment CSV (id,cluster)")->required();

    TuneArgs tune;
    auto* t = app.add_subcommand("tune", "Grid search of DBSCAN parameters for a cluster-count band");
    t->add_option("--coords", tune.coords)->required();
    t->add_option("--eps-grid", tune.eps_grid)->delimiter(',')->required();
    t->add_option("--min-samples-grid", tune.min_samples_grid)->delimiter(',')->required();
    t->add_option("--k-min", tune.k_min)->capture_default_str();
    t->add_option("--k-max", tune.k_max)->capture_default_str();
    t->add_option("--out", tune.out, "Tune table CSV (eps,min_samples,k,noise)")->required();
    t->add_option("--assignment-out", tune.assignment_out, "Also write the chosen assignment");

    SampleArgs sample;
    auto* s = app.add_subcommand("sample", "Cluster-balanced or uniform random subset");
    s->add_option("--method", sample.method, "cluster or random")->capture_default_str();
    s->add_option("--fraction", sample.plan.fraction)->capture_default_str();
    s->add_option("--seed", sample.plan.seed)->capture_default_str();
    s->add_option("--assignment", sample.assignment, "Assignment CSV");
    s->add_option("--input", sample.input, "Embedding file supplying ids for random sampling");
    s->add_flag("--include-noise", sample.plan.include_noise, "Sample noise as its own group");
    s->add_option("--out", sample.out, "Subset CSV (id,cluster)")->required();

    EvaluateArgs evaluate_args;
    auto* e = app.add_subcommand("evaluate", "Compositions, representation gaps, fairness gaps and KDE curves");
    e->add_option("--assignment", evaluate_args.assignment)->required();
    e->add_option("--metadata", evaluate_args.metadata)->required();
    e->add_option("--subset", evaluate_args.subsets, "NAME=PATH, repeatable");
    e->add_option("--baseline", evaluate_args.options.baseline)->capture_default_str();
    e->add_option("--dataset", evaluate_args.options.dataset)->capture_default_str();
    e->add_option("--age-bins", evaluate_args.age_bins, "Comma-separated bin edges starting at 0")->delimiter(',');
    e->add_option("--kde-grid", evaluate_args.options.kde_grid)->capture_default_str();
    e->add_option("--out", evaluate_args.out, "Report JSON")->required();
    e->add_option("--kde-dir", evaluate_args.kde_dir, "Directory for KDE CSVs (default: next to the report)");
    e->add_option("--svg-dir", evaluate_args.svg_dir, "Also render SVG charts here");

    SynthArgs synth;
    auto* y = app.add_subcommand("synth", "Planted-cluster synthetic embeddings and metadata");
    y->add_option("--samples", synth.params.samples)->capture_default_str();
    y->add_option("--modes", synth.params.modes)->capture_default_str();
    y->add_option("--dim", synth.params.dim)->capture_default_str();
    y->add_option("--female-fraction", synth.params.female_fraction)->capture_default_str();
    y->add_option("--purity", synth.params.purity)->capture_default_str();
    y->add_option("--composition", synth.composition, "skewed or mixed")->capture_default_str();
    y->add_option("--separation", synth.params.separation)->capture_default_str();
    y->add_option("--seed", synth.params.seed)->capture_default_str();
    y->add_option("--out-embeddings", synth.out_embeddings)->required();
    y->add_option("--out-metadata", synth.out_metadata)->required();
    y->add_option("--out-modes", synth.out_modes, "True generating mode per sample, as an assignment CSV");

    std::vector<const char*> argv;
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << kToolVersion << '\n';
        return kExitOk;
    } catch (const CLI::ParseError& ex) {
        err << "error: " << ex.what() << '\n';
        return kExitInvalid;
    }

    try {
        if (r->parsed()) return cmd_reduce(reduce, out, err);
        if (c->parsed()) return cmd_cluster(cluster, out, err);
        if (t->parsed()) return cmd_tune(tune, out, err);
        if (s->parsed()) return cmd_sample(sample, out, err);
        if (e->parsed()) return cmd_evaluate(evaluate_args, out, err);
        if (y->parsed()) return cmd_synth(synth, out, err);
    } catch (const ParameterError& ex) {
        err << "error: " << ex.what() << '\n';
        return kExitInvalid;
    } catch (const DataError& ex) {
        err << "error: " << to_string(ex.kind()) << ": " << ex.what() << '\n';
        return kExitInvalid;
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << '\n';
        return kExitFailure;
    }
    return kExitInvalid;
}

} // namespace proxyfair
