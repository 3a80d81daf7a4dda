#include "proxyfair/report.hpp"


#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>

namespace proxyfair {

namespace {

Json optional_number(const std::optional<double>& v) {
    return v ? Json(*v) : Json(nullptr);
}

bool any_gender(const MetadataTable& t) {
    return std::any_of(t.records().begin(), t.records().end(), [](const auto& r) { return r.gender.has_value(); });
}

bool any_age(const MetadataTable& t) {
    return std::any_of(t.records().begin(), t.records().end(), [](const auto& r) { return r.age.has_value(); });
}

bool any_outcome(const MetadataTable& t) {
    return std::any_of(t.records().begin(), t.records().end(),
                       [](const auto& r) { return r.label.has_value() && r.prediction.has_value(); });
}

Json fairness_block(const GroupedOutcomes& groups, Json& warnings, const std::string& grouping) {
    Json block = Json::object();
    block["groups"] = Json::array();
    for (const auto& g : groups) {
        block["groups"].push_back(to_json(g));
    }
    const auto dp = demographic_parity_gap(groups);
    const auto eo = equalized_odds_gap(groups);
    const auto pp = predictive_parity_gap(groups);
    block["demographic_parity"] = to_json(dp);
    block["equalized_odds"] = {{"tpr", to_json(eo.tpr)}, {"fpr", to_json(eo.fpr)}};
    block["predictive_parity"] = to_json(pp);
    auto note = [&](const GapResult& gap, const char* metric) {
        if (!gap.excluded.empty()) {
            std::string list;
            for (const auto& e : gap.excluded) {
                list += (list.empty() ? "" : ",") + e;
            }
            warnings.push_back(grouping + " " + metric + ": excluded groups without a denominator: " + list);
        }
    };
    note(dp, "demographic_parity");
    note(eo.tpr, "equalized_odds.tpr");
    note(eo.fpr, "equalized_odds.fpr");
    note(pp, "predictive_parity");
    return block;
}

std::string escape_xml(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

} // namespace

std::string file_digest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError(ErrorKind::Io, "cannot open " + path.string());
    }
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        for (std::streamsize k = 0; k < in.gcount(); ++k) {
            h ^= static_cast<unsigned char>(buf[k]);
            h *= 0x100000001b3ull;
        }
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    return std::string("fnv1a64:") + hex;
}

void RunManifest::add_input(std::string role, const std::filesystem::path& path) {
    inputs.push_back({std::move(role), path.string(), file_digest(path)});
}

Json RunManifest::to_json(bool with_timestamps) const {
    Json j;
    j["command"] = command;
    j["tool_version"] = kToolVersion;
    j["parameters"] = parameters;
    j["inputs"] = Json::array();
    for (const auto& in : inputs) {
        j["inputs"].push_back({{"role", in.role}, {"path", in.path}, {"digest", in.digest}});
    }
    j["seeds"] = seeds;
    if (with_timestamps) {
        j["started"] = started;
        j["finished"] = finished;
    }
    return j;
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_manifest_sidecar(const RunManifest& manifest, const std::filesystem::path& output) {
    auto path = output;
    path += ".manifest.json";
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << manifest.to_json(true).dump(2) << '\n';
    if (!out) {
        throw DataError(ErrorKind::Io, "cannot write " + path.string());
    }
}

Json to_json(const GapResult& gap) {
    return {{"gap", optional_number(gap.value)}, {"compared", gap.compared}, {"excluded", gap.excluded}};
}

Json to_json(const GroupOutcome& g) {
    return {{"group", g.group},
            {"size", g.size},
            {"with_prediction", g.with_prediction},
            {"positive_predictions", g.positive_predictions},
            {"tp", g.tp},
            {"fp", g.fp},
            {"tn", g.tn},
            {"fn", g.fn},
            {"selection_rate", optional_number(g.selection_rate())},
            {"tpr", optional_number(g.tpr())},
            {"fpr", optional_number(g.fpr())},
            {"ppv", optional_number(g.ppv())}};
}

Json to_json(const ClusterComposition& c, bool with_gender) {
    Json j;
    j["cluster"] = c.cluster;
    j["size"] = c.size;
    if (with_gender) {
        j["female"] = c.female;
        j["male"] = c.male;
        j["missing_gender"] = c.missing_gender;
        j["female_share"] = optional_number(c.female_share);
        j["male_share"] = optional_number(c.male_share);
    }
    j["age_histogram"] = c.age_histogram;
    j["missing_age"] = c.missing_age;
    return j;
}

Json to_json(const Representation& r) {
    return {{"female", r.female},
            {"male", r.male},
            {"unknown_gender", r.unknown},
            {"female_share", optional_number(r.female_share)},
            {"male_share", optional_number(r.male_share)},
            {"gap", optional_number(r.gap)}};
}

std::string KdeSeries::file_name() const {
    return "kde_" + dataset + "_" + method + "_" + gender + ".csv";
}

Evaluation evaluate(const ClusterAssignment& assignment, const MetadataTable& table,
                    std::span<const NamedSubset> subsets, const EvaluateOptions& options, const Json& manifest) {
    Evaluation ev;
    const bool has_gender = any_gender(table);
    const bool has_age = any_age(table);
    const bool has_outcomes = any_outcome(table);
    ev.degraded = !has_gender;

    Json warnings = Json::array();
    const auto view = join(assignment.ids(), table);
    if (!view.missing_metadata.empty()) {
        warnings.push_back(std::to_string(view.missing_metadata.size()) + " assigned samples have no metadata record");
    }
    if (!has_gender) {
        warnings.push_back("metadata has no known gender values; gender sections omitted");
    }

    std::vector<NamedSubset> all;
    all.push_back({"population", assignment.ids()});
    for (const auto& s : subsets) {
        if (s.name == "population") {
            throw ParameterError("subset", "the name 'population' is reserved");
        }
        all.push_back(s);
    }

    Json& report = ev.report;
    report["schema_version"] = kReportSchemaVersion;
    report["manifest"] = manifest;

    const auto compositions = cluster_composition(assignment, table, options.age_edges);
    Json clusters;
    clusters["count"] = assignment.cluster_count();
    clusters["noise"] = assignment.noise_count();
    clusters["age_bins"] = age_bin_labels(options.age_edges);
    clusters["composition"] = Json::array();
    for (const auto& c : compositions) {
        clusters["composition"].push_back(to_json(c, has_gender));
    }
    report["clusters"] = clusters;

    Json subset_block;
    subset_block["baseline"] = options.baseline;
    subset_block["items"] = Json::array();
    std::vector<std::optional<double>> gaps;
    for (const auto& s : all) {
        Json item;
        item["name"] = s.name;
        item["size"] = s.ids.size();
        std::size_t missing = 0;
        for (const auto& id : s.ids) {
            missing += table.find(id) == nullptr;
        }
        item["missing_metadata"] = missing;
        const auto rep = representation(table, s.ids, Attribute::Gender);
        gaps.push_back(rep.gap);
        if (has_gender) {
            item["gender"] = to_json(rep);
        }
        subset_block["items"].push_back(item);
    }
    subset_block["comparisons"] = Json::array();
    const auto base = std::find_if(all.begin(), all.end(), [&](const auto& s) { return s.name == options.baseline; });
    if (has_gender && base != all.end()) {
        const auto b = static_cast<std::size_t>(base - all.begin());
        for (std::size_t k = 1; k < all.size(); ++k) {
            if (k == b || !gaps[b] || !gaps[k]) {
                continue;
            }
            subset_block["comparisons"].push_back({{"baseline", all[b].name},
                                                   {"method", all[k].name},
                                                   {"gap_baseline", *gaps[b]},
                                                   {"gap_method", *gaps[k]},
                                                   {"improvement", gap_improvement(*gaps[b], *gaps[k])}});
        }
    } else if (!subsets.empty() && base == all.end()) {
        warnings.push_back("baseline subset '" + options.baseline + "' not supplied; no comparisons");
    }
    report["subsets"] = subset_block;

    Json metrics = Json::object();
    metrics["available"] = has_outcomes;
    if (has_outcomes) {
        metrics["proxy_clusters"] = fairness_block(group_outcomes(assignment, table), warnings, "proxy_clusters");
        if (has_gender) {
            metrics["gender"] =
                fairness_block(group_outcomes_by_gender(assignment.ids(), table), warnings, "gender");
        }
    }
    report["metrics"] = metrics;

    Json kde_block = Json::array();
    if (has_age) {
        const std::vector<std::pair<std::string, std::optional<Gender>>> facets =
            has_gender ? std::vector<std::pair<std::string, std::optional<Gender>>>{{"F", Gender::Female},
                                                                                    {"M", Gender::Male}}
                       : std::vector<std::pair<std::string, std::optional<Gender>>>{{"all", std::nullopt}};
        for (const auto& s : all) {
            for (const auto& [label, gender] : facets) {
                std::vector<double> ages;
                for (const auto& id : s.ids) {
                    const auto* rec = table.find(id);
                    if (rec != nullptr && rec->age && (!gender || rec->gender == gender)) {
                        ages.push_back(*rec->age);
                    }
                }
                if (ages.empty()) {
                    continue;
                }
                KdeSeries series{options.dataset, s.name, label, ages.size(),
                                 kde(ages, std::nullopt, options.kde_grid)};
                kde_block.push_back({{"dataset", series.dataset},
                                     {"method", series.method},
                                     {"gender", series.gender},
                                     {"samples", series.samples},
                                     {"bandwidth", series.curve.bandwidth},
                                     {"grid_points", series.curve.grid.size()},
                                     {"integral", integrate(series.curve)},
                                     {"file", series.file_name()}});
                ev.kde.push_back(std::move(series));
            }
        }
    }
    report["kde"] = kde_block;
    report["warnings"] = warnings;
    return ev;
}

std::string render_kde_svg(std::span<const KdeSeries> series, const std::string& title) {
    constexpr double W = 640, H = 400, L = 60, R = 20, T = 40, B = 50;
    double x0 = 0, x1 = 1, y1 = 0;
    bool first = true;
    for (const auto& s : series) {
        for (std::size_t g = 0; g < s.curve.grid.size(); ++g) {
            x0 = first ? s.curve.grid[g] : std::min(x0, s.curve.grid[g]);
            x1 = first ? s.curve.grid[g] : std::max(x1, s.curve.grid[g]);
            y1 = std::max(y1, s.curve.density[g]);
            first = false;
        }
    }
    if (x1 <= x0) {
        x1 = x0 + 1;
    }
    if (y1 <= 0) {
        y1 = 1;
    }
    auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double y) { return H - B - y / y1 * (H - T - B); };
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" font-family=\"sans-serif\" "
                      "font-size=\"12\">\n";
    svg += "<text x=\"" + fmt(W / 2) + "\" y=\"20\" text-anchor=\"middle\">" + escape_xml(title) + "</text>\n";
    svg += "<line x1=\"" + fmt(L) + "\" y1=\"" + fmt(H - B) + "\" x2=\"" + fmt(W - R) + "\" y2=\"" + fmt(H - B) +
           "\" stroke=\"black\"/>\n";
    svg += "<line x1=\"" + fmt(L) + "\" y1=\"" + fmt(T) + "\" x2=\"" + fmt(L) + "\" y2=\"" + fmt(H - B) +
           "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + fmt(L) + "\" y=\"" + fmt(H - B + 20) + "\">" + fmt(x0) + "</text>\n";
    svg += "<text x=\"" + fmt(W - R) + "\" y=\"" + fmt(H - B + 20) + "\" text-anchor=\"end\">" + fmt(x1) + "</text>\n";
    svg += "<text x=\"" + fmt(W / 2) + "\" y=\"" + fmt(H - 10) + "\" text-anchor=\"middle\">age</text>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* colour = palette[k % std::size(palette)];
        svg += "<polyline fill=\"none\" stroke=\"" + std::string(colour) + "\" points=\"";
        for (std::size_t g = 0; g < s.curve.grid.size(); ++g) {
            svg += fmt(px(s.curve.grid[g])) + "," + fmt(py(s.curve.density[g])) + " ";
        }
        svg += "\"/>\n";
        svg += "<text x=\"" + fmt(W - R - 150) + "\" y=\"" + fmt(T + 15 * static_cast<double>(k)) + "\" fill=\"" +
               colour + "\">" + escape_xml(s.method + " " + s.gender) + "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

std::string render_composition_svg(std::span<const ClusterComposition> compositions, const std::string& title) {
    constexpr double W = 640, H = 400, L = 50, R = 20, T = 40, B = 50;
    const double slot = compositions.empty() ? 1 : (W - L - R) / static_cast<double>(compositions.size());
    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" font-family=\"sans-serif\" "
                      "font-size=\"11\">\n";
    svg += "<text x=\"" + fmt(W / 2) + "\" y=\"20\" text-anchor=\"middle\">" + escape_xml(title) + "</text>\n";
    const double plot_h = H - T - B;
    for (std::size_t k = 0; k < compositions.size(); ++k) {
        const auto& c = compositions[k];
        const double x = L + slot * static_cast<double>(k) + slot * 0.1;
        const double w = slot * 0.8;
        if (c.female_share) {
            const double fh = *c.female_share * plot_h;
            svg += "<rect x=\"" + fmt(x) + "\" y=\"" + fmt(T + plot_h - fh) + "\" width=\"" + fmt(w) + "\" height=\"" +
                   fmt(fh) + "\" fill=\"#d62728\"/>\n";
            svg += "<rect x=\"" + fmt(x) + "\" y=\"" + fmt(T) + "\" width=\"" + fmt(w) + "\" height=\"" +
                   fmt(plot_h - fh) + "\" fill=\"#1f77b4\"/>\n";
        }
        svg += "<text x=\"" + fmt(x + w / 2) + "\" y=\"" + fmt(H - B + 15) + "\" text-anchor=\"middle\">" +
               std::to_string(c.cluster) + "</text>\n";
    }
    svg += "<text x=\"" + fmt(L) + "\" y=\"" + fmt(H - 10) + "\">red: female share, blue: male share</text>\n";
    svg += "</svg>\n";
    return svg;
}

} // namespace proxyfair
