#include "doctest.h"

#include "../support.hpp"
#include "proxyfair/cli.hpp"
#include "proxyfair/io.hpp"
#include "proxyfair/report.hpp"

#include <set>
#include <sstream>

using namespace proxyfair;
using testing::TempDir;
using testing::read_file;
using testing::write_file;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run cli(std::vector<std::string> args) {
    args.insert(args.begin(), "proxyfair");
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string p(const TempDir& d, const std::string& name) {
    return (d / name).string();
}

Json read_json(const std::filesystem::path& path) {
    return Json::parse(read_file(path));
}

// synth -> reduce -> tune -> sample x2 -> evaluate, all in dir
void pipeline(const TempDir& d) {
    REQUIRE(cli({"synth", "--samples", "600", "--modes", "6", "--dim", "8", "--seed", "4", "--out-embeddings",
                 p(d, "e.femb"), "--out-metadata", p(d, "m.csv")})
                .code == 0);
    REQUIRE(cli({"reduce", "--input", p(d, "e.femb"), "--out", p(d, "c.csv"), "--seed", "5", "--iterations", "400"})
                .code == 0);
    const auto t = cli({"tune", "--coords", p(d, "c.csv"), "--eps-grid", "1,2,3,4,6", "--min-samples-grid", "5,10,20",
                        "--k-min", "4", "--k-max", "8", "--out", p(d, "t.csv"), "--assignment-out", p(d, "a.csv")});
    REQUIRE(t.code == 0);
    REQUIRE(cli({"sample", "--method", "cluster", "--assignment", p(d, "a.csv"), "--seed", "1", "--out",
                 p(d, "cl.csv")})
                .code == 0);
    REQUIRE(cli({"sample", "--method", "random", "--input", p(d, "e.femb"), "--seed", "1", "--out", p(d, "rnd.csv")})
                .code == 0);
    REQUIRE(cli({"evaluate", "--assignment", p(d, "a.csv"), "--metadata", p(d, "m.csv"), "--subset",
                 "cluster=" + p(d, "cl.csv"), "--subset", "random=" + p(d, "rnd.csv"), "--dataset", "syn", "--out",
                 p(d, "report.json")})
                .code == 0);
}

} // namespace

TEST_SUITE("report-cli") {

TEST_CASE("help and parse errors") {
    CHECK(cli({"--help"}).code == 0);
    CHECK(cli({"reduce", "--help"}).code == 0);
    CHECK(cli({"--version"}).out == std::string(kToolVersion) + "\n");
    CHECK(cli({}).code == 2);
    CHECK(cli({"bogus"}).code == 2);
    CHECK(cli({"cluster", "--coords", "x.csv"}).code == 2);
    CHECK(cli({"cluster", "--coords", "x.csv", "--eps", "abc", "--min-samples", "3", "--out", "y"}).code == 2);
}

TEST_CASE("reduce writes coordinates and trace, deterministically") {
    TempDir d;
    REQUIRE(cli({"synth", "--samples", "200", "--modes", "4", "--dim", "5", "--seed", "2", "--out-embeddings",
                 p(d, "e.csv"), "--out-metadata", p(d, "m.csv")})
                .code == 0);
    const std::vector<std::string> args{"reduce", "--input", p(d, "e.csv"), "--perplexity", "30", "--seed", "7",
                                        "--iterations", "300", "--out", p(d, "c.csv")};
    REQUIRE(cli(args).code == 0);
    const auto first = read_file(d / "c.csv");
    const auto coords = load_coordinates(d / "c.csv");
    CHECK(coords.size() == 200);
    CHECK(read_file(d / "c.csv.trace.csv").rfind("iter,kl\n", 0) == 0);
    CHECK(std::filesystem::exists(d / "c.csv.manifest.json"));
    REQUIRE(cli(args).code == 0);
    CHECK(read_file(d / "c.csv") == first);

    const auto bad = cli({"reduce", "--input", p(d, "e.csv"), "--perplexity", "70", "--out", p(d, "c2.csv")});
    CHECK(bad.code == 2);
    CHECK(bad.err.find("perplexity") != std::string::npos);
    CHECK(std::count(bad.err.begin(), bad.err.end(), '\n') == 1);

    write_file(d / "nan.csv", "id,e0\na,1\nb,nan\n");
    const auto nan = cli({"reduce", "--input", p(d, "nan.csv"), "--out", p(d, "c3.csv")});
    CHECK(nan.code == 2);
    CHECK(nan.err.find("non-finite") != std::string::npos);
}

TEST_CASE("cluster and tune") {
    TempDir d;
    std::string coords = "id,x,y\n";
    for (int i = 0; i < 60; ++i) {
        coords += "p" + std::to_string(i) + "," + std::to_string((i % 3) * 50 + (i % 7) * 0.1) + "," +
                  std::to_string((i % 5) * 0.1) + "\n";
    }
    write_file(d / "c.csv", coords);
    const auto c = cli({"cluster", "--coords", p(d, "c.csv"), "--eps", "1", "--min-samples", "3", "--out",
                        p(d, "a.csv")});
    CHECK(c.code == 0);
    CHECK(load_assignment(d / "a.csv").cluster_count() == 3);

    const auto t = cli({"tune", "--coords", p(d, "c.csv"), "--eps-grid", "2,3,4", "--min-samples-grid", "40,120",
                        "--out", p(d, "t.csv")});
    const auto table = read_file(d / "t.csv");
    CHECK(std::count(table.begin(), table.end(), '\n') == 7);
    CHECK(table.rfind("eps,min_samples,k,noise\n", 0) == 0);
    CHECK(t.code == 3); // every entry is all-noise, infeasible

    const auto ok = cli({"tune", "--coords", p(d, "c.csv"), "--eps-grid", "1,2", "--min-samples-grid", "3",
                         "--k-min", "2", "--k-max", "4", "--out", p(d, "t2.csv")});
    CHECK(ok.code == 0);

    CHECK(cli({"tune", "--coords", p(d, "c.csv"), "--eps-grid", "", "--min-samples-grid", "3", "--out",
               p(d, "t3.csv")})
              .code == 2);
    CHECK(cli({"cluster", "--coords", p(d, "c.csv"), "--eps", "0", "--min-samples", "3", "--out", p(d, "a2.csv")})
              .code == 2);
}

TEST_CASE("sample validation and determinism") {
    TempDir d;
    std::string a = "id,cluster\n";
    for (int i = 0; i < 100; ++i) a += "s" + std::to_string(i) + "," + std::to_string(i % 4) + "\n";
    write_file(d / "a.csv", a);
    CHECK(cli({"sample", "--method", "cluster", "--out", p(d, "s.csv")}).code == 2);
    CHECK(cli({"sample", "--method", "cluster", "--assignment", p(d, "missing.csv"), "--out", p(d, "s.csv")}).code ==
          2);
    CHECK(cli({"sample", "--assignment", p(d, "a.csv"), "--fraction", "0", "--out", p(d, "s.csv")}).code == 2);
    CHECK(cli({"sample", "--assignment", p(d, "a.csv"), "--method", "other", "--out", p(d, "s.csv")}).code == 2);

    const auto ok = cli({"sample", "--method", "cluster", "--fraction", "0.3", "--seed", "1", "--assignment",
                         p(d, "a.csv"), "--out", p(d, "s.csv")});
    CHECK(ok.code == 0);
    CHECK(load_subset_ids(d / "s.csv").size() == 30);

    const std::vector<std::string> rnd{"sample", "--method", "random", "--seed", "9", "--assignment", p(d, "a.csv"),
                                       "--out", p(d, "r.csv")};
    REQUIRE(cli(rnd).code == 0);
    const auto first = read_file(d / "r.csv");
    REQUIRE(cli(rnd).code == 0);
    CHECK(read_file(d / "r.csv") == first);

    const auto manifest = read_json(d / "s.csv.manifest.json");
    CHECK(manifest["command"] == "sample");
    CHECK(manifest["seeds"][0] == 1);
    CHECK(manifest["parameters"]["target_total"] == 30);
    CHECK(manifest["inputs"][0]["digest"].get<std::string>().rfind("fnv1a64:", 0) == 0);
}

TEST_CASE("evaluate on a hand-counted fixture") {
    TempDir d;
    // cluster 0: a1..a4 (3 F, 1 M); cluster 1: b1..b4 (4 M); noise: n1 (F)
    write_file(d / "a.csv", "id,cluster\na1,0\na2,0\na3,0\na4,0\nb1,1\nb2,1\nb3,1\nb4,1\nn1,-1\n");
    write_file(d / "m.csv",
               "id,gender,age,label,prediction\n"
               "a1,F,20,1,1\na2,F,35,0,1\na3,F,50,1,0\na4,M,95,0,0\n"
               "b1,M,40,1,1\nb2,M,41,1,1\nb3,M,42,0,0\nb4,M,,0,1\nn1,F,10,,\n");
    write_file(d / "cl.csv", "id,cluster\na1,0\na4,0\nb1,1\nb2,1\n");
    write_file(d / "rnd.csv", "id,cluster\nb1,\nb2,\nb3,\na1,\n");
    const auto r = cli({"evaluate", "--assignment", p(d, "a.csv"), "--metadata", p(d, "m.csv"), "--subset",
                        "cluster=" + p(d, "cl.csv"), "--subset", "random=" + p(d, "rnd.csv"), "--dataset", "fx",
                        "--out", p(d, "report.json"), "--svg-dir", p(d, "svg")});
    REQUIRE(r.code == 0);
    const auto j = read_json(d / "report.json");
    std::vector<std::string> keys;
    for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
    CHECK(keys == std::vector<std::string>{"schema_version", "manifest", "clusters", "subsets", "metrics", "kde",
                                           "warnings"});
    CHECK(j["schema_version"] == 1);
    CHECK(j["clusters"]["count"] == 2);
    CHECK(j["clusters"]["noise"] == 1);
    const auto& comp = j["clusters"]["composition"];
    CHECK(comp[0]["cluster"] == -1);
    CHECK(comp[1]["female"] == 3);
    CHECK(comp[1]["male"] == 1);
    CHECK(comp[1]["female_share"] == 0.75);
    CHECK(comp[2]["male_share"] == 1.0);
    CHECK(comp[2]["missing_age"] == 1);
    CHECK(comp[1]["age_histogram"] == Json::array({0, 1, 1, 1, 0, 0, 1}));

    const auto& items = j["subsets"]["items"];
    CHECK(items[0]["name"] == "population");
    CHECK(items[0]["gender"]["female"] == 4);
    CHECK(items[0]["gender"]["male"] == 5);
    CHECK(items[1]["gender"]["gap"] == 0.5);  // cluster: 1 F, 3 M
    CHECK(items[2]["gender"]["gap"] == 0.5);  // random: 1 F, 3 M
    const auto& cmp = j["subsets"]["comparisons"];
    REQUIRE(cmp.size() == 1);
    CHECK(cmp[0]["method"] == "cluster");
    CHECK(cmp[0]["improvement"] == 0.0);

    // proxy clusters: "-1" has no prediction; "0" selection 2/4, "1" selection 3/4
    const auto& proxy = j["metrics"]["proxy_clusters"];
    CHECK(proxy["demographic_parity"]["gap"] == 0.25);
    CHECK(proxy["demographic_parity"]["excluded"] == Json::array({"-1"}));
    // TPR: cluster 0 1/2, cluster 1 2/2
    CHECK(proxy["equalized_odds"]["tpr"]["gap"] == 0.5);
    // gender: F selection 2/3, M selection 3/5
    CHECK(j["metrics"]["gender"]["demographic_parity"]["gap"].get<double>() ==
          doctest::Approx(2.0 / 3 - 3.0 / 5));

    CHECK(std::filesystem::exists(d / "kde_fx_cluster_F.csv"));
    CHECK(std::filesystem::exists(d / "kde_fx_population_M.csv"));
    CHECK(std::filesystem::exists(d / "svg" / "composition_fx.svg"));
    for (const auto& k : j["kde"]) CHECK(std::abs(k["integral"].get<double>() - 1.0) <= 1e-3);
}

TEST_CASE("evaluate without gender exits 3 and omits gender sections") {
    TempDir d;
    write_file(d / "a.csv", "id,cluster\na,0\nb,0\nc,1\n");
    write_file(d / "m.csv", "id,age\na,30\nb,40\nc,50\n");
    const auto r = cli({"evaluate", "--assignment", p(d, "a.csv"), "--metadata", p(d, "m.csv"), "--out",
                        p(d, "report.json")});
    CHECK(r.code == 3);
    const auto j = read_json(d / "report.json");
    CHECK_FALSE(j["clusters"]["composition"][0].contains("female"));
    CHECK_FALSE(j["subsets"]["items"][0].contains("gender"));
    CHECK(j["kde"][0]["gender"] == "all");

    write_file(d / "bad.csv", "id,cluster\na,0\n");
    CHECK(cli({"evaluate", "--assignment", p(d, "a.csv"), "--metadata", p(d, "m.csv"), "--subset", "noequals",
               "--out", p(d, "r2.json")})
              .code == 2);
    CHECK(cli({"evaluate", "--assignment", p(d, "a.csv"), "--metadata", p(d, "m.csv"), "--subset",
               "population=" + p(d, "bad.csv"), "--out", p(d, "r2.json")})
              .code == 2);
}

TEST_CASE("sentinel ids keep their rows through the pipeline") {
    TempDir d;
    pipeline(d);
    const auto emb = load_embeddings(d / "e.femb", EmbeddingFormat::Femb);
    const auto coords = load_coordinates(d / "c.csv");
    const auto assign = load_assignment(d / "a.csv");
    CHECK(coords.ids() == emb.ids());
    CHECK(assign.ids() == emb.ids());
    const std::set<std::string> all(emb.ids().begin(), emb.ids().end());
    const std::string sa = read_file(d / "a.csv");
    for (const auto& id : load_subset_ids(d / "cl.csv")) {
        CHECK(all.count(id) == 1);
        // the subset's cluster column agrees with the assignment
        const auto row = std::find(assign.ids().begin(), assign.ids().end(), id) - assign.ids().begin();
        CHECK(sa.find(id + "," + std::to_string(assign.labels()[static_cast<std::size_t>(row)]) + "\n") !=
              std::string::npos);
    }
}

TEST_CASE("end-to-end pipeline is byte-identical across reruns") {
    TempDir d;
    pipeline(d);
    const auto first = read_file(d / "report.json");
    const auto first_sub = read_file(d / "cl.csv");
    pipeline(d);
    CHECK(read_file(d / "report.json") == first);
    CHECK(read_file(d / "cl.csv") == first_sub);
}

}
