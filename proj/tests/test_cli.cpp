#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "emgsa/dataset.hpp"
#include "emgsa/synth.hpp"
#include "test_util.hpp"

namespace {

int run_cli(const std::string& args) {
    const std::string cmd = std::string(EMGSA_CLI_PATH) + " " + args + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// mean accuracy from a results csv written with append_mean.
double mean_from_results(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::string line;
    double mean = -1.0;
    while (std::getline(in, line)) {
        const auto fields = emgsa::detail::split_line(line);
        if (fields.size() == 3 && fields[1] == "mean") mean = std::stod(fields[2]);
    }
    return mean;
}

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("generate is byte-identical for identical seeds") {
    TempDir dir;
    const std::string base = "generate --subjects 2 --windows-per-gesture 3 --seed 7 --out ";
    REQUIRE(run_cli(base + dir.file("a.emgw")) == 0);
    REQUIRE(run_cli(base + dir.file("b.emgw")) == 0);
    CHECK(slurp(dir.file("a.emgw")) == slurp(dir.file("b.emgw")));
    REQUIRE(run_cli("generate --subjects 2 --windows-per-gesture 3 --seed 8 --out " + dir.file("c.emgw")) == 0);
    CHECK(slurp(dir.file("a.emgw")) != slurp(dir.file("c.emgw")));
}

TEST_CASE("generate, features, eval pipeline produces per-subject rows plus a mean") {
    TempDir dir;
    REQUIRE(run_cli("generate --subjects 3 --windows-per-gesture 8 --seed 3 --out " + dir.file("cohort.emgw") +
                    " --config-out " + dir.file("cohort.cfg")) == 0);
    const auto cfg = emgsa::parse_cohort_config(slurp(dir.file("cohort.cfg")));
    CHECK(cfg.n_subjects == 3);
    CHECK(cfg.seed == 3);

    REQUIRE(run_cli("features --in " + dir.file("cohort.emgw") + " --out " + dir.file("f.csv")) == 0);
    const emgsa::FeatureMatrix m = emgsa::load_features_csv(dir.file("f.csv"));
    CHECK(m.rows() == 3 * 4 * 8);
    CHECK(m.cols() == 56);

    REQUIRE(run_cli("eval --mode sa_kpca --dims 5 --seed 3 --jobs 1 --features " + dir.file("f.csv") +
                    " --out-dir " + dir.file("out")) == 0);
    std::ifstream results(dir.file("out/results.csv"));
    std::string line;
    std::getline(results, line);
    CHECK(line == "method,unit,accuracy");
    int rows = 0;
    bool has_mean = false;
    while (std::getline(results, line)) {
        ++rows;
        if (line.find(",mean,") != std::string::npos) has_mean = true;
    }
    CHECK(rows == 4);  // 3 subjects + mean
    CHECK(has_mean);

    const auto manifest = nlohmann::json::parse(slurp(dir.file("out/manifest.json")));
    CHECK(manifest["command"] == "eval");
    CHECK(manifest["seed"] == 3);
    CHECK(manifest["config"]["mode"] == "sa_kpca");
    CHECK(manifest["outputs"].size() == 1);
}

TEST_CASE("sweep curve points match individual eval runs") {
    TempDir dir;
    REQUIRE(run_cli("generate --subjects 3 --windows-per-gesture 8 --seed 5 --out " + dir.file("c.emgw")) == 0);
    REQUIRE(run_cli("features --in " + dir.file("c.emgw") + " --out " + dir.file("f.csv")) == 0);
    REQUIRE(run_cli("sweep --mode common_subspace_cross --dims 2,5 --seed 5 --jobs 1 --features " + dir.file("f.csv") +
                    " --out-dir " + dir.file("sweep")) == 0);
    REQUIRE(run_cli("eval --mode common_subspace_cross --dims 2 --seed 5 --jobs 1 --features " + dir.file("f.csv") +
                    " --out-dir " + dir.file("e2")) == 0);
    REQUIRE(run_cli("eval --mode common_subspace_cross --dims 5 --seed 5 --jobs 1 --features " + dir.file("f.csv") +
                    " --out-dir " + dir.file("e5")) == 0);
    CHECK(mean_from_results(dir.file("sweep/results_d2.csv")) == mean_from_results(dir.file("e2/results.csv")));
    CHECK(mean_from_results(dir.file("sweep/results_d5.csv")) == mean_from_results(dir.file("e5/results.csv")));

    std::ifstream curve(dir.file("sweep/curve.csv"));
    std::string line;
    std::getline(curve, line);
    CHECK(line == "method,dims,mean_accuracy,std");
    int rows = 0;
    while (std::getline(curve, line)) ++rows;
    CHECK(rows == 2);
}

TEST_CASE("project and tsne export plot data") {
    TempDir dir;
    REQUIRE(run_cli("project --subjects 2 --windows-per-gesture 6 --seed 9 --method kpca --kernel cosine --dims 2 "
                    "--out " + dir.file("proj.csv")) == 0);
    std::ifstream proj(dir.file("proj.csv"));
    std::string line;
    std::getline(proj, line);
    CHECK(line == "subject,gesture,c0,c1");
    int rows = 0;
    while (std::getline(proj, line)) ++rows;
    CHECK(rows == 2 * 4 * 6);

    REQUIRE(run_cli("tsne --subjects 2 --windows-per-gesture 6 --seed 9 --dims 5 --perplexity 8 --iterations 60 "
                    "--out " + dir.file("tsne.csv")) == 0);
    std::ifstream tsne(dir.file("tsne.csv"));
    std::getline(tsne, line);
    CHECK(line == "subject,gesture,c0,c1");
    std::ifstream kl(dir.file("tsne.csv.kl.csv"));
    std::getline(kl, line);
    CHECK(line == "iteration,kl_divergence");
}

TEST_CASE("stats ranks methods across results files") {
    TempDir dir;
    {
        std::ofstream a(dir.file("a.csv"));
        a << "method,unit,accuracy\nalpha,0,0.9\nalpha,1,0.8\nalpha,2,0.85\n";
        std::ofstream b(dir.file("b.csv"));
        b << "method,unit,accuracy\nbeta,0,0.5\nbeta,1,0.6\nbeta,2,0.55\n";
    }
    REQUIRE(run_cli("stats --results " + dir.file("a.csv") + " " + dir.file("b.csv") + " --alpha 0.05 --out-dir " +
                    dir.file("stats")) == 0);
    const std::string ranks = slurp(dir.file("stats/ranks.csv"));
    CHECK(ranks.find("alpha,1") != std::string::npos);
    CHECK(ranks.find("beta,2") != std::string::npos);
    const std::string nem = slurp(dir.file("stats/nemenyi.csv"));
    CHECK(nem.find("alpha,k,n_blocks,critical_difference,friedman_chi2,friedman_df") != std::string::npos);
}

TEST_CASE("exit codes distinguish usage, data, and numeric failures") {
    TempDir dir;
    CHECK(run_cli("--bogus-flag") == 1);
    CHECK(run_cli("eval --mode nonsense --out-dir " + dir.file("x")) == 1);
    CHECK(run_cli("features --in " + dir.file("missing.emgw") + " --out " + dir.file("f.csv")) == 2);
    // Unregularized CORAL on fewer rows than features: singular covariance.
    REQUIRE(run_cli("generate --subjects 3 --windows-per-gesture 6 --seed 2 --out " + dir.file("c.emgw")) == 0);
    REQUIRE(run_cli("features --in " + dir.file("c.emgw") + " --out " + dir.file("f.csv")) == 0);
    CHECK(run_cli("eval --mode coral --lambda 0 --seed 2 --jobs 1 --features " + dir.file("f.csv") +
                  " --out-dir " + dir.file("bad")) == 3);
}

TEST_SUITE_END();
