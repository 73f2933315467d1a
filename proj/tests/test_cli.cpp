#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
    int code = -1;
    std::string out, err;
};

Result dpr_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "dpr");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    Result r;
    r.code = dpr::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

std::map<std::string, std::string> read_dir(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::directory_iterator(dir)) files[e.path().filename().string()] = slurp(e.path());
    return files;
}

// value of `key=` on the stdout line starting with `stage`
std::string field(const std::string& out, const std::string& stage, const std::string& key) {
    std::istringstream in(out);
    for (std::string line; std::getline(in, line);) {
        if (line.rfind(stage + " ", 0) != 0) continue;
        const auto at = line.find(" " + key + "=");
        if (at == std::string::npos) continue;
        const auto start = at + key.size() + 2;
        return line.substr(start, line.find(' ', start) - start);
    }
    FAIL("no " << key << " on the " << stage << " line of:\n" << out);
    return {};
}

struct Workspace {
    fs::path root;
    Workspace() {
        root = fs::temp_directory_path() / ("dpr_test_cli_" + std::to_string(::getpid()));
        fs::remove_all(root);
        fs::create_directories(root);
    }
    Workspace(const Workspace&) = delete;
    ~Workspace() { fs::remove_all(root); }
    std::string operator/(const std::string& name) const { return (root / name).string(); }
};

const Workspace& workspace() {
    static const Workspace ws;
    static const bool ready = [] {
        REQUIRE(dpr_cli({"synth", "--preset", "six_cluster", "--out", ws / "six"}).code == 0);
        REQUIRE(dpr_cli({"synth", "--preset", "collinear", "--out", ws / "collinear"}).code == 0);
        std::ofstream(ws / "six.conf") << "input = " << (ws / "six/panel.csv") << "\n"
                                       << "test_periods = 2\n"
                                       << "eps_quantiles = 0.95:1:20\n"
                                       << "minpts_grid = 3,5\n"
                                       << "lambda_grid = log:1e-4:1:12\n"
                                       << "alpha_grid = 0.5,1\n";
        return true;
    }();
    (void)ready;
    return ws;
}

}  // namespace

TEST_CASE("run on a synthetic panel populates the report directory") {
    const auto& ws = workspace();
    const auto r = dpr_cli({"run", "--config", ws / "six.conf", "--out", ws / "run"});
    INFO(r.err);
    REQUIRE(r.code == 0);
    for (const char* name : {"clusters.csv", "cv_table.csv", "coefficients.csv", "fitted.csv", "forecast.csv",
                             "summary.json", "model.txt", "standardization.csv", "scan.csv",
                             "path_trajectories.csv", "fit_scatter.csv", "k_distance.csv"})
        CHECK(fs::file_size(fs::path(ws / "run") / name) > 0);
    // one line per stage
    for (const char* stage : {"split ", "cluster ", "cv ", "fit ", "forecast "})
        CHECK(("\n" + r.out).find(std::string("\n") + stage) != std::string::npos);
    CHECK(std::stod(field(r.out, "cluster", "k")) == 6);
}

TEST_CASE("missing input exits 1 without partial output") {
    const auto& ws = workspace();
    const auto r = dpr_cli({"run", "--input", ws / "nope.csv", "--test-periods", "2", "--out", ws / "missing"});
    CHECK(r.code == 1);
    CHECK_FALSE(r.err.empty());
    CHECK(r.out.empty());
    CHECK_FALSE(fs::exists(ws / "missing"));
    for (const auto& e : fs::directory_iterator(ws.root))
        CHECK(e.path().filename().string().find("missing") == std::string::npos);
}

TEST_CASE("bad arguments exit 1") {
    const auto& ws = workspace();
    CHECK(dpr_cli({"frobnicate"}).code == 1);
    CHECK(dpr_cli({"fit", "--input", ws / "six/panel.csv"}).code == 1);  // no --out
    CHECK(dpr_cli({"fit", "--input", ws / "six/panel.csv", "--kind", "elastic_net", "--lambda", "0.1", "--out",
                   ws / "x"})
              .code == 1);  // no alpha
    CHECK(dpr_cli({"cv", "--input", ws / "six/panel.csv", "--folds", "1", "--eps", "0.1", "--out", ws / "x"}).code ==
          1);
    CHECK(dpr_cli({"--help"}).code == 0);
    CHECK_FALSE(fs::exists(ws / "x"));
}

TEST_CASE("ridge at lambda 0 on exactly collinear columns exits 2") {
    const auto& ws = workspace();
    // before the copy columns drift they repeat their base exactly
    const auto r = dpr_cli({"fit", "--input", ws / "collinear/panel.csv", "--test-periods", "8", "--no-clusters",
                            "--kind", "ridge", "--lambda", "0", "--out", ws / "singular"});
    CHECK(r.code == 2);
    CHECK(r.err.find("rank deficient") != std::string::npos);
    CHECK_FALSE(fs::exists(ws / "singular"));
}

TEST_CASE("every subcommand is byte-reproducible") {
    const auto& ws = workspace();
    const std::string panel = ws / "six/panel.csv";
    const std::vector<std::vector<std::string>> commands{
        {"ingest", "--input", panel},
        {"cluster", "--config", ws / "six.conf"},
        {"scan", "--config", ws / "six.conf"},
        {"fit", "--config", ws / "six.conf", "--kind", "lasso", "--lambda", "0.001"},
        {"path", "--config", ws / "six.conf", "--kind", "elastic_net", "--alpha", "0.5"},
        {"cv", "--config", ws / "six.conf", "--threads", "2"},
        {"synth", "--preset", "collinear", "--seed", "5"},
    };
    for (const auto& cmd : commands) {
        CAPTURE(cmd[0]);
        auto a = cmd, b = cmd;
        a.insert(a.end(), {"--out", ws / ("rep_a_" + cmd[0])});
        b.insert(b.end(), {"--out", ws / ("rep_b_" + cmd[0])});
        const auto ra = dpr_cli(a), rb = dpr_cli(b);
        INFO(ra.err);
        REQUIRE(ra.code == 0);
        REQUIRE(rb.code == 0);
        CHECK(ra.out == rb.out);
        CHECK(read_dir(ws / ("rep_a_" + cmd[0])) == read_dir(ws / ("rep_b_" + cmd[0])));
    }
    // run twice into the same directory
    REQUIRE(dpr_cli({"run", "--config", ws / "six.conf", "--out", ws / "rerun"}).code == 0);
    const auto first = read_dir(ws / "rerun");
    REQUIRE(dpr_cli({"run", "--config", ws / "six.conf", "--out", ws / "rerun"}).code == 0);
    CHECK(read_dir(ws / "rerun") == first);
}

TEST_CASE("run equals the staged composition") {
    const auto& ws = workspace();
    const auto run = dpr_cli({"run", "--config", ws / "six.conf", "--out", ws / "full"});
    REQUIRE(run.code == 0);
    const auto full = read_dir(ws / "full");

    const auto scan = dpr_cli({"scan", "--config", ws / "six.conf", "--out", ws / "st_scan"});
    REQUIRE(scan.code == 0);
    CHECK(slurp(fs::path(ws / "st_scan") / "scan.csv") == full.at("scan.csv"));
    const std::string eps = field(scan.out, "scan", "best_eps"), min_pts = field(scan.out, "scan", "best_min_pts");

    const auto cv = dpr_cli({"cv", "--config", ws / "six.conf", "--out", ws / "st_cv"});
    REQUIRE(cv.code == 0);
    CHECK(slurp(fs::path(ws / "st_cv") / "cv_table.csv") == full.at("cv_table.csv"));
    const std::string lambda = field(cv.out, "cv", "best_lambda"), alpha = field(cv.out, "cv", "best_alpha");

    // fixing the scanned eps and the CV winner reproduces the final model
    const auto fit = dpr_cli({"fit", "--config", ws / "six.conf", "--eps", eps, "--min-pts", min_pts, "--kind",
                              "elastic_net", "--lambda", lambda, "--alpha", alpha, "--out", ws / "st_fit"});
    INFO(fit.err);
    REQUIRE(fit.code == 0);
    const auto staged = read_dir(ws / "st_fit");
    for (const char* name : {"train_clusters.csv", "standardization.csv", "coefficients.csv", "fitted.csv"})
        CHECK_MESSAGE(staged.at(name) == full.at(name), name);

    const auto fc = dpr_cli({"forecast", "--config", ws / "six.conf", "--model", ws / "st_fit/model.txt", "--out",
                             ws / "st_fc"});
    REQUIRE(fc.code == 0);
    CHECK(slurp(fs::path(ws / "st_fc") / "forecast.csv") == full.at("forecast.csv"));
    CHECK(field(fc.out, "forecast", "mean_error") == field(run.out, "forecast", "mean_error"));

    // run's own model scores the test rows the same way
    const auto fc2 = dpr_cli({"forecast", "--config", ws / "six.conf", "--model", ws / "full/model.txt", "--out",
                              ws / "st_fc2"});
    REQUIRE(fc2.code == 0);
    CHECK(slurp(fs::path(ws / "st_fc2") / "forecast.csv") == full.at("forecast.csv"));
}
