#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "mbcr/io.hpp"
#include "mbcr/predict.hpp"

using namespace mbcr;
namespace fs = std::filesystem;

namespace {

struct Sandbox {
    fs::path dir;
    Sandbox() : dir(fs::temp_directory_path() / ("mbcr_cli_" + std::to_string(std::rand()))) {
        fs::create_directories(dir);
    }
    ~Sandbox() { fs::remove_all(dir); }
    fs::path operator/(const std::string& name) const { return dir / name; }

    int run(const std::string& args, const std::string& stdout_name = "stdout.txt") const {
        const std::string cmd = std::string("\"") + MBCR_CLI_PATH + "\" " + args + " > \"" +
                                (dir / stdout_name).string() + "\" 2> \"" + (dir / "stderr.txt").string() + "\"";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }
    std::string text(const std::string& name) const { return read_text_file(dir / name); }
};

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

void write_linear_csv(const fs::path& path) {
    std::string csv = "x1,y\n";
    for (int i = 0; i < 40; ++i) {
        const double x = -1 + i / 19.5;
        csv += format_number(x) + "," + format_number(1 + 2 * x + 0.05 * std::sin(3.0 * i)) + "\n";
    }
    write_file_atomic(path, csv);
}

std::vector<std::vector<std::string>> read_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> row;
        std::istringstream fields(line);
        std::string f;
        while (std::getline(fields, f, ',')) row.push_back(f);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace

TEST_CASE("fit writes a schema-conforming, reproducible model") {
    Sandbox box;
    write_linear_csv(box / "data.csv");
    write_file_atomic(box / "cfg.json", R"({"chain": {"iterations": 200, "burn_in": 100}})");
    REQUIRE(box.run("fit " + q(box / "data.csv") + " --config " + q(box / "cfg.json") + " --out " +
                    q(box / "m1.json") + " --seed 7") == 0);
    CHECK(box.text("stdout.txt").find("retained draws: 100") != std::string::npos);
    REQUIRE(box.run("fit " + q(box / "data.csv") + " --config " + q(box / "cfg.json") + " --out " +
                    q(box / "m2.json") + " --seed 7") == 0);
    CHECK(box.text("m1.json") == box.text("m2.json"));

    const auto model = read_model(box / "m1.json");
    CHECK(model.size() == 100);
    CHECK(model.chain.seed == 7);
    CHECK(box.text("m1.json").find(R"("k":)") != std::string::npos);

    // Predictions from the CLI equal in-process predictions from the parsed model.
    REQUIRE(box.run("predict " + q(box / "m1.json") + " --grid x1=-1:1:21 --out " + q(box / "pred.csv")) == 0);
    const auto rows = read_csv(box.text("pred.csv"));
    REQUIRE(rows.size() == 22);
    CHECK(rows[0] == std::vector<std::string>{"x1", "mean", "lo", "hi"});
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const double x = std::stod(rows[r][0]);
        const double mean = posterior_mean(model, Eigen::VectorXd::Constant(1, x));
        CHECK(std::abs(std::stod(rows[r][1]) - mean) <= 1e-12 * std::max(1.0, std::abs(mean)));
        CHECK(std::stod(rows[r][2]) <= std::stod(rows[r][3]));
    }

    REQUIRE(box.run("minimize " + q(box / "m1.json") + " --box -1:1 --out " + q(box / "min.json")) == 0);
    CHECK(box.text("stdout.txt").find("x_star: -1") != std::string::npos);
    CHECK(box.text("min.json").find("\"x_star\"") != std::string::npos);
}

TEST_CASE("input errors exit with 1") {
    Sandbox box;
    write_file_atomic(box / "bad.csv", "x1,z\n1,2\n");
    CHECK(box.run("fit " + q(box / "bad.csv") + " --out " + q(box / "m.json")) == 1);
    CHECK(box.text("stderr.txt").find("'y'") != std::string::npos);
    CHECK_FALSE(fs::exists(box / "m.json"));
    CHECK(box.run("fit " + q(box / "missing.csv") + " --out " + q(box / "m.json")) == 1);
    CHECK(box.run("") == 1);
    CHECK(box.run("--help") == 0);

    write_file_atomic(box / "const.json",
                      R"({"dim":1,"draws":[{"k":1,"planes":[{"alpha":3,"beta":[0],"sigma2":1}]}]})");
    CHECK(box.run("predict " + q(box / "const.json") + " --grid x1=0:1:2,x2=0:1:2") == 1);
    CHECK(box.run("minimize " + q(box / "const.json") + " --box 1:-1") == 1);
    CHECK(box.run("minimize " + q(box / "const.json") + " --box 0:1,0:1") == 1);
    CHECK(box.run("predict " + q(box / "const.json") + " --grid x1=0:1:3 --level 1.5") == 1);
    CHECK(box.run("bench --problem p9") == 1);
}

TEST_CASE("predict and minimize on hand-written models") {
    Sandbox box;
    write_file_atomic(box / "const.json",
                      R"({"dim":1,"draws":[{"k":1,"planes":[{"alpha":3,"beta":[0],"sigma2":1}]}]})");
    write_file_atomic(box / "q.csv", "x1\n-4\n0\n2.5\n");
    REQUIRE(box.run("predict " + q(box / "const.json") + " --query " + q(box / "q.csv")) == 0);
    const auto rows = read_csv(box.text("stdout.txt"));
    REQUIRE(rows.size() == 4);
    for (std::size_t r = 1; r < 4; ++r) {
        CHECK(rows[r][1] == "3");
        CHECK(rows[r][2] == "nan");  // a single draw cannot support a band
    }

    write_file_atomic(box / "abs.json", R"({"dim":1,"draws":[{"k":2,"planes":[
        {"alpha":0,"beta":[1],"sigma2":1},{"alpha":0,"beta":[-1],"sigma2":1}]}]})");
    REQUIRE(box.run("minimize " + q(box / "abs.json") + " --box -1:1") == 0);
    CHECK(box.text("stdout.txt").find("x_star: 0") != std::string::npos);
}

TEST_CASE("bench row accounting") {
    Sandbox box;
    REQUIRE(box.run("bench --problem p2 --n 60 --seeds 3 --methods mbcr,truth --iterations 60 --burn-in 30 "
                    "--test-n 500 --jobs 2 --out " + q(box / "bench.csv")) == 0);
    const auto rows = read_csv(box.text("bench.csv"));
    REQUIRE(rows.size() == 1 + 4 + 4);
    CHECK(rows[0] == std::vector<std::string>{"problem", "method", "n", "seed", "mse", "se"});
    int summaries = 0;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r][3] == "summary") ++summaries;
        if (rows[r][1] == "truth") CHECK(std::stod(rows[r][4]) == 0.0);
    }
    CHECK(summaries == 2);
}
