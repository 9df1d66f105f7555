#include <doctest.h>

#include "rbridge/cli.hpp"
#include "rbridge/errors.hpp"
#include "rbridge/io.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

using namespace rbridge;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("rbridge-test-" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int cli(std::vector<std::string> args, std::string* err_text = nullptr) {
    args.insert(args.begin(), "rbridge");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), err);
    if (err_text) *err_text = err.str();
    return code;
}

}  // namespace

TEST_CASE("real formatting round-trips") {
    for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.123456789}) CHECK(std::stod(format_real(x)) == x);
}

TEST_CASE("csv lines follow RFC 4180") {
    CHECK(csv_line(std::vector<std::string>{"a", "b,c", "say \"hi\""}) == "a,\"b,c\",\"say \"\"hi\"\"\"\r\n");
    CHECK(csv_line(std::vector<double>{1.0, 0.5}) == "1,0.5\r\n");
}

TEST_CASE("key-value parsing") {
    const auto kv = parse_key_value("# comment\nT = 2\n\nmanifold=so3  # trailing\n");
    CHECK(kv.at("T") == "2");
    CHECK(kv.at("manifold") == "so3");
    CHECK_THROWS_AS(parse_key_value("no equals sign\n"), UsageError);
    CHECK(parse_real_list("1, 2.5 -3") == std::vector<double>{1.0, 2.5, -3.0});
    CHECK_THROWS_AS(parse_real_list("1, x"), UsageError);
}

TEST_CASE("atomic writes") {
    const fs::path dir = scratch("io");
    const std::string f = (dir / "a.txt").string();
    write_file_atomic(f, "first");
    write_file_atomic(f, "second");
    CHECK(read_file(f) == "second");
    CHECK(std::distance(fs::directory_iterator(dir), fs::directory_iterator{}) == 1);
    write_file_atomic((dir / "sub" / "b.txt").string(), "nested");
    CHECK(read_file((dir / "sub" / "b.txt").string()) == "nested");
    CHECK_THROWS_AS(write_file_atomic((dir / "a.txt" / "c.txt").string(), "x"), IoError);
    CHECK_THROWS_AS(read_file((dir / "nope.txt").string()), IoError);
}

TEST_CASE("cli bridge writes paths and a summary") {
    const fs::path dir = scratch("bridge");
    std::string err;
    const int code = cli({"bridge", "--manifold", "sphere2", "--start", "0,0,1", "--target", "1,0,0", "--steps", "100",
                          "--paths", "2", "--seed", "3", "--out", dir.string()},
                         &err);
    CHECK(code == kExitOk);
    CHECK(fs::exists(dir / "path_0.csv"));
    CHECK(fs::exists(dir / "path_1.csv"));
    const auto summary = nlohmann::json::parse(read_file((dir / "summary.json").string()));
    CHECK(summary.contains("config"));
    CHECK(summary.contains("summary"));
    CHECK(err.find("config: steps = 100 (flag)") != std::string::npos);
}

TEST_CASE("cli config precedence and errors") {
    const fs::path dir = scratch("config");
    const std::string cfg = (dir / "run.cfg").string();
    write_file_atomic(cfg, "manifold = flat-torus\nsteps = 50\npaths = 1\n");
    std::string err;
    CHECK(cli({"sample", "--config", cfg, "--steps", "20", "--out", dir.string()}, &err) == kExitOk);
    CHECK(err.find("steps = 20 (flag)") != std::string::npos);
    CHECK(err.find("manifold = flat-torus (file)") != std::string::npos);

    write_file_atomic(cfg, "colour = red\n");
    CHECK(cli({"sample", "--config", cfg, "--out", dir.string()}) == kExitUsage);
    CHECK(cli({"bridge", "--manifold", "moebius"}) == kExitUsage);
    CHECK(cli({"bridge", "--steps", "abc"}) == kExitUsage);
    CHECK(cli({"frobnicate"}) == kExitUsage);
    CHECK(cli({"sample", "--config", (dir / "absent.cfg").string()}) == kExitIo);
    CHECK(cli({"sample", "--paths", "1", "--steps", "5", "--out", (dir / "run.cfg" / "sub").string()}) == kExitIo);
}

TEST_CASE("cli density and mean") {
    const fs::path dir = scratch("density");
    CHECK(cli({"density", "--manifold", "sphere2", "--steps", "100", "--paths", "20", "--points", "3", "--times", "1",
               "--out", dir.string()}) == kExitOk);
    CHECK(fs::exists(dir / "density.json"));

    const std::string data = (dir / "data.json").string();
    write_file_atomic(data, "[[1.0, 0.2], [1.4, -0.4], [0.9, 1.1]]");
    CHECK(cli({"mean", "--manifold", "cylinder", "--data", data, "--steps", "20", "--paths", "2", "--out",
               dir.string()}) == kExitOk);
    const auto mean = nlohmann::json::parse(read_file((dir / "mean.json").string()));
    CHECK(mean["converged"].get<bool>());
}
