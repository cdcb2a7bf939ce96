#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

const fs::path& dir() {
    static const fs::path d = [] {
        auto p = fs::temp_directory_path() / "langact_cli_test";
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return d;
}

std::string at(const std::string& name) { return (dir() / name).string(); }

int run(const std::string& args) {
    const std::string cmd = std::string(LANGACT_CLI) + " " + args + " >" + at("stdout.txt") + " 2>" + at("stderr.txt");
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string read(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("gen-data is a pure function of its arguments") {
    REQUIRE(run("gen-data --n 60 --seed 5 --out " + at("a.jsonl")) == 0);
    REQUIRE(run("gen-data --n 60 --seed 5 --out " + at("b.jsonl")) == 0);
    REQUIRE(run("gen-data --n 60 --seed 6 --out " + at("c.jsonl")) == 0);
    const auto a = read(at("a.jsonl"));
    CHECK_FALSE(a.empty());
    CHECK(a == read(at("b.jsonl")));
    CHECK(a != read(at("c.jsonl")));
    std::istringstream in(a);
    int n = 0;
    for (std::string line; std::getline(in, line);) {
        const auto j = nlohmann::json::parse(line);
        CHECK(j.contains("instruction"));
        ++n;
    }
    CHECK(n == 60);
}

TEST_CASE("dreamer trajectories score 100 percent") {
    REQUIRE(run("gen-data --n 60 --seed 5 --out " + at("a.jsonl")) == 0);
    REQUIRE(run("eval-dream --dreamer --data " + at("a.jsonl") + " --out " + at("dream.csv")) == 0);
    std::istringstream csv(read(at("dream.csv")));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "class,n,successes,rate");
    int rows = 0;
    while (std::getline(csv, line)) {
        if (line.empty()) continue;
        CHECK(line.substr(line.rfind(',') + 1) == "1.0000");
        ++rows;
    }
    CHECK(rows == 7);  // six classes and the mean
}

TEST_CASE("tokenize and detokenize round trip") {
    std::ofstream(at("wps.json")) << "[[0,0],[10,-5],[49.9,29.9],[3.3,1.1]]";
    REQUIRE(run("tokenize --in " + at("wps.json") + " --out " + at("ids.json")) == 0);
    const auto ids = nlohmann::json::parse(read(at("ids.json")));
    REQUIRE(ids.size() == 4);
    CHECK(ids[0] == 50);
    CHECK(ids[1] == 3956);
    REQUIRE(run("detokenize --in " + at("ids.json") + " --out " + at("centers.json")) == 0);
    std::ofstream(at("centers_in.json")) << read(at("centers.json"));
    REQUIRE(run("tokenize --in " + at("centers_in.json") + " --out " + at("ids2.json")) == 0);
    CHECK(nlohmann::json::parse(read(at("ids2.json"))) == ids);

    std::ofstream(at("block.json")) << R"({"path": [[1,0],[2,0]], "speed_wps": [[0.5,0]]})";
    REQUIRE(run("tokenize --in " + at("block.json")) == 0);
    const auto obj = nlohmann::json::parse(read(at("stdout.txt")));
    CHECK(obj["path"].size() == 2);
    CHECK(obj["speed_wps"].size() == 1);
}

TEST_CASE("soft-target csv") {
    REQUIRE(run("soft-target --id 2878") == 0);
    std::istringstream csv(read(at("stdout.txt")));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "id,i_x,i_y,prob");
    double sum = 0.0;
    int n = 0;
    while (std::getline(csv, line)) {
        sum += std::stod(line.substr(line.rfind(',') + 1));
        ++n;
    }
    CHECK(n == 317);  // lattice points within radius 10
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("exit codes") {
    CHECK(run("") == 1);
    CHECK(run("no-such-command") == 1);
    CHECK(run("gen-data --n 5") == 1);                                     // missing --out
    CHECK(run("gen-data --n 5 --mix Flying=1 --out " + at("x.jsonl")) == 1);
    CHECK(run("eval-dream --dreamer --data " + at("missing.jsonl")) == 2);
    std::ofstream(at("bad.jsonl")) << "{not json\n";
    CHECK(run("eval-dream --dreamer --data " + at("bad.jsonl")) == 2);
    std::ofstream(at("junk.ckpt")) << "junk";
    CHECK(run("bench --ckpt " + at("junk.ckpt") + " --data " + at("a.jsonl")) == 2);
    CHECK(run("tokenize --in " + at("missing.json")) == 2);
    CHECK(run("soft-target --id 999999") != 0);
}

TEST_CASE("train, eval and bench on a tiny model") {
    REQUIRE(run("gen-data --n 40 --seed 2 --out " + at("t.jsonl")) == 0);
    std::ofstream(at("tiny.yaml")) << "d_model: 16\nn_layers: 1\nn_heads: 2\nd_ff: 32\nepochs: 1\nbatch_size: 8\n";
    REQUIRE(run("train --data " + at("t.jsonl") + " --config " + at("tiny.yaml") + " --heldout 10 --out " + at("m.ckpt")) == 0);
    CHECK(fs::exists(at("m.ckpt.codebook")));
    CHECK(fs::exists(at("m.ckpt.metrics.jsonl")));
    CHECK(run("eval-dream --ckpt " + at("m.ckpt") + " --data " + at("t.jsonl") + " --limit 10 --pred-out " + at("p.jsonl")) == 0);
    CHECK(run("eval-dream --pred " + at("p.jsonl") + " --data " + at("t.jsonl") + " --limit 10") == 0);
    CHECK(run("eval-dream --pred " + at("p.jsonl") + " --data " + at("t.jsonl")) == 2);  // count mismatch
    CHECK(run("bench --ckpt " + at("m.ckpt") + " --data " + at("t.jsonl") + " --trials 2 --warmup 0 --out " + at("b.csv")) == 0);
    CHECK(read(at("b.csv")).rfind("method,n_params,seq_len,passes,mean_ms,p50_ms,p95_ms", 0) == 0);
    CHECK(run("plot --data " + at("t.jsonl") + " --pred " + at("p.jsonl") + " --sample 0 --out " + at("s.svg")) == 0);
    CHECK(read(at("s.svg")).find("<svg") != std::string::npos);
    // a codebook from another vocabulary is rejected
    fs::copy_file(at("m.ckpt"), at("m2.ckpt"));
    std::ofstream(at("m2.ckpt.codebook")) << "garbage\n";
    CHECK(run("bench --ckpt " + at("m2.ckpt") + " --data " + at("t.jsonl") + " --trials 1") == 2);
}
