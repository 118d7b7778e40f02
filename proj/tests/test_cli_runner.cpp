#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "doctest.h"
#include "runner.hpp"

using namespace klab::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("klab_test_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Scenario parse_ok(const std::string& text) {
    ScenarioError err;
    auto sc = parse_scenario(text, err);
    REQUIRE_MESSAGE(sc.has_value(), err.location << ": " << err.message);
    return *sc;
}

ScenarioError parse_bad(const std::string& text) {
    ScenarioError err;
    CHECK_FALSE(parse_scenario(text, err).has_value());
    return err;
}

RunOptions quiet(const fs::path& dir, bool normalize = false) {
    RunOptions o;
    o.output_dir = dir.string();
    o.normalize = normalize;
    return o;
}

}  // namespace

TEST_CASE("scenario errors carry a location") {
    CHECK(parse_bad("{\n  \"spec\": \"ou\", \"jobs\": [ }").location == "line 2, column 27");
    CHECK(parse_bad(R"({"spec": "ou", "jobs": [{"op": "transmogrify"}]})").location == "$.jobs[0].op");
    CHECK(parse_bad(R"({"spec": "nonexistent", "jobs": []})").location == "$.spec");
    CHECK(parse_bad(R"({"jobs": []})").location == "$.spec");
    CHECK(parse_bad(R"({"spec": "ou"})").location == "$.jobs");
    CHECK(parse_bad(R"({"spec": "ou", "seed": -3, "jobs": []})").location == "$.seed");
    CHECK(parse_bad(R"({"spec": "ou", "jobs": [{"op": "feller", "id": "a"}, {"op": "feller", "id": "a"}]})").location ==
          "$.jobs[1].id");
}

TEST_CASE("default job ids") {
    auto sc = parse_ok(R"({"spec": "ou", "jobs": [{"op": "feller"}, {"op": "constants"}]})");
    CHECK(sc.jobs[0].at("id") == "job00_feller");
    CHECK(sc.jobs[1].at("id") == "job01_constants");
    CHECK(sc.output_dir == "klab_out");
}

TEST_CASE("spec argument forms") {
    auto j = spec_description("ou:a=2,q=0.5");
    CHECK(j.at("catalogue") == "ou");
    CHECK(j.at("a") == 2.0);
    CHECK(j.at("q") == 0.5);
    CHECK(spec_description(R"({"catalogue": "heat"})").at("catalogue") == "heat");
    const fs::path file = scratch("spec") += ".json";
    write_file_atomic(file.string(), R"({"catalogue": "cubic_minus"})");
    CHECK(resolve_spec(json(file.string())).name == "cubic_minus");
    fs::remove(file);
    CHECK_THROWS(spec_description("ou:a"));
    CHECK_THROWS(resolve_spec(json("ou:a=two")));
}

TEST_CASE("empty job list writes only the summary") {
    const auto dir = scratch("empty");
    auto rr = run_scenario(parse_ok(R"({"spec": "ou", "jobs": []})"), quiet(dir));
    CHECK(rr.exit_code == 0);
    CHECK(rr.summary.at("total") == 0);
    CHECK(fs::exists(dir / "summary.json"));
    CHECK(std::distance(fs::directory_iterator(dir), fs::directory_iterator()) == 1);
    fs::remove_all(dir);
}

TEST_CASE("unsupported p is skipped, not failed") {
    const auto dir = scratch("skip");
    auto rr = run_scenario(parse_ok(R"({"spec": "ou", "jobs": [{"op": "verify", "estimate": "aa", "p": 0.5}]})"),
                           quiet(dir));
    CHECK(rr.exit_code == 0);
    REQUIRE(rr.outcomes.size() == 1);
    CHECK(rr.outcomes[0].status == "skipped: precondition");
    CHECK(rr.summary.at("counts").at("skipped") == 1);
    CHECK(rr.summary.at("jobs")[0].contains("reason"));
    fs::remove_all(dir);
}

TEST_CASE("failing expectation sets exit code 1") {
    const auto dir = scratch("fail");
    auto rr = run_scenario(
        parse_ok(R"({"spec": "ou", "jobs": [{"op": "constants", "constant": "log_sobolev_constant", "p": 2,
                    "r0": -1, "Lambda0": 1, "expected": 3, "tol": 1e-9}]})"),
        quiet(dir));
    CHECK(rr.outcomes[0].status == "fail");
    CHECK(rr.exit_code == 1);
    fs::remove_all(dir);
}

TEST_CASE("a crashing task becomes an error outcome") {
    auto task = [](std::size_t i) {
        if (i == 1) {
            std::signal(SIGABRT, SIG_DFL);
            std::abort();
        }
        JobOutcome o;
        o.status = "pass";
        o.report = {{"index", i}};
        o.exports.push_back({"data.bin", std::string("\x00\x01\xff", 3)});
        return o;
    };
    auto out = run_pool(3, task, 2, true);
    REQUIRE(out.size() == 3);
    CHECK(out[0].status == "pass");
    CHECK(out[2].report.at("index") == 2);
    CHECK(out[2].exports[0].content == std::string("\x00\x01\xff", 3));
    CHECK(out[1].status == "error");
    CHECK(out[1].report.at("message").get<std::string>().find("signal") != std::string::npos);
}

TEST_CASE("exceptions without isolation become error outcomes") {
    auto out = run_pool(
        2,
        [](std::size_t i) -> JobOutcome {
            if (i == 0) throw std::runtime_error("boom");
            return JobOutcome{};
        },
        1, false);
    CHECK(out[0].status == "error");
    CHECK(out[1].status == "computed");
}

TEST_CASE("KLAB_WORKERS") {
    const unsigned fallback = std::max(1u, std::thread::hardware_concurrency());
    ::setenv("KLAB_WORKERS", "3", 1);
    CHECK(default_workers() == 3);
    ::setenv("KLAB_WORKERS", "0", 1);
    CHECK(default_workers() == fallback);
    ::setenv("KLAB_WORKERS", "two", 1);
    CHECK(default_workers() == fallback);
    ::unsetenv("KLAB_WORKERS");
    CHECK(default_workers() == fallback);
}

TEST_CASE("normalized runs are byte-identical") {
    const std::string text = R"({"spec": "ou", "seed": 7, "jobs": [
        {"id": "thr", "op": "constants", "constant": "hypercontractivity_threshold", "p": 2, "q": 4,
         "r0": -1, "Lambda0": 1, "nu0": 1},
        {"id": "feller", "op": "feller", "b": "cubic_minus"},
        {"id": "law", "op": "law", "f": "tanh", "count": 2, "levels": 1, "dt": 0.01, "h": 0.05}]})";
    const auto a = scratch("norm_a"), b = scratch("norm_b");
    auto ra = run_scenario(parse_ok(text), quiet(a, true));
    RunOptions ob = quiet(b, true);
    ob.workers = 2;
    auto rb = run_scenario(parse_ok(text), ob);
    CHECK(ra.exit_code == rb.exit_code);
    for (const char* f : {"summary.json", "thr.json", "feller.json", "law.json"}) CHECK(slurp(a / f) == slurp(b / f));
    CHECK_FALSE(ra.summary.contains("generated_at"));
    CHECK(slurp(a / "thr.json").find("elapsed_seconds") == std::string::npos);
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("bundled OU scenario") {
    const fs::path path = fs::path(KLAB_SOURCE_DIR) / "scenarios" / "ou_full.json";
    const auto dir = scratch("ou_full");
    RunOptions opt = quiet(dir, true);
    opt.workers = default_workers();
    auto rr = run_scenario(parse_ok(slurp(path)), opt);
    CHECK(rr.exit_code == 0);
    CHECK(rr.outcomes.size() == 12);
    for (const auto& o : rr.outcomes) {
        CHECK_MESSAGE(o.status == "pass", o.id << ": " << o.report.dump());
        CHECK(fs::exists(dir / (o.id + ".json")));
    }
    fs::remove_all(dir);
}
