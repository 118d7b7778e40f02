#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "klab/coefficients.hpp"

namespace klab::cli {

using nlohmann::json;

// "ou", "ou:a=2,q=0.5", inline JSON text, or a path to a JSON file.
json spec_description(const std::string& arg);
OperatorSpec resolve_spec(const json& description);

struct Export {
    std::string filename;
    std::string content;
};

struct JobOutcome {
    std::string id;
    std::string op;
    // "pass" | "fail" | "computed" | "skipped: precondition" | "error"
    std::string status = "computed";
    json report = json::object();
    std::vector<Export> exports;
    double seconds = 0.0;

    bool hard_failure() const { return status == "fail" || status == "error"; }
};

struct JobContext {
    json spec_json;
    json tolerances = json::object();
    unsigned long long seed = 0;
};

std::vector<std::string> job_operations();

// Runs one job description {"op": ..., params...}; never throws for job-level failures.
JobOutcome run_job(const json& job, const JobContext& ctx);

// Executes task(i) for i < count on `workers` concurrent slots. With `isolate` every task runs in
// a forked child, so a crash there turns into an "error" outcome instead of ending the process.
std::vector<JobOutcome> run_pool(std::size_t count, const std::function<JobOutcome(std::size_t)>& task,
                                 unsigned workers, bool isolate);

// KLAB_WORKERS when set to a positive integer, otherwise the hardware concurrency (at least 1).
unsigned default_workers();

struct ScenarioError {
    std::string location;
    std::string message;
};

struct Scenario {
    json spec;
    std::vector<json> jobs;
    std::string output_dir = "klab_out";
    json tolerances = json::object();
    unsigned long long seed = 0;
};

// Returns the scenario or the first problem with a location ("line 3, column 7" or a JSON path).
std::optional<Scenario> parse_scenario(const std::string& text, ScenarioError& err);

struct RunOptions {
    std::optional<std::string> output_dir;
    unsigned workers = 1;
    bool isolate = true;
    // Omits timestamps and timings so identical inputs give identical summaries.
    bool normalize = false;
};

struct RunResult {
    int exit_code = 0;
    json summary;
    std::vector<JobOutcome> outcomes;
};

RunResult run_scenario(const Scenario& sc, const RunOptions& opt);

// Writes `content` to `path` through a temporary file and a rename.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace klab::cli
