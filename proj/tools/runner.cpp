#include "runner.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstring>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "klab/errors.hpp"

namespace klab::cli {

namespace {

json outcome_to_wire(const JobOutcome& o) {
    json exports = json::array();
    for (const auto& e : o.exports)
        exports.push_back({{"filename", e.filename},
                           {"content", json::binary(std::vector<std::uint8_t>(e.content.begin(), e.content.end()))}});
    return {{"id", o.id}, {"op", o.op}, {"status", o.status}, {"report", o.report}, {"exports", exports},
            {"seconds", o.seconds}};
}

JobOutcome outcome_from_wire(const json& j) {
    JobOutcome o;
    o.id = j.at("id").get<std::string>();
    o.op = j.at("op").get<std::string>();
    o.status = j.at("status").get<std::string>();
    o.report = j.at("report");
    o.seconds = j.at("seconds").get<double>();
    for (const auto& e : j.at("exports")) {
        const auto& bytes = e.at("content").get_binary();
        o.exports.push_back({e.at("filename").get<std::string>(), std::string(bytes.begin(), bytes.end())});
    }
    return o;
}

bool write_all(int fd, const std::vector<std::uint8_t>& buf) {
    std::size_t off = 0;
    while (off < buf.size()) {
        ssize_t n = ::write(fd, buf.data() + off, buf.size() - off);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) return false;
        off += static_cast<std::size_t>(n);
    }
    return true;
}

JobOutcome crashed(std::size_t index, const std::string& why) {
    JobOutcome o;
    o.id = "job" + std::to_string(index);
    o.status = "error";
    o.report = {{"error", "crash"}, {"message", why}};
    return o;
}

JobOutcome run_forked(std::size_t index, const std::function<JobOutcome(std::size_t)>& task) {
    int fds[2];
    if (::pipe(fds) != 0) return crashed(index, "pipe() failed");
    const pid_t pid = ::fork();
    if (pid < 0) {
        ::close(fds[0]);
        ::close(fds[1]);
        return crashed(index, "fork() failed");
    }
    if (pid == 0) {
        ::close(fds[0]);
        JobOutcome o;
        try {
            o = task(index);
        } catch (const std::exception& e) {
            o = crashed(index, e.what());
        }
        const bool ok = write_all(fds[1], json::to_cbor(outcome_to_wire(o)));
        ::close(fds[1]);
        std::_Exit(ok ? 0 : 3);
    }
    ::close(fds[1]);
    std::vector<std::uint8_t> buf;
    std::uint8_t chunk[65536];
    for (;;) {
        ssize_t n = ::read(fds[0], chunk, sizeof chunk);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) break;
        buf.insert(buf.end(), chunk, chunk + n);
    }
    ::close(fds[0]);
    int wstatus = 0;
    while (::waitpid(pid, &wstatus, 0) < 0 && errno == EINTR) {
    }
    if (WIFSIGNALED(wstatus))
        return crashed(index, std::string("job terminated by signal ") + std::to_string(WTERMSIG(wstatus)) + " (" +
                                  strsignal(WTERMSIG(wstatus)) + ")");
    if (!WIFEXITED(wstatus) || WEXITSTATUS(wstatus) != 0 || buf.empty())
        return crashed(index, "job exited without a report");
    try {
        return outcome_from_wire(json::from_cbor(buf));
    } catch (const std::exception& e) {
        return crashed(index, std::string("unreadable job result: ") + e.what());
    }
}

std::string location_of(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < text.size() && i + 1 < byte; ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

std::string safe_name(const std::string& s) {
    std::string out;
    for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ? c : '_';
    return out.empty() ? "job" : out;
}

std::string utc_timestamp() {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

std::string dump(const json& j) { return j.dump(2, ' ', false, json::error_handler_t::replace) + "\n"; }

}  // namespace

unsigned default_workers() {
    if (const char* env = std::getenv("KLAB_WORKERS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<JobOutcome> run_pool(std::size_t count, const std::function<JobOutcome(std::size_t)>& task,
                                 unsigned workers, bool isolate) {
    std::vector<JobOutcome> results(count);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            if (isolate) {
                results[i] = run_forked(i, task);
            } else {
                try {
                    results[i] = task(i);
                } catch (const std::exception& e) {
                    results[i] = crashed(i, e.what());
                }
            }
        }
    };
    const unsigned n = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
    if (n == 1) {
        worker();
        return results;
    }
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < n; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    return results;
}

std::optional<Scenario> parse_scenario(const std::string& text, ScenarioError& err) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        err = {location_of(text, e.byte), e.what()};
        return std::nullopt;
    }
    auto fail = [&](std::string where, std::string what) {
        err = {std::move(where), std::move(what)};
        return std::nullopt;
    };
    if (!j.is_object()) return fail("$", "scenario must be a JSON object");
    Scenario sc;
    if (!j.contains("spec")) return fail("$.spec", "missing operator spec");
    sc.spec = j.at("spec");
    try {
        resolve_spec(sc.spec);
    } catch (const std::exception& e) {
        return fail("$.spec", e.what());
    }
    if (j.contains("output_dir")) {
        if (!j.at("output_dir").is_string()) return fail("$.output_dir", "must be a string");
        sc.output_dir = j.at("output_dir").get<std::string>();
    }
    if (j.contains("tolerances")) {
        if (!j.at("tolerances").is_object()) return fail("$.tolerances", "must be an object");
        for (auto& [k, v] : j.at("tolerances").items())
            if (!v.is_number()) return fail("$.tolerances." + k, "must be a number");
        sc.tolerances = j.at("tolerances");
    }
    if (j.contains("seed")) {
        if (!j.at("seed").is_number_unsigned()) return fail("$.seed", "must be a non-negative integer");
        sc.seed = j.at("seed").get<unsigned long long>();
    }
    if (!j.contains("jobs") || !j.at("jobs").is_array()) return fail("$.jobs", "missing job list");
    const auto ops = job_operations();
    std::set<std::string> ids;
    std::size_t i = 0;
    for (const auto& job : j.at("jobs")) {
        const std::string where = "$.jobs[" + std::to_string(i) + "]";
        if (!job.is_object()) return fail(where, "job must be an object");
        if (!job.contains("op") || !job.at("op").is_string()) return fail(where + ".op", "missing operation name");
        const std::string op = job.at("op").get<std::string>();
        if (std::find(ops.begin(), ops.end(), op) == ops.end())
            return fail(where + ".op", "unknown operation '" + op + "'");
        json copy = job;
        if (!copy.contains("id")) {
            std::ostringstream id;
            id << "job" << std::setw(2) << std::setfill('0') << i << "_" << op;
            copy["id"] = id.str();
        }
        if (!copy.at("id").is_string()) return fail(where + ".id", "must be a string");
        if (!ids.insert(safe_name(copy.at("id").get<std::string>())).second)
            return fail(where + ".id", "duplicate job id");
        if (copy.contains("spec")) {
            try {
                resolve_spec(copy.at("spec"));
            } catch (const std::exception& e) {
                return fail(where + ".spec", e.what());
            }
        }
        sc.jobs.push_back(std::move(copy));
        ++i;
    }
    return sc;
}

void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("io", "cannot write " + tmp);
        out << content;
        if (!out.flush()) throw Error("io", "cannot write " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

RunResult run_scenario(const Scenario& sc, const RunOptions& opt) {
    namespace fs = std::filesystem;
    const fs::path dir = opt.output_dir.value_or(sc.output_dir);
    fs::create_directories(dir);

    JobContext ctx{sc.spec, sc.tolerances, sc.seed};
    auto outcomes = run_pool(
        sc.jobs.size(), [&](std::size_t i) { return run_job(sc.jobs[i], ctx); }, opt.workers, opt.isolate);

    RunResult rr;
    json entries = json::array();
    std::map<std::string, int> counts{{"pass", 0}, {"fail", 0}, {"computed", 0}, {"skipped", 0}, {"error", 0}};
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        JobOutcome& o = outcomes[i];
        o.id = sc.jobs[i].at("id").get<std::string>();
        o.op = sc.jobs[i].at("op").get<std::string>();
        const std::string base = safe_name(o.id);
        json report = {{"id", o.id}, {"op", o.op}, {"status", o.status}, {"params", sc.jobs[i]}, {"result", o.report}};
        if (!opt.normalize) report["elapsed_seconds"] = o.seconds;
        json files = json::array();
        for (const auto& e : o.exports) {
            const std::string name = base + "_" + e.filename;
            write_file_atomic((dir / name).string(), e.content);
            files.push_back(name);
        }
        report["exports"] = files;
        write_file_atomic((dir / (base + ".json")).string(), dump(report));

        if (o.status.rfind("skipped", 0) == 0)
            ++counts["skipped"];
        else
            ++counts[o.status];
        if (o.hard_failure()) rr.exit_code = 1;
        json entry = {{"id", o.id}, {"op", o.op}, {"status", o.status}, {"report", base + ".json"}};
        if (o.status.rfind("skipped", 0) == 0 && o.report.contains("reason")) entry["reason"] = o.report.at("reason");
        entries.push_back(entry);
    }
    json summary = {{"spec", sc.spec},      {"seed", sc.seed}, {"tolerances", sc.tolerances},
                    {"jobs", entries},      {"counts", counts}, {"total", outcomes.size()},
                    {"exit_code", rr.exit_code}, {"normalized", opt.normalize}};
    if (!opt.normalize) {
        summary["generated_at"] = utc_timestamp();
        summary["workers"] = opt.workers;
    }
    write_file_atomic((dir / "summary.json").string(), dump(summary));
    rr.summary = summary;
    rr.outcomes = std::move(outcomes);
    return rr;
}

}  // namespace klab::cli
