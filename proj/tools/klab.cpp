#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "klab/errors.hpp"
#include "runner.hpp"

using klab::cli::json;

namespace {

struct Sub {
    CLI::App* app = nullptr;
    json job = json::object();
    std::string out;
};

void num(Sub& s, const std::string& flag, const std::string& key, const std::string& help) {
    s.app->add_option_function<double>(flag, [&s, key](double v) { s.job[key] = v; }, help);
}

void whole(Sub& s, const std::string& flag, const std::string& key, const std::string& help) {
    s.app->add_option_function<int>(flag, [&s, key](int v) { s.job[key] = v; }, help);
}

void str(Sub& s, const std::string& flag, const std::string& key, const std::string& help) {
    s.app->add_option_function<std::string>(flag, [&s, key](const std::string& v) { s.job[key] = v; }, help);
}

void list(Sub& s, const std::string& flag, const std::string& key, const std::string& help) {
    s.app->add_option_function<std::vector<double>>(flag, [&s, key](const std::vector<double>& v) { s.job[key] = v; }, help)
        ->delimiter(',');
}

void spec_flag(Sub& s) {
    str(s, "--spec", "spec", "catalogue id with optional params (ou:a=2,q=1), inline JSON, or a JSON file");
}

void exhaustion_flags(Sub& s) {
    num(s, "--R0", "R0", "half-width of the first box");
    num(s, "--step", "step", "box growth per exhaustion level");
    whole(s, "--levels", "levels", "maximum number of exhaustion levels");
    num(s, "--tol-exhaust", "tol_exhaust", "stop when successive levels differ by less than this");
    num(s, "--theta", "theta", "time-stepping parameter in [0.5, 1]");
    num(s, "--dt", "dt", "time step");
}

void method_flag(Sub& s) { str(s, "--method", "method", "measure construction: analytic | burnin"); }

int emit(const klab::cli::JobOutcome& o, const std::string& out) {
    json j = {{"op", o.op}, {"status", o.status}, {"result", o.report}};
    std::cout << j.dump(2, ' ', false, json::error_handler_t::replace) << "\n";
    if (!out.empty() && !o.exports.empty()) {
        namespace fs = std::filesystem;
        // A single export goes to the given path; several go into it as a directory.
        if (o.exports.size() == 1 && !fs::is_directory(out)) {
            klab::cli::write_file_atomic(out, o.exports.front().content);
        } else {
            fs::create_directories(out);
            for (const auto& e : o.exports) klab::cli::write_file_atomic((fs::path(out) / e.filename).string(), e.content);
        }
    }
    if (o.status == "error") std::cerr << "klab: " << o.report.value("message", std::string("job failed")) << "\n";
    return o.hard_failure() ? 1 : 0;
}

int run_command(const std::string& file, const std::string& out, bool normalize, bool no_isolate) {
    std::ifstream in(file);
    if (!in) {
        std::cerr << "klab: cannot open scenario " << file << "\n";
        return 2;
    }
    std::stringstream buf;
    buf << in.rdbuf();
    klab::cli::ScenarioError err;
    auto sc = klab::cli::parse_scenario(buf.str(), err);
    if (!sc) {
        std::cerr << "klab: " << file << ": " << err.location << ": " << err.message << "\n";
        return 2;
    }
    klab::cli::RunOptions opt;
    if (!out.empty()) opt.output_dir = out;
    opt.workers = klab::cli::default_workers();
    opt.normalize = normalize;
    opt.isolate = !no_isolate;
    auto rr = klab::cli::run_scenario(*sc, opt);
    std::cout << rr.summary.at("counts").dump() << " total=" << rr.outcomes.size() << " exit=" << rr.exit_code << "\n";
    return rr.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"klab: numerical laboratory for nonautonomous Kolmogorov operators"};
    app.set_help_flag("--help", "print this help and exit");
    app.require_subcommand(1);
    std::map<std::string, Sub> subs;
    auto make = [&](const std::string& name, const std::string& help) -> Sub& {
        Sub& s = subs[name];
        s.app = app.add_subcommand(name, help);
        s.app->set_help_flag("--help", "list the flags of this subcommand");
        s.job["op"] = name;
        return s;
    };

    {
        Sub& s = make("solve", "evolve a datum with domain exhaustion and export snapshots as CSV");
        spec_flag(s);
        str(s, "--f", "f", "datum: tanh | x | const | sin | gauss | step");
        num(s, "--s", "s", "initial time");
        num(s, "--t", "t", "final time");
        exhaustion_flags(s);
        num(s, "--h", "grid_h", "grid spacing");
        list(s, "--snapshots", "snapshots", "extra output times (comma separated)");
        s.app->add_flag_function("--binary", [&s](std::int64_t) { s.job["binary"] = true; },
                                 "also export the little-endian binary snapshot file");
        s.app->add_option("--out", s.out, "CSV path (directory when --binary is given)");
    }
    {
        Sub& s = make("verify", "check a derivative estimate against solver output");
        spec_flag(s);
        str(s, "--estimate", "estimate", "aa | aaaa | stimasem | poi-es");
        whole(s, "--k", "k", "derivative order on the left-hand side");
        num(s, "--p", "p", "exponent p");
        whole(s, "--h", "h", "lower derivative order (aaaa, stimasem)");
        whole(s, "--m", "m", "upper derivative order for stimasem (defaults to --k)");
        str(s, "--f", "f", "datum name");
        num(s, "--eps", "eps", "mollifier width of the step datum");
        num(s, "--s", "s", "initial time");
        num(s, "--t", "t", "final time");
        list(s, "--times", "times", "elapsed times for stimasem");
        num(s, "--dt", "dt", "time step");
        num(s, "--dx", "grid_h", "grid spacing");
        num(s, "--tol", "tol", "override the tolerance");
        s.app->add_flag_function("--no-refine", [&s](std::int64_t) { s.job["refine"] = false; },
                                 "skip the coarse-grid refinement run");
        s.app->add_option("--out", s.out, "CSV of x, lhs, rhs, margin (or tau, norm)");
    }
    {
        Sub& s = make("constants", "evaluate an explicit constant and print its report");
        spec_flag(s);
        str(s, "--constant", "constant",
            "sigma_kp | phi_pk | gamma_p23 | gamma_hk | rate_p1 | hypercontractivity_threshold | log_sobolev_constant");
        whole(s, "--d", "d", "dimension");
        num(s, "--p", "p", "exponent p");
        num(s, "--q", "q", "target exponent q (threshold)");
        whole(s, "--k", "k", "derivative order");
        whole(s, "--h", "h", "lower order for gamma_hk");
        num(s, "--r", "r", "elapsed time r (gamma_*) or the bound r (rate_p1)");
        for (const char* key : {"gamma", "nu0", "c0", "M", "L", "K", "C", "r0", "Lambda0", "alpha", "K1p", "K2p"})
            num(s, std::string("--") + key, key, std::string("input ") + key);
        num(s, "--sup-term", "sup_term", "supremum of (1-p)nu + c_k(p) nu^gamma");
        num(s, "--expected", "expected", "compare with this value");
    }
    {
        Sub& s = make("feller", "classify uniqueness of bounded solutions in one dimension");
        str(s, "--q", "q", "diffusion id: const[:v]");
        str(s, "--b", "b", "drift id: zero | cubic_plus[:k] | cubic_minus[:k] | power[:eps] | linear[:a]");
        list(s, "--cutoffs", "cutoffs", "increasing cutoffs > 1 (comma separated)");
        num(s, "--lambda", "lambda", "resolvent parameter");
        num(s, "--probe-weight", "probe_weight", "report the limit of x^w Q(x)");
        str(s, "--expect", "expect", "expected conclusion");
    }
    {
        Sub& s = make("measures", "compute the tight evolution system of measures and export densities");
        spec_flag(s);
        method_flag(s);
        list(s, "--times", "times", "times (comma separated)");
        num(s, "--R", "measure_R", "box half-width");
        num(s, "--h", "measure_h", "grid spacing");
        num(s, "--dt", "measure_dt", "time step");
        num(s, "--burn-length", "burn_length", "burn-in length before the first time");
        list(s, "--radii", "radii", "radii for the tightness table");
        s.app->add_option("--out", s.out, "CSV of densities");
    }
    {
        Sub& s = make("invariance", "check that the measures are invariant under the evolution operator");
        spec_flag(s);
        method_flag(s);
        str(s, "--f", "f", "test function or 'family'");
        num(s, "--s", "s", "initial time");
        num(s, "--t", "t", "final time");
        num(s, "--dt", "dt", "solver time step");
        num(s, "--dx", "grid_h", "solver grid spacing");
        num(s, "--tol", "tol", "override the tolerance");
    }
    {
        Sub& s = make("lsi", "check the logarithmic Sobolev inequality");
        spec_flag(s);
        method_flag(s);
        str(s, "--f", "f", "test function or 'family'");
        num(s, "--s", "s", "time of the measure");
        num(s, "--p", "p", "exponent p >= 2");
        num(s, "--Lambda0", "Lambda0", "sup of the largest diffusion eigenvalue");
        num(s, "--r0", "r0", "gradient rate (negative)");
        num(s, "--tol", "tol", "override the tolerance");
    }
    {
        Sub& s = make("poincare", "check the Poincare inequality");
        spec_flag(s);
        method_flag(s);
        str(s, "--f", "f", "test function or 'family'");
        num(s, "--s", "s", "time of the measure");
        num(s, "--C2", "C2", "log-Sobolev constant at p = 2");
        num(s, "--tol", "tol", "override the tolerance");
    }
    {
        Sub& s = make("hyper", "check hypercontractivity past the threshold time");
        spec_flag(s);
        method_flag(s);
        str(s, "--f", "f", "test function or 'family'");
        num(s, "--s", "s", "initial time");
        num(s, "--p", "p", "source exponent");
        num(s, "--q", "q", "target exponent");
        str(s, "--propagator", "propagator", "oracle | solver");
        num(s, "--tol", "tol", "override the tolerance");
        s.app->add_option("--out", s.out, "CSV of (t - s, ratio) curves");
    }
    {
        Sub& s = make("super", "probe supercontractivity and classify drift growth");
        spec_flag(s);
        method_flag(s);
        list(s, "--lambdas", "lambdas", "exponents lambda (comma separated)");
        list(s, "--times", "times", "times of the family");
        num(s, "--radius", "radius", "outer radius for the drift growth fit");
        num(s, "--delta", "delta", "recorded delta");
    }
    {
        Sub& s = make("decay", "estimate the exponential decay rate of G(t,s)f - mean");
        spec_flag(s);
        method_flag(s);
        str(s, "--f", "f", "test function");
        num(s, "--s", "s", "initial time");
        list(s, "--p", "p", "exponents (comma separated)");
        list(s, "--taus", "taus", "elapsed times (comma separated)");
        str(s, "--propagator", "propagator", "oracle | solver");
        num(s, "--expected-slope", "expected_slope", "compare fitted slopes with this value");
        s.app->add_option("--out", s.out, "CSV of (p, tau, norm, grad_norm)");
    }

    std::string scenario, run_out;
    bool normalize = false, no_isolate = false;
    CLI::App* run = app.add_subcommand("run", "execute a scenario file (KLAB_WORKERS sets the pool size)");
    run->set_help_flag("--help", "list the flags of this subcommand");
    run->add_option("scenario", scenario, "scenario JSON file")->required();
    run->add_option("--out", run_out, "output directory (overrides the scenario's)");
    run->add_flag("--normalize", normalize, "omit timestamps and timings from reports");
    run->add_flag("--no-isolate", no_isolate, "run jobs in threads instead of child processes");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (run->parsed()) return run_command(scenario, run_out, normalize, no_isolate);
    for (auto& [name, s] : subs) {
        if (!s.app->parsed()) continue;
        klab::cli::JobContext ctx;
        try {
            ctx.spec_json = s.job.contains("spec") ? klab::cli::spec_description(s.job.at("spec").get<std::string>())
                                                   : json{{"catalogue", "ou"}};
        } catch (const std::exception& e) {
            std::cerr << "klab: --spec: " << e.what() << "\n";
            return 2;
        }
        s.job.erase("spec");
        return emit(klab::cli::run_job(s.job, ctx), s.out);
    }
    return 2;
}
