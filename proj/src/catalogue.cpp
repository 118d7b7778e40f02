#include "klab/catalogue.hpp"

#include <cmath>
#include <numbers>

#include "klab/errors.hpp"

namespace klab {

using nlohmann::json;

namespace {

// g(t, x) and its x-derivatives of order 1..3 (index 0 = value).
using Scalar1D = std::function<double(double t, double x, int order)>;

double num(const json& j, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number()) throw Error("parse", std::string("field '") + key + "' must be a number");
    return j.at(key).get<double>();
}

std::string type_of(const json& j) {
    if (!j.is_object() || !j.contains("type") || !j.at("type").is_string())
        throw Error("parse", "coefficient description needs a string 'type'");
    return j.at("type").get<std::string>();
}

CoefficientField componentwise_drift(int d, Scalar1D g, int max_order, bool time_dep) {
    CoefficientField f;
    f.arity = Arity::Vector;
    f.d = d;
    f.symbol = "b";
    f.time_dependent = time_dep;
    f.eval = [g, d](double t, std::span<const double> x, std::span<double> out) {
        for (int i = 0; i < d; ++i) out[i] = g(t, x[i], 0);
    };
    for (int k = 1; k <= max_order; ++k) {
        for (const MultiIndex& mi : multi_indices(d, k)) {
            int axis = -1;
            for (int a = 0; a < d; ++a)
                if (mi[a] == k) axis = a;
            f.derivatives[mi] = [g, d, axis, k](double t, std::span<const double> x, std::span<double> out) {
                for (int i = 0; i < d; ++i) out[i] = 0.0;
                if (axis >= 0) out[axis] = g(t, x[axis], k);
            };
        }
    }
    return f;
}

double sin_derivative(double x, int k) {
    switch (k % 4) {
        case 0: return std::sin(x);
        case 1: return std::cos(x);
        case 2: return -std::sin(x);
        default: return -std::cos(x);
    }
}

CoefficientField build_diffusion(int d, const json& j) {
    const std::string type = type_of(j);
    if (type == "constant") {
        double q = num(j, "value", 1.0);
        std::vector<double> m(static_cast<std::size_t>(d) * d, 0.0);
        for (int i = 0; i < d; ++i) m[i * d + i] = q;
        return CoefficientField::constant_matrix(d, "Q", m);
    }
    if (type == "matrix") {
        auto entries = j.at("entries").get<std::vector<double>>();
        return CoefficientField::constant_matrix(d, "Q", entries);
    }
    if (type == "modulated") {
        double q0 = num(j, "value", 1.0), q1 = num(j, "amp", 0.0), w = num(j, "omega", 1.0);
        CoefficientField f;
        f.arity = Arity::Matrix;
        f.d = d;
        f.symbol = "Q";
        f.constant_in_x = true;
        f.eval = [=](double t, std::span<const double>, std::span<double> out) {
            double q = q0 + q1 * std::sin(w * t);
            for (int i = 0; i < d * d; ++i) out[i] = 0.0;
            for (int i = 0; i < d; ++i) out[i * d + i] = q;
        };
        return f;
    }
    if (type == "oscillating") {
        double q0 = num(j, "value", 1.0), q1 = num(j, "amp", 0.25);
        CoefficientField f;
        f.arity = Arity::Matrix;
        f.d = d;
        f.symbol = "Q";
        f.time_dependent = false;
        auto diag = [d](std::span<double> out, double v) {
            for (int i = 0; i < d * d; ++i) out[i] = 0.0;
            for (int i = 0; i < d; ++i) out[i * d + i] = v;
        };
        f.eval = [=](double, std::span<const double> x, std::span<double> out) {
            diag(out, q0 + q1 * std::sin(x[0]));
        };
        for (int k = 1; k <= 3; ++k)
            for (const MultiIndex& mi : multi_indices(d, k)) {
                bool pure = mi[0] == k;
                f.derivatives[mi] = [=](double, std::span<const double> x, std::span<double> out) {
                    diag(out, pure ? q1 * sin_derivative(x[0], k) : 0.0);
                };
            }
        return f;
    }
    throw Error("parse", "unknown diffusion type '" + type + "'");
}

CoefficientField build_drift(int d, const json& j) {
    const std::string type = type_of(j);
    if (type == "zero") {
        CoefficientField f;
        f.arity = Arity::Vector;
        f.d = d;
        f.symbol = "b";
        f.constant_in_x = true;
        f.time_dependent = false;
        f.eval = [d](double, std::span<const double>, std::span<double> out) {
            for (int i = 0; i < d; ++i) out[i] = 0.0;
        };
        return f;
    }
    if (type == "linear") {
        double a0 = num(j, "rate", 1.0), a1 = num(j, "amp", 0.0), w = num(j, "omega", 1.0);
        Scalar1D g = [=](double t, double x, int k) {
            double a = a0 + a1 * std::sin(w * t);
            return k == 0 ? -a * x : (k == 1 ? -a : 0.0);
        };
        return componentwise_drift(d, g, 3, a1 != 0.0);
    }
    if (type == "cubic") {
        double kappa = num(j, "kappa", 1.0), sign = num(j, "sign", -1.0);
        double s = sign * kappa;
        Scalar1D g = [s](double, double x, int k) {
            switch (k) {
                case 0: return s * x * x * x;
                case 1: return 3.0 * s * x * x;
                case 2: return 6.0 * s * x;
                default: return 6.0 * s;
            }
        };
        return componentwise_drift(d, g, 3, false);
    }
    if (type == "power") {
        double eps = num(j, "eps", 1.0);
        if (!(eps > 0.0)) throw Error("parse", "power drift needs eps > 0");
        Scalar1D g = [eps](double, double x, int k) {
            double ax = std::abs(x), sg = x < 0 ? -1.0 : 1.0;
            switch (k) {
                case 0: return -x * std::pow(ax, eps);
                case 1: return -(1.0 + eps) * std::pow(ax, eps);
                case 2: return -(1.0 + eps) * eps * sg * std::pow(ax, eps - 1.0);
                default: return -(1.0 + eps) * eps * (eps - 1.0) * std::pow(ax, eps - 2.0);
            }
        };
        int max_order = eps >= 2.0 ? 3 : (eps >= 1.0 ? 2 : 1);
        return componentwise_drift(d, g, max_order, false);
    }
    if (type == "log") {
        const double e = std::numbers::e;
        Scalar1D g = [e](double, double x, int k) {
            double s = e + x * x;
            switch (k) {
                case 0: return -x * std::log(s);
                case 1: return -std::log(s) - 2.0 * x * x / s;
                case 2: return -2.0 * x / s - 4.0 * e * x / (s * s);
                default: return -2.0 * (e - x * x) / (s * s) - 4.0 * e * (e - 3.0 * x * x) / (s * s * s);
            }
        };
        return componentwise_drift(d, g, 3, false);
    }
    throw Error("parse", "unknown drift type '" + type + "'");
}

CoefficientField build_potential(int d, const json& j) {
    const std::string type = type_of(j);
    if (type == "zero") return CoefficientField::constant_scalar(d, "c", 0.0);
    if (type == "constant") return CoefficientField::constant_scalar(d, "c", num(j, "value", 0.0));
    if (type == "modulated") {
        double c0 = num(j, "value", 0.0), c1 = num(j, "amp", 0.0), w = num(j, "omega", 1.0);
        CoefficientField f = CoefficientField::scalar_field(
            d, "c", [=](double t, std::span<const double>) { return c0 + c1 * std::sin(w * t); });
        f.constant_in_x = true;
        return f;
    }
    if (type == "quadratic") {
        double c0 = num(j, "value", 0.0), kappa = num(j, "kappa", 1.0);
        CoefficientField f = CoefficientField::scalar_field(d, "c", [=](double, std::span<const double> x) {
            double s = 0.0;
            for (double v : x) s += v * v;
            return c0 - kappa * s;
        });
        f.time_dependent = false;
        for (int k = 1; k <= 3; ++k)
            for (const MultiIndex& mi : multi_indices(d, k)) {
                int axis = -1;
                for (int a = 0; a < d; ++a)
                    if (mi[a] == k) axis = a;
                f.derivatives[mi] = [=](double, std::span<const double> x, std::span<double> out) {
                    if (k == 1) out[0] = -2.0 * kappa * x[axis];
                    else if (k == 2 && axis >= 0) out[0] = -2.0 * kappa;
                    else out[0] = 0.0;
                };
            }
        return f;
    }
    throw Error("parse", "unknown potential type '" + type + "'");
}

json expand_shorthand(const json& j) {
    const std::string id = j.at("catalogue").get<std::string>();
    int d = j.value("d", 1);
    double q = j.value("q", 1.0);
    json out = {{"name", id}, {"d", d}, {"diffusion", {{"type", "constant"}, {"value", q}}},
                {"potential", {{"type", "zero"}}}};
    if (id == "ou") {
        out["drift"] = {{"type", "linear"}, {"rate", j.value("a", 1.0)}};
    } else if (id == "ou_periodic") {
        out["drift"] = {{"type", "linear"}, {"rate", j.value("a", 1.0)}, {"amp", j.value("amp", 0.5)},
                        {"omega", j.value("omega", 1.0)}};
    } else if (id == "heat") {
        out["drift"] = {{"type", "zero"}};
    } else if (id == "cubic_minus" || id == "cubic_plus") {
        out["drift"] = {{"type", "cubic"}, {"kappa", j.value("kappa", 1.0)}, {"sign", id == "cubic_minus" ? -1.0 : 1.0}};
    } else if (id == "power") {
        out["drift"] = {{"type", "power"}, {"eps", j.value("eps", 1.0)}};
    } else if (id == "log") {
        out["drift"] = {{"type", "log"}};
    } else {
        throw Error("parse", "unknown catalogue id '" + id + "'");
    }
    if (j.contains("declared")) out["declared"] = j.at("declared");
    if (j.contains("interval")) out["interval"] = j.at("interval");
    if (j.contains("potential")) out["potential"] = j.at("potential");
    return out;
}

}  // namespace

std::vector<std::string> catalogue_ids() {
    return {"ou", "ou_periodic", "heat", "cubic_minus", "cubic_plus", "power", "log"};
}

OperatorSpec spec_from_json(const json& jin) {
    if (!jin.is_object()) throw Error("parse", "operator spec must be a JSON object");
    const json j = jin.contains("catalogue") ? expand_shorthand(jin) : jin;
    OperatorSpec s;
    s.name = j.value("name", std::string("custom"));
    s.d = j.value("d", 1);
    if (s.d < 1) throw Error("parse", "d must be >= 1");
    if (j.contains("interval")) {
        auto iv = j.at("interval").get<std::vector<double>>();
        if (iv.size() != 2) throw Error("parse", "interval needs two numbers");
        s.t_min = iv[0];
        s.t_max = iv[1];
    }
    const json diff = j.value("diffusion", json{{"type", "constant"}, {"value", 1.0}});
    const json drift = j.value("drift", json{{"type", "zero"}});
    const json pot = j.value("potential", json{{"type", "zero"}});
    s.Q = build_diffusion(s.d, diff);
    s.b = build_drift(s.d, drift);
    s.c = build_potential(s.d, pot);
    if (j.contains("declared"))
        for (auto& [k, v] : j.at("declared").items()) s.params.set(k, v.get<double>());
    s.c_zero = type_of(pot) == "zero";
    s.autonomous = !s.Q.time_dependent && !s.b.time_dependent && !s.c.time_dependent;

    const std::string dt = type_of(drift), qt = type_of(diff);
    if (s.d == 1 && dt == "linear" && (qt == "constant" || qt == "modulated") && s.c_zero) {
        double a0 = num(drift, "rate", 1.0), a1 = num(drift, "amp", 0.0), wa = num(drift, "omega", 1.0);
        double q0 = num(diff, "value", 1.0), q1 = qt == "modulated" ? num(diff, "amp", 0.0) : 0.0;
        double wq = num(diff, "omega", 1.0);
        OUSpec1D ou;
        ou.a = [=](double t) { return a0 + a1 * std::sin(wa * t); };
        ou.q = [=](double t) { return q0 + q1 * std::sin(wq * t); };
        if (a1 == 0.0) ou.a_const = a0;
        if (q1 == 0.0) ou.q_const = q0;
        s.ou = ou;
    }
    s.validate();
    return s;
}

OperatorSpec make_ou(double a, double q, int d) {
    return spec_from_json({{"name", "ou"}, {"d", d}, {"diffusion", {{"type", "constant"}, {"value", q}}},
                           {"drift", {{"type", "linear"}, {"rate", a}}}});
}

OperatorSpec make_ou_modulated(double a0, double a1, double omega, double q) {
    return spec_from_json({{"name", "ou_periodic"}, {"d", 1}, {"diffusion", {{"type", "constant"}, {"value", q}}},
                           {"drift", {{"type", "linear"}, {"rate", a0}, {"amp", a1}, {"omega", omega}}}});
}

OperatorSpec make_heat(double q, int d) {
    return spec_from_json({{"name", "heat"}, {"d", d}, {"diffusion", {{"type", "constant"}, {"value", q}}},
                           {"drift", {{"type", "zero"}}}});
}

OperatorSpec make_cubic(double sign, double kappa, double q, int d) {
    return spec_from_json({{"name", sign < 0 ? "cubic_minus" : "cubic_plus"}, {"d", d},
                           {"diffusion", {{"type", "constant"}, {"value", q}}},
                           {"drift", {{"type", "cubic"}, {"kappa", kappa}, {"sign", sign}}}});
}

OperatorSpec make_power_drift(double eps, double q) {
    return spec_from_json({{"name", "power"}, {"d", 1}, {"diffusion", {{"type", "constant"}, {"value", q}}},
                           {"drift", {{"type", "power"}, {"eps", eps}}}});
}

OperatorSpec make_log_drift(double q) {
    return spec_from_json({{"name", "log"}, {"d", 1}, {"diffusion", {{"type", "constant"}, {"value", q}}},
                           {"drift", {{"type", "log"}}}});
}

}  // namespace klab
