#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace klab {

enum class Arity { Scalar, Vector, Matrix };

// Orders of differentiation per spatial axis, e.g. {2,1} = D_xxy.
using MultiIndex = std::vector<int>;

int order_of(const MultiIndex& mi);
std::string multi_index_name(const MultiIndex& mi);
// All multi-indices of total order `order` in dimension d (lexicographic).
std::vector<MultiIndex> multi_indices(int d, int order);

// Writes the value at (t,x) into `out` (size 1, d or d*d; matrices row-major).
using Evaluator = std::function<void(double t, std::span<const double> x, std::span<double> out)>;

struct CoefficientField {
    Arity arity = Arity::Scalar;
    int d = 1;
    std::string symbol;
    Evaluator eval;
    std::map<MultiIndex, Evaluator> derivatives;
    // Every spatial derivative vanishes; missing derivatives are then reported as zero.
    bool constant_in_x = false;
    bool time_dependent = true;
    double holder_alpha = 0.5;

    std::size_t components() const;
    std::vector<double> value(double t, std::span<const double> x) const;
    double scalar(double t, std::span<const double> x) const;
    bool has_derivative(const MultiIndex& mi) const;
    // Throws Error("insufficient derivative data") when the derivative is unavailable.
    std::vector<double> derivative(const MultiIndex& mi, double t, std::span<const double> x) const;
    std::string derivative_symbol(const MultiIndex& mi) const;

    static CoefficientField scalar_field(int d, std::string symbol,
                                         std::function<double(double, std::span<const double>)> f);
    static CoefficientField constant_scalar(int d, std::string symbol, double value);
    static CoefficientField constant_matrix(int d, std::string symbol, std::vector<double> m);
};

struct DerivativeCheck {
    double max_rel_error = 0.0;
    std::string worst_symbol;
    int samples = 0;
};

// Compares every registered derivative with a central difference (step h) of the next lower one.
DerivativeCheck check_registered_derivatives(const CoefficientField& f, double t_min, double t_max,
                                             double radius, int samples = 100, double h = 1e-5,
                                             unsigned seed = 7);

struct OUSpec1D {
    std::function<double(double)> q;
    std::function<double(double)> a;
    // Set when q and a are constant; enables exact moment formulas.
    std::optional<double> q_const;
    std::optional<double> a_const;

    static OUSpec1D constant(double a, double q);
};

// Named constants supplied by the user or estimated (nu0, c0, r0, C, gamma, r, rho, L, M, K,
// Lambda0, C1, C2, p0, M2, M3, eps_rho).
struct DeclaredParams {
    std::map<std::string, double> values;
    std::optional<double> get(const std::string& key) const;
    double get_or(const std::string& key, double fallback) const;
    void set(const std::string& key, double v) { values[key] = v; }
};

struct OperatorSpec {
    std::string name;
    int d = 1;
    double t_min = -1e6;
    double t_max = 1e6;
    CoefficientField Q;
    CoefficientField b;
    CoefficientField c;
    std::optional<CoefficientField> phi;
    DeclaredParams params;
    // Present when the operator is a 1-D Ornstein-Uhlenbeck operator with x-independent diffusion.
    std::optional<OUSpec1D> ou;
    bool autonomous = false;
    bool c_zero = false;

    void validate() const;
    // Minimum eigenvalue of Q(t,x).
    double nu(double t, std::span<const double> x) const;
    // phi, or the default 1+|x|^2 when none is registered.
    CoefficientField lyapunov() const;
};

double min_eigenvalue_sym(std::span<const double> m, int d);
double max_eigenvalue_sym(std::span<const double> m, int d);

}  // namespace klab
