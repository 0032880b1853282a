#ifndef PNF_IO_HPP
#define PNF_IO_HPP

#include <cctype>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include <pnf/error.hpp>
#include <pnf/foliation.hpp>
#include <pnf/invariants.hpp>
#include <pnf/normalize.hpp>
#include <pnf/poisson.hpp>
#include <pnf/spectral.hpp>

namespace pnf::io
{

using Json = nlohmann::ordered_json;

/// Parsed input document.
struct ProblemSpec {
    std::string name;
    std::size_t n = 0;
    std::size_t order = 4;
    std::size_t grid = 256;
    PoissonStructure structure{1, 1, 8};
};

/// Recursive-descent evaluator for coefficient expressions. The value of an expression is a
/// truncated series in x with coefficients sampled on the θ grid.
///   expr    := term (('+'|'-') term)*
///   term    := unary (('*'|'/') unary)*
///   unary   := ('+'|'-') unary | power
///   power   := primary ('^' unary)?
///   primary := number | name | name '(' expr ')' | '(' expr ')'
/// Names: theta, pi, x1..xn, user constants; functions cos, sin, exp, sqrt, log of θ alone.
class ExpressionParser
{
public:
    ExpressionParser(std::size_t n, std::size_t order, std::size_t grid, std::map<std::string, double> constants = {})
        : m_n(n), m_order(order), m_grid(grid), m_constants(std::move(constants))
    {
    }

    FormalSeries parse(const std::string &text)
    {
        m_text = text;
        m_pos = 0;
        FormalSeries v = expr();
        skip_space();
        if (m_pos != m_text.size()) {
            fail("unexpected '" + std::string(1, m_text[m_pos]) + "'");
        }
        return v;
    }

private:
    [[noreturn]] void fail(const std::string &what) const
    {
        raise(ErrorKind::SchemaError, "expression \"" + m_text + "\" at offset " + std::to_string(m_pos) + ": " + what);
    }

    void skip_space()
    {
        while (m_pos < m_text.size() && std::isspace(static_cast<unsigned char>(m_text[m_pos]))) {
            ++m_pos;
        }
    }

    bool accept(char c)
    {
        skip_space();
        if (m_pos < m_text.size() && m_text[m_pos] == c) {
            ++m_pos;
            return true;
        }
        return false;
    }

    FormalSeries constant(double c) const
    {
        return FormalSeries::constant(m_n, m_order, PeriodicFn::constant(m_grid, c));
    }

    FormalSeries of_theta(const PeriodicFn &f) const
    {
        return FormalSeries::constant(m_n, m_order, f);
    }

    /// The θ-only part, or an error if x appears.
    PeriodicFn theta_only(const FormalSeries &s, const std::string &context) const
    {
        for (std::size_t idx : s.nonzero_terms()) {
            if (s.basis().degree(idx) != 0) {
                fail(context + " needs an expression in theta only");
            }
        }
        return s.coefficient(MultiIndex(m_n, 0));
    }

    FormalSeries expr()
    {
        FormalSeries v = term();
        for (;;) {
            if (accept('+')) {
                v += term();
            } else if (accept('-')) {
                v -= term();
            } else {
                return v;
            }
        }
    }

    FormalSeries term()
    {
        FormalSeries v = unary();
        for (;;) {
            if (accept('*')) {
                v = v * unary();
            } else if (accept('/')) {
                const PeriodicFn d = theta_only(unary(), "division");
                try {
                    v *= d.reciprocal(1e-12 * d.max_abs());
                } catch (const Error &) {
                    fail("division by a function with a zero");
                }
            } else {
                return v;
            }
        }
    }

    FormalSeries unary()
    {
        if (accept('-')) {
            return -unary();
        }
        if (accept('+')) {
            return unary();
        }
        return power();
    }

    FormalSeries power()
    {
        FormalSeries base = primary();
        if (!accept('^')) {
            return base;
        }
        const PeriodicFn e = theta_only(unary(), "exponent");
        const double k = e.mean();
        if (e.max_value() - e.min_value() > 0 || std::abs(k - std::round(k)) > 1e-12 || std::abs(k) > 64) {
            fail("exponent must be a small integer constant");
        }
        long m = std::lround(k);
        if (m < 0) {
            const PeriodicFn b = theta_only(base, "negative power");
            try {
                base = of_theta(b.reciprocal(1e-12 * b.max_abs()));
            } catch (const Error &) {
                fail("negative power of a function with a zero");
            }
            m = -m;
        }
        FormalSeries out = constant(1);
        for (long i = 0; i < m; ++i) {
            out = out * base;
        }
        return out;
    }

    FormalSeries primary()
    {
        skip_space();
        if (m_pos >= m_text.size()) {
            fail("unexpected end");
        }
        if (accept('(')) {
            FormalSeries v = expr();
            if (!accept(')')) {
                fail("missing ')'");
            }
            return v;
        }
        const char c = m_text[m_pos];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            std::size_t used = 0;
            double v = 0;
            try {
                v = std::stod(m_text.substr(m_pos), &used);
            } catch (const std::exception &) {
                fail("bad number");
            }
            m_pos += used;
            return constant(v);
        }
        if (!std::isalpha(static_cast<unsigned char>(c))) {
            fail("unexpected '" + std::string(1, c) + "'");
        }
        const std::size_t start = m_pos;
        while (m_pos < m_text.size()
               && (std::isalnum(static_cast<unsigned char>(m_text[m_pos])) || m_text[m_pos] == '_')) {
            ++m_pos;
        }
        const std::string name = m_text.substr(start, m_pos - start);
        if (accept('(')) {
            const PeriodicFn arg = theta_only(expr(), name + "()");
            if (!accept(')')) {
                fail("missing ')'");
            }
            if (name == "cos") {
                return of_theta(arg.map([](double v) { return std::cos(v); }));
            }
            if (name == "sin") {
                return of_theta(arg.map([](double v) { return std::sin(v); }));
            }
            if (name == "exp") {
                return of_theta(arg.exp());
            }
            if (name == "sqrt" || name == "log") {
                if (arg.min_value() < 0 || (name == "log" && arg.min_value() <= 0)) {
                    fail(name + " of a function that is not positive");
                }
                return of_theta(name == "sqrt" ? arg.map([](double v) { return std::sqrt(v); })
                                               : arg.map([](double v) { return std::log(v); }));
            }
            fail("unknown function " + name);
        }
        if (name == "theta") {
            return of_theta(PeriodicFn::from_function(m_grid, [](double t) { return t; }));
        }
        if (name == "pi") {
            return constant(M_PI);
        }
        if (name.size() > 1 && name[0] == 'x'
            && name.find_first_not_of("0123456789", 1) == std::string::npos) {
            const std::size_t k = std::stoul(name.substr(1));
            if (k == 0 || k > m_n) {
                fail("variable " + name + " out of range");
            }
            return FormalSeries::variable(m_n, m_order, m_grid, k - 1);
        }
        if (const auto it = m_constants.find(name); it != m_constants.end()) {
            return constant(it->second);
        }
        fail("unknown name " + name);
    }

    std::size_t m_n, m_order, m_grid;
    std::map<std::string, double> m_constants;
    std::string m_text;
    std::size_t m_pos = 0;
};

namespace detail
{

/// "theta" → 0, "xk" → k; anything else is a schema error.
inline std::size_t coordinate_index(const std::string &name, std::size_t n)
{
    if (name == "theta") {
        return 0;
    }
    if (name.size() > 1 && name[0] == 'x' && name.find_first_not_of("0123456789", 1) == std::string::npos) {
        const std::size_t k = std::stoul(name.substr(1));
        if (k >= 1 && k <= n) {
            return k;
        }
    }
    raise(ErrorKind::SchemaError, "unknown coordinate '" + name + "' in bracket key");
}

inline std::string trim(const std::string &s)
{
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

inline FormalSeries coefficient_value(const Json &v, ExpressionParser &parser, std::size_t n, std::size_t order,
                                      std::size_t grid)
{
    if (v.is_number()) {
        return FormalSeries::constant(n, order, PeriodicFn::constant(grid, v.get<double>()));
    }
    if (v.is_string()) {
        return parser.parse(v.get<std::string>());
    }
    if (v.is_array()) {
        std::vector<double> c;
        for (const auto &x : v) {
            if (!x.is_number()) {
                raise(ErrorKind::SchemaError, "Fourier coefficient lists must hold numbers");
            }
            c.push_back(x.get<double>());
        }
        if (c.size() > grid / 2) {
            raise(ErrorKind::SchemaError, "Fourier list longer than the grid resolves");
        }
        return FormalSeries::constant(n, order, PeriodicFn::from_fourier(grid, c));
    }
    raise(ErrorKind::SchemaError, "coefficient must be a number, expression or Fourier list");
}

/// Value of one bracket: an expression, or a table {monomial: coefficient}.
inline FormalSeries bracket_value(const Json &v, ExpressionParser &parser, std::size_t n, std::size_t order,
                                  std::size_t grid)
{
    if (!v.is_object()) {
        return coefficient_value(v, parser, n, order, grid);
    }
    FormalSeries out(n, order, grid);
    for (const auto &[mono, coeff] : v.items()) {
        out += parser.parse(mono) * coefficient_value(coeff, parser, n, order, grid);
    }
    return out;
}

inline std::size_t positive_int(const Json &doc, const char *key, std::size_t fallback)
{
    if (!doc.contains(key)) {
        return fallback;
    }
    const auto &v = doc.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
        raise(ErrorKind::SchemaError, std::string("'") + key + "' must be a non-negative integer");
    }
    return static_cast<std::size_t>(v.get<long long>());
}

} // namespace detail

struct ParseOverrides {
    std::optional<std::size_t> order;
    std::optional<std::size_t> grid;
};

/// Builds the structure described by a document:
///   {"n": 2, "order": 4, "grid": 256, "constants": {...},
///    "brackets": {"theta,x1": "x1", "x1,x2": {"x1*x2": [3]}}}
/// or the normal-form shorthand {"mu": [...], "a": [[...]]}.
inline ProblemSpec parse_structure(const Json &doc, const ParseOverrides &ov = {})
{
    if (!doc.is_object()) {
        raise(ErrorKind::SchemaError, "document must be an object");
    }
    static const char *known[] = {"name", "n", "order", "grid", "constants", "brackets", "mu", "a", "description"};
    for (const auto &[key, _] : doc.items()) {
        if (std::find_if(std::begin(known), std::end(known), [&](const char *k) { return key == k; })
            == std::end(known)) {
            raise(ErrorKind::SchemaError, "unknown key '" + key + "'");
        }
    }
    ProblemSpec spec;
    spec.name = doc.value("name", std::string{});
    spec.order = ov.order.value_or(detail::positive_int(doc, "order", 4));
    spec.grid = ov.grid.value_or(detail::positive_int(doc, "grid", 256));
    if (spec.order < 1) {
        raise(ErrorKind::SchemaError, "order must be at least 1");
    }
    if (spec.grid < 8 || spec.grid % 2 != 0) {
        raise(ErrorKind::SchemaError, "grid must be even and at least 8");
    }
    const bool shorthand = doc.contains("mu");
    if (shorthand == doc.contains("brackets")) {
        raise(ErrorKind::SchemaError, "give exactly one of 'brackets' or 'mu'");
    }
    if (shorthand) {
        const auto mu = doc.at("mu").get<std::vector<double>>();
        spec.n = mu.size();
        if (doc.contains("n") && detail::positive_int(doc, "n", 0) != spec.n) {
            raise(ErrorKind::SchemaError, "'n' disagrees with the length of 'mu'");
        }
        const auto n = static_cast<Eigen::Index>(spec.n);
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
        if (doc.contains("a")) {
            const auto rows = doc.at("a").get<std::vector<std::vector<double>>>();
            if (rows.size() != spec.n) {
                raise(ErrorKind::SchemaError, "'a' must be n×n");
            }
            for (Eigen::Index i = 0; i < n; ++i) {
                if (rows[static_cast<std::size_t>(i)].size() != spec.n) {
                    raise(ErrorKind::SchemaError, "'a' must be n×n");
                }
                for (Eigen::Index j = 0; j < n; ++j) {
                    a(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
                }
            }
            if ((a + a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff())) {
                raise(ErrorKind::SkewViolation, "'a' must be skew-symmetric");
            }
        }
        spec.structure = PoissonStructure::normal_form(mu, a, spec.order, spec.grid);
        return spec;
    }
    spec.n = detail::positive_int(doc, "n", 0);
    if (spec.n == 0) {
        raise(ErrorKind::SchemaError, "'n' must be a positive integer");
    }
    std::map<std::string, double> constants;
    if (doc.contains("constants")) {
        for (const auto &[k, v] : doc.at("constants").items()) {
            if (!v.is_number()) {
                raise(ErrorKind::SchemaError, "constant '" + k + "' must be a number");
            }
            constants[k] = v.get<double>();
        }
    }
    ExpressionParser parser(spec.n, spec.order, spec.grid, constants);
    PoissonStructure p(spec.n, spec.order, spec.grid);
    const std::size_t dim = spec.n + 1;
    std::vector<std::optional<FormalSeries>> seen(dim * dim);
    for (const auto &[key, value] : doc.at("brackets").items()) {
        const auto comma = key.find(',');
        if (comma == std::string::npos) {
            raise(ErrorKind::SchemaError, "bracket key '" + key + "' must read 'u,v'");
        }
        const std::size_t u = detail::coordinate_index(detail::trim(key.substr(0, comma)), spec.n);
        const std::size_t v = detail::coordinate_index(detail::trim(key.substr(comma + 1)), spec.n);
        FormalSeries s = detail::bracket_value(value, parser, spec.n, spec.order, spec.grid);
        if (u == v) {
            if (s.max_abs() > 0) {
                raise(ErrorKind::SkewViolation, "bracket '" + key + "' must vanish");
            }
            continue;
        }
        const std::size_t lo = std::min(u, v), hi = std::max(u, v);
        if (u > v) {
            s = -s;
        }
        auto &slot = seen[lo * dim + hi];
        if (slot) {
            const double diff = max_abs_difference(*slot, s);
            if (diff > 1e-12 * std::max(1.0, s.max_abs())) {
                raise(ErrorKind::SkewViolation, "bracket '" + key + "' is not minus its transpose");
            }
            continue;
        }
        slot = s;
        if (lo == 0) {
            p.set_theta_bracket(hi - 1, s);
        } else {
            p.set_bracket(lo - 1, hi - 1, s);
        }
    }
    const double c0 = p.constant_term_max();
    if (c0 > 1e-12) {
        raise(ErrorKind::NotVanishingOnGamma, "brackets have nonzero values on Γ (max " + std::to_string(c0) + ")");
    }
    spec.structure = std::move(p);
    return spec;
}

inline ProblemSpec parse_document(const std::string &text, const ParseOverrides &ov = {})
{
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const nlohmann::json::exception &e) {
        raise(ErrorKind::SchemaError, std::string("malformed document: ") + e.what());
    }
    try {
        return parse_structure(doc, ov);
    } catch (const nlohmann::json::exception &e) {
        raise(ErrorKind::SchemaError, std::string("document shape: ") + e.what());
    }
}

// ---- reports ----

inline Json matrix_json(const Eigen::MatrixXd &m)
{
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            row.push_back(m(i, j));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Json vector_json(const Eigen::VectorXd &v)
{
    return Json(std::vector<double>(v.data(), v.data() + v.size()));
}

/// Non-finite numbers become strings so that the document stays valid JSON.
inline Json number(double v)
{
    if (std::isfinite(v)) {
        return v;
    }
    return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

inline Json warnings_json(const std::vector<Warning> &ws)
{
    Json out = Json::array();
    for (const auto &w : ws) {
        out.push_back({{"kind", w.kind}, {"value", number(w.value)}, {"message", w.message}});
    }
    return out;
}

inline Json chain_json(const DiffeoChain &chain, std::size_t n)
{
    Json out = Json::array();
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (const auto &step : chain.steps) {
        Json s{{"kind", kind_name(step)}};
        if (const auto *r = std::get_if<BaseReparam>(&step)) {
            s["max_shift"] = r->shift.max_abs();
        } else if (const auto *f = std::get_if<LinearFrame>(&step)) {
            s["max_deviation_from_identity"] = f->matrix.max_deviation(id);
        } else if (const auto *w = std::get_if<FiberwiseFormal>(&step)) {
            double m = 0;
            for (std::size_t i = 0; i < w->components.size(); ++i) {
                auto c = w->components[i];
                c -= FormalSeries::variable(n, c.order(), c.grid(), i);
                m = std::max(m, c.max_abs());
            }
            s["max_deviation_from_identity"] = m;
        } else if (const auto *fl = std::get_if<Reflection>(&step)) {
            s["signs"] = fl->signs;
        }
        out.push_back(std::move(s));
    }
    return out;
}

inline Json record_json(const InvariantRecord &r)
{
    Json out;
    out["n"] = r.n();
    out["mu"] = r.mu;
    out["a"] = matrix_json(r.a);
    out["modular_period"] = r.period ? Json(*r.period) : Json(nullptr);
    out["base_period"] = r.period ? Json(base_period(r)) : Json(nullptr);
    out["monodromy"] = r.monodromy;
    out["covered"] = r.covered;
    return out;
}

inline Json normal_form_json(const NormalForm &nf)
{
    Json out;
    out["invariants"] = record_json(make_record(nf));
    out["lambda"] = nf.lambda;
    out["chain"] = chain_json(nf.chain, nf.n);
    const auto &d = nf.diagnostics;
    Json diag;
    diag["input_jacobiator"] = d.input_jacobi;
    diag["jacobiator_residual"] = d.jacobi_residual;
    diag["smallest_divisor"] = number(d.smallest_divisor);
    diag["theta_deviation"] = d.theta_deviation;
    diag["pair_deviation"] = d.pair_deviation;
    diag["truncation_residual"] = d.truncation_residual;
    diag["tail_energy"] = d.tail_energy;
    diag["proportionality_error"] = d.proportionality_error;
    if (d.literal_mu) {
        diag["literal_constant_mu"] = *d.literal_mu;
    }
    if (d.literal_chi_end) {
        diag["literal_constant_chi_end"] = *d.literal_chi_end;
    }
    out["diagnostics"] = std::move(diag);
    out["warnings"] = warnings_json(nf.warnings);
    return out;
}

inline Json spectrum_json(const SpectralData &s, const NonresonanceReport &nr, std::size_t bound)
{
    Json out;
    out["lambda"] = s.lambda;
    out["monodromy"] = s.monodromy;
    out["k_mean"] = s.k.mean();
    out["k_min"] = s.k.min_value();
    out["k_max"] = s.k.max_value();
    out["min_separation"] = s.min_separation;
    out["proportionality_error"] = s.proportionality_error;
    Json res;
    res["degree_bound"] = bound;
    res["nonresonant"] = nr.ok;
    res["min_gap"] = number(nr.min_gap);
    Json viol = Json::array();
    for (const auto &v : nr.violations) {
        Json w;
        w["i"] = v.i + 1;
        w["j"] = v.j < 0 ? Json(nullptr) : Json(v.j + 1);
        w["p"] = std::vector<unsigned>(v.p.begin(), v.p.end());
        w["gap"] = v.gap;
        viol.push_back(std::move(w));
    }
    res["violations"] = std::move(viol);
    out["resonance"] = std::move(res);
    return out;
}

inline Json bruno_json(const BrunoReport &b)
{
    Json out;
    out["weighting"] = b.literal ? "literal" : "standard";
    Json omega = Json::array();
    for (double w : b.omega) {
        omega.push_back(number(w));
    }
    out["omega"] = std::move(omega);
    out["partial_sums"] = b.partial_sums;
    out["appears_bounded"] = b.appears_bounded;
    return out;
}

inline std::string permutation_string(const std::vector<std::size_t> &sigma)
{
    std::string s = "(";
    for (std::size_t i = 0; i < sigma.size(); ++i) {
        s += (i ? " " : "") + std::to_string(sigma[i] + 1);
    }
    return s + ")";
}

inline Json equivalence_json(const EquivalenceResult &e)
{
    Json out;
    out["equivalent"] = e.equivalent;
    if (e.equivalent) {
        out["permutation"] = permutation_string(e.permutation);
    } else {
        out["failing_invariant"] = e.failing_invariant;
        out["detail"] = e.detail;
    }
    return out;
}

inline Json foliation_json(const FoliationReport &r)
{
    Json out;
    out["case"] = to_string(r.holonomy_case);
    out["s"] = r.s;
    out["rank_a"] = 2 * r.s;
    out["leaf_dim"] = r.leaf_dim;
    out["leaf_space"] = r.leaf_space;
    out["phi"] = matrix_json(r.phi);
    out["psi"] = matrix_json(r.psi);
    out["holonomy_translation"] = r.holonomy_translation ? vector_json(*r.holonomy_translation) : Json(nullptr);
    out["membership_residual"] = r.membership_residual;
    out["singular_values"] = r.singular_values;
    out["warnings"] = warnings_json(r.warnings);
    if (r.alternative) {
        out["alternative"] = foliation_json(*r.alternative);
    }
    return out;
}

inline Json strata_json(const std::vector<Stratum> &strata)
{
    Json out = Json::array();
    for (const auto &s : strata) {
        Json j;
        std::vector<std::size_t> idx;
        for (std::size_t i : s.indices) {
            idx.push_back(i + 1);
        }
        j["I"] = idx;
        j["dim"] = s.dim;
        j["orthants"] = s.orthants;
        j["mu"] = s.mu;
        j["a"] = matrix_json(s.a);
        out.push_back(std::move(j));
    }
    return out;
}

/// Leaf samples as CSV: t parameters, θ, x_1..x_n, header first.
inline std::string leaf_csv(const LeafMap &leaf, const std::vector<std::vector<double>> &params)
{
    std::ostringstream os;
    os.precision(17);
    for (std::size_t j = 0; j < leaf.dim(); ++j) {
        os << 't' << j << ',';
    }
    os << "theta";
    for (std::size_t i = 0; i < leaf.n(); ++i) {
        os << ",x" << i + 1;
    }
    os << '\n';
    for (const auto &t : params) {
        for (double v : t) {
            os << v << ',';
        }
        const Eigen::VectorXd pt = leaf(t);
        for (Eigen::Index i = 0; i < pt.size(); ++i) {
            os << (i ? "," : "") << pt(i);
        }
        os << '\n';
    }
    return os.str();
}

} // namespace pnf::io

#endif
