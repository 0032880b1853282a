// pnf: command-line front end. Reports are JSON on stdout; exit codes classify failures.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <pnf/io.hpp>
#include <pnf/pnf.hpp>

namespace
{

using pnf::io::Json;

enum Exit : int {
    Ok = 0,
    Usage = 2,
    NotPoisson = 3,
    Structural = 4,
    Resonant = 5,
    DegenerateSpectrum = 6,
    BadInput = 7,
    Numerical = 8,
};

int exit_code(pnf::ErrorKind k)
{
    using K = pnf::ErrorKind;
    switch (k) {
        case K::NotPoisson: return NotPoisson;
        case K::StructuralMismatch:
        case K::NotVanishingOnGamma:
        case K::NonInvertibleLinearPart:
        case K::UnexpectedMonomial:
        case K::NonConstantResidual: return Structural;
        case K::ResonantInput:
        case K::ResonantDivisor: return Resonant;
        case K::EigenvalueCollision:
        case K::ComplexSpectrum:
        case K::NonProportionalSpectrum:
        case K::KVanishes:
        case K::ZeroModularTrace: return DegenerateSpectrum;
        case K::SchemaError:
        case K::SkewViolation:
        case K::DimensionMismatch:
        case K::InvalidArgument:
        case K::NotInPositiveOrthant: return BadInput;
        case K::ZeroDivide:
        case K::IntegrationFailure: return Numerical;
    }
    return Numerical;
}

struct Options {
    std::optional<std::size_t> order;
    std::optional<std::size_t> grid;
    double tol_jacobi = 1e-8;
    double tol_resonance = 1e-8;
    bool literal_bruno = false;
    bool literal_chi = false;
    std::string csv;
    std::size_t bruno_k = 4;
    std::vector<double> x0;
    std::size_t samples = 100;
    std::uint64_t seed = 1;
};

pnf::io::ProblemSpec load(const std::string &path, const Options &o)
{
    std::ifstream in(path);
    if (!in) {
        pnf::raise(pnf::ErrorKind::SchemaError, "cannot read " + path);
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return pnf::io::parse_document(ss.str(), {o.order, o.grid});
}

pnf::NormalizeConfig normalize_config(const Options &o)
{
    pnf::NormalizeConfig cfg;
    cfg.tol_jacobi = o.tol_jacobi;
    cfg.tol_resonance = o.tol_resonance;
    cfg.literal_chi = o.literal_chi;
    return cfg;
}

void write_file(const std::string &path, const std::string &text)
{
    std::ofstream out(path);
    if (!out) {
        pnf::raise(pnf::ErrorKind::SchemaError, "cannot write " + path);
    }
    out << text;
}

Json header(const std::string &cmd, const pnf::io::ProblemSpec &spec)
{
    Json j;
    j["status"] = "ok";
    j["command"] = cmd;
    if (!spec.name.empty()) {
        j["name"] = spec.name;
    }
    j["n"] = spec.n;
    j["order"] = spec.structure.order();
    j["grid"] = spec.structure.grid();
    return j;
}

Json cmd_validate(const std::string &file, const Options &o)
{
    const auto spec = load(file, o);
    Json j = header("validate", spec);
    const auto jr = pnf::jacobiator(spec.structure);
    const auto lp = pnf::linear_part(spec.structure);
    j["jacobiator_norm"] = jr.norm;
    j["poisson"] = jr.norm <= o.tol_jacobi;
    j["linear_pair_brackets_vanish"] = lp.u_vanishes;
    j["linear_pair_bracket_max"] = lp.u_max;
    j["tail_energy"] = pnf::detail::structure_tail_energy(spec.structure);
    if (jr.norm > o.tol_jacobi) {
        pnf::raise(pnf::ErrorKind::NotPoisson, "Jacobiator norm " + std::to_string(jr.norm));
    }
    return j;
}

Json cmd_spectrum(const std::string &file, const Options &o)
{
    const auto spec = load(file, o);
    Json j = header("spectrum", spec);
    const auto lp = pnf::linear_part(spec.structure);
    const auto sd = pnf::eigen_continuation(lp.h);
    std::vector<double> lambda = sd.lambda;
    if (std::any_of(sd.monodromy.begin(), sd.monodromy.end(), [](int e) { return e < 0; })) {
        for (double &l : lambda) {
            l /= 2; // ratios are unchanged; the cover halves the angular speed
        }
    }
    double scale = 0;
    for (double l : lambda) {
        scale = std::max(scale, std::abs(l));
    }
    const std::size_t bound = std::max<std::size_t>(2, spec.structure.order());
    const auto nr = pnf::check_nonresonance(lambda, bound, o.tol_resonance * scale);
    j["spectrum"] = pnf::io::spectrum_json(sd, nr, bound);
    const auto br = pnf::bruno_omega(lambda, o.bruno_k, o.literal_bruno);
    j["bruno"] = pnf::io::bruno_json(br);
    if (!o.csv.empty()) {
        std::ostringstream os;
        os.precision(17);
        os << "k,omega,partial_sum\n";
        for (std::size_t k = 0; k < br.omega.size(); ++k) {
            os << k + 1 << ',' << br.omega[k] << ',' << br.partial_sums[k] << '\n';
        }
        write_file(o.csv, os.str());
    }
    return j;
}

Json cmd_normalize(const std::string &file, const Options &o)
{
    const auto spec = load(file, o);
    Json j = header("normalize", spec);
    j["normal_form"] = pnf::io::normal_form_json(pnf::normalize(spec.structure, normalize_config(o)));
    return j;
}

Json cmd_invariants(const std::string &file, const Options &o)
{
    const auto spec = load(file, o);
    Json j = header("invariants", spec);
    const auto nf = pnf::normalize(spec.structure, normalize_config(o));
    j["invariants"] = pnf::io::record_json(pnf::make_record(nf));
    j["modular_period_from_input"] = pnf::modular_period_on_gamma(spec.structure);
    j["warnings"] = pnf::io::warnings_json(nf.warnings);
    return j;
}

Json cmd_equiv(const std::string &a, const std::string &b, const Options &o)
{
    const auto sa = load(a, o);
    const auto sb = load(b, o);
    Json j;
    j["status"] = "ok";
    j["command"] = "equiv";
    const auto ra = pnf::make_record(pnf::normalize(sa.structure, normalize_config(o)));
    const auto rb = pnf::make_record(pnf::normalize(sb.structure, normalize_config(o)));
    j["first"] = pnf::io::record_json(ra);
    j["second"] = pnf::io::record_json(rb);
    j["result"] = pnf::io::equivalence_json(pnf::equivalent(ra, rb));
    return j;
}

Json cmd_foliation(const std::string &file, const Options &o)
{
    const auto spec = load(file, o);
    Json j = header("foliation", spec);
    const auto nf = pnf::normalize(spec.structure, normalize_config(o));
    j["invariants"] = pnf::io::record_json(pnf::make_record(nf));
    j["foliation"] = pnf::io::foliation_json(pnf::classify_holonomy(nf));
    j["strata"] = pnf::io::strata_json(pnf::stratification(nf));
    return j;
}

std::vector<std::vector<double>> sample_params(std::size_t dim, std::size_t count, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<std::vector<double>> out(count, std::vector<double>(dim));
    for (auto &t : out) {
        for (double &v : t) {
            v = u(rng);
        }
        t[0] = (t[0] + 1) * M_PI; // angular parameter in [0, 2π)
    }
    return out;
}

std::vector<double> base_point(const Options &o, std::size_t n)
{
    if (o.x0.empty()) {
        return std::vector<double>(n, 1.0);
    }
    return o.x0;
}

Json cmd_leaf(const std::string &file, const Options &o)
{
    const auto spec = load(file, o);
    Json j = header("leaf", spec);
    const auto nf = pnf::normalize(spec.structure, normalize_config(o));
    const auto rep = pnf::classify_holonomy(nf);
    const auto x0 = base_point(o, nf.n);
    const auto leaf = pnf::leaf_through(x0, rep);
    j["case"] = pnf::to_string(rep.holonomy_case);
    j["x0"] = x0;
    j["parameters"] = leaf.dim();
    j["theta_is_first_direction"] = leaf.theta_is_first_direction();
    j["log_directions"] = pnf::io::matrix_json(leaf.log_directions());
    const auto params = sample_params(leaf.dim(), o.samples, o.seed);
    j["samples"] = params.size();
    if (!o.csv.empty()) {
        write_file(o.csv, pnf::io::leaf_csv(leaf, params));
        j["csv"] = o.csv;
    }
    return j;
}

Json cmd_oracle(const std::string &file, const Options &o)
{
    const auto spec = load(file, o);
    Json j = header("oracle", spec);
    const auto nf = pnf::normalize(spec.structure, normalize_config(o));
    const auto rec = pnf::make_record(nf);
    Json mod;
    const double predicted = std::abs(pnf::modular_period(rec));
    const double measured = pnf::modular_return_time(nf.structure);
    mod["predicted"] = predicted;
    mod["ode_return_time"] = measured;
    mod["relative_error"] = std::abs(measured - predicted) / predicted;
    j["modular_period"] = mod;

    const auto rep = pnf::classify_holonomy(nf);
    const auto x0 = base_point(o, nf.n);
    const auto leaf = pnf::leaf_through(x0, rep);
    const auto params = sample_params(leaf.dim(), o.samples, o.seed);
    Json fol;
    fol["case"] = pnf::to_string(rep.holonomy_case);
    fol["leaf_dim"] = rep.leaf_dim;
    fol["tangency_residual"] = pnf::leaf_tangency(nf.structure, leaf, params);
    fol["numeric_rank_at_x0"] = pnf::numeric_rank(nf.structure, 0.5, x0);
    if (rep.holonomy_case == pnf::HolonomyCase::Case1) {
        const auto h = pnf::holonomy_continuation(nf.structure, rep, x0);
        fol["holonomy_endpoint"] = pnf::io::vector_json(h.endpoint);
        fol["holonomy_predicted"] = pnf::io::vector_json(h.predicted);
        fol["holonomy_relative_error"] = h.relative_error;
    }
    j["foliation"] = fol;
    return j;
}

// Random normal form, pushed through random coordinate changes, normalized back.
Json cmd_selftest(const Options &o)
{
    std::mt19937_64 rng(o.seed);
    const std::size_t order = o.order.value_or(4), grid = o.grid.value_or(128);
    std::uniform_real_distribution<double> u(-1, 1);
    Json runs = Json::array();
    bool ok = true;
    for (std::size_t n : {2u, 3u}) {
        std::vector<double> mu;
        for (;;) {
            mu.clear();
            for (std::size_t i = 0; i < n; ++i) {
                mu.push_back(std::sqrt(2.0 + static_cast<double>(i) + u(rng)));
            }
            if (pnf::check_nonresonance(mu, order, 1e-3).ok) {
                break;
            }
        }
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        for (Eigen::Index i = 0; i < a.rows(); ++i) {
            for (Eigen::Index k = i + 1; k < a.cols(); ++k) {
                a(i, k) = 3 * u(rng);
                a(k, i) = -a(i, k);
            }
        }
        pnf::DiffeoChain chain;
        pnf::PeriodicMatrix g = pnf::PeriodicMatrix::identity(n, grid);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < n; ++k) {
                const double c = 0.05 * u(rng), s = 0.05 * u(rng);
                g.set(i, k, g.entry(i, k) + pnf::PeriodicFn::from_function(grid, [&](double t) {
                    return c * std::cos(t) + s * std::sin(t);
                }));
            }
        }
        chain.steps.emplace_back(pnf::LinearFrame{g});
        const double b = 0.1 * u(rng);
        chain.steps.emplace_back(pnf::BaseReparam{pnf::PeriodicFn::from_function(grid, [&](double t) {
            return b * std::sin(t);
        })});
        const auto p = pnf::transform(pnf::PoissonStructure::normal_form(mu, a, order, grid), chain);
        const auto nf = pnf::normalize(p, normalize_config(o));
        const auto e = pnf::equivalent(pnf::make_record(mu, a), pnf::make_record(nf));
        Json r;
        r["n"] = n;
        r["mu"] = mu;
        r["recovered_mu"] = nf.mu;
        r["equivalent"] = e.equivalent;
        r["jacobiator_residual"] = nf.diagnostics.jacobi_residual;
        ok = ok && e.equivalent;
        runs.push_back(std::move(r));
    }
    Json j;
    j["status"] = ok ? "ok" : "failed";
    j["command"] = "selftest";
    j["seed"] = o.seed;
    j["runs"] = std::move(runs);
    return j;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Normal forms of Poisson structures vanishing on a circle"};
    app.require_subcommand(1);
    Options o;
    std::size_t order = 0, grid = 0;
    auto add_common = [&](CLI::App *sub) {
        sub->add_option("--order", order, "truncation order of the series");
        sub->add_option("--grid", grid, "number of samples on the circle");
        sub->add_option("--tol-jacobi", o.tol_jacobi, "Jacobiator tolerance for accepting the input");
        sub->add_option("--tol-resonance", o.tol_resonance, "relative resonance tolerance");
        sub->add_flag("--paper-literal-bruno", o.literal_bruno, "use the literal small-divisor set");
        sub->add_flag("--paper-literal-chi", o.literal_chi, "report the literal reparametrization constant");
        sub->add_option("--csv", o.csv, "write tabular data to this file");
    };
    std::string file, file_b;
    auto *validate = app.add_subcommand("validate", "check the Jacobi identity and the shape of the input");
    auto *spectrum = app.add_subcommand("spectrum", "eigenvalues, monodromy, resonances and Bruno table");
    auto *normalize = app.add_subcommand("normalize", "compute the normal form");
    auto *invariants = app.add_subcommand("invariants", "invariant record");
    auto *equiv = app.add_subcommand("equiv", "decide formal equivalence of two inputs");
    auto *foliation = app.add_subcommand("foliation", "symplectic foliation and holonomy");
    auto *leaf = app.add_subcommand("leaf", "sample a leaf through a point of the positive orthant");
    auto *oracle = app.add_subcommand("oracle", "numeric cross-checks by ODE integration");
    auto *selftest = app.add_subcommand("selftest", "randomized round trip");
    for (auto *sub : {validate, spectrum, normalize, invariants, foliation, leaf, oracle}) {
        add_common(sub);
        sub->add_option("file", file, "input document")->required();
    }
    add_common(equiv);
    equiv->add_option("first", file, "first input")->required();
    equiv->add_option("second", file_b, "second input")->required();
    add_common(selftest);
    spectrum->add_option("--bruno-k", o.bruno_k, "number of Bruno terms")->check(CLI::Range(1, 20));
    for (auto *sub : {leaf, oracle}) {
        sub->add_option("--x0", o.x0, "base point in the positive orthant")->delimiter(',');
        sub->add_option("--samples", o.samples, "number of sampled parameters");
        sub->add_option("--seed", o.seed, "sampling seed");
    }
    selftest->add_option("--seed", o.seed, "random seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int rc = app.exit(e);
        return rc == 0 ? Ok : Usage;
    }
    if (order) {
        o.order = order;
    }
    if (grid) {
        o.grid = grid;
    }

    Json out;
    int rc = Ok;
    try {
        if (*validate) {
            out = cmd_validate(file, o);
        } else if (*spectrum) {
            out = cmd_spectrum(file, o);
        } else if (*normalize) {
            out = cmd_normalize(file, o);
        } else if (*invariants) {
            out = cmd_invariants(file, o);
        } else if (*equiv) {
            out = cmd_equiv(file, file_b, o);
        } else if (*foliation) {
            out = cmd_foliation(file, o);
        } else if (*leaf) {
            out = cmd_leaf(file, o);
        } else if (*oracle) {
            out = cmd_oracle(file, o);
        } else {
            out = cmd_selftest(o);
            if (out["status"] != "ok") {
                rc = Numerical;
            }
        }
    } catch (const pnf::Error &e) {
        out = Json{{"status", "error"}, {"kind", std::string(pnf::to_string(e.kind()))}, {"message", e.what()}};
        rc = exit_code(e.kind());
    } catch (const std::exception &e) {
        out = Json{{"status", "error"}, {"kind", "Internal"}, {"message", e.what()}};
        rc = Numerical;
    }
    std::cout << out.dump(2) << '\n';
    return rc;
}
