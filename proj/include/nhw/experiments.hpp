#pragma once

// Experiment runners shared by the CLI and the acceptance binary. Each runner reads and
// validates its whole parameter set first, then computes, and returns the files to write
// plus a JSON summary with the tolerance it was judged against.

#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nhw/char_poly_moments.hpp"
#include "nhw/config.hpp"
#include "nhw/deterministic_approx.hpp"
#include "nhw/eigen_statistics.hpp"
#include "nhw/ensembles.hpp"
#include "nhw/hermitized_resolvent.hpp"
#include "nhw/saddle_quantities.hpp"
#include "nhw/stats.hpp"
#include "nhw/svg.hpp"

namespace nhw {

inline constexpr const char* kVersion = "0.1.0";

struct RunOutput {
    std::vector<std::pair<std::string, std::string>> files;  // name, content
    nlohmann::json summary;
    bool pass = false;
};

namespace detail {

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class Csv {
public:
    Csv(const std::string& schema, const std::vector<std::string>& cols) {
        text_ = "# schema=" + schema + "-v1\n";
        for (std::size_t i = 0; i < cols.size(); ++i) text_ += (i ? "," : "") + cols[i];
        text_ += "\n";
    }
    template <class... T>
    void row(const T&... v) {
        bool first = true;
        ((text_ += (first ? "" : ","), text_ += cell(v), first = false), ...);
        text_ += "\n";
    }
    void row(const std::vector<double>& v) {
        for (std::size_t i = 0; i < v.size(); ++i) text_ += (i ? "," : "") + fmt(v[i]);
        text_ += "\n";
    }
    const std::string& str() const { return text_; }

private:
    static std::string cell(double v) { return fmt(v); }
    static std::string cell(int v) { return std::to_string(v); }
    static std::string cell(long v) { return std::to_string(v); }
    static std::string cell(std::uint64_t v) { return std::to_string(v); }
    static std::string cell(const std::string& v) { return v; }
    static std::string cell(const char* v) { return v; }
    std::string text_;
};

inline cplx get_cplx(const Config& c, const std::string& sec, const std::string& key, cplx def = 0.0) {
    return {c.get_double(sec, key + "_re", def.real()), c.get_double(sec, key + "_im", def.imag())};
}

inline long positive(const Config& c, const std::string& sec, const std::string& key, long def, long min = 1) {
    const long v = c.get_long(sec, key, def);
    if (v < min) throw ConfigError("field '" + sec + "." + key + "' must be >= " + std::to_string(min));
    return v;
}

inline double positive_real(const Config& c, const std::string& sec, const std::string& key, double def) {
    const double v = c.get_double(sec, key, def);
    if (!(v > 0.0)) throw ConfigError("field '" + sec + "." + key + "' must be positive");
    return v;
}

inline nlohmann::json cjson(cplx z) { return {z.real(), z.imag()}; }

}  // namespace detail

// ---------------------------------------------------------------- moments

inline RunOutput run_moments(const Config& c, std::uint64_t seed, int workers) {
    const EnsembleSpec spec = ensemble_from(c);
    if (spec.field != Field::real) throw ConfigError("field 'ensemble.field' must be 'real' for moments");
    const int N = spec.N;
    const int m = static_cast<int>(detail::positive(c, "moments", "m", 0));
    const double u = c.get_double("moments", "u", 0.0);
    const double t = detail::positive_real(c, "moments", "t", 1.0);
    const long M = detail::positive(c, "moments", "samples", 0, 100);
    const std::string src = c.get("moments", "x_source", "zero");
    if (src != "zero" && src != "ensemble") throw ConfigError("field 'moments.x_source' must be 'zero' or 'ensemble'");
    const double x_scale = c.get_double("moments", "x_scale", 1.0);
    const double tol_abs = c.get_double("moments", "tolerance_abs", 0.0);
    if (tol_abs < 0.0) throw ConfigError("field 'moments.tolerance_abs' must be >= 0");

    RMatrix X = RMatrix::Zero(N, N);
    if (src == "ensemble") {
        EnsembleSpec xs = spec;
        xs.t = 0.0;
        xs.normalized = false;
        X = x_scale * sample_real_matrix(xs, substream(seed, 0, 0xA));
    }
    const SaddleData sd = solve_eta(X.cast<cplx>(), cplx(u, 0.0), t);
    const double log_formula = moment_asymptotic_log(N, m, sd);
    const auto mc = mc_moment_oracle(X, u, t, m, M, substream(seed, 1, 0xA), workers);
    const bool has_exact = src == "zero" && u == 0.0;
    const double exact = has_exact ? 0.5 * N * m * std::log(t) + ginoe_exact_log_moment(N, m) : 0.0;
    const double reference = has_exact ? exact : log_formula;
    const double tol = tol_abs > 0.0 ? tol_abs : 4.0 * mc.mc_stderr_log;
    const double diff = mc.log_mc_estimate - reference;

    RunOutput out;
    detail::Csv summary("moments", {"N", "m", "u", "t", "log_formula", "log_mc", "stderr", "M", "seed"});
    summary.row(N, m, u, t, log_formula, mc.log_mc_estimate, mc.mc_stderr_log, M, seed);
    detail::Csv samples("moments-samples", {"index", "log_abs_det"});
    for (long i = 0; i < M; ++i) samples.row(i, mc.log_abs_det[i]);
    out.files = {{"moments.csv", summary.str()}, {"moments_samples.csv", samples.str()}};
    out.pass = std::abs(diff) <= tol;
    out.summary = {{"N", N},
                   {"m", m},
                   {"u", u},
                   {"t", t},
                   {"x_source", src},
                   {"eta", sd.eta_z},
                   {"eta_in_bounds", sd.eta_in_bounds},
                   {"log_formula", log_formula},
                   {"formula_error_scale", moment_error_scale(N, t)},
                   {"log_mc", mc.log_mc_estimate},
                   {"stderr", mc.mc_stderr_log},
                   {"jackknife_stderr", mc.jackknife_stderr_log},
                   {"samples", M},
                   {"reference", has_exact ? "exact" : "formula"},
                   {"log_reference", reference},
                   {"difference", diff},
                   {"tolerance", tol},
                   {"tolerance_rule", tol_abs > 0.0 ? "absolute" : "4 stderr"},
                   {"pass", out.pass}};
    if (has_exact) out.summary["log_exact"] = exact;
    return out;
}

// ---------------------------------------------------------------- tail

inline RunOutput run_tail(const Config& c, std::uint64_t seed, int workers) {
    TailExperiment ex;
    ex.spec = ensemble_from(c);
    ex.z0 = detail::get_cplx(c, "tail", "z0");
    ex.r = detail::positive_real(c, "tail", "r", 1.0);
    ex.eps = detail::positive_real(c, "tail", "eps", 0.05);
    ex.M = detail::positive(c, "tail", "samples", 200, 50);
    const double lo = c.get_double("tail", "eta_lo_exp", -1.3), hi = c.get_double("tail", "eta_hi_exp", -1.0);
    const int pts = static_cast<int>(detail::positive(c, "tail", "eta_points", 6, 2));
    if (!(lo < hi)) throw ConfigError("field 'tail.eta_lo_exp' must be below 'tail.eta_hi_exp'");
    const double freq_bound = detail::positive_real(c, "tail", "freq_bound", 0.15);
    const double slope_target = c.get_double("tail", "slope_target", 2.0);
    const double slope_tol = detail::positive_real(c, "tail", "slope_tol", 0.3);
    ex.eta_grid = eta_grid(ex.spec.N, lo, hi, pts);
    ex.seed = seed;
    ex.workers = workers;

    const TailResult res = run_tail_experiment(ex);
    RunOutput out;
    std::vector<std::string> cols = {"index", "event", "min_s", "count_in_disk", "markov"};
    for (int k = 0; k < pts; ++k) cols.push_back("fg_" + std::to_string(k));
    detail::Csv csv("tail", cols);
    for (long i = 0; i < res.M; ++i) {
        const auto& s = res.samples[i];
        std::vector<double> row = {double(i), s.event ? 1.0 : 0.0, std::isfinite(s.min_s) ? s.min_s : -1.0,
                                   double(s.count_in_disk), s.markov};
        row.insert(row.end(), s.sum_fg.begin(), s.sum_fg.end());
        csv.row(row);
    }
    out.files = {{"tail.csv", csv.str()}};
    std::vector<double> eta2;
    for (double e : res.eta_grid) eta2.push_back(res.mean_fg.front() * std::pow(e / res.eta_grid.front(), 2));
    out.files.emplace_back("tail.svg", svg::loglog(res.eta_grid,
                                                   {{"mean sum f_eta g", res.mean_fg, "#1f77b4"},
                                                    {"eta^2 reference", eta2, "#d62728"}},
                                                   "tail statistic vs eta"));
    const bool slope_ok = std::abs(res.loglog_slope - slope_target) <= slope_tol;
    const bool freq_ok = res.wilson_hi < freq_bound;
    out.pass = slope_ok && freq_ok;
    out.summary = {{"N", ex.spec.N},
                   {"t", ex.spec.t},
                   {"z0", detail::cjson(ex.z0)},
                   {"r", ex.r},
                   {"eps", ex.eps},
                   {"samples", res.M},
                   {"events", res.events},
                   {"frequency", res.frequency},
                   {"wilson95", {res.wilson_lo, res.wilson_hi}},
                   {"frequency_bound", freq_bound},
                   {"markov_mean", res.markov_mean},
                   {"eta_grid", res.eta_grid},
                   {"mean_fg", res.mean_fg},
                   {"stderr_fg", res.stderr_fg},
                   {"loglog_slope", res.loglog_slope},
                   {"slope_target", slope_target},
                   {"slope_tolerance", slope_tol},
                   {"slope_pass", slope_ok},
                   {"frequency_pass", freq_ok},
                   {"pass", out.pass}};
    return out;
}

// ---------------------------------------------------------------- girko-check

inline RunOutput run_girko(const Config& c, std::uint64_t seed, int /*workers*/) {
    const std::string src = c.get("girko", "matrix", "ensemble");
    CMatrix A;
    if (src == "diag") {
        const auto d = c.get_list("girko", "diagonal");
        if (d.empty()) throw ConfigError("field 'girko.diagonal' must list at least one entry");
        A = CMatrix::Zero(d.size(), d.size());
        for (std::size_t i = 0; i < d.size(); ++i) A(i, i) = d[i];
    } else if (src != "ensemble") {
        throw ConfigError("field 'girko.matrix' must be 'diag' or 'ensemble'");
    }
    const EnsembleSpec spec = src == "ensemble" ? ensemble_from(c) : EnsembleSpec{};
    const cplx center = detail::get_cplx(c, "girko", "center");
    const std::string annulus = c.get("girko", "annulus", "fixed");
    if (annulus != "fixed" && annulus != "gap") throw ConfigError("field 'girko.annulus' must be 'fixed' or 'gap'");
    const double inner = detail::positive_real(c, "girko", "inner", 0.5);
    const double outer = c.get_double("girko", "outer", 2.0 * inner);
    if (!(outer > inner)) throw ConfigError("field 'girko.outer' must exceed 'girko.inner'");
    const double r_min = c.get_double("girko", "gap_r_min", 0.15), r_max = c.get_double("girko", "gap_r_max", 1.5);
    const double margin = c.get_double("girko", "gap_margin", 0.25);
    if (!(margin >= 0.0 && margin < 0.5)) throw ConfigError("field 'girko.gap_margin' must lie in [0, 0.5)");
    const int grid = static_cast<int>(detail::positive(c, "girko", "grid", 160, 4));
    if (grid % 2) throw ConfigError("field 'girko.grid' must be even");
    const double sigma_max = detail::positive_real(c, "girko", "sigma_max", 1e3);
    const double tol = detail::positive_real(c, "girko", "tolerance", 0.02);
    const double min_ratio = detail::positive_real(c, "girko", "min_ratio", 2.0);
    if (src == "ensemble") A = sample_matrix(spec, substream(seed, 0, 0x61));

    // "gap": put the transition annulus in the widest eigenvalue-free annulus so that
    // supp Delta F stays away from the log singularities.
    BumpFunction g(center, inner, outer);
    if (annulus == "gap") {
        const CVector ev = eigenvalues(A);
        std::vector<double> d;
        for (Eigen::Index n = 0; n < ev.size(); ++n) d.push_back(std::abs(ev[n] - center));
        std::sort(d.begin(), d.end());
        double best = 0.0;
        for (std::size_t k = 0; k + 1 < d.size(); ++k) {
            if (d[k] < r_min || d[k + 1] > r_max || d[k + 1] - d[k] <= best) continue;
            best = d[k + 1] - d[k];
            g = BumpFunction(center, d[k] + margin * best, d[k + 1] - margin * best);
        }
        if (best == 0.0) throw InfeasibleError("girko-check: no eigenvalue gap inside [gap_r_min, gap_r_max]");
    }

    auto F = [&](cplx z) { return g(z); };
    auto L = [&](cplx z) { return g.laplacian(z); };
    GirkoConfig fine{g.center(), g.outer(), grid, sigma_max};
    GirkoConfig coarse = fine;
    coarse.grid = grid / 2;
    const auto rc = girko_evaluate(A, F, L, coarse);
    const auto rf = girko_evaluate(A, F, L, fine);
    const double scale = std::max(1, rf.eigenvalue_count);  // max|F| = 1 for the bump
    const double rel = rf.discrepancy / scale;
    const double ratio = rf.discrepancy > 0.0 ? rc.discrepancy / rf.discrepancy : std::numeric_limits<double>::infinity();

    RunOutput out;
    detail::Csv csv("girko", {"grid", "h", "lhs", "rhs", "discrepancy", "perturbed_nodes", "eigenvalues_in_box"});
    for (const auto* r : {&rc, &rf}) {
        const int n = r == &rc ? coarse.grid : fine.grid;
        csv.row(n, 2.0 * g.outer() / n, r->lhs, r->rhs, r->discrepancy, r->perturbed_nodes, r->eigenvalue_count);
    }
    out.files = {{"girko.csv", csv.str()}};
    out.pass = rel <= tol && ratio >= min_ratio;
    out.summary = {{"matrix", src},
                   {"N", A.rows()},
                   {"center", detail::cjson(g.center())},
                   {"annulus", annulus},
                   {"inner", g.inner()},
                   {"outer", g.outer()},
                   {"grid", grid},
                   {"lhs", rf.lhs},
                   {"rhs", rf.rhs},
                   {"discrepancy", rf.discrepancy},
                   {"coarse_discrepancy", rc.discrepancy},
                   {"relative_discrepancy", rel},
                   {"tolerance", tol},
                   {"refinement_ratio", ratio},
                   {"min_ratio", min_ratio},
                   {"pass", out.pass}};
    return out;
}

// ---------------------------------------------------------------- eigvec-dist

inline RunOutput run_eigvec(const Config& c, std::uint64_t seed, int /*workers*/) {
    const EnsembleSpec spec = ensemble_from(c);
    const cplx z0 = detail::get_cplx(c, "eigvec", "z0");
    const double r = detail::positive_real(c, "eigvec", "r", 1.0);
    const int ncoord = static_cast<int>(detail::positive(c, "eigvec", "coords", 64));
    if (ncoord > spec.N) throw ConfigError("field 'eigvec.coords' exceeds ensemble.n");
    const long min_samples = detail::positive(c, "eigvec", "min_samples", 2000, 10);
    const long max_matrices = detail::positive(c, "eigvec", "max_matrices", 10000);
    const long n_ref = detail::positive(c, "eigvec", "reference_samples", 100000, 100);
    const long resamples = detail::positive(c, "eigvec", "resamples", 2000, 100);
    const double ks_max = detail::positive_real(c, "eigvec", "ks_max", 0.05);
    const double p_min = detail::positive_real(c, "eigvec", "p_min", 0.01);
    const double mix_y = detail::positive_real(c, "eigvec", "mixture_y", 10.0);
    const double mix_ks_max = detail::positive_real(c, "eigvec", "mixture_ks_max", 0.02);

    std::vector<int> coords;
    for (int k = 0; k < ncoord; ++k) coords.push_back(static_cast<int>(static_cast<long>(k) * spec.N / ncoord));
    const auto pool = pool_overlaps(spec, z0, r, coords, min_samples, substream(seed, 0, 0xE1), max_matrices);
    if (static_cast<long>(pool.values.size()) < min_samples)
        throw InfeasibleError("eigvec-dist: only " + std::to_string(pool.values.size()) + " overlaps after " +
                              std::to_string(pool.matrices) + " matrices");

    CVector q = CVector::Zero(spec.N);
    q[0] = 1.0;
    const auto flavour = spec.field == Field::complex ? ReferenceFlavour::complex_gaussian : ReferenceFlavour::real_gaussian;
    const auto ref = reference_column(reference_sampler({flavour, {q}, 0.0}, n_ref, substream(seed, 1, 0xE1)));
    const auto dt = distribution_test(pool.values, ref, substream(seed, 2, 0xE1), resamples);
    const auto mix = reference_column(
        reference_sampler({ReferenceFlavour::delta_y_mixture, {q}, mix_y}, n_ref, substream(seed, 3, 0xE1)));
    const double mix_ks = ks_against_cdf(mix, [](double x) { return 1.0 - std::exp(-x); });

    RunOutput out;
    detail::Csv csv("eigvec", {"index", "overlap"});
    for (std::size_t i = 0; i < pool.values.size(); ++i) csv.row(static_cast<long>(i), pool.values[i]);
    out.files = {{"eigvec.csv", csv.str()}};
    std::function<double(double)> pdf;
    if (flavour == ReferenceFlavour::complex_gaussian) pdf = [](double x) { return std::exp(-x); };
    out.files.emplace_back("eigvec.svg", svg::histogram(pool.values, 40, 6.0, pdf, "N|q*r|^2 against the reference density"));
    out.pass = dt.ks < ks_max && dt.p_value > p_min && mix_ks < mix_ks_max;
    out.summary = {{"N", spec.N},
                   {"field", to_string(spec.field)},
                   {"z0", detail::cjson(z0)},
                   {"r", r},
                   {"coords", ncoord},
                   {"matrices", pool.matrices},
                   {"eigenvalues_used", pool.eigenvalues_used},
                   {"samples", pool.values.size()},
                   {"mean", mean_stderr(pool.values).mean},
                   {"reference_samples", n_ref},
                   {"ks", dt.ks},
                   {"cvm", dt.cvm},
                   {"p_value", dt.p_value},
                   {"resamples", dt.resamples},
                   {"ks_max", ks_max},
                   {"p_min", p_min},
                   {"mixture_y", mix_y},
                   {"mixture_ks", mix_ks},
                   {"mixture_ks_max", mix_ks_max},
                   {"pass", out.pass}};
    return out;
}

// ---------------------------------------------------------------- compare-pair

inline RunOutput run_compare(const Config& c, std::uint64_t seed, int workers) {
    const EnsembleSpec spec = ensemble_from(c);
    const double t = c.get_double("compare", "t");
    const cplx z0 = detail::get_cplx(c, "compare", "z0");
    const double support = detail::positive_real(c, "compare", "support", 2.0);
    const std::string theta_kind = c.get("compare", "theta", "count");
    if (theta_kind != "count" && theta_kind != "overlap")
        throw ConfigError("field 'compare.theta' must be 'count' or 'overlap'");
    const int coord = static_cast<int>(c.get_long("compare", "coord", 0));
    if (coord < 0 || coord >= spec.N) throw ConfigError("field 'compare.coord' outside [0, N)");
    const long M = detail::positive(c, "compare", "samples", 200, 2);
    const double n_sigma = detail::positive_real(c, "compare", "n_sigma", 3.0);

    const MatchedPair pair = build_matched_pair(spec, t);
    const MatchingReport rep = certify(pair);
    const double half = 0.5 * support;
    ThetaFn theta;
    std::vector<CVector> qs;
    if (theta_kind == "count") {
        theta = [half](cplx zz, const std::vector<double>&) { return cplx(BumpFunction::profile(std::abs(zz) / half)); };
    } else {
        CVector q = CVector::Zero(spec.N);
        q[coord] = 1.0;
        qs.push_back(q);
        theta = [half](cplx zz, const std::vector<double>& x) {
            return cplx(BumpFunction::profile(std::abs(zz) / half) * x[0]);
        };
    }
    const auto res = matched_pair_comparison(pair, theta, z0, support, qs, M, substream(seed, 0, 0xC0), workers);

    RunOutput out;
    detail::Csv csv("compare", {"index", "L_a", "L_b", "difference"});
    for (long i = 0; i < M; ++i)
        csv.row(i, res.per_sample_a[i], res.per_sample_b[i], res.per_sample_a[i] - res.per_sample_b[i]);
    out.files = {{"compare.csv", csv.str()}};
    const double tol = n_sigma * res.stderr_;
    out.pass = rep.matched && std::abs(res.difference) <= tol;
    out.summary = {{"N", spec.N},
                   {"law", to_string(spec.law.kind)},
                   {"t", t},
                   {"theta", theta_kind},
                   {"z0", detail::cjson(z0)},
                   {"support", support},
                   {"samples", M},
                   {"matched", rep.matched},
                   {"max_diff_order3", rep.max_diff_order3},
                   {"max_diff_order4", rep.max_diff_order4},
                   {"mean_a", res.mean_a},
                   {"mean_b", res.mean_b},
                   {"difference", res.difference},
                   {"stderr", res.stderr_},
                   {"tolerance", tol},
                   {"pass", out.pass}};
    return out;
}

// ---------------------------------------------------------------- saddle-report

inline RunOutput run_saddle(const Config& c, std::uint64_t seed, int /*workers*/) {
    const EnsembleSpec spec = ensemble_from(c);
    const std::string src = c.get("saddle", "x_source", "ensemble");
    if (src != "zero" && src != "ensemble") throw ConfigError("field 'saddle.x_source' must be 'zero' or 'ensemble'");
    const double x_scale = c.get_double("saddle", "x_scale", 1.0);
    const cplx z = detail::get_cplx(c, "saddle", "z");
    const double t = detail::positive_real(c, "saddle", "t", 0.5);
    const std::vector<double> deltas =
        c.has("saddle", "delta") ? c.get_list("saddle", "delta") : std::vector<double>{0.25, 0.5};
    const double k_tol = detail::positive_real(c, "saddle", "k_tolerance", 0.25);
    if (spec.field == Field::real && z.imag() != 0.0)
        throw ConfigError("field 'saddle.z_im' must be 0 for a real ensemble");

    CMatrix X = CMatrix::Zero(spec.N, spec.N);
    if (src == "ensemble") {
        EnsembleSpec xs = spec;
        xs.t = 0.0;
        xs.normalized = false;
        X = x_scale * sample_matrix(xs, substream(seed, 0, 0x5A));
    }
    const SaddleData sd = solve_eta(X, z, t);
    const NormFlavour fl = spec.field == Field::complex ? NormFlavour::complex_K : NormFlavour::real_K;
    const auto kq = duality_normalization(X, z, t, fl, NormMode::quadrature);
    const auto ka = duality_normalization(X, z, t, fl, NormMode::asymptotic);
    const double k_rel = std::abs(std::expm1(ka.log_value - kq.log_value));
    const auto hyp = check_moment_hypotheses(X, z.real(), t, deltas);

    RunOutput out;
    detail::Csv q("saddle", {"quantity", "value"});
    q.row("eta", sd.eta_z);
    q.row("phi", sd.phi_z);
    q.row("sigma", sd.sigma_z);
    q.row("sigma_tilde", sd.sigma_tilde_z);
    q.row("tr_H2", sd.tr_H2);
    q.row("log_K_quadrature", kq.log_value);
    q.row("log_K_asymptotic", ka.log_value);
    detail::Csv h("saddle-hypotheses", {"delta", "min_eta_trH", "max_eta_trH", "min_eta3_trH2", "c_delta", "C_delta", "pass"});
    for (const auto& r : hyp) h.row(r.delta, r.min_eta_trH, r.max_eta_trH, r.min_eta3_trH2, r.c_delta, r.C_delta, r.pass ? 1 : 0);
    out.files = {{"saddle.csv", q.str()}, {"saddle_hypotheses.csv", h.str()}};
    out.pass = sd.eta_in_bounds && k_rel <= k_tol;
    nlohmann::json hj = nlohmann::json::array();
    for (const auto& r : hyp) hj.push_back({{"delta", r.delta}, {"pass", r.pass}});
    out.summary = {{"N", spec.N},
                   {"field", to_string(spec.field)},
                   {"z", detail::cjson(z)},
                   {"t", t},
                   {"eta", sd.eta_z},
                   {"eta_in_bounds", sd.eta_in_bounds},
                   {"phi", sd.phi_z},
                   {"sigma", sd.sigma_z},
                   {"sigma_tilde", sd.sigma_tilde_z},
                   {"log_K_quadrature", kq.log_value},
                   {"K_quadrature_error", kq.error_estimate},
                   {"log_K_asymptotic", ka.log_value},
                   {"K_relative_difference", k_rel},
                   {"tolerance", k_tol},
                   {"hypotheses", hj},
                   {"pass", out.pass}};
    return out;
}

// ---------------------------------------------------------------- local-law

inline RunOutput run_local_law(const Config& c, std::uint64_t seed, int workers) {
    const EnsembleSpec spec = ensemble_from(c);
    const cplx z = detail::get_cplx(c, "locallaw", "z", cplx(0.3, 0.0));
    const double eta_min = detail::positive_real(c, "locallaw", "eta_min", 0.01);
    const double eta_max = detail::positive_real(c, "locallaw", "eta_max", 0.5);
    const int pts = static_cast<int>(detail::positive(c, "locallaw", "eta_points", 8, 2));
    const long S = detail::positive(c, "locallaw", "seeds", 50);
    const double slope_max = c.get_double("locallaw", "slope_max", -0.8);
    const double iso_exp = c.get_double("locallaw", "iso_exponent", 0.1);
    const double iso_frac = detail::positive_real(c, "locallaw", "iso_fraction", 0.95);
    if (!(eta_min < eta_max)) throw ConfigError("field 'locallaw.eta_min' must be below 'locallaw.eta_max'");

    const double N = spec.N;
    std::vector<double> etas;
    for (int k = 0; k < pts; ++k) etas.push_back(eta_min * std::pow(eta_max / eta_min, double(k) / (pts - 1)));
    std::vector<DeterministicApprox> das;
    for (double e : etas) das.push_back(solve_m(z, cplx(0.0, e)));
    std::vector<std::vector<double>> tr(S, std::vector<double>(pts)), iso(S, std::vector<double>(pts));
    parallel_for(S, workers, [&](long s) {
        const auto sd = singular_decompose(sample_matrix(spec, substream(seed, s, 0x11)), z);
        ResidualSpec ts;
        ResidualSpec is;
        is.kind = Observable::isotropic;
        is.x = CVector::Zero(2 * spec.N);
        is.x[0] = 1.0;
        is.y = is.x;
        for (int k = 0; k < pts; ++k) {
            tr[s][k] = local_law_residual(sd, das[k], ts).residual;
            iso[s][k] = local_law_residual(sd, das[k], is).residual;
        }
    });

    RunOutput out;
    detail::Csv csv("locallaw", {"seed_index", "eta", "trace_residual", "iso_residual", "iso_bound"});
    std::vector<double> neta, mean_tr(pts, 0.0), mean_iso(pts, 0.0), bound(pts);
    for (int k = 0; k < pts; ++k) {
        neta.push_back(N * etas[k]);
        bound[k] = std::pow(N, iso_exp) / std::sqrt(N * etas[k]);
    }
    long iso_ok = 0;
    for (long s = 0; s < S; ++s) {
        bool ok = true;
        for (int k = 0; k < pts; ++k) {
            csv.row(s, etas[k], tr[s][k], iso[s][k], bound[k]);
            mean_tr[k] += tr[s][k] / S;
            mean_iso[k] += iso[s][k] / S;
            ok = ok && iso[s][k] <= bound[k];
        }
        iso_ok += ok ? 1 : 0;
    }
    const double slope = loglog_slope(neta, mean_tr);
    const double frac = static_cast<double>(iso_ok) / S;
    std::vector<double> inv;
    for (double x : neta) inv.push_back(mean_tr.front() * neta.front() / x);
    out.files = {{"locallaw.csv", csv.str()},
                 {"locallaw.svg", svg::loglog(neta,
                                              {{"mean trace residual", mean_tr, "#1f77b4"},
                                               {"mean isotropic residual", mean_iso, "#2ca02c"},
                                               {"1/(N eta) reference", inv, "#d62728"}},
                                              "local-law residuals vs N eta")}};
    out.pass = slope <= slope_max && frac >= iso_frac;
    out.summary = {{"N", spec.N},
                   {"z", detail::cjson(z)},
                   {"seeds", S},
                   {"eta_grid", etas},
                   {"mean_trace_residual", mean_tr},
                   {"mean_iso_residual", mean_iso},
                   {"trace_slope", slope},
                   {"slope_max", slope_max},
                   {"iso_fraction", frac},
                   {"iso_fraction_min", iso_frac},
                   {"iso_exponent", iso_exp},
                   {"pass", out.pass}};
    return out;
}

// ---------------------------------------------------------------- dispatch

inline const std::vector<std::string>& experiment_commands() {
    static const std::vector<std::string> cmds = {"moments",      "tail",          "girko-check", "eigvec-dist",
                                                  "compare-pair", "saddle-report", "local-law"};
    return cmds;
}

inline RunOutput run_experiment(const std::string& command, const Config& c, std::uint64_t seed, int workers) {
    if (command == "moments") return run_moments(c, seed, workers);
    if (command == "tail") return run_tail(c, seed, workers);
    if (command == "girko-check") return run_girko(c, seed, workers);
    if (command == "eigvec-dist") return run_eigvec(c, seed, workers);
    if (command == "compare-pair") return run_compare(c, seed, workers);
    if (command == "saddle-report") return run_saddle(c, seed, workers);
    if (command == "local-law") return run_local_law(c, seed, workers);
    throw ConfigError("unknown command '" + command + "'");
}

}  // namespace nhw
