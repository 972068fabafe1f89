#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <unistd.h>

#include <CLI11.hpp>

#include "nhw/char_poly_moments.hpp"
#include "nhw/config.hpp"
#include "nhw/deterministic_approx.hpp"
#include "nhw/experiments.hpp"
#include "nhw/hermitized_resolvent.hpp"
#include "nhw/saddle_quantities.hpp"
#include "nhw/schur_decomposition.hpp"

using namespace nhw;

namespace {

struct Check {
    std::string name;
    bool ok;
    std::string detail;
};

std::string sci(double v) {
    std::ostringstream os;
    os << std::scientific << std::setprecision(2) << v;
    return os.str();
}

std::vector<Check> selftest(bool corrupt_glaisher) {
    std::vector<Check> out;
    auto add = [&](const std::string& name, const std::function<std::pair<bool, std::string>()>& fn) {
        try {
            auto [ok, detail] = fn();
            out.push_back({name, ok, detail});
        } catch (const std::exception& e) {
            out.push_back({name, false, std::string("threw: ") + e.what()});
        }
    };

    const BarnesG g(corrupt_glaisher ? kGlaisher * 1.001 : kGlaisher);
    add("barnes product identity m=2..8", [&] {
        double worst = 0.0;
        for (int m = 2; m <= 8; ++m) worst = std::max(worst, product_identity_error(g, m));
        return std::make_pair(worst < 1e-10, "max rel error " + sci(worst));
    });
    add("barnes table vs asymptotic expansion", [&] {
        const auto v = validate_barnes(g);
        return std::make_pair(v.max_asymptotic_error < 1e-10, "max abs error " + sci(v.max_asymptotic_error));
    });
    add("barnes G(1/2)", [&] {
        const double e = std::abs(std::exp(g.log(0.5)) - 0.6032442812094465);
        return std::make_pair(e < 1e-12, "abs error " + sci(e));
    });

    add("cubic residuals on (z, w) grid", [] {
        double worst = 0.0;
        for (double x : {0.0, 0.3, 0.9, 1.4})
            for (double y : {0.0, 0.5})
                for (double eta : {1e-3, 0.1, 1.0, 10.0})
                    for (double e : {-0.5, 0.0, 0.7}) {
                        const cplx z(x, y), w(e, eta);
                        worst = std::max(worst, equation_residual(z, w, solve_m(z, w).m));
                    }
        return std::make_pair(worst < 1e-12, "max residual " + sci(worst));
    });
    add("m(i), m(2i) at z = 0", [] {
        const double e1 = std::abs(solve_m(0.0, cplx(0, 1)).m - cplx(0, (std::sqrt(5.0) - 1) / 2));
        const double e2 = std::abs(solve_m(0.0, cplx(0, 2)).m - cplx(0, std::sqrt(2.0) - 1));
        return std::make_pair(std::max(e1, e2) < 1e-10, "errors " + sci(e1) + ", " + sci(e2));
    });

    add("hermitisation spectrum and trace", [] {
        const CMatrix A = ginibre(Field::complex, 6, 11);
        const cplx z(0.2, -0.1), w(0.1, 0.3);
        const auto sd = singular_decompose(A, z);
        const CMatrix H = hermitisation(A, z);
        const CMatrix G = (H - w * CMatrix::Identity(12, 12)).inverse();
        const double e = std::abs(resolvent_trace(sd, w) - G.trace() / 6.0);
        return std::make_pair(e < 1e-12, "trace error " + sci(e));
    });

    add("partial Schur round-trips", [] {
        double worst = 0.0;
        for (int N : {4, 8}) {
            const CMatrix B = ginibre(Field::complex, N, 100 + N);
            const CVector ev = eigenvalues(B);
            const auto ps = extract_complex(B, ev[0]);
            worst = std::max(worst, (assemble(ps) - B).norm());
            const RMatrix Br = ginibre(Field::real, N, 200 + N).real();
            const CVector er = eigenvalues(Br.cast<cplx>());
            for (Eigen::Index k = 0; k < er.size(); ++k) {
                if (er[k].imag() > 1e-8) {
                    worst = std::max(worst, (assemble(extract_real_complex(Br, er[k])) - Br).norm());
                    break;
                }
            }
        }
        return std::make_pair(worst < 1e-10, "max residual " + sci(worst));
    });

    add("N = 1 edge inputs", [] {
        CMatrix A(1, 1);
        A(0, 0) = cplx(0.5, 0.0);
        const auto s = singular_values(A, cplx(0.1, 0.0));
        const auto sd = solve_eta(A, cplx(0.1, 0.0), 1.0);
        const double e1 = std::abs(s[0] - 0.4);
        const double e2 = std::abs(ginoe_exact_log_moment(1, 2.0));  // E y^2 = 1
        const double e3 = std::abs(sd.eta_z * sd.eta_z + 0.16 - 1.0);  // t Tr H = 1
        const double e4 = std::abs(log_abs_det(A) - std::log(0.5));
        const double worst = std::max({e1, e2, e3, e4});
        return std::make_pair(worst < 1e-10, "max error " + sci(worst));
    });
    return out;
}

std::string hex(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Numerical experiments for non-Hermitian random matrices"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::uint64_t seed = 0;
    int workers = 0;
    for (const auto& cmd : experiment_commands()) {
        auto* sub = app.add_subcommand(cmd);
        sub->add_option("--config", config_path, "INI configuration file")->required();
        sub->add_option("--seed", seed, "64-bit seed (overrides [run] seed)");
        sub->add_option("--workers", workers, "worker threads (overrides [run] workers)");
        sub->add_option("--out", out_dir, "output directory (overrides [run] out)");
    }
    bool corrupt = false;
    auto* st = app.add_subcommand("selftest", "fast invariant suite");
    st->add_flag("--corrupt-glaisher", corrupt, "test hook: perturb the Glaisher constant");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    if (st->parsed()) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto checks = selftest(corrupt);
        int failed = 0;
        for (const auto& c : checks) {
            std::cout << (c.ok ? "ok   " : "FAIL ") << c.name << " (" << c.detail << ")\n";
            failed += c.ok ? 0 : 1;
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cout << checks.size() - failed << "/" << checks.size() << " passed in " << secs << " s\n";
        return failed ? 1 : 0;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        Config cfg = Config::load(config_path);
        cfg.apply_env(environ);
        if (seed) cfg.set("run", "seed", std::to_string(seed));
        if (workers) cfg.set("run", "workers", std::to_string(workers));
        if (!out_dir.empty()) cfg.set("run", "out", out_dir);
        if (cfg.has("run", "command") && cfg.get("run", "command") != command)
            throw ConfigError("field 'run.command' is '" + cfg.get("run", "command") + "' but '" + command +
                              "' was requested");
        const std::uint64_t s = cfg.get_u64("run", "seed", 1);
        const long w = cfg.get_long("run", "workers", 1);
        if (w < 1) throw ConfigError("field 'run.workers' must be >= 1");
        const std::filesystem::path dir = cfg.get("run", "out", ".");
        std::filesystem::create_directories(dir);

        // The hash covers everything except where and how fast the results are produced.
        Config hashed = cfg;
        hashed.set("run", "out", "");
        hashed.set("run", "workers", "");
        const std::string hash = hex(fnv1a(hashed.canonical()));

        const auto t0 = std::chrono::steady_clock::now();
        RunOutput res = run_experiment(command, cfg, s, static_cast<int>(w));
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        nlohmann::json files = nlohmann::json::array();
        for (const auto& [name, content] : res.files) {
            std::ofstream f(dir / name, std::ios::binary);
            if (!f) throw ConfigError("cannot write '" + (dir / name).string() + "'");
            f << content;
            files.push_back(name);
        }
        nlohmann::json j = {{"command", command},      {"version", kVersion}, {"config_hash", hash},
                            {"config", cfg.values()},  {"seed", s},           {"workers", w},
                            {"wall_clock_seconds", secs}, {"files", files},   {"result", res.summary}};
        const std::string jname = command + ".json";
        std::ofstream(dir / jname) << j.dump(2) << "\n";
        std::cout << command << ": " << (res.pass ? "PASS" : "FAIL") << " (" << (dir / jname).string() << ")\n";
        return res.pass ? 0 : 1;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
