// Acceptance run: one PASS/FAIL line per criterion. Argument 1 is the path of
// the dbsuq executable (used by the determinism check).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dbsuq/brent.hpp"
#include "dbsuq/ffem.hpp"
#include "dbsuq/kl.hpp"
#include "dbsuq/mesh.hpp"
#include "dbsuq/pipeline.hpp"
#include "dbsuq/random.hpp"
#include "dbsuq/sparse_grid.hpp"
#include "dbsuq/volume_conductor.hpp"

using namespace dbsuq;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

unsigned all_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

// 1. KL truncation error at M = 4, single-threaded.
Outcome kl_truncation()
{
    const PipelineConfig cfg;
    const auto t0 = Clock::now();
    const auto grid = build_grid(cfg.kl_omega_min, cfg.kl_omega_max, cfg.kl_log_step);
    const auto cov = sample_covariance(sample_ensemble(cfg.box, grid, cfg.kl_samples, cfg.seed, 1));
    const auto eig = eig_sym(cov.cov);
    const auto model = truncate(eig, 4, grid, cov.mean);
    const auto err = truncation_error(cov.cov, model);
    const double secs = seconds_since(t0);
    return {err.max_rel <= 1e-5 && secs <= 60.0,
            "max relative covariance error " + fmt("%.3e", err.max_rel) + " (limit 1e-05), spectral-norm relative " +
                fmt("%.3e", err.spectral_rel) + ", grid " + std::to_string(grid.size()) + " points, " +
                fmt("%.1f", secs) + " s (limit 60 s)"};
}

// 2. Eigenvalue decay.
Outcome eigen_decay()
{
    const PipelineConfig cfg;
    const auto grid = build_grid(cfg.kl_omega_min, cfg.kl_omega_max, cfg.kl_log_step);
    const auto cov = sample_covariance(sample_ensemble(cfg.box, grid, cfg.kl_samples, cfg.seed, all_threads()));
    const auto eig = eig_sym(cov.cov);
    const double ratio = eig.lambda[4] / eig.lambda[0];
    return {ratio <= 1e-3, "lambda_5/lambda_1 = " + fmt("%.3e", ratio) + " (limit 1e-03), lambda_1 = " +
                               fmt("%.3e", eig.lambda[0])};
}

// Independent count: union of all admissible full tensor grids.
std::size_t union_count(int dim, int level)
{
    std::set<std::vector<std::int64_t>> points;
    std::vector<int> idx(static_cast<std::size_t>(dim), 0);
    std::vector<std::int64_t> key(static_cast<std::size_t>(dim));
    std::function<void(int)> tensor = [&](int d) {
        if (d == dim) {
            points.insert(key);
            return;
        }
        const int l = idx[static_cast<std::size_t>(d)];
        const int n = l == 0 ? 1 : (1 << l) + 1;
        for (int k = 0; k < n; ++k) {
            key[static_cast<std::size_t>(d)] = cc_hierarchy_index(l, k);
            tensor(d + 1);
        }
    };
    std::function<void(int, int)> rec = [&](int d, int left) {
        if (d == dim) {
            tensor(0);
            return;
        }
        for (int k = 0; k <= left; ++k) {
            idx[static_cast<std::size_t>(d)] = k;
            rec(d + 1, left - k);
        }
    };
    rec(0, level);
    return points.size();
}

// 3. Sparse-grid point counts.
Outcome point_counts()
{
    const std::size_t expected[] = {1, 9, 41, 137};
    bool ok = true;
    std::string detail = "levels 0..3:";
    for (int l = 0; l <= 3; ++l) {
        const std::size_t n = smolyak_rule(4, l).size();
        const std::size_t oracle = union_count(4, l);
        ok = ok && n == expected[l] && n == oracle;
        detail += " " + std::to_string(n) + "/" + std::to_string(oracle);
    }
    return {ok, detail + " (rule/oracle; expected 1 9 41 137)"};
}

double uniform_moment(int k) { return k % 2 ? 0.0 : 1.0 / (k + 1); }

// Worst error over all monomials of total degree exactly `degree`.
double monomial_worst(const SparseGridRule& rule, int degree)
{
    double worst = 0.0;
    std::vector<int> e(static_cast<std::size_t>(rule.dim), 0);
    std::function<void(int, int)> rec = [&](int d, int left) {
        if (d + 1 == rule.dim) {
            e[static_cast<std::size_t>(d)] = left;
            double exact = 1.0;
            for (int k = 0; k < rule.dim; ++k) exact *= uniform_moment(e[static_cast<std::size_t>(k)]);
            std::vector<double> v(rule.size(), 1.0);
            for (std::size_t i = 0; i < rule.size(); ++i)
                for (int k = 0; k < rule.dim; ++k)
                    v[i] *= std::pow(rule.points(static_cast<Eigen::Index>(i), k), e[static_cast<std::size_t>(k)]);
            worst = std::max(worst, std::abs(integrate(rule, v) - exact));
            return;
        }
        for (int k = 0; k <= left; ++k) {
            e[static_cast<std::size_t>(d)] = k;
            rec(d + 1, left - k);
        }
    };
    rec(0, degree);
    return worst;
}

// 4. Quadrature exactness at level 3.
Outcome exactness()
{
    const auto rule = smolyak_rule(4, 3);
    double worst3 = 0.0;
    for (int deg = 0; deg <= 3; ++deg) worst3 = std::max(worst3, monomial_worst(rule, deg));
    int exact_degree = -1;
    while (exact_degree < 20 && monomial_worst(rule, exact_degree + 1) <= 1e-12) ++exact_degree;
    return {worst3 <= 1e-12, "worst error up to degree 3: " + fmt("%.2e", worst3) +
                                 " (limit 1e-12); maximal exact total degree " + std::to_string(exact_degree)};
}

// 5. Spherical-electrode oracle and mesh self-convergence.
Outcome forward_oracle()
{
    const double r_out = 2.0;
    const Mesh sphere = build_sphere_mesh(0.5e-3, r_out, 160, 80);
    double worst = 0.0;
    for (Complex sigma : {Complex(0.1, 0.0), Complex(0.1, 0.05)}) {
        const auto sol = assemble_solve(sphere, {sigma}, {sigma}, 1.0);
        for (double r = 2e-3; r <= 10e-3 + 1e-12; r += 0.5e-3)
            for (double th : {0.05, 0.8, 1.57, 2.4, 3.1}) {
                const std::vector<Eigen::Vector2d> p{{r * std::sin(th), r * std::cos(th)}};
                // grounded outer sphere shifts the free-space potential by a constant
                const Complex expected = point_source_oracle(sigma, r) - point_source_oracle(sigma, r_out);
                const Complex got = eval_at_points(sol, sphere, p)[0];
                worst = std::max(worst, std::abs(got - expected) / std::abs(point_source_oracle(sigma, r)));
            }
    }

    const ComplexAdmittivity s{Complex(0.1, 0.0)};
    const std::vector<Eigen::Vector2d> probe{{2e-3, 0.0}, {3e-3, 1e-3}, {5e-3, 0.0}, {10e-3, 0.0}};
    const Mesh coarse = build_mesh(Geometry{}, 27000);
    const Mesh fine = build_mesh(Geometry{}, 108000);
    const auto a = eval_at_points(assemble_solve(coarse, s, s, 1.0), coarse, probe);
    const auto b = eval_at_points(assemble_solve(fine, s, s, 1.0), fine, probe);
    double conv = 0.0;
    for (Eigen::Index k = 0; k < a.size(); ++k) conv = std::max(conv, std::abs(a[k] - b[k]) / std::abs(b[k]));
    return {worst <= 0.02 && conv <= 0.01, "sphere worst relative error " + fmt("%.2e", worst) +
                                               " (limit 0.02); 4x refinement change " + fmt("%.2e", conv) +
                                               " (limit 0.01, " + std::to_string(coarse.triangles.size()) + " vs " +
                                               std::to_string(fine.triangles.size()) + " elements)"};
}

// 6. One-pole lowpass through the FFEM against direct time stepping.
Outcome ffem_lowpass()
{
    const StimulusPulse pulse;
    const std::size_t nt = 768;
    const double dt = pulse.period / static_cast<double>(nt);
    const double tau = 100.0 * dt;
    TransferFunction tf;
    tf.points = {{0.0, 0.0}};
    tf.omega = frequency_nodes(130.0, 5e5, 400);
    tf.H.resize(1, static_cast<Eigen::Index>(tf.omega.size()));
    for (std::size_t k = 0; k < tf.omega.size(); ++k)
        tf.H(0, static_cast<Eigen::Index>(k)) = 1.0 / Complex(1.0, tf.omega[k] * tau);
    const auto sig = reconstruct_time(tf, stimulus_spectrum(pulse, nt), pulse.period, nt);

    // periodic steady state of tau v' + v = s(t), backward Euler on the same samples
    const auto s = stimulus_samples(pulse, nt);
    std::vector<double> ref(nt);
    double v = 0.0;
    for (int cycle = 0; cycle < 300; ++cycle)
        for (std::size_t j = 0; j < nt; ++j) {
            if (cycle == 299) ref[j] = v;
            v = (v + dt / tau * s[(j + 1) % nt]) / (1.0 + dt / tau);
        }
    double err = 0.0, peak = 0.0;
    for (std::size_t j = 0; j < nt; ++j) {
        err += std::pow(sig.values(0, static_cast<Eigen::Index>(j)) - ref[j], 2);
        peak = std::max(peak, std::abs(ref[j]));
    }
    const double nrmse = std::sqrt(err / static_cast<double>(nt)) / peak;
    return {nrmse <= 0.02, "RMS error / peak " + fmt("%.3e", nrmse) + " (limit 0.02) at dt = tau/100"};
}

struct DeskRun {
    UQResult l3;
    SparseGridRule rule3, rule2;
    double seconds = 0.0;
    unsigned threads = 1;
};

PipelineConfig desk_config()
{
    PipelineConfig c;
    c.mesh_elements = 5000;
    c.sweep_nodes = 200;
    c.grid_level = 3;
    return c;
}

// Full desk-scale study at level 3, timed from the KL build to the moments.
DeskRun desk_run()
{
    DeskRun d;
    const auto cfg = desk_config();
    d.threads = all_threads();
    const auto t0 = Clock::now();
    const auto model = build_kl_model(cfg, d.threads);
    d.rule3 = smolyak_rule(static_cast<int>(model.rank()), 3);
    const ForwardModel fm(cfg);
    d.l3 = run_collocation(fm, model, d.rule3, d.threads);
    d.seconds = seconds_since(t0);
    d.rule2 = smolyak_rule(static_cast<int>(model.rank()), 2);
    return d;
}

// 7. Substitute properties of the threshold table.
Outcome table_properties(const DeskRun& d)
{
    const auto& axons = d.l3.axons;
    bool increasing = true;
    std::size_t bad_nodes = 0;
    for (std::size_t k = 0; k < d.rule3.size(); ++k) {
        bool node_ok = true;
        for (std::size_t a = 0; a + 1 < axons.size(); ++a)
            node_ok = node_ok && axons[a + 1].thresholds[k] > axons[a].thresholds[k];
        if (!node_ok) ++bad_nodes;
        increasing = increasing && node_ok;
    }

    double cv_lo = 1e300, cv_hi = 0.0;
    for (const auto& a : axons) {
        const double cv = a.std / a.mean;
        cv_lo = std::min(cv_lo, cv);
        cv_hi = std::max(cv_hi, cv);
    }
    const bool cv_ok = cv_lo >= 0.03 && cv_hi <= 0.3;

    // level-2 nodes are a subset of the level-3 nodes
    const auto idx = embed_points(d.rule2, d.rule3);
    double dmean = 0.0, dstd = 0.0;
    for (const auto& a : axons) {
        std::vector<double> v2(idx.size());
        for (std::size_t k = 0; k < idx.size(); ++k) v2[k] = a.thresholds[idx[k]];
        const auto m2 = collocation_moments(d.rule2, v2);
        dmean = std::max(dmean, std::abs(m2.mean - a.mean) / a.mean);
        dstd = std::max(dstd, std::abs(std::sqrt(m2.variance) - a.std) / a.std);
    }
    const bool conv_ok = dmean <= 0.05 && dstd <= 0.05;

    std::string detail = std::string("(a) ") + (increasing ? "increasing at all " : "not increasing at ") +
                         (increasing ? std::to_string(d.rule3.size()) : std::to_string(bad_nodes)) + " nodes; (b) CV in [" +
                         fmt("%.4f", cv_lo) + ", " + fmt("%.4f", cv_hi) + "] (band [0.03, 0.3]); (c) level 2 vs 3: mean " +
                         fmt("%.2e", dmean) + ", std " + fmt("%.2e", dstd) + " (limit 0.05)";
    detail += "; mean thresholds [mA]:";
    for (const auto& a : axons) detail += " " + fmt("%.4g", a.mean * 1e3);
    return {increasing && cv_ok && conv_ok, detail};
}

// 8. Brent contract and dt halving of the 1 mm threshold.
Outcome brent_and_dt()
{
    struct Case {
        std::function<double(double)> f;
        double a, b, root;
    };
    const std::vector<Case> cases{
        {[](double x) { return x * x * x - 2.0 * x - 5.0; }, 2.0, 3.0, 2.0945514815423265},
        {[](double x) { return std::exp(x) - 2.0; }, -4.0, 4.0, std::log(2.0)},
        {[](double x) { return std::atan(x - 0.3); }, -10.0, 50.0, 0.3},
        {[](double x) { return x > 0.123 ? 1.0 : -1.0; }, 0.0, 1.0, 0.123},
        {[](double x) { return std::pow(x - 1.0, 3.0); }, 0.0, 3.0, 1.0},
        {[](double x) { return std::cos(x) - x; }, 0.0, 1.0, 0.73908513321516067},
    };
    bool contract = true;
    double widest = 0.0;
    for (const auto& c : cases) {
        bool inside = true;
        const auto r = brent(
            [&](double x) {
                inside = inside && x >= std::min(c.a, c.b) && x <= std::max(c.a, c.b);
                return c.f(x);
            },
            c.a, c.b, 1e-5);
        widest = std::max(widest, r.upper - r.lower);
        const bool brackets = r.lower <= c.root + 1e-15 && c.root <= r.upper + 1e-15;
        contract = contract && inside && brackets && r.upper - r.lower <= 1e-5;
    }

    PipelineConfig cfg;
    cfg.distances = {1e-3};
    const auto p = cfg.box.mean;
    const Material mean{[p](double w) { return conductivity(p, w); }, [p](double w) { return permittivity(p, w); },
                        cfg.encapsulation_factor};
    auto threshold_at = [&](std::size_t nt) {
        PipelineConfig c = cfg;
        c.nt = nt;
        const ForwardModel fm(c);
        const auto phi = fm.unit_response(mean, all_threads());
        return activation_threshold(fm.cable(), phi[0], fm.dt(), c.n_periods, c.threshold).current;
    };
    const double i1 = threshold_at(cfg.nt);
    const double i2 = threshold_at(2 * cfg.nt);
    const double change = std::abs(i2 - i1) / i1;
    return {contract && change <= 0.02, std::string("bracket contract ") + (contract ? "holds" : "violated") +
                                            " on " + std::to_string(cases.size()) + " cases (widest " +
                                            fmt("%.2e", widest) + ", limit 1e-05); 1 mm threshold " +
                                            fmt("%.5f", i1 * 1e3) + " -> " + fmt("%.5f", i2 * 1e3) +
                                            " mA under dt halving, change " + fmt("%.2e", change) + " (limit 0.02)"};
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

// 9. Two `uq run` invocations give byte-identical files.
Outcome determinism(const std::string& exe)
{
    if (exe.empty()) return {false, "no executable path given"};
    const fs::path dir = fs::temp_directory_path() / "dbsuq_acceptance_determinism";
    fs::remove_all(dir);
    fs::create_directories(dir);
    {
        std::ofstream cfg(dir / "config.json");
        cfg << R"({"kl": {"samples": 200}, "grid": {"level": 1}, "field": {"mesh_elements": 2000},)"
            << R"( "ffem": {"sweep_nodes": 40}, "axon": {"distances": [0.001, 0.003]}})";
    }
    const std::string base = "\"" + exe + "\" --config \"" + (dir / "config.json").string() + "\" --seed 7 ";
    const int rc1 = std::system((base + "--threads 1 --out \"" + (dir / "a").string() + "\" uq run > /dev/null 2>&1").c_str());
    const int rc2 = std::system((base + "--threads 2 --out \"" + (dir / "b").string() + "\" uq run > /dev/null 2>&1").c_str());
    if (rc1 != 0 || rc2 != 0) return {false, "uq run exited with " + std::to_string(rc1) + " / " + std::to_string(rc2)};
    bool same = true;
    std::string detail;
    for (const char* f : {"result.json", "table.csv", "manifest.json", "thresholds.csv"}) {
        const auto a = slurp(dir / "a" / f);
        const bool eq = !a.empty() && a == slurp(dir / "b" / f);
        same = same && eq;
        detail += std::string(f) + (eq ? " identical (" + std::to_string(a.size()) + " B); " : " differs; ");
    }
    fs::remove_all(dir);
    return {same, detail + "runs used 1 and 2 threads"};
}

// 10. Surrogate moments against Monte-Carlo, plus the desk-scale wall time.
Outcome surrogate_and_timing(const DeskRun& d)
{
    const PipelineConfig cfg;
    const auto model = build_kl_model(cfg, all_threads());
    const SurrogateModel sur(cfg, 200);
    const int dim = static_cast<int>(model.rank());
    const auto r3 = smolyak_rule(dim, 3);
    const auto r2 = smolyak_rule(dim, 2);
    const double r = 1e-3;  // the surrogate is linear in r, so one distance suffices

    auto on_rule = [&](const SparseGridRule& rule) {
        std::vector<double> v(rule.size());
        for (std::size_t k = 0; k < rule.size(); ++k) {
            std::vector<double> x(static_cast<std::size_t>(dim));
            for (int j = 0; j < dim; ++j) x[static_cast<std::size_t>(j)] = rule.points(static_cast<Eigen::Index>(k), j);
            v[k] = sur(model, kl_coordinates(x), r);
        }
        return collocation_moments(rule, v);
    };
    const auto sg3 = on_rule(r3);
    const auto sg2 = on_rule(r2);

    const std::size_t n = 10000;
    std::vector<double> q(n);
    for (std::size_t s = 0; s < n; ++s) {
        auto rng = stream_for(cfg.seed + 1, s);
        std::vector<double> y(static_cast<std::size_t>(dim));
        for (double& v : y) v = rng.uniform(-std::sqrt(3.0), std::sqrt(3.0));
        q[s] = sur(model, y, r);
    }
    double mean = 0.0;
    for (double v : q) mean += v;
    mean /= static_cast<double>(n);
    double m2 = 0.0, m4 = 0.0;
    for (double v : q) {
        m2 += std::pow(v - mean, 2);
        m4 += std::pow(v - mean, 4);
    }
    const double var = m2 / static_cast<double>(n - 1);
    m4 /= static_cast<double>(n);
    const double sd = std::sqrt(var);
    const double se_mean = sd / std::sqrt(static_cast<double>(n));
    const double se_sd = std::sqrt(std::max(0.0, m4 - var * var) / static_cast<double>(n)) / (2.0 * sd);

    const double sg_mean = sg3.mean, sg_sd = std::sqrt(sg3.variance);
    const double err_mean = std::abs(sg3.mean - sg2.mean);
    const double err_sd = std::abs(std::sqrt(sg3.variance) - std::sqrt(sg2.variance));
    const double lim_mean = 2.0 * std::hypot(se_mean, err_mean);
    const double lim_sd = 2.0 * std::hypot(se_sd, err_sd);
    const bool mean_ok = std::abs(sg_mean - mean) <= lim_mean;
    const bool sd_ok = std::abs(sg_sd - sd) <= lim_sd;
    const bool time_ok = d.seconds <= 1800.0;

    return {mean_ok && sd_ok && time_ok,
            "surrogate mean SG " + fmt("%.6g", sg_mean * 1e3) + " vs MC " + fmt("%.6g", mean * 1e3) + " mA (|diff| " +
                fmt("%.2e", std::abs(sg_mean - mean) * 1e3) + " <= " + fmt("%.2e", lim_mean * 1e3) + "), std SG " +
                fmt("%.6g", sg_sd * 1e3) + " vs MC " + fmt("%.6g", sd * 1e3) + " mA (|diff| " +
                fmt("%.2e", std::abs(sg_sd - sd) * 1e3) + " <= " + fmt("%.2e", lim_sd * 1e3) + "); desk-scale uq run " +
                std::to_string(d.rule3.size()) + " nodes x " + std::to_string(d.l3.axons.size()) + " axons in " +
                fmt("%.0f", d.seconds) + " s on " + std::to_string(d.threads) + " thread(s) (limit 1800 s)"};
}

}  // namespace

int main(int argc, char** argv)
{
    const std::string exe = argc > 1 ? argv[1] : "";
    int failed = 0;
    auto report = [&](int id, const std::function<Outcome()>& f) {
        Outcome o;
        try {
            o = f();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
    };

    report(1, kl_truncation);
    report(2, eigen_decay);
    report(3, point_counts);
    report(4, exactness);
    report(5, forward_oracle);
    report(6, ffem_lowpass);

    DeskRun desk;
    std::string desk_error;
    try {
        desk = desk_run();
    } catch (const std::exception& e) {
        desk_error = e.what();
    }
    report(7, [&] {
        if (!desk_error.empty()) return Outcome{false, "desk-scale run failed: " + desk_error};
        return table_properties(desk);
    });
    report(8, brent_and_dt);
    report(9, [&] { return determinism(exe); });
    report(10, [&] {
        if (!desk_error.empty()) return Outcome{false, "desk-scale run failed: " + desk_error};
        return surrogate_and_timing(desk);
    });

    std::cout << (10 - failed) << " of 10 criteria pass" << std::endl;
    return failed == 0 ? 0 : 1;
}
