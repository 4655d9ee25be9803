// dbsuq command line: every pipeline stage as a subcommand with file outputs.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "dbsuq/errors.hpp"
#include "dbsuq/parallel.hpp"
#include "dbsuq/pipeline.hpp"
#include "dbsuq/random.hpp"

using namespace dbsuq;
namespace fs = std::filesystem;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Globals {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_given = false;
    unsigned threads = 0;
    std::string out = ".";
};

unsigned resolve_threads(unsigned flag)
{
    if (flag > 0) return flag;
    if (const char* env = std::getenv("DBSUQ_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v > 0) return static_cast<unsigned>(v);
        } catch (const std::exception&) {
        }
        throw ConfigError(std::string("DBSUQ_THREADS must be a positive integer, got \"") + env + "\"");
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

PipelineConfig load(const Globals& g)
{
    PipelineConfig cfg = g.config_path.empty() ? PipelineConfig{} : load_config(g.config_path);
    if (g.seed_given) cfg.seed = g.seed;
    cfg.validate();
    return cfg;
}

std::ofstream open_out(const Globals& g, const std::string& name)
{
    fs::create_directories(g.out);
    const auto path = (fs::path(g.out) / name).string();
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    std::cerr << "wrote " << path << '\n';
    out.precision(17);
    return out;
}

Material mean_material(const PipelineConfig& cfg)
{
    const auto p = cfg.box.mean;
    return {[p](double w) { return conductivity(p, w); }, [p](double w) { return permittivity(p, w); },
            cfg.encapsulation_factor};
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Uncertainty quantification of stimulation thresholds under random tissue dispersion"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config_path, "JSON config (defaults apply to missing keys)");
    app.add_option_function<std::uint64_t>(
        "--seed", [&](std::uint64_t s) { g.seed = s, g.seed_given = true; }, "override the config seed");
    app.add_option("--threads", g.threads, "worker count (default: $DBSUQ_THREADS, else all cores)");
    app.add_option("--out", g.out, "output directory");

    auto* disp = app.add_subcommand("dispersion", "Cole-Cole material law");
    auto* disp_eval = disp->add_subcommand("eval", "conductivity and permittivity of the mean parameters");
    disp->require_subcommand(1);
    double f_lo = 130.0, f_hi = 5e5;
    std::size_t f_n = 50;
    disp_eval->add_option("--f-min", f_lo, "Hz");
    disp_eval->add_option("--f-max", f_hi, "Hz");
    disp_eval->add_option("--n", f_n, "log-spaced frequencies");

    auto* kl = app.add_subcommand("kl", "Karhunen-Loeve model");
    kl->require_subcommand(1);
    auto* kl_build = kl->add_subcommand("build", "sample, eigendecompose and truncate; writes kl_model.json");
    auto* kl_sample = kl->add_subcommand("sample", "realizations of a saved KL model");
    std::string model_path;
    std::size_t sample_count = 10;
    kl_sample->add_option("--model", model_path, "kl_model.json")->required();
    kl_sample->add_option("--count", sample_count, "number of realizations");

    auto* grid = app.add_subcommand("grid", "sparse-grid rule");
    grid->require_subcommand(1);
    auto* grid_nodes = grid->add_subcommand("nodes", "Smolyak Clenshaw-Curtis nodes and weights");
    int grid_dim = -1, grid_level = -1;
    grid_nodes->add_option("--dim", grid_dim, "default: KL rank");
    grid_nodes->add_option("--level", grid_level, "default: config level");

    auto* field = app.add_subcommand("field", "volume conductor");
    field->require_subcommand(1);
    auto* field_solve = field->add_subcommand("solve", "nodal potential per unit current at one frequency");
    double solve_f = 130.0;
    field_solve->add_option("--frequency", solve_f, "Hz");
    auto* field_sweep = field->add_subcommand("sweep", "transfer function at the axon compartments");
    bool sweep_time = false;
    field_sweep->add_flag("--time", sweep_time, "also write the unit-current time signal");

    auto* ax = app.add_subcommand("axon", "cable model");
    ax->require_subcommand(1);
    auto* ax_sim = ax->add_subcommand("simulate", "trace of one axon in the mean medium");
    double sim_distance = 1e-3, sim_current = 1e-3;
    ax_sim->add_option("--distance", sim_distance, "m");
    ax_sim->add_option("--current", sim_current, "A");

    auto* thr = app.add_subcommand("threshold", "activation thresholds in the mean medium");

    auto* uq = app.add_subcommand("uq", "stochastic collocation study");
    uq->require_subcommand(1);
    auto* uq_run = uq->add_subcommand("run", "full study; writes result.json and the report");

    auto* rep = app.add_subcommand("report", "regenerate the report from a saved result");
    std::string result_path;
    rep->add_option("--result", result_path, "result.json")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        const PipelineConfig cfg = load(g);
        const unsigned threads = resolve_threads(g.threads);

        if (disp_eval->parsed()) {
            if (!(f_lo > 0.0) || !(f_hi > f_lo) || f_n < 2) throw ConfigError("dispersion eval: bad frequency range");
            auto out = open_out(g, "dispersion.csv");
            out << "frequency_hz,kappa,eps_r,re_sigma,im_sigma\n";
            for (std::size_t k = 0; k < f_n; ++k) {
                const double f = f_lo * std::pow(f_hi / f_lo, static_cast<double>(k) / static_cast<double>(f_n - 1));
                const auto s = admittivity(cfg.box.mean, kTwoPi * f).value;
                out << f << ',' << conductivity(cfg.box.mean, kTwoPi * f) << ',' << permittivity(cfg.box.mean, kTwoPi * f)
                    << ',' << s.real() << ',' << s.imag() << '\n';
            }
        } else if (kl_build->parsed()) {
            const auto model = build_kl_model(cfg, threads);
            fs::create_directories(g.out);
            save_kl_model(model, (fs::path(g.out) / "kl_model.json").string());
            std::cerr << "wrote " << (fs::path(g.out) / "kl_model.json").string() << '\n';
            auto out = open_out(g, "kl_eigenvalues.csv");
            out << "m,lambda\n";
            for (std::size_t m = 0; m < model.rank(); ++m)
                out << m + 1 << ',' << model.scale[static_cast<Eigen::Index>(m)] * model.scale[static_cast<Eigen::Index>(m)]
                    << '\n';
        } else if (kl_sample->parsed()) {
            const auto model = load_kl_model(model_path);
            std::vector<Eigen::VectorXd> real;
            std::vector<std::vector<double>> ys;
            for (std::size_t s = 0; s < sample_count; ++s) {
                auto rng = stream_for(cfg.seed, s);
                std::vector<double> y(model.rank());
                for (double& v : y) v = rng.uniform(-std::sqrt(3.0), std::sqrt(3.0));
                real.push_back(kl_realize(model, y));
                ys.push_back(std::move(y));
            }
            auto out = open_out(g, "kl_samples.csv");
            out << "omega";
            for (std::size_t s = 0; s < sample_count; ++s) out << ",kappa_" << s;
            out << '\n';
            for (std::size_t i = 0; i < model.grid.size(); ++i) {
                out << model.grid.omega[i];
                for (const auto& r : real) out << ',' << r[static_cast<Eigen::Index>(i)];
                out << '\n';
            }
            auto coords = open_out(g, "kl_sample_coordinates.csv");
            coords << "sample";
            for (std::size_t m = 0; m < model.rank(); ++m) coords << ",y" << m + 1;
            coords << '\n';
            for (std::size_t s = 0; s < ys.size(); ++s) {
                coords << s;
                for (double v : ys[s]) coords << ',' << v;
                coords << '\n';
            }
        } else if (grid_nodes->parsed()) {
            const int dim = grid_dim > 0 ? grid_dim : static_cast<int>(cfg.kl_rank);
            const int level = grid_level >= 0 ? grid_level : cfg.grid_level;
            if (dim < 1 || level < 0) throw ConfigError("grid nodes: need dim >= 1 and level >= 0");
            const auto rule = smolyak_rule(dim, level);
            auto out = open_out(g, "grid_nodes.csv");
            out << "node";
            for (int d = 0; d < dim; ++d) out << ",x" << d + 1;
            out << ",weight\n";
            for (std::size_t k = 0; k < rule.size(); ++k) {
                out << k;
                for (int d = 0; d < dim; ++d) out << ',' << rule.points(static_cast<Eigen::Index>(k), d);
                out << ',' << rule.weights[k] << '\n';
            }
            std::cerr << rule.size() << " nodes\n";
        } else if (field_solve->parsed()) {
            if (!(solve_f > 0.0)) throw ConfigError("field solve: frequency must be positive");
            const VolumeConductor vc(build_mesh(cfg.geometry, cfg.mesh_elements));
            const double w = kTwoPi * solve_f;
            const auto tissue = admittivity(cfg.box.mean, w);
            const ComplexAdmittivity enc{tissue.value - conductivity(cfg.box.mean, w) * (1.0 - cfg.encapsulation_factor)};
            const auto sol = vc.solve(enc, tissue, w);
            {
                auto nodes = open_out(g, "mesh_nodes.csv");
                auto tris = open_out(g, "mesh_triangles.csv");
                write_mesh_csv(vc.mesh(), nodes, tris);
            }
            auto out = open_out(g, "field_nodes.csv");
            out << "id,r,z,re_phi,im_phi\n";
            for (std::size_t i = 0; i < vc.mesh().nodes.size(); ++i) {
                const auto& p = vc.mesh().nodes[i];
                const auto v = sol.phi[static_cast<Eigen::Index>(i)];
                out << i << ',' << p.x() << ',' << p.y() << ',' << v.real() << ',' << v.imag() << '\n';
            }
            const auto z = vc.contact_potential(sol);
            std::cout << "contact impedance [Ohm]: " << z.real() << (z.imag() < 0 ? " - " : " + ") << std::abs(z.imag())
                      << "j\n";
        } else if (field_sweep->parsed()) {
            const ForwardModel fm(cfg);
            const auto omega = frequency_nodes(cfg.f_min, cfg.f_max, cfg.sweep_nodes);
            const auto tf = sweep(fm.conductor(), fm.points(), mean_material(cfg), omega, threads);
            {
                auto out = open_out(g, "transfer.csv");
                write_transfer_csv(tf, out);
            }
            if (sweep_time) {
                StimulusPulse unit = cfg.pulse;
                unit.amplitude = 1.0;
                const auto sig = reconstruct_time(tf, stimulus_spectrum(unit, cfg.nt), cfg.pulse.period, cfg.nt);
                auto out = open_out(g, "time_signal.csv");
                write_time_csv(sig, out);
            }
        } else if (ax_sim->parsed()) {
            PipelineConfig one = cfg;
            one.distances = {sim_distance};
            one.validate();
            const ForwardModel fm(one);
            const auto phi = fm.unit_response(mean_material(one), threads);
            const auto r = simulate(fm.cable(), phi[0], fm.dt(), one.n_periods, sim_current);
            auto out = open_out(g, "axon_trace.csv");
            out << "t,phi_m_out,phi_i_out\n";
            for (std::size_t t = 0; t < r.phi_i_out.size(); ++t)
                out << static_cast<double>(t) * fm.dt() << ',' << r.phi_m_out[t] << ',' << r.phi_i_out[t] << '\n';
            std::cout << "activated: " << (r.activated ? "yes" : "no") << "  metric [V]: " << r.metric
                      << "  phi_i_out > 0: " << (r.phi_i_positive ? "yes" : "no") << '\n';
        } else if (thr->parsed()) {
            const ForwardModel fm(cfg);
            const auto phi = fm.unit_response(mean_material(cfg), threads);
            std::vector<ThresholdResult> res(phi.size());
            // axons are independent here; no warm start so the order does not matter
            parallel_for(phi.size(), threads, [&](std::size_t a) {
                res[a] = activation_threshold(fm.cable(), phi[a], fm.dt(), cfg.n_periods, cfg.threshold);
            });
            auto out = open_out(g, "threshold_mean.csv");
            out << "axon,distance_mm,threshold_ma,evaluations,reachable\n";
            for (std::size_t a = 0; a < res.size(); ++a) {
                out << a + 1 << ',' << cfg.distances[a] * 1e3 << ',' << res[a].current * 1e3 << ',' << res[a].evaluations
                    << ',' << (res[a].reachable ? 1 : 0) << '\n';
                std::cout << "axon " << a + 1 << " (" << cfg.distances[a] * 1e3 << " mm): "
                          << (res[a].reachable ? std::to_string(res[a].current * 1e3) + " mA" : "not activated") << '\n';
            }
        } else if (uq_run->parsed()) {
            const auto model = build_kl_model(cfg, threads);
            const auto rule = smolyak_rule(static_cast<int>(model.rank()), cfg.grid_level);
            std::cerr << rule.size() << " collocation nodes, " << cfg.distances.size() << " axons, " << threads
                      << " threads\n";
            const ForwardModel fm(cfg);
            const auto result = run_collocation(fm, model, rule, threads);
            fs::create_directories(g.out);
            save_uq_result(result, (fs::path(g.out) / "result.json").string());
            for (const auto& p : write_report(result, config_to_json(cfg), g.out)) std::cerr << "wrote " << p << '\n';
            for (std::size_t a = 0; a < result.axons.size(); ++a)
                std::cout << "axon " << a + 1 << ": " << result.axons[a].mean * 1e3 << " +- " << result.axons[a].std * 1e3
                          << " mA\n";
        } else if (rep->parsed()) {
            const auto result = load_uq_result(result_path);
            if (result.config_hash != config_hash(cfg))
                throw ConfigError("report: result " + hash_hex(result.config_hash) + " was not produced by this config (" +
                                  hash_hex(config_hash(cfg)) + ")");
            for (const auto& p : write_report(result, config_to_json(cfg), g.out)) std::cerr << "wrote " << p << '\n';
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
