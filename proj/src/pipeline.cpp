#include "dbsuq/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "dbsuq/brent.hpp"
#include "dbsuq/errors.hpp"
#include "dbsuq/parallel.hpp"

namespace dbsuq {

namespace {

constexpr int kResultVersion = 1;

using json = nlohmann::json;

// Keys of `user` must exist in `reference`; arrays are leaves.
void check_keys(const json& user, const json& reference, const std::string& path)
{
    if (!user.is_object()) return;
    if (!reference.is_object()) throw ConfigError("config: " + path + " is not a section");
    for (const auto& [key, value] : user.items()) {
        const std::string where = path.empty() ? key : path + "." + key;
        if (!reference.contains(key)) throw ConfigError("config: unknown key " + where);
        check_keys(value, reference.at(key), where);
    }
}

std::string node_stage(std::size_t k, const char* stage)
{
    return "collocation node " + std::to_string(k) + ", stage " + stage + ": ";
}

template <class Fn>
auto with_context(std::size_t k, const char* stage, Fn&& fn)
{
    try {
        return fn();
    } catch (const ConfigError& e) {
        throw ConfigError(node_stage(k, stage) + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError(node_stage(k, stage) + e.what());
    } catch (const std::exception& e) {
        throw NumericalError(node_stage(k, stage) + e.what());
    }
}

json nan_to_null(double v) { return std::isnan(v) ? json(nullptr) : json(v); }
double null_to_nan(const json& v) { return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>(); }

std::shared_ptr<const GridSpline> realize_spline(const KLModel& model, std::span<const double> y)
{
    const Eigen::VectorXd g = kl_realize(model, y);
    return std::make_shared<const GridSpline>(model.grid, std::span<const double>(g.data(), static_cast<std::size_t>(g.size())));
}

double clamped(const GridSpline& s, const FrequencyGrid& grid, double w) { return s(std::clamp(w, grid.min(), grid.max())); }

}  // namespace

ThresholdResult activation_threshold(const std::function<double(double)>& metric, const ThresholdOptions& opts,
                                     double hint)
{
    if (!(opts.tol_abs > 0.0) || !(opts.lower > 0.0) || !(opts.cap > opts.lower) || !(opts.scan_factor > 1.0))
        throw ConfigError("threshold: need tol_abs > 0, 0 < lower < cap, scan_factor > 1");

    ThresholdResult res;
    // Remembers the two most recent evaluations so Brent does not redo the bracket ends.
    double memo_x[2] = {std::nan(""), std::nan("")}, memo_f[2] = {0.0, 0.0};
    int memo_next = 0;
    auto f = [&](double x) {
        for (int i = 0; i < 2; ++i)
            if (memo_x[i] == x) return memo_f[i];
        const double v = metric(x);
        ++res.evaluations;
        memo_x[memo_next] = x;
        memo_f[memo_next] = v;
        memo_next ^= 1;
        return v;
    };

    double lo = 0.0, hi = opts.lower;
    if (hint > opts.lower && hint < opts.cap && !(f(hint) > 0.0)) {
        lo = hint;
        hi = hint * opts.scan_factor;
    }
    for (;;) {
        hi = std::min(hi, opts.cap);
        if (f(hi) > 0.0) break;
        if (hi >= opts.cap) return res;
        lo = hi;
        hi *= opts.scan_factor;
    }
    if (lo == 0.0) {
        // activates at the first trial: continue the scan downward
        lo = hi / opts.scan_factor;
        while (f(lo) > 0.0) {
            hi = lo;
            lo /= opts.scan_factor;
            if (lo < 1e-300) throw NumericalError("threshold: metric positive at every amplitude");
        }
    }
    // Spike timing near the horizon can add sign changes above the threshold;
    // re-solve below any root whose 1% lower neighbour still activates.
    constexpr double kBelow = 0.99;
    auto br = brent(f, lo, hi, opts.tol_abs);
    for (;;) {
        const double probe = br.lower * kBelow;
        if (probe <= lo || !(f(probe) > 0.0)) break;
        br = brent(f, lo, probe, opts.tol_abs);
    }
    res.current = br.root;
    res.reachable = true;
    return res;
}

ThresholdResult activation_threshold(const CableSystem& sys, const Eigen::MatrixXd& unit_phi, double dt,
                                     int n_periods, const ThresholdOptions& opts, double hint)
{
    return activation_threshold([&](double amp) { return simulate(sys, unit_phi, dt, n_periods, amp).metric; }, opts,
                                hint);
}

void PipelineConfig::validate() const
{
    box.mean.validate();
    if (!(box.rel_halfwidth >= 0.0 && box.rel_halfwidth < 1.0)) throw ConfigError("config: rel_halfwidth must be in [0, 1)");
    if (!(kl_omega_min > 0.0) || !(kl_omega_max > kl_omega_min) || !(kl_log_step > 0.0))
        throw ConfigError("config: bad KL frequency grid");
    if (kl_samples < 2 || kl_rank < 1) throw ConfigError("config: need kl.samples >= 2 and kl.rank >= 1");
    if (grid_level < 0 || grid_level > 8) throw ConfigError("config: grid level must be in [0, 8]");
    geometry.validate();
    if (mesh_elements < 50) throw ConfigError("config: mesh.elements too small");
    if (!(encapsulation_factor > 0.0)) throw ConfigError("config: encapsulation factor must be positive");
    if (!(f_min > 0.0) || !(f_max > f_min) || sweep_nodes < 2) throw ConfigError("config: bad sweep range");
    const double tw = 2.0 * std::numbers::pi;
    if (tw * f_min < kl_omega_min * (1.0 - 1e-12) || tw * f_max > kl_omega_max * (1.0 + 1e-12))
        throw ConfigError("config: sweep range must lie inside the KL frequency grid");
    pulse.validate();
    if (nt < 8 || nt % 2 != 0) throw ConfigError("config: nt must be even and >= 8");
    if (pulse.pulse_width < 2.0 * pulse.period / static_cast<double>(nt)) throw ConfigError("config: nt too small for the pulse");
    axon.validate();
    if (!(fiber_diameter > 0.0)) throw ConfigError("config: fiber diameter must be positive");
    if (distances.empty()) throw ConfigError("config: need at least one axon distance");
    for (std::size_t i = 0; i < distances.size(); ++i) {
        if (!(distances[i] > geometry.lead_radius + geometry.encapsulation_thickness))
            throw ConfigError("config: axon distances must lie outside the encapsulation layer");
        if (i > 0 && !(distances[i] > distances[i - 1])) throw ConfigError("config: distances must be strictly increasing");
    }
    const double half = 0.5 * (axon.n_nodes - 1) * axon.node_spacing;
    if (!(std::hypot(distances.back(), half) < geometry.domain_radius) || !(half < 0.5 * geometry.domain_height))
        throw ConfigError("config: axons must lie inside the domain");
    if (n_periods < 1) throw ConfigError("config: n_periods must be >= 1");
    if (!(threshold.tol_abs > 0.0) || !(threshold.lower > 0.0) || !(threshold.cap > threshold.lower) ||
        !(threshold.scan_factor > 1.0))
        throw ConfigError("config: bad threshold options");
    if (unreachable_policy != "abort" && unreachable_policy != "exclude")
        throw ConfigError("config: unreachable_policy must be \"abort\" or \"exclude\"");
}

json config_to_json(const PipelineConfig& c)
{
    const auto mean = c.box.mean.to_array();
    const auto& g = c.geometry;
    const auto& m = c.membrane;
    json doc;
    doc["seed"] = c.seed;
    doc["dispersion"] = {{"mean", std::vector<double>(mean.begin(), mean.end())}, {"rel_halfwidth", c.box.rel_halfwidth}};
    doc["kl"] = {{"omega_min", c.kl_omega_min},
                 {"omega_max", c.kl_omega_max},
                 {"log_step", c.kl_log_step},
                 {"samples", c.kl_samples},
                 {"rank", c.kl_rank}};
    doc["grid"] = {{"level", c.grid_level}};
    doc["geometry"] = {{"lead_radius", g.lead_radius},
                       {"contact_height", g.contact_height},
                       {"contact_gap", g.contact_gap},
                       {"n_contacts", g.n_contacts},
                       {"active_contact_index", g.active_contact_index},
                       {"tip_length", g.tip_length},
                       {"encapsulation_thickness", g.encapsulation_thickness},
                       {"domain_radius", g.domain_radius},
                       {"domain_height", g.domain_height}};
    doc["field"] = {{"mesh_elements", c.mesh_elements}, {"encapsulation_factor", c.encapsulation_factor}};
    doc["ffem"] = {{"f_min", c.f_min},
                   {"f_max", c.f_max},
                   {"sweep_nodes", c.sweep_nodes},
                   {"nt", c.nt},
                   {"pulse_width", c.pulse.pulse_width},
                   {"period", c.pulse.period}};
    doc["axon"] = {{"n_nodes", c.axon.n_nodes},
                   {"internode_compartments", c.axon.internode_compartments},
                   {"node_spacing", c.axon.node_spacing},
                   {"node_length", c.axon.node_length},
                   {"fiber_diameter", c.fiber_diameter},
                   {"distances", c.distances},
                   {"n_periods", c.n_periods},
                   {"membrane",
                    {{"axoplasm_resistivity", m.axoplasm_resistivity},
                     {"g_ratio", m.g_ratio},
                     {"c_node", m.c_node},
                     {"g_na", m.g_na},
                     {"g_k", m.g_k},
                     {"g_leak", m.g_leak},
                     {"e_na", m.e_na},
                     {"e_k", m.e_k},
                     {"c_myelin", m.c_myelin},
                     {"g_myelin", m.g_myelin},
                     {"v_rest", m.v_rest}}}};
    doc["threshold"] = {{"tol_abs", c.threshold.tol_abs},
                        {"lower", c.threshold.lower},
                        {"cap", c.threshold.cap},
                        {"scan_factor", c.threshold.scan_factor},
                        {"unreachable_policy", c.unreachable_policy}};
    return doc;
}

PipelineConfig config_from_json(const json& user)
{
    if (!user.is_object()) throw ConfigError("config: top level must be an object");
    json doc = config_to_json(PipelineConfig{});
    check_keys(user, doc, "");
    doc.merge_patch(user);

    PipelineConfig c;
    try {
        c.seed = doc.at("seed").get<std::uint64_t>();
        const auto mean = doc.at("dispersion").at("mean").get<std::vector<double>>();
        if (mean.size() != kColeColeParamCount) throw ConfigError("config: dispersion.mean needs 14 entries");
        try {
            c.box.mean = ColeColeParams::from_array(mean);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("config: dispersion.mean: ") + e.what());
        }
        c.box.rel_halfwidth = doc["dispersion"].at("rel_halfwidth").get<double>();
        const auto& kl = doc.at("kl");
        c.kl_omega_min = kl.at("omega_min").get<double>();
        c.kl_omega_max = kl.at("omega_max").get<double>();
        c.kl_log_step = kl.at("log_step").get<double>();
        c.kl_samples = kl.at("samples").get<std::size_t>();
        c.kl_rank = kl.at("rank").get<std::size_t>();
        c.grid_level = doc.at("grid").at("level").get<int>();
        const auto& g = doc.at("geometry");
        c.geometry.lead_radius = g.at("lead_radius").get<double>();
        c.geometry.contact_height = g.at("contact_height").get<double>();
        c.geometry.contact_gap = g.at("contact_gap").get<double>();
        c.geometry.n_contacts = g.at("n_contacts").get<int>();
        c.geometry.active_contact_index = g.at("active_contact_index").get<int>();
        c.geometry.tip_length = g.at("tip_length").get<double>();
        c.geometry.encapsulation_thickness = g.at("encapsulation_thickness").get<double>();
        c.geometry.domain_radius = g.at("domain_radius").get<double>();
        c.geometry.domain_height = g.at("domain_height").get<double>();
        c.mesh_elements = doc.at("field").at("mesh_elements").get<std::size_t>();
        c.encapsulation_factor = doc["field"].at("encapsulation_factor").get<double>();
        const auto& f = doc.at("ffem");
        c.f_min = f.at("f_min").get<double>();
        c.f_max = f.at("f_max").get<double>();
        c.sweep_nodes = f.at("sweep_nodes").get<std::size_t>();
        c.nt = f.at("nt").get<std::size_t>();
        c.pulse.pulse_width = f.at("pulse_width").get<double>();
        c.pulse.period = f.at("period").get<double>();
        const auto& a = doc.at("axon");
        c.axon.n_nodes = a.at("n_nodes").get<int>();
        c.axon.internode_compartments = a.at("internode_compartments").get<int>();
        c.axon.node_spacing = a.at("node_spacing").get<double>();
        c.axon.node_length = a.at("node_length").get<double>();
        c.fiber_diameter = a.at("fiber_diameter").get<double>();
        c.distances = a.at("distances").get<std::vector<double>>();
        c.n_periods = a.at("n_periods").get<int>();
        const auto& m = a.at("membrane");
        c.membrane.axoplasm_resistivity = m.at("axoplasm_resistivity").get<double>();
        c.membrane.g_ratio = m.at("g_ratio").get<double>();
        c.membrane.c_node = m.at("c_node").get<double>();
        c.membrane.g_na = m.at("g_na").get<double>();
        c.membrane.g_k = m.at("g_k").get<double>();
        c.membrane.g_leak = m.at("g_leak").get<double>();
        c.membrane.e_na = m.at("e_na").get<double>();
        c.membrane.e_k = m.at("e_k").get<double>();
        c.membrane.c_myelin = m.at("c_myelin").get<double>();
        c.membrane.g_myelin = m.at("g_myelin").get<double>();
        c.membrane.v_rest = m.at("v_rest").get<double>();
        const auto& t = doc.at("threshold");
        c.threshold.tol_abs = t.at("tol_abs").get<double>();
        c.threshold.lower = t.at("lower").get<double>();
        c.threshold.cap = t.at("cap").get<double>();
        c.threshold.scan_factor = t.at("scan_factor").get<double>();
        c.unreachable_policy = t.at("unreachable_policy").get<std::string>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

PipelineConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ConfigError("cannot parse " + path + ": " + e.what());
    }
    return config_from_json(doc);
}

std::uint64_t config_hash(const PipelineConfig& cfg)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : config_to_json(cfg).dump()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hash_hex(std::uint64_t h)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

KLModel build_kl_model(const PipelineConfig& cfg, unsigned threads)
{
    const auto grid = build_grid(cfg.kl_omega_min, cfg.kl_omega_max, cfg.kl_log_step);
    const auto ens = sample_ensemble(cfg.box, grid, cfg.kl_samples, cfg.seed, threads);
    const auto cov = sample_covariance(ens);
    if (cfg.kl_rank > grid.size()) throw ConfigError("config: kl.rank exceeds the grid size");
    return truncate(eig_sym(cov.cov), cfg.kl_rank, grid, cov.mean);
}

std::vector<double> kl_coordinates(std::span<const double> x)
{
    std::vector<double> y(x.begin(), x.end());
    for (double& v : y) v *= std::sqrt(3.0);
    return y;
}

Material realization_material(const KLModel& model, std::span<const double> y, const PipelineConfig& cfg)
{
    if (y.size() != model.rank()) throw std::invalid_argument("realization: coordinate count does not match the KL rank");
    auto spline = realize_spline(model, y);
    const FrequencyGrid grid = model.grid;
    const ColeColeParams mean = cfg.box.mean;
    return {[spline, grid](double w) { return clamped(*spline, grid, w); },
            [mean](double w) { return permittivity(mean, w); }, cfg.encapsulation_factor};
}

ForwardModel::ForwardModel(const PipelineConfig& cfg)
    : cfg_((cfg.validate(), cfg)),
      conductor_(build_mesh(cfg.geometry, cfg.mesh_elements)),
      cable_(build_axon(cfg.axon, cfg.fiber_diameter, cfg.membrane)),
      omega_(frequency_nodes(cfg.f_min, cfg.f_max, cfg.sweep_nodes))
{
    cfg_.pulse.amplitude = 1.0;
    spectrum_ = stimulus_spectrum(cfg_.pulse, cfg_.nt);
    AxonGeometry g = cfg_.axon;
    for (double d : cfg_.distances) {
        g.distance = d;
        const auto p = g.compartment_points();
        points_.insert(points_.end(), p.begin(), p.end());
    }
}

std::vector<Eigen::MatrixXd> ForwardModel::unit_response(const Material& material, unsigned threads) const
{
    const TransferFunction tf = sweep(conductor_, points_, material, omega_, threads);
    const TimeSignal sig = reconstruct_time(tf, spectrum_, cfg_.pulse.period, cfg_.nt);
    const auto n = static_cast<Eigen::Index>(cable_.size());
    std::vector<Eigen::MatrixXd> out;
    for (std::size_t a = 0; a < cfg_.distances.size(); ++a)
        out.emplace_back(sig.values.middleRows(static_cast<Eigen::Index>(a) * n, n));
    return out;
}

Moments collocation_moments(const SparseGridRule& rule, std::span<const double> values)
{
    if (values.size() != rule.size()) throw std::invalid_argument("moments: value count does not match the rule");
    if (std::none_of(values.begin(), values.end(), [](double v) { return std::isnan(v); })) return moments(rule, values);
    double wsum = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k)
        if (!std::isnan(values[k])) wsum += rule.weights[k];
    if (!(wsum > 0.0)) throw NumericalError("moments: no usable collocation nodes");
    Moments m;
    for (std::size_t k = 0; k < values.size(); ++k)
        if (!std::isnan(values[k])) m.mean += rule.weights[k] / wsum * values[k];
    for (std::size_t k = 0; k < values.size(); ++k)
        if (!std::isnan(values[k])) m.variance += rule.weights[k] / wsum * (values[k] - m.mean) * (values[k] - m.mean);
    m.variance = std::max(m.variance, 0.0);
    return m;
}

UQResult run_collocation(const ForwardModel& forward, const KLModel& model, const SparseGridRule& rule,
                         unsigned threads)
{
    const auto& cfg = forward.config();
    if (static_cast<std::size_t>(rule.dim) != model.rank())
        throw ConfigError("collocation: rule dimension " + std::to_string(rule.dim) + " does not match KL rank " +
                          std::to_string(model.rank()));
    const std::size_t nk = rule.size(), na = cfg.distances.size();
    std::vector<std::vector<double>> thr(nk, std::vector<double>(na, std::numeric_limits<double>::quiet_NaN()));

    parallel_for(nk, threads, [&](std::size_t k) {
        const Eigen::VectorXd x = rule.points.row(static_cast<Eigen::Index>(k)).transpose();
        const auto y = kl_coordinates(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
        const auto phi = with_context(k, "field", [&] { return forward.unit_response(realization_material(model, y, cfg)); });
        double hint = 0.0;
        for (std::size_t a = 0; a < na; ++a) {
            const auto t = with_context(k, "threshold", [&] {
                return activation_threshold(forward.cable(), phi[a], forward.dt(), cfg.n_periods, cfg.threshold, hint);
            });
            if (!t.reachable) {
                if (cfg.unreachable_policy == "abort")
                    throw NumericalError(node_stage(k, "threshold") + "axon at " + std::to_string(cfg.distances[a] * 1e3) +
                                         " mm not activated below " + std::to_string(cfg.threshold.cap) + " A");
                continue;
            }
            thr[k][a] = t.current;
            hint = t.current;
        }
    });

    UQResult r;
    r.config_hash = config_hash(cfg);
    r.seed = cfg.seed;
    r.dim = rule.dim;
    r.level = rule.level;
    r.points = rule.points;
    r.weights = rule.weights;
    for (const auto& row : thr)
        if (std::any_of(row.begin(), row.end(), [](double v) { return std::isnan(v); })) ++r.excluded;
    for (std::size_t a = 0; a < na; ++a) {
        AxonStatistics s;
        s.distance = cfg.distances[a];
        for (std::size_t k = 0; k < nk; ++k) s.thresholds.push_back(thr[k][a]);
        if (std::all_of(s.thresholds.begin(), s.thresholds.end(), [](double v) { return std::isnan(v); })) {
            s.mean = s.std = std::numeric_limits<double>::quiet_NaN();
        } else {
            const auto m = collocation_moments(rule, s.thresholds);
            s.mean = m.mean;
            s.std = std::sqrt(m.variance);
        }
        r.axons.push_back(std::move(s));
    }
    return r;
}

json uq_result_to_json(const UQResult& r)
{
    json doc;
    doc["format"] = "dbsuq.uq_result";
    doc["version"] = kResultVersion;
    doc["config_hash"] = hash_hex(r.config_hash);
    doc["seed"] = r.seed;
    doc["rule"] = {{"dim", r.dim}, {"level", r.level}, {"nodes", r.weights.size()}};
    std::vector<double> pts;
    for (Eigen::Index k = 0; k < r.points.rows(); ++k)
        for (Eigen::Index d = 0; d < r.points.cols(); ++d) pts.push_back(r.points(k, d));
    doc["points_row_major"] = pts;
    doc["weights"] = r.weights;
    doc["excluded"] = r.excluded;
    json axons = json::array();
    for (const auto& a : r.axons) {
        json t = json::array();
        for (double v : a.thresholds) t.push_back(nan_to_null(v));
        axons.push_back({{"distance", a.distance}, {"mean", nan_to_null(a.mean)}, {"std", nan_to_null(a.std)}, {"thresholds", t}});
    }
    doc["axons"] = axons;
    return doc;
}

UQResult uq_result_from_json(const json& doc)
{
    UQResult r;
    try {
        if (doc.at("format").get<std::string>() != "dbsuq.uq_result") throw ConfigError("not a UQ result document");
        if (doc.at("version").get<int>() != kResultVersion) throw ConfigError("unsupported UQ result version");
        r.config_hash = std::stoull(doc.at("config_hash").get<std::string>(), nullptr, 16);
        r.seed = doc.at("seed").get<std::uint64_t>();
        r.dim = doc.at("rule").at("dim").get<int>();
        r.level = doc["rule"].at("level").get<int>();
        r.weights = doc.at("weights").get<std::vector<double>>();
        const auto pts = doc.at("points_row_major").get<std::vector<double>>();
        const auto nk = static_cast<Eigen::Index>(r.weights.size());
        if (pts.size() != r.weights.size() * static_cast<std::size_t>(r.dim)) throw ConfigError("UQ result: point array size");
        r.points.resize(nk, r.dim);
        for (Eigen::Index k = 0; k < nk; ++k)
            for (Eigen::Index d = 0; d < r.dim; ++d) r.points(k, d) = pts[static_cast<std::size_t>(k * r.dim + d)];
        r.excluded = doc.at("excluded").get<std::size_t>();
        for (const auto& a : doc.at("axons")) {
            AxonStatistics s;
            s.distance = a.at("distance").get<double>();
            s.mean = null_to_nan(a.at("mean"));
            s.std = null_to_nan(a.at("std"));
            for (const auto& v : a.at("thresholds")) s.thresholds.push_back(null_to_nan(v));
            if (s.thresholds.size() != r.weights.size()) throw ConfigError("UQ result: threshold count does not match the rule");
            r.axons.push_back(std::move(s));
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("UQ result: ") + e.what());
    } catch (const std::logic_error& e) {
        throw ConfigError(std::string("UQ result: ") + e.what());
    }
    return r;
}

void save_uq_result(const UQResult& r, const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << uq_result_to_json(r).dump(1) << '\n';
    if (!out) throw std::runtime_error("write failed: " + path);
}

UQResult load_uq_result(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ConfigError("cannot parse " + path + ": " + e.what());
    }
    return uq_result_from_json(doc);
}

std::vector<std::string> write_report(const UQResult& r, const json& config_doc, const std::string& dir,
                                      bool node_matrix)
{
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::vector<std::string> written;
    auto open = [&](const std::string& name) {
        const std::string path = (fs::path(dir) / name).string();
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write " + path);
        written.push_back(path);
        return out;
    };

    {
        auto out = open("table.csv");
        out.precision(10);
        out << "axon,distance_mm,mean_ma,std_ma\n";
        for (std::size_t a = 0; a < r.axons.size(); ++a)
            out << a + 1 << ',' << r.axons[a].distance * 1e3 << ',' << r.axons[a].mean * 1e3 << ',' << r.axons[a].std * 1e3
                << '\n';
        if (!out) throw std::runtime_error("write failed: " + written.back());
    }
    {
        json m;
        m["tool"] = "dbsuq";
        m["version"] = kVersion;
        m["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                     std::to_string(EIGEN_MINOR_VERSION);
        m["config_hash"] = hash_hex(r.config_hash);
        m["seed"] = r.seed;
        m["rule"] = {{"dim", r.dim}, {"level", r.level}, {"nodes", r.weights.size()}};
        m["excluded_nodes"] = r.excluded;
        m["config"] = config_doc;
        auto out = open("manifest.json");
        out << m.dump(1) << '\n';
        if (!out) throw std::runtime_error("write failed: " + written.back());
    }
    if (node_matrix) {
        auto out = open("thresholds.csv");
        out.precision(17);
        out << "node";
        for (int d = 0; d < r.dim; ++d) out << ",x" << d + 1;
        out << ",weight";
        for (const auto& a : r.axons) out << ",threshold_ma_" << a.distance * 1e3 << "mm";
        out << '\n';
        for (std::size_t k = 0; k < r.weights.size(); ++k) {
            out << k;
            for (int d = 0; d < r.dim; ++d) out << ',' << r.points(static_cast<Eigen::Index>(k), d);
            out << ',' << r.weights[k];
            for (const auto& a : r.axons) out << ',' << a.thresholds[k] * 1e3;
            out << '\n';
        }
        if (!out) throw std::runtime_error("write failed: " + written.back());
    }
    return written;
}

SurrogateModel::SurrogateModel(const PipelineConfig& cfg, std::size_t sweep_nodes, double v_ref)
    : cfg_(cfg), omega_(frequency_nodes(cfg.f_min, cfg.f_max, sweep_nodes)), v_ref_(v_ref)
{
    cfg_.pulse.amplitude = 1.0;
    spectrum_ = stimulus_spectrum(cfg_.pulse, cfg_.nt);
    if (!(v_ref > 0.0)) throw std::invalid_argument("surrogate: reference potential must be positive");
}

double SurrogateModel::operator()(const KLModel& model, std::span<const double> y, double r) const
{
    if (!(r > 0.0)) throw std::invalid_argument("surrogate: distance must be positive");
    const Material mat = realization_material(model, y, cfg_);
    TransferFunction tf;
    tf.points = {{r, 0.0}};
    tf.omega = omega_;
    tf.H.resize(1, static_cast<Eigen::Index>(omega_.size()));
    const double k = 1.0 / (4.0 * std::numbers::pi * r);
    tf.H(0, 0) = k / mat.kappa(omega_[1]);
    for (std::size_t i = 1; i < omega_.size(); ++i) {
        const double w = omega_[i];
        const Complex sigma(mat.kappa(w), w * kVacuumPermittivity * mat.eps_r(w));
        tf.H(0, static_cast<Eigen::Index>(i)) = k / sigma;
    }
    const TimeSignal sig = reconstruct_time(tf, spectrum_, cfg_.pulse.period, cfg_.nt);
    const double peak = sig.values.cwiseAbs().maxCoeff();
    if (!(peak > 0.0)) throw NumericalError("surrogate: zero response");
    return v_ref_ / peak;
}

}  // namespace dbsuq
