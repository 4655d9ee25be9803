#include "dbsuq/kl.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "dbsuq/errors.hpp"
#include "dbsuq/parallel.hpp"
#include "dbsuq/random.hpp"

namespace dbsuq {

namespace {

constexpr int kModelVersion = 1;

void fix_signs(Eigen::MatrixXd& vectors)
{
    for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
        Eigen::Index arg = 0;
        vectors.col(c).cwiseAbs().maxCoeff(&arg);
        if (vectors(arg, c) < 0.0) vectors.col(c) *= -1.0;
    }
}

}  // namespace

FrequencyGrid build_grid(double omega_min, double omega_max, double log_step, double log_base)
{
    if (!(omega_min > 0.0) || !(omega_max > omega_min) || !std::isfinite(omega_max))
        throw std::invalid_argument("frequency grid needs 0 < omega_min < omega_max");
    if (!(log_step > 0.0)) throw std::invalid_argument("frequency grid needs log_step > 0");
    if (!(log_base > 1.0)) throw std::invalid_argument("frequency grid needs log_base > 1");

    FrequencyGrid grid;
    grid.log_step = log_step;
    grid.log_base = log_base;
    const double lo = grid.log_coord(omega_min);
    const double span = grid.log_coord(omega_max) - lo;
    // Spans that are an exact multiple of the step must not gain a sliver interval.
    const auto intervals = static_cast<std::size_t>(std::ceil(span / log_step - 1e-9));
    grid.omega.resize(intervals + 1);
    grid.omega.front() = omega_min;
    for (std::size_t k = 1; k < intervals; ++k)
        grid.omega[k] = std::pow(log_base, lo + static_cast<double>(k) * log_step);
    grid.omega.back() = omega_max;
    return grid;
}

SampleEnsemble sample_ensemble(const RandomParamBox& box, const FrequencyGrid& grid,
                               std::size_t samples, std::uint64_t seed, unsigned threads)
{
    if (samples < 2) throw std::invalid_argument("sample_ensemble needs at least two samples");
    SampleEnsemble ens;
    ens.values.resize(static_cast<Eigen::Index>(samples), static_cast<Eigen::Index>(grid.size()));
    parallel_for(samples, threads, [&](std::size_t s) {
        auto rng = stream_for(seed, s);
        std::array<double, kColeColeParamCount> u{};
        for (auto& ui : u) ui = rng.uniform(-1.0, 1.0);
        const ColeColeParams p = sample_params(box, u);
        for (std::size_t n = 0; n < grid.size(); ++n)
            ens.values(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(n)) =
                conductivity(p, grid.omega[n]);
    });
    if (!ens.values.allFinite()) throw NumericalError("sample ensemble contains non-finite values");
    return ens;
}

CovarianceEstimate sample_covariance(const SampleEnsemble& ens)
{
    const auto S = ens.values.rows();
    if (S < 2) throw std::invalid_argument("sample_covariance needs at least two samples");
    CovarianceEstimate est;
    est.mean = ens.values.colwise().mean().transpose();
    const Eigen::MatrixXd centered = ens.values.rowwise() - est.mean.transpose();
    est.cov = (centered.transpose() * centered) / static_cast<double>(S - 1);
    est.cov = 0.5 * (est.cov + est.cov.transpose()).eval();
    return est;
}

EigenDecomposition eig_sym(const Eigen::MatrixXd& C)
{
    if (C.rows() != C.cols()) throw std::invalid_argument("eig_sym needs a square matrix");
    if (!C.allFinite()) throw std::invalid_argument("eig_sym: matrix has non-finite entries");
    const Eigen::MatrixXd sym = 0.5 * (C + C.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
    if (solver.info() != Eigen::Success) throw NumericalError("symmetric eigensolver failed");

    EigenDecomposition eig;
    eig.lambda = solver.eigenvalues().reverse();
    eig.vectors = solver.eigenvectors().rowwise().reverse();
    fix_signs(eig.vectors);
    return eig;
}

Eigen::MatrixXd KLModel::covariance() const
{
    const Eigen::MatrixXd scaled = basis * scale.asDiagonal();
    return scaled * scaled.transpose();
}

KLModel truncate(const EigenDecomposition& eig, std::size_t rank, const FrequencyGrid& grid,
                 const Eigen::VectorXd& mean)
{
    const auto available = static_cast<std::size_t>(eig.lambda.size());
    if (rank < 1 || rank > available)
        throw std::invalid_argument("truncation rank must lie in [1, " +
                                    std::to_string(available) + "]");
    if (static_cast<std::size_t>(mean.size()) != grid.size() ||
        static_cast<std::size_t>(eig.vectors.rows()) != grid.size())
        throw std::invalid_argument("truncate: grid, mean and eigenvectors disagree in size");
    const auto M = static_cast<Eigen::Index>(rank);
    for (Eigen::Index m = 0; m < M; ++m)
        if (!(eig.lambda[m] > 0.0))
            throw NumericalError("kept eigenvalue " + std::to_string(m + 1) +
                                 " is not positive (" + std::to_string(eig.lambda[m]) + ")");
    KLModel model;
    model.grid = grid;
    model.mean = mean;
    model.basis = eig.vectors.leftCols(M);
    fix_signs(model.basis);
    model.scale = eig.lambda.head(M).cwiseSqrt();
    return model;
}

KLModel truncate_by_energy(const EigenDecomposition& eig, double tol, const FrequencyGrid& grid,
                           const Eigen::VectorXd& mean)
{
    if (!(tol >= 0.0)) throw std::invalid_argument("energy tolerance must be >= 0");
    const double total = eig.lambda.sum();
    double tail = total;
    std::size_t rank = 0;
    while (rank < static_cast<std::size_t>(eig.lambda.size())) {
        tail -= eig.lambda[static_cast<Eigen::Index>(rank)];
        ++rank;
        if (tail <= tol * total) break;
    }
    return truncate(eig, rank, grid, mean);
}

Eigen::VectorXd kl_realize(const KLModel& model, std::span<const double> y)
{
    if (y.size() != model.rank())
        throw std::invalid_argument("kl_realize: expected " + std::to_string(model.rank()) +
                                    " coordinates, got " + std::to_string(y.size()));
    const Eigen::Map<const Eigen::VectorXd> coords(y.data(), static_cast<Eigen::Index>(y.size()));
    if (!coords.allFinite()) throw std::invalid_argument("kl_realize: non-finite coordinates");
    return model.mean + model.basis * model.scale.cwiseProduct(coords);
}

Eigen::VectorXd kl_project(const KLModel& model, const Eigen::VectorXd& g)
{
    if (g.size() != model.mean.size())
        throw std::invalid_argument("kl_project: observation length does not match the grid");
    if (!g.allFinite()) throw std::invalid_argument("kl_project: non-finite observation");
    return (model.basis.transpose() * (g - model.mean)).cwiseQuotient(model.scale);
}

GridSpline::GridSpline(const FrequencyGrid& grid, std::span<const double> values)
    : log_base_(grid.log_base), omega_min_(grid.min()), omega_max_(grid.max())
{
    if (values.size() != grid.size())
        throw std::invalid_argument("spline values do not match the frequency grid");
    std::vector<double> x(grid.size());
    for (std::size_t n = 0; n < grid.size(); ++n) x[n] = grid.log_coord(grid.omega[n]);
    spline_ = CubicSpline(std::move(x), std::vector<double>(values.begin(), values.end()));
}

double GridSpline::operator()(double omega) const
{
    if (!(omega >= omega_min_ && omega <= omega_max_))
        throw std::out_of_range("frequency " + std::to_string(omega) +
                                " rad/s outside the KL grid");
    // Knot abscissae are computed exactly like the grid's, so knot queries hit exactly.
    if (omega == omega_min_) return spline_(spline_.x_min());
    if (omega == omega_max_) return spline_(spline_.x_max());
    return spline_(std::log(omega) / std::log(log_base_));
}

double spline_eval(const FrequencyGrid& grid, std::span<const double> values, double omega)
{
    return GridSpline(grid, values)(omega);
}

TruncationError truncation_error(const Eigen::MatrixXd& C, const KLModel& model)
{
    if (C.rows() != model.mean.size() || C.cols() != model.mean.size())
        throw std::invalid_argument("truncation_error: covariance shape does not match the model");
    TruncationError err;
    const Eigen::MatrixXd residual = (C - model.covariance()).cwiseAbs();
    const double scale = C.cwiseAbs().maxCoeff();
    err.field = scale > 0.0 ? Eigen::MatrixXd(residual / scale) : residual;
    err.max_rel = err.field.maxCoeff();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(0.5 * (C + C.transpose()),
                                                          Eigen::EigenvaluesOnly);
    const double norm2 = solver.eigenvalues().cwiseAbs().maxCoeff();
    err.spectral_rel = norm2 > 0.0 ? residual.maxCoeff() / norm2 : residual.maxCoeff();
    return err;
}

nlohmann::json kl_model_to_json(const KLModel& model)
{
    nlohmann::json doc;
    doc["format"] = "dbsuq.kl_model";
    doc["version"] = kModelVersion;
    doc["grid"] = {{"omega_min", model.grid.min()},
                   {"omega_max", model.grid.max()},
                   {"log_step", model.grid.log_step},
                   {"log_base", model.grid.log_base},
                   {"size", model.grid.size()}};
    doc["rank"] = model.rank();
    doc["mean"] = std::vector<double>(model.mean.data(), model.mean.data() + model.mean.size());
    std::vector<double> lambda(model.rank());
    for (std::size_t m = 0; m < model.rank(); ++m)
        lambda[m] = model.scale[static_cast<Eigen::Index>(m)] *
                    model.scale[static_cast<Eigen::Index>(m)];
    doc["eigenvalues"] = lambda;
    std::vector<double> basis;
    basis.reserve(static_cast<std::size_t>(model.basis.size()));
    for (Eigen::Index r = 0; r < model.basis.rows(); ++r)
        for (Eigen::Index c = 0; c < model.basis.cols(); ++c) basis.push_back(model.basis(r, c));
    doc["basis_row_major"] = basis;
    return doc;
}

KLModel kl_model_from_json(const nlohmann::json& doc)
{
    try {
        if (doc.at("format").get<std::string>() != "dbsuq.kl_model")
            throw ConfigError("not a KL model document");
        if (doc.at("version").get<int>() != kModelVersion)
            throw ConfigError("unsupported KL model version");
        const auto& g = doc.at("grid");
        KLModel model;
        model.grid = build_grid(g.at("omega_min").get<double>(), g.at("omega_max").get<double>(),
                                g.at("log_step").get<double>(), g.at("log_base").get<double>());
        const auto N = model.grid.size();
        if (g.at("size").get<std::size_t>() != N)
            throw ConfigError("KL model grid size does not match its descriptor");
        const auto mean = doc.at("mean").get<std::vector<double>>();
        const auto lambda = doc.at("eigenvalues").get<std::vector<double>>();
        const auto basis = doc.at("basis_row_major").get<std::vector<double>>();
        const auto M = lambda.size();
        if (mean.size() != N || basis.size() != N * M || doc.at("rank").get<std::size_t>() != M)
            throw ConfigError("KL model arrays have inconsistent sizes");
        model.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(N));
        model.scale.resize(static_cast<Eigen::Index>(M));
        for (std::size_t m = 0; m < M; ++m) {
            if (lambda[m] < 0.0) throw ConfigError("KL model has a negative eigenvalue");
            model.scale[static_cast<Eigen::Index>(m)] = std::sqrt(lambda[m]);
        }
        model.basis = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                     Eigen::RowMajor>>(
            basis.data(), static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(M));
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed KL model: ") + e.what());
    }
}

void save_kl_model(const KLModel& model, const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << kl_model_to_json(model).dump(1) << '\n';
}

KLModel load_kl_model(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read KL model " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("cannot parse " + path + ": " + e.what());
    }
    return kl_model_from_json(doc);
}

}  // namespace dbsuq
