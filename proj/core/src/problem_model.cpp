#include "mfgcn/problem_model.hpp"

#include <Eigen/Dense>

#include <numeric>
#include <sstream>
#include <stdexcept>

namespace mfgcn {

MeasureSummary::MeasureSummary(std::size_t dim, std::vector<double> points,
                               std::vector<double> weights, double p)
    : dim_(dim), points_(std::move(points)), weights_(std::move(weights)), mean_(dim, 0.0), p_(p) {
    if (dim_ == 0) throw std::invalid_argument("MeasureSummary: dimension must be positive");
    if (weights_.empty() || points_.size() != weights_.size() * dim_)
        throw std::invalid_argument("MeasureSummary: points/weights size mismatch");
    double total = 0.0;
    for (double w : weights_) {
        if (!(w >= 0.0) || !std::isfinite(w))
            throw std::invalid_argument("MeasureSummary: weights must be finite and nonnegative");
        total += w;
    }
    if (!(total > 0.0)) throw std::invalid_argument("MeasureSummary: zero total mass");
    for (double& w : weights_) w /= total;

    for (std::size_t i = 0; i < weights_.size(); ++i) {
        double norm2 = 0.0;
        for (std::size_t j = 0; j < dim_; ++j) {
            const double v = points_[i * dim_ + j];
            mean_[j] += weights_[i] * v;
            norm2 += v * v;
        }
        pth_moment_ += weights_[i] * std::pow(std::sqrt(norm2), p_);
    }
}

MeasureSummary MeasureSummary::dirac(std::span<const double> point, double p) {
    return MeasureSummary(point.size(), std::vector<double>(point.begin(), point.end()), {1.0}, p);
}

MeasureSummary MeasureSummary::uniform(std::size_t dim, std::vector<double> points, double p) {
    const std::size_t n = dim == 0 ? 0 : points.size() / dim;
    return MeasureSummary(dim, std::move(points), std::vector<double>(n, 1.0), p);
}

bool ActionBox::contains(std::span<const double> a, double tol) const {
    if (a.size() != dim()) return false;
    for (std::size_t i = 0; i < dim(); ++i)
        if (!(a[i] >= lo[i] - tol && a[i] <= hi[i] + tol)) return false;
    return true;
}

bool ActionBox::clamp(std::span<double> a) const {
    bool moved = false;
    for (std::size_t i = 0; i < dim(); ++i) {
        const double c = std::clamp(a[i], lo[i], hi[i]);
        if (c != a[i]) moved = true;
        a[i] = c;
    }
    return moved;
}

InitialLaw InitialLaw::point(std::vector<double> value) {
    InitialLaw law;
    law.std.assign(value.size(), 0.0);
    law.mean = std::move(value);
    return law;
}

bool InitialLaw::is_point_mass() const {
    return std::all_of(std::begin(std), std::end(std), [](double s) { return s == 0.0; });
}

void InitialLaw::sample(const CounterRng& rng, Stream stream, std::uint32_t path,
                        std::span<double> out) const {
    for (std::size_t j = 0; j < out.size(); ++j) {
        const double s = std[j];
        if (s == 0.0) {
            out[j] = mean[j];
            continue;
        }
        // Rejection on the step index keeps every attempt on its own counter.
        double z = 0.0;
        for (std::uint32_t attempt = 0;; ++attempt) {
            z = rng.normal(stream, path, attempt, static_cast<std::uint32_t>(j));
            if (std::abs(z) <= truncation || attempt > 1000) break;
        }
        out[j] = mean[j] + s * std::clamp(z, -truncation, truncation);
    }
}

namespace {

Eigen::MatrixXd to_matrix(const std::vector<double>& v, std::size_t rows, std::size_t cols) {
    Eigen::MatrixXd m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) m(i, j) = v[i * cols + j];
    return m;
}

double condition_number(const Eigen::MatrixXd& m) {
    if (!m.allFinite()) return std::numeric_limits<double>::infinity();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& s = svd.singularValues();
    const double smax = s.maxCoeff();
    const double smin = s.minCoeff();
    if (!(smax > 0.0) || !(smin > 0.0)) return std::numeric_limits<double>::infinity();
    return smax / smin;
}

void require(bool cond, const char* what) {
    if (!cond) throw std::invalid_argument(std::string("ProblemSpec: ") + what);
}

}  // namespace

ProblemSpec::ProblemSpec(ProblemData data) : data_(std::move(data)) {
    const auto& d = data_;
    require(d.d_state >= 1 && d.d_state <= kMaxDim, "d_state must be in [1, 8]");
    require(d.d_common >= 1 && d.d_common <= kMaxDim, "d_common must be in [1, 8]");
    require(d.d_action >= 1 && d.d_action <= kMaxDim, "d_action must be in [1, 8]");
    require(d.horizon > 0.0 && std::isfinite(d.horizon), "horizon must be positive");
    require(d.p >= 2.0, "moment exponent p must be >= 2");
    require(d.sigma.size() == d.d_state * d.d_state, "sigma must be d_state x d_state");
    require(d.sigma0.size() == d.d_state * d.d_common, "sigma0 must be d_state x d_common");
    require(d.sigmac.size() == d.d_common * d.d_common, "sigmac must be d_common x d_common");
    require(d.action_box.lo.size() == d.d_action && d.action_box.hi.size() == d.d_action,
            "action box dimension mismatch");
    for (std::size_t i = 0; i < d.d_action; ++i)
        require(std::isfinite(d.action_box.lo[i]) && std::isfinite(d.action_box.hi[i]) &&
                    d.action_box.lo[i] <= d.action_box.hi[i],
                "action box must be a nonempty compact box");
    require(d.drift_bound >= 0.0 && d.common_drift_bound >= 0.0, "drift bounds must be >= 0");
    require(static_cast<bool>(d.drift) && static_cast<bool>(d.common_drift) &&
                static_cast<bool>(d.running_cost) && static_cast<bool>(d.terminal_cost),
            "all coefficient callables must be set");
    require(d.initial_state.mean.size() == d.d_state && d.initial_state.std.size() == d.d_state,
            "initial state law dimension mismatch");
    require(d.initial_common.mean.size() == d.d_common && d.initial_common.std.size() == d.d_common,
            "initial common law dimension mismatch");

    const Eigen::MatrixXd sigma = to_matrix(d.sigma, d.d_state, d.d_state);
    sigma_cond_ = condition_number(sigma);
    sigmac_cond_ = condition_number(to_matrix(d.sigmac, d.d_common, d.d_common));
    if (sigma_invertible()) {
        const Eigen::MatrixXd inv = sigma.inverse();
        sigma_inv_.resize(d.d_state * d.d_state);
        for (std::size_t i = 0; i < d.d_state; ++i)
            for (std::size_t j = 0; j < d.d_state; ++j) sigma_inv_[i * d.d_state + j] = inv(i, j);
    }
}

bool ProblemSpec::sigma_invertible() const { return sigma_cond_ <= kSingularCondition; }
bool ProblemSpec::sigmac_invertible() const { return sigmac_cond_ <= kSingularCondition; }

const std::vector<double>& ProblemSpec::sigma_inv() const {
    if (!sigma_invertible()) throw std::domain_error("ProblemSpec: sigma is singular");
    return sigma_inv_;
}

void ProblemSpec::scaled_drift(double t, std::span<const double> x, const MeasureSummary& mu,
                               std::span<const double> a, std::span<double> out) const {
    const std::size_t d = d_state();
    const auto& inv = sigma_inv();
    Vec b{};
    drift(t, x, mu, a, std::span<double>(b.data(), d));
    for (std::size_t i = 0; i < d; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += inv[i * d + j] * b[j];
        out[i] = s;
    }
}

namespace {

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void check_inputs(const ProblemSpec& spec, double t, std::span<const double> x,
                  std::span<const double> z) {
    if (!std::isfinite(t) || t < 0.0 || t > spec.horizon() * (1.0 + 1e-12))
        throw std::invalid_argument("hamiltonian: t outside [0, T]");
    if (x.size() != spec.d_state() || z.size() != spec.d_state())
        throw std::invalid_argument("hamiltonian: state/adjoint dimension mismatch");
    if (!all_finite(x) || !all_finite(z)) throw std::invalid_argument("hamiltonian: non-finite input");
}

// Unchecked evaluation used inside the minimizer.
inline double hamiltonian_fast(const ProblemSpec& spec, double t, std::span<const double> x,
                               const MeasureSummary& mu, std::span<const double> a,
                               std::span<const double> z) {
    const std::size_t d = spec.d_state();
    Vec lam{};
    spec.scaled_drift(t, x, mu, a, std::span<double>(lam.data(), d));
    double h = spec.running_cost(t, x, mu, a);
    for (std::size_t i = 0; i < d; ++i) h += z[i] * lam[i];
    return h;
}

}  // namespace

double hamiltonian(const ProblemSpec& spec, double t, std::span<const double> x,
                   const MeasureSummary& mu, std::span<const double> a, std::span<const double> z) {
    check_inputs(spec, t, x, z);
    if (!all_finite(a) || !spec.action_box().contains(a))
        throw std::invalid_argument("hamiltonian: action outside the action box");
    return hamiltonian_fast(spec, t, x, mu, a, z);
}

BoxMinimum minimize_hamiltonian(const ProblemSpec& spec, double t, std::span<const double> x,
                                const MeasureSummary& mu, std::span<const double> z,
                                const MinimizerOptions& opts) {
    check_inputs(spec, t, x, z);
    return minimize_over_box(
        spec.action_box(),
        [&](std::span<const double> a) { return hamiltonian_fast(spec, t, x, mu, a, z); }, opts);
}

ValidationReport validate_spec(const ProblemSpec& spec, std::size_t n_probes, std::uint64_t seed) {
    if (n_probes < 1) throw std::invalid_argument("validate_spec: n_probes must be >= 1");
    ValidationReport report;
    report.sigma_condition = spec.sigma_condition();
    report.sigmac_condition = spec.sigmac_condition();
    report.sigma_ok = spec.sigma_invertible();
    report.sigmac_ok = spec.sigmac_invertible();
    if (!report.sigma_ok) report.failures.push_back("singular sigma");
    if (!report.sigmac_ok) report.failures.push_back("singular sigmac");

    const std::size_t di = spec.d_state(), dc = spec.d_common(), da = spec.d_action();
    const auto& box = spec.action_box();
    const CounterRng rng(seed);
    const double T = spec.horizon();
    const double drift_tol = spec.data().drift_bound * (1.0 + 1e-12) + 1e-15;
    const double common_tol = spec.data().common_drift_bound * (1.0 + 1e-12) + 1e-15;
    const std::size_t n_vertices = std::size_t{1} << da;

    Vec x{}, xc{}, a{}, b{};
    for (std::size_t probe = 0; probe < n_probes; ++probe) {
        const auto id = static_cast<std::uint32_t>(probe);
        const double t = T * rng.uniform_pair(Stream::kProbe, id, 0, 0)[0];
        for (std::size_t j = 0; j < di; ++j) x[j] = 2.0 * rng.normal(Stream::kProbe, id, 1, j);
        for (std::size_t j = 0; j < dc; ++j) xc[j] = 2.0 * rng.normal(Stream::kProbe, id, 2, j);
        std::vector<double> atoms(5 * di);
        for (std::size_t j = 0; j < atoms.size(); ++j)
            atoms[j] = rng.normal(Stream::kProbe, id, 3, static_cast<std::uint32_t>(j));
        const MeasureSummary mu = MeasureSummary::uniform(di, std::move(atoms), spec.p());

        auto check_action = [&](std::span<const double> act) {
            spec.drift(t, {x.data(), di}, mu, act, {b.data(), di});
            double norm = 0.0;
            for (std::size_t j = 0; j < di; ++j) norm += b[j] * b[j];
            norm = std::sqrt(norm);
            if (!std::isfinite(norm)) norm = std::numeric_limits<double>::infinity();
            report.max_drift = std::max(report.max_drift, norm);
            if (norm > drift_tol && report.drift_ok) {
                report.drift_ok = false;
                std::ostringstream msg;
                msg << "drift bound violated: |b| = " << norm << " > " << spec.data().drift_bound
                    << " at probe a = (";
                for (std::size_t j = 0; j < act.size(); ++j) msg << (j ? ", " : "") << act[j];
                msg << ")";
                report.failures.push_back(msg.str());
            }
        };

        for (std::size_t j = 0; j < da; ++j) {
            const double u = rng.uniform_pair(Stream::kProbe, id, 4, j)[0];
            a[j] = box.lo[j] + u * (box.hi[j] - box.lo[j]);
        }
        check_action({a.data(), da});
        for (std::size_t v = 0; v < n_vertices; ++v) {
            for (std::size_t j = 0; j < da; ++j) a[j] = ((v >> j) & 1u) ? box.hi[j] : box.lo[j];
            check_action({a.data(), da});
        }

        spec.common_drift(t, {xc.data(), dc}, {b.data(), dc});
        double norm = 0.0;
        for (std::size_t j = 0; j < dc; ++j) norm += b[j] * b[j];
        norm = std::sqrt(norm);
        if (!std::isfinite(norm)) norm = std::numeric_limits<double>::infinity();
        report.max_common_drift = std::max(report.max_common_drift, norm);
        if (norm > common_tol && report.common_drift_ok) {
            report.common_drift_ok = false;
            std::ostringstream msg;
            msg << "common drift bound violated: |b^c| = " << norm << " > "
                << spec.data().common_drift_bound;
            report.failures.push_back(msg.str());
        }
    }
    return report;
}

}  // namespace mfgcn
