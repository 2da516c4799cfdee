#include "lfk/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "lfk/errors.hpp"
#include "lfk/parallel.hpp"
#include "lfk/point_index.hpp"

namespace lfk::metrics {

double angular_error(const Vec3& a, const Vec3& b, double eps) {
    const double c = dot(a, b) / (norm(a) * norm(b) + eps);
    const double clamped = std::max(-1.0, std::min(1.0, c));
    return std::acos(clamped) * 180.0 / M_PI;
}

MagnitudeError magnitude_error(const Vec3& a, const Vec3& b, double eps) {
    MagnitudeError e;
    e.absolute = norm(a - b);
    e.relative = e.absolute / (norm(b) + eps);
    return e;
}

double chamfer(const std::vector<Vec3>& X, const std::vector<Vec3>& Y) {
    if (X.empty() || Y.empty()) throw InputError("chamfer: point set is empty");

    const PointGridIndex ix(X), iy(Y);

    double sum_xy = 0.0;
    std::vector<double> dx(X.size()), dy(Y.size());
    parallel_for(static_cast<std::int64_t>(X.size()),
                 [&](std::int64_t i) { dx[i] = iy.nearest_distance(X[i]); });
    parallel_for(static_cast<std::int64_t>(Y.size()),
                 [&](std::int64_t i) { dy[i] = ix.nearest_distance(Y[i]); });
    for (double d : dx) sum_xy += d;
    double sum_yx = 0.0;
    for (double d : dy) sum_yx += d;

    return 0.5 * (sum_xy / X.size() + sum_yx / Y.size());
}

double time_l2_sq(const std::vector<double>& v, double dt) {
    if (v.size() < 2) return 0.0;
    double s = 0.5 * (v.front() * v.front() + v.back() * v.back());
    for (std::size_t i = 1; i + 1 < v.size(); ++i) s += v[i] * v[i];
    return s * dt;
}

double ecg_rel_l2(const std::vector<double>& pred, const std::vector<double>& ref, double dt) {
    if (pred.size() != ref.size()) throw InputError("ecg_rel_l2: grids differ");
    std::vector<double> diff(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) diff[i] = pred[i] - ref[i];
    const double denom = std::sqrt(time_l2_sq(ref, dt));
    if (denom == 0.0) throw InputError("ecg_rel_l2: reference signal is identically zero");
    return std::sqrt(time_l2_sq(diff, dt)) / denom;
}

double trace_rel_l2(const ECGTrace& pred, const ECGTrace& ref) {
    if (pred.num_leads() != ref.num_leads() || pred.num_samples() != ref.num_samples())
        throw InputError("trace_rel_l2: traces differ in shape");
    double num = 0.0, den = 0.0;
    for (std::size_t l = 0; l < ref.num_leads(); ++l) {
        std::vector<double> diff(ref.values[l].size());
        for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = pred.values[l][i] - ref.values[l][i];
        num += time_l2_sq(diff, ref.dt);
        den += time_l2_sq(ref.values[l], ref.dt);
    }
    if (den == 0.0) throw InputError("trace_rel_l2: reference trace is identically zero");
    return std::sqrt(num / den);
}

double error_bound_constant(const TetMesh& mesh, const Conductivities& cond,
                            const ActivationMap& activation, const APTemplate& temp,
                            const TimeGrid& grid) {
    const auto heart = mesh.heart_elements();
    std::vector<GradOp> bops(heart.size());
    std::vector<Mat3> gi(heart.size());
    for (std::size_t e = 0; e < heart.size(); ++e) {
        bops[e] = element_gradient_operator(mesh, heart[e]);
        gi[e] = conductivity_tensor(cond, Region::Heart, mesh.fibers[heart[e]],
                                    TensorKind::Intracellular);
    }

    std::vector<double> a(grid.steps, 0.0);  // ||G_i grad Vm||^2_{L2} at each t
    for (int s = 0; s < grid.steps; ++s) {
        const std::vector<double> vm = transmembrane(activation, temp, grid.at(s), mesh.num_nodes());
        double acc = 0.0;
        for (std::size_t e = 0; e < heart.size(); ++e) {
            const auto& kn = mesh.tets[heart[e]];
            const Vec3 g = bops[e].apply({vm[kn[0]], vm[kn[1]], vm[kn[2]], vm[kn[3]]});
            acc += mesh.element_volume[heart[e]] * norm2(gi[e] * g);
        }
        a[s] = acc;
    }
    // trapezoid in time
    double c = 0.5 * (a.front() + a.back());
    for (int s = 1; s + 1 < grid.steps; ++s) c += a[s];
    return c * grid.dt;
}

double grad_l2_sq_diff(const TetMesh& mesh, const std::vector<std::uint32_t>& heart_elems,
                       const std::vector<Vec3>& ga, const std::vector<Vec3>& gb) {
    if (ga.size() != heart_elems.size() || gb.size() != heart_elems.size())
        throw InputError("grad_l2_sq_diff: field sizes differ");
    double s = 0.0;
    for (std::size_t e = 0; e < heart_elems.size(); ++e)
        s += mesh.element_volume[heart_elems[e]] * norm2(ga[e] - gb[e]);
    return s;
}

std::vector<CdfEntry> error_cdf(std::vector<double> values, std::vector<double> quantiles) {
    if (values.empty()) throw InputError("error_cdf: empty sample");
    std::sort(values.begin(), values.end());
    if (quantiles.empty()) quantiles = {0.05, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99};
    if (std::find(quantiles.begin(), quantiles.end(), 0.5) == quantiles.end())
        quantiles.push_back(0.5);
    if (std::find(quantiles.begin(), quantiles.end(), 0.95) == quantiles.end())
        quantiles.push_back(0.95);
    std::sort(quantiles.begin(), quantiles.end());

    std::vector<CdfEntry> out;
    const std::size_t n = values.size();
    for (double q : quantiles) {
        const double pos = q * static_cast<double>(n - 1);
        const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, n - 1);
        const double frac = pos - static_cast<double>(lo);
        out.push_back({q, values[lo] + frac * (values[hi] - values[lo])});
    }
    return out;
}

ErrorReport compare_gradients(const std::vector<Vec3>& pred, const std::vector<Vec3>& ref,
                              const std::string& region) {
    if (pred.size() != ref.size()) throw InputError("compare_gradients: size mismatch");
    ErrorReport r;
    r.region = region;
    r.angular_deg.reserve(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        r.angular_deg.push_back(angular_error(pred[i], ref[i]));
        const MagnitudeError m = magnitude_error(pred[i], ref[i]);
        r.magnitude_abs.push_back(m.absolute);
        r.magnitude_rel.push_back(m.relative);
    }
    auto mean = [](const std::vector<double>& v) {
        double s = 0;
        for (double x : v) s += x;
        return v.empty() ? 0.0 : s / v.size();
    };
    r.mean_angular = mean(r.angular_deg);
    r.mean_magnitude_abs = mean(r.magnitude_abs);
    r.mean_magnitude_rel = mean(r.magnitude_rel);
    if (!r.angular_deg.empty()) {
        const auto cdf = error_cdf(r.angular_deg, {0.5, 0.95});
        r.median_angular = cdf[0].value;
        r.p95_angular = cdf[1].value;
    }
    return r;
}

}  // namespace lfk::metrics
