#include "lfk/ecg.hpp"

#include <algorithm>
#include <cmath>

#include "lfk/errors.hpp"
#include "lfk/parallel.hpp"

namespace lfk {

const char* provider_name(GradientProvider p) {
    switch (p) {
        case GradientProvider::FEM: return "fem";
        case GradientProvider::Surrogate: return "surrogate";
        default: return "pseudo";
    }
}

GradientProvider provider_from_name(const std::string& name) {
    if (name == "fem") return GradientProvider::FEM;
    if (name == "surrogate") return GradientProvider::Surrogate;
    if (name == "pseudo") return GradientProvider::Pseudo;
    throw InputError("unknown gradient provider: " + name);
}

ECGTrace ecg_integral(const TetMesh& mesh, const Conductivities& cond, const GradientField& field,
                      const ActivationMap& activation, const APTemplate& temp,
                      const TimeGrid& grid) {
    const std::size_t n_elec = field.grad.size();
    const std::size_t n_he = field.heart_elems.size();
    for (const auto& g : field.grad)
        if (g.size() != n_he) throw InputError("ecg_integral: gradient field misses heart elements");

    // per-element quadrature data
    std::vector<GradOp> bops(n_he);
    std::vector<Mat3> gi(n_he);
    std::vector<double> vol(n_he);
    for (std::size_t e = 0; e < n_he; ++e) {
        const std::uint32_t t = field.heart_elems[e];
        bops[e] = element_gradient_operator(mesh, t);
        gi[e] = conductivity_tensor(cond, Region::Heart, mesh.fibers[t], TensorKind::Intracellular);
        vol[e] = mesh.element_volume[t];
    }

    ECGTrace trace;
    trace.dt = grid.dt;
    trace.t0 = grid.t0;
    trace.lead_names = field.electrode_labels;
    trace.values.assign(n_elec, std::vector<double>(grid.steps, 0.0));

    std::vector<Vec3> flux(n_he);
    for (int s = 0; s < grid.steps; ++s) {
        const double t = grid.at(s);
        const std::vector<double> vm = transmembrane(activation, temp, t, mesh.num_nodes());
        parallel_for(static_cast<std::int64_t>(n_he), [&](std::int64_t e) {
            const auto& kn = mesh.tets[field.heart_elems[e]];
            const Vec3 g = bops[e].apply({vm[kn[0]], vm[kn[1]], vm[kn[2]], vm[kn[3]]});
            flux[e] = gi[e] * g * vol[e];
        });
        for (std::size_t j = 0; j < n_elec; ++j) {
            double acc = 0.0;
            const std::vector<Vec3>& gz = field.grad[j];
            for (std::size_t e = 0; e < n_he; ++e) acc += dot(flux[e], gz[e]);
            trace.values[j][s] = -acc;
        }
    }
    return trace;
}

double pseudo_leadfield_value(const Vec3& electrode, const Vec3& x, double sigma_0) {
    const double r = norm(electrode - x);
    if (r <= 0.0) throw InputError("pseudo lead field: evaluation at the electrode");
    return 1.0 / (4.0 * M_PI * sigma_0 * r);
}

Vec3 pseudo_leadfield_gradient(const Vec3& electrode, const Vec3& x, double sigma_0) {
    const Vec3 d = electrode - x;
    const double r = norm(d);
    if (r <= 0.0) throw InputError("pseudo lead field: evaluation at the electrode");
    return d / (4.0 * M_PI * sigma_0 * r * r * r);
}

GradientField fem_gradient_field(const TetMesh& mesh, const std::vector<LeadField>& leadfields,
                                 const std::vector<std::string>& labels) {
    GradientField f;
    f.provider = GradientProvider::FEM;
    f.heart_elems = mesh.heart_elements();
    f.electrode_labels = labels;
    f.grad.reserve(leadfields.size());
    for (const LeadField& lf : leadfields) {
        std::vector<Vec3> g(f.heart_elems.size());
        for (std::size_t e = 0; e < f.heart_elems.size(); ++e) g[e] = lf.grad_Z[f.heart_elems[e]];
        f.grad.push_back(std::move(g));
    }
    return f;
}

GradientField pseudo_gradient_field(const TetMesh& mesh, const ElectrodeSet& electrodes,
                                    double sigma_0) {
    GradientField f;
    f.provider = GradientProvider::Pseudo;
    f.heart_elems = mesh.heart_elements();
    f.electrode_labels = electrodes.labels;
    f.grad.assign(electrodes.size(), std::vector<Vec3>(f.heart_elems.size()));
    for (std::size_t j = 0; j < electrodes.size(); ++j)
        for (std::size_t e = 0; e < f.heart_elems.size(); ++e)
            f.grad[j][e] =
                pseudo_leadfield_gradient(electrodes.positions[j], mesh.centroid(f.heart_elems[e]), sigma_0);
    return f;
}

ECGTrace assemble_leads(const ECGTrace& unipolar, LeadConfig config) {
    if (config == LeadConfig::Unipolar) return unipolar;

    auto idx = [&](const char* name) {
        for (std::size_t i = 0; i < unipolar.lead_names.size(); ++i)
            if (unipolar.lead_names[i] == name) return i;
        throw InputError(std::string("assemble_leads: missing electrode ") + name);
    };
    const std::size_t ra = idx("RA"), la = idx("LA"), ll = idx("LL");
    const std::size_t v[6] = {idx("V1"), idx("V2"), idx("V3"), idx("V4"), idx("V5"), idx("V6")};

    const std::size_t T = unipolar.num_samples();
    ECGTrace out;
    out.dt = unipolar.dt;
    out.t0 = unipolar.t0;
    out.lead_names = {"I", "II", "III", "aVR", "aVL", "aVF", "V1", "V2", "V3", "V4", "V5", "V6"};
    out.values.assign(12, std::vector<double>(T, 0.0));

    const auto& u = unipolar.values;
    for (std::size_t t = 0; t < T; ++t) {
        const double pra = u[ra][t], pla = u[la][t], pll = u[ll][t];
        const double wct = (pra + pla + pll) / 3.0;
        out.values[0][t] = pla - pra;
        out.values[1][t] = pll - pra;
        out.values[2][t] = pll - pla;
        out.values[3][t] = pra - 0.5 * (pla + pll);
        out.values[4][t] = pla - 0.5 * (pra + pll);
        out.values[5][t] = pll - 0.5 * (pra + pla);
        for (int k = 0; k < 6; ++k) out.values[6 + k][t] = u[v[k]][t] - wct;
    }
    return out;
}

QrsFeatures qrs_features(const ECGTrace& trace, std::size_t lead, double t_begin, double t_end) {
    if (lead >= trace.num_leads()) throw InputError("qrs_features: lead out of range");
    const auto& v = trace.values[lead];
    const int i0 = std::max(0, static_cast<int>(std::ceil((t_begin - trace.t0) / trace.dt)));
    const int i1 = std::min(static_cast<int>(v.size()) - 1,
                            static_cast<int>(std::floor((t_end - trace.t0) / trace.dt)));
    if (i0 > i1) throw InputError("qrs_features: window outside the trace");

    double vmin = v[i0], vmax = v[i0];
    for (int i = i0; i <= i1; ++i) {
        vmin = std::min(vmin, v[i]);
        vmax = std::max(vmax, v[i]);
    }
    QrsFeatures q;
    q.amplitude = vmax - vmin;
    if (q.amplitude <= 0.0) return q;

    const double thr = 0.05 * q.amplitude;
    // first/last crossings of |V| = thr, linearly interpolated
    double t_first = -1, t_last = -1;
    for (int i = i0; i <= i1; ++i) {
        if (std::abs(v[i]) > thr) {
            if (i == i0) {
                t_first = trace.t0 + i * trace.dt;
            } else {
                const double a = std::abs(v[i - 1]), b = std::abs(v[i]);
                const double f = (thr - a) / (b - a);
                t_first = trace.t0 + (i - 1 + f) * trace.dt;
            }
            break;
        }
    }
    for (int i = i1; i >= i0; --i) {
        if (std::abs(v[i]) > thr) {
            if (i == i1) {
                t_last = trace.t0 + i * trace.dt;
            } else {
                const double a = std::abs(v[i]), b = std::abs(v[i + 1]);
                const double f = (a - thr) / (a - b);
                t_last = trace.t0 + (i + f) * trace.dt;
            }
            break;
        }
    }
    if (t_first >= 0 && t_last >= t_first) q.duration = t_last - t_first;
    return q;
}

}  // namespace lfk
