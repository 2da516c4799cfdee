#include "lfk/eikonal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "lfk/errors.hpp"

namespace lfk {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kUpdateTol = 1e-6;  // ms

/// Inverse velocity tensor (travel-time metric) of one element.
Mat3 metric_inverse(const VelocityModel& vm, const Vec3& fiber) {
    const double vt2 = vm.v_t * vm.v_t;
    const double vf2 = vm.v_f * vm.v_f;
    if (norm2(fiber) < 0.5) return Mat3::scaled_identity(1.0 / vt2);
    return Mat3::iso_plus_rank1(1.0 / vt2, -(vf2 - vt2) / (vf2 * vt2), fiber);
}

double metric_dist(const Mat3& A, const Vec3& d) { return std::sqrt(std::max(0.0, quadform(A, d, d))); }

/// Travel-time minimization over the face/edges/vertices spanned by the
/// known-valued vertices xs (closed-form stationary points, all candidates
/// evaluated explicitly).
double local_solve(const Vec3& xv, const Mat3& A, const std::vector<Vec3>& xs,
                   const std::vector<double>& ts) {
    const std::size_t m = xs.size();
    double best = kInf;

    for (std::size_t i = 0; i < m; ++i) best = std::min(best, ts[i] + metric_dist(A, xv - xs[i]));

    // edges
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j) {
            const Vec3 p = xv - xs[j];
            const Vec3 w = xs[i] - xs[j];
            const double dt = ts[i] - ts[j];
            const double alpha = quadform(A, w, p);
            const double beta = quadform(A, w, w);
            const double pap = quadform(A, p, p);
            const double a2 = beta * (beta - dt * dt);
            const double a1 = -2.0 * alpha * (beta - dt * dt);
            const double a0 = alpha * alpha - dt * dt * pap;
            double roots[2];
            int nroots = 0;
            if (std::abs(a2) > 1e-14) {
                const double disc = a1 * a1 - 4.0 * a2 * a0;
                if (disc >= 0) {
                    const double sq = std::sqrt(disc);
                    roots[nroots++] = (-a1 + sq) / (2 * a2);
                    roots[nroots++] = (-a1 - sq) / (2 * a2);
                }
            } else if (std::abs(a1) > 1e-14) {
                roots[nroots++] = -a0 / a1;
            }
            for (int r = 0; r < nroots; ++r) {
                const double t = roots[r];
                if (t <= 0.0 || t >= 1.0) continue;
                const Vec3 e = p - w * t;
                best = std::min(best, ts[j] + t * dt + metric_dist(A, e));
            }
        }

    // face (3 known vertices)
    if (m == 3) {
        const Vec3 p = xv - xs[2];
        const Vec3 d0 = xs[0] - xs[2], d1 = xs[1] - xs[2];
        const double t0 = ts[0] - ts[2], t1 = ts[1] - ts[2];
        const double m00 = quadform(A, d0, d0), m01 = quadform(A, d0, d1), m11 = quadform(A, d1, d1);
        const double det = m00 * m11 - m01 * m01;
        if (std::abs(det) > 1e-14) {
            const double q0 = quadform(A, d0, p), q1 = quadform(A, d1, p);
            const double l0x = (m11 * q0 - m01 * q1) / det, l0y = (m00 * q1 - m01 * q0) / det;
            const double ux = (m11 * t0 - m01 * t1) / det, uy = (m00 * t1 - m01 * t0) / det;
            const Vec3 e0 = p - d0 * l0x - d1 * l0y;
            const Vec3 du = d0 * ux + d1 * uy;
            const double c2 = 1.0 - (ux * t0 + uy * t1);
            const double c1 = -2.0 * quadform(A, e0, du);
            const double c0 = -quadform(A, e0, e0);
            double roots[2];
            int nroots = 0;
            if (std::abs(c2) > 1e-14) {
                const double disc = c1 * c1 - 4.0 * c2 * c0;
                if (disc >= 0) {
                    const double sq = std::sqrt(disc);
                    roots[nroots++] = (-c1 + sq) / (2 * c2);
                    roots[nroots++] = (-c1 - sq) / (2 * c2);
                }
            } else if (std::abs(c1) > 1e-14) {
                roots[nroots++] = -c0 / c1;
            }
            for (int r = 0; r < nroots; ++r) {
                const double s = roots[r];
                if (s <= 0.0) continue;
                const double lx = l0x - s * ux, ly = l0y - s * uy;
                if (lx < 0.0 || ly < 0.0 || lx + ly > 1.0) continue;
                const Vec3 e = p - d0 * lx - d1 * ly;
                best = std::min(best, ts[2] + lx * t0 + ly * t1 + metric_dist(A, e));
            }
        }
    }
    return best;
}

}  // namespace

ActivationMap solve_eikonal(const TetMesh& mesh, const VelocityModel& vm,
                            const std::vector<PacingSource>& sources) {
    if (sources.empty()) throw InputError("solve_eikonal: at least one pacing source required");
    if (!(vm.v_f >= vm.v_t && vm.v_t > 0))
        throw InputError("solve_eikonal: velocities must satisfy v_f >= v_t > 0");

    ActivationMap map;
    map.sources = sources;
    map.heart_nodes = mesh.heart_nodes();
    map.tau.assign(mesh.num_nodes(), kInf);

    std::vector<std::uint8_t> is_heart_node(mesh.num_nodes(), 0);
    for (std::uint32_t v : map.heart_nodes) is_heart_node[v] = 1;

    // incident HEART tets per node
    std::vector<std::vector<std::uint32_t>> incident(mesh.num_nodes());
    std::vector<Mat3> metric(mesh.num_tets());
    for (std::uint32_t t = 0; t < mesh.num_tets(); ++t) {
        if (mesh.region[t] != Region::Heart) continue;
        metric[t] = metric_inverse(vm, mesh.fibers[t]);
        for (std::uint32_t v : mesh.tets[t]) incident[v].push_back(t);
    }

    std::vector<std::uint8_t> pinned(mesh.num_nodes(), 0);
    for (const PacingSource& s : sources) {
        if (!is_heart_node[s.node])
            throw InputError("solve_eikonal: source node is not incident to a HEART element");
        map.tau[s.node] = std::min(map.tau[s.node], s.t0);
        pinned[s.node] = 1;
    }

    auto update_node = [&](std::uint32_t v) -> double {
        double best = kInf;
        std::vector<Vec3> xs;
        std::vector<double> ts;
        for (std::uint32_t t : incident[v]) {
            xs.clear();
            ts.clear();
            for (std::uint32_t u : mesh.tets[t]) {
                if (u == v || map.tau[u] == kInf) continue;
                xs.push_back(mesh.nodes[u]);
                ts.push_back(map.tau[u]);
            }
            if (xs.empty()) continue;
            best = std::min(best, local_solve(mesh.nodes[v], metric[t], xs, ts));
        }
        return best;
    };

    // label-correcting sweep with a sorted worklist (deterministic)
    std::set<std::uint32_t> work;
    for (const PacingSource& s : sources)
        for (std::uint32_t t : incident[s.node])
            for (std::uint32_t u : mesh.tets[t])
                if (!pinned[u]) work.insert(u);

    while (!work.empty()) {
        std::set<std::uint32_t> next;
        for (std::uint32_t v : work) {
            const double t_new = update_node(v);
            if (t_new < map.tau[v] - kUpdateTol) {
                map.tau[v] = t_new;
                for (std::uint32_t t : incident[v])
                    for (std::uint32_t u : mesh.tets[t])
                        if (u != v && !pinned[u]) next.insert(u);
            }
        }
        work.swap(next);
    }

    std::vector<std::uint32_t> unreachable;
    for (std::uint32_t v : map.heart_nodes)
        if (map.tau[v] == kInf) unreachable.push_back(v);
    if (!unreachable.empty()) {
        std::string msg = "solve_eikonal: unreachable heart nodes:";
        for (std::size_t i = 0; i < std::min<std::size_t>(unreachable.size(), 16); ++i)
            msg += " " + std::to_string(unreachable[i]);
        if (unreachable.size() > 16) msg += " ... (" + std::to_string(unreachable.size()) + " total)";
        throw SolverError(msg);
    }
    return map;
}

double APTemplate::value(double xi) const {
    auto logistic = [](double s) { return 1.0 / (1.0 + std::exp(-s)); };
    return resting + amplitude * logistic(xi / upstroke_width) * logistic((apd - xi) / repol_width);
}

std::vector<double> transmembrane(const ActivationMap& map, const APTemplate& temp, double t_ms,
                                  std::size_t num_nodes) {
    std::vector<double> vm(num_nodes, temp.resting);
    for (std::uint32_t v : map.heart_nodes) {
        const double tau = map.tau[v];
        vm[v] = (tau == kInf) ? temp.resting : temp.value(t_ms - tau);
    }
    return vm;
}

const char* protocol_name(PacingProtocol p) {
    return p == PacingProtocol::CrtLike ? "crt" : "sinus";
}

PacingProtocol protocol_from_name(const std::string& name) {
    if (name == "crt") return PacingProtocol::CrtLike;
    if (name == "sinus") return PacingProtocol::SinusLike;
    throw InputError("unknown pacing protocol: " + name);
}

namespace {

std::uint32_t nearest_heart_node(const TetMesh& mesh, const std::vector<std::uint32_t>& hnodes,
                                 const Vec3& target) {
    std::uint32_t best = hnodes.front();
    double best_d2 = kInf;
    for (std::uint32_t v : hnodes) {
        const double d2 = norm2(mesh.nodes[v] - target);
        if (d2 < best_d2) {
            best_d2 = d2;
            best = v;
        }
    }
    return best;
}

}  // namespace

std::vector<PacingSource> pacing_protocols(const ShapeSet& shapes, const TetMesh& mesh,
                                           PacingProtocol protocol) {
    const auto hnodes = mesh.heart_nodes();
    if (hnodes.empty()) throw InputError("pacing_protocols: mesh has no HEART elements");

    auto lv_pt = [&](double ux, double uy, double uz) {
        const Vec3 s = shapes.lv.semi_axes;
        return shapes.lv.to_world({ux * s.x, uy * s.y, uz * s.z});
    };
    auto rv_pt = [&](double ux, double uy, double uz) {
        const Vec3 s = shapes.rv.semi_axes;
        return shapes.rv.to_world({ux * s.x, uy * s.y, uz * s.z});
    };
    auto epi_pt = [&](double ux, double uy, double uz) {
        const Vec3 s = shapes.epi.semi_axes;
        return shapes.epi.to_world({ux * s.x, uy * s.y, uz * s.z});
    };

    std::vector<PacingSource> out;
    if (protocol == PacingProtocol::CrtLike) {
        out.push_back({nearest_heart_node(mesh, hnodes, rv_pt(0, 0, -1)), 0.0});     // RV apex endo
        out.push_back({nearest_heart_node(mesh, hnodes, epi_pt(-0.95, 0, -0.2)), 0.0});  // LV lateral epi
        return out;
    }

    // sinus-like: fascicular breakthrough stand-ins, onsets in [0,15] ms
    out.push_back({nearest_heart_node(mesh, hnodes, lv_pt(0.9, 0, -0.3)), 0.0});    // LV septal
    out.push_back({nearest_heart_node(mesh, hnodes, lv_pt(0, 0.9, -0.3)), 3.0});    // LV anterior
    out.push_back({nearest_heart_node(mesh, hnodes, lv_pt(0, -0.9, -0.3)), 6.0});   // LV posterior
    out.push_back({nearest_heart_node(mesh, hnodes, rv_pt(-0.9, 0, -0.3)), 5.0});   // RV septal
    out.push_back({nearest_heart_node(mesh, hnodes, rv_pt(0, 0, -1)), 8.0});        // RV apex
    out.push_back({nearest_heart_node(mesh, hnodes, rv_pt(0, 0.9, -0.2)), 12.0});   // RV free wall
    return out;
}

}  // namespace lfk
