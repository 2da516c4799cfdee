#include "lfk/store.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "lfk/errors.hpp"

namespace lfk::store {

using nlohmann::json;
namespace fs = std::filesystem;

AccessLog& AccessLog::instance() {
    static AccessLog log;
    return log;
}
void AccessLog::reset() { paths_.clear(); }
void AccessLog::note(const std::string& path) { paths_.push_back(path); }
std::vector<std::string> AccessLog::paths() const { return paths_; }
void AccessLog::save(const std::string& out_path) const {
    json j;
    j["reads"] = paths_;
    write_text_file(out_path, j.dump(2) + "\n");
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifact("missing file: " + path);
    AccessLog::instance().note(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::uint8_t> read_binary_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifact("missing file: " + path);
    AccessLog::instance().note(path);
    in.seekg(0, std::ios::end);
    const std::streamoff size = in.tellg();
    in.seekg(0);
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(size));
    in.read(reinterpret_cast<char*>(buf.data()), size);
    return buf;
}

void write_text_file(const std::string& path, const std::string& text) {
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path);
    out << text;
}

void ensure_dir(const std::string& path) { fs::create_directories(path); }
bool file_exists(const std::string& path) { return fs::exists(path); }

namespace {

// little-endian raw arrays (host is little-endian; asserted at build time)
static_assert(std::endian::native == std::endian::little, "raw artifact IO assumes little-endian");

struct BinWriter {
    std::vector<std::uint8_t> buf;

    template <class T>
    void put(const T* data, std::size_t count) {
        const std::size_t at = buf.size();
        buf.resize(at + count * sizeof(T));
        std::memcpy(buf.data() + at, data, count * sizeof(T));
    }
    std::size_t offset() const { return buf.size(); }
    void save(const std::string& path) {
        const fs::path p(path);
        if (p.has_parent_path()) fs::create_directories(p.parent_path());
        std::ofstream out(path, std::ios::binary);
        if (!out) throw ConfigError("cannot write " + path);
        out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    }
};

struct BinReader {
    std::vector<std::uint8_t> buf;
    std::size_t at = 0;

    explicit BinReader(const std::string& path) : buf(read_binary_file(path)) {}

    template <class T>
    void get(T* data, std::size_t count) {
        const std::size_t bytes = count * sizeof(T);
        if (at + bytes > buf.size()) throw ConfigError("binary artifact truncated");
        std::memcpy(data, buf.data() + at, bytes);
        at += bytes;
    }
    void expect_end() const {
        if (at != buf.size()) throw ConfigError("binary artifact has trailing bytes");
    }
};

std::string bin_path_of(const std::string& json_path) {
    const fs::path p(json_path);
    fs::path q = p;
    q.replace_extension(".bin");
    return q.string();
}

json vec3_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }
Vec3 vec3_from(const json& a) { return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()}; }

json parse_json(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const std::exception& e) {
        throw ConfigError(what + ": JSON parse error: " + e.what());
    }
}

}  // namespace

// --- geometry ----------------------------------------------------------------

void save_geometry(const std::string& path, const GeometryRecord& rec, const ShapeSet& shapes,
                   const ElectrodeSet& electrodes) {
    json j;
    j["id"] = rec.id;
    j["units"] = {{"length", "mm"}, {"angle", "rad"}};
    j["params"] = {{"torso_weights", rec.params.torso_weights},
                   {"heart_weights", rec.params.heart_weights},
                   {"heart_rotation", rec.params.heart_rotation},
                   {"heart_center", vec3_json(rec.params.heart_center)}};

    json derived;
    auto ell = [&](const Ellipsoid& e) {
        json o;
        o["semi_axes"] = vec3_json(e.semi_axes);
        o["center"] = vec3_json(e.center);
        o["rotation"] = e.rot.m;
        if (e.capped) o["cap_z_local"] = e.cap_z;
        return o;
    };
    derived["torso"] = ell(shapes.torso);
    derived["epi"] = ell(shapes.epi);
    derived["lv"] = ell(shapes.lv);
    derived["rv"] = ell(shapes.rv);
    j["surfaces"] = derived;

    json table = json::array();
    for (std::size_t i = 0; i < electrodes.size(); ++i)
        table.push_back({{"label", electrodes.labels[i]},
                         {"position_mm", vec3_json(electrodes.positions[i])},
                         {"normalized", vec3_json(electrodes.normalized[i])}});
    j["electrodes"] = table;
    write_text_file(path, j.dump(2) + "\n");
}

GeometryRecord load_geometry(const std::string& path) {
    const json j = parse_json(read_text_file(path), "geometry");
    GeometryRecord rec;
    rec.id = j.at("id").get<std::string>();
    const auto& p = j.at("params");
    const auto tw = p.at("torso_weights");
    const auto hw = p.at("heart_weights");
    const auto hr = p.at("heart_rotation");
    for (int i = 0; i < 3; ++i) rec.params.torso_weights[i] = tw[i].get<double>();
    for (int i = 0; i < 4; ++i) rec.params.heart_weights[i] = hw[i].get<double>();
    for (int i = 0; i < 3; ++i) rec.params.heart_rotation[i] = hr[i].get<double>();
    rec.params.heart_center = vec3_from(p.at("heart_center"));
    return rec;
}

void save_split(const std::string& path, const SplitManifest& split) {
    for (const auto& id : split.test_ids)
        for (const auto& t : split.train_ids)
            if (id == t) throw ConfigError("split: train/test ids overlap: " + id);
    json j;
    j["seed"] = split.seed;
    j["train"] = split.train_ids;
    j["test"] = split.test_ids;
    write_text_file(path, j.dump(2) + "\n");
}

SplitManifest load_split(const std::string& path) {
    const json j = parse_json(read_text_file(path), "split");
    SplitManifest s;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.train_ids = j.at("train").get<std::vector<std::string>>();
    s.test_ids = j.at("test").get<std::vector<std::string>>();
    for (const auto& id : s.test_ids)
        for (const auto& t : s.train_ids)
            if (id == t) throw ConfigError("split: train/test ids overlap: " + id);
    return s;
}

// --- mesh ----------------------------------------------------------------------

void save_mesh(const std::string& json_path, const TetMesh& mesh) {
    BinWriter w;
    json j;
    j["units"] = "mm";
    j["h_mm"] = mesh.h;
    j["num_nodes"] = mesh.num_nodes();
    j["num_tets"] = mesh.num_tets();
    j["num_boundary_faces"] = mesh.boundary_faces.size();
    j["layout"] = json::array();

    auto mark = [&](const char* name, const char* type, std::size_t count) {
        j["layout"].push_back({{"name", name}, {"type", type}, {"count", count}, {"offset", w.offset()}});
    };

    mark("nodes", "f64x3", mesh.num_nodes());
    w.put(reinterpret_cast<const double*>(mesh.nodes.data()), mesh.num_nodes() * 3);
    mark("tets", "u32x4", mesh.num_tets());
    w.put(reinterpret_cast<const std::uint32_t*>(mesh.tets.data()), mesh.num_tets() * 4);
    mark("region", "u32", mesh.num_tets());
    {
        std::vector<std::uint32_t> reg(mesh.num_tets());
        for (std::size_t t = 0; t < reg.size(); ++t) reg[t] = static_cast<std::uint32_t>(mesh.region[t]);
        w.put(reg.data(), reg.size());
    }
    mark("fibers", "f64x3", mesh.num_tets());
    w.put(reinterpret_cast<const double*>(mesh.fibers.data()), mesh.num_tets() * 3);
    mark("boundary_faces", "u32x3", mesh.boundary_faces.size());
    w.put(reinterpret_cast<const std::uint32_t*>(mesh.boundary_faces.data()),
          mesh.boundary_faces.size() * 3);
    mark("boundary_face_area", "f64", mesh.boundary_face_area.size());
    w.put(mesh.boundary_face_area.data(), mesh.boundary_face_area.size());

    const std::string bin = bin_path_of(json_path);
    j["binary"] = fs::path(bin).filename().string();
    w.save(bin);
    write_text_file(json_path, j.dump(2) + "\n");
}

TetMesh load_mesh(const std::string& json_path) {
    const json j = parse_json(read_text_file(json_path), "mesh");
    TetMesh mesh;
    mesh.h = j.at("h_mm").get<double>();
    const std::size_t N = j.at("num_nodes").get<std::size_t>();
    const std::size_t M = j.at("num_tets").get<std::size_t>();
    const std::size_t F = j.at("num_boundary_faces").get<std::size_t>();

    BinReader r(bin_path_of(json_path));
    mesh.nodes.resize(N);
    r.get(reinterpret_cast<double*>(mesh.nodes.data()), N * 3);
    mesh.tets.resize(M);
    r.get(reinterpret_cast<std::uint32_t*>(mesh.tets.data()), M * 4);
    std::vector<std::uint32_t> reg(M);
    r.get(reg.data(), M);
    mesh.region.resize(M);
    for (std::size_t t = 0; t < M; ++t) mesh.region[t] = static_cast<Region>(reg[t]);
    mesh.fibers.resize(M);
    r.get(reinterpret_cast<double*>(mesh.fibers.data()), M * 3);
    mesh.boundary_faces.resize(F);
    r.get(reinterpret_cast<std::uint32_t*>(mesh.boundary_faces.data()), F * 3);
    mesh.boundary_face_area.resize(F);
    r.get(mesh.boundary_face_area.data(), F);
    r.expect_end();

    mesh.element_volume.resize(M);
    for (std::size_t t = 0; t < M; ++t) {
        const auto& k = mesh.tets[t];
        mesh.element_volume[t] = std::abs(dot(cross(mesh.nodes[k[1]] - mesh.nodes[k[0]],
                                                    mesh.nodes[k[2]] - mesh.nodes[k[0]]),
                                              mesh.nodes[k[3]] - mesh.nodes[k[0]])) / 6.0;
    }
    mesh.node_is_boundary.assign(N, 0);
    for (const auto& f : mesh.boundary_faces)
        for (std::uint32_t v : f) mesh.node_is_boundary[v] = 1;
    return mesh;
}

// --- lead field -------------------------------------------------------------------

void save_leadfield(const std::string& json_path, const LeadFieldHeader& hdr, const LeadField& lf) {
    json j;
    j["electrode_label"] = hdr.electrode_label;
    j["electrode_node"] = lf.electrode_node;
    j["units"] = "Z in 1/(mS/cm * mm) per unit current; gradients per mm";
    j["tol"] = hdr.tol;
    j["residual"] = lf.solver_residual;
    j["zero_mean_residual"] = lf.zero_mean_residual;
    j["iterations"] = lf.iterations;
    j["num_nodes"] = lf.Z_nodal.size();
    j["num_tets"] = lf.grad_Z.size();
    j["layout"] = "Z f64[num_nodes] | grad_Z f64[num_tets][3]";

    BinWriter w;
    w.put(lf.Z_nodal.data(), lf.Z_nodal.size());
    w.put(reinterpret_cast<const double*>(lf.grad_Z.data()), lf.grad_Z.size() * 3);
    const std::string bin = bin_path_of(json_path);
    j["binary"] = fs::path(bin).filename().string();
    w.save(bin);
    write_text_file(json_path, j.dump(2) + "\n");
}

LeadField load_leadfield(const std::string& json_path, LeadFieldHeader* hdr) {
    const json j = parse_json(read_text_file(json_path), "leadfield");
    LeadField lf;
    lf.electrode_node = j.at("electrode_node").get<std::uint32_t>();
    lf.solver_residual = j.at("residual").get<double>();
    lf.zero_mean_residual = j.at("zero_mean_residual").get<double>();
    lf.iterations = j.at("iterations").get<int>();
    const std::size_t N = j.at("num_nodes").get<std::size_t>();
    const std::size_t M = j.at("num_tets").get<std::size_t>();
    if (hdr) {
        hdr->electrode_label = j.at("electrode_label").get<std::string>();
        hdr->electrode_node = lf.electrode_node;
        hdr->tol = j.at("tol").get<double>();
        hdr->residual = lf.solver_residual;
        hdr->zero_mean_residual = lf.zero_mean_residual;
    }
    BinReader r(bin_path_of(json_path));
    lf.Z_nodal.resize(N);
    r.get(lf.Z_nodal.data(), N);
    lf.grad_Z.resize(M);
    r.get(reinterpret_cast<double*>(lf.grad_Z.data()), M * 3);
    r.expect_end();
    return lf;
}

// --- activation map ------------------------------------------------------------------

void save_activation(const std::string& path, const std::string& protocol,
                     const VelocityModel& vm, const ActivationMap& map) {
    json j;
    j["protocol"] = protocol;
    j["velocities"] = {{"v_f", vm.v_f}, {"v_t", vm.v_t}};
    json src = json::array();
    for (const auto& s : map.sources) src.push_back({{"node", s.node}, {"t0_ms", s.t0}});
    j["sources"] = src;
    j["heart_nodes"] = map.heart_nodes;
    json tau = json::array();
    for (std::uint32_t v : map.heart_nodes) tau.push_back(map.tau[v]);
    j["tau_ms"] = tau;
    write_text_file(path, j.dump() + "\n");
}

ActivationMap load_activation(const std::string& path, std::size_t num_nodes) {
    const json j = parse_json(read_text_file(path), "activation");
    ActivationMap map;
    map.heart_nodes = j.at("heart_nodes").get<std::vector<std::uint32_t>>();
    const auto tau = j.at("tau_ms").get<std::vector<double>>();
    if (tau.size() != map.heart_nodes.size()) throw ConfigError("activation: tau size mismatch");
    map.tau.assign(num_nodes, std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < tau.size(); ++i) map.tau[map.heart_nodes[i]] = tau[i];
    for (const auto& s : j.at("sources")) {
        PacingSource ps;
        ps.node = s.at("node").get<std::uint32_t>();
        ps.t0 = s.at("t0_ms").get<double>();
        map.sources.push_back(ps);
    }
    return map;
}

// --- ECG ------------------------------------------------------------------------------

void save_ecg(const std::string& csv_path, const ECGTrace& trace, const std::string& protocol,
              const std::string& provider) {
    std::string csv = "t_ms";
    for (const auto& name : trace.lead_names) csv += "," + name;
    csv += "\n";
    char buf[64];
    for (std::size_t s = 0; s < trace.num_samples(); ++s) {
        std::snprintf(buf, sizeof(buf), "%.17g", trace.t0 + trace.dt * s);
        csv += buf;
        for (std::size_t l = 0; l < trace.num_leads(); ++l) {
            std::snprintf(buf, sizeof(buf), ",%.17g", trace.values[l][s]);
            csv += buf;
        }
        csv += "\n";
    }
    write_text_file(csv_path, csv);

    json j;
    j["dt_ms"] = trace.dt;
    j["t0_ms"] = trace.t0;
    j["protocol"] = protocol;
    j["provider"] = provider;
    j["lead_names"] = trace.lead_names;
    const fs::path p(csv_path);
    fs::path sidecar = p;
    sidecar.replace_extension(".json");
    write_text_file(sidecar.string(), j.dump(2) + "\n");
}

ECGTrace load_ecg(const std::string& csv_path) {
    const std::string text = read_text_file(csv_path);
    std::stringstream ss(text);
    std::string line;
    if (!std::getline(ss, line)) throw ConfigError("ecg csv: empty file");

    ECGTrace trace;
    {
        std::stringstream h(line);
        std::string tok;
        std::getline(h, tok, ',');  // t_ms
        while (std::getline(h, tok, ',')) trace.lead_names.push_back(tok);
    }
    trace.values.assign(trace.lead_names.size(), {});
    std::vector<double> times;
    while (std::getline(ss, line)) {
        if (line.empty()) continue;
        std::stringstream row(line);
        std::string tok;
        std::getline(row, tok, ',');
        times.push_back(std::stod(tok));
        for (std::size_t l = 0; l < trace.lead_names.size(); ++l) {
            std::getline(row, tok, ',');
            trace.values[l].push_back(std::stod(tok));
        }
    }
    if (!times.empty()) {
        trace.t0 = times.front();
        trace.dt = times.size() > 1 ? times[1] - times[0] : 1.0;
    }
    return trace;
}

// --- networks ---------------------------------------------------------------------------

void save_network(const std::string& json_path, const nn::Network& net,
                  const std::map<std::string, double>& metadata) {
    const nn::Descriptor& d = net.desc;
    json j;
    j["tag"] = d.tag;
    j["d_main"] = d.d_main;
    j["k_fourier"] = d.k_fourier;
    j["sigma_fourier"] = d.sigma_fourier;
    j["hidden"] = d.hidden;
    j["d_out"] = d.d_out;
    j["d_ext0"] = d.d_ext0;
    j["d_ext1"] = d.d_ext1;
    json cc = json::array();
    for (const auto& c : d.concat)
        cc.push_back({{"layer", c.layer}, {"source", static_cast<int>(c.source)}});
    j["concat"] = cc;
    j["dtype"] = "f32";
    j["order"] = "B_ff | per layer: W (out*in), b (out)";
    j["metadata"] = metadata;

    BinWriter w;
    auto put_f32 = [&](const double* src, std::size_t n) {
        std::vector<float> f(n);
        for (std::size_t i = 0; i < n; ++i) f[i] = static_cast<float>(src[i]);
        w.put(f.data(), n);
    };
    put_f32(net.B_ff.a.data(), net.B_ff.a.size());
    for (std::size_t l = 0; l < net.W.size(); ++l) {
        put_f32(net.W[l].a.data(), net.W[l].a.size());
        put_f32(net.b[l].data(), net.b[l].size());
    }
    const std::string bin = bin_path_of(json_path);
    j["binary"] = fs::path(bin).filename().string();
    w.save(bin);
    write_text_file(json_path, j.dump(2) + "\n");
}

nn::Network load_network(const std::string& json_path, std::map<std::string, double>* metadata) {
    const json j = parse_json(read_text_file(json_path), "network");
    nn::Descriptor d;
    d.tag = j.at("tag").get<std::string>();
    d.d_main = j.at("d_main").get<int>();
    d.k_fourier = j.at("k_fourier").get<int>();
    d.sigma_fourier = j.at("sigma_fourier").get<double>();
    d.hidden = j.at("hidden").get<std::vector<int>>();
    d.d_out = j.at("d_out").get<int>();
    d.d_ext0 = j.at("d_ext0").get<int>();
    d.d_ext1 = j.at("d_ext1").get<int>();
    for (const auto& c : j.at("concat"))
        d.concat.push_back({c.at("layer").get<int>(),
                            static_cast<nn::AuxSource>(c.at("source").get<int>())});
    if (metadata && j.contains("metadata"))
        *metadata = j.at("metadata").get<std::map<std::string, double>>();

    nn::Network net;
    net.desc = d;
    BinReader r(bin_path_of(json_path));
    auto get_f32 = [&](double* dst, std::size_t n) {
        std::vector<float> f(n);
        r.get(f.data(), n);
        for (std::size_t i = 0; i < n; ++i) dst[i] = static_cast<double>(f[i]);
    };
    if (d.k_fourier > 0) {
        net.B_ff = nn::Matrix(d.k_fourier, d.d_main);
        get_f32(net.B_ff.a.data(), net.B_ff.a.size());
    }
    const int L = d.num_layers();
    net.W.resize(L);
    net.b.resize(L);
    for (int l = 0; l < L; ++l) {
        const int in = d.layer_input_dim(l);
        const int out = d.layer_output_dim(l);
        if (in <= 0 || out <= 0) throw ConfigError("network: invalid shape chain in descriptor");
        net.W[l] = nn::Matrix(out, in);
        get_f32(net.W[l].a.data(), net.W[l].a.size());
        net.b[l].resize(out);
        get_f32(net.b[l].data(), net.b[l].size());
    }
    r.expect_end();  // validates the full shape chain against the payload
    return net;
}

// --- codes / latent stats ------------------------------------------------------------------

void save_codes(const std::string& path, const std::vector<LatentCode>& codes) {
    json j = json::array();
    for (const auto& c : codes)
        j.push_back({{"geometry_id", c.geometry_id},
                     {"origin", c.origin == LatentCode::Origin::Trained ? "trained" : "inferred"},
                     {"z", c.z}});
    write_text_file(path, j.dump(2) + "\n");
}

std::vector<LatentCode> load_codes(const std::string& path) {
    const json j = parse_json(read_text_file(path), "codes");
    std::vector<LatentCode> out;
    for (const auto& c : j) {
        LatentCode lc;
        lc.geometry_id = c.at("geometry_id").get<std::string>();
        lc.origin = c.at("origin").get<std::string>() == "trained" ? LatentCode::Origin::Trained
                                                                   : LatentCode::Origin::Inferred;
        lc.z = c.at("z").get<std::vector<double>>();
        out.push_back(std::move(lc));
    }
    return out;
}

void save_latent_stats(const std::string& path, const LatentStats& stats) {
    json j;
    j["mu"] = stats.mu;
    j["sigma"] = stats.sigma;
    j["ridge"] = stats.ridge;
    write_text_file(path, j.dump(2) + "\n");
}

LatentStats load_latent_stats(const std::string& path) {
    const json j = parse_json(read_text_file(path), "latent stats");
    LatentStats st;
    st.mu = j.at("mu").get<std::vector<double>>();
    st.sigma = j.at("sigma").get<std::vector<std::vector<double>>>();
    st.ridge = j.at("ridge").get<double>();
    // rebuild the regularized inverse (Cholesky)
    auto reg = st.sigma;
    for (std::size_t i = 0; i < reg.size(); ++i) reg[i][i] += st.ridge;
    {
        const int n = static_cast<int>(reg.size());
        std::vector<std::vector<double>> A = reg;
        for (int jj = 0; jj < n; ++jj) {
            double dv = A[jj][jj];
            for (int k = 0; k < jj; ++k) dv -= A[jj][k] * A[jj][k];
            if (dv <= 0.0) throw ConfigError("latent stats: covariance not positive definite");
            A[jj][jj] = std::sqrt(dv);
            for (int i = jj + 1; i < n; ++i) {
                double s = A[i][jj];
                for (int k = 0; k < jj; ++k) s -= A[i][k] * A[jj][k];
                A[i][jj] = s / A[jj][jj];
            }
        }
        st.sigma_inv.assign(n, std::vector<double>(n, 0.0));
        std::vector<double> y(n);
        for (int cidx = 0; cidx < n; ++cidx) {
            for (int i = 0; i < n; ++i) {
                double s = (i == cidx) ? 1.0 : 0.0;
                for (int k = 0; k < i; ++k) s -= A[i][k] * y[k];
                y[i] = s / A[i][i];
            }
            for (int i = n - 1; i >= 0; --i) {
                double s = y[i];
                for (int k = i + 1; k < n; ++k) s -= A[k][i] * st.sigma_inv[k][cidx];
                st.sigma_inv[i][cidx] = s / A[i][i];
            }
        }
    }
    return st;
}

// --- surrogate dataset -------------------------------------------------------------------------

void save_dataset(const std::string& json_path, const SurrogateDataset& ds) {
    json j;
    j["encoding"] = encoding_name(ds.encoding);
    j["d_code"] = ds.d_code;
    j["grad_scale"] = ds.grad_scale;
    j["seed"] = ds.seed;
    j["policy"] = {{"n_points", ds.policy.n_points},
                   {"near_fraction", ds.policy.near_fraction},
                   {"band_mm", ds.policy.band_mm}};
    j["units"] = "x normalized to torso box; targets divided by grad_scale";
    j["record_layout"] =
        "per geometry: points_norm f32[n][3]; then per block: targets f32[n][3]";

    BinWriter w;
    json geoms = json::array();
    for (std::size_t g = 0; g < ds.geom_ids.size(); ++g) {
        json o;
        o["id"] = ds.geom_ids[g];
        o["torso_box"] = vec3_json(ds.torso_box[g]);
        o["n_points"] = ds.points_norm[g].size();
        o["code"] = ds.codes[g];
        o["points_offset"] = w.offset();
        std::vector<float> flat(ds.points_norm[g].size() * 3);
        for (std::size_t i = 0; i < ds.points_norm[g].size(); ++i) {
            flat[3 * i] = static_cast<float>(ds.points_norm[g][i].x);
            flat[3 * i + 1] = static_cast<float>(ds.points_norm[g][i].y);
            flat[3 * i + 2] = static_cast<float>(ds.points_norm[g][i].z);
        }
        w.put(flat.data(), flat.size());
        geoms.push_back(o);
    }
    j["geometries"] = geoms;

    json blocks = json::array();
    for (const auto& b : ds.blocks) {
        json o;
        o["geom"] = b.geom;
        o["elec"] = b.elec;
        o["electrode_norm"] = vec3_json(b.electrode_norm);
        o["targets_offset"] = w.offset();
        std::vector<float> flat(b.targets_scaled.size() * 3);
        for (std::size_t i = 0; i < b.targets_scaled.size(); ++i) {
            flat[3 * i] = static_cast<float>(b.targets_scaled[i].x);
            flat[3 * i + 1] = static_cast<float>(b.targets_scaled[i].y);
            flat[3 * i + 2] = static_cast<float>(b.targets_scaled[i].z);
        }
        w.put(flat.data(), flat.size());
        blocks.push_back(o);
    }
    j["blocks"] = blocks;

    const std::string bin = bin_path_of(json_path);
    j["binary"] = fs::path(bin).filename().string();
    w.save(bin);
    write_text_file(json_path, j.dump(2) + "\n");
}

SurrogateDataset load_dataset(const std::string& json_path) {
    const json j = parse_json(read_text_file(json_path), "dataset");
    SurrogateDataset ds;
    ds.encoding = encoding_from_name(j.at("encoding").get<std::string>());
    ds.d_code = j.at("d_code").get<int>();
    ds.grad_scale = j.at("grad_scale").get<double>();
    ds.seed = j.at("seed").get<std::uint64_t>();
    ds.policy.n_points = j.at("policy").at("n_points").get<int>();
    ds.policy.near_fraction = j.at("policy").at("near_fraction").get<double>();
    ds.policy.band_mm = j.at("policy").at("band_mm").get<double>();

    BinReader r(bin_path_of(json_path));
    for (const auto& o : j.at("geometries")) {
        ds.geom_ids.push_back(o.at("id").get<std::string>());
        ds.torso_box.push_back(vec3_from(o.at("torso_box")));
        ds.codes.push_back(o.at("code").get<std::vector<double>>());
        const std::size_t n = o.at("n_points").get<std::size_t>();
        std::vector<float> flat(n * 3);
        r.get(flat.data(), flat.size());
        std::vector<Vec3> pts(n), mm(n);
        const Vec3 box = ds.torso_box.back();
        for (std::size_t i = 0; i < n; ++i) {
            pts[i] = {flat[3 * i], flat[3 * i + 1], flat[3 * i + 2]};
            mm[i] = {pts[i].x * box.x, pts[i].y * box.y, pts[i].z * box.z};
        }
        ds.points_norm.push_back(std::move(pts));
        ds.points_mm.push_back(std::move(mm));
    }
    for (const auto& o : j.at("blocks")) {
        SurrogateDataset::Block b;
        b.geom = o.at("geom").get<std::uint32_t>();
        b.elec = o.at("elec").get<std::uint32_t>();
        b.electrode_norm = vec3_from(o.at("electrode_norm"));
        const std::size_t n = ds.points_norm[b.geom].size();
        std::vector<float> flat(n * 3);
        r.get(flat.data(), flat.size());
        b.targets_scaled.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            b.targets_scaled[i] = {flat[3 * i], flat[3 * i + 1], flat[3 * i + 2]};
        ds.blocks.push_back(std::move(b));
    }
    r.expect_end();
    return ds;
}

// --- misc ------------------------------------------------------------------------------------

void save_loss_csv(const std::string& path, const std::vector<double>& loss,
                   const std::vector<double>& lr) {
    std::string csv = lr.empty() ? "epoch,loss\n" : "epoch,loss,lr\n";
    char buf[96];
    for (std::size_t i = 0; i < loss.size(); ++i) {
        if (lr.empty())
            std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i + 1, loss[i]);
        else
            std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", i + 1, loss[i], lr[i]);
        csv += buf;
    }
    write_text_file(path, csv);
}

void save_cdf_csv(const std::string& path, const std::vector<metrics::CdfEntry>& cdf) {
    std::string csv = "quantile,value\n";
    char buf[96];
    for (const auto& e : cdf) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", e.quantile, e.value);
        csv += buf;
    }
    write_text_file(path, csv);
}

}  // namespace lfk::store
