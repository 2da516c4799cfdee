#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lfk/ecg.hpp"
#include "lfk/eikonal.hpp"
#include "lfk/geometry.hpp"
#include "lfk/leadfield.hpp"
#include "lfk/mesh.hpp"
#include "lfk/metrics.hpp"
#include "lfk/nn.hpp"
#include "lfk/sdf_autodecoder.hpp"
#include "lfk/surrogate.hpp"

namespace lfk::store {

/// Records every artifact opened for reading; stages dump it so the pipeline
/// can audit that training never touches test-split lead fields.
class AccessLog {
public:
    static AccessLog& instance();
    void reset();
    void note(const std::string& path);
    std::vector<std::string> paths() const;
    void save(const std::string& out_path) const;

private:
    std::vector<std::string> paths_;
};

std::string read_text_file(const std::string& path);           // logged
std::vector<std::uint8_t> read_binary_file(const std::string& path);  // logged
void write_text_file(const std::string& path, const std::string& text);
void ensure_dir(const std::string& path);
bool file_exists(const std::string& path);

// --- geometry -------------------------------------------------------------

struct GeometryRecord {
    std::string id;
    GeometryParams params;
};

void save_geometry(const std::string& path, const GeometryRecord& rec, const ShapeSet& shapes,
                   const ElectrodeSet& electrodes);
GeometryRecord load_geometry(const std::string& path);

struct SplitManifest {
    std::uint64_t seed = 0;
    std::vector<std::string> train_ids;
    std::vector<std::string> test_ids;
};
void save_split(const std::string& path, const SplitManifest& split);
SplitManifest load_split(const std::string& path);

// --- mesh / lead field (JSON header + raw little-endian sidecar) -----------

void save_mesh(const std::string& json_path, const TetMesh& mesh);
TetMesh load_mesh(const std::string& json_path);

struct LeadFieldHeader {
    std::string electrode_label;
    std::uint32_t electrode_node = 0;
    double tol = 0.0;
    double residual = 0.0;
    double zero_mean_residual = 0.0;
};
void save_leadfield(const std::string& json_path, const LeadFieldHeader& hdr, const LeadField& lf);
LeadField load_leadfield(const std::string& json_path, LeadFieldHeader* hdr = nullptr);

// --- activation map ---------------------------------------------------------

void save_activation(const std::string& path, const std::string& protocol,
                     const VelocityModel& vm, const ActivationMap& map);
ActivationMap load_activation(const std::string& path, std::size_t num_nodes);

// --- ECG (CSV + JSON sidecar) ----------------------------------------------

void save_ecg(const std::string& csv_path, const ECGTrace& trace, const std::string& protocol,
              const std::string& provider);
ECGTrace load_ecg(const std::string& csv_path);

// --- networks / codes / latent stats ----------------------------------------

void save_network(const std::string& json_path, const nn::Network& net,
                  const std::map<std::string, double>& metadata = {});
nn::Network load_network(const std::string& json_path,
                         std::map<std::string, double>* metadata = nullptr);

void save_codes(const std::string& path, const std::vector<LatentCode>& codes);
std::vector<LatentCode> load_codes(const std::string& path);

void save_latent_stats(const std::string& path, const LatentStats& stats);
LatentStats load_latent_stats(const std::string& path);

// --- surrogate dataset -------------------------------------------------------

void save_dataset(const std::string& json_path, const SurrogateDataset& ds);
SurrogateDataset load_dataset(const std::string& json_path);

// --- misc --------------------------------------------------------------------

void save_loss_csv(const std::string& path, const std::vector<double>& loss,
                   const std::vector<double>& lr = {});
void save_cdf_csv(const std::string& path, const std::vector<metrics::CdfEntry>& cdf);

}  // namespace lfk::store
