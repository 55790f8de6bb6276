#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "tatu/augment.hpp"
#include "tatu/cvae.hpp"
#include "tatu/learner.hpp"
#include "tatu/nn.hpp"
#include "tatu/types.hpp"

namespace tatu {

// File-level error categories; the CLI maps each to a distinct exit code.
struct FileError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace io {

// --- Dataset: line-delimited text, one-line header, %.17g doubles (bitwise
// round-trip), explicit dims checked on load.
void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

// --- Model buffer: dataset rows extended with provenance columns.
void save_buffer(const ModelBuffer& buffer, const EnvDescriptor& env, const std::string& path);
ModelBuffer load_buffer(const std::string& path, EnvDescriptor* env = nullptr);

// --- Checkpoint: sectioned binary container. Magic, version, named tensors
// with shape prefixes, little-endian f64 payloads, trailing FNV-1a checksum.
struct NamedTensor {
    std::string name;
    std::vector<std::uint64_t> dims;
    std::vector<double> data;
};

struct Checkpoint {
    std::vector<NamedTensor> tensors;

    const NamedTensor& get(const std::string& name) const;
    const NamedTensor* find(const std::string& name) const;
    void add(const std::string& name, std::vector<std::uint64_t> dims, std::vector<double> data);
    void add_scalar(const std::string& name, double value);
    void add_vector(const std::string& name, const Vec& v);
    void add_matrix(const std::string& name, const Mat& m);
    double scalar(const std::string& name) const;
    Vec vector(const std::string& name) const;
    Mat matrix(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

void pack_mlp(Checkpoint& ckpt, const std::string& prefix, const nn::Mlp& net);
nn::Mlp unpack_mlp(const Checkpoint& ckpt, const std::string& prefix);

void pack_ensemble(Checkpoint& ckpt, const DynamicsEnsemble& ensemble);
DynamicsEnsemble unpack_ensemble(const Checkpoint& ckpt);
void pack_cvae(Checkpoint& ckpt, const CvaeModel& model);
CvaeModel unpack_cvae(const Checkpoint& ckpt);
void pack_actor_critic(Checkpoint& ckpt, const ActorCritic& model);
ActorCritic unpack_actor_critic(const Checkpoint& ckpt);

// --- Metrics: JSON-lines records, append-only, step monotone per (run, name).
struct MetricRecord {
    std::string run_id;
    long step = 0;
    std::string name;
    double value = 0.0;
    std::map<std::string, std::string> tags;
};

class MetricWriter {
  public:
    MetricWriter(const std::string& path, std::string run_id);
    void write(long step, const std::string& name, double value,
               const std::map<std::string, std::string>& tags = {});

  private:
    std::ofstream out_;
    std::string run_id_;
    std::map<std::string, long> last_step_;
};

std::vector<MetricRecord> load_metrics(const std::string& path);

}  // namespace io
}  // namespace tatu
