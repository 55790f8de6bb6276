#include "tatu/io.hpp"

#include <json.hpp>

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <sstream>

namespace tatu::io {

namespace {

constexpr char kDatasetMagic[] = "tatu-dataset v1";
constexpr char kBufferMagic[] = "tatu-buffer v1";
constexpr char kCheckpointMagic[8] = {'T', 'A', 'T', 'U', 'C', 'K', 'P', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;

std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

double parse_double(const std::string& tok) {
    std::size_t pos = 0;
    double v;
    try {
        v = std::stod(tok, &pos);
    } catch (const std::exception&) {
        throw SchemaError("malformed number: " + tok);
    }
    if (pos != tok.size()) throw SchemaError("malformed number: " + tok);
    return v;
}

std::vector<std::string> split_ws(const std::string& line) {
    std::istringstream ss(line);
    std::vector<std::string> out;
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

void write_env_header(std::ostream& out, const EnvDescriptor& env, std::size_t n,
                      const std::string& behavior, std::size_t n_starts) {
    out << "env=" << (env.env_id.empty() ? "-" : env.env_id) << " state_dim=" << env.state_dim
        << " action_dim=" << env.action_dim << " action_bound=" << fmt_double(env.action_bound)
        << " n_states=" << env.n_states << " n_actions=" << env.n_actions
        << " behavior=" << (behavior.empty() ? "-" : behavior) << " n=" << n
        << " n_starts=" << n_starts << "\n";
}

struct Header {
    EnvDescriptor env;
    std::string behavior;
    std::size_t n = 0;
    std::size_t n_starts = 0;
};

Header parse_env_header(const std::string& line) {
    Header h;
    for (const std::string& tok : split_ws(line)) {
        const std::size_t eq = tok.find('=');
        if (eq == std::string::npos) throw SchemaError("malformed header token: " + tok);
        const std::string key = tok.substr(0, eq);
        const std::string val = tok.substr(eq + 1);
        if (key == "env")
            h.env.env_id = val == "-" ? "" : val;
        else if (key == "state_dim")
            h.env.state_dim = std::stoi(val);
        else if (key == "action_dim")
            h.env.action_dim = std::stoi(val);
        else if (key == "action_bound")
            h.env.action_bound = parse_double(val);
        else if (key == "n_states")
            h.env.n_states = std::stoi(val);
        else if (key == "n_actions")
            h.env.n_actions = std::stoi(val);
        else if (key == "behavior")
            h.behavior = val == "-" ? "" : val;
        else if (key == "n")
            h.n = std::stoull(val);
        else if (key == "n_starts")
            h.n_starts = std::stoull(val);
        else
            throw SchemaError("unknown header key: " + key);
    }
    if (h.env.state_dim < 1 || h.env.action_dim < 1) throw SchemaError("header missing dims");
    return h;
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileError("cannot open file: " + path);
    return in;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FileError("cannot open file for writing: " + path);
    return out;
}

void write_transition(std::ostream& out, const Transition& tr) {
    for (int i = 0; i < tr.s.size(); ++i) out << fmt_double(tr.s[i]) << ' ';
    for (int i = 0; i < tr.a.size(); ++i) out << fmt_double(tr.a[i]) << ' ';
    out << fmt_double(tr.r) << ' ';
    for (int i = 0; i < tr.s_next.size(); ++i) out << fmt_double(tr.s_next[i]) << ' ';
    out << (tr.done ? 1 : 0);
}

Transition parse_transition(const std::vector<std::string>& toks, const EnvDescriptor& env,
                            std::size_t& pos) {
    const std::size_t need = 2 * (std::size_t)env.state_dim + env.action_dim + 2;
    if (toks.size() - pos < need) throw SchemaError("transition row too short");
    Transition tr;
    tr.s.resize(env.state_dim);
    tr.a.resize(env.action_dim);
    tr.s_next.resize(env.state_dim);
    for (int i = 0; i < env.state_dim; ++i) tr.s[i] = parse_double(toks[pos++]);
    for (int i = 0; i < env.action_dim; ++i) tr.a[i] = parse_double(toks[pos++]);
    tr.r = parse_double(toks[pos++]);
    for (int i = 0; i < env.state_dim; ++i) tr.s_next[i] = parse_double(toks[pos++]);
    const std::string& d = toks[pos++];
    if (d != "0" && d != "1") throw SchemaError("malformed done flag: " + d);
    tr.done = d == "1";
    return tr;
}

}  // namespace

void save_dataset(const Dataset& dataset, const std::string& path) {
    auto out = open_output(path);
    out << kDatasetMagic << "\n";
    write_env_header(out, dataset.env, dataset.size(), dataset.behavior_tag,
                     dataset.start_state_pool.size());
    out << "starts:";
    for (std::size_t i : dataset.start_state_pool) out << ' ' << i;
    out << "\n";
    for (const Transition& tr : dataset.transitions) {
        write_transition(out, tr);
        out << "\n";
    }
    if (!out) throw FileError("write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
    auto in = open_input(path);
    std::string line;
    if (!std::getline(in, line) || line != kDatasetMagic)
        throw SchemaError("not a dataset file (bad magic): " + path);
    if (!std::getline(in, line)) throw SchemaError("truncated dataset header: " + path);
    Header h = parse_env_header(line);

    Dataset ds;
    ds.env = h.env;
    ds.behavior_tag = h.behavior;
    if (!std::getline(in, line)) throw SchemaError("truncated dataset (missing starts): " + path);
    {
        auto toks = split_ws(line);
        if (toks.empty() || toks[0] != "starts:") throw SchemaError("missing starts line");
        for (std::size_t i = 1; i < toks.size(); ++i)
            ds.start_state_pool.push_back(std::stoull(toks[i]));
        if (ds.start_state_pool.size() != h.n_starts)
            throw SchemaError("start pool size does not match header");
    }
    ds.transitions.reserve(h.n);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto toks = split_ws(line);
        std::size_t pos = 0;
        Transition tr = parse_transition(toks, h.env, pos);
        if (pos != toks.size()) throw SchemaError("trailing tokens in transition row");
        ds.transitions.push_back(std::move(tr));
    }
    if (ds.size() != h.n) throw SchemaError("transition count does not match header");
    for (std::size_t i : ds.start_state_pool)
        if (i >= ds.size()) throw SchemaError("start index out of range");
    return ds;
}

void save_buffer(const ModelBuffer& buffer, const EnvDescriptor& env, const std::string& path) {
    auto out = open_output(path);
    out << kBufferMagic << "\n";
    write_env_header(out, env, buffer.size(), "", 0);
    out << "capacity: " << buffer.capacity << "\n";
    for (std::size_t i = 0; i < buffer.size(); ++i) {
        write_transition(out, buffer.transitions[i]);
        const Provenance& pv = buffer.provenance[i];
        out << ' ' << pv.trajectory_id << ' ' << pv.step_index << ' ' << fmt_double(pv.u) << ' '
            << fmt_double(pv.u_accum) << "\n";
    }
    if (!out) throw FileError("write failed: " + path);
}

ModelBuffer load_buffer(const std::string& path, EnvDescriptor* env_out) {
    auto in = open_input(path);
    std::string line;
    if (!std::getline(in, line) || line != kBufferMagic)
        throw SchemaError("not a buffer file (bad magic): " + path);
    if (!std::getline(in, line)) throw SchemaError("truncated buffer header: " + path);
    Header h = parse_env_header(line);
    if (env_out) *env_out = h.env;

    ModelBuffer buf;
    if (!std::getline(in, line)) throw SchemaError("truncated buffer (missing capacity)");
    {
        auto toks = split_ws(line);
        if (toks.size() != 2 || toks[0] != "capacity:")
            throw SchemaError("missing capacity line");
        buf.capacity = std::stoull(toks[1]);
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto toks = split_ws(line);
        std::size_t pos = 0;
        Transition tr = parse_transition(toks, h.env, pos);
        if (toks.size() - pos != 4) throw SchemaError("malformed provenance columns");
        Provenance pv;
        pv.trajectory_id = std::stoull(toks[pos++]);
        pv.step_index = std::stoi(toks[pos++]);
        pv.u = parse_double(toks[pos++]);
        pv.u_accum = parse_double(toks[pos++]);
        buf.transitions.push_back(std::move(tr));
        buf.provenance.push_back(pv);
    }
    if (buf.size() != h.n) throw SchemaError("buffer size does not match header");
    return buf;
}

// --- Checkpoints ------------------------------------------------------------

const NamedTensor* Checkpoint::find(const std::string& name) const {
    for (const auto& t : tensors)
        if (t.name == name) return &t;
    return nullptr;
}

const NamedTensor& Checkpoint::get(const std::string& name) const {
    const NamedTensor* t = find(name);
    if (!t) throw SchemaError("checkpoint tensor missing: " + name);
    return *t;
}

void Checkpoint::add(const std::string& name, std::vector<std::uint64_t> dims,
                     std::vector<double> data) {
    std::uint64_t count = 1;
    for (std::uint64_t d : dims) count *= d;
    if (count != data.size()) throw ParameterError("checkpoint tensor shape/data mismatch");
    if (find(name)) throw ParameterError("duplicate checkpoint tensor: " + name);
    tensors.push_back({name, std::move(dims), std::move(data)});
}

void Checkpoint::add_scalar(const std::string& name, double value) { add(name, {1}, {value}); }

void Checkpoint::add_vector(const std::string& name, const Vec& v) {
    add(name, {(std::uint64_t)v.size()}, std::vector<double>(v.data(), v.data() + v.size()));
}

void Checkpoint::add_matrix(const std::string& name, const Mat& m) {
    std::vector<double> data;
    data.reserve((std::size_t)m.size());
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
    add(name, {(std::uint64_t)m.rows(), (std::uint64_t)m.cols()}, std::move(data));
}

double Checkpoint::scalar(const std::string& name) const {
    const NamedTensor& t = get(name);
    if (t.data.size() != 1) throw SchemaError("tensor is not a scalar: " + name);
    return t.data[0];
}

Vec Checkpoint::vector(const std::string& name) const {
    const NamedTensor& t = get(name);
    if (t.dims.size() != 1) throw SchemaError("tensor is not a vector: " + name);
    return Eigen::Map<const Vec>(t.data.data(), (Eigen::Index)t.data.size());
}

Mat Checkpoint::matrix(const std::string& name) const {
    const NamedTensor& t = get(name);
    if (t.dims.size() != 2) throw SchemaError("tensor is not a matrix: " + name);
    Mat m((Eigen::Index)t.dims[0], (Eigen::Index)t.dims[1]);
    std::size_t k = 0;
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) m(i, j) = t.data[k++];
    return m;
}

namespace {

// FNV-1a 64-bit over the byte stream preceding the checksum field.
struct Fnv1a {
    std::uint64_t h = 14695981039346656037ull;
    void update(const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 1099511628211ull;
        }
    }
};

void append_bytes(std::string& blob, const void* data, std::size_t n) {
    blob.append(static_cast<const char*>(data), n);
}

template <typename T>
void append_pod(std::string& blob, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    append_bytes(blob, &v, sizeof(T));
}

template <typename T>
T read_pod(const std::string& blob, std::size_t& pos) {
    if (pos + sizeof(T) > blob.size()) throw SchemaError("truncated checkpoint");
    T v;
    std::memcpy(&v, blob.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::string blob;
    append_bytes(blob, kCheckpointMagic, sizeof(kCheckpointMagic));
    append_pod<std::uint32_t>(blob, kCheckpointVersion);
    append_pod<std::uint32_t>(blob, (std::uint32_t)ckpt.tensors.size());
    for (const NamedTensor& t : ckpt.tensors) {
        append_pod<std::uint32_t>(blob, (std::uint32_t)t.name.size());
        append_bytes(blob, t.name.data(), t.name.size());
        append_pod<std::uint32_t>(blob, (std::uint32_t)t.dims.size());
        for (std::uint64_t d : t.dims) append_pod<std::uint64_t>(blob, d);
        append_bytes(blob, t.data.data(), t.data.size() * sizeof(double));
    }
    Fnv1a fnv;
    fnv.update(blob.data(), blob.size());
    append_pod<std::uint64_t>(blob, fnv.h);

    auto out = open_output(path);
    out.write(blob.data(), (std::streamsize)blob.size());
    if (!out) throw FileError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    auto in = open_input(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string blob = ss.str();
    if (blob.size() < sizeof(kCheckpointMagic) + 2 * sizeof(std::uint32_t) + sizeof(std::uint64_t))
        throw SchemaError("truncated checkpoint: " + path);
    if (std::memcmp(blob.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0)
        throw SchemaError("not a checkpoint file (bad magic): " + path);

    Fnv1a fnv;
    fnv.update(blob.data(), blob.size() - sizeof(std::uint64_t));
    std::uint64_t stored;
    std::memcpy(&stored, blob.data() + blob.size() - sizeof(std::uint64_t),
                sizeof(std::uint64_t));
    if (stored != fnv.h) throw SchemaError("checkpoint checksum mismatch: " + path);

    std::size_t pos = sizeof(kCheckpointMagic);
    const auto version = read_pod<std::uint32_t>(blob, pos);
    if (version != kCheckpointVersion)
        throw SchemaError("unsupported checkpoint version: " + std::to_string(version));
    const auto n_tensors = read_pod<std::uint32_t>(blob, pos);

    Checkpoint ckpt;
    for (std::uint32_t i = 0; i < n_tensors; ++i) {
        const auto name_len = read_pod<std::uint32_t>(blob, pos);
        if (pos + name_len > blob.size()) throw SchemaError("truncated checkpoint");
        NamedTensor t;
        t.name.assign(blob.data() + pos, name_len);
        pos += name_len;
        const auto ndim = read_pod<std::uint32_t>(blob, pos);
        std::uint64_t count = 1;
        for (std::uint32_t d = 0; d < ndim; ++d) {
            t.dims.push_back(read_pod<std::uint64_t>(blob, pos));
            count *= t.dims.back();
        }
        if (pos + count * sizeof(double) > blob.size() - sizeof(std::uint64_t))
            throw SchemaError("truncated checkpoint");
        t.data.resize(count);
        std::memcpy(t.data.data(), blob.data() + pos, count * sizeof(double));
        pos += count * sizeof(double);
        ckpt.tensors.push_back(std::move(t));
    }
    return ckpt;
}

void pack_mlp(Checkpoint& ckpt, const std::string& prefix, const nn::Mlp& net) {
    ckpt.add_scalar(prefix + "/n_layers", (double)net.layers.size());
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const std::string base = prefix + "/L" + std::to_string(l);
        ckpt.add_matrix(base + "/W", net.layers[l].W);
        ckpt.add_vector(base + "/b", net.layers[l].b);
        ckpt.add_scalar(base + "/act", (double)(int)net.layers[l].act);
    }
}

nn::Mlp unpack_mlp(const Checkpoint& ckpt, const std::string& prefix) {
    const int n_layers = (int)ckpt.scalar(prefix + "/n_layers");
    if (n_layers < 1) throw SchemaError("checkpoint mlp has no layers: " + prefix);
    nn::Mlp net;
    for (int l = 0; l < n_layers; ++l) {
        const std::string base = prefix + "/L" + std::to_string(l);
        nn::Layer layer;
        layer.W = ckpt.matrix(base + "/W");
        layer.b = ckpt.vector(base + "/b");
        layer.act = (nn::Activation)(int)ckpt.scalar(base + "/act");
        if (layer.W.rows() != layer.b.size()) throw SchemaError("checkpoint layer shape mismatch");
        net.layers.push_back(std::move(layer));
    }
    return net;
}

void pack_ensemble(Checkpoint& ckpt, const DynamicsEnsemble& ensemble) {
    ckpt.add_scalar("ensemble/state_dim", ensemble.state_dim);
    ckpt.add_scalar("ensemble/action_dim", ensemble.action_dim);
    ckpt.add_scalar("ensemble/lv_min", ensemble.lv_min);
    ckpt.add_scalar("ensemble/lv_max", ensemble.lv_max);
    ckpt.add_vector("ensemble/norm_mean", ensemble.input_norm.mean);
    ckpt.add_vector("ensemble/norm_inv_std", ensemble.input_norm.inv_std);
    ckpt.add_scalar("ensemble/n_members", (double)ensemble.members.size());
    for (std::size_t m = 0; m < ensemble.members.size(); ++m)
        pack_mlp(ckpt, "ensemble/member" + std::to_string(m), ensemble.members[m]);
    Vec elites((Eigen::Index)ensemble.elite_indices.size());
    for (std::size_t i = 0; i < ensemble.elite_indices.size(); ++i)
        elites[(Eigen::Index)i] = ensemble.elite_indices[i];
    ckpt.add_vector("ensemble/elites", elites);
    Vec val = Eigen::Map<const Vec>(ensemble.validation_losses.data(),
                                    (Eigen::Index)ensemble.validation_losses.size());
    ckpt.add_vector("ensemble/validation_losses", val);
}

DynamicsEnsemble unpack_ensemble(const Checkpoint& ckpt) {
    DynamicsEnsemble e;
    e.state_dim = (int)ckpt.scalar("ensemble/state_dim");
    e.action_dim = (int)ckpt.scalar("ensemble/action_dim");
    e.lv_min = ckpt.scalar("ensemble/lv_min");
    e.lv_max = ckpt.scalar("ensemble/lv_max");
    e.input_norm.mean = ckpt.vector("ensemble/norm_mean");
    e.input_norm.inv_std = ckpt.vector("ensemble/norm_inv_std");
    const int n = (int)ckpt.scalar("ensemble/n_members");
    for (int m = 0; m < n; ++m)
        e.members.push_back(unpack_mlp(ckpt, "ensemble/member" + std::to_string(m)));
    Vec elites = ckpt.vector("ensemble/elites");
    for (int i = 0; i < elites.size(); ++i) e.elite_indices.push_back((int)elites[i]);
    Vec val = ckpt.vector("ensemble/validation_losses");
    e.validation_losses.assign(val.data(), val.data() + val.size());
    return e;
}

void pack_cvae(Checkpoint& ckpt, const CvaeModel& model) {
    ckpt.add_scalar("cvae/state_dim", model.state_dim);
    ckpt.add_scalar("cvae/action_dim", model.action_dim);
    ckpt.add_scalar("cvae/latent_dim", model.latent_dim);
    ckpt.add_scalar("cvae/action_bound", model.action_bound);
    ckpt.add_scalar("cvae/lv_min", model.lv_min);
    ckpt.add_scalar("cvae/lv_max", model.lv_max);
    ckpt.add_scalar("cvae/z_clip", model.z_clip);
    pack_mlp(ckpt, "cvae/encoder", model.encoder);
    pack_mlp(ckpt, "cvae/decoder", model.decoder);
}

CvaeModel unpack_cvae(const Checkpoint& ckpt) {
    CvaeModel m;
    m.state_dim = (int)ckpt.scalar("cvae/state_dim");
    m.action_dim = (int)ckpt.scalar("cvae/action_dim");
    m.latent_dim = (int)ckpt.scalar("cvae/latent_dim");
    m.action_bound = ckpt.scalar("cvae/action_bound");
    m.lv_min = ckpt.scalar("cvae/lv_min");
    m.lv_max = ckpt.scalar("cvae/lv_max");
    m.z_clip = ckpt.scalar("cvae/z_clip");
    m.encoder = unpack_mlp(ckpt, "cvae/encoder");
    m.decoder = unpack_mlp(ckpt, "cvae/decoder");
    return m;
}

void pack_actor_critic(Checkpoint& ckpt, const ActorCritic& model) {
    ckpt.add_scalar("ac/state_dim", model.state_dim);
    ckpt.add_scalar("ac/action_dim", model.action_dim);
    ckpt.add_scalar("ac/action_bound", model.action_bound);
    ckpt.add_scalar("ac/step_count", (double)model.step_count);
    pack_mlp(ckpt, "ac/actor", model.actor);
    pack_mlp(ckpt, "ac/critic1", model.critic1);
    pack_mlp(ckpt, "ac/critic2", model.critic2);
    pack_mlp(ckpt, "ac/target_actor", model.target_actor);
    pack_mlp(ckpt, "ac/target_critic1", model.target_critic1);
    pack_mlp(ckpt, "ac/target_critic2", model.target_critic2);
}

ActorCritic unpack_actor_critic(const Checkpoint& ckpt) {
    ActorCritic m;
    m.state_dim = (int)ckpt.scalar("ac/state_dim");
    m.action_dim = (int)ckpt.scalar("ac/action_dim");
    m.action_bound = ckpt.scalar("ac/action_bound");
    m.step_count = (long)ckpt.scalar("ac/step_count");
    m.actor = unpack_mlp(ckpt, "ac/actor");
    m.critic1 = unpack_mlp(ckpt, "ac/critic1");
    m.critic2 = unpack_mlp(ckpt, "ac/critic2");
    m.target_actor = unpack_mlp(ckpt, "ac/target_actor");
    m.target_critic1 = unpack_mlp(ckpt, "ac/target_critic1");
    m.target_critic2 = unpack_mlp(ckpt, "ac/target_critic2");
    return m;
}

// --- Metrics ----------------------------------------------------------------

MetricWriter::MetricWriter(const std::string& path, std::string run_id)
    : out_(path, std::ios::app), run_id_(std::move(run_id)) {
    if (!out_) throw FileError("cannot open metrics file: " + path);
}

void MetricWriter::write(long step, const std::string& name, double value,
                         const std::map<std::string, std::string>& tags) {
    auto it = last_step_.find(name);
    if (it != last_step_.end() && step < it->second)
        throw ParameterError("metric step not monotone for " + name);
    last_step_[name] = step;
    nlohmann::json j{{"run", run_id_}, {"step", step}, {"name", name}, {"value", value}};
    if (!tags.empty()) j["tags"] = tags;
    out_ << j.dump() << "\n";
    out_.flush();
    if (!out_) throw FileError("metrics write failed");
}

std::vector<MetricRecord> load_metrics(const std::string& path) {
    auto in = open_input(path);
    std::vector<MetricRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError(std::string("malformed metric line: ") + e.what());
        }
        MetricRecord rec;
        rec.run_id = j.at("run").get<std::string>();
        rec.step = j.at("step").get<long>();
        rec.name = j.at("name").get<std::string>();
        rec.value = j.at("value").get<double>();
        if (j.contains("tags"))
            rec.tags = j.at("tags").get<std::map<std::string, std::string>>();
        out.push_back(std::move(rec));
    }
    return out;
}

}  // namespace tatu::io
