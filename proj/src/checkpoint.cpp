#include "mapnn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace mapnn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'M', 'A', 'P', 'N', 'N', 'C', 'K', 'P'};

template <typename T>
void append_raw(std::string& out, const T& v) {
    out.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(const std::string& in, std::size_t& pos) {
    if (in.size() - pos < sizeof(T)) throw IoError("checkpoint: truncated file");
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

}  // namespace

const Tensor<float>& Checkpoint::tensor(const std::string& name) const {
    for (const auto& [n, t] : tensors) {
        if (n == name) return t;
    }
    throw IoError("checkpoint: missing tensor '" + name + "'");
}

bool Checkpoint::has(const std::string& name) const {
    for (const auto& entry : tensors) {
        if (entry.first == name) return true;
    }
    return false;
}

void Checkpoint::put(std::string name, Tensor<float> value) {
    if (has(name)) throw InvalidArgument("checkpoint: tensor '" + name + "' stored twice");
    tensors.emplace_back(std::move(name), std::move(value));
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
    nlohmann::json header;
    header["training_depth"] = ckpt.training_depth;
    header["seed"] = ckpt.seed;
    header["patch_size"] = ckpt.patch_size;
    header["metadata"] = ckpt.metadata;
    header["tensors"] = nlohmann::json::array();
    for (const auto& [name, t] : ckpt.tensors) header["tensors"].push_back({{"name", name}, {"shape", t.shape().dims()}});
    const std::string text = header.dump();

    std::string out(kMagic, sizeof(kMagic));
    append_raw(out, kCheckpointVersion);
    append_raw(out, static_cast<std::uint64_t>(text.size()));
    out += text;
    for (const auto& entry : ckpt.tensors) {
        const auto& t = entry.second;
        out.append(reinterpret_cast<const char*>(t.data()), static_cast<std::size_t>(t.size()) * sizeof(float));
    }
    return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
    if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
        throw IoError("checkpoint: bad magic, not a checkpoint file");
    }
    std::size_t pos = sizeof(kMagic);
    const auto version = read_raw<std::uint32_t>(bytes, pos);
    if (version != kCheckpointVersion) throw IoError("checkpoint: unsupported version " + std::to_string(version));
    const auto header_len = read_raw<std::uint64_t>(bytes, pos);
    if (bytes.size() - pos < header_len) throw IoError("checkpoint: truncated header");

    Checkpoint ckpt;
    std::size_t payload = pos + header_len;
    try {
        const auto header = nlohmann::json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                                  bytes.begin() + static_cast<std::ptrdiff_t>(payload));
        ckpt.training_depth = header.at("training_depth").get<int>();
        ckpt.seed = header.at("seed").get<std::uint64_t>();
        ckpt.patch_size = header.at("patch_size").get<Index>();
        ckpt.metadata = header.at("metadata");
        for (const auto& entry : header.at("tensors")) {
            Shape shape(entry.at("shape").get<std::vector<Index>>());
            const auto n = static_cast<std::size_t>(shape.numel());
            if ((bytes.size() - payload) / sizeof(float) < n) throw IoError("checkpoint: truncated payload");
            Tensor<float> t(shape);
            std::memcpy(t.data(), bytes.data() + payload, n * sizeof(float));
            payload += n * sizeof(float);
            ckpt.put(entry.at("name").get<std::string>(), std::move(t));
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("checkpoint: malformed header: ") + e.what());
    } catch (const ShapeError& e) {
        throw IoError(std::string("checkpoint: malformed header: ") + e.what());
    } catch (const InvalidArgument& e) {
        throw IoError(std::string("checkpoint: malformed header: ") + e.what());
    }
    if (payload != bytes.size()) throw IoError("checkpoint: trailing bytes after payload");
    return ckpt;
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
    const std::string bytes = encode_checkpoint(ckpt);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("checkpoint: write failed (disk full?)");
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("checkpoint: cannot open " + tmp.string() + " for writing");
        try {
            write_checkpoint(out, ckpt);
        } catch (const IoError&) {
            out.close();
            std::error_code ignored;
            std::filesystem::remove(tmp, ignored);
            throw IoError("checkpoint: write failed for " + tmp.string() + " (disk full?)");
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("checkpoint: cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("checkpoint: cannot open " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

void put_store(Checkpoint& ckpt, const std::string& prefix, const ParamStore<float>& store) {
    for (const auto& name : store.names()) ckpt.put(prefix + name, store.at(name).value());
}

void take_store(const Checkpoint& ckpt, const std::string& prefix, ParamStore<float>& store) {
    for (const auto& name : store.names()) {
        const auto& src = ckpt.tensor(prefix + name);
        auto& dst = store.at(name).mutable_value();
        if (src.shape() != dst.shape()) {
            throw IoError("checkpoint: '" + prefix + name + "' has shape " + src.shape().str() + ", expected " +
                          dst.shape().str());
        }
        dst = src;
    }
}

void put_adam(Checkpoint& ckpt, const std::string& prefix, const AdamState<float>& state) {
    for (const auto& [name, t] : state.m) ckpt.put(prefix + "m/" + name, t);
    for (const auto& [name, t] : state.v) ckpt.put(prefix + "v/" + name, t);
    ckpt.metadata[prefix] = {{"step", state.step},
                             {"lr0", state.lr0},
                             {"beta1", state.beta1},
                             {"beta2", state.beta2},
                             {"epsilon", state.epsilon}};
}

AdamState<float> take_adam(const Checkpoint& ckpt, const std::string& prefix) {
    AdamState<float> s;
    try {
        const auto& meta = ckpt.metadata.at(prefix);
        s.step = meta.at("step").get<std::int64_t>();
        s.lr0 = meta.at("lr0").get<double>();
        s.beta1 = meta.at("beta1").get<double>();
        s.beta2 = meta.at("beta2").get<double>();
        s.epsilon = meta.at("epsilon").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw IoError("checkpoint: optimizer state '" + prefix + "' missing or malformed: " + e.what());
    }
    for (const auto& [name, t] : ckpt.tensors) {
        if (name.starts_with(prefix + "m/")) s.m.emplace(name.substr(prefix.size() + 2), t);
        if (name.starts_with(prefix + "v/")) s.v.emplace(name.substr(prefix.size() + 2), t);
    }
    return s;
}

CpceParams<float> generator_from(const Checkpoint& ckpt) {
    auto p = CpceParams<float>::zeros();
    take_store(ckpt, "gen/", p.store());
    return p;
}

}  // namespace mapnn
