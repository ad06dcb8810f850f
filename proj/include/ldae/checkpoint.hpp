#pragma once

#include "ldae/trainer.hpp"
#include "ldae/whitening.hpp"

#include "json.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>

namespace ldae {

// Container layout:
//   "LDAE" | u32 version | u64 manifest length | manifest (UTF-8 JSON) | payload
// The manifest lists every tensor with name, dtype, shape, byte offset into the
// payload and byte length. All numbers are little-endian.

inline constexpr char kCheckpointMagic[4] = {'L', 'D', 'A', 'E'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
inline constexpr const char* dtype_name = nullptr;
template <>
inline constexpr const char* dtype_name<float> = "f32";
template <>
inline constexpr const char* dtype_name<double> = "f64";
template <>
inline constexpr const char* dtype_name<std::int64_t> = "i64";

namespace detail {

template <typename T>
void append_le(std::string& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    out.append(bytes, sizeof(T));
}

template <typename T>
T read_le(const char* p) {
    char bytes[sizeof(T)];
    std::memcpy(bytes, p, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

}  // namespace detail

/// Tensor-level writer for the container.
class TensorWriter {
public:
    template <typename T>
    void add(const std::string& name, const T* data, std::vector<std::int64_t> shape) {
        std::int64_t count = 1;
        for (auto s : shape) count *= s;
        const std::size_t offset = payload_.size();
        for (std::int64_t i = 0; i < count; ++i) detail::append_le(payload_, data[i]);
        tensors_.push_back({{"name", name},
                            {"dtype", dtype_name<T>},
                            {"shape", shape},
                            {"offset", offset},
                            {"bytes", payload_.size() - offset}});
    }

    template <typename Derived>
    void add_eigen(const std::string& name, const Eigen::MatrixBase<Derived>& m) {
        using T = typename Derived::Scalar;
        const Matrix<T> plain = m;  // column-major
        add(name, plain.data(), {static_cast<std::int64_t>(plain.rows()), static_cast<std::int64_t>(plain.cols())});
    }

    void write(const std::filesystem::path& path, nlohmann::json manifest) const {
        manifest["tensors"] = tensors_;
        const std::string text = manifest.dump(1);
        std::string header(kCheckpointMagic, 4);
        detail::append_le(header, kCheckpointVersion);
        detail::append_le(header, static_cast<std::uint64_t>(text.size()));
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw InputError("cannot write " + path.string());
        out << header << text << payload_;
        if (!out) throw InputError("write failed for " + path.string());
    }

private:
    nlohmann::json tensors_ = nlohmann::json::array();
    std::string payload_;
};

/// Tensor-level reader; validates magic, version and every tensor extent.
class TensorReader {
public:
    explicit TensorReader(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw InputError("cannot open checkpoint " + path.string());
        std::string bytes((std::istreambuf_iterator<char>(in)), {});
        if (bytes.size() < 16 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0)
            throw InputError("bad magic: " + path.string() + " is not an LDAE container");
        const auto version = detail::read_le<std::uint32_t>(bytes.data() + 4);
        if (version != kCheckpointVersion)
            throw InputError("unsupported container version " + std::to_string(version));
        const auto manifest_len = detail::read_le<std::uint64_t>(bytes.data() + 8);
        if (manifest_len > bytes.size() - 16) throw InputError("manifest length exceeds file size");
        manifest_ = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(manifest_len));
        payload_ = bytes.substr(16 + manifest_len);
        for (const auto& t : manifest_.at("tensors")) {
            const std::string name = t.at("name");
            const std::size_t offset = t.at("offset");
            const std::size_t length = t.at("bytes");
            if (offset + length > payload_.size())
                throw InputError("length mismatch: tensor '" + name + "' needs bytes [" + std::to_string(offset) +
                                 ", " + std::to_string(offset + length) + ") but the payload has " +
                                 std::to_string(payload_.size()));
            index_[name] = t;
        }
    }

    const nlohmann::json& manifest() const { return manifest_; }
    bool has(const std::string& name) const { return index_.count(name) > 0; }

    std::string dtype(const std::string& name) const { return entry(name).at("dtype"); }

    template <typename T>
    std::vector<T> read(const std::string& name, std::vector<std::int64_t>* shape = nullptr) const {
        const auto& t = entry(name);
        if (t.at("dtype") != dtype_name<T>)
            throw InputError("tensor '" + name + "' has dtype " + t.at("dtype").get<std::string>() + ", expected " +
                             dtype_name<T>);
        const auto dims = t.at("shape").get<std::vector<std::int64_t>>();
        std::int64_t count = 1;
        for (auto s : dims) count *= s;
        const std::size_t length = t.at("bytes");
        if (length != static_cast<std::size_t>(count) * sizeof(T))
            throw InputError("length mismatch: tensor '" + name + "' shape disagrees with its byte length");
        const std::size_t offset = t.at("offset");
        std::vector<T> out(static_cast<std::size_t>(count));
        for (std::int64_t i = 0; i < count; ++i)
            out[static_cast<std::size_t>(i)] = detail::read_le<T>(payload_.data() + offset + i * sizeof(T));
        if (shape) *shape = dims;
        return out;
    }

    template <typename T>
    Matrix<T> read_matrix(const std::string& name) const {
        std::vector<std::int64_t> shape;
        const auto flat = read<T>(name, &shape);
        const Eigen::Index rows = shape.empty() ? 1 : shape[0];
        const Eigen::Index cols = shape.size() < 2 ? 1 : shape[1];
        return Eigen::Map<const Matrix<T>>(flat.data(), rows, cols);
    }

    template <typename T>
    Vector<T> read_vector(const std::string& name) const {
        const auto flat = read<T>(name);
        return Eigen::Map<const Vector<T>>(flat.data(), static_cast<Eigen::Index>(flat.size()));
    }

private:
    const nlohmann::json& entry(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw InputError("tensor '" + name + "' missing from container");
        return it->second;
    }

    nlohmann::json manifest_;
    std::string payload_;
    std::map<std::string, nlohmann::json> index_;
};

inline nlohmann::json spec_to_json(const ModelSpec& spec) {
    return {{"variant", to_string(spec.variant)}, {"layer_sizes", spec.layer_sizes}, {"tied", spec.tied}};
}

inline ModelSpec spec_from_json(const nlohmann::json& j) {
    ModelSpec spec;
    spec.variant = parse_variant(j.at("variant"));
    spec.layer_sizes = j.at("layer_sizes").get<std::vector<Eigen::Index>>();
    spec.tied = j.at("tied");
    spec.validate();
    return spec;
}

inline void write_input_map(TensorWriter& w, nlohmann::json& manifest, const InputMap& map) {
    manifest["input_map"] = {{"offset", map.offset}, {"gain", map.gain}, {"whitened", map.whitener.has_value()}};
    if (map.whitener) {
        const auto& wh = *map.whitener;
        manifest["input_map"]["floor"] = wh.floor;
        manifest["input_map"]["retained_variance_fraction"] = wh.retained_variance_fraction;
        w.add_eigen("whitener.mean", wh.mean);
        w.add_eigen("whitener.basis", wh.basis);
        w.add_eigen("whitener.eigenvalues", wh.eigenvalues);
        w.add_eigen("whitener.scale", wh.scale);
    }
}

inline std::optional<InputMap> read_input_map(const TensorReader& r) {
    const auto& m = r.manifest();
    if (!m.contains("input_map")) return std::nullopt;
    const auto& j = m.at("input_map");
    InputMap map;
    map.offset = j.at("offset");
    map.gain = j.at("gain");
    if (j.at("whitened").get<bool>()) {
        Whitener wh;
        wh.floor = j.at("floor");
        wh.retained_variance_fraction = j.at("retained_variance_fraction");
        wh.mean = r.read_vector<double>("whitener.mean");
        wh.basis = r.read_matrix<double>("whitener.basis");
        wh.eigenvalues = r.read_vector<double>("whitener.eigenvalues");
        wh.scale = r.read_vector<double>("whitener.scale");
        map.whitener = std::move(wh);
    }
    return map;
}

/// Standalone preprocessing file written by `prepare`.
inline void save_input_map(const std::filesystem::path& path, const InputMap& map, const std::string& config = {}) {
    TensorWriter w;
    nlohmann::json manifest = {{"kind", "input_map"}, {"config", config}};
    write_input_map(w, manifest, map);
    w.write(path, manifest);
}

inline InputMap load_input_map(const std::filesystem::path& path) {
    TensorReader r(path);
    auto map = read_input_map(r);
    if (!map) throw InputError(path.string() + " holds no input map");
    return *map;
}

template <typename Scalar>
struct Checkpoint {
    ModelSpec spec;
    Params<Scalar> params;
    std::optional<InputMap> input_map;
    std::optional<AdaDelta<Scalar>> optimizer;
    TrainHistory history;
    std::string config;  // resolved run configuration, verbatim
};

template <typename Scalar>
void save_checkpoint(const std::filesystem::path& path, const Checkpoint<Scalar>& ck) {
    TensorWriter w;
    nlohmann::json manifest = {{"kind", "checkpoint"},
                               {"precision", dtype_name<Scalar>},
                               {"model", spec_to_json(ck.spec)},
                               {"config", ck.config}};
    for (const auto& v : ck.params.w.views()) w.add(v.name, v.data, {v.rows, v.cols});
    for (std::size_t l = 0; l < ck.params.beta.size(); ++l)
        w.add_eigen("beta" + std::to_string(l + 1), ck.params.beta[l]);
    if (ck.optimizer) {
        manifest["optimizer"] = {{"rho", ck.optimizer->rho}, {"epsilon", ck.optimizer->epsilon}};
        for (const auto& v : ck.optimizer->sq_grad.views()) w.add("opt.sq_grad." + v.name, v.data, {v.rows, v.cols});
        for (const auto& v : ck.optimizer->sq_update.views())
            w.add("opt.sq_update." + v.name, v.data, {v.rows, v.cols});
    }
    if (ck.input_map) write_input_map(w, manifest, *ck.input_map);
    std::vector<std::int64_t> updates;
    std::vector<double> costs;
    for (const auto& r : ck.history.records) {
        updates.push_back(r.update);
        costs.push_back(r.cost);
    }
    const auto n = static_cast<std::int64_t>(updates.size());
    w.add("history.update", updates.data(), {n});
    w.add("history.cost", costs.data(), {n});
    w.write(path, manifest);
}

/// Precision recorded in a checkpoint ("f32" or "f64").
inline Precision checkpoint_precision(const std::filesystem::path& path) {
    TensorReader r(path);
    return parse_precision(r.manifest().at("precision").get<std::string>());
}

template <typename Scalar>
Checkpoint<Scalar> load_checkpoint(const std::filesystem::path& path) {
    TensorReader r(path);
    const auto& m = r.manifest();
    if (m.value("kind", "") != "checkpoint") throw InputError(path.string() + " is not a model checkpoint");
    if (m.at("precision") != dtype_name<Scalar>)
        throw InputError("checkpoint precision " + m.at("precision").get<std::string>() + " does not match " +
                         dtype_name<Scalar>);
    Checkpoint<Scalar> ck;
    ck.spec = spec_from_json(m.at("model"));
    ck.config = m.value("config", "");
    ck.params = Params<Scalar>::zeros(ck.spec);
    auto load_into = [&](const std::string& prefix, Weights<Scalar>& target) {
        for (auto& v : target.views()) {
            std::vector<std::int64_t> shape;
            const auto data = r.read<Scalar>(prefix + v.name, &shape);
            if (shape.size() != 2 || shape[0] != v.rows || shape[1] != v.cols)
                throw InputError("tensor '" + prefix + v.name + "' shape does not match the model");
            std::copy(data.begin(), data.end(), v.data);
        }
    };
    load_into("", ck.params.w);
    for (std::size_t l = 0; l < ck.params.beta.size(); ++l) {
        const std::string name = "beta" + std::to_string(l + 1);
        auto beta = r.read_vector<Scalar>(name);
        if (beta.size() != ck.params.beta[l].size()) throw InputError("tensor '" + name + "' has the wrong size");
        ck.params.beta[l] = std::move(beta);
    }
    if (m.contains("optimizer")) {
        AdaDelta<Scalar> opt(ck.spec, m["optimizer"].at("rho"), m["optimizer"].at("epsilon"));
        load_into("opt.sq_grad.", opt.sq_grad);
        load_into("opt.sq_update.", opt.sq_update);
        ck.optimizer = std::move(opt);
    }
    ck.input_map = read_input_map(r);
    const auto updates = r.read<std::int64_t>("history.update");
    const auto costs = r.read<double>("history.cost");
    if (updates.size() != costs.size()) throw InputError("history tensors disagree in length");
    for (std::size_t i = 0; i < updates.size(); ++i) ck.history.records.push_back({updates[i], costs[i]});
    return ck;
}

}  // namespace ldae
