#pragma once

#include "ldae/core.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace ldae {

enum class Split : std::uint8_t { Train, Validation };

/// A stack of equally sized images stored as [image][row][col][channel].
struct ImageSet {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<float> pixels;
    std::vector<Split> split;

    std::size_t count() const { return split.size(); }
    std::size_t count(Split tag) const {
        return static_cast<std::size_t>(std::count(split.begin(), split.end(), tag));
    }
    std::size_t image_size() const {
        return static_cast<std::size_t>(height) * width * channels;
    }

    float at(std::size_t image, int row, int col, int channel) const {
        return pixels[((image * height + row) * width + col) * channels + channel];
    }

    /// Images carrying `tag`, relabelled as a standalone set.
    ImageSet select(Split tag) const {
        ImageSet out;
        out.height = height;
        out.width = width;
        out.channels = channels;
        const std::size_t stride = image_size();
        for (std::size_t i = 0; i < count(); ++i) {
            if (split[i] != tag) continue;
            out.pixels.insert(out.pixels.end(), pixels.begin() + i * stride,
                              pixels.begin() + (i + 1) * stride);
            out.split.push_back(tag);
        }
        return out;
    }

    void scale(float factor) {
        for (auto& p : pixels) p *= factor;
    }

    /// Mean of channel `channel` over one image (fill value for out-of-bounds samples).
    double channel_mean(std::size_t image, int channel) const {
        double sum = 0.0;
        for (int r = 0; r < height; ++r)
            for (int c = 0; c < width; ++c) sum += at(image, r, c, channel);
        return sum / (static_cast<double>(height) * width);
    }
};

inline constexpr int kCifarSide = 32;
inline constexpr int kCifarChannels = 3;
inline constexpr std::size_t kCifarRecordBytes = 1 + kCifarSide * kCifarSide * kCifarChannels;
inline constexpr std::size_t kCifarValidationCount = 10000;

inline std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

/// Appends every record of one CIFAR-10 binary batch file. Pixel bytes are kept
/// as their integer values (0..255); labels are dropped.
inline void append_cifar10_batch(ImageSet& set, const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    if (bytes.empty() || bytes.size() % kCifarRecordBytes != 0)
        throw InputError("corrupt CIFAR-10 batch " + path.string() + ": " +
                         std::to_string(bytes.size()) + " bytes is not a multiple of 3073");
    set.height = kCifarSide;
    set.width = kCifarSide;
    set.channels = kCifarChannels;
    constexpr int plane = kCifarSide * kCifarSide;
    const std::size_t records = bytes.size() / kCifarRecordBytes;
    const std::size_t base = set.pixels.size();
    set.pixels.resize(base + records * plane * kCifarChannels);
    for (std::size_t r = 0; r < records; ++r) {
        const unsigned char* rec = bytes.data() + r * kCifarRecordBytes + 1;
        float* out = set.pixels.data() + base + r * plane * kCifarChannels;
        for (int ch = 0; ch < kCifarChannels; ++ch)
            for (int p = 0; p < plane; ++p)
                out[p * kCifarChannels + ch] = static_cast<float>(rec[ch * plane + p]);
        set.split.push_back(Split::Train);
    }
}

inline ImageSet read_cifar10_batch(const std::filesystem::path& path) {
    ImageSet set;
    append_cifar10_batch(set, path);
    return set;
}

/// Loads data_batch_1..5.bin followed by test_batch.bin; the last 10,000 images
/// are tagged as validation.
inline ImageSet load_cifar10(const std::filesystem::path& directory) {
    static const std::array<const char*, 6> names = {"data_batch_1.bin", "data_batch_2.bin",
                                                     "data_batch_3.bin", "data_batch_4.bin",
                                                     "data_batch_5.bin", "test_batch.bin"};
    std::vector<std::string> missing;
    for (const char* name : names)
        if (!std::filesystem::is_regular_file(directory / name)) missing.emplace_back(name);
    if (!missing.empty()) {
        std::string list;
        for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
        throw InputError("missing batch files in " + directory.string() + ": " + list);
    }
    ImageSet set;
    for (const char* name : names) append_cifar10_batch(set, directory / name);
    const std::size_t n_val = std::min(kCifarValidationCount, set.count());
    std::fill(set.split.end() - static_cast<std::ptrdiff_t>(n_val), set.split.end(), Split::Validation);
    return set;
}

inline std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

/// Flat `key = value` text with `#` comments.
inline std::map<std::string, std::string> parse_key_values(std::istream& in, const std::string& origin) {
    std::map<std::string, std::string> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw InputError(origin + ":" + std::to_string(lineno) + ": expected key = value");
        out[trim(std::string_view(t).substr(0, eq))] = trim(std::string_view(t).substr(eq + 1));
    }
    return out;
}

inline float decode_float_le(const unsigned char* p) {
    std::uint32_t bits = std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
                         std::uint32_t(p[3]) << 24;
    return std::bit_cast<float>(bits);
}

/// Raw container: little-endian binary32 pixels plus a sidecar with
/// count/height/width/channels/validation_indices.
inline ImageSet load_raw_images(const std::filesystem::path& data_path,
                                const std::filesystem::path& sidecar_path) {
    std::ifstream side(sidecar_path);
    if (!side) throw InputError("cannot open sidecar " + sidecar_path.string());
    const auto kv = parse_key_values(side, sidecar_path.string());
    static const std::set<std::string> known = {"count", "height", "width", "channels",
                                                "validation_indices"};
    for (const auto& [key, value] : kv)
        if (!known.count(key)) throw InputError("unknown sidecar key '" + key + "'");
    auto dim = [&](const std::string& key) {
        auto it = kv.find(key);
        if (it == kv.end()) throw InputError("sidecar is missing '" + key + "'");
        long v = std::stol(it->second);
        if (v < 1) throw InputError("sidecar '" + key + "' must be positive");
        return v;
    };
    ImageSet set;
    const long count = dim("count");
    set.height = static_cast<int>(dim("height"));
    set.width = static_cast<int>(dim("width"));
    set.channels = static_cast<int>(dim("channels"));

    const auto bytes = read_file_bytes(data_path);
    const std::size_t expected = static_cast<std::size_t>(count) * set.image_size() * 4;
    if (bytes.size() != expected)
        throw InputError("shape mismatch: " + data_path.string() + " has " +
                         std::to_string(bytes.size()) + " bytes, sidecar declares " +
                         std::to_string(expected));
    set.pixels.resize(expected / 4);
    for (std::size_t i = 0; i < set.pixels.size(); ++i) set.pixels[i] = decode_float_le(&bytes[i * 4]);
    set.split.assign(static_cast<std::size_t>(count), Split::Train);

    if (auto it = kv.find("validation_indices"); it != kv.end()) {
        std::stringstream ss(it->second);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty()) continue;
            const long idx = std::stol(item);
            if (idx < 0 || idx >= count)
                throw InputError("validation index " + item + " out of range");
            set.split[static_cast<std::size_t>(idx)] = Split::Validation;
        }
    }
    return set;
}

}  // namespace ldae
