#pragma once

// Weights container:
//   "DWDN" | u32 version | u32 len + topology text (key=value lines)
//   | u32 count | count x (u32 len + name, u32 dtype, u32 ndim, ndim x u32 dim)
//   | payloads, little-endian float32, manifest order.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dwdn/error.hpp"
#include "dwdn/io.hpp"
#include "dwdn/nn.hpp"

namespace dwdn {

struct RefinerWeights {
    static constexpr std::uint32_t format_version = 1;
    static constexpr std::uint32_t dtype_f32 = 1;

    std::map<std::string, std::string> topology;
    ParameterStore tensors;
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i)
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class ByteReader {
public:
    explicit ByteReader(const std::string& bytes) : bytes_(bytes) {}

    std::uint32_t u32()
    {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::string str(std::size_t n)
    {
        need(n);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const
    {
        if (pos_ + n > bytes_.size())
            throw FormatError("weights file is truncated");
    }
    const std::string& bytes_;
    std::size_t pos_ = 0;
};

} // namespace detail

inline std::string serialize_weights(const RefinerWeights& w)
{
    std::string out = "DWDN";
    detail::put_u32(out, RefinerWeights::format_version);
    std::string topo;
    for (const auto& [k, v] : w.topology)
        topo += k + "=" + v + "\n";
    detail::put_u32(out, static_cast<std::uint32_t>(topo.size()));
    out += topo;
    detail::put_u32(out, static_cast<std::uint32_t>(w.tensors.size()));
    for (const auto& e : w.tensors.entries()) {
        detail::put_u32(out, static_cast<std::uint32_t>(e.name.size()));
        out += e.name;
        detail::put_u32(out, RefinerWeights::dtype_f32);
        detail::put_u32(out, static_cast<std::uint32_t>(e.value.shape.size()));
        for (int d : e.value.shape)
            detail::put_u32(out, static_cast<std::uint32_t>(d));
    }
    for (const auto& e : w.tensors.entries())
        for (double v : e.value.data) {
            if (!std::isfinite(v))
                throw NumericError("tensor " + e.name + " holds a non-finite value");
            detail::put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
        }
    return out;
}

inline RefinerWeights deserialize_weights(const std::string& bytes)
{
    detail::ByteReader in(bytes);
    if (in.str(4) != "DWDN")
        throw FormatError("not a weights file (bad magic)");
    const std::uint32_t version = in.u32();
    if (version != RefinerWeights::format_version)
        throw FormatError("unsupported weights format version " + std::to_string(version));
    RefinerWeights w;
    const std::uint32_t topo_len = in.u32();
    std::istringstream topo(in.str(topo_len));
    std::string line;
    while (std::getline(topo, line)) {
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw FormatError("malformed topology line: " + line);
        w.topology[line.substr(0, eq)] = line.substr(eq + 1);
    }
    const std::uint32_t count = in.u32();
    if (count > 100000)
        throw FormatError("implausible tensor count");
    std::vector<std::pair<std::string, std::vector<int>>> manifest;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = in.u32();
        if (name_len > 4096)
            throw FormatError("implausible tensor name length");
        std::string name = in.str(name_len);
        if (in.u32() != RefinerWeights::dtype_f32)
            throw FormatError("tensor " + name + " has an unsupported dtype");
        const std::uint32_t ndim = in.u32();
        if (ndim > 8)
            throw FormatError("tensor " + name + " has too many dimensions");
        std::vector<int> shape;
        for (std::uint32_t d = 0; d < ndim; ++d) {
            const std::uint32_t v = in.u32();
            if (v > (1u << 24))
                throw FormatError("tensor " + name + " has an implausible dimension");
            shape.push_back(static_cast<int>(v));
        }
        manifest.emplace_back(std::move(name), std::move(shape));
    }
    for (auto& [name, shape] : manifest) {
        Tensor t(shape);
        for (double& v : t.data) {
            v = in.f32();
            if (!std::isfinite(v))
                throw FormatError("tensor " + name + " holds a non-finite value");
        }
        w.tensors.add(name, std::move(t));
    }
    if (!in.done())
        throw FormatError("trailing bytes after tensor payloads");
    return w;
}

inline void save_weights(const fs::path& path, const RefinerWeights& w)
{
    const std::string bytes = serialize_weights(w);
    write_atomically(path, [&](const fs::path& tmp) {
        std::ofstream out(tmp, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out)
            throw IoError("cannot write " + tmp.string());
    });
}

inline RefinerWeights load_weights(const fs::path& path) { return deserialize_weights(read_text_file(path)); }

} // namespace dwdn
