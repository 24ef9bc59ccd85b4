#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "autodiff.hpp"

namespace sgtn {

// Checkpoint file: "SGTN" + version byte 1, u32 record count, then per record:
// u32 name length, UTF-8 name, u32 rank, u32 extents, raw little-endian f64s.
// All integers little-endian. Round-trips must be bit-exact.

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw std::runtime_error("checkpoint: truncated file");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void write_f64(std::ostream& os, double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline double read_f64(std::istream& is) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8))
        throw std::runtime_error("checkpoint: truncated file");
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &u, 8);
    return v;
}

} // namespace detail

inline void save_checkpoint(const ParameterStore& store, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot open for write: " + path);
    os.write("SGTN", 4);
    const char version = 1;
    os.write(&version, 1);
    detail::write_u32(os, static_cast<std::uint32_t>(store.count()));
    for (const auto& p : store.items()) {
        detail::write_u32(os, static_cast<std::uint32_t>(p.name.size()));
        os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        const Tensor& t = p.var.value();
        detail::write_u32(os, static_cast<std::uint32_t>(t.rank()));
        for (std::size_t e : t.shape()) detail::write_u32(os, static_cast<std::uint32_t>(e));
        for (std::size_t i = 0; i < t.size(); ++i) detail::write_f64(os, t[i]);
    }
    if (!os) throw std::runtime_error("checkpoint: write failed: " + path);
}

/// Loads into an existing store; every stored name/shape must match the
/// model exactly, and no parameter may be missing. No partial load.
inline void load_checkpoint(ParameterStore& store, const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open: " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::string(magic, 4) != "SGTN")
        throw std::runtime_error("checkpoint: bad magic bytes");
    char version;
    if (!is.read(&version, 1) || version != 1)
        throw std::runtime_error("checkpoint: unsupported format version");
    const std::uint32_t count = detail::read_u32(is);
    if (count != store.count())
        throw std::runtime_error("checkpoint: parameter count mismatch (file " +
                                 std::to_string(count) + ", model " +
                                 std::to_string(store.count()) + ")");
    // read everything first so a truncated file leaves the model untouched
    std::vector<std::pair<std::string, Tensor>> records;
    records.reserve(count);
    for (std::uint32_t r = 0; r < count; ++r) {
        const std::uint32_t nlen = detail::read_u32(is);
        std::string name(nlen, '\0');
        if (!is.read(name.data(), nlen)) throw std::runtime_error("checkpoint: truncated file");
        const std::uint32_t rank = detail::read_u32(is);
        std::vector<std::size_t> shape(rank);
        for (std::uint32_t i = 0; i < rank; ++i) shape[i] = detail::read_u32(is);
        Tensor t(shape);
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = detail::read_f64(is);
        records.emplace_back(std::move(name), std::move(t));
    }
    for (auto& [name, t] : records) {
        if (!store.has(name)) throw std::runtime_error("checkpoint: unknown parameter '" + name + "'");
        Var v = store.get(name);
        if (v.value().shape() != t.shape())
            throw std::runtime_error("checkpoint: shape mismatch for '" + name + "': file " +
                                     Tensor::shape_string(t.shape()) + ", model " +
                                     Tensor::shape_string(v.value().shape()));
    }
    for (auto& [name, t] : records) {
        Var v = store.get(name);
        v.node()->value = std::move(t);
    }
}

} // namespace sgtn
