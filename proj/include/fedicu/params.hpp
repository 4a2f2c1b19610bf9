#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fedicu/errors.hpp"
#include "fedicu/tensor.hpp"

namespace fedicu {

enum class ParamKind : std::uint8_t { trainable = 0, running_stat = 1 };

struct ParamEntry {
    std::string name;
    ParamKind kind;
    Tensor values;
};

// Ordered, named collection of tensors: all trainable weights plus batch-norm
// running statistics. Entry order is fixed at build time and identical for any
// two sets built from the same architecture spec, which makes sets element-wise
// combinable.
class ParameterSet {
public:
    void add(std::string name, ParamKind kind, Tensor values) {
        if (index_.count(name)) throw ContractError("duplicate parameter name: " + name);
        index_.emplace(name, entries_.size());
        entries_.push_back({std::move(name), kind, std::move(values)});
    }

    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    ParamEntry& entry(std::size_t i) { return entries_[i]; }
    const ParamEntry& entry(std::size_t i) const { return entries_[i]; }

    bool has(const std::string& name) const { return index_.count(name) != 0; }

    Tensor& at(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw ContractError("no such parameter: " + name);
        return entries_[it->second].values;
    }
    const Tensor& at(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw ContractError("no such parameter: " + name);
        return entries_[it->second].values;
    }

    // Same names, kinds, shapes, in the same order.
    bool same_spec(const ParameterSet& o) const {
        if (entries_.size() != o.entries_.size()) return false;
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            const auto& a = entries_[i];
            const auto& b = o.entries_[i];
            if (a.name != b.name || a.kind != b.kind || !a.values.same_shape(b.values))
                return false;
        }
        return true;
    }

    std::size_t value_count(ParamKind kind) const {
        std::size_t n = 0;
        for (const auto& e : entries_) {
            if (e.kind == kind) n += e.values.numel();
        }
        return n;
    }

    auto begin() { return entries_.begin(); }
    auto end() { return entries_.end(); }
    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

private:
    std::vector<ParamEntry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Zero-filled set containing only the trainable entries of `ref`, in order.
// This is the shape gradients come in.
inline ParameterSet trainables_like(const ParameterSet& ref) {
    ParameterSet out;
    for (const auto& e : ref) {
        if (e.kind == ParamKind::trainable) {
            out.add(e.name, ParamKind::trainable, Tensor::zeros(e.values.shape));
        }
    }
    return out;
}

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f64(std::string& out, double d) {
    std::uint64_t v;
    std::memcpy(&v, &d, 8);
    put_u64(out, v);
}

inline std::uint64_t get_u64(const std::string& in, std::size_t& pos) {
    if (pos + 8 > in.size()) throw ConfigError("truncated parameter blob");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    }
    pos += 8;
    return v;
}

inline double get_f64(const std::string& in, std::size_t& pos) {
    const std::uint64_t v = get_u64(in, pos);
    double d;
    std::memcpy(&d, &v, 8);
    return d;
}

}  // namespace detail

// Flat binary container: entry count, then per entry name length + UTF-8 name,
// kind byte, rank, dims (little-endian u64), values (little-endian f64).
inline std::string serialize(const ParameterSet& params) {
    std::string out;
    detail::put_u64(out, params.size());
    for (const auto& e : params) {
        detail::put_u64(out, e.name.size());
        out.append(e.name);
        out.push_back(static_cast<char>(e.kind));
        detail::put_u64(out, e.values.rank());
        for (std::size_t d : e.values.shape) detail::put_u64(out, d);
        for (double v : e.values.data) detail::put_f64(out, v);
    }
    return out;
}

inline ParameterSet deserialize(const std::string& blob) {
    std::size_t pos = 0;
    const std::uint64_t count = detail::get_u64(blob, pos);
    ParameterSet out;
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint64_t name_len = detail::get_u64(blob, pos);
        if (pos + name_len > blob.size()) throw ConfigError("truncated parameter blob");
        std::string name = blob.substr(pos, name_len);
        pos += name_len;
        if (pos >= blob.size()) throw ConfigError("truncated parameter blob");
        const auto kind = static_cast<ParamKind>(static_cast<unsigned char>(blob[pos++]));
        if (kind != ParamKind::trainable && kind != ParamKind::running_stat)
            throw ConfigError("bad parameter kind byte");
        const std::uint64_t rank = detail::get_u64(blob, pos);
        std::vector<std::size_t> dims(rank);
        for (auto& d : dims) d = detail::get_u64(blob, pos);
        Tensor t{std::move(dims)};
        for (auto& v : t.data) v = detail::get_f64(blob, pos);
        out.add(std::move(name), kind, std::move(t));
    }
    if (pos != blob.size()) throw ConfigError("trailing bytes in parameter blob");
    return out;
}

inline void save_params(const ParameterSet& params, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ConfigError("cannot open for writing: " + path);
    const std::string blob = serialize(params);
    f.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!f) throw ConfigError("write failed: " + path);
}

inline ParameterSet load_params(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open: " + path);
    std::string blob((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return deserialize(blob);
}

// FNV-1a over the serialized bytes.
inline std::uint64_t checksum(const ParameterSet& params) {
    const std::string blob = serialize(params);
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char ch : blob) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace fedicu
