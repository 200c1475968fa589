#pragma once

// Binary checkpoint of a MixtureState. All fields little-endian.
//
//   offset  size  field
//   0       8     magic "MLXCKPT1"
//   8       4     u32 format version (1)
//   12      4     u32 M
//   16      4     u32 K_A
//   20      4     u32 K_B
//   24      4     u32 m_A
//   28      4     u32 m_B
//   32      4     u32 G
//   36      4     u32 reserved (0)
//   40      8     f64 time
//   48      ...   complex arrays A (M x M), C^A (M x K_A), C^B (M x K_B),
//                 phi^A (m_A x G), phi^B (m_B x G); each row-major, each
//                 entry as f64 real then f64 imaginary
//   end-8   8     u64 FNV-1a hash of every preceding byte

#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

#include "mlx/system.hpp"

namespace mlx {

inline constexpr char kCheckpointMagic[8] = {'M', 'L', 'X', 'C', 'K', 'P', 'T', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointHeader {
    std::uint32_t version = kCheckpointVersion;
    std::uint32_t sbs = 0;
    std::array<std::uint32_t, kSpecies> basis{0, 0};
    std::array<std::uint32_t, kSpecies> orbitals{0, 0};
    std::uint32_t points = 0;
    double time = 0.0;
};

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

template <class T>
void put_le(std::vector<unsigned char>& out, T value) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big)
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    out.insert(out.end(), b, b + sizeof(T));
}

template <class T>
T get_le(const std::vector<unsigned char>& in, std::size_t& pos) {
    if (pos + sizeof(T) > in.size()) throw CheckpointError("checkpoint truncated");
    unsigned char b[sizeof(T)];
    std::memcpy(b, in.data() + pos, sizeof(T));
    if constexpr (std::endian::native == std::endian::big)
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    pos += sizeof(T);
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
}

inline std::uint64_t fnv1a(const unsigned char* p, std::size_t n) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline void put_matrix(std::vector<unsigned char>& out, const CMatrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            put_le(out, m(r, c).real());
            put_le(out, m(r, c).imag());
        }
}

inline CMatrix get_matrix(const std::vector<unsigned char>& in, std::size_t& pos, std::uint32_t rows,
                          std::uint32_t cols) {
    CMatrix m(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r)
        for (std::uint32_t c = 0; c < cols; ++c) {
            const double re = get_le<double>(in, pos);
            const double im = get_le<double>(in, pos);
            m(r, c) = cplx(re, im);
        }
    return m;
}

}  // namespace detail

inline std::vector<unsigned char> encode_checkpoint(const MixtureState& st) {
    std::vector<unsigned char> out;
    out.insert(out.end(), kCheckpointMagic, kCheckpointMagic + 8);
    const auto M = static_cast<std::uint32_t>(st.top.rows());
    if (st.top.cols() != st.top.rows()) throw CheckpointError("checkpoint: A must be square");
    const auto G = static_cast<std::uint32_t>(st.orbitals[kA].cols());
    if (static_cast<std::uint32_t>(st.orbitals[kB].cols()) != G) throw CheckpointError("checkpoint: grid mismatch");
    detail::put_le(out, kCheckpointVersion);
    detail::put_le(out, M);
    for (const auto& c : st.coeffs) {
        if (static_cast<std::uint32_t>(c.rows()) != M) throw CheckpointError("checkpoint: C rows != M");
        detail::put_le(out, static_cast<std::uint32_t>(c.cols()));
    }
    for (const auto& o : st.orbitals) detail::put_le(out, static_cast<std::uint32_t>(o.rows()));
    detail::put_le(out, G);
    detail::put_le(out, std::uint32_t{0});
    detail::put_le(out, st.time);
    detail::put_matrix(out, st.top);
    for (const auto& c : st.coeffs) detail::put_matrix(out, c);
    for (const auto& o : st.orbitals) detail::put_matrix(out, o);
    detail::put_le(out, detail::fnv1a(out.data(), out.size()));
    return out;
}

inline MixtureState decode_checkpoint(const std::vector<unsigned char>& in, CheckpointHeader* header = nullptr) {
    if (in.size() < 56 || std::memcmp(in.data(), kCheckpointMagic, 8) != 0)
        throw CheckpointError("not a checkpoint file (bad magic)");
    std::size_t tail = in.size() - 8;
    const std::uint64_t stored = detail::get_le<std::uint64_t>(in, tail);
    if (stored != detail::fnv1a(in.data(), in.size() - 8)) throw CheckpointError("checkpoint hash mismatch");
    std::size_t pos = 8;
    CheckpointHeader h;
    h.version = detail::get_le<std::uint32_t>(in, pos);
    if (h.version != kCheckpointVersion)
        throw CheckpointError("unsupported checkpoint version " + std::to_string(h.version));
    h.sbs = detail::get_le<std::uint32_t>(in, pos);
    for (auto& k : h.basis) k = detail::get_le<std::uint32_t>(in, pos);
    for (auto& m : h.orbitals) m = detail::get_le<std::uint32_t>(in, pos);
    h.points = detail::get_le<std::uint32_t>(in, pos);
    (void)detail::get_le<std::uint32_t>(in, pos);
    h.time = detail::get_le<double>(in, pos);
    const std::uint64_t count =
        std::uint64_t{h.sbs} * h.sbs + std::uint64_t{h.sbs} * (std::uint64_t{h.basis[0]} + h.basis[1]) +
        std::uint64_t{h.points} * (std::uint64_t{h.orbitals[0]} + h.orbitals[1]);
    if (in.size() != 48 + 16 * count + 8) throw CheckpointError("checkpoint size does not match its header");
    MixtureState st;
    st.time = h.time;
    st.top = detail::get_matrix(in, pos, h.sbs, h.sbs);
    for (std::size_t s = 0; s < kSpecies; ++s) st.coeffs[s] = detail::get_matrix(in, pos, h.sbs, h.basis[s]);
    for (std::size_t s = 0; s < kSpecies; ++s)
        st.orbitals[s] = detail::get_matrix(in, pos, h.orbitals[s], h.points);
    if (header) *header = h;
    return st;
}

inline void write_checkpoint(const std::string& path, const MixtureState& st) {
    const auto bytes = encode_checkpoint(st);
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw CheckpointError("cannot open " + tmp + " for writing");
        f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!f) throw CheckpointError("write to " + tmp + " failed");
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) throw CheckpointError("cannot rename " + tmp + " to " + path);
}

inline MixtureState read_checkpoint(const std::string& path, CheckpointHeader* header = nullptr) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CheckpointError("cannot open checkpoint " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes, header);
}

/// Throws unless the checkpoint dimensions match the model.
inline void check_compatible(const Model& model, const MixtureState& st) {
    auto bad = [](const std::string& what) { throw CheckpointError("checkpoint incompatible with config: " + what); };
    if (st.top.rows() != model.sbs()) bad("M");
    for (int s = 0; s < kSpecies; ++s) {
        const auto i = static_cast<std::size_t>(s);
        if (static_cast<std::size_t>(st.coeffs[i].cols()) != model.basis_size(s)) bad("K_" + std::string(species_name(s)));
        if (st.orbitals[i].rows() != model.orbitals(s)) bad("m_" + std::string(species_name(s)));
        if (static_cast<std::size_t>(st.orbitals[i].cols()) != model.grid().point_count) bad("G");
    }
}

}  // namespace mlx
