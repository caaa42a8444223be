#ifndef XFLOW_SNAPSHOT_HPP
#define XFLOW_SNAPSHOT_HPP

// Binary field snapshots, little-endian:
//   "XFLW" | u32 version = 1 | u32 d | u32 N[d] | f64 L[d] | f64 t | f64 values[N^d]
// Values are row-major, axis 0 slowest.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include "xflow/errors.hpp"
#include "xflow/grid.hpp"

namespace xflow {

inline constexpr std::uint32_t kSnapshotVersion = 1;
inline constexpr std::array<char, 4> kSnapshotMagic{'X', 'F', 'L', 'W'};

struct Snapshot {
    Field field;
    double t = 0.0;
};

namespace detail {

template <typename T>
void put_le(std::vector<char>& buf, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::array<char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(bytes.begin(), bytes.end());
    }
    buf.insert(buf.end(), bytes.begin(), bytes.end());
}

class ByteReader {
public:
    ByteReader(const std::vector<char>& data, const std::string& path)
        : data_(data), path_(path) {}

    template <typename T>
    T get(const char* what) {
        if (pos_ + sizeof(T) > data_.size()) {
            throw IoError(path_ + ": corrupt header (truncated while reading " + what + ")");
        }
        std::array<char, sizeof(T)> bytes;
        std::memcpy(bytes.data(), data_.data() + pos_, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) {
            std::reverse(bytes.begin(), bytes.end());
        }
        pos_ += sizeof(T);
        T v;
        std::memcpy(&v, bytes.data(), sizeof(T));
        return v;
    }

    std::size_t remaining() const noexcept { return data_.size() - pos_; }

private:
    const std::vector<char>& data_;
    const std::string& path_;
    std::size_t pos_ = 0;
};

} // namespace detail

inline std::vector<char> encode_snapshot(const Field& f, double t) {
    const Grid& g = f.grid();
    std::vector<char> buf;
    buf.reserve(16 + 12 * static_cast<std::size_t>(g.dim) + 8 * (g.size() + 1));
    buf.insert(buf.end(), kSnapshotMagic.begin(), kSnapshotMagic.end());
    detail::put_le<std::uint32_t>(buf, kSnapshotVersion);
    detail::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(g.dim));
    for (int k = 0; k < g.dim; ++k) detail::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(g.cells));
    for (int k = 0; k < g.dim; ++k) detail::put_le<double>(buf, g.length);
    detail::put_le<double>(buf, t);
    for (const double v : f.values()) detail::put_le<double>(buf, v);
    return buf;
}

inline Snapshot decode_snapshot(const std::vector<char>& data, const std::string& path,
                                const std::optional<Grid>& expected = std::nullopt) {
    if (data.size() < 4 || std::memcmp(data.data(), kSnapshotMagic.data(), 4) != 0) {
        throw IoError(path + ": corrupt header (bad magic)");
    }
    std::vector<char> rest(data.begin() + 4, data.end());
    detail::ByteReader r(rest, path);
    const auto version = r.get<std::uint32_t>("version");
    if (version != kSnapshotVersion) {
        throw IoError(path + ": unsupported snapshot version " + std::to_string(version));
    }
    const auto d = r.get<std::uint32_t>("dimension");
    if (d < 1 || d > 3) throw IoError(path + ": corrupt header (dimension " + std::to_string(d) + ")");
    std::vector<std::uint32_t> n(d);
    for (auto& v : n) v = r.get<std::uint32_t>("cell counts");
    std::vector<double> len(d);
    for (auto& v : len) v = r.get<double>("extents");
    const double t = r.get<double>("time");
    for (std::uint32_t k = 1; k < d; ++k) {
        if (n[k] != n[0] || len[k] != len[0]) {
            throw IoError(path + ": non-square grids are not supported");
        }
    }
    if (d == 3) throw IoError(path + ": three-dimensional snapshots are not supported by the solver");
    Grid grid{static_cast<int>(d), static_cast<int>(n[0]), len[0]};
    try {
        grid.validate();
    } catch (const ConfigError& e) {
        throw IoError(path + ": corrupt header (" + e.what() + ")");
    }
    if (expected && !(*expected == grid)) {
        throw IoError(path + ": shape mismatch with the expected grid");
    }
    if (r.remaining() != 8 * grid.size()) {
        throw IoError(path + ": payload has " + std::to_string(r.remaining()) + " bytes, expected " +
                      std::to_string(8 * grid.size()));
    }
    std::vector<double> values(grid.size());
    for (auto& v : values) v = r.get<double>("values");
    try {
        return Snapshot{Field(grid, std::move(values)), t};
    } catch (const NumericalAbort&) {
        throw IoError(path + ": snapshot holds non-finite values");
    }
}

inline void save_snapshot(const std::string& path, const Field& f, double t) {
    const auto buf = encode_snapshot(f, t);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("write failed for '" + path + "'");
}

inline Snapshot load_snapshot(const std::string& path,
                              const std::optional<Grid>& expected = std::nullopt) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_snapshot(data, path, expected);
}

} // namespace xflow

#endif
