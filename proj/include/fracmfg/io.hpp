#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fracmfg/grids.hpp"
#include "fracmfg/subdiffusion_mc.hpp"

namespace fracmfg {

/// Shortest round-trip decimal form; keeps CSV output byte-stable for
/// identical doubles regardless of locale or stream state.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Field CSV layout: header `t, x_0, x_1, ...`; one row per time node.
inline void write_field_csv(const std::string& path, const Field& f, const TimeGrid& tg) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "t";
    for (int j = 0; j < f.cells(); ++j) out << ", x_" << j;
    out << "\n";
    for (int n = 0; n < f.time_nodes(); ++n) {
        out << format_double(tg.node(n));
        for (int j = 0; j < f.cells(); ++j) out << ", " << format_double(f.at(n, j));
        out << "\n";
    }
}

/// Ensemble CSV: particle id, time index, coordinates (wrapped).
template <int D>
void write_ensemble_csv(const std::string& path, const ParticleEnsemble<D>& ens,
                        int stride = 1) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "particle, time_index";
    for (int k = 0; k < D; ++k) out << ", x" << k;
    out << "\n";
    for (int i = 0; i < ens.count; i += stride) {
        for (size_t n = 0; n < ens.positions.size(); ++n) {
            out << i << ", " << n;
            for (int k = 0; k < D; ++k) out << ", " << format_double(ens.positions[n][i][k]);
            out << "\n";
        }
    }
}

inline uint64_t fnv1a64_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path + " for checksum");
    uint64_t h = 0xcbf29ce484222325ULL;
    char buf[65536];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        const std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
        if (!in) break;
    }
    return h;
}

inline std::string hex64(uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

} // namespace fracmfg
