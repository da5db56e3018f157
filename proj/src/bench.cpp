#include "mitd/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>

#include "mitd/encoder.hpp"
#include "mitd/errors.hpp"

namespace mitd {

std::vector<ScalingRow> bench_encoder(const ModelConfig& cfg, const std::vector<std::size_t>& lengths, std::size_t runs,
                                      std::uint64_t seed) {
    if (runs == 0) {
        throw ConfigError("bench needs at least one run");
    }
    Rng rng(seed);
    MambaEncoder enc("enc", cfg, rng);
    enc.set_record(false);
    std::vector<Tensor> inputs;
    for (std::size_t t : lengths) {
        Tensor x({t, cfg.d_model});
        init_normal(x, 1.0, rng);
        enc.forward(x);   // warm-up
        inputs.push_back(std::move(x));
    }
    // Round-robin over lengths so a burst of host load hits every length, not one block.
    std::vector<std::vector<double>> ms(lengths.size());
    for (std::size_t r = 0; r < runs; ++r) {
        for (std::size_t i = 0; i < lengths.size(); ++i) {
            const auto t0 = std::chrono::steady_clock::now();
            const Tensor y = enc.forward(inputs[i]);
            const auto t1 = std::chrono::steady_clock::now();
            ms[i].push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
        }
    }
    std::vector<ScalingRow> out;
    for (std::size_t i = 0; i < lengths.size(); ++i) {
        auto& v = ms[i];
        std::sort(v.begin(), v.end());
        const double median = runs % 2 == 1 ? v[runs / 2] : 0.5 * (v[runs / 2 - 1] + v[runs / 2]);
        out.push_back({lengths[i], median});
    }
    return out;
}

void write_scaling_csv(const std::filesystem::path& path, const std::vector<ScalingRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << "T,median_ms\n";
    char buf[64];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%zu,%.6f\n", r.length, r.median_ms);
        out << buf;
    }
}

} // namespace mitd
