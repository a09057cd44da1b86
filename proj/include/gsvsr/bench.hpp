#pragma once

// Latency benchmark split into the shared stage (built once per input pair)
// and the per-frame stage (derive + rasterize for one timestamp).

#include "gsvsr/pipeline.hpp"

#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace gsvsr {

struct BenchOptions {
    int lr_width = 180;
    int lr_height = 120;
    double spatial_scale = 4.0;
    std::vector<int> temporal_scales{2, 4, 8, 16, 32};
    /// The first repeat is a warm-up and is not reported.
    int repeats = 3;
    InterpolateOptions pipeline{.fit = {.iterations = 20, .learning_rate = 0.1}, .refine_iterations = 10};
    std::uint64_t seed = 1;
};

struct BenchRecord {
    int temporal_scale = 0;
    double spatial_scale = 0.0;
    double shared_ms = 0.0;
    double per_frame_ms_mean = 0.0;
    double total_ms = 0.0;
    int runs = 0;
    /// Stage counters of the last timed run.
    std::map<std::string, int> counters;
};

/// For temporal scale N, renders the N - 1 intermediate timestamps k / N.
/// Throws NumericalError if a shared stage ran more than once.
std::vector<BenchRecord> run_bench(const BenchOptions& opt);

inline constexpr const char* kBenchCsvHeader = "temporal_scale,spatial_scale,shared_ms,per_frame_ms_mean,total_ms,runs";
void write_bench_csv(std::ostream& out, const std::vector<BenchRecord>& records);

} // namespace gsvsr
