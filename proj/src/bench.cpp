#include "gsvsr/bench.hpp"

#include "gsvsr/synth.hpp"

#include <chrono>
#include <iomanip>

namespace gsvsr {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start)
{
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

} // namespace

std::vector<BenchRecord> run_bench(const BenchOptions& opt)
{
    if (opt.repeats < 3)
        throw ValidationError("bench needs at least 3 repeats");
    for (int n : opt.temporal_scales)
        if (n < 2)
            throw ValidationError("temporal scales must be at least 2");

    const Vec2 motion{3.0, 1.0};
    const TextureOptions texture{.min_period = 6.0, .max_period = 16.0};
    const FrameBuffer f0 = smooth_texture(opt.lr_width, opt.lr_height, {0.0, 0.0}, opt.seed, texture);
    const FrameBuffer f1 = smooth_texture(opt.lr_width, opt.lr_height, motion, opt.seed, texture);
    const FlowField m01 = uniform_flow(opt.lr_width, opt.lr_height, motion);
    const FlowField m10 = uniform_flow(opt.lr_width, opt.lr_height, {-motion.x, -motion.y});

    std::vector<BenchRecord> records;
    for (int n : opt.temporal_scales) {
        BenchRecord rec;
        rec.temporal_scale = n;
        rec.spatial_scale = opt.spatial_scale;
        double shared_sum = 0.0;
        double frame_sum = 0.0;
        int frames = 0;
        for (int r = 0; r < opt.repeats; ++r) {
            auto start = Clock::now();
            const SharedContext ctx = build_shared_context(f0, f1, m01, m10, opt.pipeline);
            const double shared = ms_since(start);
            double frame_total = 0.0;
            for (int k = 1; k < n; ++k) {
                start = Clock::now();
                const FrameBuffer out = render_timestamp(ctx, static_cast<double>(k) / n, opt.spatial_scale);
                frame_total += ms_since(start);
            }
            const auto counts = ctx.counters->snapshot();
            if (counts.at("fit") != 1 || counts.at("flow-load") != 1 || counts.at("window-map") != 1 ||
                counts.at("per-frame-derive") != n - 1 || counts.at("rasterize") != n - 1)
                throw NumericalError("stage counters violate the shared-once structure");
            if (r == 0)
                continue;
            shared_sum += shared;
            frame_sum += frame_total;
            frames += n - 1;
            rec.counters = counts;
        }
        rec.runs = opt.repeats - 1;
        rec.shared_ms = shared_sum / rec.runs;
        rec.per_frame_ms_mean = frame_sum / frames;
        rec.total_ms = rec.shared_ms + (n - 1) * rec.per_frame_ms_mean;
        records.push_back(rec);
    }
    return records;
}

void write_bench_csv(std::ostream& out, const std::vector<BenchRecord>& records)
{
    out << kBenchCsvHeader << '\n';
    out << std::fixed << std::setprecision(3);
    for (const BenchRecord& r : records)
        out << r.temporal_scale << ',' << r.spatial_scale << ',' << r.shared_ms << ',' << r.per_frame_ms_mean << ','
            << r.total_ms << ',' << r.runs << '\n';
}

} // namespace gsvsr
