// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include "gsvsr/bench.hpp"
#include "gsvsr/cpb.hpp"
#include "gsvsr/fit.hpp"
#include "gsvsr/io.hpp"
#include "gsvsr/metrics.hpp"
#include "gsvsr/motion.hpp"
#include "gsvsr/pipeline.hpp"
#include "gsvsr/raster.hpp"
#include "gsvsr/synth.hpp"

#include "test_support.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>

using namespace gsvsr;
using namespace gsvsr::testing;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double max_abs_diff(const FrameBuffer& a, const FrameBuffer& b)
{
    double m = 0.0;
    for (std::size_t p = 0; p < a.pixels().size(); ++p)
        for (int c = 0; c < 3; ++c)
            m = std::max(m, std::abs(a.pixels()[p][c] - b.pixels()[p][c]));
    return m;
}

// ---------------------------------------------------------------------------

Outcome rasterizer_equivalence()
{
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(101);
    const double scales[] = {1.0, 2.0, 2.5, 4.0};
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const Density d = i % 2 ? Density::OnePerFourPixels : Density::OnePerPixel;
        const int lr = d == Density::OnePerPixel ? 8 : 16;
        const GaussianField f =
            random_field(lr, lr, d, rng, {.sigma_min = 0.3, .sigma_max = 3.0, .rho_max = 0.9});
        RenderConfig cfg;
        cfg.scale = scales[i % 4];
        cfg.truncation_radius = 6.0;
        cfg.clamp_output = false;
        worst = std::max(worst, max_abs_diff(render_tiled(f, cfg), render_dense(f, cfg)));
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-5 && secs < 30.0, fmt("max |tiled - dense| = %.3g over 100 fields, %.1f s", worst, secs)};
}

Outcome gradient_correctness()
{
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(102);
    FitConfig cfg;
    // Covers the whole 4x4 canvas, so no kernel is cut off by truncation.
    cfg.truncation_radius = 30.0;
    double worst = 0.0;
    int checked = 0, excluded = 0;
    bool all_checked = true;
    for (int i = 0; i < 20; ++i) {
        const GaussianField f = random_field(4, 4, Density::OnePerPixel, rng, {.color_min = 0.05, .color_max = 0.95});
        const FrameBuffer target = random_frame(rng, 4, 4);
        const GradientCheck g = gradient_check(f, target, cfg, 1e-4, 1e-6);
        worst = std::max(worst, g.max_rel_error);
        checked += g.checked;
        excluded += g.excluded;
        all_checked = all_checked && g.checked > 0;
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-3 && all_checked && secs < 60.0,
            fmt("max rel error %.3g, %d parameters checked, %d near a kink, %.1f s", worst, checked, excluded, secs)};
}

Outcome exact_recovery()
{
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(1);
    const GaussianField truth = random_field(16, 16, Density::OnePerPixel, rng,
                                             {.offset_min = 0.2, .offset_max = 0.8, .sigma_min = 0.5,
                                              .sigma_max = 0.9, .rho_max = 0.3, .color_min = 0.05, .color_max = 0.45});
    FitConfig cfg;
    cfg.iterations = 500;
    cfg.learning_rate = 0.1;
    const FrameBuffer target = render_for_fit(truth, cfg);
    const FitResult r = fit_frame(target, Density::OnePerPixel, cfg);
    const double p = psnr_y(render_for_fit(r.field, cfg), target);
    const double secs = seconds_since(t0);
    return {p >= 50.0 && secs < 120.0, fmt("PSNR %.2f dB after 500 iterations, %.1f s", p, secs)};
}

Outcome bank_anchoring()
{
    const auto t0 = std::chrono::steady_clock::now();
    const CpbBank bank = default_bank();
    CovParams lo = bank.entries[0], hi = bank.entries[0];
    for (const CovParams& q : bank.entries) {
        lo = {std::min(lo.sigma_x, q.sigma_x), std::min(lo.sigma_y, q.sigma_y), std::min(lo.rho, q.rho)};
        hi = {std::max(hi.sigma_x, q.sigma_x), std::max(hi.sigma_y, q.sigma_y), std::max(hi.rho, q.rho)};
    }
    std::mt19937_64 rng(104);
    const double mags[] = {0.1, 1.0, 10.0, 100.0, 1e6};
    double worst_sum = 0.0;
    int out_of_bounds = 0;
    for (int i = 0; i < 1000; ++i) {
        const LogitField e = random_logits(rng, 4, 4, bank.size(), mags[i % 5]);
        const CovField c = resample(e, bank);
        for (const CovParams& p : c.cells)
            if (p.sigma_x < lo.sigma_x || p.sigma_x > hi.sigma_x || p.sigma_y < lo.sigma_y ||
                p.sigma_y > hi.sigma_y || p.rho < lo.rho || p.rho > hi.rho)
                ++out_of_bounds;
        for (int iy = 0; iy < 4; ++iy)
            for (int ix = 0; ix < 4; ++ix) {
                const std::vector<double> w = softmax(e.cell(ix, iy));
                double s = 0.0;
                for (double v : w)
                    s += v;
                worst_sum = std::max(worst_sum, std::abs(s - 1.0));
            }
    }
    const double secs = seconds_since(t0);
    return {out_of_bounds == 0 && worst_sum <= 1e-9 && secs < 10.0,
            fmt("%d cells outside bank bounds, max |sum w - 1| = %.3g, %.1f s", out_of_bounds, worst_sum, secs)};
}

Outcome motion_endpoints()
{
    std::mt19937_64 rng(105);
    int mismatches = 0;
    for (int i = 0; i < 200; ++i) {
        const int w = uniform_int(rng, 1, 12), h = uniform_int(rng, 1, 12), c = uniform_int(rng, 1, 8);
        const FeatureMap f0 = random_features(rng, w, h, c), f1 = random_features(rng, w, h, c);
        const FlowField m01 = random_flow(rng, w, h, 40.0), m10 = random_flow(rng, w, h, 40.0);
        const auto [a0, a1] = scale_flows(m01, m10, 0.0);
        const auto [b0, b1] = scale_flows(m01, m10, 1.0);
        mismatches += backward_warp(f0, a0) != f0;
        mismatches += backward_warp(f1, b1) != f1;

        const FeatureMap zero(w, h, c);
        mismatches += fuse_features(f0, f1, FeatureMap(w, h, 1, 1.0), zero) != f0;
        mismatches += fuse_features(f0, f1, FeatureMap(w, h, 1, 0.0), zero) != f1;
    }
    return {mismatches == 0, fmt("%d of 800 endpoint identities not bit-exact", mismatches)};
}

Outcome window_range()
{
    std::mt19937_64 rng(106);
    const WindowSet s;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    auto scan = [&](const LogitField& l) {
        for (double v : compute_window_map(l, s).values) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    };
    const double mags[] = {1e-3, 1.0, 30.0, 1e4, 1e300};
    for (int i = 0; i < 500; ++i)
        scan(random_logits(rng, 5, 4, s.size(), mags[i % 5]));
    const double big = std::numeric_limits<double>::max();
    LogitField edge(2, 2, s.size(), 0.0);
    edge.cell(0, 0)[0] = big;
    edge.cell(1, 0)[9] = big;
    edge.cell(0, 1)[3] = -big;
    for (double& v : edge.cell(1, 1))
        v = -big;
    scan(edge);
    const bool range_ok = lo >= 1.0 && hi <= 10.0;

    // All-ones window: offsets pass through unchanged, so they stay in [0, 1],
    // including through the full derivation with the window disabled.
    bool ones_ok = true;
    std::vector<Vec2> offs(20);
    for (int i = 0; i < 200; ++i) {
        for (Vec2& o : offs)
            o = {uniform(rng, 0, 1), uniform(rng, 0, 1)};
        for (const Vec2& o : apply_window(offs, WindowMap::constant(5, 4, 1.0)))
            ones_ok = ones_ok && o.x >= 0.0 && o.x <= 1.0 && o.y >= 0.0 && o.y <= 1.0;
    }
    const FrameBuffer f0 = gaussian_blob(16, 8, {4, 4}, 1.5, {1, 1, 1});
    const FrameBuffer f1 = gaussian_blob(16, 8, {10, 4}, 1.5, {1, 1, 1});
    InterpolateOptions opt;
    opt.adaptive_window = false;
    opt.fit.iterations = 20;
    opt.refine_iterations = 10;
    const SharedContext ctx = build_shared_context(f0, f1, uniform_flow(16, 8, {6, 0}), uniform_flow(16, 8, {-6, 0}), opt);
    for (double t : {0.0, 0.25, 0.5, 0.75, 1.0})
        for (const Gaussian2D& g : derive_field(ctx, t).gaussians())
            ones_ok = ones_ok && g.offset.x >= 0.0 && g.offset.x <= 1.0 && g.offset.y >= 0.0 && g.offset.y <= 1.0;
    return {range_ok && ones_ok,
            fmt("window values in [%.6g, %.6g]; all-ones offsets in [0, 1]: %s", lo, hi, ones_ok ? "yes" : "no")};
}

Vec2 bright_centroid(const FrameBuffer& f)
{
    double peak = 0.0;
    for (const Rgb& p : f.pixels())
        peak = std::max(peak, luma(p));
    double sx = 0.0, sy = 0.0, sw = 0.0;
    for (int y = 0; y < f.height(); ++y)
        for (int x = 0; x < f.width(); ++x) {
            const double l = luma(f.at(x, y));
            if (l > 0.1 * peak) {
                sx += l * (x + 0.5);
                sy += l * (y + 0.5);
                sw += l;
            }
        }
    return {sx / sw, sy / sw};
}

Outcome translation_tracking()
{
    const int w = 40, h = 24;
    const double s = 4.0;
    const Vec2 c0{12, 12};
    const FrameBuffer f0 = gaussian_blob(w, h, c0, 2.0, {1, 1, 1});
    const FrameBuffer f1 = gaussian_blob(w, h, {c0.x + 8, c0.y}, 2.0, {1, 1, 1});
    const FlowField m01 = uniform_flow(w, h, {8, 0}), m10 = uniform_flow(w, h, {-8, 0});
    const Vec2 expect{s * (c0.x + 4), s * c0.y};

    bool on_ok = true, off_fails = true;
    std::string detail;
    for (Density d : {Density::OnePerPixel, Density::OnePerFourPixels})
        for (bool aow : {true, false}) {
            InterpolateOptions opt;
            opt.density = d;
            opt.adaptive_window = aow;
            const Vec2 c = bright_centroid(interpolate(f0, f1, m01, m10, {0.5}, s, opt)[0]);
            const bool within = std::abs(c.x - expect.x) <= 1.0 && std::abs(c.y - expect.y) <= 1.0;
            (aow ? on_ok : off_fails) = (aow ? on_ok : off_fails) && (aow ? within : !within);
            detail += fmt("%s%s AOW %s (%.2f, %.2f)", detail.empty() ? "" : "; ",
                          d == Density::OnePerPixel ? "1:1" : "1:4", aow ? "on" : "off", c.x, c.y);
        }
    return {on_ok && off_fails, fmt("midpoint (%.0f, %.0f); ", expect.x, expect.y) + detail};
}

Outcome stability()
{
    const auto t0 = std::chrono::steady_clock::now();
    const TextureOptions tex{.min_period = 6.0, .max_period = 16.0, .waves = 24, .contrast = 0.8};
    InterpolateOptions opt;
    opt.density = Density::OnePerPixel;
    opt.fit.iterations = 200;
    opt.refine_iterations = 100;
    const CpbBank bank = default_bank();
    std::vector<FrameBuffer> frames;
    std::vector<GaussianField> fields;
    for (int k = 0; k < 8; ++k) {
        frames.push_back(smooth_texture(32, 32, {3.1 * k, 1.7 * k}, 1, tex));
        fields.push_back(fit_endpoint(frames.back(), bank, opt));
    }
    const StabilityReport r = stability_report(frames, fields);
    bool ok = true;
    std::string detail;
    for (std::size_t g = 2; g < r.gaps.size(); ++g) {
        ok = ok && r.cov_pearson[g] > r.pixel_pearson[g] && r.cov_cosine[g] > r.pixel_cosine[g];
        detail += fmt(" g%d cov %.3f/%.3f px %.3f/%.3f;", r.gaps[g], r.cov_pearson[g], r.cov_cosine[g],
                      r.pixel_pearson[g], r.pixel_cosine[g]);
    }
    const double secs = seconds_since(t0);
    return {ok && secs < 300.0, "pearson/cosine" + detail + fmt(" %.1f s", secs)};
}

Outcome latency_structure()
{
    const std::vector<BenchRecord> recs = run_bench(BenchOptions{});
    const auto csv = std::filesystem::temp_directory_path() / "gsvsr_acceptance_bench.csv";
    std::ofstream out(csv);
    write_bench_csv(out, recs);

    bool counters_ok = true;
    double first = 0.0, last = 0.0;
    for (const BenchRecord& r : recs) {
        const int n = r.temporal_scale - 1;
        const std::map<std::string, int> expect{
            {"fit", 1}, {"flow-load", 1}, {"window-map", 1}, {"per-frame-derive", n}, {"rasterize", n}};
        counters_ok = counters_ok && r.counters == expect;
        if (r.temporal_scale == 2)
            first = r.per_frame_ms_mean;
        if (r.temporal_scale == 32)
            last = r.per_frame_ms_mean;
    }
    const double ratio = last / first;
    return {counters_ok && recs.size() == 5 && ratio <= 2.0,
            fmt("shared counters all 1: %s; per-frame mean x2 %.2f ms, x32 %.2f ms, ratio %.2f; CSV at %s",
                counters_ok ? "yes" : "no", first, last, ratio, csv.c_str())};
}

WeightsFile random_f32_weights(std::mt19937_64& rng)
{
    auto q = [](ConvWeights w) {
        for (double& v : w.weights)
            v = static_cast<float>(v);
        for (double& v : w.bias)
            v = static_cast<float>(v);
        return w;
    };
    WeightsFile w;
    const int k = uniform_int(rng, 2, 6);
    CpbBank bank;
    for (int i = 0; i < k; ++i)
        bank.entries.push_back({static_cast<float>(0.5 + i), static_cast<float>(uniform(rng, 0.3, 3.0)),
                                static_cast<float>(uniform(rng, -0.6, 0.6))});
    w.bank = bank;
    w.fuser = FuserWeights{q(random_conv(rng, k, 7, 3))};
    const int c = uniform_int(rng, 1, 4);
    w.fusion_head = FusionHeadWeights{q(random_conv(rng, 1 + c, 2 * c, 3))};
    w.decoder = DecoderWeights{q(random_conv(rng, 5, c, 1))};
    w.window_logits = random_logits(rng, uniform_int(rng, 1, 4), uniform_int(rng, 1, 4), 10, 3.0);
    return w;
}

bool weights_equal(const WeightsFile& a, const WeightsFile& b)
{
    return a.bank == b.bank && a.fuser == b.fuser && a.fusion_head == b.fusion_head && a.decoder == b.decoder &&
           a.window_logits == b.window_logits;
}

template <class Fn>
bool format_error_at(Fn&& fn, std::size_t offset)
{
    try {
        fn();
    } catch (const FormatError& e) {
        return e.offset() == offset;
    }
    return false;
}

template <class Fn>
bool throws_format_error(Fn&& fn)
{
    try {
        fn();
    } catch (const FormatError&) {
        return true;
    }
    return false;
}

Outcome format_round_trips()
{
    const auto dir = scratch_dir("acceptance_io");
    std::mt19937_64 rng(110);
    int failures = 0;
    for (int i = 0; i < 100; ++i) {
        const GaussianField g = random_f32_field(rng, uniform_int(rng, 1, 12), uniform_int(rng, 1, 12),
                                                 i % 2 ? Density::OnePerFourPixels : Density::OnePerPixel);
        save_gsf(g, dir / "a.gsf");
        failures += load_gsf(dir / "a.gsf") != g || read_file(dir / "a.gsf") != encode_gsf(g);

        FlowField m(uniform_int(rng, 1, 12), uniform_int(rng, 1, 12));
        for (Vec2& v : m.vectors())
            v = {static_cast<float>(uniform(rng, -30, 30)), static_cast<float>(uniform(rng, -30, 30))};
        save_flo(m, dir / "a.flo");
        failures += load_flo(dir / "a.flo") != m;

        FrameBuffer f(uniform_int(rng, 1, 12), uniform_int(rng, 1, 12));
        for (Rgb& p : f.pixels())
            for (double& c : p)
                c = static_cast<float>(uniform(rng, -0.5, 1.5));
        save_frm(f, dir / "a.frm");
        failures += load_frm(dir / "a.frm") != f;

        const WeightsFile w = random_f32_weights(rng);
        save_weights(w, dir / "w.json");
        const WeightsFile back = load_weights(dir / "w.json");
        failures += !weights_equal(back, w) || encode_weights(back) != encode_weights(w);
    }

    // Corrupted magic and truncation, in the library and through the tool.
    const FrameBuffer f0 = smooth_texture(8, 6, {0, 0}, 3), f1 = smooth_texture(8, 6, {1, 0}, 3);
    const GaussianField g = random_f32_field(rng, 8, 6, Density::OnePerPixel);
    save_gsf(g, dir / "ok.gsf");
    save_frm(f0, dir / "f0.frm");
    save_frm(f1, dir / "f1.frm");
    save_flo(FlowField(8, 6, {1, 0}), dir / "m01.flo");
    save_flo(FlowField(8, 6, {-1, 0}), dir / "m10.flo");
    save_weights(WeightsFile{.bank = default_bank()}, dir / "w.json");

    int lib_bad = 0, cli_bad = 0;
    const std::string d = dir.string();
    auto corrupt = [&](const std::string& name, std::size_t keep) {
        Bytes b = read_file(dir / name);
        Bytes magic = b;
        magic[0] ^= 0x5A;
        write_file(dir / ("magic_" + name), magic);
        b.resize(keep);
        write_file(dir / ("short_" + name), b);
    };
    corrupt("ok.gsf", 30);
    corrupt("f0.frm", 20);
    corrupt("m01.flo", 16);
    corrupt("w.json", 40);

    lib_bad += !format_error_at([&] { load_gsf(dir / "magic_ok.gsf"); }, 0);
    lib_bad += !throws_format_error([&] { load_gsf(dir / "short_ok.gsf"); });
    lib_bad += !format_error_at([&] { load_frm(dir / "magic_f0.frm"); }, 0);
    lib_bad += !throws_format_error([&] { load_frm(dir / "short_f0.frm"); });
    lib_bad += !format_error_at([&] { load_flo(dir / "magic_m01.flo"); }, 0);
    lib_bad += !throws_format_error([&] { load_flo(dir / "short_m01.flo"); });
    lib_bad += !throws_format_error([&] { load_weights(dir / "magic_w.json"); });
    lib_bad += !throws_format_error([&] { load_weights(dir / "short_w.json"); });

    auto interp = [&](const std::string& frame0, const std::string& flow01, const std::string& weights) {
        std::string args = "interpolate --frame0 " + d + "/" + frame0 + " --frame1 " + d + "/f1.frm --flow01 " + d +
                           "/" + flow01 + " --flow10 " + d + "/m10.flo --timestamps 0.5 --iterations 2 --output-dir " +
                           d + "/out";
        if (!weights.empty())
            args += " --weights " + d + "/" + weights;
        return run_cli(args);
    };
    for (const char* p : {"magic_", "short_"}) {
        const std::string pre = p;
        cli_bad += run_cli("render --field " + d + "/" + pre + "ok.gsf --output " + d + "/r.ppm") != 3;
        cli_bad += run_cli("fit --input " + d + "/" + pre + "f0.frm --output " + d + "/x.gsf --iterations 2") != 3;
        cli_bad += interp("f0.frm", pre + "m01.flo", "") != 3;
        cli_bad += interp("f0.frm", "m01.flo", pre + "w.json") != 3;
    }
    const int sane = interp("f0.frm", "m01.flo", "w.json");

    return {failures == 0 && lib_bad == 0 && cli_bad == 0 && sane == 0,
            fmt("%d of 400 round trips differ; %d of 8 library and %d of 8 tool corruption cases misreported; "
                "clean run exit %d",
                failures, lib_bad, cli_bad, sane)};
}

Outcome metric_fixtures()
{
    std::mt19937_64 rng(111);
    const FrameBuffer a = random_frame(rng, 24, 16, 0.2, 0.7);
    auto shifted = [&](double e) {
        FrameBuffer b = a;
        for (Rgb& p : b.pixels())
            for (double& c : p)
                c += e;
        return b;
    };
    const double p20 = psnr_y(a, shifted(0.1)), p40 = psnr_y(a, shifted(0.01));
    const auto [x, y] = load_ssim_pair();
    const double same = ssim_y(x, x), pair = ssim_y(x, y);
    const bool ok = std::abs(p20 - 20.0) <= 1e-9 && std::abs(p40 - 40.0) <= 1e-9 && std::abs(same - 1.0) <= 1e-12 &&
                    std::abs(pair - kSsimFixtureReference) <= 1e-6;
    return {ok, fmt("psnr %.12f / %.12f dB; ssim identical %.15f; fixture %.12f vs %.12f", p20, p40, same, pair,
                    kSsimFixtureReference)};
}

} // namespace

int main()
{
    const std::pair<const char*, std::function<Outcome()>> criteria[] = {
        {"rasterizer tiled vs dense", rasterizer_equivalence},
        {"analytic gradients vs finite differences", gradient_correctness},
        {"exact recovery", exact_recovery},
        {"covariance bank anchoring", bank_anchoring},
        {"motion endpoint identities", motion_endpoints},
        {"offset window range", window_range},
        {"translation tracking", translation_tracking},
        {"covariance vs pixel stability", stability},
        {"near-constant per-frame latency", latency_structure},
        {"format round trips and error codes", format_round_trips},
        {"metric fixtures", metric_fixtures},
    };
    int failed = 0;
    int n = 0;
    for (const auto& [name, run] : criteria) {
        ++n;
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " " << n << " " << name << ": " << o.detail << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
