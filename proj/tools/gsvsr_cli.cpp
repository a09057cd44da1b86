// gsvsr: fit, render and interpolate Gaussian kernel fields.
//
// Exit codes: 0 success, 2 validation or usage error, 3 format or I/O error,
// 4 numerical failure (including an oracle mismatch).

#include "gsvsr/bench.hpp"
#include "gsvsr/fit.hpp"
#include "gsvsr/io.hpp"
#include "gsvsr/metrics.hpp"
#include "gsvsr/pipeline.hpp"
#include "gsvsr/raster.hpp"
#include "gsvsr/synth.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

namespace fs = std::filesystem;
using namespace gsvsr;

namespace {

struct Common {
    double scale = 4.0;
    std::string normalization = "paper-det";
    int density = 4;
    std::string flow_convention = "consistent";
    bool aow = true;
    std::string weights;
    std::string bank;
    std::uint64_t seed = 0;
    int iterations = 200;
    double learning_rate = 0.1;
};

Normalization parse_normalization(const std::string& s)
{
    return s == "sqrt-det" ? Normalization::SqrtDet : Normalization::PaperDet;
}

Density parse_density(int d)
{
    return d == 1 ? Density::OnePerPixel : Density::OnePerFourPixels;
}

bool is_ppm(const fs::path& p)
{
    return p.extension() == ".ppm";
}

void save_frame(const FrameBuffer& f, const fs::path& p)
{
    if (is_ppm(p))
        save_ppm(f, p);
    else
        save_frm(f, p);
}

std::vector<double> parse_timestamps(const std::string& s)
{
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            throw ValidationError("bad timestamp \"" + item + "\"");
        }
        if (used != item.size())
            throw ValidationError("bad timestamp \"" + item + "\"");
        out.push_back(v);
    }
    if (out.empty())
        throw ValidationError("no timestamps given");
    return out;
}

InterpolateOptions pipeline_options(const Common& c)
{
    InterpolateOptions opt;
    opt.density = parse_density(c.density);
    opt.normalization = parse_normalization(c.normalization);
    opt.convention = c.flow_convention == "paper" ? FlowConvention::PaperLiteral : FlowConvention::Consistent;
    opt.adaptive_window = c.aow;
    opt.fit.iterations = c.iterations;
    opt.fit.learning_rate = c.learning_rate;
    if (!c.weights.empty())
        opt.weights = load_weights(c.weights);
    if (!c.bank.empty())
        opt.weights.bank = load_bank(c.bank);
    return opt;
}

int oracle_check(std::uint64_t seed, int count, std::ostream& out)
{
    std::mt19937_64 rng(seed);
    bool ok = true;

    double worst_tiled = 0.0;
    for (int i = 0; i < count; ++i) {
        const GaussianField f = random_field(8, 8, Density::OnePerPixel, rng);
        RenderConfig rc;
        rc.scale = 2.0;
        rc.truncation_radius = 6.0;
        rc.clamp_output = false;
        const FrameBuffer a = render_tiled(f, rc);
        const FrameBuffer b = render_dense(f, rc);
        for (std::size_t p = 0; p < a.pixels().size(); ++p)
            for (int c = 0; c < 3; ++c)
                worst_tiled = std::max(worst_tiled, std::abs(a.pixels()[p][c] - b.pixels()[p][c]));
    }
    const bool tiled_ok = worst_tiled <= 1e-5;
    ok &= tiled_ok;
    out << (tiled_ok ? "PASS" : "FAIL") << " tiled-vs-dense: max |diff| = " << worst_tiled << " over " << count
        << " fields\n";

    double worst_grad = 0.0;
    int checked = 0, excluded = 0;
    FitConfig cfg;
    cfg.truncation_radius = 30.0;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < count; ++i) {
        const GaussianField f = random_field(4, 4, Density::OnePerPixel, rng, {.color_min = 0.05, .color_max = 0.95});
        FrameBuffer target(4, 4);
        for (Rgb& p : target.pixels())
            p = {unit(rng), unit(rng), unit(rng)};
        const GradientCheck g = gradient_check(f, target, cfg);
        worst_grad = std::max(worst_grad, g.max_rel_error);
        checked += g.checked;
        excluded += g.excluded;
    }
    const bool grad_ok = worst_grad <= 1e-3;
    ok &= grad_ok;
    out << (grad_ok ? "PASS" : "FAIL") << " gradient-vs-finite-difference: max rel error = " << worst_grad << " ("
        << checked << " checked, " << excluded << " excluded at kinks)\n";
    return ok ? 0 : 4;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Gaussian kernel field video engine"};
    app.require_subcommand(1);
    Common c;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--normalization", c.normalization, "kernel normalization")
            ->check(CLI::IsMember({"paper-det", "sqrt-det"}));
        sub->add_option("--density", c.density, "LR pixels per kernel")->check(CLI::IsMember({1, 4}));
        sub->add_option("--seed", c.seed, "random seed");
        sub->add_option("--learning-rate", c.learning_rate, "Adam step size for fitting");
    };

    // fit
    auto* fit = app.add_subcommand("fit", "fit a kernel field to a frame");
    std::string fit_in, fit_out;
    fit->add_option("--input", fit_in, "frame (.ppm or .frm)")->required();
    fit->add_option("--output", fit_out, "field (.gsf)")->required();
    fit->add_option("--iterations", c.iterations, "Adam iterations");
    add_common(fit);

    // render
    auto* render = app.add_subcommand("render", "rasterize a field at a spatial scale");
    std::string render_in, render_out;
    double render_radius = 3.0;
    bool no_clamp = false;
    render->add_option("--field", render_in, "field (.gsf)")->required();
    render->add_option("--output", render_out, "frame (.ppm or .frm)")->required();
    render->add_option("--scale", c.scale, "spatial scale");
    render->add_option("--truncation", render_radius, "Mahalanobis truncation radius");
    render->add_flag("--no-clamp", no_clamp, "keep values outside [0, 1]");
    add_common(render);

    // interpolate
    auto* interp = app.add_subcommand("interpolate", "render intermediate frames between two endpoints");
    std::string f0_path, f1_path, flow01_path, flow10_path, out_dir, timestamps = "0.5", format = "ppm";
    interp->add_option("--frame0", f0_path)->required();
    interp->add_option("--frame1", f1_path)->required();
    interp->add_option("--flow01", flow01_path, "flow from frame 0 to frame 1 (.flo)")->required();
    interp->add_option("--flow10", flow10_path, "flow from frame 1 to frame 0 (.flo)")->required();
    interp->add_option("--timestamps", timestamps, "comma-separated, sorted, in [0, 1]");
    interp->add_option("--scale", c.scale, "spatial scale");
    interp->add_option("--output-dir", out_dir)->required();
    interp->add_option("--format", format)->check(CLI::IsMember({"ppm", "frm"}));
    interp->add_option("--flow-convention", c.flow_convention)->check(CLI::IsMember({"consistent", "paper"}));
    interp->add_flag("--aow,!--no-aow", c.aow, "motion-adaptive offset window");
    interp->add_option("--weights", c.weights, "weights document (.json)");
    interp->add_option("--bank", c.bank, "covariance bank document (.json)");
    interp->add_option("--iterations", c.iterations, "endpoint fit iterations");
    add_common(interp);

    // corr
    auto* corr = app.add_subcommand("corr", "temporal stability report (CSV)");
    std::vector<std::string> corr_frames, corr_fields;
    std::string corr_out;
    corr->add_option("--frames", corr_frames, "frame sequence")->required();
    corr->add_option("--fields", corr_fields, "fitted fields; fitted on the fly when absent");
    corr->add_option("--output", corr_out, "CSV path (default stdout)");
    corr->add_option("--iterations", c.iterations, "fit iterations");
    add_common(corr);

    // bench
    auto* bench = app.add_subcommand("bench", "latency of shared and per-frame stages (CSV)");
    BenchOptions bopt;
    std::string bench_out;
    std::vector<int> tscales = bopt.temporal_scales;
    bench->add_option("--width", bopt.lr_width);
    bench->add_option("--height", bopt.lr_height);
    bench->add_option("--scale", bopt.spatial_scale);
    bench->add_option("--temporal-scales", tscales)->delimiter(',');
    bench->add_option("--repeats", bopt.repeats);
    bench->add_option("--output", bench_out, "CSV path (default stdout)");
    add_common(bench);

    // oracle-check
    auto* oracle = app.add_subcommand("oracle-check", "tiled-vs-dense and gradient-vs-finite-difference suites");
    int oracle_count = 20;
    oracle->add_option("--count", oracle_count, "random fields per suite");
    add_common(oracle);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*fit) {
            const FrameBuffer target = load_frame(fit_in);
            FitConfig cfg;
            cfg.iterations = c.iterations;
            cfg.learning_rate = c.learning_rate;
            cfg.normalization = parse_normalization(c.normalization);
            const FitResult r = fit_frame(target, parse_density(c.density), cfg);
            save_gsf(r.field, fit_out);
            const LossValue l = loss(r.field, target, cfg);
            std::cout << "l1 " << l.l1 << " freq " << l.freq << " psnr_y "
                      << psnr_y(render_for_fit(r.field, cfg), target) << "\n";
        } else if (*render) {
            const GaussianField f = load_gsf(render_in);
            RenderConfig rc;
            rc.scale = c.scale;
            rc.truncation_radius = render_radius;
            rc.normalization = parse_normalization(c.normalization);
            rc.clamp_output = !no_clamp;
            FrameBuffer out = render_tiled(f, rc);
            require_finite(out);
            save_frame(out, render_out);
        } else if (*interp) {
            const InterpolateOptions opt = pipeline_options(c);
            const FrameBuffer f0 = load_frame(f0_path);
            const FrameBuffer f1 = load_frame(f1_path);
            const FlowField m01 = load_flo(flow01_path);
            const FlowField m10 = load_flo(flow10_path);
            const auto ts = parse_timestamps(timestamps);
            SharedContext ctx;
            const auto frames = interpolate(f0, f1, m01, m10, ts, c.scale, opt, &ctx);
            fs::create_directories(out_dir);
            for (std::size_t i = 0; i < frames.size(); ++i) {
                char name[64];
                std::snprintf(name, sizeof name, "frame_%03zu.%s", i, format.c_str());
                save_frame(frames[i], fs::path(out_dir) / name);
            }
            for (const auto& [stage, n] : ctx.counters->snapshot())
                std::cout << stage << " " << n << "\n";
        } else if (*corr) {
            std::vector<FrameBuffer> frames;
            for (const auto& p : corr_frames)
                frames.push_back(load_frame(p));
            std::vector<GaussianField> fields;
            if (corr_fields.empty()) {
                FitConfig cfg;
                cfg.iterations = c.iterations;
                cfg.learning_rate = c.learning_rate;
                cfg.normalization = parse_normalization(c.normalization);
                for (const FrameBuffer& f : frames)
                    fields.push_back(fit_frame(f, parse_density(c.density), cfg).field);
            } else {
                for (const auto& p : corr_fields)
                    fields.push_back(load_gsf(p));
            }
            const StabilityReport r = stability_report(frames, fields);
            std::ofstream file;
            if (!corr_out.empty()) {
                file.open(corr_out);
                if (!file)
                    throw IoError("cannot open " + corr_out);
            }
            std::ostream& out = corr_out.empty() ? std::cout : file;
            out << "gap,pixel_pearson,pixel_cosine,cov_pearson,cov_cosine\n" << std::setprecision(9);
            for (std::size_t g = 0; g < r.gaps.size(); ++g)
                out << r.gaps[g] << ',' << r.pixel_pearson[g] << ',' << r.pixel_cosine[g] << ',' << r.cov_pearson[g]
                    << ',' << r.cov_cosine[g] << '\n';
        } else if (*bench) {
            bopt.temporal_scales = tscales;
            bopt.seed = c.seed;
            bopt.pipeline.density = parse_density(c.density);
            bopt.pipeline.normalization = parse_normalization(c.normalization);
            const auto records = run_bench(bopt);
            if (bench_out.empty()) {
                write_bench_csv(std::cout, records);
            } else {
                std::ofstream file(bench_out);
                if (!file)
                    throw IoError("cannot open " + bench_out);
                write_bench_csv(file, records);
            }
        } else if (*oracle) {
            return oracle_check(c.seed, oracle_count, std::cout);
        }
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return 3;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 3;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 3;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
