#include "gsvsr/io.hpp"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

namespace gsvsr {

namespace {

constexpr float kFloTag = 202021.25f;

class Writer {
public:
    void bytes(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u32(std::uint32_t v)
    {
        for (int i = 0; i < 4; ++i)
            out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
    Bytes take() { return std::move(out_); }

private:
    Bytes out_;
};

class Reader {
public:
    Reader(std::span<const std::uint8_t> data, const char* what) : data_(data), what_(what) {}

    std::size_t offset() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return data_.size() - pos_; }

    void magic(std::string_view m)
    {
        need(m.size(), "magic");
        if (std::memcmp(data_.data() + pos_, m.data(), m.size()) != 0)
            fail(std::string("bad magic, expected \"") + std::string(m) + "\"");
        pos_ += m.size();
    }
    std::uint8_t u8()
    {
        need(1, "u8");
        return data_[pos_++];
    }
    std::uint32_t u32()
    {
        need(4, "u32");
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    float raw_f32() { return std::bit_cast<float>(u32()); }
    double f32()
    {
        const std::size_t at = pos_;
        const float v = raw_f32();
        if (!std::isfinite(v))
            throw FormatError(std::string(what_) + ": non-finite value", at);
        return v;
    }
    void end()
    {
        if (pos_ != data_.size())
            fail(std::to_string(data_.size() - pos_) + " trailing bytes");
    }
    [[noreturn]] void fail(const std::string& msg) const { throw FormatError(std::string(what_) + ": " + msg, pos_); }

    void need(std::size_t n, const char* field) const
    {
        if (remaining() < n)
            throw FormatError(std::string(what_) + ": truncated while reading " + field, data_.size());
    }

private:
    std::span<const std::uint8_t> data_;
    const char* what_;
    std::size_t pos_ = 0;
};

int positive_dim(std::uint32_t v, Reader& r, const char* name)
{
    if (v == 0 || v > (1u << 16))
        r.fail(std::string(name) + " out of range: " + std::to_string(v));
    return static_cast<int>(v);
}

} // namespace

Bytes read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());
    Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad())
        throw IoError("cannot read " + path.string());
    return data;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out)
        throw IoError("cannot write " + path.string());
}

// GSF ----------------------------------------------------------------------

Bytes encode_gsf(const GaussianField& f)
{
    require_valid(f, std::numeric_limits<double>::infinity());
    Writer w;
    w.bytes("GSF1");
    w.u32(static_cast<std::uint32_t>(f.lr_width()));
    w.u32(static_cast<std::uint32_t>(f.lr_height()));
    w.u8(f.density() == Density::OnePerPixel ? 0 : 1);
    w.f32(f.timestamp());
    w.u32(static_cast<std::uint32_t>(f.size()));
    for (const Gaussian2D& g : f.gaussians()) {
        w.f32(g.offset.x);
        w.f32(g.offset.y);
        w.f32(g.cov.sigma_x);
        w.f32(g.cov.sigma_y);
        w.f32(g.cov.rho);
        for (double c : g.color)
            w.f32(c);
    }
    return w.take();
}

GaussianField decode_gsf(std::span<const std::uint8_t> data)
{
    Reader r(data, "GSF");
    r.magic("GSF1");
    const int w = positive_dim(r.u32(), r, "width");
    const int h = positive_dim(r.u32(), r, "height");
    const std::uint8_t dens = r.u8();
    if (dens > 1)
        r.fail("unknown density code " + std::to_string(dens));
    const double t = r.f32();
    const std::size_t count_at = r.offset();
    const std::uint32_t count = r.u32();

    GaussianField f(w, h, dens == 0 ? Density::OnePerPixel : Density::OnePerFourPixels, t);
    if (count != f.size())
        throw FormatError("GSF: count " + std::to_string(count) + " does not match the " +
                              std::to_string(f.size()) + "-cell grid",
                          count_at);
    if (r.remaining() != static_cast<std::size_t>(count) * 32)
        throw FormatError("GSF: payload of " + std::to_string(r.remaining()) + " bytes, expected " +
                              std::to_string(static_cast<std::size_t>(count) * 32),
                          r.offset() + std::min(r.remaining(), static_cast<std::size_t>(count) * 32));
    for (Gaussian2D& g : f.gaussians()) {
        const std::size_t at = r.offset();
        g.offset = {r.f32(), r.f32()};
        g.cov = {r.f32(), r.f32(), r.f32()};
        g.color = {r.f32(), r.f32(), r.f32()};
        if (auto why = cov_violation(g.cov))
            throw FormatError("GSF: " + *why, at);
        for (double c : g.color)
            if (!(c >= 0.0 && c <= 1.0))
                throw FormatError("GSF: color outside [0, 1]", at);
        if (!(g.offset.x >= 0.0 && g.offset.y >= 0.0))
            throw FormatError("GSF: negative offset", at);
    }
    if (!(t >= 0.0 && t <= 1.0))
        throw FormatError("GSF: timestamp outside [0, 1]", 13);
    r.end();
    return f;
}

void save_gsf(const GaussianField& f, const std::filesystem::path& path)
{
    write_file(path, encode_gsf(f));
}

GaussianField load_gsf(const std::filesystem::path& path)
{
    return decode_gsf(read_file(path));
}

// FLO ----------------------------------------------------------------------

Bytes encode_flo(const FlowField& f)
{
    require_finite(f);
    Writer w;
    w.u32(std::bit_cast<std::uint32_t>(kFloTag));
    w.i32(f.width());
    w.i32(f.height());
    for (const Vec2& v : f.vectors()) {
        w.f32(v.x);
        w.f32(v.y);
    }
    return w.take();
}

FlowField decode_flo(std::span<const std::uint8_t> data)
{
    Reader r(data, "FLO");
    if (r.raw_f32() != kFloTag)
        throw FormatError("FLO: bad magic, expected the Middlebury tag 202021.25", 0);
    const std::int32_t w = r.i32();
    const std::int32_t h = r.i32();
    if (w <= 0 || h <= 0 || w > (1 << 16) || h > (1 << 16))
        throw FormatError("FLO: dimensions out of range", 4);
    const std::size_t need = static_cast<std::size_t>(w) * h * 8;
    if (r.remaining() != need)
        throw FormatError("FLO: payload of " + std::to_string(r.remaining()) + " bytes, expected " +
                              std::to_string(need),
                          r.offset() + std::min(r.remaining(), need));
    FlowField f(w, h);
    for (Vec2& v : f.vectors())
        v = {r.f32(), r.f32()};
    r.end();
    return f;
}

void save_flo(const FlowField& f, const std::filesystem::path& path)
{
    write_file(path, encode_flo(f));
}

FlowField load_flo(const std::filesystem::path& path)
{
    return decode_flo(read_file(path));
}

// FRM ----------------------------------------------------------------------

Bytes encode_frm(const FrameBuffer& f)
{
    require_finite(f);
    Writer w;
    w.bytes("FRM1");
    w.u32(static_cast<std::uint32_t>(f.width()));
    w.u32(static_cast<std::uint32_t>(f.height()));
    for (const Rgb& p : f.pixels())
        for (double v : p)
            w.f32(v);
    return w.take();
}

FrameBuffer decode_frm(std::span<const std::uint8_t> data)
{
    Reader r(data, "FRM");
    r.magic("FRM1");
    const int w = positive_dim(r.u32(), r, "width");
    const int h = positive_dim(r.u32(), r, "height");
    const std::size_t need = static_cast<std::size_t>(w) * h * 12;
    if (r.remaining() != need)
        throw FormatError("FRM: payload of " + std::to_string(r.remaining()) + " bytes, expected " +
                              std::to_string(need),
                          r.offset() + std::min(r.remaining(), need));
    FrameBuffer f(w, h);
    for (Rgb& p : f.pixels())
        for (double& v : p)
            v = r.f32();
    r.end();
    return f;
}

void save_frm(const FrameBuffer& f, const std::filesystem::path& path)
{
    write_file(path, encode_frm(f));
}

FrameBuffer load_frm(const std::filesystem::path& path)
{
    return decode_frm(read_file(path));
}

// PPM ----------------------------------------------------------------------

Bytes encode_ppm(const FrameBuffer& f)
{
    require_finite(f);
    Writer w;
    w.bytes("P6\n" + std::to_string(f.width()) + " " + std::to_string(f.height()) + "\n255\n");
    for (const Rgb& p : f.pixels())
        for (double v : p)
            w.u8(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
    return w.take();
}

FrameBuffer decode_ppm(std::span<const std::uint8_t> data)
{
    std::size_t pos = 0;
    auto skip_space = [&] {
        while (pos < data.size()) {
            if (data[pos] == '#') {
                while (pos < data.size() && data[pos] != '\n')
                    ++pos;
            } else if (std::isspace(data[pos])) {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto number = [&](const char* name) {
        skip_space();
        const std::size_t start = pos;
        long v = 0;
        while (pos < data.size() && std::isdigit(data[pos]) && v < (1L << 20))
            v = v * 10 + (data[pos++] - '0');
        if (pos == start)
            throw FormatError(std::string("PPM: expected ") + name, start);
        return v;
    };
    if (data.size() < 2 || data[0] != 'P' || data[1] != '6')
        throw FormatError("PPM: bad magic, expected \"P6\"", 0);
    pos = 2;
    const long w = number("width");
    const long h = number("height");
    const long maxval = number("maxval");
    if (w <= 0 || h <= 0 || w > (1 << 16) || h > (1 << 16))
        throw FormatError("PPM: dimensions out of range", pos);
    if (maxval != 255)
        throw FormatError("PPM: only maxval 255 is supported", pos);
    if (pos >= data.size() || !std::isspace(data[pos]))
        throw FormatError("PPM: missing separator before pixel data", pos);
    ++pos;
    const std::size_t need = static_cast<std::size_t>(w) * h * 3;
    if (data.size() - pos != need)
        throw FormatError("PPM: pixel data of " + std::to_string(data.size() - pos) + " bytes, expected " +
                              std::to_string(need),
                          pos + std::min(data.size() - pos, need));
    FrameBuffer f(static_cast<int>(w), static_cast<int>(h));
    for (Rgb& p : f.pixels())
        for (double& v : p)
            v = data[pos++] / 255.0;
    return f;
}

void save_ppm(const FrameBuffer& f, const std::filesystem::path& path)
{
    write_file(path, encode_ppm(f));
}

FrameBuffer load_ppm(const std::filesystem::path& path)
{
    return decode_ppm(read_file(path));
}

FrameBuffer load_frame(const std::filesystem::path& path)
{
    const Bytes data = read_file(path);
    if (data.size() >= 2 && data[0] == 'P' && data[1] == '6')
        return decode_ppm(data);
    return decode_frm(data);
}

// Weights ------------------------------------------------------------------

namespace {

using nlohmann::json;

struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;
};

json to_json(const Tensor& t)
{
    return json{{"shape", t.shape}, {"data", t.data}};
}

class TensorDoc {
public:
    explicit TensorDoc(std::string_view text) : text_(text)
    {
        try {
            doc_ = json::parse(text);
        } catch (const json::parse_error& e) {
            throw FormatError(std::string("weights: ") + e.what(), e.byte);
        }
        if (!doc_.is_object())
            throw FormatError("weights: top level must be an object", 0);
        static const char* kNames[] = {"bank",           "fuser.weight",       "fuser.bias",
                                       "fusion_head.weight", "fusion_head.bias", "decoder.weight",
                                       "decoder.bias",   "window_logits"};
        for (const auto& [key, value] : doc_.items()) {
            if (std::find(std::begin(kNames), std::end(kNames), key) == std::end(kNames))
                fail(key, "unknown entry \"" + key + "\"");
            if (!value.is_object())
                fail(key, "entry must be an object");
            for (const auto& [field, unused] : value.items())
                if (field != "shape" && field != "data")
                    fail(key, "unknown field \"" + field + "\"");
            if (!value.contains("shape") || !value.contains("data"))
                fail(key, "entry needs \"shape\" and \"data\"");
        }
    }

    bool has(const std::string& name) const { return doc_.contains(name); }

    Tensor get(const std::string& name, std::size_t rank) const
    {
        const json& e = doc_.at(name);
        Tensor t;
        const json& shape = e.at("shape");
        const json& data = e.at("data");
        if (!shape.is_array() || !data.is_array())
            fail(name, "shape and data must be arrays");
        std::size_t n = 1;
        for (const json& d : shape) {
            if (!d.is_number_integer() || d.get<long long>() <= 0 || d.get<long long>() > (1 << 24))
                fail(name, "shape entries must be positive integers");
            t.shape.push_back(d.get<int>());
            n *= static_cast<std::size_t>(t.shape.back());
        }
        if (t.shape.size() != rank)
            fail(name, "expected rank " + std::to_string(rank) + ", got " + std::to_string(t.shape.size()));
        if (data.size() != n)
            fail(name, "data has " + std::to_string(data.size()) + " values, shape implies " + std::to_string(n));
        t.data.reserve(n);
        for (const json& v : data) {
            if (!v.is_number())
                fail(name, "data values must be numbers");
            const double x = v.get<double>();
            if (!std::isfinite(x))
                fail(name, "non-finite value");
            t.data.push_back(x);
        }
        return t;
    }

    [[noreturn]] void fail(const std::string& name, const std::string& msg) const
    {
        const std::size_t at = text_.find("\"" + name + "\"");
        throw FormatError("weights: " + name + ": " + msg, at == std::string_view::npos ? 0 : at);
    }

private:
    std::string_view text_;
    json doc_;
};

Tensor conv_weight_tensor(const ConvWeights& c)
{
    return {{c.out_channels, c.in_channels, c.kernel_size, c.kernel_size}, c.weights};
}

ConvWeights conv_from(const TensorDoc& doc, const std::string& prefix)
{
    const Tensor w = doc.get(prefix + ".weight", 4);
    const Tensor b = doc.get(prefix + ".bias", 1);
    if (w.shape[2] != w.shape[3] || w.shape[2] % 2 == 0)
        doc.fail(prefix + ".weight", "kernel must be square with odd size");
    if (b.shape[0] != w.shape[0])
        doc.fail(prefix + ".bias", "length does not match output channels");
    ConvWeights c;
    c.out_channels = w.shape[0];
    c.in_channels = w.shape[1];
    c.kernel_size = w.shape[2];
    c.weights = w.data;
    c.bias = b.data;
    return c;
}

void require_pair(const TensorDoc& doc, const std::string& prefix)
{
    if (doc.has(prefix + ".weight") != doc.has(prefix + ".bias"))
        doc.fail(prefix, "weight and bias must appear together");
}

} // namespace

std::string encode_weights(const WeightsFile& w)
{
    json doc = json::object();
    if (w.bank) {
        w.bank->validate();
        Tensor t{{w.bank->size(), 3}, {}};
        for (const CovParams& e : w.bank->entries)
            t.data.insert(t.data.end(), {e.sigma_x, e.sigma_y, e.rho});
        doc["bank"] = to_json(t);
    }
    auto put_conv = [&](const std::string& prefix, const ConvWeights& c) {
        c.validate();
        doc[prefix + ".weight"] = to_json(conv_weight_tensor(c));
        doc[prefix + ".bias"] = to_json({{c.out_channels}, c.bias});
    };
    if (w.fuser) {
        w.fuser->validate();
        put_conv("fuser", w.fuser->conv);
    }
    if (w.fusion_head) {
        w.fusion_head->validate();
        put_conv("fusion_head", w.fusion_head->conv);
    }
    if (w.decoder) {
        w.decoder->validate();
        put_conv("decoder", w.decoder->conv);
    }
    if (w.window_logits) {
        const LogitField& l = *w.window_logits;
        const auto d = l.data();
        doc["window_logits"] =
            to_json({{l.grid_height(), l.grid_width(), l.k()}, std::vector<double>(d.begin(), d.end())});
    }
    return doc.dump(1);
}

WeightsFile decode_weights(std::string_view text)
{
    const TensorDoc doc(text);
    WeightsFile w;
    if (doc.has("bank")) {
        const Tensor t = doc.get("bank", 2);
        if (t.shape[1] != 3)
            doc.fail("bank", "expected shape [K, 3]");
        CpbBank bank;
        for (std::size_t i = 0; i < t.data.size(); i += 3)
            bank.entries.push_back({t.data[i], t.data[i + 1], t.data[i + 2]});
        try {
            bank.validate();
        } catch (const ValidationError& e) {
            doc.fail("bank", e.what());
        }
        w.bank = std::move(bank);
    }
    for (const char* prefix : {"fuser", "fusion_head", "decoder"})
        require_pair(doc, prefix);
    try {
        if (doc.has("fuser.weight")) {
            w.fuser = FuserWeights{conv_from(doc, "fuser")};
            w.fuser->validate();
        }
        if (doc.has("fusion_head.weight")) {
            w.fusion_head = FusionHeadWeights{conv_from(doc, "fusion_head")};
            w.fusion_head->validate();
        }
        if (doc.has("decoder.weight")) {
            w.decoder = DecoderWeights{conv_from(doc, "decoder")};
            w.decoder->validate();
        }
    } catch (const ValidationError& e) {
        throw FormatError(std::string("weights: ") + e.what(), 0);
    }
    if (w.bank && w.fuser && w.fuser->k() != w.bank->size())
        doc.fail("fuser.weight", "output channels do not match the bank size");
    if (doc.has("window_logits")) {
        const Tensor t = doc.get("window_logits", 3);
        LogitField l(t.shape[1], t.shape[0], t.shape[2]);
        std::copy(t.data.begin(), t.data.end(), l.data().begin());
        w.window_logits = std::move(l);
    }
    return w;
}

void save_weights(const WeightsFile& w, const std::filesystem::path& path)
{
    const std::string text = encode_weights(w);
    write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

WeightsFile load_weights(const std::filesystem::path& path)
{
    const Bytes data = read_file(path);
    return decode_weights({reinterpret_cast<const char*>(data.data()), data.size()});
}

void save_bank(const CpbBank& bank, const std::filesystem::path& path)
{
    WeightsFile w;
    w.bank = bank;
    save_weights(w, path);
}

CpbBank load_bank(const std::filesystem::path& path)
{
    WeightsFile w = load_weights(path);
    if (!w.bank || w.fuser || w.fusion_head || w.decoder || w.window_logits)
        throw FormatError("bank file must contain exactly the \"bank\" entry", 0);
    return *w.bank;
}

} // namespace gsvsr
