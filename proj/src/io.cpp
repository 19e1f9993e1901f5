#include "iibr/io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unistd.h>
#include <sys/wait.h>

namespace iibr::io {

namespace {

struct File {
    FILE* f = nullptr;
    File(const fs::path& p, const char* mode) : f(std::fopen(p.c_str(), mode)) {}
    ~File()
    {
        if (f)
            std::fclose(f);
    }
};

struct RawImage {
    int width = 0, height = 0, channels = 0, depth = 8;
    std::vector<unsigned char> data; // rows, big-endian samples when depth is 16
};

enum class Want { rgb8, gray8, gray16 };

// All libpng calls live here so that longjmp never crosses a C++ destructor.
bool png_read_raw(FILE* fp, Want want, RawImage& out, char* err, size_t errlen)
{
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png)
        return false;
    png_infop info = png_create_info_struct(png);
    png_bytep* rows = nullptr;
    if (!info || setjmp(png_jmpbuf(png))) {
        std::snprintf(err, errlen, "libpng could not decode the file");
        std::free(rows);
        png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        return false;
    }
    png_init_io(png, fp);
    png_read_info(png, info);
    int color = png_get_color_type(png, info);
    int depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE)
        png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8)
        png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS))
        png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    if (want == Want::gray16) {
        if (depth != 16 || (color & PNG_COLOR_MASK_COLOR)) {
            std::snprintf(err, errlen, "expected a 16-bit grayscale PNG");
            png_destroy_read_struct(&png, &info, nullptr);
            return false;
        }
    } else {
        if (depth == 16)
            png_set_scale_16(png);
        if (want == Want::rgb8 && !(color & PNG_COLOR_MASK_COLOR))
            png_set_gray_to_rgb(png);
        if (want == Want::gray8 && (color & PNG_COLOR_MASK_COLOR)) {
            std::snprintf(err, errlen, "expected a grayscale PNG");
            png_destroy_read_struct(&png, &info, nullptr);
            return false;
        }
    }
    png_read_update_info(png, info);
    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.channels = png_get_channels(png, info);
    out.depth = png_get_bit_depth(png, info);
    size_t rowbytes = png_get_rowbytes(png, info);
    out.data.resize(rowbytes * static_cast<size_t>(out.height));
    rows = static_cast<png_bytep*>(std::malloc(sizeof(png_bytep) * static_cast<size_t>(out.height)));
    for (int y = 0; y < out.height; ++y)
        rows[y] = out.data.data() + rowbytes * static_cast<size_t>(y);
    png_read_image(png, rows);
    png_read_end(png, nullptr);
    std::free(rows);
    png_destroy_read_struct(&png, &info, nullptr);
    return true;
}

bool png_write_raw(FILE* fp, const RawImage& img)
{
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png)
        return false;
    png_infop info = png_create_info_struct(png);
    png_bytep* rows = nullptr;
    if (!info || setjmp(png_jmpbuf(png))) {
        std::free(rows);
        png_destroy_write_struct(&png, info ? &info : nullptr);
        return false;
    }
    png_init_io(png, fp);
    png_set_compression_level(png, 6);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), img.depth,
                 img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const size_t rowbytes = static_cast<size_t>(img.width) * static_cast<size_t>(img.channels) * (img.depth / 8);
    rows = static_cast<png_bytep*>(std::malloc(sizeof(png_bytep) * static_cast<size_t>(img.height)));
    for (int y = 0; y < img.height; ++y)
        rows[y] = const_cast<png_bytep>(img.data.data() + rowbytes * static_cast<size_t>(y));
    png_write_image(png, rows);
    png_write_end(png, nullptr);
    std::free(rows);
    png_destroy_write_struct(&png, &info);
    return true;
}

RawImage read_raw(const fs::path& path, Want want)
{
    File f(path, "rb");
    if (!f.f)
        throw IoError("cannot open " + path.string());
    unsigned char sig[8];
    if (std::fread(sig, 1, 8, f.f) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        throw FormatError(path.string() + ": not a PNG file");
    std::rewind(f.f);
    RawImage raw;
    char err[160] = {0};
    if (!png_read_raw(f.f, want, raw, err, sizeof err))
        throw FormatError(path.string() + ": " + (err[0] ? err : "PNG decode failed"));
    return raw;
}

void write_raw(const fs::path& path, const RawImage& raw)
{
    File f(path, "wb");
    if (!f.f)
        throw IoError("cannot create " + path.string());
    if (!png_write_raw(f.f, raw))
        throw IoError("PNG encode failed for " + path.string());
}

unsigned char to8(double c) { return static_cast<unsigned char>(std::lround(std::clamp(c, 0.0, 1.0) * 255.0)); }

} // namespace

RgbImage read_png(const fs::path& path)
{
    RawImage raw = read_raw(path, Want::rgb8);
    RgbImage img(raw.height, raw.width);
    for (size_t i = 0; i < img.size(); ++i)
        for (int k = 0; k < 3; ++k)
            img[i][k] = raw.data[i * 3 + static_cast<size_t>(k)] / 255.0;
    return img;
}

void write_png(const fs::path& path, const RgbImage& img)
{
    if (img.empty())
        throw DomainError("cannot write an empty image");
    RawImage raw{img.cols(), img.rows(), 3, 8, std::vector<unsigned char>(img.size() * 3)};
    for (size_t i = 0; i < img.size(); ++i)
        for (int k = 0; k < 3; ++k)
            raw.data[i * 3 + static_cast<size_t>(k)] = to8(img[i][k]);
    write_raw(path, raw);
}

Mask read_mask_png(const fs::path& path)
{
    RawImage raw = read_raw(path, Want::gray8);
    Mask m(raw.height, raw.width);
    for (size_t i = 0; i < m.size(); ++i)
        m[i] = raw.data[i] ? 1 : 0;
    return m;
}

void write_mask_png(const fs::path& path, const Mask& m)
{
    if (m.empty())
        throw DomainError("cannot write an empty mask");
    RawImage raw{m.cols(), m.rows(), 1, 8, std::vector<unsigned char>(m.size())};
    for (size_t i = 0; i < m.size(); ++i)
        raw.data[i] = m[i] ? 255 : 0;
    write_raw(path, raw);
}

ScalarField read_png16(const fs::path& path)
{
    RawImage raw = read_raw(path, Want::gray16);
    ScalarField f(raw.height, raw.width);
    for (size_t i = 0; i < f.size(); ++i)
        f[i] = ((raw.data[2 * i] << 8) | raw.data[2 * i + 1]) / 65535.0;
    return f;
}

void write_png16(const fs::path& path, const ScalarField& f)
{
    if (f.empty())
        throw DomainError("cannot write an empty image");
    RawImage raw{f.cols(), f.rows(), 1, 16, std::vector<unsigned char>(f.size() * 2)};
    for (size_t i = 0; i < f.size(); ++i) {
        auto v = static_cast<unsigned>(std::lround(std::clamp(f[i], 0.0, 1.0) * 65535.0));
        raw.data[2 * i] = static_cast<unsigned char>(v >> 8);
        raw.data[2 * i + 1] = static_cast<unsigned char>(v & 0xFF);
    }
    write_raw(path, raw);
}

// ---- PFM

namespace {

std::string slurp(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void store(const fs::path& path, const std::string& bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot create " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw IoError("write failed for " + path.string());
}

std::uint32_t float_bits(float f)
{
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    return u;
}

float bits_float(std::uint32_t u)
{
    float f;
    std::memcpy(&f, &u, 4);
    return f;
}

} // namespace

ScalarField read_pfm(const fs::path& path)
{
    const std::string s = slurp(path);
    size_t pos = 0;
    auto token = [&]() {
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos])))
            ++pos;
        size_t start = pos;
        while (pos < s.size() && !std::isspace(static_cast<unsigned char>(s[pos])))
            ++pos;
        if (start == pos)
            throw FormatError(path.string() + ": truncated PFM header");
        return s.substr(start, pos - start);
    };
    std::string magic = token();
    if (magic == "PF")
        throw FormatError(path.string() + ": color PFM (PF) where grayscale (Pf) is expected");
    if (magic != "Pf")
        throw FormatError(path.string() + ": not a PFM file");
    long w, h;
    double scale;
    try {
        size_t used;
        std::string t = token();
        w = std::stol(t, &used);
        if (used != t.size())
            throw FormatError("");
        t = token();
        h = std::stol(t, &used);
        if (used != t.size())
            throw FormatError("");
        t = token();
        scale = std::stod(t, &used);
        if (used != t.size())
            throw FormatError("");
    } catch (const std::exception&) {
        throw FormatError(path.string() + ": malformed PFM header");
    }
    if (w <= 0 || h <= 0 || scale == 0.0 || !std::isfinite(scale))
        throw FormatError(path.string() + ": malformed PFM header");
    if (pos >= s.size() || !std::isspace(static_cast<unsigned char>(s[pos])))
        throw FormatError(path.string() + ": truncated PFM header");
    ++pos; // single whitespace before the payload
    const size_t need = static_cast<size_t>(w) * static_cast<size_t>(h) * 4;
    if (s.size() - pos != need)
        throw FormatError(path.string() + ": PFM payload is " + std::to_string(s.size() - pos) + " bytes, expected " +
                          std::to_string(need));
    const bool little = scale < 0.0;
    ScalarField f(static_cast<int>(h), static_cast<int>(w));
    const auto* p = reinterpret_cast<const unsigned char*>(s.data() + pos);
    for (long r = 0; r < h; ++r)
        for (long c = 0; c < w; ++c) {
            const unsigned char* b = p + (static_cast<size_t>(r) * static_cast<size_t>(w) + static_cast<size_t>(c)) * 4;
            std::uint32_t u = little ? (std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
                                        std::uint32_t(b[3]) << 24)
                                     : (std::uint32_t(b[3]) | std::uint32_t(b[2]) << 8 | std::uint32_t(b[1]) << 16 |
                                        std::uint32_t(b[0]) << 24);
            float v = bits_float(u);
            if (std::isnan(v))
                throw FormatError(path.string() + ": NaN in PFM payload");
            f.at(static_cast<int>(h - 1 - r), static_cast<int>(c)) = v; // bottom-up
        }
    return f;
}

void write_pfm(const fs::path& path, const ScalarField& f)
{
    if (f.empty())
        throw DomainError("cannot write an empty PFM");
    std::string s = "Pf\n" + std::to_string(f.cols()) + " " + std::to_string(f.rows()) + "\n-1.0\n";
    s.reserve(s.size() + f.size() * 4);
    for (int r = f.rows() - 1; r >= 0; --r)
        for (int c = 0; c < f.cols(); ++c) {
            double v = f.at(r, c);
            if (std::isnan(v))
                throw DomainError("NaN cannot be written to PFM");
            std::uint32_t u = float_bits(static_cast<float>(v));
            for (int k = 0; k < 4; ++k)
                s.push_back(static_cast<char>((u >> (8 * k)) & 0xFF));
        }
    store(path, s);
}

// ---- light-field directories

std::string view_filename(int v, int u)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "view_%02d_%02d.png", v, u);
    return buf;
}

void save_lf(const fs::path& dir, const LightField4D& lf)
{
    const GridGeometry& g = lf.geometry();
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw IoError("cannot create " + dir.string() + ": " + ec.message());
    for (int v = 0; v < g.V(); ++v)
        for (int u = 0; u < g.U(); ++u)
            write_png(dir / view_filename(v, u), lf.view(v, u));
    json m = {{"version", lf_manifest_version},
              {"views_v", g.V()},
              {"views_u", g.U()},
              {"height", g.H()},
              {"width", g.W()},
              {"center", {g.center_v(), g.center_u()}},
              {"naming", "view_{v:02}_{u:02}.png"}};
    write_json(dir / "lf.json", m);
}

LightField4D load_lf(const fs::path& dir)
{
    json m = read_json(dir / "lf.json");
    if (!m.is_object())
        throw FormatError("lf.json: expected an object");
    if (!m.contains("version") || !m["version"].is_number_integer())
        throw FormatError("lf.json: missing version");
    if (m["version"].get<int>() != lf_manifest_version)
        throw FormatError("lf.json: unsupported version " + m["version"].dump());
    reject_unknown_keys(m, {"version", "views_v", "views_u", "height", "width", "center", "naming"}, "lf.json");
    auto geti = [&](const char* k) {
        if (!m.contains(k) || !m[k].is_number_integer())
            throw FormatError(std::string("lf.json: missing or non-integer ") + k);
        return m[k].get<int>();
    };
    GridGeometry g;
    try {
        g = GridGeometry(geti("views_v"), geti("views_u"), geti("height"), geti("width"));
    } catch (const DomainError& e) {
        throw FormatError(std::string("lf.json: ") + e.what());
    }
    if (m.contains("naming") && m["naming"] != "view_{v:02}_{u:02}.png")
        throw FormatError("lf.json: unsupported naming pattern");
    LightField4D lf(g);
    for (int v = 0; v < g.V(); ++v)
        for (int u = 0; u < g.U(); ++u) {
            fs::path p = dir / view_filename(v, u);
            if (!fs::exists(p))
                throw IoError("missing view " + p.string());
            RgbImage img = read_png(p);
            if (img.rows() != g.H() || img.cols() != g.W())
                throw FormatError(p.string() + ": size " + std::to_string(img.cols()) + "x" +
                                  std::to_string(img.rows()) + " does not match the manifest");
            lf.set_view(v, u, std::move(img));
        }
    return lf;
}

// ---- checkpoints

namespace {

constexpr char checkpoint_magic[5] = {'I', 'I', 'B', 'R', '1'};

class Writer {
public:
    void bytes(const void* p, size_t n) { s_.append(static_cast<const char*>(p), n); }
    void u32(std::uint32_t v)
    {
        for (int k = 0; k < 4; ++k)
            s_.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
    }
    void u64(std::uint64_t v)
    {
        for (int k = 0; k < 8; ++k)
            s_.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
    }
    std::string take() { return std::move(s_); }

private:
    std::string s_;
};

class Reader {
public:
    explicit Reader(const std::string& s) : s_(s) {}
    void need(size_t n, const char* what)
    {
        if (s_.size() - pos_ < n)
            throw FormatError("checkpoint truncated: " + std::string(what) + " needs " + std::to_string(n) +
                              " bytes at offset " + std::to_string(pos_) + ", file has " + std::to_string(s_.size()));
    }
    std::uint32_t u32(const char* what)
    {
        need(4, what);
        std::uint32_t v = 0;
        for (int k = 0; k < 4; ++k)
            v |= std::uint32_t(static_cast<unsigned char>(s_[pos_ + static_cast<size_t>(k)])) << (8 * k);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64(const char* what)
    {
        need(8, what);
        std::uint64_t v = 0;
        for (int k = 0; k < 8; ++k)
            v |= std::uint64_t(static_cast<unsigned char>(s_[pos_ + static_cast<size_t>(k)])) << (8 * k);
        pos_ += 8;
        return v;
    }
    std::string str(size_t n, const char* what)
    {
        need(n, what);
        std::string r = s_.substr(pos_, n);
        pos_ += n;
        return r;
    }
    bool done() const { return pos_ == s_.size(); }
    size_t pos() const { return pos_; }

private:
    const std::string& s_;
    size_t pos_ = 0;
};

} // namespace

std::string encode_checkpoint(const Checkpoint& c)
{
    const AttentionConfig& cfg = c.params.config();
    Writer w;
    w.bytes(checkpoint_magic, 5);
    w.u32(static_cast<std::uint32_t>(cfg.d_model));
    w.u32(static_cast<std::uint32_t>(cfg.heads));
    w.u32(static_cast<std::uint32_t>(cfg.layers));
    w.u32(static_cast<std::uint32_t>(cfg.k_sources));
    w.u32(static_cast<std::uint32_t>(ray_feature_version));
    w.u64(c.seed);
    w.u64(static_cast<std::uint64_t>(c.iteration));
    w.u64(c.params.tensors().size());
    for (const ParamTensor& t : c.params.tensors()) {
        w.u64(t.name.size());
        w.bytes(t.name.data(), t.name.size());
        w.u64(static_cast<std::uint64_t>(t.value.rows()));
        w.u64(static_cast<std::uint64_t>(t.value.cols()));
        for (long r = 0; r < t.value.rows(); ++r)
            for (long k = 0; k < t.value.cols(); ++k) {
                double v = t.value(r, k);
                float f = static_cast<float>(v);
                if (static_cast<double>(f) != v)
                    throw DomainError("parameter " + t.name + " is not representable as float32");
                w.u32(float_bits(f));
            }
    }
    return w.take();
}

void save_checkpoint(const fs::path& path, const Checkpoint& c) { store(path, encode_checkpoint(c)); }

Checkpoint decode_checkpoint(const std::string& bytes, const AttentionConfig* expected)
{
    Reader r(bytes);
    if (r.str(5, "magic") != std::string(checkpoint_magic, 5))
        throw FormatError("checkpoint: bad magic (expected IIBR1)");
    AttentionConfig cfg;
    cfg.d_model = static_cast<int>(r.u32("d_model"));
    cfg.heads = static_cast<int>(r.u32("heads"));
    cfg.layers = static_cast<int>(r.u32("layers"));
    cfg.k_sources = static_cast<int>(r.u32("k_sources"));
    const int feature_version = static_cast<int>(r.u32("feature_version"));
    if (feature_version != ray_feature_version)
        throw FormatError("checkpoint: feature_version " + std::to_string(feature_version) + ", this build uses " +
                          std::to_string(ray_feature_version));
    if (expected) {
        auto check = [](const char* field, int got, int want) {
            if (got != want)
                throw FormatError(std::string("checkpoint config mismatch: ") + field + " is " + std::to_string(got) +
                                  ", expected " + std::to_string(want));
        };
        check("d_model", cfg.d_model, expected->d_model);
        check("heads", cfg.heads, expected->heads);
        check("layers", cfg.layers, expected->layers);
        check("k_sources", cfg.k_sources, expected->k_sources);
    }
    Checkpoint c;
    try {
        c.params = RayTransformerParams(cfg);
    } catch (const DomainError& e) {
        throw FormatError(std::string("checkpoint: invalid config: ") + e.what());
    }
    c.seed = r.u64("seed");
    c.iteration = static_cast<std::int64_t>(r.u64("iteration"));
    const std::uint64_t count = r.u64("tensor count");
    if (count != c.params.tensors().size())
        throw FormatError("checkpoint: " + std::to_string(count) + " tensors, config implies " +
                          std::to_string(c.params.tensors().size()));
    for (ParamTensor& t : c.params.tensors()) {
        const std::uint64_t n = r.u64("name length");
        if (n > 4096)
            throw FormatError("checkpoint: implausible name length");
        std::string name = r.str(n, "tensor name");
        if (name != t.name)
            throw FormatError("checkpoint: tensor " + name + " where " + t.name + " is expected");
        const std::uint64_t rows = r.u64("rows"), cols = r.u64("cols");
        if (rows != static_cast<std::uint64_t>(t.value.rows()) || cols != static_cast<std::uint64_t>(t.value.cols()))
            throw FormatError("checkpoint: " + name + " has shape " + std::to_string(rows) + "x" + std::to_string(cols) +
                              ", expected " + std::to_string(t.value.rows()) + "x" + std::to_string(t.value.cols()));
        r.need(rows * cols * 4, name.c_str());
        for (long i = 0; i < t.value.rows(); ++i)
            for (long k = 0; k < t.value.cols(); ++k) {
                float f = bits_float(r.u32("value"));
                if (!std::isfinite(f))
                    throw FormatError("checkpoint: non-finite value in " + name);
                t.value(i, k) = f;
            }
    }
    if (!r.done())
        throw FormatError("checkpoint: " + std::to_string(bytes.size() - r.pos()) + " trailing bytes");
    return c;
}

Checkpoint load_checkpoint(const fs::path& path, const AttentionConfig* expected)
{
    return decode_checkpoint(slurp(path), expected);
}

// ---- JSON

json read_json(const fs::path& path)
{
    std::string s = slurp(path);
    try {
        return json::parse(s);
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void write_json(const fs::path& path, const json& j) { store(path, j.dump(2) + "\n"); }

void write_text(const fs::path& path, const std::string& text) { store(path, text); }

void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where)
{
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed)
            ok = ok || it.key() == a;
        if (!ok)
            throw FormatError(where + ": unknown key \"" + it.key() + "\"");
    }
}

// ---- sidecar inpainting

namespace {

std::string shell_quote(const std::string& s)
{
    std::string q = "'";
    for (char c : s) {
        if (c == '\'')
            q += "'\\''";
        else
            q += c;
    }
    return q + "'";
}

class TempDir {
public:
    TempDir()
    {
        const char* env = std::getenv("IIBR_TMPDIR");
        fs::path base = env && *env ? fs::path(env) : fs::temp_directory_path();
        std::string tmpl = (base / "iibr-sidecar-XXXXXX").string();
        std::vector<char> buf(tmpl.begin(), tmpl.end());
        buf.push_back('\0');
        if (!mkdtemp(buf.data()))
            throw IoError("cannot create a temporary directory under " + base.string());
        path_ = buf.data();
    }
    ~TempDir()
    {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

} // namespace

RgbImage external_inpaint_sidecar(const RgbImage& img, const Mask& mask, const std::string& command,
                                  std::string* warning)
{
    if (!(img.rows() == mask.rows() && img.cols() == mask.cols()))
        throw DomainError("mask does not fit the image");
    if (command.empty())
        throw DomainError("external inpainter needs a command");
    TempDir dir;
    write_png(dir.path() / "in.png", img);
    write_mask_png(dir.path() / "mask.png", mask);
    std::fflush(nullptr);
    int status = std::system((command + " " + shell_quote(dir.path().string())).c_str());
    if (status == -1)
        throw IoError("could not run inpainter command");
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
        throw IoError("inpainter command failed with status " +
                      std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : status));
    fs::path out_path = dir.path() / "out.png";
    if (!fs::exists(out_path))
        throw IoError("inpainter command wrote no out.png");
    RgbImage out = read_png(out_path);
    if (out.rows() != img.rows() || out.cols() != img.cols())
        throw FormatError("inpainter output is " + std::to_string(out.cols()) + "x" + std::to_string(out.rows()) +
                          ", expected " + std::to_string(img.cols()) + "x" + std::to_string(img.rows()));
    double drift = 0.0;
    for (size_t i = 0; i < out.size(); ++i)
        if (!mask[i]) {
            drift = std::max(drift, (out[i] - img[i]).abs().maxCoeff());
            out[i] = img[i];
        }
    if (drift > 1.0 / 255.0 + 1e-12 && warning)
        *warning = "inpainter changed unmasked pixels by up to " + std::to_string(drift);
    return out;
}

RgbImage ExternalInpainter::fill(const RgbImage& img, const OcclusionMask& mask) const
{
    std::string warning;
    RgbImage out = external_inpaint_sidecar(img, mask, command_, &warning);
    if (!warning.empty())
        std::fprintf(stderr, "warning: %s\n", warning.c_str());
    return out;
}

std::unique_ptr<Inpainter> make_inpainter(const std::string& name, const std::string& command)
{
    if (name == "naive")
        return std::make_unique<NaiveInpainter>();
    if (name == "external")
        return std::make_unique<ExternalInpainter>(command);
    throw DomainError("unknown inpainter \"" + name + "\" (naive|external)");
}

} // namespace iibr::io
