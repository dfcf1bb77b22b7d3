#include "aggronet/datapipe.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "aggronet/error.hpp"
#include "aggronet/kernels.hpp"

namespace fs = std::filesystem;

namespace aggronet {

namespace {

struct PpmReader {
    const uint8_t* data;
    size_t len;
    size_t pos = 0;
    const std::string& origin;

    [[noreturn]] void fail(const std::string& what) const {
        throw FormatError("decode_ppm: " + what + " in " + origin);
    }
    bool eof() const { return pos >= len; }
    uint8_t peek() const { return data[pos]; }

    void skip_space_and_comments() {
        while (!eof()) {
            if (std::isspace(peek())) {
                ++pos;
            } else if (peek() == '#') {
                while (!eof() && peek() != '\n') ++pos;
            } else {
                break;
            }
        }
    }

    int64_t read_int(const char* field) {
        skip_space_and_comments();
        if (eof() || !std::isdigit(peek())) fail(std::string("missing ") + field);
        int64_t v = 0;
        while (!eof() && std::isdigit(peek())) {
            v = v * 10 + (peek() - '0');
            if (v > 1'000'000'000) fail(std::string(field) + " out of range");
            ++pos;
        }
        return v;
    }
};

}  // namespace

Image decode_ppm(const uint8_t* bytes, size_t len, const std::string& origin) {
    PpmReader r{bytes, len, 0, origin};
    if (len < 2 || bytes[0] != 'P' || bytes[1] != '6') {
        std::string magic(reinterpret_cast<const char*>(bytes), std::min<size_t>(len, 2));
        r.fail("unsupported magic '" + magic + "', expected P6");
    }
    r.pos = 2;
    const int64_t w = r.read_int("width");
    const int64_t h = r.read_int("height");
    const int64_t maxval = r.read_int("maxval");
    if (w <= 0 || h <= 0) r.fail("non-positive dimensions");
    if (w * h > 100'000'000) r.fail("image too large");
    if (maxval != 255) r.fail("maxval " + std::to_string(maxval) + ", only 255 supported");
    // exactly one whitespace byte separates the header from the payload
    if (r.eof() || !std::isspace(r.peek())) r.fail("missing separator after maxval");
    ++r.pos;

    const size_t need = static_cast<size_t>(w) * static_cast<size_t>(h) * 3;
    if (len - r.pos < need)
        r.fail("truncated payload: header promises " + std::to_string(need) + " bytes, got " +
               std::to_string(len - r.pos));
    Image img;
    img.width = w;
    img.height = h;
    img.pixels.assign(bytes + r.pos, bytes + r.pos + need);
    return img;
}

Image decode_ppm(const std::vector<uint8_t>& bytes, const std::string& origin) {
    return decode_ppm(bytes.data(), bytes.size(), origin);
}

std::vector<uint8_t> encode_ppm(const Image& img) {
    const std::string header =
        "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    std::vector<uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.pixels.begin(), img.pixels.end());
    return out;
}

Image read_ppm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                               std::istreambuf_iterator<char>());
    return decode_ppm(bytes, path);
}

void write_ppm(const Image& img, const std::string& path) {
    const std::vector<uint8_t> bytes = encode_ppm(img);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("short write to " + path);
}

Tensor rescale(const Image& img) {
    Tensor out({img.height, img.width, 3});
    float* po = out.data();
    for (size_t i = 0; i < img.pixels.size(); ++i)
        po[i] = static_cast<float>(img.pixels[i]) / 255.0f;
    return out;
}

namespace {

void require_hwc(const Tensor& img, const char* op) {
    if (img.rank() != 3)
        throw ShapeError(std::string(op) + ": expected [H,W,C], got " + shape_str(img.shape()));
}

// Bilinear tap with zero contribution outside the image.
double sample_zero_fill(const Tensor& img, double sy, double sx, int64_t ch) {
    const int64_t h = img.dim(0), w = img.dim(1);
    const int64_t y0 = static_cast<int64_t>(std::floor(sy));
    const int64_t x0 = static_cast<int64_t>(std::floor(sx));
    const double fy = sy - static_cast<double>(y0);
    const double fx = sx - static_cast<double>(x0);
    double acc = 0.0;
    for (int dy = 0; dy <= 1; ++dy)
        for (int dx = 0; dx <= 1; ++dx) {
            const int64_t yy = y0 + dy, xx = x0 + dx;
            if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
            acc += (dy ? fy : 1.0 - fy) * (dx ? fx : 1.0 - fx) *
                   static_cast<double>(img(yy, xx, ch));
        }
    return acc;
}

}  // namespace

Tensor hflip_image(const Tensor& img) {
    require_hwc(img, "hflip_image");
    const int64_t h = img.dim(0), w = img.dim(1), c = img.dim(2);
    Tensor out(img.shape());
    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x)
            for (int64_t ch = 0; ch < c; ++ch) out(y, x, ch) = img(y, w - 1 - x, ch);
    return out;
}

Tensor rotate_image(const Tensor& img, double degrees) {
    require_hwc(img, "rotate_image");
    const int64_t h = img.dim(0), w = img.dim(1), c = img.dim(2);
    const double theta = degrees * M_PI / 180.0;
    const double ct = std::cos(theta), st = std::sin(theta);
    const double cy = static_cast<double>(h - 1) / 2.0;
    const double cx = static_cast<double>(w - 1) / 2.0;
    Tensor out(img.shape());
    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x) {
            const double dx = static_cast<double>(x) - cx;
            const double dy = static_cast<double>(y) - cy;
            const double sx = ct * dx + st * dy + cx;
            const double sy = -st * dx + ct * dy + cy;
            for (int64_t ch = 0; ch < c; ++ch)
                out(y, x, ch) = static_cast<float>(sample_zero_fill(img, sy, sx, ch));
        }
    return out;
}

Tensor zoom_image(const Tensor& img, double factor) {
    require_hwc(img, "zoom_image");
    if (!(factor > 0.0)) throw ConfigError("zoom_image: factor must be positive");
    const int64_t h = img.dim(0), w = img.dim(1), c = img.dim(2);
    const double cy = static_cast<double>(h - 1) / 2.0;
    const double cx = static_cast<double>(w - 1) / 2.0;
    Tensor out(img.shape());
    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x) {
            const double sy = cy + (static_cast<double>(y) - cy) / factor;
            const double sx = cx + (static_cast<double>(x) - cx) / factor;
            for (int64_t ch = 0; ch < c; ++ch)
                out(y, x, ch) = static_cast<float>(sample_zero_fill(img, sy, sx, ch));
        }
    return out;
}

Tensor augment(const Tensor& img, const AugmentParams& params, SeededRng& rng) {
    require_hwc(img, "augment");
    if (params.p_hflip < 0.0 || params.p_hflip > 1.0)
        throw ConfigError("augment: p_hflip must be in [0,1]");
    if (params.max_rotation_deg < 0.0)
        throw ConfigError("augment: max_rotation_deg must be >= 0");
    if (params.max_zoom < 0.0 || params.max_zoom >= 1.0)
        throw ConfigError("augment: max_zoom must be in [0,1)");

    // draw count is fixed so the stream position never depends on outcomes
    const double u_flip = rng.uniform();
    const double angle = rng.uniform(-params.max_rotation_deg, params.max_rotation_deg);
    const double factor = rng.uniform(1.0 - params.max_zoom, 1.0 + params.max_zoom);

    Tensor out = img;
    if (u_flip < params.p_hflip) out = hflip_image(out);
    if (angle != 0.0) out = rotate_image(out, angle);
    if (factor != 1.0) out = zoom_image(out, factor);
    return out;
}

Dataset load_dataset(const std::string& root) {
    if (!fs::is_directory(root)) throw IoError("dataset root " + root + " is not a directory");

    std::vector<std::string> dirs;
    for (const auto& entry : fs::directory_iterator(root))
        if (entry.is_directory()) dirs.push_back(entry.path().filename().string());
    std::sort(dirs.begin(), dirs.end());

    Dataset ds;
    for (const std::string& dir : dirs) {
        std::vector<std::string> files;
        for (const auto& entry : fs::directory_iterator(fs::path(root) / dir))
            if (entry.is_regular_file() && entry.path().extension() == ".ppm")
                files.push_back(entry.path().string());
        if (files.empty()) {
            std::fprintf(stderr, "warning: class directory %s has no .ppm images, skipped\n",
                         dir.c_str());
            continue;
        }
        std::sort(files.begin(), files.end());
        const int label = static_cast<int>(ds.class_names.size());
        ds.class_names.push_back(dir);
        for (const std::string& file : files) {
            ds.images.push_back(read_ppm(file));
            ds.labels.push_back(label);
        }
    }
    if (ds.class_names.empty())
        throw IoError("no usable class directories under " + root);
    return ds;
}

namespace {

// Saturated palette, one hue per class; motifs modulate brightness so the
// class hue survives in the image mean (keeps classes centroid-separable).
constexpr uint8_t kPalette[8][3] = {
    {220, 40, 40},  {40, 200, 40},  {40, 80, 220}, {230, 220, 50},
    {200, 50, 200}, {50, 210, 210}, {235, 140, 40}, {130, 60, 200},
};

uint8_t clamp_u8(double v) {
    return static_cast<uint8_t>(std::min(255.0, std::max(0.0, std::round(v))));
}

Image synth_image(int k, int64_t size, SeededRng& rng) {
    const int motif = k % 3;
    const int64_t period = 4 + 2 * (k / 3);
    const int64_t phase = static_cast<int64_t>(rng.below(static_cast<uint64_t>(period)));
    const int64_t cell = period / 2;
    const double cy = static_cast<double>(size) / 2.0 +
                      static_cast<double>(rng.below(static_cast<uint64_t>(size) / 4)) -
                      static_cast<double>(size) / 8.0;
    const double cx = static_cast<double>(size) / 2.0 +
                      static_cast<double>(rng.below(static_cast<uint64_t>(size) / 4)) -
                      static_cast<double>(size) / 8.0;

    Image img;
    img.width = img.height = size;
    img.pixels.resize(static_cast<size_t>(size * size * 3));
    for (int64_t y = 0; y < size; ++y)
        for (int64_t x = 0; x < size; ++x) {
            bool on = false;
            switch (motif) {
                case 0:  // stripes
                    on = ((y + phase) / cell) % 2 == 0;
                    break;
                case 1: {  // concentric rings
                    const double d = std::hypot(static_cast<double>(y) - cy,
                                                static_cast<double>(x) - cx);
                    on = (static_cast<int64_t>(d / static_cast<double>(cell)) + phase) % 2 == 0;
                    break;
                }
                case 2:  // checkerboard
                    on = (y / cell + x / cell + phase) % 2 == 0;
                    break;
            }
            const double lum = on ? 1.0 : 0.55;
            for (int64_t ch = 0; ch < 3; ++ch)
                img.at(y, x, ch) =
                    clamp_u8(static_cast<double>(kPalette[k][ch]) * lum + 10.0 * rng.normal());
        }
    return img;
}

}  // namespace

Dataset synth_dataset(int n_per_class, int class_count, int64_t size, uint64_t seed) {
    if (class_count < 1 || class_count > 8)
        throw ConfigError("synth_dataset: class_count must be in [1,8], got " +
                          std::to_string(class_count));
    if (size < 8) throw ConfigError("synth_dataset: size must be >= 8");
    if (n_per_class < 0) throw ConfigError("synth_dataset: n_per_class must be >= 0");

    Dataset ds;
    for (int k = 0; k < class_count; ++k) ds.class_names.push_back("class_" + std::to_string(k));
    for (int k = 0; k < class_count; ++k)
        for (int i = 0; i < n_per_class; ++i) {
            SeededRng rng(mix64(mix64(seed ^ static_cast<uint64_t>(k)) ^
                                static_cast<uint64_t>(i)));
            ds.images.push_back(synth_image(k, size, rng));
            ds.labels.push_back(k);
        }
    return ds;
}

void write_dataset_tree(const Dataset& ds, const std::string& root) {
    fs::create_directories(root);
    for (const std::string& name : ds.class_names) fs::create_directories(fs::path(root) / name);
    std::vector<int64_t> counter(ds.class_names.size(), 0);
    for (size_t i = 0; i < ds.images.size(); ++i) {
        const auto label = static_cast<size_t>(ds.labels[i]);
        char name[32];
        std::snprintf(name, sizeof(name), "img_%05lld.ppm",
                      static_cast<long long>(counter[label]++));
        write_ppm(ds.images[i], (fs::path(root) / ds.class_names[label] / name).string());
    }
}

std::vector<Tensor> prepare_images(const Dataset& ds, int64_t h, int64_t w) {
    std::vector<Tensor> out;
    out.reserve(ds.images.size());
    for (const Image& img : ds.images) {
        Tensor t = rescale(img);
        if (img.height != h || img.width != w) t = resize_bilinear(t, w, h);
        out.push_back(std::move(t));
    }
    return out;
}

Tensor stack(const std::vector<Tensor>& images, const std::vector<int64_t>& indices) {
    if (indices.empty()) throw ShapeError("stack: empty index list");
    const Shape& s = images.at(static_cast<size_t>(indices[0])).shape();
    Tensor out({static_cast<int64_t>(indices.size()), s[0], s[1], s[2]});
    const int64_t stride = s[0] * s[1] * s[2];
    for (size_t b = 0; b < indices.size(); ++b) {
        const Tensor& img = images.at(static_cast<size_t>(indices[b]));
        if (img.shape() != s)
            throw ShapeError("stack: image " + std::to_string(indices[b]) + " has shape " +
                             shape_str(img.shape()) + ", expected " + shape_str(s));
        std::copy(img.data(), img.data() + stride,
                  out.data() + static_cast<int64_t>(b) * stride);
    }
    return out;
}

}  // namespace aggronet
