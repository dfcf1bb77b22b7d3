#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aggronet/rng.hpp"
#include "aggronet/tensor.hpp"

namespace aggronet {

// 8-bit RGB image, row-major, interleaved channels.
struct Image {
    int64_t width = 0;
    int64_t height = 0;
    std::vector<uint8_t> pixels;  // height * width * 3

    uint8_t& at(int64_t y, int64_t x, int64_t c) { return pixels[(y * width + x) * 3 + c]; }
    uint8_t at(int64_t y, int64_t x, int64_t c) const { return pixels[(y * width + x) * 3 + c]; }
    bool operator==(const Image&) const = default;
};

// Binary PPM (`P6`, maxval 255). Header comments introduced by '#' are
// accepted. Throws FormatError on wrong magic, maxval != 255, or a pixel
// payload shorter than the header promises; `origin` names the source in
// error messages.
Image decode_ppm(const uint8_t* bytes, size_t len, const std::string& origin = "<memory>");
Image decode_ppm(const std::vector<uint8_t>& bytes, const std::string& origin = "<memory>");

std::vector<uint8_t> encode_ppm(const Image& img);

Image read_ppm(const std::string& path);
void write_ppm(const Image& img, const std::string& path);

// [H,W,3] float tensor, every channel divided by 255.
Tensor rescale(const Image& img);

struct AugmentParams {
    double p_hflip = 0.5;
    double max_rotation_deg = 15.0;
    double max_zoom = 0.1;
};

// Mirror columns: out(y, x) = in(y, W-1-x).
Tensor hflip_image(const Tensor& img);

// Rotate about the image center ((W-1)/2, (H-1)/2) by `degrees`, bilinear
// resampling with out-of-bounds source taps contributing 0. Output size
// unchanged.
Tensor rotate_image(const Tensor& img, double degrees);

// Scale about the center by `factor` (> 1 zooms in, < 1 zooms out and fills
// the border with 0). Output size unchanged.
Tensor zoom_image(const Tensor& img, double factor);

// In order: horizontal flip with probability p_hflip, rotation by an angle
// uniform in +-max_rotation_deg, zoom by a factor uniform in
// [1-max_zoom, 1+max_zoom]. Exactly three rng draws regardless of which
// transforms fire; degenerate draws (angle 0, factor 1) skip the resample so
// all-zero params are a bit-exact identity.
Tensor augment(const Tensor& img, const AugmentParams& params, SeededRng& rng);

struct Dataset {
    std::vector<Image> images;
    std::vector<int> labels;  // index into class_names
    std::vector<std::string> class_names;

    int64_t size() const { return static_cast<int64_t>(images.size()); }
};

// Directory ingestion: every subdirectory of `root` holding at least one
// .ppm file becomes a class, names sorted byte-wise, files sorted within
// each class. Subdirectories with no .ppm files are skipped with a warning
// on stderr; zero usable classes is an IoError.
Dataset load_dataset(const std::string& root);

// Color-plus-motif synthetic corpus: class k gets a distinct palette color
// (K <= 8) and a stripes/circles/checker motif of class- and
// instance-varying period, with seeded gaussian pixel noise (sigma = 10 on
// the 8-bit scale). Same arguments, same images, bit for bit.
Dataset synth_dataset(int n_per_class, int class_count, int64_t size, uint64_t seed);

// Write `ds` as root/<class_name>/img_<n>.ppm, the layout load_dataset reads.
void write_dataset_tree(const Dataset& ds, const std::string& root);

// rescale + resize_bilinear every image to [h, w, 3].
std::vector<Tensor> prepare_images(const Dataset& ds, int64_t h, int64_t w);

// Gather rows `indices` of equally shaped [H,W,C] images into [B,H,W,C].
Tensor stack(const std::vector<Tensor>& images, const std::vector<int64_t>& indices);

}  // namespace aggronet
