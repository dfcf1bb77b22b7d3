#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aggronet/layers.hpp"

namespace aggronet {

enum class BackboneFamily { vgg_style, inception_style };

struct VggBlock {
    int64_t conv_count = 1;
    int64_t channels = 8;

    bool operator==(const VggBlock&) const = default;
};

struct InceptionWidths {
    int64_t b1x1 = 8;
    int64_t b3x3_reduce = 8;
    int64_t b3x3 = 16;
    int64_t b5x5_reduce = 4;
    int64_t b5x5 = 8;
    int64_t pool_proj = 8;

    int64_t out_channels() const { return b1x1 + b3x3 + b5x5 + pool_proj; }

    bool operator==(const InceptionWidths&) const = default;
};

struct BackboneSpec {
    BackboneFamily family = BackboneFamily::vgg_style;
    std::vector<VggBlock> vgg_blocks;                 // vgg_style only
    int64_t stem_channels = 8;                        // inception_style only
    std::vector<InceptionWidths> inception_blocks;    // inception_style only

    bool operator==(const BackboneSpec&) const = default;
};

// The whole network: two backbones over one input, GAP + concat fusion,
// dense head ending in softmax. `freeze` holds glob patterns over layer
// names; matching layers get trainable=false.
struct HybridSpec {
    int64_t input_h = 32;
    int64_t input_w = 32;
    int64_t class_count = 8;
    BackboneSpec backbone_a;          // vgg_style
    BackboneSpec backbone_b;          // inception_style
    std::vector<int64_t> head;        // dense widths, last entry == class_count
    double dropout_rate = 0.5;
    std::vector<std::string> freeze;

    bool operator==(const HybridSpec&) const = default;
};

HybridSpec default_desk_spec();

// Rejects inconsistent specs with ConfigError; messages carry dotted field
// paths. build() runs this first.
void validate_spec(const HybridSpec& spec);

// Four parallel branches: 1x1; 1x1 reduce -> 3x3; 1x1 reduce -> 5x5;
// maxpool 3x3 stride 1 `same` -> 1x1 projection. Each convolution is
// ReLU-activated; outputs are channel-concatenated.
struct InceptionBlockLayers {
    std::vector<Layer> b1, b3, b5, pool;
};

struct Model {
    HybridSpec spec;
    std::vector<std::string> class_names;
    std::vector<Layer> backbone_a;
    std::vector<Layer> stem;
    std::vector<InceptionBlockLayers> inception;
    std::vector<Layer> head;   // dense/relu/dropout stack ending in softmax
    int64_t feat_a = 0;        // GAP width of backbone_a
    int64_t feat_b = 0;        // GAP width of backbone_b
};

// Deterministic initialization from `seed`: He-uniform conv/dense weights,
// zero biases, parameters drawn in layer-walk order. Freeze patterns are
// applied before return. `class_names` defaults to class_0..class_{K-1}.
Model build(const HybridSpec& spec, uint64_t seed, std::vector<std::string> class_names = {});

// All layers in the fixed walk order (backbone_a, stem, inception branches
// b1/b3/b5/pool per block, head). Layer ids index this walk.
std::vector<Layer*> layer_walk(Model& m);
std::vector<const Layer*> layer_walk(const Model& m);

// '*' matches any character run, '?' one character.
bool glob_match(const std::string& pattern, const std::string& name);

struct InceptionTrace {
    std::vector<LayerCacheT<float>> b1, b3, b5, pool;
    std::vector<int64_t> widths;  // the four branch output widths, in order
};

// Everything backward_hybrid needs from one training forward pass.
struct ForwardTrace {
    std::vector<LayerCacheT<float>> a_layers;
    std::vector<LayerCacheT<float>> stem_layers;
    std::vector<InceptionTrace> inception;
    LayerCacheT<float> gap_a, gap_b;
    std::vector<LayerCacheT<float>> head_layers;
};

// Per-layer parameter gradients, indexed by layer id (layer_walk order).
struct LayerGrads {
    Tensor weights;
    Tensor bias;
};

// Runs both backbones on the batch, GAP + concat, head, softmax. `rng`
// feeds dropout in train mode. Pixel values outside [0,1] only warn.
Tensor forward_hybrid(const Model& m, const Tensor& batch, Mode mode, SeededRng* rng = nullptr,
                      ForwardTrace* trace = nullptr);

// Reverse pass from the loss gradient with respect to the logits (the head's
// softmax is folded into the loss gradient and skipped here).
std::vector<LayerGrads> backward_hybrid(const Model& m, const ForwardTrace& trace,
                                        const Tensor& grad_logits);

InceptionBlockLayers make_inception_block(const std::string& prefix, int64_t c_in,
                                          const InceptionWidths& w, SeededRng& rng);

Tensor inception_forward(const InceptionBlockLayers& blk, const Tensor& x, Mode mode,
                         SeededRng* rng = nullptr, InceptionTrace* trace = nullptr);

// Directory checkpoint: manifest.json (format version, spec, class names,
// tensor table) + weights.bin (little-endian float32 in manifest order).
// Both files are written to temporaries and renamed into place.
void save_checkpoint(const Model& m, const std::string& dir);
Model load_checkpoint(const std::string& dir);

}  // namespace aggronet
