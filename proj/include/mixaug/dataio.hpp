#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mixaug/augment.hpp"
#include "mixaug/tensor.hpp"

namespace mixaug {

// Five (x, y) anchor points in pixel coordinates, ordered: left eye, right
// eye, nose, left mouth corner, right mouth corner.
struct Landmarks5 {
    std::array<double, 10> pts{};

    double x(std::size_t i) const { return pts[2 * i]; }
    double y(std::size_t i) const { return pts[2 * i + 1]; }
};

// Canonical frontal positions of the five anchors in an S x S output frame.
struct AlignmentTemplate {
    std::array<double, 10> pts{};
    std::size_t out_size = 0;
};

// Standard five-point frontal layout scaled to the requested output size.
AlignmentTemplate default_template(std::size_t out_size);

// Row-major 2x3 affine [a b tx; c d ty] mapping (x, y) -> (ax+by+tx, cx+dy+ty).
struct AffineMatrix {
    std::array<double, 6> m{1, 0, 0, 0, 1, 0};

    void apply(double x, double y, double& ox, double& oy) const {
        ox = m[0] * x + m[1] * y + m[2];
        oy = m[3] * x + m[4] * y + m[5];
    }
};

// Least-squares affine (6 DOF) minimizing sum ||A*src_k - template_k||^2,
// solved via the normal equations. Collinear landmarks make the normal
// matrix singular -> GeometryError.
AffineMatrix solve_affine(const Landmarks5& src, const AlignmentTemplate& tmpl);

// Inverse-mapped bilinear warp into an out_size x out_size frame;
// out-of-bounds samples read as 0.
Tensor warp_affine(const Tensor& img, const AffineMatrix& a, std::size_t out_size);

// Bilinear resize to target x target (corner-aligned sampling, so resizing to
// the source size is the identity).
Tensor resize_bilinear(const Tensor& img, std::size_t target);

// Maps byte-valued pixels 0..255 onto [0,1].
Tensor normalize_pixels(const Tensor& img_bytes);

// NetPBM P5 (1 channel) / P6 (3 channels), maxval 255. write_pnm takes pixels
// in [0,1]; read_pnm returns byte values 0..255 as doubles, shaped [H,W,C].
void write_pnm(const std::string& path, const Tensor& img01);
Tensor read_pnm(const std::string& path);

// Raw tensor file: magic, extent list, then 64-bit little-endian reals.
void write_tensor_file(const std::string& path, const Tensor& t);
Tensor read_tensor_file(const std::string& path);

struct ManifestRecord {
    std::string path;  // relative to the manifest's directory
    std::size_t class_index = 0;
    std::optional<Landmarks5> landmarks;
};

// Manifest: `key=value` header lines (k, size, optional template and classes),
// then a `path,class[,lx1,ly1,...,lx5,ly5]` CSV header and one row per image.
struct DatasetManifest {
    std::size_t k = 0;
    std::size_t size = 0;
    std::optional<AlignmentTemplate> tmpl;
    std::vector<std::string> class_names;
    std::vector<ManifestRecord> records;
    std::string base_dir;
};

DatasetManifest read_manifest(const std::string& path);
void write_manifest(const std::string& path, const DatasetManifest& manifest);

// Decodes every record, aligns when landmarks are present, resizes to the
// manifest size, normalizes to [0,1], and one-hot encodes labels. Raw tensor
// images must already hold values in [0,1].
std::vector<LabeledImage> load_dataset(const std::string& manifest_path);
std::vector<LabeledImage> load_dataset(const DatasetManifest& manifest);

struct SyntheticOptions {
    std::size_t classes = 7;
    std::size_t per_class = 200;  // training images per class (balanced case)
    std::size_t size = 16;
    std::uint64_t seed = 0;
    std::vector<double> imbalance;  // optional per-class weights, else balanced
};

struct SyntheticDataset {
    std::vector<LabeledImage> train;
    std::vector<LabeledImage> eval;
    std::vector<Landmarks5> train_landmarks;
    std::vector<Landmarks5> eval_landmarks;
    std::vector<std::string> class_names;
    std::size_t size = 0;
};

// Deterministic procedural expression glyphs: per-class face schematics
// rendered with anti-aliased strokes, plus per-sample Gaussian pixel noise
// (sigma 0.05), rotation within +/-15 degrees and translation within +/-10%.
// The eval split holds one image for every four training images.
SyntheticDataset generate_synthetic(const SyntheticOptions& opts);

// Writes images as PGM plus train.csv / eval.csv manifests under out_dir.
// Landmark columns are emitted only when with_landmarks is set.
void write_synthetic(const SyntheticDataset& data, const std::string& out_dir,
                     bool with_landmarks);

}  // namespace mixaug
