#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "mixaug/dataio.hpp"
#include "mixaug/errors.hpp"
#include "mixaug/rng.hpp"

namespace fs = std::filesystem;

namespace mixaug {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kInk = 0.92;
constexpr double kBackground = 0.08;
constexpr double kNoiseSigma = 0.05;
constexpr double kMaxRotationDeg = 15.0;
constexpr double kMaxTranslation = 0.10;  // fraction of the canvas size

// Schematic face parameters, all lengths as fractions of the canvas size.
struct GlyphParams {
    double eye_spacing;
    double eye_y;
    double eye_rx;
    double eye_open;     // vertical/horizontal eye aspect
    double brow_angle;   // radians; positive tilts the inner end down
    double brow_raise;   // gap between brow and eye
    double mouth_y;
    double mouth_width;  // half-width
    double mouth_curve;  // control-point offset; positive = smile
    double mouth_open;   // >0 renders an open-mouth ellipse of this half-height
};

// Seven expression archetypes (surprise, fear, disgust, happiness, sadness,
// anger, neutral). Neighbours such as surprise/fear and anger/disgust stay
// deliberately close so the task is not saturated.
const GlyphParams kArchetypes[7] = {
    // eye_sp eye_y  eye_rx open  brow_a  brow_r mouth_y m_w   curve  open
    {0.34, 0.40, 0.050, 1.30, 0.00, 0.085, 0.70, 0.080, 0.00, 0.065},   // surprise
    {0.30, 0.40, 0.046, 1.15, -0.38, 0.075, 0.70, 0.120, -0.08, 0.035}, // fear
    {0.32, 0.41, 0.046, 0.55, -0.18, 0.035, 0.69, 0.125, -0.30, 0.0},   // disgust
    {0.34, 0.40, 0.048, 0.90, 0.12, 0.055, 0.68, 0.155, 0.42, 0.0},     // happiness
    {0.32, 0.41, 0.046, 0.70, 0.34, 0.055, 0.71, 0.130, -0.38, 0.0},    // sadness
    {0.31, 0.41, 0.044, 0.60, -0.52, 0.030, 0.70, 0.120, -0.06, 0.0},   // anger
    {0.33, 0.40, 0.046, 0.85, 0.02, 0.055, 0.70, 0.130, 0.02, 0.0},     // neutral
};

const char* kExpressionNames[7] = {"surprise", "fear",  "disgust", "happiness",
                                   "sadness",  "anger", "neutral"};

GlyphParams class_params(std::size_t cls) {
    GlyphParams p = kArchetypes[cls % 7];
    if (cls >= 7) {
        // extra classes reuse the archetype cycle with a deterministic tweak
        const double t = static_cast<double>(cls / 7);
        p.eye_spacing += 0.02 * t;
        p.mouth_curve *= 1.0 + 0.3 * t;
        p.mouth_width += 0.015 * t;
        p.brow_raise += 0.012 * t;
    }
    return p;
}

struct Pose {
    double c = 1.0, s = 0.0, tx = 0.0, ty = 0.0, cx = 0.0, cy = 0.0;

    void apply(double x, double y, double& ox, double& oy) const {
        const double dx = x - cx, dy = y - cy;
        ox = cx + c * dx - s * dy + tx;
        oy = cy + s * dx + c * dy + ty;
    }
};

struct Canvas {
    std::size_t s;
    std::vector<double>& px;

    void stamp(std::size_t x, std::size_t y, double alpha) {
        double& v = px[y * s + x];
        const double lit = kBackground + alpha * (kInk - kBackground);
        if (lit > v) v = lit;
    }
};

double coverage(double dist, double half_width) {
    // 1px anti-aliasing ramp around the stroke boundary
    return std::clamp(half_width - dist + 0.5, 0.0, 1.0);
}

void draw_segment(Canvas& cv, double x0, double y0, double x1, double y1, double width) {
    const double hw = width * 0.5;
    const std::size_t s = cv.s;
    const double pad = hw + 1.5;
    const long xa = std::max(0L, static_cast<long>(std::floor(std::min(x0, x1) - pad)));
    const long xb = std::min<long>(static_cast<long>(s) - 1,
                                   static_cast<long>(std::ceil(std::max(x0, x1) + pad)));
    const long ya = std::max(0L, static_cast<long>(std::floor(std::min(y0, y1) - pad)));
    const long yb = std::min<long>(static_cast<long>(s) - 1,
                                   static_cast<long>(std::ceil(std::max(y0, y1) + pad)));
    const double vx = x1 - x0, vy = y1 - y0;
    const double len2 = vx * vx + vy * vy;
    for (long y = ya; y <= yb; ++y) {
        for (long x = xa; x <= xb; ++x) {
            const double wx = static_cast<double>(x) - x0;
            const double wy = static_cast<double>(y) - y0;
            double t = len2 > 0.0 ? (wx * vx + wy * vy) / len2 : 0.0;
            t = std::clamp(t, 0.0, 1.0);
            const double dx = wx - t * vx, dy = wy - t * vy;
            const double a = coverage(std::sqrt(dx * dx + dy * dy), hw);
            if (a > 0.0) cv.stamp(static_cast<std::size_t>(x), static_cast<std::size_t>(y), a);
        }
    }
}

// Approximate signed distance to a rotated ellipse boundary; good enough for
// one-pixel anti-aliasing at glyph scale.
void draw_ellipse(Canvas& cv, double cx, double cy, double rx, double ry, double angle,
                  bool filled, double stroke_width) {
    const std::size_t s = cv.s;
    const double r = std::max(rx, ry) + stroke_width + 1.5;
    const long xa = std::max(0L, static_cast<long>(std::floor(cx - r)));
    const long xb = std::min<long>(static_cast<long>(s) - 1, static_cast<long>(std::ceil(cx + r)));
    const long ya = std::max(0L, static_cast<long>(std::floor(cy - r)));
    const long yb = std::min<long>(static_cast<long>(s) - 1, static_cast<long>(std::ceil(cy + r)));
    const double ca = std::cos(angle), sa = std::sin(angle);
    const double scale = std::min(rx, ry);
    for (long y = ya; y <= yb; ++y) {
        for (long x = xa; x <= xb; ++x) {
            const double dx = static_cast<double>(x) - cx;
            const double dy = static_cast<double>(y) - cy;
            const double ex = (ca * dx + sa * dy) / rx;
            const double ey = (-sa * dx + ca * dy) / ry;
            const double q = std::sqrt(ex * ex + ey * ey);
            const double dist = (q - 1.0) * scale;  // negative inside
            const double a = filled ? std::clamp(0.5 - dist, 0.0, 1.0)
                                    : coverage(std::fabs(dist), stroke_width * 0.5);
            if (a > 0.0) cv.stamp(static_cast<std::size_t>(x), static_cast<std::size_t>(y), a);
        }
    }
}

void draw_quad_bezier(Canvas& cv, const Pose& pose, double x0, double y0, double cx, double cy,
                      double x1, double y1, double width) {
    constexpr int kSegments = 12;
    double px = 0.0, py = 0.0;
    pose.apply(x0, y0, px, py);
    for (int i = 1; i <= kSegments; ++i) {
        const double t = static_cast<double>(i) / kSegments;
        const double omt = 1.0 - t;
        const double bx = omt * omt * x0 + 2.0 * omt * t * cx + t * t * x1;
        const double by = omt * omt * y0 + 2.0 * omt * t * cy + t * t * y1;
        double qx = 0.0, qy = 0.0;
        pose.apply(bx, by, qx, qy);
        draw_segment(cv, px, py, qx, qy, width);
        px = qx;
        py = qy;
    }
}

void posed_segment(Canvas& cv, const Pose& pose, double x0, double y0, double x1, double y1,
                   double width) {
    double ax, ay, bx, by;
    pose.apply(x0, y0, ax, ay);
    pose.apply(x1, y1, bx, by);
    draw_segment(cv, ax, ay, bx, by, width);
}

// Renders one glyph and reports the posed five-point landmarks.
void render_glyph(std::vector<double>& pixels, std::size_t s, const GlyphParams& g,
                  const Pose& pose, Landmarks5& landmarks) {
    Canvas cv{s, pixels};
    const double S = static_cast<double>(s);
    const double stroke = std::max(1.0, S / 18.0);
    const double fx = 0.5 * S, fy = 0.52 * S;

    // face outline
    draw_ellipse(cv, fx + pose.tx, fy + pose.ty, 0.40 * S, 0.44 * S, std::atan2(pose.s, pose.c),
                 false, stroke);

    const double eye_dx = g.eye_spacing * 0.5 * S;
    const double eye_y = g.eye_y * S;
    const double ang = std::atan2(pose.s, pose.c);
    for (int side = -1; side <= 1; side += 2) {
        const double ex = fx + side * eye_dx;
        double px, py;
        pose.apply(ex, eye_y, px, py);
        draw_ellipse(cv, px, py, g.eye_rx * S, g.eye_rx * g.eye_open * S, ang, true, 0.0);

        // brow: segment above the eye, tilted by brow_angle (mirrored per side)
        const double brow_y = eye_y - (g.eye_rx * g.eye_open + g.brow_raise) * S;
        const double half = g.eye_rx * 1.5 * S;
        const double tilt = std::tan(g.brow_angle) * half * side;
        posed_segment(cv, pose, ex - half, brow_y + tilt, ex + half, brow_y - tilt, stroke);
    }

    // nose
    posed_segment(cv, pose, fx, 0.50 * S, fx, 0.60 * S, stroke);

    const double mouth_y = g.mouth_y * S;
    const double mw = g.mouth_width * S;
    if (g.mouth_open > 0.0) {
        double mx, my;
        pose.apply(fx, mouth_y, mx, my);
        draw_ellipse(cv, mx, my, mw, g.mouth_open * S, ang, false, stroke);
    } else {
        draw_quad_bezier(cv, pose, fx - mw, mouth_y, fx, mouth_y + 2.0 * g.mouth_curve * mw,
                         fx + mw, mouth_y, stroke);
    }

    const double nose_tip_y = 0.60 * S;
    const double lm_src[10] = {fx - eye_dx, eye_y,   fx + eye_dx, eye_y,   fx,
                               nose_tip_y,  fx - mw, mouth_y,     fx + mw, mouth_y};
    for (std::size_t p = 0; p < 5; ++p) {
        pose.apply(lm_src[2 * p], lm_src[2 * p + 1], landmarks.pts[2 * p],
                   landmarks.pts[2 * p + 1]);
    }
}

LabeledImage make_sample(std::size_t s, std::size_t k, std::size_t cls, Rng& rng,
                         Landmarks5& landmarks) {
    const double S = static_cast<double>(s);
    Pose pose;
    pose.cx = 0.5 * S;
    pose.cy = 0.5 * S;
    const double theta = rng.uniform(-kMaxRotationDeg, kMaxRotationDeg) * kPi / 180.0;
    pose.c = std::cos(theta);
    pose.s = std::sin(theta);
    pose.tx = rng.uniform(-kMaxTranslation, kMaxTranslation) * S;
    pose.ty = rng.uniform(-kMaxTranslation, kMaxTranslation) * S;

    std::vector<double> pixels(s * s, kBackground);
    render_glyph(pixels, s, class_params(cls), pose, landmarks);
    for (double& v : pixels) {
        v = std::clamp(v + kNoiseSigma * rng.gaussian(), 0.0, 1.0);
    }
    Tensor img({s, s, 1}, std::move(pixels));
    Tensor label({k});
    label[cls] = 1.0;
    return LabeledImage{std::move(img), std::move(label)};
}

// Largest-remainder apportionment: counts sum to `total` exactly.
std::vector<std::size_t> apportion(const std::vector<double>& weights, std::size_t total) {
    const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<std::size_t> counts(weights.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double share = weights[i] / wsum * static_cast<double>(total);
        counts[i] = static_cast<std::size_t>(std::floor(share));
        assigned += counts[i];
        remainders.emplace_back(share - std::floor(share), i);
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (std::size_t i = 0; assigned < total; ++i, ++assigned) {
        ++counts[remainders[i % remainders.size()].second];
    }
    return counts;
}

}  // namespace

SyntheticDataset generate_synthetic(const SyntheticOptions& opts) {
    if (opts.classes < 2) {
        throw ArgumentError("synthetic generator needs at least 2 classes");
    }
    if (opts.per_class < 2) {
        throw ArgumentError("synthetic generator needs at least 2 images per class");
    }
    if (opts.size < 8) {
        throw ArgumentError("synthetic glyphs need size >= 8");
    }
    std::vector<double> weights = opts.imbalance;
    if (weights.empty()) {
        weights.assign(opts.classes, 1.0);
    } else if (weights.size() != opts.classes) {
        throw ArgumentError("imbalance profile needs one weight per class");
    }
    for (double w : weights) {
        if (!(w > 0.0) || !std::isfinite(w)) {
            throw ArgumentError("imbalance weights must be positive");
        }
    }

    const std::size_t train_total = opts.classes * opts.per_class;
    const std::size_t eval_total = (train_total + 2) / 4;  // 4:1 train:eval
    const auto train_counts = apportion(weights, train_total);
    const auto eval_counts = apportion(weights, eval_total);
    for (std::size_t c = 0; c < opts.classes; ++c) {
        if (train_counts[c] == 0 || eval_counts[c] == 0) {
            throw ArgumentError("imbalance weight for class " + std::to_string(c) +
                                " leaves it with no samples");
        }
    }

    SyntheticDataset data;
    data.size = opts.size;
    for (std::size_t c = 0; c < opts.classes; ++c) {
        data.class_names.push_back(c < 7 ? kExpressionNames[c] : "class" + std::to_string(c));
    }

    Rng rng(opts.seed);
    for (std::size_t c = 0; c < opts.classes; ++c) {
        for (std::size_t n = 0; n < train_counts[c]; ++n) {
            Landmarks5 lm;
            data.train.push_back(make_sample(opts.size, opts.classes, c, rng, lm));
            data.train_landmarks.push_back(lm);
        }
    }
    for (std::size_t c = 0; c < opts.classes; ++c) {
        for (std::size_t n = 0; n < eval_counts[c]; ++n) {
            Landmarks5 lm;
            data.eval.push_back(make_sample(opts.size, opts.classes, c, rng, lm));
            data.eval_landmarks.push_back(lm);
        }
    }
    return data;
}

void write_synthetic(const SyntheticDataset& data, const std::string& out_dir,
                     bool with_landmarks) {
    const fs::path root(out_dir);
    fs::create_directories(root / "images");

    auto write_split = [&](const std::vector<LabeledImage>& images,
                           const std::vector<Landmarks5>& landmarks, const std::string& stem) {
        DatasetManifest manifest;
        manifest.k = data.class_names.size();
        manifest.size = data.size;
        manifest.tmpl = default_template(data.size);
        manifest.class_names = data.class_names;
        manifest.base_dir = root.string();
        for (std::size_t i = 0; i < images.size(); ++i) {
            char name[64];
            std::snprintf(name, sizeof(name), "images/%s_%06zu.pgm", stem.c_str(), i);
            write_pnm((root / name).string(), images[i].pixels);
            ManifestRecord rec;
            rec.path = name;
            std::size_t cls = 0;
            for (std::size_t k = 0; k < images[i].label.size(); ++k) {
                if (images[i].label[k] == 1.0) cls = k;
            }
            rec.class_index = cls;
            if (with_landmarks) rec.landmarks = landmarks[i];
            manifest.records.push_back(std::move(rec));
        }
        write_manifest((root / (stem + ".csv")).string(), manifest);
    };
    write_split(data.train, data.train_landmarks, "train");
    write_split(data.eval, data.eval_landmarks, "eval");
}

}  // namespace mixaug
