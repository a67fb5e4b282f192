#include "mixaug/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "byteio.hpp"
#include "mixaug/errors.hpp"

namespace fs = std::filesystem;

namespace mixaug {

namespace {

// Widely used frontal five-point layout, defined on a 112x112 frame.
constexpr std::array<double, 10> kTemplate112 = {
    38.2946, 51.6963,  // left eye
    73.5318, 51.5014,  // right eye
    56.0252, 71.7366,  // nose
    41.5493, 92.3655,  // left mouth corner
    70.7299, 92.2041,  // right mouth corner
};

constexpr char kTensorMagic[8] = {'M', 'X', 'T', 'E', 'N', '0', '0', '1'};

std::string read_file(const std::string& path, const char* what) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw LoadError(std::string(what) + " not readable: " + path);
    }
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& bytes, const char* what) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw LoadError(std::string("cannot open ") + what + " for writing: " + path);
    }
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) {
        throw LoadError(std::string("failed writing ") + what + ": " + path);
    }
}

// Solves a 3x3 linear system in place by Gaussian elimination with partial
// pivoting. Throws GeometryError when the matrix is (near) singular.
std::array<double, 3> solve3(std::array<std::array<double, 4>, 3> aug) {
    for (int col = 0; col < 3; ++col) {
        int pivot = col;
        for (int r = col + 1; r < 3; ++r) {
            if (std::fabs(aug[r][col]) > std::fabs(aug[pivot][col])) pivot = r;
        }
        if (std::fabs(aug[pivot][col]) < 1e-9) {
            throw GeometryError("alignment normal matrix is singular (collinear landmarks?)");
        }
        std::swap(aug[col], aug[pivot]);
        for (int r = 0; r < 3; ++r) {
            if (r == col) continue;
            const double factor = aug[r][col] / aug[col][col];
            for (int c = col; c < 4; ++c) aug[r][c] -= factor * aug[col][c];
        }
    }
    return {aug[0][3] / aug[0][0], aug[1][3] / aug[1][1], aug[2][3] / aug[2][2]};
}

double bilinear_sample(const double* img, std::size_t h, std::size_t w, std::size_t c,
                       double sy, double sx, std::size_t ch) {
    const double fx = std::floor(sx);
    const double fy = std::floor(sy);
    const long x0 = static_cast<long>(fx);
    const long y0 = static_cast<long>(fy);
    const double ax = sx - fx;
    const double ay = sy - fy;
    auto px = [&](long y, long x) -> double {
        if (y < 0 || x < 0 || y >= static_cast<long>(h) || x >= static_cast<long>(w)) return 0.0;
        return img[(static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)) * c + ch];
    };
    return (1.0 - ay) * ((1.0 - ax) * px(y0, x0) + ax * px(y0, x0 + 1)) +
           ay * ((1.0 - ax) * px(y0 + 1, x0) + ax * px(y0 + 1, x0 + 1));
}

void check_rank3_image(const Tensor& img, const char* what) {
    if (img.rank() != 3) {
        throw DimensionError(std::string(what) + " expects a [HxWxC] image, got " +
                             img.shape_str());
    }
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    for (char ch : line) {
        if (ch == ',') {
            cells.push_back(cell);
            cell.clear();
        } else {
            cell.push_back(ch);
        }
    }
    cells.push_back(cell);
    return cells;
}

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

double parse_real(const std::string& s, const std::string& context) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size() || !std::isfinite(v)) {
            throw std::invalid_argument("trailing junk");
        }
        return v;
    } catch (const std::exception&) {
        throw LoadError("bad number '" + s + "' in " + context);
    }
}

std::size_t parse_index(const std::string& s, const std::string& context) {
    try {
        std::size_t used = 0;
        const unsigned long v = std::stoul(s, &used);
        if (used != s.size()) throw std::invalid_argument("trailing junk");
        return v;
    } catch (const std::exception&) {
        throw LoadError("bad integer '" + s + "' in " + context);
    }
}

std::string fmt_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

constexpr const char* kCsvHeaderPlain = "path,class";
constexpr const char* kCsvHeaderLandmarks = "path,class,lx1,ly1,lx2,ly2,lx3,ly3,lx4,ly4,lx5,ly5";

}  // namespace

AlignmentTemplate default_template(std::size_t out_size) {
    if (out_size == 0) {
        throw ArgumentError("template output size must be positive");
    }
    AlignmentTemplate t;
    t.out_size = out_size;
    const double scale = static_cast<double>(out_size) / 112.0;
    for (std::size_t i = 0; i < 10; ++i) t.pts[i] = kTemplate112[i] * scale;
    return t;
}

AffineMatrix solve_affine(const Landmarks5& src, const AlignmentTemplate& tmpl) {
    for (double v : src.pts) {
        if (!std::isfinite(v)) {
            throw GeometryError("landmark coordinates must be finite");
        }
    }
    // Normal equations of the least-squares problem; the x and y rows share
    // the same 3x3 Gram matrix over u = (sx, sy, 1).
    std::array<std::array<double, 4>, 3> gx{}, gy{};
    for (std::size_t p = 0; p < 5; ++p) {
        const double u[3] = {src.x(p), src.y(p), 1.0};
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) {
                gx[r][c] += u[r] * u[c];
            }
            gx[r][3] += u[r] * tmpl.pts[2 * p];
            gy[r][3] += u[r] * tmpl.pts[2 * p + 1];
        }
    }
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) gy[r][c] = gx[r][c];
    }
    const auto row_x = solve3(gx);
    const auto row_y = solve3(gy);
    AffineMatrix a;
    a.m = {row_x[0], row_x[1], row_x[2], row_y[0], row_y[1], row_y[2]};
    return a;
}

Tensor warp_affine(const Tensor& img, const AffineMatrix& a, std::size_t out_size) {
    check_rank3_image(img, "warp_affine");
    if (out_size == 0) {
        throw ArgumentError("warp output size must be positive");
    }
    const std::size_t h = img.extent(0), w = img.extent(1), c = img.extent(2);
    Tensor out({out_size, out_size, c});
    const double det = a.m[0] * a.m[4] - a.m[1] * a.m[3];
    if (std::fabs(det) < 1e-12) {
        return out;  // degenerate forward map: nothing lands in the frame
    }
    const double i00 = a.m[4] / det, i01 = -a.m[1] / det;
    const double i10 = -a.m[3] / det, i11 = a.m[0] / det;
    const double* src = img.data().data();
    double* dst = out.data().data();
    for (std::size_t y = 0; y < out_size; ++y) {
        for (std::size_t x = 0; x < out_size; ++x) {
            const double rx = static_cast<double>(x) - a.m[2];
            const double ry = static_cast<double>(y) - a.m[5];
            const double sx = i00 * rx + i01 * ry;
            const double sy = i10 * rx + i11 * ry;
            for (std::size_t ch = 0; ch < c; ++ch) {
                dst[(y * out_size + x) * c + ch] = bilinear_sample(src, h, w, c, sy, sx, ch);
            }
        }
    }
    return out;
}

Tensor resize_bilinear(const Tensor& img, std::size_t target) {
    check_rank3_image(img, "resize_bilinear");
    if (target == 0) {
        throw ArgumentError("resize target must be positive");
    }
    const std::size_t h = img.extent(0), w = img.extent(1), c = img.extent(2);
    if (h == target && w == target) {
        return img;
    }
    Tensor out({target, target, c});
    const double sy_scale =
        target > 1 ? static_cast<double>(h - 1) / static_cast<double>(target - 1) : 0.0;
    const double sx_scale =
        target > 1 ? static_cast<double>(w - 1) / static_cast<double>(target - 1) : 0.0;
    const double y_base = target > 1 ? 0.0 : static_cast<double>(h - 1) / 2.0;
    const double x_base = target > 1 ? 0.0 : static_cast<double>(w - 1) / 2.0;
    const double* src = img.data().data();
    double* dst = out.data().data();
    for (std::size_t y = 0; y < target; ++y) {
        const double sy = y_base + sy_scale * static_cast<double>(y);
        for (std::size_t x = 0; x < target; ++x) {
            const double sx = x_base + sx_scale * static_cast<double>(x);
            for (std::size_t ch = 0; ch < c; ++ch) {
                dst[(y * target + x) * c + ch] = bilinear_sample(src, h, w, c, sy, sx, ch);
            }
        }
    }
    return out;
}

Tensor normalize_pixels(const Tensor& img_bytes) {
    for (double v : img_bytes.data()) {
        if (!(v >= 0.0 && v <= 255.0)) {
            throw DomainError("pixel byte value outside [0,255]");
        }
    }
    Tensor out(img_bytes.shape());
    for (std::size_t i = 0; i < img_bytes.size(); ++i) out[i] = img_bytes[i] / 255.0;
    return out;
}

void write_pnm(const std::string& path, const Tensor& img01) {
    check_rank3_image(img01, "write_pnm");
    const std::size_t h = img01.extent(0), w = img01.extent(1), c = img01.extent(2);
    if (c != 1 && c != 3) {
        throw ArgumentError("NetPBM output supports 1 or 3 channels, got " +
                            std::to_string(c));
    }
    std::string out;
    out += (c == 1) ? "P5\n" : "P6\n";
    out += std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    for (double v : img01.data()) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw DomainError("write_pnm expects pixels in [0,1]");
        }
        out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
    }
    write_file(path, out, "image");
}

Tensor read_pnm(const std::string& path) {
    const std::string buf = read_file(path, "image");
    std::size_t pos = 0;
    auto next_token = [&]() -> std::string {
        // skip whitespace and '#' comments
        while (pos < buf.size()) {
            const char ch = buf[pos];
            if (ch == '#') {
                while (pos < buf.size() && buf[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(ch))) {
                ++pos;
            } else {
                break;
            }
        }
        std::size_t start = pos;
        while (pos < buf.size() && !std::isspace(static_cast<unsigned char>(buf[pos]))) ++pos;
        if (start == pos) {
            throw LoadError("malformed NetPBM header in " + path);
        }
        return buf.substr(start, pos - start);
    };

    const std::string magic = next_token();
    std::size_t channels;
    if (magic == "P5") {
        channels = 1;
    } else if (magic == "P6") {
        channels = 3;
    } else {
        throw LoadError("unsupported NetPBM magic '" + magic + "' in " + path);
    }
    const std::size_t w = parse_index(next_token(), "NetPBM width of " + path);
    const std::size_t h = parse_index(next_token(), "NetPBM height of " + path);
    const std::size_t maxval = parse_index(next_token(), "NetPBM maxval of " + path);
    if (w == 0 || h == 0) {
        throw LoadError("NetPBM image " + path + " has a zero dimension");
    }
    if (maxval != 255) {
        throw LoadError("NetPBM image " + path + " has maxval " + std::to_string(maxval) +
                        ", expected 255");
    }
    ++pos;  // exactly one whitespace byte separates the header from the payload
    const std::size_t count = h * w * channels;
    if (pos + count > buf.size()) {
        throw LoadError("NetPBM image " + path + " payload is truncated");
    }
    std::vector<double> data(count);
    for (std::size_t i = 0; i < count; ++i) {
        data[i] = static_cast<double>(static_cast<unsigned char>(buf[pos + i]));
    }
    return Tensor({h, w, channels}, std::move(data));
}

void write_tensor_file(const std::string& path, const Tensor& t) {
    using namespace byteio;
    std::string out;
    out.append(kTensorMagic, sizeof(kTensorMagic));
    append_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape()) append_u64(out, e);
    for (double v : t.data()) append_f64(out, v);
    write_file(path, out, "tensor file");
}

Tensor read_tensor_file(const std::string& path) {
    const std::string buf = read_file(path, "tensor file");
    byteio::Reader r{buf, 0, "tensor file " + path};
    r.need(sizeof(kTensorMagic));
    if (buf.compare(0, sizeof(kTensorMagic), kTensorMagic, sizeof(kTensorMagic)) != 0) {
        throw LoadError("tensor file " + path + " has a bad magic string");
    }
    r.pos = sizeof(kTensorMagic);
    const std::uint32_t rank = r.u32();
    if (rank > 8) {
        throw LoadError("tensor file " + path + " has implausible rank " + std::to_string(rank));
    }
    std::vector<std::size_t> shape(rank);
    std::size_t count = 1;
    for (auto& e : shape) {
        e = static_cast<std::size_t>(r.u64());
        if (e == 0 || count > (1ull << 32) / std::max<std::size_t>(e, 1)) {
            throw LoadError("tensor file " + path + " has a bad shape");
        }
        count *= e;
    }
    std::vector<double> data(count);
    for (double& v : data) v = r.f64();
    if (r.pos != buf.size()) {
        throw LoadError("tensor file " + path + " has trailing bytes");
    }
    try {
        return Tensor(std::move(shape), std::move(data));
    } catch (const NumericError&) {
        throw LoadError("tensor file " + path + " holds non-finite values");
    }
}

DatasetManifest read_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) {
        throw LoadError("manifest not readable: " + path);
    }
    DatasetManifest m;
    m.base_dir = fs::path(path).parent_path().string();

    std::string line;
    bool header_seen = false;
    bool with_landmarks = false;
    std::size_t line_no = 0;
    std::array<double, 10> tmpl_pts{};
    bool has_tmpl = false;

    while (std::getline(f, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const std::string where = path + ":" + std::to_string(line_no);

        if (!header_seen) {
            if (t.rfind("path,", 0) == 0) {
                if (t == kCsvHeaderPlain) {
                    with_landmarks = false;
                } else if (t == kCsvHeaderLandmarks) {
                    with_landmarks = true;
                } else {
                    throw LoadError("unrecognized CSV header in " + where);
                }
                header_seen = true;
                continue;
            }
            const std::size_t eq = t.find('=');
            if (eq == std::string::npos) {
                throw LoadError("expected key=value or CSV header in " + where);
            }
            const std::string key = trim(t.substr(0, eq));
            const std::string value = trim(t.substr(eq + 1));
            if (key == "k") {
                m.k = parse_index(value, where);
            } else if (key == "size") {
                m.size = parse_index(value, where);
            } else if (key == "template") {
                const auto cells = split_csv(value);
                if (cells.size() != 10) {
                    throw LoadError("template needs 10 reals in " + where);
                }
                for (std::size_t i = 0; i < 10; ++i) {
                    tmpl_pts[i] = parse_real(trim(cells[i]), where);
                }
                has_tmpl = true;
            } else if (key == "classes") {
                for (const auto& name : split_csv(value)) m.class_names.push_back(trim(name));
            } else {
                throw LoadError("unknown manifest key '" + key + "' in " + where);
            }
            continue;
        }

        const auto cells = split_csv(t);
        const std::size_t expected = with_landmarks ? 12 : 2;
        if (cells.size() != expected) {
            throw LoadError("record has " + std::to_string(cells.size()) + " fields, expected " +
                            std::to_string(expected) + " in " + where);
        }
        ManifestRecord rec;
        rec.path = trim(cells[0]);
        if (rec.path.empty()) {
            throw LoadError("record has an empty path in " + where);
        }
        rec.class_index = parse_index(trim(cells[1]), where);
        if (with_landmarks) {
            bool all_empty = true;
            for (std::size_t i = 2; i < 12; ++i) {
                if (!trim(cells[i]).empty()) all_empty = false;
            }
            if (!all_empty) {
                Landmarks5 lm;
                for (std::size_t i = 0; i < 10; ++i) {
                    lm.pts[i] = parse_real(trim(cells[i + 2]), where);
                }
                rec.landmarks = lm;
            }
        }
        m.records.push_back(std::move(rec));
    }

    if (m.k < 2) {
        throw LoadError("manifest " + path + " needs k >= 2");
    }
    if (m.size == 0) {
        throw LoadError("manifest " + path + " needs a positive size");
    }
    if (!header_seen) {
        throw LoadError("manifest " + path + " has no CSV header line");
    }
    if (has_tmpl) {
        m.tmpl = AlignmentTemplate{tmpl_pts, m.size};
    }
    if (m.class_names.empty()) {
        for (std::size_t i = 0; i < m.k; ++i) m.class_names.push_back("class" + std::to_string(i));
    } else if (m.class_names.size() != m.k) {
        throw LoadError("manifest " + path + " lists " + std::to_string(m.class_names.size()) +
                        " class names for k=" + std::to_string(m.k));
    }
    for (const auto& rec : m.records) {
        if (rec.class_index >= m.k) {
            throw LoadError("record " + rec.path + " in " + path + " has class " +
                            std::to_string(rec.class_index) + " out of range [0," +
                            std::to_string(m.k) + ")");
        }
    }
    return m;
}

void write_manifest(const std::string& path, const DatasetManifest& manifest) {
    std::ostringstream os;
    os << "k=" << manifest.k << "\n";
    os << "size=" << manifest.size << "\n";
    if (manifest.tmpl) {
        os << "template=";
        for (std::size_t i = 0; i < 10; ++i) {
            if (i) os << ",";
            os << fmt_real(manifest.tmpl->pts[i]);
        }
        os << "\n";
    }
    if (!manifest.class_names.empty()) {
        os << "classes=";
        for (std::size_t i = 0; i < manifest.class_names.size(); ++i) {
            if (i) os << ",";
            os << manifest.class_names[i];
        }
        os << "\n";
    }
    const bool with_landmarks =
        std::any_of(manifest.records.begin(), manifest.records.end(),
                    [](const ManifestRecord& r) { return r.landmarks.has_value(); });
    os << (with_landmarks ? kCsvHeaderLandmarks : kCsvHeaderPlain) << "\n";
    for (const auto& rec : manifest.records) {
        os << rec.path << "," << rec.class_index;
        if (with_landmarks) {
            if (rec.landmarks) {
                for (double v : rec.landmarks->pts) os << "," << fmt_real(v);
            } else {
                os << ",,,,,,,,,,";
            }
        }
        os << "\n";
    }
    write_file(path, os.str(), "manifest");
}

std::vector<LabeledImage> load_dataset(const std::string& manifest_path) {
    return load_dataset(read_manifest(manifest_path));
}

std::vector<LabeledImage> load_dataset(const DatasetManifest& manifest) {
    std::vector<LabeledImage> out;
    out.reserve(manifest.records.size());
    const AlignmentTemplate tmpl =
        manifest.tmpl ? *manifest.tmpl : default_template(manifest.size);
    std::size_t channels = 0;

    for (const auto& rec : manifest.records) {
        const std::string full =
            manifest.base_dir.empty() ? rec.path : (fs::path(manifest.base_dir) / rec.path).string();
        try {
            std::string head = read_file(full, "image");
            if (head.size() < 2) {
                throw LoadError("file too short to identify: " + full);
            }
            Tensor img;
            bool already_normalized = false;
            if (head[0] == 'P' && (head[1] == '5' || head[1] == '6')) {
                img = read_pnm(full);
            } else if (head.compare(0, 2, "MX") == 0) {
                img = read_tensor_file(full);
                if (img.rank() == 2) {
                    img = Tensor({img.extent(0), img.extent(1), 1},
                                 std::vector<double>(img.data()));
                }
                check_rank3_image(img, "raw tensor image");
                for (double v : img.data()) {
                    if (!(v >= 0.0 && v <= 1.0)) {
                        throw LoadError("raw tensor image values must lie in [0,1]: " + full);
                    }
                }
                already_normalized = true;
            } else {
                throw LoadError("unrecognized image format: " + full);
            }

            if (channels == 0) {
                channels = img.extent(2);
            } else if (img.extent(2) != channels) {
                throw LoadError("channel count " + std::to_string(img.extent(2)) +
                                " differs from the dataset's " + std::to_string(channels));
            }

            if (rec.landmarks) {
                img = warp_affine(img, solve_affine(*rec.landmarks, tmpl), manifest.size);
            } else {
                img = resize_bilinear(img, manifest.size);
            }
            if (!already_normalized) {
                img = normalize_pixels(img);
            }
            Tensor label({manifest.k});
            label[rec.class_index] = 1.0;
            out.push_back(make_labeled_image(std::move(img), std::move(label)));
        } catch (const LoadError&) {
            throw;
        } catch (const std::exception& e) {
            throw LoadError("record " + rec.path + ": " + e.what());
        }
    }
    return out;
}

}  // namespace mixaug
