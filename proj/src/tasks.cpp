#include "cosmo/tasks.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>

#include "cosmo/spectral.hpp"

namespace cosmo {

ImageGrid::ImageGrid(int h, int w, int c, double fill) : height(h), width(w), channels(c) {
    if (h < 1 || w < 1) throw InvalidArgument("image: height and width must be positive");
    if (c != 1 && c != 3) throw InvalidArgument("image: channels must be 1 or 3");
    pixels = Eigen::MatrixXd::Constant(Eigen::Index(h) * w, c, fill);
}

void ImageGrid::validate() const {
    if (pixels.rows() != Eigen::Index(height) * width || pixels.cols() != channels)
        throw InvalidArgument("image: pixel matrix does not match its dimensions");
    for (Eigen::Index i = 0; i < pixels.size(); ++i) {
        const double v = pixels.data()[i];
        if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("image: pixel values must be finite and in [0, 1]");
    }
}

VolumeGrid::VolumeGrid(int d, double fill) : resolution(d) {
    if (d < 2) throw InvalidArgument("volume: resolution must be at least 2");
    values = Eigen::VectorXd::Constant(Eigen::Index(d) * d * d, fill);
}

void VolumeGrid::validate() const {
    if (values.size() != Eigen::Index(resolution) * resolution * resolution)
        throw InvalidArgument("volume: value count does not match the resolution");
    for (Eigen::Index i = 0; i < values.size(); ++i)
        if (!(values(i) >= 0.0 && values(i) <= 1.0))
            throw InvalidArgument("volume: values must be finite and in [0, 1]");
}

namespace {

double lattice(int i, int n) { return n == 1 ? 0.0 : 2.0 * i / (n - 1) - 1.0; }

CoordinateGrid raster(const std::vector<int>& dims, const std::function<double(int axis, int i)>& coord) {
    CoordinateGrid g;
    g.dims = dims;
    Eigen::Index n = 1;
    for (int d : dims) {
        if (d < 1) throw InvalidArgument("grid: every dimension must be at least 1");
        n *= d;
    }
    const int axes = static_cast<int>(dims.size());
    g.coords.resize(n, axes);
    for (Eigen::Index r = 0; r < n; ++r) {
        Eigen::Index rest = r;
        for (int a = axes - 1; a >= 0; --a) {
            const int i = static_cast<int>(rest % dims[std::size_t(a)]);
            rest /= dims[std::size_t(a)];
            g.coords(r, a) = coord(a, i);
        }
    }
    return g;
}

}  // namespace

CoordinateGrid build_grid(std::span<const int> dims) {
    if (dims.empty()) throw InvalidArgument("grid: needs at least one dimension");
    std::vector<int> d(dims.begin(), dims.end());
    return raster(d, [&d](int a, int i) { return lattice(i, d[std::size_t(a)]); });
}

CoordinateGrid build_grid(std::initializer_list<int> dims) {
    return build_grid(std::span<const int>(dims.begin(), dims.size()));
}

CoordinateGrid block_center_grid(int height, int width, int k) {
    if (k < 1 || height % k != 0 || width % k != 0)
        throw InvalidArgument("grid: block size must divide both sides");
    const std::vector<int> full{height, width};
    const auto center = [&](int a, int i) {
        const int n = full[std::size_t(a)];
        if (n == 1) return 0.0;
        return 2.0 * (i * k + 0.5 * (k - 1)) / (n - 1) - 1.0;
    };
    return raster({height / k, width / k}, center);
}

CoordinateGrid voxel_centers(int resolution) {
    if (resolution < 1) throw InvalidArgument("grid: resolution must be at least 1");
    const std::vector<int> dims{resolution, resolution, resolution};
    return raster(dims, [resolution](int, int i) { return (2.0 * i + 1.0) / resolution - 1.0; });
}

namespace {

void require_same_shape(const ImageGrid& a, const ImageGrid& b, const char* what) {
    if (a.height != b.height || a.width != b.width || a.channels != b.channels)
        throw InvalidArgument(std::string(what) + ": image shapes differ (" + std::to_string(a.height) + "x" +
                              std::to_string(a.width) + "x" + std::to_string(a.channels) + " vs " +
                              std::to_string(b.height) + "x" + std::to_string(b.width) + "x" +
                              std::to_string(b.channels) + ")");
}

}  // namespace

double mse(const ImageGrid& pred, const ImageGrid& gt) {
    require_same_shape(pred, gt, "mse");
    return (pred.pixels - gt.pixels).squaredNorm() / static_cast<double>(pred.pixels.size());
}

double psnr_from_mse(double m, double peak) {
    if (m == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / m);
}

double psnr(const ImageGrid& pred, const ImageGrid& gt, double peak) {
    return psnr_from_mse(mse(pred, gt), peak);
}

namespace {

constexpr int kSsimWindow = 11;

Eigen::VectorXd gaussian_window() {
    Eigen::VectorXd w(kSsimWindow);
    for (int i = 0; i < kSsimWindow; ++i) {
        const double d = i - kSsimWindow / 2;
        w(i) = std::exp(-d * d / (2.0 * 1.5 * 1.5));
    }
    return w / w.sum();
}

// Valid-mode separable filtering of an h x w plane.
Eigen::MatrixXd filter_valid(const Eigen::MatrixXd& plane, const Eigen::VectorXd& w) {
    const Eigen::Index k = w.size();
    const Eigen::Index oh = plane.rows() - k + 1;
    const Eigen::Index ow = plane.cols() - k + 1;
    Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(plane.rows(), ow);
    for (Eigen::Index i = 0; i < k; ++i) rows += w(i) * plane.middleCols(i, ow);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(oh, ow);
    for (Eigen::Index i = 0; i < k; ++i) out += w(i) * rows.middleRows(i, oh);
    return out;
}

Eigen::MatrixXd plane(const ImageGrid& img, int c) {
    Eigen::MatrixXd p(img.height, img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) p(y, x) = img.at(y, x, c);
    return p;
}

}  // namespace

double ssim(const ImageGrid& pred, const ImageGrid& gt) {
    require_same_shape(pred, gt, "ssim");
    if (pred.height < kSsimWindow || pred.width < kSsimWindow)
        throw InvalidArgument("ssim: image is smaller than the 11x11 window");
    const double c1 = 0.01 * 0.01;
    const double c2 = 0.03 * 0.03;
    const Eigen::VectorXd w = gaussian_window();
    double total = 0.0;
    for (int c = 0; c < pred.channels; ++c) {
        const Eigen::MatrixXd a = plane(pred, c);
        const Eigen::MatrixXd b = plane(gt, c);
        const Eigen::MatrixXd ma = filter_valid(a, w);
        const Eigen::MatrixXd mb = filter_valid(b, w);
        const Eigen::MatrixXd saa = filter_valid(a.cwiseProduct(a), w) - ma.cwiseProduct(ma);
        const Eigen::MatrixXd sbb = filter_valid(b.cwiseProduct(b), w) - mb.cwiseProduct(mb);
        const Eigen::MatrixXd sab = filter_valid(a.cwiseProduct(b), w) - ma.cwiseProduct(mb);
        const Eigen::ArrayXXd num = (2.0 * ma.cwiseProduct(mb).array() + c1) * (2.0 * sab.array() + c2);
        const Eigen::ArrayXXd den =
            (ma.array().square() + mb.array().square() + c1) * (saa.array() + sbb.array() + c2);
        total += (num / den).mean();
    }
    return total / pred.channels;
}

ImageGrid photon_noise(const ImageGrid& img, double photons, double readout, std::uint64_t seed) {
    if (!(photons > 0.0)) throw InvalidArgument("photon_noise: photons must be positive");
    if (!(readout >= 0.0)) throw InvalidArgument("photon_noise: readout must be non-negative");
    img.validate();
    ImageGrid out = img;
    const std::uint64_t key = derive_seed(seed, "photon");
    for (Eigen::Index i = 0; i < img.pixels.size(); ++i) {
        std::mt19937_64 gen(mix64(key ^ mix64(static_cast<std::uint64_t>(i))));
        const double lambda = photons * img.pixels.data()[i];
        double counts = 0.0;
        if (lambda > 0.0) counts += static_cast<double>(std::poisson_distribution<long long>(lambda)(gen));
        if (readout > 0.0) counts += static_cast<double>(std::poisson_distribution<long long>(readout)(gen));
        out.pixels.data()[i] = std::clamp(counts / photons, 0.0, 2.0);
    }
    return out;
}

ImageGrid crop_to_multiple(const ImageGrid& img, int k) {
    if (k < 1) throw InvalidArgument("crop: factor must be positive");
    const int h = img.height / k * k;
    const int w = img.width / k * k;
    if (h == 0 || w == 0) throw InvalidArgument("crop: image is smaller than the factor");
    if (h == img.height && w == img.width) return img;
    ImageGrid out(h, w, img.channels);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.pixels.row(out.index(y, x)) = img.pixels.row(img.index(y, x));
    return out;
}

ImageGrid downsample(const ImageGrid& img, int k) {
    const ImageGrid src = crop_to_multiple(img, k);
    ImageGrid out(src.height / k, src.width / k, src.channels);
    const double inv = 1.0 / (double(k) * k);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
            for (int c = 0; c < out.channels; ++c) {
                double acc = 0.0;
                for (int dy = 0; dy < k; ++dy)
                    for (int dx = 0; dx < k; ++dx) acc += src.at(y * k + dy, x * k + dx, c);
                out.at(y, x, c) = acc * inv;
            }
    return out;
}

ImageGrid upsample_nearest(const ImageGrid& img, int k) {
    if (k < 1) throw InvalidArgument("upsample: factor must be positive");
    ImageGrid out(img.height * k, img.width * k, img.channels);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) out.pixels.row(out.index(y, x)) = img.pixels.row(img.index(y / k, x / k));
    return out;
}

Eigen::VectorXd sample_mask(int height, int width, double fraction, std::uint64_t seed) {
    if (height < 1 || width < 1) throw InvalidArgument("sample_mask: dimensions must be positive");
    if (!(fraction > 0.0 && fraction <= 1.0)) throw InvalidArgument("sample_mask: fraction must be in (0, 1]");
    const Eigen::Index n = Eigen::Index(height) * width;
    const auto count = static_cast<Eigen::Index>(std::llround(fraction * static_cast<double>(n)));
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index(0));
    std::mt19937_64 gen(derive_seed(seed, "mask"));
    std::shuffle(order.begin(), order.end(), gen);
    Eigen::VectorXd mask = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < count; ++i) mask(order[std::size_t(i)]) = 1.0;
    return mask;
}

Shape parse_shape(std::string_view name) {
    if (name == "sphere") return Shape::Sphere;
    if (name == "torus") return Shape::Torus;
    throw InvalidArgument("unknown shape '" + std::string(name) + "' (expected sphere or torus)");
}

std::string_view shape_name(Shape shape) { return shape == Shape::Sphere ? "sphere" : "torus"; }

VolumeGrid synthetic_occupancy(Shape shape, int resolution, const ShapeParams& params) {
    if (resolution < 8) throw InvalidArgument("occupancy: resolution must be at least 8");
    if (shape == Shape::Sphere && !(params.radius >= 0.0))
        throw InvalidArgument("occupancy: sphere radius must be non-negative");
    if (shape == Shape::Torus && !(params.major_radius > 0.0 && params.minor_radius > 0.0))
        throw InvalidArgument("occupancy: torus radii must be positive");
    VolumeGrid vol(resolution);
    const CoordinateGrid g = voxel_centers(resolution);
    for (Eigen::Index i = 0; i < g.coords.rows(); ++i) {
        const double z = g.coords(i, 0);
        const double y = g.coords(i, 1);
        const double x = g.coords(i, 2);
        bool inside = false;
        if (shape == Shape::Sphere) {
            inside = x * x + y * y + z * z < params.radius * params.radius;
        } else {
            const double ring = std::hypot(x, y) - params.major_radius;
            inside = ring * ring + z * z < params.minor_radius * params.minor_radius;
        }
        vol.values(i) = inside ? 1.0 : 0.0;
    }
    return vol;
}

double iou(const VolumeGrid& pred, const VolumeGrid& gt, double threshold) {
    if (pred.resolution != gt.resolution || pred.values.size() != gt.values.size())
        throw InvalidArgument("iou: volume resolutions differ");
    Eigen::Index inter = 0;
    Eigen::Index uni = 0;
    for (Eigen::Index i = 0; i < pred.values.size(); ++i) {
        const bool a = pred.values(i) > threshold;
        const bool b = gt.values(i) > threshold;
        inter += a && b;
        uni += a || b;
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

unsigned char to_byte(double v) {
    const double c = std::clamp(std::isfinite(v) ? v : 0.0, 0.0, 1.0);
    return static_cast<unsigned char>(std::lround(255.0 * c));
}

// Next whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& in) {
    std::string tok;
    int ch;
    while ((ch = in.get()) != EOF) {
        if (ch == '#') {
            while ((ch = in.get()) != EOF && ch != '\n') {
            }
            if (!tok.empty()) return tok;
            continue;
        }
        if (std::isspace(ch)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(static_cast<char>(ch));
    }
    return tok;
}

int header_int(std::istream& in, const std::string& path) {
    const std::string tok = header_token(in);
    try {
        std::size_t used = 0;
        const int v = std::stoi(tok, &used);
        if (used == tok.size() && v > 0) return v;
    } catch (const std::exception&) {
    }
    throw InvalidArgument("read_ppm: malformed header in " + path);
}

}  // namespace

void write_ppm(const std::filesystem::path& path, const ImageGrid& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidArgument("write_ppm: cannot open " + path.string());
    out << (img.channels == 1 ? "P5" : "P6") << '\n' << img.width << ' ' << img.height << "\n255\n";
    std::vector<unsigned char> buf(static_cast<std::size_t>(img.pixels.size()));
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < img.pixels.rows(); ++r)
        for (int c = 0; c < img.channels; ++c) buf[k++] = to_byte(img.pixels(r, c));
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw InvalidArgument("write_ppm: failed writing " + path.string());
}

ImageGrid read_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("read_ppm: cannot open " + path.string());
    const std::string magic = header_token(in);
    if (magic != "P6" && magic != "P5") throw InvalidArgument("read_ppm: " + path.string() + " is not a P5/P6 pixmap");
    const int channels = magic == "P6" ? 3 : 1;
    const int width = header_int(in, path.string());
    const int height = header_int(in, path.string());
    const int maxval = header_int(in, path.string());
    if (maxval > 65535) throw InvalidArgument("read_ppm: maxval above 65535 in " + path.string());
    const int bytes = maxval > 255 ? 2 : 1;
    ImageGrid img(height, width, channels);
    std::vector<unsigned char> buf(static_cast<std::size_t>(img.pixels.size()) * std::size_t(bytes));
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() != static_cast<std::streamsize>(buf.size()))
        throw InvalidArgument("read_ppm: truncated pixel data in " + path.string());
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < img.pixels.rows(); ++r)
        for (int c = 0; c < channels; ++c) {
            int v = buf[k++];
            if (bytes == 2) v = (v << 8) | buf[k++];
            if (v > maxval) throw InvalidArgument("read_ppm: sample above maxval in " + path.string());
            img.pixels(r, c) = static_cast<double>(v) / maxval;
        }
    return img;
}

namespace {
constexpr char kVolumeMagic[8] = {'C', 'S', 'M', 'O', 'V', 'O', 'L', '1'};
}

void write_volume(const std::filesystem::path& path, const VolumeGrid& vol) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidArgument("write_volume: cannot open " + path.string());
    out.write(kVolumeMagic, 8);
    const auto d = static_cast<std::uint64_t>(vol.resolution);
    for (int i = 0; i < 8; ++i) out.put(static_cast<char>((d >> (8 * i)) & 0xff));
    std::vector<unsigned char> buf(static_cast<std::size_t>(vol.values.size()));
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = to_byte(vol.values(Eigen::Index(i)));
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw InvalidArgument("write_volume: failed writing " + path.string());
}

VolumeGrid read_volume(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("read_volume: cannot open " + path.string());
    unsigned char head[16];
    in.read(reinterpret_cast<char*>(head), 16);
    if (in.gcount() != 16 || !std::equal(kVolumeMagic, kVolumeMagic + 8, reinterpret_cast<const char*>(head)))
        throw InvalidArgument("read_volume: " + path.string() + " has no volume header");
    std::uint64_t d = 0;
    for (int i = 0; i < 8; ++i) d |= std::uint64_t(head[8 + i]) << (8 * i);
    if (d < 2 || d > 1024) throw InvalidArgument("read_volume: implausible resolution in " + path.string());
    VolumeGrid vol(static_cast<int>(d));
    std::vector<unsigned char> buf(static_cast<std::size_t>(vol.values.size()));
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() != static_cast<std::streamsize>(buf.size()))
        throw InvalidArgument("read_volume: truncated voxel data in " + path.string());
    for (std::size_t i = 0; i < buf.size(); ++i) vol.values(Eigen::Index(i)) = buf[i] / 255.0;
    return vol;
}

namespace {

constexpr int kTextureCanvas = 512;

// Real part of a random-phase field with amplitude 1 / |f|.
Eigen::MatrixXd pink_field(int h, int w, std::mt19937_64& gen) {
    Eigen::MatrixXcd spec(h, w);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
    for (int u = 0; u < h; ++u)
        for (int v = 0; v < w; ++v) {
            const double fu = std::min(u, h - u);
            const double fv = std::min(v, w - v);
            const double f = std::hypot(fu, fv);
            const double amp = f == 0.0 ? 0.0 : 1.0 / f;
            spec(u, v) = std::polar(amp, phase(gen));
        }
    return dft2(spec).real();
}

}  // namespace

ImageGrid natural_texture(int height, int width, std::uint64_t seed) {
    if (height < 1 || width < 1) throw InvalidArgument("texture size must be positive");
    // The image is the top-left crop of a larger scene, scaled over the whole
    // scene, so it keeps the partial contrast of a crop from a photograph.
    const int canvas_h = std::max(height, std::min(4 * height, kTextureCanvas));
    const int canvas_w = std::max(width, std::min(4 * width, kTextureCanvas));
    ImageGrid img(height, width, 3);
    std::mt19937_64 gen(derive_seed(seed, "texture"));
    const Eigen::MatrixXd luma = pink_field(canvas_h, canvas_w, gen);
    for (int c = 0; c < 3; ++c) {
        const Eigen::MatrixXd ch = luma + 0.4 * pink_field(canvas_h, canvas_w, gen);
        const double lo = ch.minCoeff();
        const double hi = ch.maxCoeff();
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) img.at(y, x, c) = (ch(y, x) - lo) / (hi - lo);
    }
    return img;
}

ImageGrid radial_chirp(int height, int width) {
    ImageGrid img(height, width, 1);
    const CoordinateGrid g = build_grid({height, width});
    for (Eigen::Index i = 0; i < g.coords.rows(); ++i) {
        const double r2 = g.coords(i, 0) * g.coords(i, 0) + g.coords(i, 1) * g.coords(i, 1);
        img.pixels(i, 0) = 0.5 + 0.5 * std::cos(12.0 * kPi * r2);
    }
    return img;
}

}  // namespace cosmo
