#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <random>
#include <vector>

#include "doctest.h"

#include "cosmo/network.hpp"
#include "cosmo/tasks.hpp"

using namespace cosmo;
namespace fs = std::filesystem;

namespace {

ImageGrid random_image(int h, int w, int c, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ImageGrid img(h, w, c);
    for (auto& v : img.pixels.reshaped()) v = u(rng);
    return img;
}

// Straight-line SSIM: Gaussian 11x11 window (sigma 1.5), valid positions only,
// k1 = 0.01, k2 = 0.03, dynamic range 1, averaged over positions then channels.
double reference_ssim(const ImageGrid& a, const ImageGrid& b) {
    double w[11][11];
    double total = 0.0;
    for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
            w[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2 * 1.5 * 1.5));
            total += w[i][j];
        }
    for (auto& row : w)
        for (double& v : row) v /= total;
    const double c1 = 0.01 * 0.01;
    const double c2 = 0.03 * 0.03;
    double sum_channels = 0.0;
    for (int c = 0; c < a.channels; ++c) {
        double acc = 0.0;
        int count = 0;
        for (int y = 0; y + 11 <= a.height; ++y) {
            for (int x = 0; x + 11 <= a.width; ++x) {
                double ma = 0, mb = 0;
                for (int i = 0; i < 11; ++i)
                    for (int j = 0; j < 11; ++j) {
                        ma += w[i][j] * a.at(y + i, x + j, c);
                        mb += w[i][j] * b.at(y + i, x + j, c);
                    }
                double va = 0, vb = 0, cov = 0;
                for (int i = 0; i < 11; ++i)
                    for (int j = 0; j < 11; ++j) {
                        const double da = a.at(y + i, x + j, c) - ma;
                        const double db = b.at(y + i, x + j, c) - mb;
                        va += w[i][j] * da * da;
                        vb += w[i][j] * db * db;
                        cov += w[i][j] * da * db;
                    }
                acc += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                ++count;
            }
        }
        sum_channels += acc / count;
    }
    return sum_channels / a.channels;
}

fs::path scratch_dir(const char* name) {
    const fs::path dir = fs::temp_directory_path() / ("cosmo_test_tasks_" + std::to_string(::getpid())) / name;
    fs::create_directories(dir);
    return dir;
}

std::vector<char> slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("coordinate grids") {
    const CoordinateGrid g3 = build_grid({3});
    REQUIRE(g3.coords.rows() == 3);
    CHECK(g3.coords(0, 0) == -1.0);
    CHECK(g3.coords(1, 0) == 0.0);
    CHECK(g3.coords(2, 0) == 1.0);

    const CoordinateGrid g22 = build_grid({2, 2});
    REQUIRE(g22.coords.rows() == 4);
    for (Eigen::Index r = 0; r < 4; ++r) {
        CHECK(std::abs(g22.coords(r, 0)) == 1.0);
        CHECK(std::abs(g22.coords(r, 1)) == 1.0);
    }

    const CoordinateGrid g = build_grid({64, 64});
    CHECK(g.coords.rows() == 4096);
    CHECK(g.coords.minCoeff() == -1.0);
    CHECK(g.coords.maxCoeff() == 1.0);
    // last axis fastest: row y * W + x holds (y, x)
    CHECK(g.coords(1, 1) - g.coords(0, 1) == doctest::Approx(2.0 / 63).epsilon(1e-14));
    CHECK(g.coords(1, 0) == g.coords(0, 0));
    CHECK(g.coords(64, 0) - g.coords(0, 0) == doctest::Approx(2.0 / 63).epsilon(1e-14));

    CHECK(build_grid({1, 5}).coords.col(0).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(build_grid({0, 4}), InvalidArgument);

    const CoordinateGrid v = voxel_centers(4);
    CHECK(v.coords.rows() == 64);
    CHECK(v.coords.minCoeff() == doctest::Approx(-0.75));
    CHECK(v.coords.maxCoeff() == doctest::Approx(0.75));

    // block centres are the means of the full-resolution coordinates of each block
    const CoordinateGrid full = build_grid({8, 12});
    const CoordinateGrid centres = block_center_grid(8, 12, 4);
    REQUIRE(centres.coords.rows() == 6);
    for (int by = 0; by < 2; ++by) {
        for (int bx = 0; bx < 3; ++bx) {
            Eigen::RowVector2d mean = Eigen::RowVector2d::Zero();
            for (int y = 0; y < 4; ++y)
                for (int x = 0; x < 4; ++x) mean += full.coords.row((by * 4 + y) * 12 + bx * 4 + x);
            mean /= 16.0;
            CHECK((centres.coords.row(by * 3 + bx) - mean).cwiseAbs().maxCoeff() < 1e-15);
        }
    }
}

TEST_CASE("mse and psnr") {
    const ImageGrid zero(4, 4, 3, 0.0);
    const ImageGrid one(4, 4, 3, 1.0);
    const ImageGrid img = random_image(4, 4, 3, 1);
    CHECK(mse(img, img) == 0.0);
    CHECK(mse(zero, one) == 1.0);
    ImageGrid shifted = img;
    ImageGrid base = img;
    for (auto& v : base.pixels.reshaped()) v *= 0.8;
    for (Eigen::Index i = 0; i < shifted.pixels.size(); ++i) shifted.pixels.data()[i] = base.pixels.data()[i] + 0.1;
    CHECK(mse(shifted, base) == doctest::Approx(0.01).epsilon(1e-12));
    CHECK_THROWS_AS(mse(zero, ImageGrid(4, 5, 3)), InvalidArgument);

    CHECK(psnr_from_mse(0.01) == doctest::Approx(20.0).epsilon(1e-14));
    CHECK(psnr_from_mse(1e-4) == doctest::Approx(40.0).epsilon(1e-14));
    CHECK(psnr(img, img) == std::numeric_limits<double>::infinity());
    CHECK(psnr(zero, one) == 0.0);

    double previous = std::numeric_limits<double>::infinity();
    for (double m = 1e-8; m < 2.0; m *= 1.7) {
        const double p = psnr_from_mse(m);
        CHECK(p < previous);
        previous = p;
    }
}

TEST_CASE("ssim") {
    const ImageGrid img = random_image(32, 32, 3, 2);
    CHECK(ssim(img, img) == doctest::Approx(1.0).epsilon(1e-15));

    ImageGrid bin(32, 32, 1);
    std::mt19937_64 rng(5);
    for (auto& v : bin.pixels.reshaped()) v = (rng() & 1) ? 1.0 : 0.0;
    ImageGrid inv = bin;
    for (auto& v : inv.pixels.reshaped()) v = 1.0 - v;
    CHECK(ssim(inv, bin) < 0.0);

    const ImageGrid tex = natural_texture(32, 32, 7);
    ImageGrid half = tex;
    half.pixels *= 0.5;
    CHECK(std::abs(ssim(half, tex) - reference_ssim(half, tex)) < 1e-10);
    const ImageGrid other = random_image(40, 24, 1, 3);
    const ImageGrid other2 = random_image(40, 24, 1, 4);
    CHECK(std::abs(ssim(other, other2) - reference_ssim(other, other2)) < 1e-10);

    CHECK_THROWS_AS(ssim(ImageGrid(10, 32, 1), ImageGrid(10, 32, 1)), InvalidArgument);
}

TEST_CASE("photon noise") {
    const ImageGrid black(16, 16, 3, 0.0);
    const ImageGrid y0 = photon_noise(black, 30.0, 0.0, 9);
    CHECK(y0.pixels.cwiseAbs().maxCoeff() == 0.0);

    const ImageGrid grey(100, 1000, 1, 0.5);
    const ImageGrid y = photon_noise(grey, 30.0, 2.0, 11);
    const double mean = y.pixels.mean();
    const double var = (y.pixels.array() - mean).square().mean();
    CHECK(std::abs(mean - (0.5 + 2.0 / 30.0)) < 0.01);
    const double expected_var = (30.0 * 0.5 + 2.0) / (30.0 * 30.0);
    CHECK(std::abs(var - expected_var) < 0.1 * expected_var);
    CHECK(y.pixels.minCoeff() >= 0.0);
    CHECK(y.pixels.maxCoeff() <= 2.0);

    const ImageGrid again = photon_noise(grey, 30.0, 2.0, 11);
    CHECK((again.pixels.array() == y.pixels.array()).all());
    CHECK((photon_noise(grey, 30.0, 2.0, 12).pixels.array() != y.pixels.array()).any());

    const ImageGrid tex = natural_texture(64, 64, 1);
    const ImageGrid bright = photon_noise(tex, 1e5, 0.0, 3);
    CHECK((bright.pixels - tex.pixels).cwiseAbs().mean() < 0.01);

    CHECK_THROWS_AS(photon_noise(tex, 0.0, 2.0, 0), InvalidArgument);
    CHECK_THROWS_AS(photon_noise(tex, 30.0, -1.0, 0), InvalidArgument);
}

TEST_CASE("downsampling") {
    const ImageGrid flat(12, 12, 3, 0.3);
    const ImageGrid d = downsample(flat, 3);
    CHECK(d.height == 4);
    CHECK((d.pixels.array() - 0.3).abs().maxCoeff() < 1e-16);

    ImageGrid checker(2, 2, 1);
    checker.at(0, 0, 0) = 1.0;
    checker.at(1, 1, 0) = 1.0;
    const ImageGrid one = downsample(checker, 2);
    CHECK(one.height == 1);
    CHECK(one.width == 1);
    CHECK(one.at(0, 0, 0) == 0.5);

    const ImageGrid tex = natural_texture(48, 48, 4);
    const ImageGrid two = downsample(downsample(tex, 2), 2);
    const ImageGrid four = downsample(tex, 4);
    CHECK((two.pixels - four.pixels).cwiseAbs().maxCoeff() < 1e-15);
    for (int k : {2, 3, 4, 6}) CHECK(std::abs(downsample(tex, k).pixels.mean() - tex.pixels.mean()) < 1e-14);

    // non-divisible sides are cropped to the top-left multiple
    const ImageGrid odd = random_image(13, 10, 1, 5);
    const ImageGrid c = crop_to_multiple(odd, 4);
    CHECK(c.height == 12);
    CHECK(c.width == 8);
    CHECK(c.at(11, 7, 0) == odd.at(11, 7, 0));
    CHECK(downsample(odd, 4).height == 3);

    const ImageGrid up = upsample_nearest(four, 4);
    CHECK(up.height == 48);
    CHECK(up.at(5, 9, 1) == four.at(1, 2, 1));
}

TEST_CASE("sample masks") {
    CHECK(sample_mask(8, 8, 1.0, 3).minCoeff() == 1.0);
    const Eigen::VectorXd m = sample_mask(10, 10, 0.2, 1);
    CHECK(m.sum() == 20.0);
    CHECK(((m.array() == 0.0) || (m.array() == 1.0)).all());
    CHECK((sample_mask(10, 10, 0.2, 1).array() == m.array()).all());
    CHECK((sample_mask(10, 10, 0.2, 2).array() != m.array()).any());
    CHECK(sample_mask(7, 9, 0.33, 4).sum() == std::round(0.33 * 63));
    CHECK_THROWS_AS(sample_mask(4, 4, 0.0, 0), InvalidArgument);
    CHECK_THROWS_AS(sample_mask(4, 4, 1.5, 0), InvalidArgument);

    // masked loss with every pixel observed is the full loss
    const Eigen::MatrixXd a = random_image(5, 5, 3, 1).pixels;
    const Eigen::MatrixXd b = random_image(5, 5, 3, 2).pixels;
    const Eigen::VectorXd all = sample_mask(5, 5, 1.0, 0);
    CHECK(masked_mse(a, b, &all) == doctest::Approx(masked_mse(a, b)).epsilon(1e-15));
}

TEST_CASE("synthetic occupancy and IoU") {
    const VolumeGrid s = synthetic_occupancy(Shape::Sphere, 32, {});
    const double fraction = s.values.mean();
    CHECK(std::abs(fraction - 4.0 / 3.0 * kPi * 0.125 / 8.0) < 0.01);
    ShapeParams big;
    big.radius = std::sqrt(3.0);
    CHECK(synthetic_occupancy(Shape::Sphere, 16, big).values.minCoeff() == 1.0);
    ShapeParams none;
    none.radius = 0.0;
    CHECK(synthetic_occupancy(Shape::Sphere, 16, none).values.maxCoeff() == 0.0);
    ShapeParams neg;
    neg.radius = -0.1;
    CHECK_THROWS_AS(synthetic_occupancy(Shape::Sphere, 16, neg), InvalidArgument);
    CHECK_THROWS_AS(synthetic_occupancy(Shape::Sphere, 4, {}), InvalidArgument);

    const VolumeGrid t = synthetic_occupancy(Shape::Torus, 32, {});
    const double torus_volume = 2 * kPi * kPi * 0.6 * 0.25 * 0.25;
    CHECK(std::abs(t.values.mean() - torus_volume / 8.0) < 0.01);
    CHECK(parse_shape("torus") == Shape::Torus);
    CHECK(shape_name(Shape::Sphere) == "sphere");
    CHECK_THROWS_AS(parse_shape("cube"), InvalidArgument);

    CHECK(iou(s, s) == 1.0);
    CHECK(iou(s, t) == doctest::Approx(iou(t, s)));

    VolumeGrid left(10, 0.0);
    VolumeGrid right(10, 0.0);
    for (int i = 0; i < 500; ++i) left.values(i) = 1.0;
    for (int i = 500; i < 1000; ++i) right.values(i) = 1.0;
    CHECK(iou(left, right) == 0.0);

    VolumeGrid gt(10, 1.0);
    VolumeGrid pred = gt;
    pred.values(123) = 0.0;
    CHECK(iou(pred, gt) == doctest::Approx(0.999).epsilon(1e-15));
    CHECK(iou(VolumeGrid(10, 0.0), VolumeGrid(10, 0.0)) == 1.0);
    CHECK_THROWS_AS(iou(VolumeGrid(10), VolumeGrid(12)), InvalidArgument);
}

TEST_CASE("pixmap and volume files") {
    const fs::path dir = scratch_dir("io");
    const ImageGrid tex = natural_texture(20, 30, 2);
    write_ppm(dir / "a.ppm", tex);
    const ImageGrid back = read_ppm(dir / "a.ppm");
    CHECK(back.height == 20);
    CHECK(back.width == 30);
    CHECK(back.channels == 3);
    for (Eigen::Index i = 0; i < tex.pixels.size(); ++i)
        CHECK(back.pixels.data()[i] * 255.0 == std::round(255.0 * tex.pixels.data()[i]));
    write_ppm(dir / "b.ppm", back);
    CHECK(slurp(dir / "a.ppm") == slurp(dir / "b.ppm"));
    const std::vector<char> bytes = slurp(dir / "a.ppm");
    CHECK(std::string(bytes.begin(), bytes.begin() + 2) == "P6");

    const ImageGrid grey = radial_chirp(16, 16);
    write_ppm(dir / "g.ppm", grey);
    CHECK(read_ppm(dir / "g.ppm").channels == 1);
    CHECK(slurp(dir / "g.ppm")[1] == '5');

    CHECK_THROWS_AS(read_ppm(dir / "missing.ppm"), InvalidArgument);
    {
        std::ofstream bad(dir / "bad.ppm", std::ios::binary);
        bad << "P6\n4 4\n255\nabc";
    }
    CHECK_THROWS_AS(read_ppm(dir / "bad.ppm"), InvalidArgument);

    const VolumeGrid s = synthetic_occupancy(Shape::Torus, 16, {});
    write_volume(dir / "v.vol", s);
    const VolumeGrid vb = read_volume(dir / "v.vol");
    CHECK(vb.resolution == 16);
    CHECK((vb.values.array() == s.values.array()).all());
    CHECK(slurp(dir / "v.vol").size() == 16 + 16 * 16 * 16);
    fs::remove_all(dir.parent_path());
}

TEST_CASE("desk signals") {
    const ImageGrid a = natural_texture(64, 64, 0);
    a.validate();
    CHECK(a.channels == 3);
    CHECK(a.pixels.minCoeff() >= 0.0);
    CHECK(a.pixels.maxCoeff() <= 1.0);
    CHECK((natural_texture(64, 64, 0).pixels.array() == a.pixels.array()).all());
    CHECK((natural_texture(64, 64, 1).pixels.array() != a.pixels.array()).any());

    const ImageGrid c = radial_chirp(64, 64);
    const CoordinateGrid g = build_grid({64, 64});
    for (Eigen::Index i = 0; i < 4096; i += 97) {
        const double r2 = g.coords(i, 0) * g.coords(i, 0) + g.coords(i, 1) * g.coords(i, 1);
        CHECK(c.pixels(i, 0) == doctest::Approx(0.5 + 0.5 * std::cos(12 * kPi * r2)).epsilon(1e-14));
    }

    ImageGrid bad(2, 2, 1);
    bad.pixels(0, 0) = 1.5;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}
