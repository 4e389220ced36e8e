#pragma once

// Signals, coordinate grids, degradations and metrics for the fitting tasks.
//
// Raster order everywhere: the last axis is fastest. An H x W image stores
// pixel (y, x) in row y * W + x; a D^3 volume stores voxel (z, y, x) at
// (z * D + y) * D + x.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cosmo/common.hpp"

namespace cosmo {

struct ImageGrid {
    int height = 0;
    int width = 0;
    int channels = 0;
    Eigen::MatrixXd pixels;  // (height * width) x channels

    ImageGrid() = default;
    ImageGrid(int h, int w, int c, double fill = 0.0);

    Eigen::Index index(int y, int x) const noexcept { return Eigen::Index(y) * width + x; }
    double& at(int y, int x, int c) { return pixels(index(y, x), c); }
    double at(int y, int x, int c) const { return pixels(index(y, x), c); }

    /// Throws unless every pixel is finite and in [0, 1].
    void validate() const;
};

struct VolumeGrid {
    int resolution = 0;
    Eigen::VectorXd values;  // resolution^3

    VolumeGrid() = default;
    VolumeGrid(int d, double fill = 0.0);

    void validate() const;
};

struct CoordinateGrid {
    std::vector<int> dims;
    Eigen::MatrixXd coords;  // prod(dims) x dims.size(); column a holds axis a
};

/// Axis index i of n maps to 2 i / (n - 1) - 1; a single-point axis maps to 0.
CoordinateGrid build_grid(std::span<const int> dims);
CoordinateGrid build_grid(std::initializer_list<int> dims);

/// Coordinates of the centers of the k x k blocks of an H x W raster, in the
/// full-resolution frame of build_grid({H, W}). H and W must be multiples of k.
CoordinateGrid block_center_grid(int height, int width, int k);

/// Voxel centers (2 i + 1) / D - 1 of a D^3 volume.
CoordinateGrid voxel_centers(int resolution);

double mse(const ImageGrid& pred, const ImageGrid& gt);
/// 10 log10(peak^2 / mse); +infinity when the images are identical.
double psnr(const ImageGrid& pred, const ImageGrid& gt, double peak = 1.0);
double psnr_from_mse(double mse, double peak = 1.0);
/// Mean local SSIM over valid 11 x 11 Gaussian windows (sigma 1.5), averaged
/// over channels, dynamic range 1.
double ssim(const ImageGrid& pred, const ImageGrid& gt);

/// (Poisson(photons * x) + Poisson(readout)) / photons per pixel-channel,
/// clamped to [0, 2]. Each draw is keyed by (seed, pixel-channel index).
ImageGrid photon_noise(const ImageGrid& img, double photons = 30.0, double readout = 2.0, std::uint64_t seed = 0);

/// Crops to the top-left region whose sides are multiples of k.
ImageGrid crop_to_multiple(const ImageGrid& img, int k);
/// k x k block means after crop_to_multiple.
ImageGrid downsample(const ImageGrid& img, int k);
ImageGrid upsample_nearest(const ImageGrid& img, int k);

/// h * w entries, exactly round(fraction * h * w) ones.
Eigen::VectorXd sample_mask(int height, int width, double fraction = 0.2, std::uint64_t seed = 0);

enum class Shape { Sphere, Torus };

struct ShapeParams {
    double radius = 0.5;        // sphere
    double major_radius = 0.6;  // torus, in the xy plane
    double minor_radius = 0.25;
};

Shape parse_shape(std::string_view name);
std::string_view shape_name(Shape shape);

/// 1 where the voxel center lies strictly inside the shape.
VolumeGrid synthetic_occupancy(Shape shape, int resolution, const ShapeParams& params = {});

/// Intersection over union of {v > threshold}; 1 when both sets are empty.
double iou(const VolumeGrid& pred, const VolumeGrid& gt, double threshold = 0.5);

/// Binary pixmap. Writes P6 (or P5 for one channel) with maxval 255, storing
/// round(255 x) of x clamped to [0, 1]. Reads P5/P6 with maxval up to 65535.
void write_ppm(const std::filesystem::path& path, const ImageGrid& img);
ImageGrid read_ppm(const std::filesystem::path& path);

/// 16-byte header ("CSMOVOL1" then D as little-endian uint64) followed by D^3
/// bytes round(255 v).
void write_volume(const std::filesystem::path& path, const VolumeGrid& vol);
VolumeGrid read_volume(const std::filesystem::path& path);

/// Seeded RGB texture with a 1/f amplitude spectrum: the top-left crop of a
/// scene up to four times larger per side (at most 512), scaled into [0, 1]
/// over the whole scene.
ImageGrid natural_texture(int height, int width, std::uint64_t seed);
/// Grayscale 0.5 + 0.5 cos(12 pi r^2) with r^2 = x^2 + y^2 on the build_grid frame.
ImageGrid radial_chirp(int height, int width);

}  // namespace cosmo
