#pragma once

// Horizontal-frequency content of every hidden layer of a network evaluated on
// an image raster.

#include <vector>

#include <Eigen/Core>

#include "cosmo/network.hpp"
#include "cosmo/tasks.hpp"

namespace cosmo {

struct LayerSpectrum {
    int layer = 0;
    /// Bins 0..W/2 of the DFT magnitude along the horizontal frequency axis,
    /// averaged over the layer's neurons.
    Eigen::VectorXd profile;
    /// Largest relative mismatch between spectral and spatial energy over neurons.
    double parseval_residual = 0.0;
};

/// `grid` must be a two-axis raster from build_grid.
std::vector<LayerSpectrum> layer_spectra(const Network& net, const CoordinateGrid& grid);

/// Mean of profile(k) for k >= first_bin.
double band_mean(const Eigen::VectorXd& profile, int first_bin);

}  // namespace cosmo
