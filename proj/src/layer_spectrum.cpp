#include "cosmo/layer_spectrum.hpp"

#include <cmath>

#include "cosmo/spectral.hpp"

namespace cosmo {

std::vector<LayerSpectrum> layer_spectra(const Network& net, const CoordinateGrid& grid) {
    if (grid.dims.size() != 2 || grid.coords.cols() != 2)
        throw InvalidArgument("layer_spectra: expects a two-axis image raster");
    const int h = grid.dims[0];
    const int w = grid.dims[1];
    const ForwardResult fr = forward_with_taps(net, grid.coords);
    std::vector<LayerSpectrum> out;
    for (std::size_t l = 0; l < fr.hidden.size(); ++l) {
        const Eigen::MatrixXcd& act = fr.hidden[l];
        LayerSpectrum ls;
        ls.layer = static_cast<int>(l);
        ls.profile = Eigen::VectorXd::Zero(w / 2 + 1);
        Eigen::Index used = 0;
        Eigen::MatrixXcd field(h, w);
        for (Eigen::Index r = 0; r < act.rows(); ++r) {
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) field(y, x) = act(r, Eigen::Index(y) * w + x);
            const Eigen::MatrixXcd spec = dft2(field);
            const double spatial = field.squaredNorm() * h * w;
            const double spectral = spec.squaredNorm();
            if (spatial == 0.0) continue;
            ls.parseval_residual = std::max(ls.parseval_residual, std::abs(spectral - spatial) / spatial);
            ls.profile += horizontal_profile(spec);
            ++used;
        }
        if (used > 0) ls.profile /= static_cast<double>(used);
        out.push_back(std::move(ls));
    }
    return out;
}

double band_mean(const Eigen::VectorXd& profile, int first_bin) {
    if (first_bin < 0 || first_bin >= profile.size()) throw InvalidArgument("band_mean: first bin out of range");
    return profile.tail(profile.size() - first_bin).mean();
}

}  // namespace cosmo
