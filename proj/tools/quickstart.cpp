// Filtering of white noise in white noise, then the class Y minimax
// extrapolation of zeta_0 + zeta_1.
#include <cstdio>

#include "pcwk/pcwk.hpp"

int main() {
    using namespace pcwk;
    const auto f = SpectralDensity::scalar({{0, 1.0}});
    const auto g = SpectralDensity::scalar({{0, 1.0}});
    const FunctionalWeights a0({Vec::Ones(1)}, Horizon::filtering);
    const auto sol = filter(f, g, a0);
    std::printf("filtering mse %.12f\n", sol.mse);

    const FunctionalWeights a({Vec::Ones(1), Vec::Ones(1)}, Horizon::extrapolation_finite);
    const auto y = least_favorable_class_y(a, 1.0);
    std::printf("class Y minimax mse %.12f (nu^2 %.12f)\n", y.minimax_mse, y.nu2);
    return 0;
}
