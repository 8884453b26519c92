// End-to-end walk through the library: draw a system, simulate it, fit the
// Markov-like parameters by least squares, and realize a system from them.

#include <iostream>

#include "blds/blds.hpp"

int main() {
    using namespace blds;

    const Dims dims{3, 2, 2};
    const SystemParams sys = random_system(dims, 0.4, 0.2, true, 7);

    Engine input_rng = make_engine(derive_seed(7, Stream::Inputs));
    Engine noise_rng = make_engine(derive_seed(7, Stream::Noise));
    const Matrix inputs = sample_inputs(InputDistribution{InputKind::UniformSphere}, dims.p, 20001, input_rng);
    const Trajectory traj = simulate(sys, inputs, NoiseConfig{0.0}, noise_rng);

    // L = 2n so the Hankel blocks fit inside the estimated window.
    const FeatureConfig cfg{2 * dims.n, dims.p};
    const LseResult fit = lse(traj, cfg);
    const MarkovParams G = true_markov(sys, cfg.L);
    std::cout << "features per row: " << cfg.dim() << "\n"
              << "||G - G_hat||_op: " << estimation_error(fit.estimate.G, G.G) << "\n";

    const Realization real = ho_kalman(fit.estimate, dims.n);
    std::cout << "Hankel singular values: " << real.hankel_singular_values.transpose() << "\n"
              << "relative Markov mismatch of the realization: "
              << markov_reconstruction_error(real.system, G) << "\n"
              << "spectral radius of A_0 (true, realized): " << spectral_radius(sys.A[0]) << ", "
              << spectral_radius(real.system.A[0]) << "\n";
}
