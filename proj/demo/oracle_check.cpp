// Short Monte-Carlo run against the analytic spectrum at one pump ratio.
#include <cstdio>
#include <cstdlib>

#include "opo_noise/oracle.hpp"

int main(int argc, char** argv)
{
    using namespace opo;
    const double sigma = argc > 1 ? std::atof(argv[1]) : 1.5;
    const double segments = argc > 2 ? std::atof(argv[2]) : 4000.0;

    const CavityConfig c = reference_opo_cavity();
    const double omega = normalize_frequency(kReferenceAnalysisFrequency, c);
    const OperatingPoint op = operating_point(c, sigma, kReferenceThresholdPower);
    const DriftMatrix d = opo_drift(c, op);
    const QuadratureCovariance vq = build_vq(NoiseCouplings::measured(), op.intracavity_powers);

    const SimulationPlan plan = default_plan(c, d, omega, segments, 42);
    const PsdEstimate est = simulate_psd(c, d, vq, plan, {omega});
    const SpectrumResult an = output_covariance(c, d, vq, omega);

    std::printf("entry      analytic    estimate    stderr      z\n");
    for (int i = 0; i < kDim; ++i)
        for (int k = i; k < kDim; ++k) {
            const double se = est.standard_error[0](i, k);
            std::printf("(%d,%d)   %10.5f  %10.5f  %9.5f  %6.2f\n", i, k, an.v_total(i, k), est.estimate[0](i, k), se,
                        (est.estimate[0](i, k) - an.v_total(i, k)) / se);
        }
    std::printf("effective segments %.0f\n", est.effective_segments);
}
