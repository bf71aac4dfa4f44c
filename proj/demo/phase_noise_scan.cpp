// Pump and signal phase variances versus pump power, with and without phonon noise.
#include <cstdio>

#include "opo_noise/spectra.hpp"

int main()
{
    using namespace opo;
    const CavityConfig c = reference_opo_cavity();
    const double omega = normalize_frequency(kReferenceAnalysisFrequency, c);
    const auto eff = detection_efficiencies(c);

    std::printf("sigma   dQ0^2(no noise)  dQ0^2   dQ1^2(no noise)  dQ1^2   duan\n");
    for (double s : linear_grid(1.05, 1.7, 14)) {
        const auto clean = apply_detection(opo_spectrum(c, s, omega, kReferenceThresholdPower, NoiseCouplings::zero()).v_total, eff);
        const auto noisy =
            apply_detection(opo_spectrum(c, s, omega, kReferenceThresholdPower, NoiseCouplings::measured()).v_total, eff);
        std::printf("%.3f   %8.4f         %7.4f %8.4f         %7.4f %7.4f\n", s, clean(q_index(0), q_index(0)),
                    noisy(q_index(0), q_index(0)), clean(q_index(1), q_index(1)), noisy(q_index(1), q_index(1)),
                    duan_criterion(noisy).value);
    }
}
