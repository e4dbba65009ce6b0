#pragma once

#include <complex>
#include <vector>

namespace cyclosense {

using cdouble = std::complex<double>;

// Complex baseband record. Sample rate only carries metadata; all
// processing works in cycles/sample.
struct ComplexSignal {
    std::vector<cdouble> samples;
    double sample_rate_hz = 1.0;

    std::size_t size() const noexcept { return samples.size(); }
};

// Throws InvalidInput on empty input, non-finite samples or a bad rate.
void validate(const ComplexSignal& s);

double mean_power(const ComplexSignal& s);

// Scales to mean |s|^2 = 1. All-zero input is returned unchanged.
ComplexSignal normalize_power(ComplexSignal s);

// Rounds every component to the nearest float32, the precision of the
// on-disk I/Q format.
ComplexSignal quantize_to_float32(ComplexSignal s);

} // namespace cyclosense
