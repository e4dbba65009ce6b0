#include "cyclosense/signal.hpp"

#include <cmath>

#include "cyclosense/error.hpp"

namespace cyclosense {

void validate(const ComplexSignal& s) {
    if (s.samples.empty()) throw InvalidInput("signal is empty");
    if (!(s.sample_rate_hz > 0.0) || !std::isfinite(s.sample_rate_hz))
        throw InvalidInput("sample rate must be positive and finite");
    for (const auto& x : s.samples) {
        if (!std::isfinite(x.real()) || !std::isfinite(x.imag()))
            throw InvalidInput("signal contains non-finite samples");
    }
}

double mean_power(const ComplexSignal& s) {
    if (s.samples.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& x : s.samples) acc += std::norm(x);
    return acc / static_cast<double>(s.samples.size());
}

ComplexSignal normalize_power(ComplexSignal s) {
    const double p = mean_power(s);
    if (p <= 0.0) return s;
    const double g = 1.0 / std::sqrt(p);
    for (auto& x : s.samples) x *= g;
    return s;
}

ComplexSignal quantize_to_float32(ComplexSignal s) {
    for (auto& x : s.samples) {
        x = {static_cast<double>(static_cast<float>(x.real())),
             static_cast<double>(static_cast<float>(x.imag()))};
    }
    return s;
}

} // namespace cyclosense
