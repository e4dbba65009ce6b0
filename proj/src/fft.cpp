#include "cyclosense/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

#include "cyclosense/error.hpp"

namespace cyclosense::fft {
namespace {

using Key = std::tuple<std::size_t, std::size_t, std::size_t, std::size_t, int>;

class PlanCache {
public:
    ~PlanCache() {
        for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
    }

    fftw_plan get(const Key& key, fftw_complex* sample) {
        std::lock_guard lock(mutex_);
        if (auto it = plans_.find(key); it != plans_.end()) return it->second;
        const auto [n, count, stride, dist, sign] = key;
        int len = static_cast<int>(n);
        // Planning with FFTW_ESTIMATE does not touch the array contents.
        fftw_plan plan = fftw_plan_many_dft(1, &len, static_cast<int>(count),
                                            sample, nullptr, static_cast<int>(stride),
                                            static_cast<int>(dist), sample, nullptr,
                                            static_cast<int>(stride), static_cast<int>(dist),
                                            sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
        if (plan == nullptr) throw InvalidInput("FFTW could not plan transform");
        plans_.emplace(key, plan);
        return plan;
    }

private:
    std::mutex mutex_;
    std::map<Key, fftw_plan> plans_;
};

PlanCache& cache() {
    static PlanCache instance;
    return instance;
}

} // namespace

void transform(std::span<cdouble> data, Direction dir) {
    transform_many(data, data.size(), 1, 1, data.size(), dir);
}

void transform_many(std::span<cdouble> data, std::size_t n, std::size_t count,
                    std::size_t stride, std::size_t dist, Direction dir) {
    if (n == 0 || count == 0) return;
    if ((count - 1) * dist + (n - 1) * stride >= data.size())
        throw InvalidInput("FFT geometry exceeds buffer");
    auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
    const int sign = dir == Direction::Forward ? FFTW_FORWARD : FFTW_BACKWARD;
    fftw_plan plan = cache().get({n, count, stride, dist, sign}, ptr);
    fftw_execute_dft(plan, ptr, ptr);
}

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

} // namespace cyclosense::fft
