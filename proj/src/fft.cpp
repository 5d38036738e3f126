#include "terra/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>

namespace terra::detail {

namespace {

// FFTW plan creation is not thread-safe; execution on distinct arrays is.
class PlanCache {
  public:
    static PlanCache& instance() {
        static PlanCache cache;
        return cache;
    }

    fftw_plan forward(int n) { return get(fwd_, n, true); }
    fftw_plan backward(int n) { return get(bwd_, n, false); }

  private:
    PlanCache() = default;
    ~PlanCache() {
        for (auto& [n, p] : fwd_) fftw_destroy_plan(p);
        for (auto& [n, p] : bwd_) fftw_destroy_plan(p);
    }

    fftw_plan get(std::map<int, fftw_plan>& cache, int n, bool fwd) {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = cache.find(n);
        if (it != cache.end()) return it->second;
        std::vector<double> re(n, 0.0);
        std::vector<std::complex<double>> cx(n / 2 + 1);
        fftw_plan plan =
            fwd ? fftw_plan_dft_r2c_1d(n, re.data(), reinterpret_cast<fftw_complex*>(cx.data()),
                                       FFTW_ESTIMATE | FFTW_UNALIGNED)
                : fftw_plan_dft_c2r_1d(n, reinterpret_cast<fftw_complex*>(cx.data()), re.data(),
                                       FFTW_ESTIMATE | FFTW_UNALIGNED);
        cache.emplace(n, plan);
        return plan;
    }

    std::mutex mutex_;
    std::map<int, fftw_plan> fwd_, bwd_;
};

}  // namespace

void real_fft(std::span<const double> in, std::complex<double>* out) {
    const int n = static_cast<int>(in.size());
    std::vector<double> buf(in.begin(), in.end());
    fftw_execute_dft_r2c(PlanCache::instance().forward(n), buf.data(),
                         reinterpret_cast<fftw_complex*>(out));
}

void real_ifft(std::span<const std::complex<double>> spec, std::vector<double>& out, int n) {
    std::vector<std::complex<double>> buf(spec.begin(), spec.end());  // c2r destroys input
    out.assign(n, 0.0);
    fftw_execute_dft_c2r(PlanCache::instance().backward(n),
                         reinterpret_cast<fftw_complex*>(buf.data()), out.data());
    for (double& v : out) v /= n;
}

}  // namespace terra::detail
