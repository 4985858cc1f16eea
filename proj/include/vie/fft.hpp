#pragma once
//
// Thin RAII wrapper over FFTW complex multidimensional transforms.
//

#include <array>
#include <complex>
#include <cstddef>
#include <memory>
#include <vector>

#include <fftw3.h>

#include "vie/core.hpp"

namespace vie {

// Smallest size >= n whose prime factors are all in {2, 3, 5, 7}.
inline int fft_friendly_size(int n) {
    for (int m = std::max(n, 1);; ++m) {
        int r = m;
        for (int p : {2, 3, 5, 7})
            while (r % p == 0) r /= p;
        if (r == 1) return m;
    }
}

class FftBuffer {
public:
    FftBuffer(int dim, std::array<int, 3> shape) : dim_(dim), shape_(shape) {
        size_ = static_cast<std::size_t>(shape[0]) * shape[1] * shape[2];
        data_ = static_cast<cplx*>(fftw_malloc(sizeof(cplx) * size_));
        if (!data_) throw std::bad_alloc();
        // FFTW uses row-major order; our lattice is x-fastest, so pass dims reversed.
        int n[3];
        for (int i = 0; i < dim; ++i) n[i] = shape[dim - 1 - i];
        auto* d = reinterpret_cast<fftw_complex*>(data_);
        forward_ = fftw_plan_dft(dim, n, d, d, FFTW_FORWARD, FFTW_ESTIMATE);
        backward_ = fftw_plan_dft(dim, n, d, d, FFTW_BACKWARD, FFTW_ESTIMATE);
        std::fill(data_, data_ + size_, cplx(0.0));
    }
    ~FftBuffer() {
        fftw_destroy_plan(forward_);
        fftw_destroy_plan(backward_);
        fftw_free(data_);
    }
    FftBuffer(const FftBuffer&) = delete;
    FftBuffer& operator=(const FftBuffer&) = delete;

    cplx* data() { return data_; }
    const cplx* data() const { return data_; }
    std::size_t size() const { return size_; }
    const std::array<int, 3>& shape() const { return shape_; }
    void zero() { std::fill(data_, data_ + size_, cplx(0.0)); }
    void forward() { fftw_execute(forward_); }
    // Unnormalised inverse; callers scale by 1/size().
    void backward() { fftw_execute(backward_); }

    std::size_t linear(int i, int j, int k) const {
        return (static_cast<std::size_t>(k) * shape_[1] + j) * shape_[0] + i;
    }

private:
    int dim_;
    std::array<int, 3> shape_;
    std::size_t size_ = 0;
    cplx* data_ = nullptr;
    fftw_plan forward_{};
    fftw_plan backward_{};
};

}  // namespace vie
