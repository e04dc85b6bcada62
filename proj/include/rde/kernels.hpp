#pragma once

#include <cstdint>

namespace rde::kernels {

// 3x3 convolution, stride 1, zero padding 1. Tensors are dense row-major:
// in[ci][y][x], weights[co][ci][ky][kx], out[co][y][x].
void conv3x3_forward(const double* in, int ci, int h, int w, const double* weights,
                     const double* bias, int co, double* out);

// d loss / d in given d loss / d out. gin is overwritten.
void conv3x3_backward_input(const double* gout, int co, int h, int w,
                            const double* weights, int ci, double* gin);

// Accumulates weight and bias gradients for one sample.
void conv3x3_backward_params(const double* in, int ci, const double* gout, int co,
                             int h, int w, double* gweights, double* gbias);

// 2x2 max pool, stride 2. argmax records the winning flat offset inside the
// input plane; ties go to the first candidate in row-major window order.
void maxpool2_forward(const double* in, int c, int h, int w, double* out,
                      std::int32_t* argmax);
void maxpool2_backward(const double* gout, int c, int h, int w, const std::int32_t* argmax,
                       double* gin);

void dense_forward(const double* in, int n, const double* weights, const double* bias,
                   int m, double* out);
void dense_backward_input(const double* gout, int m, const double* weights, int n,
                          double* gin);
void dense_backward_params(const double* in, int n, const double* gout, int m,
                           double* gweights, double* gbias);

// Plain-loop reference kernels for the hot forward/backward paths, kept for
// testing the OpenMP versions and for the benchmark.
namespace serial {
void conv3x3_forward(const double* in, int ci, int h, int w, const double* weights,
                     const double* bias, int co, double* out);
void conv3x3_backward_input(const double* gout, int co, int h, int w,
                            const double* weights, int ci, double* gin);
} // namespace serial

} // namespace rde::kernels
