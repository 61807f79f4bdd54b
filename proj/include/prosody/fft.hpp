#ifndef PROSODY_FFT_HPP_
#define PROSODY_FFT_HPP_

#include <complex>
#include <vector>

namespace prosody {

// In-place complex FFT. Radix-2 for power-of-two sizes, Bluestein otherwise.
void fft(std::vector<std::complex<double>>& data, bool inverse = false);

// Forward DFT of a real signal; returns the n/2+1 non-redundant bins.
std::vector<std::complex<double>> rfft(const std::vector<double>& x, int n);

// Linear convolution of x with kernel h via FFT; output length |x|+|h|-1.
std::vector<double> fft_convolve(const std::vector<double>& x,
                                 const std::vector<double>& h);

}  // namespace prosody

#endif  // PROSODY_FFT_HPP_
