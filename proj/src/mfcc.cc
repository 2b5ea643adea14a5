// nivec/mfcc.cc

// Copyright 2026  The nivec Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "nivec/mfcc.h"

#include <cmath>
#include <fstream>
#include <numbers>

#include "nivec/binary-io.h"
#include "nivec/error.h"

namespace nivec {

double HzToMel(double hz) { return 1127.0 * std::log(1.0 + hz / 700.0); }
double MelToHz(double mel) { return 700.0 * (std::exp(mel / 1127.0) - 1.0); }

void Fft(std::vector<double> *re, std::vector<double> *im) {
  const size_t n = re->size();
  NIVEC_CHECK(n == im->size() && n > 0 && (n & (n - 1)) == 0, ErrorCode::kInvalidArgument,
              "FFT length must be a power of two");
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap((*re)[i], (*re)[j]);
      std::swap((*im)[i], (*im)[j]);
    }
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    double angle = -2.0 * std::numbers::pi / static_cast<double>(len);
    for (size_t i = 0; i < n; i += len) {
      for (size_t k = 0; k < len / 2; ++k) {
        double wr = std::cos(angle * k), wi = std::sin(angle * k);
        size_t a = i + k, b = i + k + len / 2;
        double xr = (*re)[b] * wr - (*im)[b] * wi;
        double xi = (*re)[b] * wi + (*im)[b] * wr;
        (*re)[b] = (*re)[a] - xr;
        (*im)[b] = (*im)[a] - xi;
        (*re)[a] += xr;
        (*im)[a] += xi;
      }
    }
  }
}

Matrix MelFilterbank(const MfccOptions &opts, int fft_size) {
  const int num_bins = fft_size / 2 + 1;
  const double nyquist = 0.5 * opts.sample_rate;
  const double high = opts.high_freq > 0 ? opts.high_freq : nyquist;
  NIVEC_CHECK(opts.low_freq >= 0 && high > opts.low_freq && high <= nyquist,
              ErrorCode::kConfig, "bad mel frequency range");
  const double mel_low = HzToMel(opts.low_freq), mel_high = HzToMel(high);
  const double mel_step = (mel_high - mel_low) / (opts.num_mel_bins + 1);
  Matrix fb = Matrix::Zero(opts.num_mel_bins, num_bins);
  for (int m = 0; m < opts.num_mel_bins; ++m) {
    double left = mel_low + m * mel_step, center = left + mel_step, right = center + mel_step;
    for (int k = 0; k < num_bins; ++k) {
      double mel = HzToMel(static_cast<double>(k) * opts.sample_rate / fft_size);
      if (mel > left && mel < right)
        fb(m, k) = mel <= center ? (mel - left) / (center - left) : (right - mel) / (right - center);
    }
  }
  return fb;
}

FeatureSequence ComputeMfcc(std::span<const double> samples, const MfccOptions &opts) {
  const int frame_len = static_cast<int>(std::lround(opts.sample_rate * opts.frame_length_ms / 1000.0));
  const int frame_shift = static_cast<int>(std::lround(opts.sample_rate * opts.frame_shift_ms / 1000.0));
  NIVEC_CHECK(frame_len >= 2 && frame_shift >= 1, ErrorCode::kConfig, "bad MFCC framing");
  NIVEC_CHECK(opts.num_ceps >= 1 && opts.num_ceps <= opts.num_mel_bins, ErrorCode::kConfig,
              "num_ceps must be in [1, num_mel_bins]");
  NIVEC_CHECK(static_cast<int>(samples.size()) >= frame_len, ErrorCode::kInvalidArgument,
              "audio shorter than one frame");
  int fft_size = 1;
  while (fft_size < frame_len) fft_size <<= 1;
  const int num_frames = 1 + (static_cast<int>(samples.size()) - frame_len) / frame_shift;
  const Matrix fb = MelFilterbank(opts, fft_size);

  std::vector<double> window(frame_len);
  for (int i = 0; i < frame_len; ++i)
    window[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (frame_len - 1));

  // Orthonormal DCT-II basis.
  Matrix dct(opts.num_ceps, opts.num_mel_bins);
  for (int c = 0; c < opts.num_ceps; ++c)
    for (int m = 0; m < opts.num_mel_bins; ++m)
      dct(c, m) = std::sqrt((c == 0 ? 1.0 : 2.0) / opts.num_mel_bins) *
                  std::cos(std::numbers::pi * c * (m + 0.5) / opts.num_mel_bins);

  FeatureSequence out;
  out.frame_shift = opts.frame_shift_ms / 1000.0;
  out.frames.resize(num_frames, opts.num_ceps);
  std::vector<double> re(fft_size), im(fft_size);
  Vector power(fft_size / 2 + 1);
  for (int f = 0; f < num_frames; ++f) {
    const double *frame = samples.data() + static_cast<size_t>(f) * frame_shift;
    double mean = 0.0;
    for (int i = 0; i < frame_len; ++i) mean += frame[i];
    mean /= frame_len;
    std::fill(re.begin(), re.end(), 0.0);
    std::fill(im.begin(), im.end(), 0.0);
    for (int i = frame_len - 1; i >= 0; --i) {
      double prev = i > 0 ? frame[i - 1] - mean : frame[0] - mean;
      re[i] = ((frame[i] - mean) - opts.preemphasis * prev) * window[i];
    }
    Fft(&re, &im);
    for (int k = 0; k <= fft_size / 2; ++k) power(k) = re[k] * re[k] + im[k] * im[k];
    Vector mel = (fb * power).array().max(1e-10).log().matrix();
    out.frames.row(f) = (dct * mel).transpose();
  }
  return out;
}

namespace {

uint32_t LittleU32(const std::string &b, size_t off) {
  return static_cast<uint32_t>(static_cast<unsigned char>(b[off])) |
         static_cast<uint32_t>(static_cast<unsigned char>(b[off + 1])) << 8 |
         static_cast<uint32_t>(static_cast<unsigned char>(b[off + 2])) << 16 |
         static_cast<uint32_t>(static_cast<unsigned char>(b[off + 3])) << 24;
}

uint16_t LittleU16(const std::string &b, size_t off) {
  return static_cast<uint16_t>(static_cast<unsigned char>(b[off]) |
                               static_cast<unsigned char>(b[off + 1]) << 8);
}

}  // namespace

WavData ReadWav(const std::string &path) {
  const std::string bytes = ReadFileBytes(path);
  if (bytes.size() < 12 || bytes.compare(0, 4, "RIFF") != 0 || bytes.compare(8, 4, "WAVE") != 0)
    Fail(ErrorCode::kBadMagic, "bad magic");
  WavData wav;
  int channels = 0;
  bool have_fmt = false;
  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    std::string id = bytes.substr(pos, 4);
    size_t size = LittleU32(bytes, pos + 4);
    size_t body = pos + 8;
    if (body + size > bytes.size()) Fail(ErrorCode::kTruncated, "truncated file");
    if (id == "fmt ") {
      NIVEC_CHECK(size >= 16, ErrorCode::kTruncated, "truncated file");
      NIVEC_CHECK(LittleU16(bytes, body) == 1, ErrorCode::kConfig, "only PCM wav is supported");
      channels = LittleU16(bytes, body + 2);
      wav.sample_rate = static_cast<int>(LittleU32(bytes, body + 4));
      NIVEC_CHECK(LittleU16(bytes, body + 14) == 16, ErrorCode::kConfig,
                  "only 16-bit wav is supported");
      NIVEC_CHECK(channels >= 1, ErrorCode::kConfig, "wav without channels");
      have_fmt = true;
    } else if (id == "data") {
      NIVEC_CHECK(have_fmt, ErrorCode::kConfig, "wav data chunk before fmt chunk");
      size_t frames = size / (2 * static_cast<size_t>(channels));
      wav.samples.resize(frames);
      for (size_t i = 0; i < frames; ++i) {
        auto v = static_cast<int16_t>(LittleU16(bytes, body + 2 * i * channels));
        wav.samples[i] = v / 32768.0;
      }
      return wav;
    }
    pos = body + size + (size & 1);
  }
  Fail(ErrorCode::kTruncated, "wav file without data chunk");
}

}  // namespace nivec
