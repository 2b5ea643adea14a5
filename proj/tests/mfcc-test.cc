// tests/mfcc-test.cc

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

#include <cmath>
#include <cstring>
#include <numbers>

#include "doctest.h"
#include "nivec/binary-io.h"
#include "nivec/error.h"
#include "nivec/mfcc.h"
#include "test-util.h"

using namespace nivec;
using namespace nivec::testing;

namespace {

std::string WavBytes(const std::vector<int16_t> &pcm, int rate, int channels) {
  auto u32 = [](uint32_t v) { return std::string(reinterpret_cast<const char *>(&v), 4); };
  auto u16 = [](uint16_t v) { return std::string(reinterpret_cast<const char *>(&v), 2); };
  std::string data(reinterpret_cast<const char *>(pcm.data()), pcm.size() * 2);
  std::string fmt = u16(1) + u16(channels) + u32(rate) + u32(rate * channels * 2) +
                    u16(channels * 2) + u16(16);
  std::string body = "WAVE" + std::string("fmt ") + u32(16) + fmt + "data" + u32(data.size()) + data;
  return "RIFF" + u32(body.size()) + body;
}

}  // namespace

TEST_CASE("fft equals the direct dft") {
  Rng rng(111);
  const int n = 32;
  std::vector<double> re(n), im(n), x(n);
  for (int i = 0; i < n; ++i) re[i] = x[i] = rng.Normal();
  Fft(&re, &im);
  for (int k = 0; k < n; ++k) {
    double dr = 0.0, di = 0.0;
    for (int t = 0; t < n; ++t) {
      dr += x[t] * std::cos(2.0 * std::numbers::pi * k * t / n);
      di -= x[t] * std::sin(2.0 * std::numbers::pi * k * t / n);
    }
    CHECK(re[k] == doctest::Approx(dr).epsilon(1e-12).scale(1.0));
    CHECK(im[k] == doctest::Approx(di).epsilon(1e-12).scale(1.0));
  }
}

TEST_CASE("mel scale round-trips and filters are non-negative triangles") {
  for (double hz : {0.0, 100.0, 1000.0, 7999.0}) CHECK(MelToHz(HzToMel(hz)) == doctest::Approx(hz));
  MfccOptions opts;
  Matrix fb = MelFilterbank(opts, 512);
  CHECK(fb.rows() == opts.num_mel_bins);
  CHECK(fb.cols() == 257);
  CHECK(fb.minCoeff() >= 0.0);
  CHECK(fb.maxCoeff() <= 1.0);
  Eigen::Index prev = -1;
  for (int m = 0; m < fb.rows(); ++m) {
    Eigen::Index peak;
    CHECK(fb.row(m).maxCoeff(&peak) > 0.0);
    CHECK(peak >= prev);
    prev = peak;
  }
}

TEST_CASE("a pure tone lights up the mel band around its frequency") {
  MfccOptions opts;
  opts.num_ceps = opts.num_mel_bins;
  const double freq = 1000.0;
  std::vector<double> audio(16000);
  for (size_t i = 0; i < audio.size(); ++i)
    audio[i] = 0.5 * std::sin(2.0 * std::numbers::pi * freq * i / opts.sample_rate);
  FeatureSequence f = ComputeMfcc(audio, opts);
  CHECK(f.NumFrames() == 1 + (16000 - 400) / 160);
  CHECK(f.Dim() == opts.num_ceps);

  // The DCT is orthonormal when num_ceps == num_mel_bins, so it inverts.
  const int m = opts.num_mel_bins;
  Matrix dct(m, m);
  for (int c = 0; c < m; ++c)
    for (int j = 0; j < m; ++j)
      dct(c, j) = std::sqrt((c == 0 ? 1.0 : 2.0) / m) * std::cos(std::numbers::pi * c * (j + 0.5) / m);
  Vector log_mel = dct.transpose() * f.frames.row(50).transpose();
  Eigen::Index band;
  log_mel.maxCoeff(&band);
  const double lo = HzToMel(opts.low_freq), hi = HzToMel(opts.sample_rate / 2.0);
  const double center = MelToHz(lo + (band + 1) * (hi - lo) / (m + 1));
  CHECK(std::abs(center - freq) < 100.0);
}

TEST_CASE("wav reader takes the first channel and rejects damage") {
  const std::string dir = TempDir("mfcc");
  WriteFileBytes(dir + "/a.wav", WavBytes({16384, -1, -32768, 5}, 8000, 2));
  WavData w = ReadWav(dir + "/a.wav");
  CHECK(w.sample_rate == 8000);
  REQUIRE(w.samples.size() == 2);
  CHECK(w.samples[0] == 0.5);
  CHECK(w.samples[1] == -1.0);

  std::string bad = WavBytes({1, 2}, 8000, 1);
  bad[0] = 'X';
  WriteFileBytes(dir + "/b.wav", bad);
  CHECK(ThrownCode([&] { ReadWav(dir + "/b.wav"); }) == ErrorCode::kBadMagic);
  std::string cut = WavBytes({1, 2, 3, 4}, 8000, 1);
  WriteFileBytes(dir + "/c.wav", cut.substr(0, cut.size() - 4));
  CHECK(ThrownCode([&] { ReadWav(dir + "/c.wav"); }) == ErrorCode::kTruncated);
  CHECK(ThrownCode([] { ComputeMfcc(std::vector<double>(10), MfccOptions{}); }) ==
        ErrorCode::kInvalidArgument);
}
