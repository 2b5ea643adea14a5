// nivec/mfcc.h

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

#ifndef NIVEC_MFCC_H_
#define NIVEC_MFCC_H_

#include <span>
#include <string>
#include <vector>

#include "nivec/corpus.h"

namespace nivec {

// Minimal MFCC front-end for demo audio: pre-emphasis, Hamming window,
// power spectrum, triangular mel filterbank, log, DCT-II.  No dithering,
// no liftering, no energy replacement.

struct MfccOptions {
  int sample_rate = 16000;
  double frame_length_ms = 25.0;
  double frame_shift_ms = 10.0;
  int num_mel_bins = 40;
  int num_ceps = 20;
  double low_freq = 20.0;
  double high_freq = 0.0;  // <= 0 means Nyquist
  double preemphasis = 0.97;
};

double HzToMel(double hz);
double MelToHz(double mel);

/// In-place radix-2 FFT of a power-of-two length complex buffer
/// (re/im interleaved in two vectors).
void Fft(std::vector<double> *re, std::vector<double> *im);

/// num_mel_bins x (fft_size/2 + 1) triangular weights.
Matrix MelFilterbank(const MfccOptions &opts, int fft_size);

FeatureSequence ComputeMfcc(std::span<const double> samples, const MfccOptions &opts);

struct WavData {
  int sample_rate = 0;
  std::vector<double> samples;  // first channel, scaled to [-1, 1)
};

/// 16-bit PCM RIFF/WAVE reader.
WavData ReadWav(const std::string &path);

}  // namespace nivec

#endif  // NIVEC_MFCC_H_
