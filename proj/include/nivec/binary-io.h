// nivec/binary-io.h

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

#ifndef NIVEC_BINARY_IO_H_
#define NIVEC_BINARY_IO_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>

#include "nivec/numerics.h"

namespace nivec {

// Little-endian primitive serialization.  Every reader method throws
// Error(kTruncated) when the stream ends early.

class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream &os) : os_(os) {}

  void WriteMagic(std::string_view magic);
  void WriteU32(uint32_t v);
  void WriteU64(uint64_t v);
  void WriteF32(float v);
  void WriteF64(double v);
  void WriteString(std::string_view s);
  /// rows, cols (u32) then row-major f64 payload.
  void WriteMatrix(const Matrix &m);
  void WriteVector(const Vector &v);

 private:
  void WriteRaw(const void *data, size_t n);
  std::ostream &os_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::istream &is) : is_(is) {}

  /// Throws Error(kBadMagic, "bad magic") on mismatch.
  void ExpectMagic(std::string_view magic);
  /// Throws Error(kBadVersion) unless the stored version equals `version`.
  void ExpectVersion(uint32_t version);
  uint32_t ReadU32();
  uint64_t ReadU64();
  float ReadF32();
  double ReadF64();
  std::string ReadString();
  Matrix ReadMatrix();
  Vector ReadVector();
  /// Matrix whose stored shape must equal rows x cols.
  Matrix ReadMatrix(Eigen::Index rows, Eigen::Index cols, std::string_view what);
  bool AtEnd();

 private:
  void ReadRaw(void *data, size_t n);
  std::istream &is_;
};

std::string ReadFileBytes(const std::string &path);
void WriteFileBytes(const std::string &path, std::string_view bytes);
/// FNV-1a of a file's full contents as 16 hex digits.
std::string FileContentHash(const std::string &path);
std::string HexU64(uint64_t v);

}  // namespace nivec

#endif  // NIVEC_BINARY_IO_H_
