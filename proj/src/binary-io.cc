// nivec/binary-io.cc

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

#include "nivec/binary-io.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "nivec/error.h"

namespace nivec {

namespace {

template <class U>
void PutLittleEndian(U v, unsigned char *out) {
  for (size_t i = 0; i < sizeof(U); ++i) out[i] = static_cast<unsigned char>(v >> (8 * i));
}

template <class U>
U GetLittleEndian(const unsigned char *in) {
  U v = 0;
  for (size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(in[i]) << (8 * i);
  return v;
}

}  // namespace

void BinaryWriter::WriteRaw(const void *data, size_t n) {
  os_.write(static_cast<const char *>(data), static_cast<std::streamsize>(n));
  if (!os_) Fail(ErrorCode::kIo, "write failed");
}

void BinaryWriter::WriteMagic(std::string_view magic) { WriteRaw(magic.data(), magic.size()); }

void BinaryWriter::WriteU32(uint32_t v) {
  unsigned char buf[4];
  PutLittleEndian(v, buf);
  WriteRaw(buf, 4);
}

void BinaryWriter::WriteU64(uint64_t v) {
  unsigned char buf[8];
  PutLittleEndian(v, buf);
  WriteRaw(buf, 8);
}

void BinaryWriter::WriteF32(float v) { WriteU32(std::bit_cast<uint32_t>(v)); }
void BinaryWriter::WriteF64(double v) { WriteU64(std::bit_cast<uint64_t>(v)); }

void BinaryWriter::WriteString(std::string_view s) {
  WriteU32(static_cast<uint32_t>(s.size()));
  WriteRaw(s.data(), s.size());
}

void BinaryWriter::WriteMatrix(const Matrix &m) {
  WriteU32(static_cast<uint32_t>(m.rows()));
  WriteU32(static_cast<uint32_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) WriteF64(m(i, j));
}

void BinaryWriter::WriteVector(const Vector &v) {
  WriteU32(static_cast<uint32_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) WriteF64(v(i));
}

void BinaryReader::ReadRaw(void *data, size_t n) {
  is_.read(static_cast<char *>(data), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(is_.gcount()) != n) Fail(ErrorCode::kTruncated, "truncated file");
}

void BinaryReader::ExpectMagic(std::string_view magic) {
  std::string got(magic.size(), '\0');
  is_.read(got.data(), static_cast<std::streamsize>(got.size()));
  if (static_cast<size_t>(is_.gcount()) != magic.size() || got != magic)
    Fail(ErrorCode::kBadMagic, "bad magic");
}

void BinaryReader::ExpectVersion(uint32_t version) {
  uint32_t v = ReadU32();
  if (v != version)
    Fail(ErrorCode::kBadVersion, "unsupported version " + std::to_string(v) + " (expected " +
                                     std::to_string(version) + ")");
}

uint32_t BinaryReader::ReadU32() {
  unsigned char buf[4];
  ReadRaw(buf, 4);
  return GetLittleEndian<uint32_t>(buf);
}

uint64_t BinaryReader::ReadU64() {
  unsigned char buf[8];
  ReadRaw(buf, 8);
  return GetLittleEndian<uint64_t>(buf);
}

float BinaryReader::ReadF32() { return std::bit_cast<float>(ReadU32()); }
double BinaryReader::ReadF64() { return std::bit_cast<double>(ReadU64()); }

std::string BinaryReader::ReadString() {
  uint32_t n = ReadU32();
  std::string s(n, '\0');
  ReadRaw(s.data(), n);
  return s;
}

Matrix BinaryReader::ReadMatrix() {
  uint32_t rows = ReadU32();
  uint32_t cols = ReadU32();
  Matrix m(rows, cols);
  for (uint32_t i = 0; i < rows; ++i)
    for (uint32_t j = 0; j < cols; ++j) m(i, j) = ReadF64();
  return m;
}

Matrix BinaryReader::ReadMatrix(Eigen::Index rows, Eigen::Index cols, std::string_view what) {
  Matrix m = ReadMatrix();
  if (m.rows() != rows || m.cols() != cols)
    Fail(ErrorCode::kDimensionMismatch,
         std::string(what) + ": stored shape " + std::to_string(m.rows()) + "x" +
             std::to_string(m.cols()) + ", expected " + std::to_string(rows) + "x" +
             std::to_string(cols));
  return m;
}

Vector BinaryReader::ReadVector() {
  uint32_t n = ReadU32();
  Vector v(n);
  for (uint32_t i = 0; i < n; ++i) v(i) = ReadF64();
  return v;
}

bool BinaryReader::AtEnd() { return is_.peek() == std::char_traits<char>::eof(); }

std::string ReadFileBytes(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) Fail(ErrorCode::kMissingInput, "cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void WriteFileBytes(const std::string &path, std::string_view bytes) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) Fail(ErrorCode::kIo, "cannot write " + path);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) Fail(ErrorCode::kIo, "write failed: " + path);
}

std::string HexU64(uint64_t v) {
  static const char *digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[i] = digits[v & 0xf];
  return s;
}

std::string FileContentHash(const std::string &path) { return HexU64(Fnv1a64(ReadFileBytes(path))); }

}  // namespace nivec
