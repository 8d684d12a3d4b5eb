// Copyright 2026 The lesacache Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "lesa/core.hpp"
#include "lesa/error.hpp"

namespace lesa {

namespace binary {

class Writer {
 public:
  void bytes(const char* data, std::size_t n) { buf_.insert(buf_.end(), data, data + n); }
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) { put_le(v); }
  void u64(std::uint64_t v) { put_le(v); }
  void f32(float v) { put_le(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { put_le(std::bit_cast<std::uint64_t>(v)); }

  const std::vector<char>& buffer() const noexcept { return buf_; }

 private:
  template <typename U>
  void put_le(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }

  std::vector<char> buf_;
};

class Reader {
 public:
  explicit Reader(std::vector<char> data) : data_(std::move(data)) {}

  std::size_t remaining() const noexcept { return data_.size() - pos_; }

  void expect(std::size_t n, const char* what) const {
    if (remaining() < n) {
      detail::fail(ErrorCode::kLength, "truncated payload while reading ", what, ": need ", n,
                   " bytes, have ", remaining());
    }
  }

  std::array<char, 4> magic() {
    expect(4, "magic");
    std::array<char, 4> m{};
    std::memcpy(m.data(), data_.data() + pos_, 4);
    pos_ += 4;
    return m;
  }
  std::uint8_t u8() {
    expect(1, "u8");
    return static_cast<std::uint8_t>(data_[pos_++]);
  }
  std::uint32_t u32() { return get_le<std::uint32_t>("u32"); }
  std::uint64_t u64() { return get_le<std::uint64_t>("u64"); }
  float f32() { return std::bit_cast<float>(get_le<std::uint32_t>("f32")); }
  double f64() { return std::bit_cast<double>(get_le<std::uint64_t>("f64")); }

 private:
  template <typename U>
  U get_le(const char* what) {
    expect(sizeof(U), what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return v;
  }

  std::vector<char> data_;
  std::size_t pos_ = 0;
};

inline void write_file(const std::filesystem::path& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) detail::fail(ErrorCode::kIo, "cannot open ", path.string(), " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) detail::fail(ErrorCode::kIo, "write failed for ", path.string());
}

inline std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) detail::fail(ErrorCode::kIo, "cannot open ", path.string(), " for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace binary

inline constexpr std::array<char, 4> kTrajectoryMagic{'L', 'E', 'S', 'A'};
inline constexpr std::uint32_t kTrajectoryVersion = 1;

// LESA trajectory file: magic, u32 version, u32 S, u32 D, u32 Ds, u64 seed,
// then S timesteps, S*D features and S*Ds states as little-endian binary32.
inline std::vector<char> encode_trajectory(const Trajectory& traj) {
  validate(traj);
  binary::Writer w;
  w.bytes(kTrajectoryMagic.data(), kTrajectoryMagic.size());
  w.u32(kTrajectoryVersion);
  w.u32(static_cast<std::uint32_t>(traj.steps()));
  w.u32(static_cast<std::uint32_t>(traj.feature_dim()));
  w.u32(static_cast<std::uint32_t>(traj.state_dim()));
  w.u64(traj.seed);
  for (double t : traj.timesteps) w.f32(static_cast<float>(t));
  for (const auto& f : traj.features)
    for (double v : f) w.f32(static_cast<float>(v));
  for (const auto& x : traj.states)
    for (double v : x) w.f32(static_cast<float>(v));
  return w.buffer();
}

inline Trajectory decode_trajectory(std::vector<char> bytes) {
  binary::Reader r(std::move(bytes));
  if (r.remaining() < 4 || r.magic() != kTrajectoryMagic) {
    detail::fail(ErrorCode::kFormat, "not a trajectory file (bad magic)");
  }
  const std::uint32_t version = r.u32();
  if (version != kTrajectoryVersion) {
    detail::fail(ErrorCode::kUnsupportedVersion, "unsupported trajectory version ", version);
  }
  const std::size_t steps = r.u32();
  const std::size_t dim = r.u32();
  const std::size_t state_dim = r.u32();
  Trajectory traj;
  traj.seed = r.u64();
  const std::size_t payload = 4 * (steps + steps * dim + steps * state_dim);
  if (r.remaining() != payload) {
    detail::fail(ErrorCode::kLength, "trajectory payload has ", r.remaining(), " bytes, header declares ",
                 payload);
  }
  traj.timesteps.resize(steps);
  for (auto& t : traj.timesteps) t = r.f32();
  traj.features.assign(steps, Feature(dim));
  for (auto& f : traj.features)
    for (auto& v : f) v = r.f32();
  traj.states.assign(steps, Feature(state_dim));
  for (auto& x : traj.states)
    for (auto& v : x) v = r.f32();
  validate(traj);
  return traj;
}

inline void write_trajectory(const Trajectory& traj, const std::filesystem::path& path) {
  binary::write_file(path, encode_trajectory(traj));
}

inline Trajectory read_trajectory(const std::filesystem::path& path) {
  try {
    return decode_trajectory(binary::read_file(path));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

// Rounds every stored value to binary32, i.e. what a write/read cycle yields.
inline Trajectory quantize(Trajectory traj) {
  auto q = [](double v) { return static_cast<double>(static_cast<float>(v)); };
  for (auto& t : traj.timesteps) t = q(t);
  for (auto& f : traj.features)
    for (auto& v : f) v = q(v);
  for (auto& x : traj.states)
    for (auto& v : x) v = q(v);
  traj.backbone_tag.clear();
  return traj;
}

}  // namespace lesa
