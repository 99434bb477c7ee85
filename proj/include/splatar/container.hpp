// Copyright Contributors to the splatar project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "splatar/common.hpp"

namespace splatar {

// Section-table container shared by avatar assets, rigs, reconstructor
// weights and feature dumps. Layout is documented in docs/format.md.

inline constexpr std::uint16_t kContainerVersion = 1;
inline constexpr std::size_t kHeaderBytes = 16;
inline constexpr std::size_t kEntryBytes = 96;
inline constexpr std::size_t kSectionNameBytes = 40;
inline constexpr std::size_t kMaxRank = 4;
inline constexpr std::size_t kDataAlignment = 64;

enum class DType : std::uint8_t { F32 = 1, F64 = 2, I32 = 3, U8 = 4 };

std::size_t dtype_size(DType t);
const char* dtype_name(DType t);

template <typename T>
constexpr DType dtype_of();
template <>
constexpr DType dtype_of<float>() { return DType::F32; }
template <>
constexpr DType dtype_of<double>() { return DType::F64; }
template <>
constexpr DType dtype_of<std::int32_t>() { return DType::I32; }
template <>
constexpr DType dtype_of<std::uint8_t>() { return DType::U8; }

/// Distinct failure modes when reading a container. `section()` names the
/// offending section ("header" / "section table" for structural damage).
class FormatError : public Error {
 public:
  enum class Kind { BadMagic, VersionMismatch, Truncated, MissingSection, BadShape, InvariantViolation };

  FormatError(Kind kind, std::string section, const std::string& detail);

  Kind kind() const { return kind_; }
  const std::string& section() const { return section_; }

 private:
  Kind kind_;
  std::string section_;
};

const char* to_string(FormatError::Kind kind);

struct Section {
  std::string name;
  DType dtype = DType::F32;
  std::vector<std::uint64_t> shape;
  std::vector<std::byte> bytes;

  std::uint64_t element_count() const;
};

class Container {
 public:
  explicit Container(std::string_view magic);

  const std::string& magic() const { return magic_; }
  const std::vector<Section>& sections() const { return sections_; }

  template <typename T>
  void add(std::string name, std::vector<std::uint64_t> shape, std::span<const T> values) {
    Section s;
    s.name = std::move(name);
    s.dtype = dtype_of<T>();
    s.shape = std::move(shape);
    s.bytes.resize(values.size_bytes());
    if (!values.empty()) std::memcpy(s.bytes.data(), values.data(), values.size_bytes());
    add_section(std::move(s));
  }

  /// Adds a dense Eigen object; shape defaults to (rows, cols).
  template <typename Derived>
  void add_matrix(std::string name, const Eigen::DenseBase<Derived>& m, std::vector<std::uint64_t> shape = {}) {
    using T = typename Derived::Scalar;
    Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
    if (shape.empty()) shape = {static_cast<std::uint64_t>(rm.rows()), static_cast<std::uint64_t>(rm.cols())};
    add<T>(std::move(name), std::move(shape), std::span<const T>(rm.data(), static_cast<std::size_t>(rm.size())));
  }

  void add_section(Section s);

  const Section* find(std::string_view name) const;
  /// Throws FormatError(MissingSection).
  const Section& get(std::string_view name) const;

  /// Copies a section into a row-major matrix after checking dtype and that
  /// the element count equals rows * cols. `rows`/`cols` of -1 are inferred
  /// from a rank-2 shape (or rank-1 as a column).
  template <typename T>
  Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> matrix(std::string_view name,
                                                                          Eigen::Index rows = -1,
                                                                          Eigen::Index cols = -1) const {
    const Section& s = get(name);
    check_dtype(s, dtype_of<T>());
    const auto count = static_cast<Eigen::Index>(s.element_count());
    if (rows < 0 && cols < 0) {
      rows = s.shape.empty() ? 0 : static_cast<Eigen::Index>(s.shape[0]);
      cols = rows == 0 ? 0 : count / rows;
    } else if (rows < 0) {
      rows = cols == 0 ? 0 : count / cols;
    } else if (cols < 0) {
      cols = rows == 0 ? 0 : count / rows;
    }
    if (rows * cols != count)
      throw FormatError(FormatError::Kind::BadShape, s.name,
                        "expected " + std::to_string(rows) + "x" + std::to_string(cols) + " elements, found " +
                            std::to_string(count));
    Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out(rows, cols);
    if (count > 0) std::memcpy(out.data(), s.bytes.data(), s.bytes.size());
    return out;
  }

  template <typename T>
  std::vector<T> values(std::string_view name) const {
    const Section& s = get(name);
    check_dtype(s, dtype_of<T>());
    std::vector<T> out(s.element_count());
    if (!out.empty()) std::memcpy(out.data(), s.bytes.data(), s.bytes.size());
    return out;
  }

  std::vector<std::byte> serialize() const;
  static Container parse(std::span<const std::byte> bytes, std::string_view expected_magic);

  void write(const std::filesystem::path& path) const;
  static Container read(const std::filesystem::path& path, std::string_view expected_magic);

 private:
  static void check_dtype(const Section& s, DType expected);

  std::string magic_;
  std::vector<Section> sections_;
};

}  // namespace splatar
