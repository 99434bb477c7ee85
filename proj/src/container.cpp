// Copyright Contributors to the splatar project
// SPDX-License-Identifier: Apache-2.0

#include "splatar/container.hpp"

#include <bit>
#include <fstream>
#include <numeric>

namespace splatar {

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

namespace {

template <typename T>
void put(std::vector<std::byte>& out, std::size_t at, T v) {
  std::memcpy(out.data() + at, &v, sizeof(T));
}

template <typename T>
T take(std::span<const std::byte> in, std::size_t at) {
  T v;
  std::memcpy(&v, in.data() + at, sizeof(T));
  return v;
}

std::size_t align_up(std::size_t n) { return (n + kDataAlignment - 1) / kDataAlignment * kDataAlignment; }

}  // namespace

std::size_t dtype_size(DType t) {
  switch (t) {
    case DType::F32: return 4;
    case DType::F64: return 8;
    case DType::I32: return 4;
    case DType::U8: return 1;
  }
  return 0;
}

const char* dtype_name(DType t) {
  switch (t) {
    case DType::F32: return "f32";
    case DType::F64: return "f64";
    case DType::I32: return "i32";
    case DType::U8: return "u8";
  }
  return "?";
}

const char* to_string(FormatError::Kind kind) {
  switch (kind) {
    case FormatError::Kind::BadMagic: return "bad magic";
    case FormatError::Kind::VersionMismatch: return "version mismatch";
    case FormatError::Kind::Truncated: return "truncated section";
    case FormatError::Kind::MissingSection: return "missing section";
    case FormatError::Kind::BadShape: return "bad shape";
    case FormatError::Kind::InvariantViolation: return "invariant violation";
  }
  return "?";
}

FormatError::FormatError(Kind kind, std::string section, const std::string& detail)
    : Error(std::string(to_string(kind)) + " in '" + section + "': " + detail),
      kind_(kind),
      section_(std::move(section)) {}

std::uint64_t Section::element_count() const {
  return std::accumulate(shape.begin(), shape.end(), std::uint64_t{1}, std::multiplies<>());
}

Container::Container(std::string_view magic) : magic_(magic) {
  if (magic_.size() != 4) throw InvalidParams("container magic must be 4 bytes");
}

void Container::add_section(Section s) {
  if (s.name.empty() || s.name.size() >= kSectionNameBytes)
    throw InvalidParams("section name must be 1.." + std::to_string(kSectionNameBytes - 1) + " bytes: " + s.name);
  if (s.shape.size() > kMaxRank) throw InvalidParams("section rank exceeds 4: " + s.name);
  if (find(s.name) != nullptr) throw InvalidParams("duplicate section: " + s.name);
  if (s.element_count() * dtype_size(s.dtype) != s.bytes.size())
    throw InvalidParams("section byte length does not match its shape: " + s.name);
  sections_.push_back(std::move(s));
}

const Section* Container::find(std::string_view name) const {
  for (const auto& s : sections_)
    if (s.name == name) return &s;
  return nullptr;
}

const Section& Container::get(std::string_view name) const {
  if (const Section* s = find(name)) return *s;
  throw FormatError(FormatError::Kind::MissingSection, std::string(name), "section not present");
}

void Container::check_dtype(const Section& s, DType expected) {
  if (s.dtype != expected)
    throw FormatError(FormatError::Kind::BadShape, s.name,
                      std::string("dtype ") + dtype_name(s.dtype) + ", expected " + dtype_name(expected));
}

std::vector<std::byte> Container::serialize() const {
  const std::size_t table_end = kHeaderBytes + kEntryBytes * sections_.size();
  std::vector<std::size_t> offsets;
  std::size_t cursor = align_up(table_end);
  for (const auto& s : sections_) {
    offsets.push_back(cursor);
    cursor = align_up(cursor + s.bytes.size());
  }
  std::vector<std::byte> out(cursor, std::byte{0});
  std::memcpy(out.data(), magic_.data(), 4);
  put<std::uint16_t>(out, 4, kContainerVersion);
  put<std::uint16_t>(out, 6, 0);
  put<std::uint32_t>(out, 8, static_cast<std::uint32_t>(sections_.size()));
  put<std::uint32_t>(out, 12, 0);
  for (std::size_t i = 0; i < sections_.size(); ++i) {
    const Section& s = sections_[i];
    const std::size_t e = kHeaderBytes + kEntryBytes * i;
    std::memcpy(out.data() + e, s.name.data(), s.name.size());
    put<std::uint8_t>(out, e + 40, static_cast<std::uint8_t>(s.dtype));
    put<std::uint8_t>(out, e + 41, static_cast<std::uint8_t>(s.shape.size()));
    for (std::size_t d = 0; d < s.shape.size(); ++d) put<std::uint64_t>(out, e + 48 + 8 * d, s.shape[d]);
    put<std::uint64_t>(out, e + 80, offsets[i]);
    put<std::uint64_t>(out, e + 88, s.bytes.size());
    if (!s.bytes.empty()) std::memcpy(out.data() + offsets[i], s.bytes.data(), s.bytes.size());
  }
  return out;
}

Container Container::parse(std::span<const std::byte> in, std::string_view expected_magic) {
  if (in.size() < 4 || std::memcmp(in.data(), expected_magic.data(), 4) != 0)
    throw FormatError(FormatError::Kind::BadMagic, "header",
                      "expected magic '" + std::string(expected_magic) + "'");
  if (in.size() < kHeaderBytes) throw FormatError(FormatError::Kind::Truncated, "header", "file shorter than header");
  const auto version = take<std::uint16_t>(in, 4);
  if (version != kContainerVersion)
    throw FormatError(FormatError::Kind::VersionMismatch, "header",
                      "file version " + std::to_string(version) + ", reader supports " +
                          std::to_string(kContainerVersion));
  const auto count = take<std::uint32_t>(in, 8);
  if (in.size() < kHeaderBytes + kEntryBytes * static_cast<std::size_t>(count))
    throw FormatError(FormatError::Kind::Truncated, "section table",
                      "table of " + std::to_string(count) + " entries exceeds file size");

  Container c(expected_magic);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t e = kHeaderBytes + kEntryBytes * i;
    const char* raw = reinterpret_cast<const char*>(in.data() + e);
    Section s;
    s.name.assign(raw, strnlen(raw, kSectionNameBytes));
    s.dtype = static_cast<DType>(take<std::uint8_t>(in, e + 40));
    if (dtype_size(s.dtype) == 0)
      throw FormatError(FormatError::Kind::BadShape, s.name, "unknown dtype code");
    const auto rank = take<std::uint8_t>(in, e + 41);
    if (rank > kMaxRank) throw FormatError(FormatError::Kind::BadShape, s.name, "rank exceeds 4");
    for (std::size_t d = 0; d < rank; ++d) s.shape.push_back(take<std::uint64_t>(in, e + 48 + 8 * d));
    const auto offset = take<std::uint64_t>(in, e + 80);
    const auto length = take<std::uint64_t>(in, e + 88);
    if (length != s.element_count() * dtype_size(s.dtype))
      throw FormatError(FormatError::Kind::BadShape, s.name, "byte length does not match shape");
    if (offset > in.size() || length > in.size() - offset)
      throw FormatError(FormatError::Kind::Truncated, s.name,
                        "needs bytes [" + std::to_string(offset) + ", " + std::to_string(offset + length) +
                            "), file has " + std::to_string(in.size()));
    s.bytes.assign(in.begin() + static_cast<std::ptrdiff_t>(offset),
                   in.begin() + static_cast<std::ptrdiff_t>(offset + length));
    if (c.find(s.name) != nullptr) throw FormatError(FormatError::Kind::BadShape, s.name, "duplicate section");
    c.sections_.push_back(std::move(s));
  }
  return c;
}

void Container::write(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

Container Container::read(const std::filesystem::path& path, std::string_view expected_magic) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for reading: " + path.string());
  f.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(f.tellg());
  f.seekg(0);
  std::vector<std::byte> bytes(size);
  f.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
  if (!f) throw IoError("read failed: " + path.string());
  return parse(bytes, expected_magic);
}

}  // namespace splatar
