#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "lcasc/autoencoder.hpp"
#include "lcasc/error.hpp"
#include "lcasc/tensor.hpp"

// LCAD binary files, little-endian:
//   "LCAD" | version u32 | kind u8 | K u32 | patch u32 | channels u32 | stride u32
// then, by kind:
//   0 sparse coding : K*patch*patch*channels f64 (element-major)
//   1 autoencoder   : encoder block, decoder block (same layout), K f64 biases
//   2 activations   : map_height u32 | map_width u32 | map_height*map_width*K f64

namespace lcasc {

inline constexpr std::string_view kLcadMagic = "LCAD";
inline constexpr std::uint32_t kLcadVersion = 1;

enum class FileKind : std::uint8_t { sparse_coding = 0, autoencoder = 1, activations = 2 };

inline const char* to_string(FileKind k) {
  switch (k) {
    case FileKind::sparse_coding: return "sparse_coding";
    case FileKind::autoencoder: return "autoencoder";
    case FileKind::activations: return "activations";
  }
  return "unknown";
}

// An activation tensor together with the geometry of the model that produced it.
struct ActivationRecord {
  DictShape shape;
  ActivationTensor acts;
  friend bool operator==(const ActivationRecord&, const ActivationRecord&) = default;
};

using LcadContent = std::variant<Dictionary, AutoencoderModel, ActivationRecord>;

inline FileKind kind_of(const LcadContent& c) { return static_cast<FileKind>(c.index()); }

namespace detail {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
  void f64s(std::span<const double> v) {
    for (double x : v) f64(x);
  }
  void raw(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}
  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) throw FormatError("LCAD: truncated file");
  }
  std::uint8_t u8() {
    need(1);
    return in_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(in_[pos_++]) << (8 * i);
    return std::bit_cast<double>(bits);
  }
  std::vector<double> f64s(std::size_t n) {
    need(n * 8);
    std::vector<double> v(n);
    for (auto& x : v) x = f64();
    return v;
  }
  std::string_view raw(std::size_t n) {
    need(n);
    std::string_view s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

inline std::uint32_t narrow_u32(std::size_t v, const char* what) {
  if (v > UINT32_MAX) throw InvalidArgument(std::string(what) + " does not fit in u32");
  return static_cast<std::uint32_t>(v);
}

inline void write_header(ByteWriter& w, FileKind kind, const DictShape& s) {
  w.raw(kLcadMagic);
  w.u32(kLcadVersion);
  w.u8(static_cast<std::uint8_t>(kind));
  w.u32(narrow_u32(s.num_elements, "K"));
  w.u32(narrow_u32(s.patch, "patch"));
  w.u32(narrow_u32(s.channels, "channels"));
  w.u32(narrow_u32(s.stride, "stride"));
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_lcad(const LcadContent& content) {
  detail::ByteWriter w;
  std::visit(
      [&](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, Dictionary>) {
          detail::write_header(w, FileKind::sparse_coding, c.shape());
          w.f64s(c.values());
        } else if constexpr (std::is_same_v<T, AutoencoderModel>) {
          c.validate();
          detail::write_header(w, FileKind::autoencoder, c.shape());
          w.f64s(c.encoder.values());
          w.f64s(c.decoder.values());
          w.f64s(c.encoder_bias);
        } else {
          if (c.acts.depth() != c.shape.num_elements) {
            throw DimensionError("activation record: K mismatch");
          }
          detail::write_header(w, FileKind::activations, c.shape);
          w.u32(detail::narrow_u32(c.acts.rows(), "map height"));
          w.u32(detail::narrow_u32(c.acts.cols(), "map width"));
          w.f64s(c.acts.values());
        }
      },
      content);
  return w.take();
}

inline LcadContent decode_lcad(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  if (r.raw(4) != kLcadMagic) throw FormatError("LCAD: bad magic");
  const std::uint32_t version = r.u32();
  if (version != kLcadVersion) {
    throw FormatError("LCAD: unsupported version " + std::to_string(version));
  }
  const std::uint8_t kind = r.u8();
  DictShape s;
  s.num_elements = r.u32();
  s.patch = r.u32();
  s.channels = r.u32();
  s.stride = r.u32();
  if (s.num_elements == 0 || s.patch == 0 || s.channels == 0 || s.stride == 0) {
    throw FormatError("LCAD: zero dimension in header");
  }
  LcadContent out;
  switch (kind) {
    case 0:
      out = Dictionary(s, r.f64s(s.total_size()));
      break;
    case 1: {
      AutoencoderModel m;
      m.encoder = Dictionary(s, r.f64s(s.total_size()));
      m.decoder = Dictionary(s, r.f64s(s.total_size()));
      m.encoder_bias = r.f64s(s.num_elements);
      out = std::move(m);
      break;
    }
    case 2: {
      const std::size_t mh = r.u32();
      const std::size_t mw = r.u32();
      ActivationRecord rec{s, ActivationTensor(mh, mw, s.num_elements,
                                               r.f64s(mh * mw * s.num_elements))};
      out = std::move(rec);
      break;
    }
    default:
      throw FormatError("LCAD: unknown model kind " + std::to_string(kind));
  }
  if (!r.done()) throw FormatError("LCAD: trailing bytes after payload");
  return out;
}

// Write-temp-then-rename so readers never observe a partial file.
inline void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

inline void write_file_atomic(const std::filesystem::path& path, std::string_view text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void save_lcad(const std::filesystem::path& path, const LcadContent& content) {
  write_file_atomic(path, encode_lcad(content));
}

inline LcadContent load_lcad(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return decode_lcad(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace lcasc
