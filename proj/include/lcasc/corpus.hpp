#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "lcasc/error.hpp"
#include "lcasc/parallel.hpp"
#include "lcasc/png_io.hpp"
#include "lcasc/rng.hpp"
#include "lcasc/tensor.hpp"

namespace lcasc {

// ---------------------------------------------------------------------------
// Resize and preprocessing
// ---------------------------------------------------------------------------

// Bilinear resampling with pixel-center alignment and edge clamping.
// Constant images are reproduced exactly.
inline ImageTensor resize_bilinear(const ImageTensor& src, std::size_t out_h, std::size_t out_w) {
  if (out_h == 0 || out_w == 0) throw InvalidArgument("resize target must be positive");
  if (src.rows() == out_h && src.cols() == out_w) return src;
  const std::size_t C = src.depth();
  ImageTensor out(out_h, out_w, C);

  const auto coord = [](std::size_t dst, std::size_t n_src, std::size_t n_dst, std::size_t& i0,
                        std::size_t& i1, double& f) {
    double s = (static_cast<double>(dst) + 0.5) * static_cast<double>(n_src) /
                   static_cast<double>(n_dst) -
               0.5;
    s = std::clamp(s, 0.0, static_cast<double>(n_src - 1));
    i0 = static_cast<std::size_t>(std::floor(s));
    i1 = std::min(i0 + 1, n_src - 1);
    f = s - static_cast<double>(i0);
  };
  const auto lerp = [](double a, double b, double t) { return a + t * (b - a); };

  for (std::size_t y = 0; y < out_h; ++y) {
    std::size_t y0, y1;
    double fy;
    coord(y, src.rows(), out_h, y0, y1, fy);
    for (std::size_t x = 0; x < out_w; ++x) {
      std::size_t x0, x1;
      double fx;
      coord(x, src.cols(), out_w, x0, x1, fx);
      for (std::size_t c = 0; c < C; ++c) {
        const double top = lerp(src(y0, x0, c), src(y0, x1, c), fx);
        const double bot = lerp(src(y1, x0, c), src(y1, x1, c), fx);
        out(y, x, c) = lerp(top, bot, fy);
      }
    }
  }
  return out;
}

struct PreprocessFlags {
  bool mean_subtract = true;
};

inline ImageTensor preprocess(const ImageTensor& image, PreprocessFlags flags = {}) {
  if (!flags.mean_subtract || image.empty()) return image;
  double sum = 0.0;
  for (double v : image.values()) sum += v;
  const double mean = sum / static_cast<double>(image.size());
  ImageTensor out = image;
  for (double& v : out.values()) v -= mean;
  return out;
}

// Decode a PNG and resample it to the target size; values in [0, 1].
inline ImageTensor load_image(const std::filesystem::path& path, std::size_t height,
                              std::size_t width) {
  return resize_bilinear(read_png(path), height, width);
}

// ---------------------------------------------------------------------------
// Synthetic information graphics
// ---------------------------------------------------------------------------

struct SynthSpec {
  std::uint64_t seed = 0;
  int num_series = 1;  // 1..4
  bool axes = true;
  bool legend = false;
  bool gridlines = false;
  bool text = true;
  bool bars = false;  // bar chart instead of line chart
  std::size_t height = 64;
  std::size_t width = 64;

  // Style flags as a letter string: a=axes l=legend g=gridlines t=text b=bars,
  // "-" for none.
  std::string flags() const {
    std::string f;
    if (axes) f += 'a';
    if (bars) f += 'b';
    if (gridlines) f += 'g';
    if (legend) f += 'l';
    if (text) f += 't';
    return f.empty() ? "-" : f;
  }

  void set_flags(std::string_view f) {
    axes = legend = gridlines = text = bars = false;
    if (f == "-") return;
    for (char ch : f) {
      switch (ch) {
        case 'a': axes = true; break;
        case 'b': bars = true; break;
        case 'g': gridlines = true; break;
        case 'l': legend = true; break;
        case 't': text = true; break;
        default: throw InvalidArgument(std::string("unknown synth flag '") + ch + "'");
      }
    }
  }

  void validate() const {
    if (num_series < 1 || num_series > 4) throw InvalidArgument("num_series must lie in 1..4");
    if (height < 16 || width < 16) throw InvalidArgument("synthetic graphics need at least 16x16");
  }

  // A varied but deterministic style drawn from the seed.
  static SynthSpec from_seed(std::uint64_t seed, std::size_t height, std::size_t width) {
    Rng rng = Rng::stream(seed, 0x57e1);
    SynthSpec s;
    s.seed = seed;
    s.height = height;
    s.width = width;
    s.num_series = static_cast<int>(rng.integer(1, 4));
    s.axes = true;
    s.bars = rng.uniform() < 0.35;
    s.gridlines = rng.uniform() < 0.5;
    s.legend = s.num_series > 1 && rng.uniform() < 0.8;
    s.text = rng.uniform() < 0.75;
    return s;
  }
};

namespace detail {

using Color = std::array<double, 3>;

inline constexpr std::array<Color, 5> kPalette{{
    {0.85, 0.10, 0.10},  // red
    {0.10, 0.25, 0.85},  // blue
    {0.10, 0.60, 0.20},  // green
    {0.95, 0.55, 0.05},  // orange
    {0.55, 0.15, 0.70},  // purple
}};

class Canvas {
 public:
  Canvas(std::size_t h, std::size_t w) : img_(h, w, 3, 1.0) {}

  void put(std::ptrdiff_t y, std::ptrdiff_t x, const Color& c) {
    if (y < 0 || x < 0 || y >= static_cast<std::ptrdiff_t>(img_.rows()) ||
        x >= static_cast<std::ptrdiff_t>(img_.cols())) {
      return;
    }
    for (std::size_t ch = 0; ch < 3; ++ch) {
      img_(static_cast<std::size_t>(y), static_cast<std::size_t>(x), ch) = c[ch];
    }
  }

  // Inclusive-exclusive rectangle [y0, y1) x [x0, x1).
  void rect(std::ptrdiff_t y0, std::ptrdiff_t x0, std::ptrdiff_t y1, std::ptrdiff_t x1,
            const Color& c) {
    for (std::ptrdiff_t y = y0; y < y1; ++y) {
      for (std::ptrdiff_t x = x0; x < x1; ++x) put(y, x, c);
    }
  }

  // Bresenham with a square brush of side `thick`.
  void line(std::ptrdiff_t y0, std::ptrdiff_t x0, std::ptrdiff_t y1, std::ptrdiff_t x1,
            std::ptrdiff_t thick, const Color& c) {
    const std::ptrdiff_t dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    const std::ptrdiff_t dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    std::ptrdiff_t err = dx + dy;
    for (;;) {
      rect(y0, x0, y0 + thick, x0 + thick, c);
      if (x0 == x1 && y0 == y1) break;
      const std::ptrdiff_t e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }

  ImageTensor take() { return std::move(img_); }

 private:
  ImageTensor img_;
};

// A row of dark "words" standing in for rendered text.
inline void text_proxy(Canvas& cv, Rng& rng, std::ptrdiff_t y, std::ptrdiff_t x0, std::ptrdiff_t x1,
                       std::ptrdiff_t h) {
  const Color ink{0.15, 0.15, 0.15};
  std::ptrdiff_t x = x0;
  while (x < x1) {
    const std::ptrdiff_t w = 2 + static_cast<std::ptrdiff_t>(rng.integer(1, 5)) * h / 2;
    cv.rect(y, x, y + h, std::min(x + w, x1), ink);
    x += w + std::max<std::ptrdiff_t>(1, h / 2 + 1);
  }
}

}  // namespace detail

// Renders a line or bar graphic: white background, black axes, 1-4 colored
// series, optional gridlines, legend swatches and text-proxy blocks.
inline ImageTensor synth_graphic(const SynthSpec& spec) {
  spec.validate();
  using detail::Color;
  using std::ptrdiff_t;
  Rng rng = Rng::stream(spec.seed, 0x9a41);
  const auto H = static_cast<ptrdiff_t>(spec.height);
  const auto W = static_cast<ptrdiff_t>(spec.width);
  detail::Canvas cv(spec.height, spec.width);

  const ptrdiff_t unit = std::max<ptrdiff_t>(1, std::min(H, W) / 64);
  const ptrdiff_t left = W * 16 / 100;
  const ptrdiff_t right = W - W * 6 / 100;
  const ptrdiff_t top = H * 16 / 100;
  const ptrdiff_t bottom = H - H * 16 / 100;
  const ptrdiff_t text_h = std::max<ptrdiff_t>(1, H / 32);

  if (spec.gridlines) {
    const Color grid{0.82, 0.82, 0.82};
    const int n = static_cast<int>(rng.integer(3, 4));
    for (int i = 1; i <= n; ++i) {
      const ptrdiff_t y = bottom - (bottom - top) * i / (n + 1);
      cv.rect(y, left, y + unit, right, grid);
    }
  }

  const Color black{0.0, 0.0, 0.0};
  const std::size_t first_color = static_cast<std::size_t>(rng.integer(0, 4));
  const auto series_color = [&](int s) {
    return detail::kPalette[(first_color + static_cast<std::size_t>(s)) % detail::kPalette.size()];
  };

  if (spec.bars) {
    const int groups = static_cast<int>(rng.integer(3, 5));
    const ptrdiff_t group_w = (right - left - 2 * unit) / groups;
    const ptrdiff_t bar_w = std::max<ptrdiff_t>(1, group_w * 2 / (3 * spec.num_series));
    for (int g = 0; g < groups; ++g) {
      const ptrdiff_t gx = left + 2 * unit + g * group_w + group_w / 6;
      for (int s = 0; s < spec.num_series; ++s) {
        const double frac = rng.uniform(0.2, 0.85);
        const ptrdiff_t h = static_cast<ptrdiff_t>(frac * static_cast<double>(bottom - top));
        cv.rect(bottom - h, gx + s * bar_w, bottom, gx + (s + 1) * bar_w, series_color(s));
      }
    }
  } else {
    const ptrdiff_t thick = std::max<ptrdiff_t>(1, unit);
    for (int s = 0; s < spec.num_series; ++s) {
      const int pts = static_cast<int>(rng.integer(5, 9));
      double level = rng.uniform(0.2, 0.8);
      ptrdiff_t py = 0, px = 0;
      for (int i = 0; i < pts; ++i) {
        const ptrdiff_t x = left + 2 * unit + (right - left - 4 * unit) * i / (pts - 1);
        const ptrdiff_t y = bottom - 2 * unit -
                            static_cast<ptrdiff_t>(level * static_cast<double>(bottom - top - 4 * unit));
        if (i > 0) cv.line(py, px, y, x, thick, series_color(s));
        py = y;
        px = x;
        level = std::clamp(level + rng.uniform(-0.3, 0.3), 0.0, 1.0);
      }
    }
  }

  if (spec.axes) {
    cv.rect(top, left, bottom + unit, left + unit, black);
    cv.rect(bottom, left, bottom + unit, right, black);
    const int ticks = 4;
    for (int i = 0; i <= ticks; ++i) {
      const ptrdiff_t y = bottom - (bottom - top) * i / ticks;
      cv.rect(y, left - 2 * unit, y + unit, left, black);
      const ptrdiff_t x = left + (right - left) * i / ticks;
      cv.rect(bottom, x, bottom + 2 * unit, x + unit, black);
    }
  }

  if (spec.text) {
    // Title, then y-axis tick labels and an x-axis caption.
    const ptrdiff_t tw = (right - left) * static_cast<ptrdiff_t>(rng.integer(40, 80)) / 100;
    detail::text_proxy(cv, rng, H * 4 / 100, left + (right - left - tw) / 2,
                       left + (right - left + tw) / 2, text_h + unit);
    for (int i = 0; i <= 4; i += 2) {
      const ptrdiff_t y = bottom - (bottom - top) * i / 4 - text_h / 2;
      detail::text_proxy(cv, rng, y, W * 3 / 100, left - 3 * unit, text_h);
    }
    const ptrdiff_t cw = (right - left) / 3;
    detail::text_proxy(cv, rng, bottom + 4 * unit, left + cw, left + 2 * cw, text_h);
  }

  if (spec.legend) {
    const ptrdiff_t sw = std::max<ptrdiff_t>(2, 3 * unit);
    const ptrdiff_t lx = right - W * 28 / 100;
    for (int s = 0; s < spec.num_series; ++s) {
      const ptrdiff_t y = top + unit + s * (sw + unit);
      cv.rect(y, lx, y + sw, lx + sw, series_color(s));
      detail::text_proxy(cv, rng, y, lx + sw + unit, lx + sw + unit + W * 14 / 100,
                         std::max<ptrdiff_t>(1, sw - unit));
    }
  }
  return cv.take();
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

struct ManifestEntry {
  enum class Kind { file, synth };
  Kind kind = Kind::synth;
  std::filesystem::path path;  // file entries
  SynthSpec synth;             // synth entries (height/width come from the manifest)

  std::string to_line() const {
    if (kind == Kind::file) return "file:" + path.string();
    return "synth:" + std::to_string(synth.seed) + ":" + std::to_string(synth.num_series) + ":" +
           synth.flags();
  }
};

struct CorpusManifest {
  std::vector<ManifestEntry> entries;
  std::size_t target_height = 64;
  std::size_t target_width = 64;
  bool mean_subtracted = true;
  std::uint64_t seed = 0;
  std::filesystem::path base_dir;  // relative file entries resolve here

  void validate_geometry(const DictShape& d) const {
    (void)code_shape(target_height, target_width, d);
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(std::string_view s, const std::string& what) {
  T v{};
  const auto* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v);
  if (res.ec != std::errc{} || res.ptr != end) {
    throw FormatError(what + ": invalid number '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace detail

// Parses "HxW".
inline std::pair<std::size_t, std::size_t> parse_size(std::string_view s) {
  const auto x = s.find('x');
  if (x == std::string_view::npos) throw FormatError("size must look like HxW, got '" + std::string(s) + "'");
  const auto h = detail::parse_number<std::size_t>(s.substr(0, x), "size");
  const auto w = detail::parse_number<std::size_t>(s.substr(x + 1), "size");
  if (h == 0 || w == 0) throw FormatError("size must be positive");
  return {h, w};
}

// Line-oriented manifest: `file:<path>` or `synth:<seed>:<num_series>:<flags>`
// per line, `#` comments. Header comments `# size: HxW`, `# mean_subtract: on|off`
// and `# seed: N` set corpus-wide options.
inline CorpusManifest parse_manifest(std::string_view text,
                                     const std::filesystem::path& base_dir = {}) {
  CorpusManifest m;
  m.base_dir = base_dir;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string_view raw =
        text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const std::string where = "manifest line " + std::to_string(line_no);
    std::string_view line = detail::trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      const std::string_view body = detail::trim(line.substr(1));
      const auto colon = body.find(':');
      if (colon == std::string_view::npos) continue;
      const std::string_view key = detail::trim(body.substr(0, colon));
      const std::string_view val = detail::trim(body.substr(colon + 1));
      if (key == "size") {
        std::tie(m.target_height, m.target_width) = parse_size(val);
      } else if (key == "mean_subtract") {
        if (val != "on" && val != "off") throw FormatError(where + ": mean_subtract must be on|off");
        m.mean_subtracted = val == "on";
      } else if (key == "seed") {
        m.seed = detail::parse_number<std::uint64_t>(val, where);
      }
      continue;
    }
    ManifestEntry e;
    if (line.starts_with("file:")) {
      e.kind = ManifestEntry::Kind::file;
      e.path = std::string(line.substr(5));
      if (e.path.empty()) throw FormatError(where + ": empty file path");
    } else if (line.starts_with("synth:")) {
      e.kind = ManifestEntry::Kind::synth;
      const std::string_view rest = line.substr(6);
      const auto c1 = rest.find(':');
      const auto c2 = c1 == std::string_view::npos ? c1 : rest.find(':', c1 + 1);
      if (c2 == std::string_view::npos) {
        throw FormatError(where + ": expected synth:<seed>:<num_series>:<flags>");
      }
      e.synth.seed = detail::parse_number<std::uint64_t>(rest.substr(0, c1), where);
      e.synth.num_series = detail::parse_number<int>(rest.substr(c1 + 1, c2 - c1 - 1), where);
      try {
        e.synth.set_flags(rest.substr(c2 + 1));
        e.synth.validate();
      } catch (const InvalidArgument& err) {
        throw FormatError(where + ": " + err.what());
      }
    } else {
      throw FormatError(where + ": unrecognized entry '" + std::string(line) + "'");
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

inline CorpusManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), path.parent_path());
}

inline std::string format_manifest(const CorpusManifest& m) {
  std::string out = "# lcasc corpus manifest\n";
  out += "# size: " + std::to_string(m.target_height) + "x" + std::to_string(m.target_width) + "\n";
  out += std::string("# mean_subtract: ") + (m.mean_subtracted ? "on" : "off") + "\n";
  out += "# seed: " + std::to_string(m.seed) + "\n";
  for (const auto& e : m.entries) out += e.to_line() + "\n";
  return out;
}

// Loads or renders one entry at the manifest's target size, without
// preprocessing; values in [0, 1].
inline ImageTensor load_entry(const CorpusManifest& m, const ManifestEntry& e) {
  if (e.kind == ManifestEntry::Kind::file) {
    const auto p = e.path.is_absolute() ? e.path : m.base_dir / e.path;
    return load_image(p, m.target_height, m.target_width);
  }
  SynthSpec s = e.synth;
  s.height = m.target_height;
  s.width = m.target_width;
  return synth_graphic(s);
}

// All entries in manifest order, preprocessed per the manifest flags. Failures
// are collected and reported together with their entry indices.
inline std::vector<ImageTensor> build_corpus(const CorpusManifest& m, std::size_t threads = 1,
                                             bool apply_preprocess = true) {
  if (m.entries.empty()) throw InvalidArgument("manifest has no entries");
  std::vector<ImageTensor> out(m.entries.size());
  std::vector<std::string> errors(m.entries.size());
  parallel_for(m.entries.size(), threads, [&](std::size_t i) {
    try {
      ImageTensor img = load_entry(m, m.entries[i]);
      out[i] = apply_preprocess ? preprocess(img, {m.mean_subtracted}) : std::move(img);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  std::string report;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i].empty()) report += "\n  entry " + std::to_string(i) + ": " + errors[i];
  }
  if (!report.empty()) throw Error("failed to build corpus:" + report);
  return out;
}

}  // namespace lcasc
