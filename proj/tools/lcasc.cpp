#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lcasc/autoencoder.hpp"
#include "lcasc/checkpoint.hpp"
#include "lcasc/corpus.hpp"
#include "lcasc/csv.hpp"
#include "lcasc/lca.hpp"
#include "lcasc/metrics.hpp"
#include "lcasc/png_io.hpp"
#include "lcasc/trainer.hpp"
#include "lcasc/viz.hpp"

namespace fs = std::filesystem;
using namespace lcasc;

namespace {

struct Geometry {
  std::size_t k = 64;
  std::size_t patch = 8;
  std::size_t stride = 4;
};

struct SolverFlags {
  double lambda = LcaConfig{}.lambda;
  double step_size = LcaConfig{}.step_size;
  std::size_t max_steps = LcaConfig{}.max_steps;
  double tolerance = LcaConfig{}.tolerance;
  std::string threshold = "signed";

  LcaConfig config() const {
    LcaConfig c;
    c.lambda = lambda;
    c.step_size = step_size;
    c.max_steps = max_steps;
    c.tolerance = tolerance;
    c.mode = threshold == "nonneg" ? ThresholdMode::nonneg_soft : ThresholdMode::signed_soft;
    c.validate();
    return c;
  }
};

void add_geometry(CLI::App* cmd, Geometry& g) {
  cmd->add_option("--k", g.k, "Number of dictionary elements")->check(CLI::PositiveNumber);
  cmd->add_option("--patch", g.patch, "Patch side in pixels")->check(CLI::PositiveNumber);
  cmd->add_option("--stride", g.stride, "Stride between patch placements")->check(CLI::PositiveNumber);
}

void add_solver(CLI::App* cmd, SolverFlags& s) {
  cmd->add_option("--lambda", s.lambda, "Sparsity penalty / threshold")->check(CLI::NonNegativeNumber);
  cmd->add_option("--step-size", s.step_size, "Euler step as a fraction of the time constant");
  cmd->add_option("--max-steps", s.max_steps, "Maximum solver iterations")->check(CLI::PositiveNumber);
  cmd->add_option("--tolerance", s.tolerance, "Stop when mean |du| per step falls below this");
  cmd->add_option("--threshold", s.threshold, "Threshold function")
      ->check(CLI::IsMember({"signed", "nonneg"}));
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void print_epoch(const EpochStats& s) {
  std::cout << "epoch=" << s.epoch << ", mse=" << fmt(s.mse) << ", energy=" << fmt(s.energy)
            << ", active=" << fmt(s.percent_active) << std::endl;
}

struct LoadedCorpus {
  CorpusManifest manifest;
  std::vector<ImageTensor> images;
};

LoadedCorpus load_corpus(const fs::path& path, const Geometry* g, std::size_t threads) {
  LoadedCorpus c;
  c.manifest = read_manifest(path);
  if (c.manifest.entries.empty()) throw InvalidArgument(path.string() + ": manifest has no entries");
  if (g) c.manifest.validate_geometry({g->k, g->patch, 3, g->stride});
  c.images = build_corpus(c.manifest, threads);
  return c;
}

DictShape shape_for(const Geometry& g, const std::vector<ImageTensor>& images) {
  return {g.k, g.patch, images.front().depth(), g.stride};
}

ImageTensor load_for_model(const fs::path& image, const DictShape& shape, std::string_view size,
                           bool mean_subtract) {
  const auto [h, w] = parse_size(size);
  (void)code_shape(h, w, shape);
  ImageTensor img = load_image(image, h, w);
  check_image_against(img, shape);
  return preprocess(img, {mean_subtract});
}

ActivationTensor encode_with(const LcadContent& model, const ImageTensor& image,
                             const LcaConfig& lca, LcaState* state_out = nullptr) {
  if (const auto* d = std::get_if<Dictionary>(&model)) {
    LcaState st = LcaSolver(*d, lca).encode(image);
    ActivationTensor a = st.a;
    if (state_out) *state_out = std::move(st);
    return a;
  }
  if (const auto* m = std::get_if<AutoencoderModel>(&model)) return ae_encode(image, *m);
  throw FormatError("activation files cannot encode images");
}

DictShape model_shape(const LcadContent& c) {
  return std::visit(
      [](const auto& m) -> DictShape {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Dictionary>) return m.shape();
        else if constexpr (std::is_same_v<T, AutoencoderModel>) return m.shape();
        else return m.shape;
      },
      c);
}

std::pair<double, double> parse_pair(const std::string& s, const char* what) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw InvalidArgument(std::string(what) + ": expected A,B");
  try {
    std::size_t used = 0;
    const double a = std::stod(s.substr(0, comma), &used);
    if (used != comma) throw std::invalid_argument(s);
    const std::string rest = s.substr(comma + 1);
    const double b = std::stod(rest, &used);
    if (used != rest.size()) throw std::invalid_argument(s);
    return {a, b};
  } catch (const std::logic_error&) {
    throw InvalidArgument(std::string(what) + ": cannot parse '" + s + "'");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Convolutional sparse coding with the locally competitive algorithm, and a "
               "denoising autoencoder baseline, for information graphics"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_config("--config", "", "Read flags from a `key = value` file", false);
  app.allow_config_extras(false);
  app.get_formatter()->column_width(36);

  std::size_t threads = default_threads();
  app.add_option("--threads", threads, "Worker threads (results do not depend on this)")
      ->check(CLI::PositiveNumber);

  // synth -------------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "Generate synthetic graphics and a manifest");
  fs::path synth_out;
  std::size_t synth_count = 10;
  std::uint64_t synth_seed = 0;
  std::string synth_size = "64x64";
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--count", synth_count, "Number of images")->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_seed, "Base seed");
  synth->add_option("--size", synth_size, "Image size HxW");

  // train-sc ----------------------------------------------------------------
  auto* train_sc = app.add_subcommand("train-sc", "Learn a sparse coding dictionary");
  fs::path sc_manifest, sc_out, sc_stats;
  Geometry sc_geom;
  SolverFlags sc_solver;
  std::size_t sc_epochs = 20, sc_batch = 8;
  double sc_lr = TrainConfig{}.dict_learning_rate;
  std::uint64_t sc_seed = 0;
  bool sc_no_resample = false;
  train_sc->add_option("--manifest", sc_manifest, "Corpus manifest")->required();
  train_sc->add_option("--epochs", sc_epochs, "Training epochs");
  add_geometry(train_sc, sc_geom);
  add_solver(train_sc, sc_solver);
  train_sc->add_option("--lr", sc_lr, "Dictionary learning rate")->check(CLI::NonNegativeNumber);
  train_sc->add_option("--batch", sc_batch, "Images per dictionary update")->check(CLI::PositiveNumber);
  train_sc->add_option("--seed", sc_seed, "Seed for initialization and shuffling");
  train_sc->add_flag("--no-resample", sc_no_resample, "Keep elements that were never active");
  train_sc->add_option("--out", sc_out, "Checkpoint path")->required();
  train_sc->add_option("--stats", sc_stats, "Per-epoch statistics CSV");

  // train-ae ----------------------------------------------------------------
  auto* train_ae = app.add_subcommand("train-ae", "Train the denoising autoencoder baseline");
  fs::path ae_manifest, ae_out, ae_stats;
  Geometry ae_geom;
  AeTrainConfig ae_defaults;
  std::size_t ae_epochs = ae_defaults.epochs, ae_batch = ae_defaults.batch_size;
  double ae_sigma = ae_defaults.noise_sigma, ae_lr = ae_defaults.learning_rate;
  std::uint64_t ae_seed = 0;
  train_ae->add_option("--manifest", ae_manifest, "Corpus manifest")->required();
  train_ae->add_option("--epochs", ae_epochs, "Training epochs");
  train_ae->add_option("--sigma", ae_sigma, "Gaussian noise standard deviation")
      ->check(CLI::NonNegativeNumber);
  add_geometry(train_ae, ae_geom);
  train_ae->add_option("--lr", ae_lr, "SGD learning rate")->check(CLI::NonNegativeNumber);
  train_ae->add_option("--batch", ae_batch, "Images per update")->check(CLI::PositiveNumber);
  train_ae->add_option("--seed", ae_seed, "Seed for initialization, shuffling and noise");
  train_ae->add_option("--out", ae_out, "Checkpoint path")->required();
  train_ae->add_option("--stats", ae_stats, "Per-epoch statistics CSV");

  // encode ------------------------------------------------------------------
  auto* encode_cmd = app.add_subcommand("encode", "Encode one image with a trained model");
  fs::path enc_ckpt, enc_image, enc_acts, enc_trace;
  SolverFlags enc_solver;
  std::string enc_size = "64x64", enc_kind = "auto";
  bool enc_no_mean = false;
  encode_cmd->add_option("--ckpt", enc_ckpt, "Model checkpoint")->required();
  encode_cmd->add_option("--image", enc_image, "Input PNG")->required();
  add_solver(encode_cmd, enc_solver);
  encode_cmd->add_option("--solver", enc_kind, "Expected model kind")
      ->check(CLI::IsMember({"auto", "lca", "ae"}));
  encode_cmd->add_option("--size", enc_size, "Resample the image to HxW");
  encode_cmd->add_flag("--no-mean-subtract", enc_no_mean, "Skip per-image mean subtraction");
  encode_cmd->add_option("--out-acts", enc_acts, "Activation file");
  encode_cmd->add_option("--trace", enc_trace, "Energy trace CSV (sparse coding only)");

  // analyze -----------------------------------------------------------------
  auto* analyze = app.add_subcommand("analyze", "Sparsity and cross-correlation report");
  fs::path an_ckpt, an_manifest, an_report;
  SolverFlags an_solver;
  bool an_pooled = false;
  analyze->add_option("--ckpt", an_ckpt, "Model checkpoint")->required();
  analyze->add_option("--manifest", an_manifest, "Corpus manifest")->required();
  analyze->add_option("--report", an_report, "Metrics CSV")->required();
  add_solver(analyze, an_solver);
  analyze->add_flag("--pooled", an_pooled, "Also report the pooled inter-image std");

  // render ------------------------------------------------------------------
  auto* render = app.add_subcommand("render", "Draw figures");
  render->require_subcommand(1);
  RenderConfig rcfg;
  std::string colormap = "grayscale";
  fs::path r_out;

  auto* r_montage = render->add_subcommand("montage", "Dictionary montage");
  fs::path m_ckpt;
  bool m_decoder = false;
  r_montage->add_option("--ckpt", m_ckpt, "Model checkpoint")->required();
  r_montage->add_option("--cell-size", rcfg.cell_size, "Pixels per element side (0: patch size)");
  r_montage->add_option("--colormap", colormap, "Colour map")
      ->check(CLI::IsMember({"grayscale", "diverging"}));
  r_montage->add_flag("--decoder", m_decoder, "Show autoencoder decoder instead of encoder");
  r_montage->add_option("--out", r_out, "Output PNG")->required();

  auto* r_overlay = render->add_subcommand("overlay", "Activation map of one element over its image");
  fs::path o_ckpt, o_image, o_acts;
  std::size_t o_element = 0;
  std::string o_size = "64x64";
  SolverFlags o_solver;
  r_overlay->add_option("--ckpt", o_ckpt, "Model checkpoint")->required();
  r_overlay->add_option("--image", o_image, "Input PNG")->required();
  r_overlay->add_option("--element", o_element, "Element index");
  r_overlay->add_option("--acts", o_acts, "Use a stored activation file instead of encoding");
  r_overlay->add_option("--alpha", rcfg.overlay_alpha, "Blend weight of the heat colour")
      ->check(CLI::Range(0.0, 1.0));
  r_overlay->add_option("--size", o_size, "Resample the image to HxW");
  add_solver(r_overlay, o_solver);
  r_overlay->add_option("--out", r_out, "Output PNG")->required();

  auto* r_heat = render->add_subcommand("heatmap", "Activation map of one element");
  fs::path h_acts;
  std::size_t h_element = 0, h_scale = 4;
  r_heat->add_option("--acts", h_acts, "Activation file")->required();
  r_heat->add_option("--element", h_element, "Element index");
  r_heat->add_option("--scale", h_scale, "Pixels per site")->check(CLI::PositiveNumber);
  r_heat->add_option("--colormap", colormap, "Colour map")
      ->check(CLI::IsMember({"grayscale", "diverging"}));
  r_heat->add_option("--out", r_out, "Output PNG")->required();

  auto* r_coeffs = render->add_subcommand("coeffs", "Coefficients of all elements at one site");
  fs::path c_acts;
  std::size_t c_row = 0, c_col = 0;
  bool c_show_zero = false;
  ChartConfig chart;
  r_coeffs->add_option("--acts", c_acts, "Activation file")->required();
  r_coeffs->add_option("--row", c_row, "Site row");
  r_coeffs->add_option("--col", c_col, "Site column");
  r_coeffs->add_flag("--show-zero", c_show_zero, "Keep a slot for zero coefficients");
  r_coeffs->add_option("--bar-width", chart.bar_width, "Bar width in pixels")->check(CLI::PositiveNumber);
  r_coeffs->add_option("--height", chart.plot_height, "Plot height in pixels");
  r_coeffs->add_option("--out", r_out, "Output PNG")->required();

  auto* r_hist = render->add_subcommand("hist", "Histogram of a column of values");
  fs::path hs_values, hs_csv;
  std::string hs_column, hs_range;
  std::size_t hs_bins = 20;
  r_hist->add_option("--values", hs_values, "Values file: one per line, a CSV, or a metrics report")
      ->required();
  r_hist->add_option("--column", hs_column,
                     "CSV column, or percent_active / usage_frequency / intra_mean of a report");
  r_hist->add_option("--bins", hs_bins, "Number of bins")->check(CLI::PositiveNumber);
  r_hist->add_option("--range", hs_range, "Explicit range LO,HI (default: data span)");
  r_hist->add_option("--height", chart.plot_height, "Plot height in pixels");
  r_hist->add_option("--out", r_out, "Output PNG")->required();
  r_hist->add_option("--csv", hs_csv, "Bin edges and counts CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    rcfg.colormap = colormap == "diverging" ? Colormap::signed_diverging : Colormap::grayscale;

    if (*synth) {
      const auto [h, w] = parse_size(synth_size);
      fs::create_directories(synth_out);
      CorpusManifest m;
      m.target_height = h;
      m.target_width = w;
      m.seed = synth_seed;
      std::vector<std::string> names(synth_count);
      std::vector<ImageTensor> images(synth_count);
      parallel_for(synth_count, threads, [&](std::size_t i) {
        const std::uint64_t seed = detail::splitmix64(synth_seed ^ detail::splitmix64(i + 1));
        images[i] = synth_graphic(SynthSpec::from_seed(seed, h, w));
        char name[32];
        std::snprintf(name, sizeof name, "synth_%04zu.png", i);
        names[i] = name;
      });
      for (std::size_t i = 0; i < synth_count; ++i) {
        write_png(synth_out / names[i], images[i]);
        ManifestEntry e;
        e.kind = ManifestEntry::Kind::file;
        e.path = names[i];
        m.entries.push_back(e);
      }
      write_file_atomic(synth_out / "manifest.txt", format_manifest(m));
      std::cout << "wrote " << synth_count << " images and " << (synth_out / "manifest.txt").string()
                << "\n";
    } else if (*train_sc) {
      TrainConfig cfg;
      cfg.lca = sc_solver.config();
      cfg.dict_learning_rate = sc_lr;
      cfg.epochs = sc_epochs;
      cfg.batch_size = sc_batch;
      cfg.seed = sc_seed;
      cfg.resample_unused = !sc_no_resample;
      cfg.threads = threads;
      cfg.validate();
      const LoadedCorpus c = load_corpus(sc_manifest, &sc_geom, threads);
      const DictShape s = shape_for(sc_geom, c.images);
      Dictionary init = init_dictionary(sc_seed, s.num_elements, s.patch, s.channels, s.stride);
      const TrainResult r = train_dictionary(c.images, std::move(init), cfg, print_epoch);
      save_lcad(sc_out, r.dict);
      if (!sc_stats.empty()) write_file_atomic(sc_stats, format_stats_csv(r.stats));
    } else if (*train_ae) {
      AeTrainConfig cfg;
      cfg.noise_sigma = ae_sigma;
      cfg.learning_rate = ae_lr;
      cfg.epochs = ae_epochs;
      cfg.batch_size = ae_batch;
      cfg.seed = ae_seed;
      cfg.threads = threads;
      cfg.validate();
      const LoadedCorpus c = load_corpus(ae_manifest, &ae_geom, threads);
      const DictShape s = shape_for(ae_geom, c.images);
      AutoencoderModel init = init_autoencoder(ae_seed, s.num_elements, s.patch, s.channels, s.stride);
      const AeTrainResult r = train_autoencoder(c.images, std::move(init), cfg, print_epoch);
      save_lcad(ae_out, r.model);
      if (!ae_stats.empty()) write_file_atomic(ae_stats, format_stats_csv(r.stats));
    } else if (*encode_cmd) {
      const LcaConfig lca = enc_solver.config();
      const LcadContent model = load_lcad(enc_ckpt);
      const FileKind kind = kind_of(model);
      if (kind == FileKind::activations) {
        throw FormatError(enc_ckpt.string() + ": is an activation file, not a model");
      }
      if ((enc_kind == "lca" && kind != FileKind::sparse_coding) ||
          (enc_kind == "ae" && kind != FileKind::autoencoder)) {
        throw FormatError(enc_ckpt.string() + ": solver '" + enc_kind + "' does not match a " +
                          to_string(kind) + " checkpoint");
      }
      if (!enc_trace.empty() && kind != FileKind::sparse_coding) {
        throw InvalidArgument("--trace is only available for sparse_coding checkpoints");
      }
      const DictShape shape = model_shape(model);
      const ImageTensor img = load_for_model(enc_image, shape, enc_size, !enc_no_mean);
      LcaState st;
      const ActivationTensor a = encode_with(model, img, lca, &st);
      if (!enc_acts.empty()) save_lcad(enc_acts, ActivationRecord{shape, a});
      if (!enc_trace.empty()) write_file_atomic(enc_trace, format_trace_csv(st.energy_trace));
      std::cout << "kind=" << to_string(kind) << ", sites=" << a.rows() << "x" << a.cols()
                << ", active=" << fmt(percent_active(a));
      if (kind == FileKind::sparse_coding) {
        std::cout << ", energy=" << fmt(st.energy_trace.back()) << ", steps=" << st.steps_taken
                  << ", converged=" << (st.converged ? "yes" : "no");
      }
      std::cout << "\n";
    } else if (*analyze) {
      const LcaConfig lca = an_solver.config();
      const LcadContent raw = load_lcad(an_ckpt);
      const FileKind kind = kind_of(raw);
      if (kind == FileKind::activations) {
        throw FormatError(an_ckpt.string() + ": is an activation file, not a model");
      }
      const DictShape shape = model_shape(raw);
      Geometry g{shape.num_elements, shape.patch, shape.stride};
      const LoadedCorpus c = load_corpus(an_manifest, &g, threads);
      check_image_against(c.images.front(), shape);

      LcadContent model = raw;
      if (auto* d = std::get_if<Dictionary>(&model)) d->normalize_elements();
      if (auto* m = std::get_if<AutoencoderModel>(&model)) *m = normalized_for_analysis(*m);

      std::vector<ActivationTensor> codes(c.images.size());
      std::optional<LcaSolver> solver;
      if (const auto* d = std::get_if<Dictionary>(&model)) solver.emplace(*d, lca);
      parallel_for(codes.size(), threads, [&](std::size_t i) {
        codes[i] = solver ? solver->encode(c.images[i]).a
                          : ae_encode(c.images[i], std::get<AutoencoderModel>(model));
      });
      const EncodingInfo info{kind == FileKind::sparse_coding ? ModelKind::sparse_coding
                                                              : ModelKind::autoencoder,
                              true};
      const MetricsReport rep = analyze_codes(codes, info);
      write_file_atomic(an_report, format_metrics_csv(rep, an_pooled));
      const AccountingCheck acc = accounting_identity(rep);
      std::cout << "kind=" << to_string(info.kind) << ", images=" << codes.size()
                << ", crosscorr_mean=" << fmt(rep.crosscorr_mean)
                << ", median_active=" << fmt(median(rep.percent_active_per_image))
                << ", accounting=" << (acc.holds() ? "ok" : "mismatch") << "\n";
      if (!acc.holds()) throw Error("usage/percent-active accounting does not balance");
    } else if (*render) {
      if (*r_montage) {
        const LcadContent model = load_lcad(m_ckpt);
        const Dictionary* d = nullptr;
        if (const auto* dict = std::get_if<Dictionary>(&model)) d = dict;
        if (const auto* m = std::get_if<AutoencoderModel>(&model)) d = m_decoder ? &m->decoder : &m->encoder;
        if (!d) throw FormatError(m_ckpt.string() + ": activation files have no dictionary");
        write_png(r_out, montage(*d, rcfg));
      } else if (*r_overlay) {
        const LcadContent model = load_lcad(o_ckpt);
        const DictShape shape = model_shape(model);
        const auto [h, w] = parse_size(o_size);
        const ImageTensor display = load_image(o_image, h, w);
        ActivationTensor a;
        if (!o_acts.empty()) {
          const LcadContent stored = load_lcad(o_acts);
          const auto* rec = std::get_if<ActivationRecord>(&stored);
          if (!rec) throw FormatError(o_acts.string() + ": not an activation file");
          a = rec->acts;
        } else {
          const LcaConfig lca = o_solver.config();
          check_image_against(display, shape);
          a = encode_with(model, preprocess(display), lca);
        }
        write_png(r_out, overlay(display, a, o_element, shape.patch, shape.stride, rcfg));
      } else if (*r_heat) {
        const LcadContent stored = load_lcad(h_acts);
        const auto* rec = std::get_if<ActivationRecord>(&stored);
        if (!rec) throw FormatError(h_acts.string() + ": not an activation file");
        write_png(r_out, heatmap(rec->acts, h_element, h_scale, rcfg));
      } else if (*r_coeffs) {
        const LcadContent stored = load_lcad(c_acts);
        const auto* rec = std::get_if<ActivationRecord>(&stored);
        if (!rec) throw FormatError(c_acts.string() + ": not an activation file");
        chart.omit_zero = !c_show_zero;
        const ChartResult res = coeff_chart(rec->acts, c_row, c_col, chart);
        write_png(r_out, res.image);
        std::cout << "bars=" << res.bars.size() << "\n";
      } else if (*r_hist) {
        const std::string text = read_text_file(hs_values);
        std::vector<double> values;
        if (text.rfind("# summary", 0) == 0) {
          const MetricsCsv rep = parse_metrics_csv(text);
          const std::string col = hs_column.empty() ? "percent_active" : hs_column;
          if (col == "percent_active") values = rep.percent_active;
          else if (col == "usage_frequency") values = rep.usage_frequency;
          else if (col == "intra_mean") values = rep.intra_mean;
          else throw InvalidArgument("report column must be percent_active, usage_frequency or intra_mean");
        } else {
          values = parse_value_column(text, hs_column);
        }
        std::optional<std::pair<double, double>> range;
        if (!hs_range.empty()) range = parse_pair(hs_range, "--range");
        const Histogram hist = histogram(values, hs_bins, range);
        write_png(r_out, render_histogram(hist, chart).image);
        if (!hs_csv.empty()) write_file_atomic(hs_csv, format_histogram_csv(hist));
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
