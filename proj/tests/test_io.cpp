#include <gtest/gtest.h>

#include <unistd.h>

#include <filesystem>

#include "lcasc/checkpoint.hpp"
#include "lcasc/csv.hpp"
#include "oracles.hpp"

using namespace lcasc;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  const fs::path p =
      fs::temp_directory_path() / ("lcasc_io_" + std::to_string(::getpid()) + "_" + info->name());
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::uint32_t u32_at(const std::vector<std::uint8_t>& b, std::size_t off) {
  return b[off] | (b[off + 1] << 8) | (b[off + 2] << 16) | (static_cast<std::uint32_t>(b[off + 3]) << 24);
}

}  // namespace

TEST(Lcad, HeaderLayout) {
  const Dictionary d = oracle::random_dictionary(1, {5, 4, 3, 2});
  const auto bytes = encode_lcad(d);
  ASSERT_EQ(bytes.size(), 4 + 4 + 1 + 16 + 5 * 48 * 8u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "LCAD");
  EXPECT_EQ(u32_at(bytes, 4), 1u);
  EXPECT_EQ(bytes[8], 0);
  EXPECT_EQ(u32_at(bytes, 9), 5u);
  EXPECT_EQ(u32_at(bytes, 13), 4u);
  EXPECT_EQ(u32_at(bytes, 17), 3u);
  EXPECT_EQ(u32_at(bytes, 21), 2u);
  // First payload double, little-endian.
  double first;
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[25 + i]) << (8 * i);
  std::memcpy(&first, &bits, 8);
  EXPECT_EQ(first, d.values()[0]);
}

TEST(Lcad, DictionaryRoundTripIsBitExact) {
  const fs::path dir = scratch_dir();
  const Dictionary d = oracle::random_dictionary(2, {7, 3, 1, 1});
  save_lcad(dir / "d.lcad", d);
  const LcadContent back = load_lcad(dir / "d.lcad");
  ASSERT_EQ(kind_of(back), FileKind::sparse_coding);
  EXPECT_TRUE(std::get<Dictionary>(back) == d);
  EXPECT_FALSE(fs::exists(dir / "d.lcad.tmp"));
}

TEST(Lcad, AutoencoderRoundTrip) {
  AutoencoderModel m = init_autoencoder(3, 4, 3, 3, 1);
  m.encoder_bias = {0.1, -0.2, 0.3, 1e-300};
  const auto bytes = encode_lcad(m);
  EXPECT_EQ(bytes[8], 1);
  EXPECT_EQ(bytes.size(), 25 + (2 * 4 * 27 + 4) * 8u);
  const LcadContent back = decode_lcad(bytes);
  EXPECT_TRUE(std::get<AutoencoderModel>(back) == m);
}

TEST(Lcad, ActivationRoundTrip) {
  ActivationRecord rec{{3, 8, 3, 4}, ActivationTensor(2, 5, 3)};
  rec.acts(1, 4, 2) = -3.5;
  const auto bytes = encode_lcad(rec);
  EXPECT_EQ(bytes[8], 2);
  EXPECT_EQ(u32_at(bytes, 25), 2u);
  EXPECT_EQ(u32_at(bytes, 29), 5u);
  EXPECT_TRUE(std::get<ActivationRecord>(decode_lcad(bytes)) == rec);
}

TEST(Lcad, MalformedInputRejected) {
  const auto good = encode_lcad(oracle::random_dictionary(1, {2, 2, 1, 1}));
  auto bad = good;
  bad[0] = 'X';
  EXPECT_THROW(decode_lcad(bad), FormatError);
  bad = good;
  bad[4] = 2;
  EXPECT_THROW(decode_lcad(bad), FormatError);
  bad = good;
  bad[8] = 7;
  EXPECT_THROW(decode_lcad(bad), FormatError);
  bad = good;
  bad.pop_back();
  EXPECT_THROW(decode_lcad(bad), FormatError);
  bad = good;
  bad.push_back(0);
  EXPECT_THROW(decode_lcad(bad), FormatError);
  EXPECT_THROW(decode_lcad(std::vector<std::uint8_t>{}), FormatError);
}

TEST(Lcad, MissingFileIsIoError) {
  EXPECT_THROW(load_lcad("/nonexistent/dir/x.lcad"), IoError);
  EXPECT_THROW(save_lcad("/nonexistent/dir/x.lcad", oracle::random_dictionary(1, {1, 1, 1, 1})),
               IoError);
}

TEST(Csv, DoubleFormattingRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0, 123456789.125}) {
    EXPECT_EQ(std::strtod(format_double(v).c_str(), nullptr), v);
  }
  EXPECT_EQ(format_double(0.5), "0.5");
}

TEST(Csv, StatsRoundTrip) {
  TrainStats s{{1, 0.1, 2.0 / 3.0, 0.04, 1.5}, {2, 0.05, 0.6, 0.03, 0.7}};
  const std::string text = format_stats_csv(s);
  EXPECT_EQ(text.substr(0, text.find('\n')), "epoch,mse,energy,percent_active,dict_delta");
  const TrainStats back = parse_stats_csv(text);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].energy, 2.0 / 3.0);
  EXPECT_EQ(back[1].epoch, 2u);
  EXPECT_THROW(parse_stats_csv("nope\n"), FormatError);
  EXPECT_THROW(parse_stats_csv("epoch,mse,energy,percent_active,dict_delta\n1,2\n"), FormatError);
}

TEST(Csv, TraceHasOneRowPerStep) {
  const std::vector<double> t{3.0, 2.0, 1.5};
  EXPECT_EQ(format_trace_csv(t), "step,energy\n1,3\n2,2\n3,1.5\n");
}

TEST(Csv, MetricsRoundTrip) {
  MetricsReport r;
  r.model_kind = ModelKind::autoencoder;
  r.percent_active_per_image = {0.5, 0.25};
  r.percent_active_eps_per_image = {0.5, 0.25};
  r.usage_frequency_per_element = {0.1, 0.2, 0.3};
  r.intra_mean_per_image = {1.0 / 3.0, 2.0};
  r.crosscorr_mean = 0.7;
  r.crosscorr_pooled_std = 0.9;
  const std::string text = format_metrics_csv(r, true);
  const MetricsCsv back = parse_metrics_csv(text);
  EXPECT_EQ(back.get("model_kind"), "autoencoder");
  EXPECT_EQ(back.get("crosscorr_mean"), "0.7");
  EXPECT_EQ(back.get("crosscorr_inter_std_pooled"), "0.9");
  EXPECT_EQ(back.usage_frequency, r.usage_frequency_per_element);
  EXPECT_EQ(back.percent_active, r.percent_active_per_image);
  EXPECT_EQ(back.intra_mean, r.intra_mean_per_image);
  EXPECT_THROW(parse_metrics_csv(format_metrics_csv(r)).get("crosscorr_inter_std_pooled"),
               FormatError);
}

TEST(Csv, HistogramBinsSumToCount) {
  const std::vector<double> v{0.1, 0.2, 0.2, 0.9, 1.0};
  const Histogram h = histogram(v, 4);
  const std::string text = format_histogram_csv(h);
  const auto counts = parse_value_column(text, "count");
  double total = 0.0;
  for (double c : counts) total += c;
  EXPECT_EQ(total, 5.0);
  EXPECT_EQ(parse_value_column(text, "lo").front(), 0.1);
}

TEST(Csv, ValueColumnPlainLines) {
  EXPECT_EQ(parse_value_column("1\n# c\n\n2.5\n"), (std::vector<double>{1.0, 2.5}));
  EXPECT_THROW(parse_value_column("1\nx\n"), FormatError);
  EXPECT_THROW(parse_value_column("a,b\n1,2\n", "c"), FormatError);
}
