#include <gtest/gtest.h>

#include <cstring>

#include "oracle.hpp"
#include "ztnc/error.hpp"
#include "ztnc/ingest.hpp"
#include "ztnc/io.hpp"
#include "ztnc/synth.hpp"

using namespace ztnc;

namespace {

std::vector<TensorData> small_model(std::uint64_t seed) {
  synth::Rng rng(seed);
  std::vector<TensorData> t;
  t.push_back({"layers.0.attn.weight", "BF16", {64, 128}, synth::gaussian_tensor(kBF16, 64 * 128, 0.02, rng)});
  t.push_back({"layers.0.mlp.weight", "F8_E4M3", {256, 33}, synth::gaussian_tensor(kFP8E4M3, 256 * 33, 0.5, rng)});
  t.push_back({"layers.0.norm", "F32", {16}, synth::uniform_bytes(64, rng)});
  t.push_back({"embed", "BF16", {3, 5}, synth::gaussian_tensor(kBF16, 15, 1.0, rng)});
  return t;
}

Bytes with_header(const std::string& json, std::size_t data_len) {
  Bytes out;
  ByteWriter w(out);
  w.u64(json.size());
  w.text(json);
  out.resize(out.size() + data_len, 0xAB);
  return out;
}

TEST(Safetensors, ParseBuiltFile) {
  const auto tensors = small_model(1);
  nlohmann::ordered_json meta = {{"format", "pt"}};
  const SafetensorsFile f = SafetensorsFile::parse(build_safetensors(tensors, meta));
  ASSERT_EQ(f.entries().size(), 3u);
  ASSERT_EQ(f.skipped().size(), 1u);
  EXPECT_EQ(f.skipped()[0].dtype, "F32");
  EXPECT_EQ(f.data_offset() % 8, 0u);
  EXPECT_EQ(f.metadata()["format"], "pt");
  const TensorEntry* e = f.find("layers.0.mlp.weight");
  ASSERT_NE(e, nullptr);
  EXPECT_EQ(e->element_count(), 256u * 33u);
  const ByteView d = f.data(*e);
  EXPECT_TRUE(std::equal(d.begin(), d.end(), tensors[1].data.begin(), tensors[1].data.end()));
  EXPECT_EQ(f.find("nope"), nullptr);
}

TEST(Safetensors, RejectsOverlap) {
  const std::string h =
      R"({"a":{"dtype":"BF16","shape":[4],"data_offsets":[0,8]},)"
      R"("b":{"dtype":"BF16","shape":[4],"data_offsets":[4,12]}})";
  EXPECT_THROW(SafetensorsFile::parse(with_header(h, 12)), CorruptError);
}

TEST(Safetensors, RejectsOutOfRangeAndSizeMismatch) {
  EXPECT_THROW(SafetensorsFile::parse(with_header(
                   R"({"a":{"dtype":"BF16","shape":[4],"data_offsets":[0,8]}})", 6)),
               CorruptError);
  EXPECT_THROW(SafetensorsFile::parse(with_header(
                   R"({"a":{"dtype":"BF16","shape":[3],"data_offsets":[0,8]}})", 8)),
               CorruptError);
  EXPECT_THROW(SafetensorsFile::parse(with_header("{not json", 0)), CorruptError);
  EXPECT_THROW(SafetensorsFile::parse(Bytes{1, 2, 3}), CorruptError);
}

TEST(Safetensors, DtypeRoutes) {
  EXPECT_EQ(payload_format_for_dtype("BF16"), PayloadFormat::kBF16);
  EXPECT_EQ(payload_format_for_dtype("F8_E5M2"), PayloadFormat::kFP8E5M2);
  EXPECT_EQ(payload_format_for_dtype("U8"), PayloadFormat::kRaw);
  EXPECT_FALSE(payload_format_for_dtype("F32").has_value());
}

TEST(Archive, RoundtripIsByteExact) {
  const Bytes file = build_safetensors(small_model(2), {{"note", "x"}});
  const SafetensorsFile model = SafetensorsFile::parse(file);
  const ArchiveResult r = write_archive(model, {4096, 2});
  EXPECT_TRUE(is_archive(r.archive));
  EXPECT_FALSE(is_container(r.archive));
  EXPECT_EQ(read_archive(r.archive), file);
  EXPECT_EQ(r.report.skipped, std::vector<std::string>{"layers.0.norm"});
  EXPECT_EQ(r.report.file_compressed_bytes, r.archive.size());
  EXPECT_EQ(r.report.file_original_bytes, file.size());
}

TEST(Archive, TensorByName) {
  const auto tensors = small_model(3);
  const ArchiveResult r = write_archive(SafetensorsFile::parse(build_safetensors(tensors)));
  EXPECT_EQ(extract_tensor(r.archive, "embed"), tensors[3].data);
  EXPECT_EQ(extract_tensor(r.archive, "layers.0.attn.weight"), tensors[0].data);
  EXPECT_THROW(extract_tensor(r.archive, "layers.0.norm"), InvalidInputError);
}

TEST(Archive, AggregateIsSizeWeightedMean) {
  const ArchiveResult r = write_archive(SafetensorsFile::parse(build_safetensors(small_model(4))));
  double weighted = 0;
  double total = 0;
  for (const auto& t : r.report.tensors) {
    weighted += t.report.total_ratio * static_cast<double>(t.report.original_bytes);
    total += static_cast<double>(t.report.original_bytes);
  }
  EXPECT_NEAR(r.report.tensor_ratio, weighted / total, 1e-12);
}

TEST(Archive, ManifestTilesSource) {
  const Bytes file = build_safetensors(small_model(5));
  const ArchiveResult r = write_archive(SafetensorsFile::parse(file));
  const nlohmann::json m = archive_manifest(r.archive);
  std::uint64_t pos = 0;
  for (const auto& seg : m["segments"]) {
    EXPECT_EQ(seg["source_offset"].get<std::uint64_t>(), pos);
    pos += seg["kind"] == "tensor" ? seg["original_size"].get<std::uint64_t>()
                                   : seg["length"].get<std::uint64_t>();
  }
  EXPECT_EQ(pos, file.size());
}

TEST(Archive, CorruptBlobDetected) {
  const ArchiveResult r = write_archive(SafetensorsFile::parse(build_safetensors(small_model(6))));
  Bytes bad = r.archive;
  bad[bad.size() - 10] ^= 0x20;
  EXPECT_THROW(read_archive(bad), CorruptError);
  EXPECT_THROW(read_archive(ByteView(r.archive.data(), 20)), CorruptError);
}

TEST(Io, WriteAndRead) {
  oracle::TempDir dir;
  const Bytes data{1, 2, 3};
  write_file(dir / "x.bin", data);
  EXPECT_EQ(read_file(dir / "x.bin"), data);
  EXPECT_FALSE(std::filesystem::exists(dir / "x.bin.partial"));
  EXPECT_THROW(read_file(dir / "missing"), InvalidInputError);
}

}  // namespace
