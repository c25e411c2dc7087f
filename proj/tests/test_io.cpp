#include <doctest.h>

#include <fstream>

#include "support.hpp"
#include "vseg/diagnostics.hpp"
#include "vseg/volume_io.hpp"

using namespace vseg;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::BadArgs;
}

Volume random_volume(std::mt19937_64& rng, Shape3 shape, Spacing3 spacing, Modality m) {
  Volume v({shape, spacing}, m);
  std::normal_distribution<float> n(0.0f, 100.0f);
  for (auto& x : v.values) x = n(rng);
  return v;
}

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

void write_bytes(const fs::path& p, std::size_t n) {
  std::ofstream out(p, std::ios::binary);
  std::vector<char> zeros(n, 0);
  out.write(zeros.data(), static_cast<std::streamsize>(n));
}

}  // namespace

TEST_CASE("native volumes round-trip bit-exactly") {
  const auto dir = testing::temp_dir("io_roundtrip");
  std::mt19937_64 rng(3);
  for (int i = 0; i < 5; ++i) {
    Volume v = random_volume(rng, {5 + i, 3, 2}, {0.7 + i, 1.0, 2.0}, i % 2 ? Modality::MRI : Modality::CT);
    if (i == 2) v.original = Geometry{{9, 9, 9}, {0.5, 0.5, 1.25}};
    write_native(v, dir / "v");
    const Volume r = read_native_volume(dir / "v");
    CHECK(r.geometry == v.geometry);
    CHECK(r.modality == v.modality);
    CHECK(r.original == v.original);
    CHECK(std::memcmp(r.values.data(), v.values.data(), v.values.size() * 4) == 0);
  }
  LabelVolume l({{4, 4, 2}, {1.0, 1.0, 2.0}}, 16);
  for (std::size_t i = 0; i < l.labels.size(); ++i) l.labels[i] = static_cast<std::uint8_t>(i % 16);
  write_native(l, dir / "l");
  const auto any = read_native(dir / "l.vseg.json");
  REQUIRE(std::holds_alternative<LabelVolume>(any));
  const auto& r = std::get<LabelVolume>(any);
  CHECK(r.labels == l.labels);
  CHECK(r.geometry.spacing == Spacing3{1.0, 1.0, 2.0});
  CHECK(r.num_classes == 16);

  std::ifstream h(dir / "l.vseg.json");
  const std::string header((std::istreambuf_iterator<char>(h)), {});
  CHECK(header.find("\"u8\"") != std::string::npos);
  CHECK(header.find("\"LABEL\"") != std::string::npos);
}

TEST_CASE("native reader sizes and errors") {
  const auto dir = testing::temp_dir("io_errors");
  const std::string header =
      R"({"shape":[4,4,2],"spacing_mm":[1,1,2],"dtype":"f32","modality":"CT","byte_order":"LE"})";
  write_text(dir / "a.vseg.json", header);
  write_bytes(dir / "a.vseg.raw", 128);
  CHECK(read_native_volume(dir / "a").values.size() == 32);

  write_bytes(dir / "a.vseg.raw", 127);
  CHECK(code_of([&] { read_native(dir / "a"); }) == ErrorCode::SizeMismatch);
  CHECK(code_of([&] { read_native(dir / "missing"); }) == ErrorCode::MissingFile);

  write_text(dir / "b.vseg.json", "{\"shape\": [4,4");
  write_bytes(dir / "b.vseg.raw", 128);
  CHECK(code_of([&] { read_native(dir / "b"); }) == ErrorCode::HeaderParse);

  write_text(dir / "c.vseg.json",
             R"({"shape":[2,1,1],"spacing_mm":[1,1,1],"dtype":"u8","modality":"LABEL","byte_order":"LE","num_classes":16})");
  {
    std::ofstream out(dir / "c.vseg.raw", std::ios::binary);
    const char bytes[2] = {3, 16};
    out.write(bytes, 2);
  }
  CHECK(code_of([&] { read_native(dir / "c"); }) == ErrorCode::BadLabel);
}

TEST_CASE("multi-channel dumps round-trip") {
  const auto dir = testing::temp_dir("io_channels");
  ChannelVolume c{{{3, 2, 2}, {1, 1, 2}}, 3, {}};
  for (int i = 0; i < 36; ++i) c.values.push_back(0.01f * i);
  write_native_channels(c, dir / "p");
  const auto r = read_native_channels(dir / "p");
  CHECK(r.channels == 3);
  CHECK(r.values == c.values);
}

TEST_CASE("NIfTI import: float volume with known voxels") {
  testing::NiftiFixture f;
  f.dim = {3, 8, 8, 4, 1, 1, 1, 1};
  f.pixdim = {1, 0.8f, 0.8f, 2.5f, 1, 1, 1, 1};
  std::vector<float> vals(256);
  for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = static_cast<float>(i) - 100.0f;
  f.set_values(vals);
  const auto bytes = f.bytes();
  const auto any = import_nifti_bytes(bytes);
  REQUIRE(std::holds_alternative<Volume>(any));
  const auto& v = std::get<Volume>(any);
  CHECK(v.geometry.shape == Shape3{8, 8, 4});
  CHECK(v.geometry.spacing[0] == doctest::Approx(0.8));
  CHECK(v.geometry.spacing[2] == doctest::Approx(2.5));
  CHECK(v.values == vals);
  CHECK(v.at(1, 0, 0) == -99.0f);

  // Same bytes, same result.
  const auto again = std::get<Volume>(import_nifti_bytes(bytes));
  CHECK(again.values == v.values);
}

TEST_CASE("NIfTI import: scaling, labels and int16") {
  testing::NiftiFixture f;
  f.dim = {3, 2, 2, 1, 1, 1, 1, 1};
  f.datatype = 4;
  f.set_values(std::vector<std::int16_t>{-1000, 0, 40, 250});
  const auto raw = std::get<Volume>(import_nifti_bytes(f.bytes()));
  CHECK(raw.values == std::vector<float>{-1000, 0, 40, 250});
  f.scl_slope = 2.0f;
  f.scl_inter = -1.0f;
  const auto scaled = std::get<Volume>(import_nifti_bytes(f.bytes()));
  CHECK(scaled.values == std::vector<float>{-2001, -1, 79, 499});

  testing::NiftiFixture l;
  l.dim = {3, 2, 1, 1, 1, 1, 1, 1};
  l.datatype = 2;
  l.set_values(std::vector<std::uint8_t>{0, 7});
  const auto any = import_nifti_bytes(l.bytes());
  REQUIRE(std::holds_alternative<LabelVolume>(any));
  CHECK(std::get<LabelVolume>(any).labels == std::vector<std::uint8_t>{0, 7});
}

TEST_CASE("NIfTI import: every rejection path") {
  auto code = [](const std::vector<unsigned char>& b) { return code_of([&] { import_nifti_bytes(b); }); };
  testing::NiftiFixture ok;
  ok.dim = {3, 2, 2, 1, 1, 1, 1, 1};
  ok.set_values(std::vector<float>{1, 2, 3, 4});

  auto bad_type = ok;
  bad_type.datatype = 64;
  CHECK(code(bad_type.bytes()) == ErrorCode::UnsupportedDatatype);

  auto bad_size = ok;
  bad_size.sizeof_hdr = 540;
  CHECK(code(bad_size.bytes()) == ErrorCode::NotNifti);

  auto bad_magic = ok;
  bad_magic.magic[1] = 'i';
  CHECK(code(bad_magic.bytes()) == ErrorCode::NotNifti);

  auto big = ok.bytes();
  std::swap(big[0], big[3]);
  std::swap(big[1], big[2]);
  CHECK(code(big) == ErrorCode::UnsupportedEndianness);

  auto truncated = ok.bytes();
  truncated.resize(truncated.size() - 3);
  CHECK(code(truncated) == ErrorCode::Truncated);
  CHECK(code(std::vector<unsigned char>(100, 0)) == ErrorCode::Truncated);

  std::vector<unsigned char> gz(400, 0);
  gz[0] = 0x1f;
  gz[1] = 0x8b;
  CHECK(code(gz) == ErrorCode::NotNifti);

  auto four_d = ok;
  four_d.dim = {4, 2, 2, 1, 3, 1, 1, 1};
  CHECK(code(four_d.bytes()) == ErrorCode::UnsupportedLayout);

  const auto dir = testing::temp_dir("nifti_file");
  {
    const auto b = ok.bytes();
    std::ofstream out(dir / "x.nii", std::ios::binary);
    out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  }
  CHECK(std::get<Volume>(import_nifti(dir / "x.nii")).values.size() == 4);
  CHECK(code_of([&] { import_nifti(dir / "none.nii"); }) == ErrorCode::MissingFile);
}
