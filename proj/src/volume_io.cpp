#include "vseg/volume_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>

#include "vseg/diagnostics.hpp"

namespace vseg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kHeaderSuffix = ".vseg.json";
constexpr std::string_view kRawSuffix = ".vseg.raw";

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

template <typename T>
void to_little_endian_inplace(std::span<T> data) {
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    for (auto& v : data) {
      unsigned char bytes[sizeof(T)];
      std::memcpy(bytes, &v, sizeof(T));
      std::reverse(bytes, bytes + sizeof(T));
      std::memcpy(&v, bytes, sizeof(T));
    }
  }
}

json geometry_shape(const Geometry& g) { return json::array({g.shape[0], g.shape[1], g.shape[2]}); }
json geometry_spacing(const Geometry& g) {
  return json::array({g.spacing[0], g.spacing[1], g.spacing[2]});
}

Geometry parse_geometry(const json& shape, const json& spacing, const fs::path& where) {
  if (!shape.is_array() || shape.size() != 3 || !spacing.is_array() || spacing.size() != 3)
    fail(ErrorCode::HeaderParse, where.string() + ": shape and spacing_mm must be 3-element arrays");
  Geometry g;
  for (int d = 0; d < 3; ++d) {
    if (!shape[d].is_number_integer() || !spacing[d].is_number())
      fail(ErrorCode::HeaderParse, where.string() + ": non-numeric shape/spacing entry");
    g.shape[d] = shape[d].get<int>();
    g.spacing[d] = spacing[d].get<double>();
  }
  try {
    g.validate();
  } catch (const Error& e) {
    fail(ErrorCode::HeaderParse, where.string() + ": " + e.what());
  }
  return g;
}

struct Header {
  Geometry geometry;
  std::string dtype;
  std::string modality;
  int num_classes = kDefaultNumClasses;
  int channels = 1;
  std::optional<Geometry> original;
};

Header read_header(const NativePaths& p) {
  if (!fs::exists(p.header)) fail(ErrorCode::MissingFile, p.header.string());
  if (!fs::exists(p.raw)) fail(ErrorCode::MissingFile, p.raw.string());
  std::ifstream in(p.header);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::HeaderParse, p.header.string() + ": " + e.what());
  }
  if (!j.is_object()) fail(ErrorCode::HeaderParse, p.header.string() + ": not a JSON object");
  for (const char* key : {"shape", "spacing_mm", "dtype", "modality", "byte_order"}) {
    if (!j.contains(key)) fail(ErrorCode::HeaderParse, p.header.string() + ": missing field " + key);
  }
  Header h;
  h.geometry = parse_geometry(j["shape"], j["spacing_mm"], p.header);
  if (!j["dtype"].is_string() || !j["modality"].is_string() || !j["byte_order"].is_string())
    fail(ErrorCode::HeaderParse, p.header.string() + ": dtype/modality/byte_order must be strings");
  h.dtype = j["dtype"].get<std::string>();
  h.modality = j["modality"].get<std::string>();
  if (j["byte_order"].get<std::string>() != "LE")
    fail(ErrorCode::HeaderParse, p.header.string() + ": only byte_order LE is supported");
  if (h.dtype != "f32" && h.dtype != "u8")
    fail(ErrorCode::HeaderParse, p.header.string() + ": unknown dtype " + h.dtype);
  const bool is_label = h.modality == "LABEL";
  if (!is_label && h.modality != "CT" && h.modality != "MRI")
    fail(ErrorCode::HeaderParse, p.header.string() + ": unknown modality " + h.modality);
  if (is_label != (h.dtype == "u8"))
    fail(ErrorCode::HeaderParse, p.header.string() + ": LABEL volumes are u8, images are f32");
  if (j.contains("num_classes")) {
    if (!j["num_classes"].is_number_integer())
      fail(ErrorCode::HeaderParse, p.header.string() + ": num_classes must be an integer");
    h.num_classes = j["num_classes"].get<int>();
    if (h.num_classes < 1 || h.num_classes > 256)
      fail(ErrorCode::HeaderParse, p.header.string() + ": num_classes out of range");
  }
  if (j.contains("channels")) {
    if (!j["channels"].is_number_integer() || j["channels"].get<int>() < 1)
      fail(ErrorCode::HeaderParse, p.header.string() + ": channels must be a positive integer");
    h.channels = j["channels"].get<int>();
  }
  if (j.contains("original_shape") || j.contains("original_spacing_mm")) {
    if (!j.contains("original_shape") || !j.contains("original_spacing_mm"))
      fail(ErrorCode::HeaderParse, p.header.string() + ": incomplete original geometry");
    h.original = parse_geometry(j["original_shape"], j["original_spacing_mm"], p.header);
  }
  return h;
}

template <typename T>
std::vector<T> read_raw(const fs::path& raw, std::size_t count) {
  const auto expected = count * sizeof(T);
  const auto actual = fs::file_size(raw);
  if (actual != expected)
    fail(ErrorCode::SizeMismatch, raw.string() + ": expected " + std::to_string(expected) +
                                      " bytes, found " + std::to_string(actual));
  std::vector<T> data(count);
  std::ifstream in(raw, std::ios::binary);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(expected));
  if (!in) fail(ErrorCode::IoFailure, raw.string() + ": read failed");
  to_little_endian_inplace(std::span<T>(data));
  return data;
}

void write_header(const fs::path& path, const json& j) {
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) fail(ErrorCode::IoFailure, "cannot write " + path.string());
}

template <typename T>
void write_raw(const fs::path& path, std::span<const T> data) {
  std::vector<T> copy(data.begin(), data.end());
  to_little_endian_inplace(std::span<T>(copy));
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(copy.data()),
            static_cast<std::streamsize>(copy.size() * sizeof(T)));
  if (!out) fail(ErrorCode::IoFailure, "cannot write " + path.string());
}

json base_header(const Geometry& g, const char* dtype, std::string_view modality,
                 const std::optional<Geometry>& original) {
  json j;
  j["shape"] = geometry_shape(g);
  j["spacing_mm"] = geometry_spacing(g);
  j["dtype"] = dtype;
  j["modality"] = std::string(modality);
  j["byte_order"] = "LE";
  if (original) {
    j["original_shape"] = geometry_shape(*original);
    j["original_spacing_mm"] = geometry_spacing(*original);
  }
  return j;
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
  }
}

}  // namespace

NativePaths native_paths(const fs::path& base) {
  std::string s = base.string();
  if (ends_with(s, kHeaderSuffix)) s.resize(s.size() - kHeaderSuffix.size());
  else if (ends_with(s, kRawSuffix)) s.resize(s.size() - kRawSuffix.size());
  return {fs::path(s + std::string(kHeaderSuffix)), fs::path(s + std::string(kRawSuffix))};
}

AnyVolume read_native(const fs::path& base) {
  const auto paths = native_paths(base);
  const Header h = read_header(paths);
  if (h.channels != 1)
    fail(ErrorCode::HeaderParse, paths.header.string() + ": multi-channel volume, use read_native_channels");
  if (h.modality == "LABEL") {
    LabelVolume v(h.geometry, h.num_classes, read_raw<std::uint8_t>(paths.raw, h.geometry.voxel_count()));
    v.original = h.original;
    v.validate();
    return v;
  }
  Volume v(h.geometry, modality_from_string(h.modality),
           read_raw<float>(paths.raw, h.geometry.voxel_count()));
  v.original = h.original;
  v.validate();
  return v;
}

Volume read_native_volume(const fs::path& base) {
  auto any = read_native(base);
  if (auto* v = std::get_if<Volume>(&any)) return std::move(*v);
  fail(ErrorCode::HeaderParse, native_paths(base).header.string() + ": expected an image volume, found labels");
}

LabelVolume read_native_labels(const fs::path& base) {
  auto any = read_native(base);
  if (auto* v = std::get_if<LabelVolume>(&any)) return std::move(*v);
  fail(ErrorCode::HeaderParse, native_paths(base).header.string() + ": expected a label volume, found an image");
}

void write_native(const Volume& v, const fs::path& base) {
  v.validate();
  const auto paths = native_paths(base);
  ensure_parent(paths.header);
  write_raw<float>(paths.raw, v.values);
  write_header(paths.header, base_header(v.geometry, "f32", to_string(v.modality), v.original));
}

void write_native(const LabelVolume& v, const fs::path& base) {
  v.validate();
  const auto paths = native_paths(base);
  ensure_parent(paths.header);
  write_raw<std::uint8_t>(paths.raw, v.labels);
  json j = base_header(v.geometry, "u8", "LABEL", v.original);
  j["num_classes"] = v.num_classes;
  write_header(paths.header, j);
}

void write_native_channels(const ChannelVolume& v, const fs::path& base) {
  v.geometry.validate();
  if (v.channels < 1 || v.values.size() != v.geometry.voxel_count() * static_cast<std::size_t>(v.channels))
    fail(ErrorCode::SizeMismatch, "channel volume size does not match geometry");
  const auto paths = native_paths(base);
  ensure_parent(paths.header);
  write_raw<float>(paths.raw, v.values);
  json j = base_header(v.geometry, "f32", "CT", std::nullopt);
  j["channels"] = v.channels;
  write_header(paths.header, j);
}

ChannelVolume read_native_channels(const fs::path& base) {
  const auto paths = native_paths(base);
  const Header h = read_header(paths);
  if (h.dtype != "f32") fail(ErrorCode::HeaderParse, paths.header.string() + ": channel volumes are f32");
  ChannelVolume v;
  v.geometry = h.geometry;
  v.channels = h.channels;
  v.values = read_raw<float>(paths.raw, h.geometry.voxel_count() * static_cast<std::size_t>(h.channels));
  return v;
}

}  // namespace vseg
