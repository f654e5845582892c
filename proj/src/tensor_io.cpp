// Copyright 2026 The pmask Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pmask/tensor_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "pmask/errors.hpp"

namespace pmask {

namespace fs = std::filesystem;

void CamTensor::validate(int num_classes) const {
  if (data.channels() == 0 || data.height() == 0 || data.width() == 0) {
    throw ValidationError("CAM tensor must have C, H, W >= 1");
  }
  if (class_ids.size() != data.channels()) {
    throw ValidationError("class_ids has " + std::to_string(class_ids.size()) +
                          " entries but the tensor has " + std::to_string(data.channels()) +
                          " channels");
  }
  const int max_id = num_classes > 0 ? num_classes - 1 : 254;
  std::set<int> seen;
  for (int id : class_ids) {
    if (id < 1 || id > max_id) {
      throw ValidationError("class id " + std::to_string(id) + " outside [1, " +
                            std::to_string(max_id) + "]");
    }
    if (!seen.insert(id).second) {
      throw ValidationError("duplicate class id " + std::to_string(id));
    }
  }
  for (double v : data.values()) {
    if (!std::isfinite(v) || v < 0.0) {
      throw ValidationError("CAM entries must be finite and non-negative");
    }
  }
}

const Palette& voc_palette() {
  static const Palette palette = [] {
    Palette p{};
    for (int i = 0; i < 256; ++i) {
      int r = 0, g = 0, b = 0, c = i;
      for (int j = 0; j < 8; ++j) {
        r |= ((c >> 0) & 1) << (7 - j);
        g |= ((c >> 1) & 1) << (7 - j);
        b |= ((c >> 2) & 1) << (7 - j);
        c >>= 3;
      }
      p[i] = {static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g),
              static_cast<std::uint8_t>(b)};
    }
    return p;
  }();
  return palette;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path.string());
  return std::move(ss).str();
}

void write_file_atomic(const fs::path& path, const std::string& bytes) {
  fs::path tmp = path;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot move " + tmp.string() + " into place");
  }
}

// --- NPY -------------------------------------------------------------------

namespace {

constexpr char kNpyMagic[] = "\x93NUMPY";

std::string npy_field(const std::string& header, const std::string& key) {
  for (const char q : {'\'', '"'}) {
    const std::string needle = std::string(1, q) + key + std::string(1, q);
    const auto pos = header.find(needle);
    if (pos == std::string::npos) continue;
    auto colon = header.find(':', pos + needle.size());
    if (colon == std::string::npos) break;
    auto start = header.find_first_not_of(" \t", colon + 1);
    if (start == std::string::npos) break;
    if (header[start] == '\'' || header[start] == '"') {
      auto end = header.find(header[start], start + 1);
      if (end == std::string::npos) break;
      return header.substr(start + 1, end - start - 1);
    }
    if (header[start] == '(') {
      auto end = header.find(')', start);
      if (end == std::string::npos) break;
      return header.substr(start, end - start + 1);
    }
    auto end = header.find_first_of(",}", start);
    if (end == std::string::npos) break;
    auto s = header.substr(start, end - start);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
    return s;
  }
  throw FormatError("NPY header lacks '" + key + "'");
}

std::vector<std::size_t> parse_shape(const std::string& tuple) {
  if (tuple.size() < 2 || tuple.front() != '(' || tuple.back() != ')') {
    throw FormatError("NPY shape is not a tuple: " + tuple);
  }
  std::vector<std::size_t> shape;
  std::string inner = tuple.substr(1, tuple.size() - 2);
  std::stringstream ss(inner);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    auto e = item.find_last_not_of(" \tL");
    item = item.substr(b, e - b + 1);
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &used);
    } catch (const std::exception&) {
      throw FormatError("bad NPY shape entry: " + item);
    }
    if (used != item.size()) throw FormatError("bad NPY shape entry: " + item);
    shape.push_back(static_cast<std::size_t>(v));
  }
  return shape;
}

template <class U>
U byteswap(U u) {
  U r = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    r = static_cast<U>((r << 8) | ((u >> (8 * i)) & 0xff));
  }
  return r;
}

template <class U>
U load_scalar(const char* p, bool big_endian) {
  U u;
  std::memcpy(&u, p, sizeof(U));
  const bool host_big = std::endian::native == std::endian::big;
  if (big_endian != host_big) u = byteswap(u);
  return u;
}

template <class U>
void store_le(std::string& out, U u) {
  if constexpr (std::endian::native == std::endian::big) u = byteswap(u);
  char buf[sizeof(U)];
  std::memcpy(buf, &u, sizeof(U));
  out.append(buf, sizeof(U));
}

}  // namespace

NpyArray read_npy(const fs::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 10 || bytes.compare(0, 6, kNpyMagic, 6) != 0) {
    throw FormatError(path.string() + ": missing NPY magic");
  }
  const auto major = static_cast<unsigned char>(bytes[6]);
  std::size_t header_len = 0;
  std::size_t offset = 0;
  if (major == 1) {
    header_len = load_scalar<std::uint16_t>(bytes.data() + 8, false);
    offset = 10;
  } else if (major == 2 || major == 3) {
    if (bytes.size() < 12) throw FormatError(path.string() + ": truncated NPY header");
    header_len = load_scalar<std::uint32_t>(bytes.data() + 8, false);
    offset = 12;
  } else {
    throw FormatError(path.string() + ": unsupported NPY version " + std::to_string(major));
  }
  if (bytes.size() < offset + header_len) {
    throw FormatError(path.string() + ": truncated NPY header");
  }
  const std::string header = bytes.substr(offset, header_len);
  const std::string descr = npy_field(header, "descr");
  const std::string fortran = npy_field(header, "fortran_order");
  NpyArray arr;
  arr.shape = parse_shape(npy_field(header, "shape"));
  if (fortran != "False") throw FormatError(path.string() + ": Fortran order not supported");
  if (descr.size() != 3 || descr[1] != 'f' || (descr[2] != '4' && descr[2] != '8') ||
      (descr[0] != '<' && descr[0] != '>' && descr[0] != '=')) {
    throw FormatError(path.string() + ": unsupported dtype " + descr);
  }
  const bool big = descr[0] == '>' ||
                   (descr[0] == '=' && std::endian::native == std::endian::big);
  const std::size_t width = descr[2] == '4' ? 4 : 8;
  std::size_t count = 1;
  for (auto d : arr.shape) count *= d;
  const std::size_t data_off = offset + header_len;
  if (bytes.size() - data_off != count * width) {
    throw FormatError(path.string() + ": payload size does not match shape");
  }
  arr.data.resize(count);
  const char* p = bytes.data() + data_off;
  for (std::size_t i = 0; i < count; ++i) {
    if (width == 4) {
      arr.data[i] = std::bit_cast<float>(load_scalar<std::uint32_t>(p + 4 * i, big));
    } else {
      arr.data[i] = std::bit_cast<double>(load_scalar<std::uint64_t>(p + 8 * i, big));
    }
  }
  return arr;
}

void write_npy_f32(const fs::path& path, const std::vector<std::size_t>& shape,
                   std::span<const double> data) {
  std::size_t count = 1;
  for (auto d : shape) count *= d;
  if (count != data.size()) throw ValidationError("NPY shape does not match data size");
  std::string dict = "{'descr': '<f4', 'fortran_order': False, 'shape': (";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) dict += ", ";
    dict += std::to_string(shape[i]);
  }
  if (shape.size() == 1) dict += ",";
  dict += "), }";
  // Pad so the payload starts on a 64-byte boundary; header ends with '\n'.
  std::size_t total = 10 + dict.size() + 1;
  dict.append((64 - total % 64) % 64, ' ');
  dict += '\n';

  std::string out(kNpyMagic, 6);
  out += '\x01';
  out += '\x00';
  store_le<std::uint16_t>(out, static_cast<std::uint16_t>(dict.size()));
  out += dict;
  out.reserve(out.size() + 4 * count);
  for (double v : data) store_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  write_file_atomic(path, out);
}

fs::path sidecar_path(const fs::path& npy_path) {
  fs::path p = npy_path;
  p.replace_extension(".json");
  return p;
}

CamTensor load_cam_tensor(const fs::path& path) {
  NpyArray arr = read_npy(path);
  if (arr.shape.size() != 3) {
    throw FormatError(path.string() + ": CAM tensor must have shape (C, H, W)");
  }
  CamTensor t;
  t.data = Volume<double>(arr.shape[0], arr.shape[1], arr.shape[2]);
  t.data.storage() = std::move(arr.data);

  const fs::path side = sidecar_path(path);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_file(side));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(side.string() + ": " + e.what());
  }
  if (!meta.is_object() || !meta.contains("class_ids") || !meta["class_ids"].is_array()) {
    throw FormatError(side.string() + ": expected {\"class_ids\": [...]}");
  }
  for (const auto& id : meta["class_ids"]) {
    if (!id.is_number_integer()) throw FormatError(side.string() + ": class ids must be integers");
    t.class_ids.push_back(id.get<int>());
  }
  t.validate();
  return t;
}

void save_cam_tensor(const CamTensor& t, const fs::path& path, std::optional<std::string> image_id) {
  write_npy_f32(path, {t.channels(), t.height(), t.width()}, t.data.values());
  nlohmann::json meta;
  meta["class_ids"] = t.class_ids;
  meta["image_id"] = image_id.value_or(path.stem().string());
  write_file_atomic(sidecar_path(path), meta.dump() + "\n");
}

// --- PNG -------------------------------------------------------------------

namespace {

struct PngErrorState {
  char message[256] = {0};
};

void png_error_handler(png_structp png, png_const_charp msg) {
  auto* st = static_cast<PngErrorState*>(png_get_error_ptr(png));
  std::snprintf(st->message, sizeof(st->message), "%s", msg);
  png_longjmp(png, 1);
}

void png_warning_handler(png_structp, png_const_charp) {}

struct MemoryReader {
  const std::string* bytes;
  std::size_t pos;
};

void png_read_memory(png_structp png, png_bytep out, png_size_t n) {
  auto* r = static_cast<MemoryReader*>(png_get_io_ptr(png));
  if (r->pos + n > r->bytes->size()) png_error(png, "unexpected end of data");
  std::memcpy(out, r->bytes->data() + r->pos, n);
  r->pos += n;
}

void png_write_memory(png_structp png, png_bytep data, png_size_t n) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), n);
}
void png_flush_memory(png_structp) {}

enum class PngMode { kIndices, kRgb };

struct DecodedPng {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> data;  // indices (1 byte/px) or RGB (3 bytes/px)
  std::vector<png_bytep> rows;
  bool not_indexed = false;
};

// No objects with destructors live in this frame across setjmp.
bool decode_png_raw(const std::string* bytes, PngMode mode, DecodedPng* out, PngErrorState* err) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, err, png_error_handler,
                                           png_warning_handler);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return false;
  }
  MemoryReader reader{bytes, 0};
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_set_read_fn(png, &reader, png_read_memory);
  png_read_info(png, info);
  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  out->width = w;
  out->height = h;
  if (mode == PngMode::kIndices) {
    if (color != PNG_COLOR_TYPE_PALETTE) {
      out->not_indexed = true;
      png_destroy_read_struct(&png, &info, nullptr);
      return true;
    }
    if (depth < 8) png_set_packing(png);
  } else {
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (depth == 16) png_set_strip_16(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
      png_set_gray_to_rgb(png);
    }
    png_set_interlace_handling(png);
  }
  png_read_update_info(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  const std::size_t expected = mode == PngMode::kIndices ? w : static_cast<std::size_t>(w) * 3;
  if (rowbytes != expected) png_error(png, "unexpected row layout");
  out->data.resize(rowbytes * h);
  out->rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) out->rows[y] = out->data.data() + y * rowbytes;
  png_read_image(png, out->rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

bool is_png(const std::string& bytes) {
  return bytes.size() >= 8 && png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) == 0;
}

DecodedPng decode_png(const std::string& bytes, PngMode mode, const fs::path& path) {
  if (!is_png(bytes)) throw FormatError(path.string() + ": not a PNG file");
  DecodedPng out;
  PngErrorState err;
  if (!decode_png_raw(&bytes, mode, &out, &err)) {
    throw FormatError(path.string() + ": " + (err.message[0] ? err.message : "PNG decode failed"));
  }
  return out;
}

bool encode_png_raw(std::string* sink, std::size_t w, std::size_t h, bool indexed,
                    const std::vector<png_bytep>* rows, PngErrorState* err) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, err, png_error_handler,
                                            png_warning_handler);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_set_write_fn(png, sink, png_write_memory, png_flush_memory);
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
               indexed ? PNG_COLOR_TYPE_PALETTE : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  if (indexed) {
    png_color colors[256];
    const Palette& pal = voc_palette();
    for (int i = 0; i < 256; ++i) colors[i] = {pal[i][0], pal[i][1], pal[i][2]};
    png_set_PLTE(png, info, colors, 256);
  }
  png_write_info(png, info);
  png_write_image(png, const_cast<png_bytepp>(rows->data()));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

std::string encode_png(const std::uint8_t* data, std::size_t w, std::size_t h, bool indexed) {
  if (w == 0 || h == 0) throw ValidationError("cannot encode an empty image");
  const std::size_t rowbytes = indexed ? w : w * 3;
  std::vector<png_bytep> rows(h);
  for (std::size_t y = 0; y < h; ++y) rows[y] = const_cast<png_bytep>(data + y * rowbytes);
  std::string sink;
  PngErrorState err;
  if (!encode_png_raw(&sink, w, h, indexed, &rows, &err)) {
    throw IoError(std::string("PNG encode failed: ") + err.message);
  }
  return sink;
}

RgbImage load_ppm(const std::string& bytes, const fs::path& path) {
  std::size_t pos = 2;
  auto next_token = [&]() -> long {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw FormatError(path.string() + ": malformed PPM header");
    return std::stol(bytes.substr(start, pos - start));
  };
  const long w = next_token();
  const long h = next_token();
  const long maxval = next_token();
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) {
    throw FormatError(path.string() + ": unsupported PPM dimensions or maxval");
  }
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw FormatError(path.string() + ": malformed PPM header");
  }
  ++pos;
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3;
  if (bytes.size() - pos < n) throw FormatError(path.string() + ": truncated PPM payload");
  RgbImage img(static_cast<std::size_t>(h), static_cast<std::size_t>(w));
  for (std::size_t i = 0; i < n; ++i) {
    long v = static_cast<unsigned char>(bytes[pos + i]);
    img.pixels[i] = static_cast<std::uint8_t>(maxval == 255 ? v : (v * 255 + maxval / 2) / maxval);
  }
  return img;
}

}  // namespace

void encode_mask_png(const PseudoMask& m, const fs::path& path) {
  write_file_atomic(path, encode_png(m.labels.storage().data(), m.width(), m.height(), true));
}

PseudoMask decode_mask_png(const fs::path& path) {
  DecodedPng d = decode_png(read_file(path), PngMode::kIndices, path);
  if (d.not_indexed) throw FormatError(path.string() + ": mask PNG is not palette-indexed");
  PseudoMask m(d.height, d.width);
  std::copy(d.data.begin(), d.data.end(), m.labels.storage().begin());
  return m;
}

RgbImage load_image(const fs::path& path) {
  const std::string bytes = read_file(path);
  if (is_png(bytes)) {
    DecodedPng d = decode_png(bytes, PngMode::kRgb, path);
    RgbImage img(d.height, d.width);
    img.pixels = std::move(d.data);
    return img;
  }
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return load_ppm(bytes, path);
  throw FormatError(path.string() + ": unsupported image format (expected PNG or PPM P6)");
}

void save_image_png(const RgbImage& img, const fs::path& path) {
  write_file_atomic(path, encode_png(img.pixels.data(), img.width, img.height, false));
}

void save_image_ppm(const RgbImage& img, const fs::path& path) {
  std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.pixels.data()), img.pixels.size());
  write_file_atomic(path, out);
}

std::map<std::string, std::filesystem::path> index_by_stem(
    const std::filesystem::path& dir, const std::vector<std::string>& exts) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) throw IoError("not a directory: " + dir.string());
  std::map<std::string, std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (std::find(exts.begin(), exts.end(), ext) == exts.end()) continue;
    const std::string stem = entry.path().stem().string();
    if (!out.emplace(stem, entry.path()).second) {
      throw ValidationError("duplicate stem '" + stem + "' in " + dir.string());
    }
  }
  return out;
}

const std::vector<std::string>& image_extensions() {
  static const std::vector<std::string> exts{".png", ".ppm"};
  return exts;
}

}  // namespace pmask
