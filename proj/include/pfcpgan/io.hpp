#pragma once

// PNG images and the on-disk dataset layout
//   <root>/<subject_id>/{frontal,profile}/<name>[_y<+-deg>].png

#include <png.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <vector>

#include "pfcpgan/data.hpp"
#include "pfcpgan/error.hpp"

namespace pfcpgan {

struct Image8 {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<unsigned char> bytes;  // row-major, interleaved
};

inline Image8 read_png(const std::filesystem::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str()))
    throw IngestionError(path.string(), std::string("unreadable PNG: ") + img.message);
  Image8 out;
  out.channels = (img.format & PNG_FORMAT_FLAG_COLOR) ? 3 : 1;
  img.format = out.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  out.width = int(img.width);
  out.height = int(img.height);
  out.bytes.resize(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, out.bytes.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw IngestionError(path.string(), "corrupt PNG: " + msg);
  }
  return out;
}

inline void write_png(const std::filesystem::path& path, const Image8& im) {
  if (im.channels != 1 && im.channels != 3) throw IoError(path.string() + ": only 1 or 3 channel images are written");
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = png_uint_32(im.width);
  img.height = png_uint_32(im.height);
  img.format = im.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, path.string().c_str(), 0, im.bytes.data(), 0, nullptr))
    throw IoError(path.string() + ": cannot write PNG: " + img.message);
}

inline unsigned char to_byte(float v) {
  return static_cast<unsigned char>(std::lround(std::clamp(double(v), 0.0, 1.0) * 255.0));
}

inline Image8 to_image8(const ImageShape& s, std::span<const float> pixels) {
  Image8 im{s.width, s.height, s.channels, {}};
  im.bytes.reserve(pixels.size());
  for (float v : pixels) im.bytes.push_back(to_byte(v));
  return im;
}

inline std::string format_yaw(double yaw) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+.2f", yaw);
  return buf;
}

/// Writes samples in the dataset layout. File names are s<sample_id>[_y<yaw>].png.
inline void export_dataset(const std::filesystem::path& root, std::span<const ImageSample> samples) {
  for (const auto& s : samples) {
    char subject[32], name[64];
    std::snprintf(subject, sizeof subject, "%03d", s.subject_id);
    std::snprintf(name, sizeof name, "s%06lld", (long long)s.sample_id);
    std::string file = name;
    if (s.domain == Domain::kProfile) file += "_y" + format_yaw(s.yaw_deg);
    const auto dir = root / subject / domain_name(s.domain);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError(dir.string() + ": cannot create directory: " + ec.message());
    write_png(dir / (file + ".png"), to_image8(s.shape, s.pixels));
  }
}

namespace detail {

inline std::optional<int> parse_subject(const std::string& s) {
  int v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size() || v < 0) return std::nullopt;
  return v;
}

}  // namespace detail

/// Loads a dataset directory. Files are visited in (subject, frontal-then-profile,
/// file name) order and sample_id is the resulting position. When `expected` is
/// given every image must match it; otherwise the first image fixes the shape.
/// Profile images without a yaw suffix get yaw 90. An empty root yields an empty
/// dataset and a warning on `warn`.
inline Dataset load_dataset(const std::filesystem::path& root, std::optional<ImageShape> expected = std::nullopt,
                            const std::function<void(const std::string&)>& warn = {}) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw IngestionError(root.string(), "not a directory");
  static const std::regex yaw_re("_y([+-]?[0-9]+(?:\\.[0-9]+)?)$");

  std::vector<std::pair<int, fs::path>> subjects;
  for (const auto& e : fs::directory_iterator(root)) {
    if (!e.is_directory()) continue;
    const auto id = detail::parse_subject(e.path().filename().string());
    if (!id) throw IngestionError(e.path().string(), "subject directory name must be a non-negative integer");
    subjects.emplace_back(*id, e.path());
  }
  std::sort(subjects.begin(), subjects.end());
  for (std::size_t i = 1; i < subjects.size(); ++i)
    if (subjects[i].first == subjects[i - 1].first)
      throw IngestionError(subjects[i].second.string(), "duplicate subject id " + std::to_string(subjects[i].first));

  Dataset out;
  std::optional<ImageShape> shape = expected;
  for (const auto& [subject, dir] : subjects) {
    for (Domain d : {Domain::kFrontal, Domain::kProfile}) {
      const fs::path ddir = dir / domain_name(d);
      if (!fs::exists(ddir)) continue;
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(ddir))
        if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
      std::sort(files.begin(), files.end());
      for (const auto& f : files) {
        ImageSample s;
        s.subject_id = subject;
        s.domain = d;
        std::smatch m;
        const std::string stem = f.stem().string();
        if (std::regex_search(stem, m, yaw_re)) {
          s.yaw_deg = std::stod(m[1].str());
          if (!(s.yaw_deg >= -90.0 && s.yaw_deg <= 90.0)) throw IngestionError(f.string(), "yaw outside [-90, 90]");
          if (d == Domain::kFrontal && s.yaw_deg != 0.0)
            throw IngestionError(f.string(), "frontal image with non-zero yaw");
        } else {
          s.yaw_deg = d == Domain::kProfile ? 90.0 : 0.0;
        }
        const Image8 im = read_png(f);
        const ImageShape got{im.height, im.width, im.channels};
        if (!shape) shape = got;
        if (!(got == *shape))
          throw IngestionError(f.string(), "image is " + std::to_string(got.height) + "x" + std::to_string(got.width) +
                                               "x" + std::to_string(got.channels) + ", expected " +
                                               std::to_string(shape->height) + "x" + std::to_string(shape->width) +
                                               "x" + std::to_string(shape->channels));
        s.shape = got;
        s.pixels.reserve(im.bytes.size());
        for (unsigned char b : im.bytes) s.pixels.push_back(float(b) / 255.0f);
        s.sample_id = std::int64_t(out.size());
        out.push_back(std::move(s));
      }
    }
  }
  if (out.empty()) {
    if (warn)
      warn(root.string() + ": no images found");
    else
      std::cerr << "warning: " << root.string() << ": no images found\n";
  }
  return out;
}

/// Side-by-side panel: input i in column 2i, its reconstruction in column 2i+1
/// (odd/even columns counting from one).
inline Image8 make_panel(const ImageShape& s, std::span<const std::vector<float>> inputs,
                         std::span<const std::vector<float>> recons) {
  if (inputs.size() != recons.size() || inputs.empty()) throw DimensionError("make_panel: need matching non-empty lists");
  const int cols = int(inputs.size()) * 2;
  Image8 im{s.width * cols, s.height, s.channels, {}};
  im.bytes.assign(std::size_t(im.width) * im.height * im.channels, 0);
  for (int col = 0; col < cols; ++col) {
    const auto& px = col % 2 == 0 ? inputs[std::size_t(col / 2)] : recons[std::size_t(col / 2)];
    if (px.size() != s.pixel_count()) throw DimensionError("make_panel: image size mismatch");
    for (int y = 0; y < s.height; ++y)
      for (int x = 0; x < s.width; ++x)
        for (int c = 0; c < s.channels; ++c)
          im.bytes[(std::size_t(y) * im.width + std::size_t(col) * s.width + x) * s.channels + c] =
              to_byte(px[(std::size_t(y) * s.width + x) * s.channels + c]);
  }
  return im;
}

}  // namespace pfcpgan
